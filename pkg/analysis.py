"""Quadrant confusion, polyphony breakdown and azimuth balance reports.

Reports hold raw counts and sums so that merging across scenes is plain
addition; normalized views are computed on demand.
"""

import dataclasses
import enum

import numpy as np

from doa import lateral_angle_deg
from labels import sources_per_frame, wrap_azimuth

MAX_POLYPHONY_BUCKET = 4


class Quadrant(enum.IntEnum):
    FRONT = 0
    LEFT = 1
    BACK = 2
    RIGHT = 3

    @property
    def label(self):
        return self.name.capitalize()


def quadrant_of(azimuth_deg):
    """Front [-45, 45), Left [45, 135), Back [135, 180) and [-180, -135), Right [-135, -45)."""
    a = wrap_azimuth(azimuth_deg)
    if -45.0 <= a < 45.0:
        return Quadrant.FRONT
    if 45.0 <= a < 135.0:
        return Quadrant.LEFT
    if -135.0 <= a < -45.0:
        return Quadrant.RIGHT
    return Quadrant.BACK


@dataclasses.dataclass(frozen=True, eq=False)
class QuadrantReport:
    counts: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros((4, 4), dtype=np.int64))
    error_sums: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(4))
    unmatched_refs: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    unmatched_preds: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(4, dtype=np.int64))

    def merge(self, other):
        return QuadrantReport(
            self.counts + other.counts,
            self.error_sums + other.error_sums,
            self.unmatched_refs + other.unmatched_refs,
            self.unmatched_preds + other.unmatched_preds,
        )

    @property
    def support(self):
        return self.counts.sum(axis=1)

    @property
    def confusion(self):
        """Row-normalized true x predicted matrix; unsupported rows stay zero."""
        support = self.support[:, None]
        return np.divide(self.counts, support, out=np.zeros((4, 4)), where=support > 0)

    @property
    def per_quadrant_le(self):
        """Mean matched distance per true quadrant, None where a quadrant has no pairs."""
        return [float(s / n) if n else None for s, n in zip(self.error_sums, self.support)]

    @property
    def front_back_confusion(self):
        front, back = Quadrant.FRONT, Quadrant.BACK
        total = self.support[front] + self.support[back]
        swapped = self.counts[front, back] + self.counts[back, front]
        return float(swapped / total) if total else None

    def grid_triples(self):
        """(true quadrant, predicted quadrant, normalized value) for plotting."""
        confusion = self.confusion
        return [(Quadrant(r).label, Quadrant(c).label, float(confusion[r, c])) for r in range(4) for c in range(4)]


def quadrant_confusion(matches):
    report = QuadrantReport()
    for m in matches:
        for pair in m.pairs:
            row = quadrant_of(pair.ref.azimuth_deg)
            report.counts[row, quadrant_of(pair.pred.azimuth_deg)] += 1
            report.error_sums[row] += pair.distance_deg
        for ref in m.unmatched_refs:
            report.unmatched_refs[quadrant_of(ref.azimuth_deg)] += 1
        for pred in m.unmatched_preds:
            report.unmatched_preds[quadrant_of(pred.azimuth_deg)] += 1
    return report


@dataclasses.dataclass(frozen=True)
class PolyphonyBucket:
    n_refs: int = 0
    n_matched: int = 0
    error_sum: float = 0.0

    def __add__(self, other):
        return PolyphonyBucket(
            self.n_refs + other.n_refs, self.n_matched + other.n_matched, self.error_sum + other.error_sum
        )

    @property
    def recall(self):
        return self.n_matched / self.n_refs if self.n_refs else 0.0

    @property
    def localization_error_deg(self):
        return self.error_sum / self.n_matched if self.n_matched else None


@dataclasses.dataclass(frozen=True)
class PolyphonyReport:
    """Buckets keyed by simultaneous-source count; key 4 collects 4 or more."""

    buckets: dict = dataclasses.field(default_factory=dict)

    def merge(self, other):
        keys = sorted(set(self.buckets) | set(other.buckets))
        return PolyphonyReport(
            {k: self.buckets.get(k, PolyphonyBucket()) + other.buckets.get(k, PolyphonyBucket()) for k in keys}
        )

    @property
    def total_refs(self):
        return sum(b.n_refs for b in self.buckets.values())

    def overall_recall(self):
        total = self.total_refs
        return sum(b.n_matched for b in self.buckets.values()) / total if total else 0.0

    def recalls(self):
        return {k: self.buckets[k].recall for k in sorted(self.buckets)}


def polyphony_breakdown(matches, annotations):
    """Bucket every reference record of one scene by its frame's source count."""
    polyphony = sources_per_frame(annotations)
    buckets = {}

    def add(frame_index, matched, distance):
        k = min(polyphony.get(frame_index, 1), MAX_POLYPHONY_BUCKET)
        buckets[k] = buckets.get(k, PolyphonyBucket()) + PolyphonyBucket(1, int(matched), distance)

    for m in matches:
        for pair in m.pairs:
            add(m.frame_index, True, pair.distance_deg)
        for ref in m.unmatched_refs:
            add(m.frame_index, False, 0.0)
    return PolyphonyReport({k: buckets[k] for k in sorted(buckets)})


@dataclasses.dataclass(frozen=True, eq=False)
class AzimuthHistogram:
    bin_deg: float
    bins: np.ndarray
    quadrants: np.ndarray

    def merge(self, other):
        return AzimuthHistogram(self.bin_deg, self.bins + other.bins, self.quadrants + other.quadrants)

    def quadrant_counts(self):
        return {Quadrant(q).label: int(n) for q, n in enumerate(self.quadrants)}

    def bin_edges(self):
        return -180.0 + self.bin_deg * np.arange(self.bins.size + 1)


def azimuth_histogram(annotations, bin_deg=10.0):
    n_bins = int(round(360.0 / bin_deg))
    azimuths = np.array([wrap_azimuth(a.azimuth_deg) for a in annotations], dtype=np.float64)
    indices = np.clip(np.floor((azimuths + 180.0) / bin_deg).astype(int), 0, n_bins - 1)
    quadrants = np.array([quadrant_of(az) for az in azimuths], dtype=int)
    return AzimuthHistogram(
        bin_deg,
        np.bincount(indices, minlength=n_bins),
        np.bincount(quadrants, minlength=4),
    )


@dataclasses.dataclass(frozen=True)
class LateralReport:
    band_deg: tuple
    lateral_pairs: int
    lateral_le: float
    lateral_interaural_error: float
    front_back_pairs: int
    front_back_le: float
    front_back_interaural_error: float

    @property
    def front_back_to_lateral_ratio(self):
        if not self.lateral_le or self.front_back_le is None:
            return None
        return self.front_back_le / self.lateral_le


def _mean_or_none(values):
    return float(np.mean(values)) if values else None


def lateral_robustness(matches, band=(60.0, 120.0)):
    """Error for references whose |azimuth| lies in `band` versus the front and back quadrants.

    Besides great-circle LE each group reports the interaural error, the
    difference of arcsin(sin azimuth) between prediction and reference.
    """
    low, high = band
    lateral, lateral_ia, front_back, front_back_ia = [], [], [], []
    for m in matches:
        for pair in m.pairs:
            ref_az = wrap_azimuth(pair.ref.azimuth_deg)
            interaural = abs(float(lateral_angle_deg(pair.pred.azimuth_deg) - lateral_angle_deg(ref_az)))
            if low <= abs(ref_az) <= high:
                lateral.append(pair.distance_deg)
                lateral_ia.append(interaural)
            if quadrant_of(ref_az) in (Quadrant.FRONT, Quadrant.BACK):
                front_back.append(pair.distance_deg)
                front_back_ia.append(interaural)
    return LateralReport(
        tuple(band),
        len(lateral),
        _mean_or_none(lateral),
        _mean_or_none(lateral_ia),
        len(front_back),
        _mean_or_none(front_back),
        _mean_or_none(front_back_ia),
    )
