"""Joint localization and detection scores.

References and predictions are paired per (frame, class) by optimal
assignment on angular distance. Detection counts (ER, F) use a distance
tolerance; localization error and recall are threshold-free.
"""

import dataclasses
import logging

import numpy as np
import scipy.optimize

from labels import group_by_frame_class

DEFAULT_TOLERANCE_DEG = 20.0
NO_PAIRS_LE_DEG = 180.0


def _unit_vectors(azimuth_deg, elevation_deg):
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=np.float64))
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def angular_distances(az_a, el_a, az_b, el_b):
    """Great-circle distance in degrees, broadcasting over its inputs.

    On the horizontal plane this is exactly |wrap(az_a - az_b)|.
    """
    az_a, el_a, az_b, el_b = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (az_a, el_a, az_b, el_b))
    )
    horizontal = np.abs(np.mod(az_a - az_b + 180.0, 360.0) - 180.0)
    u = _unit_vectors(az_a, el_a)
    v = _unit_vectors(az_b, el_b)
    spherical = np.rad2deg(
        np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1), np.sum(u * v, axis=-1))
    )
    return np.where((el_a == 0.0) & (el_b == 0.0), horizontal, spherical)


def angular_distance(a, b):
    """Distance in degrees between two Directions (or annotations)."""
    return float(angular_distances(a.azimuth_deg, a.elevation_deg, b.azimuth_deg, b.elevation_deg))


@dataclasses.dataclass(frozen=True)
class MatchedPair:
    pred: object
    ref: object
    distance_deg: float


@dataclasses.dataclass(frozen=True)
class MatchResult:
    frame_index: int
    class_index: int
    pairs: tuple = ()
    unmatched_preds: tuple = ()
    unmatched_refs: tuple = ()
    scene_id: str = ""

    @property
    def n_refs(self):
        return len(self.pairs) + len(self.unmatched_refs)

    @property
    def n_preds(self):
        return len(self.pairs) + len(self.unmatched_preds)


def match_frame(preds, refs, frame_index=None, class_index=None, scene_id=""):
    """Minimum total distance assignment for one (frame, class)."""
    preds = list(preds)
    refs = list(refs)
    first = (preds or refs or [None])[0]
    if frame_index is None:
        frame_index = getattr(first, "frame_index", 0)
    if class_index is None:
        class_index = getattr(first, "class_index", 0)
    if not preds or not refs:
        return MatchResult(frame_index, class_index, (), tuple(preds), tuple(refs), scene_id)

    cost = angular_distances(
        np.array([p.azimuth_deg for p in preds])[:, None],
        np.array([p.elevation_deg for p in preds])[:, None],
        np.array([r.azimuth_deg for r in refs])[None, :],
        np.array([r.elevation_deg for r in refs])[None, :],
    )
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    pairs = tuple(MatchedPair(preds[i], refs[j], float(cost[i, j])) for i, j in zip(rows, cols))
    matched_preds, matched_refs = set(rows.tolist()), set(cols.tolist())
    unmatched_preds = tuple(p for i, p in enumerate(preds) if i not in matched_preds)
    unmatched_refs = tuple(r for j, r in enumerate(refs) if j not in matched_refs)
    return MatchResult(frame_index, class_index, pairs, unmatched_preds, unmatched_refs, scene_id)


def match_annotations(preds, refs, scene_id=""):
    """Match every (frame, class) present in either list, in ascending order."""
    pred_groups = group_by_frame_class(preds)
    ref_groups = group_by_frame_class(refs)
    keys = sorted(set(pred_groups) | set(ref_groups))
    return [
        match_frame(pred_groups.get(k, []), ref_groups.get(k, []), k[0], k[1], scene_id)
        for k in keys
    ]


def compose_seld(error_rate, f_score, localization_error_deg, localization_recall):
    le = NO_PAIRS_LE_DEG if localization_error_deg is None else localization_error_deg
    return (min(error_rate, 1.0) + (1.0 - f_score) + le / 180.0 + (1.0 - localization_recall)) / 4.0


@dataclasses.dataclass(frozen=True)
class SeldScores:
    error_rate: float
    f_score: float
    localization_error_deg: float
    localization_recall: float
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    n_refs: int = 0
    n_pairs: int = 0

    @property
    def seld_score(self):
        return compose_seld(self.error_rate, self.f_score, self.localization_error_deg, self.localization_recall)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["seld_score"] = self.seld_score
        return d


def compute_scores(matches, tolerance_deg=DEFAULT_TOLERANCE_DEG):
    """Scores over a list of MatchResult.

    ER is accumulated per scene frame (all classes of a frame together). With no
    references ER is the insertion count and LR is 0; with no pairs LE is
    None.
    """
    per_frame = {}
    tp = fp = fn = n_refs = 0
    distances = []
    for m in matches:
        close = sum(1 for p in m.pairs if p.distance_deg <= tolerance_deg)
        far = len(m.pairs) - close
        m_fp = len(m.unmatched_preds) + far
        m_fn = len(m.unmatched_refs) + far
        tp += close
        fp += m_fp
        fn += m_fn
        n_refs += m.n_refs
        distances.extend(p.distance_deg for p in m.pairs)
        frame_fn, frame_fp = per_frame.get((m.scene_id, m.frame_index), (0, 0))
        per_frame[(m.scene_id, m.frame_index)] = (frame_fn + m_fn, frame_fp + m_fp)

    substitutions = deletions = insertions = 0
    for frame_fn, frame_fp in per_frame.values():
        substitutions += min(frame_fn, frame_fp)
        deletions += max(0, frame_fn - frame_fp)
        insertions += max(0, frame_fp - frame_fn)

    if n_refs:
        error_rate = (substitutions + deletions + insertions) / n_refs
        recall = len(distances) / n_refs
    else:
        error_rate = float(insertions)
        recall = 0.0
    denominator = 2 * tp + fp + fn
    f_score = 2 * tp / denominator if denominator else 0.0
    le = float(np.mean(distances)) if distances else None

    scores = SeldScores(error_rate, f_score, le, recall, tp, fp, fn, n_refs, len(distances))
    logging.debug(f"scores over {len(per_frame)} frames: {scores.as_dict()}")
    return scores


def score_annotations(preds, refs, tolerance_deg=DEFAULT_TOLERANCE_DEG):
    return compute_scores(match_annotations(preds, refs), tolerance_deg)


# Published component metrics: (ER, F, LE degrees, LR) and the reported SELD score.
PUBLISHED_ROWS = {
    "A": ((0.73, 0.153, 53.7, 0.27), 0.65),
    "B": ((0.62, 0.345, 22.5, 0.51), 0.47),
    "C": ((0.56, 0.433, 16.9, 0.541), 0.42),
    "B+E": ((0.70, 0.273, 26.1, 0.475), 0.53),
    "C+E": ((0.62, 0.33, 22.7, 0.51), 0.48),
    "FOA": ((0.56, 0.433, 16.9, 0.541), 0.42),
    "binaural": ((0.67, 0.339, 30.1, 0.492), 0.50),
    "stereo": ((0.76, 0.217, 42.9, 0.388), 0.60),
}


def compose_reference_rows():
    """(name, components, reported, recomputed) for every published row."""
    return [
        (name, components, reported, compose_seld(*components))
        for name, (components, reported) in PUBLISHED_ROWS.items()
    ]
