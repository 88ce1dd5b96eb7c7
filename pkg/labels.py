"""Event annotations on the 100 ms label grid, and helpers to slice them.

Azimuths increase counterclockwise (0 = front, +90 = left) and are kept in
the half-open interval [-180, 180) so that every angle has one spelling.
"""

import collections
import dataclasses

import numpy as np

from errors import ConfigError

FRAME_S = 0.1
NUM_CLASSES = 13


def wrap_azimuth(azimuth_deg):
    """Wrap degrees into [-180, 180). Works on scalars and numpy arrays."""
    if isinstance(azimuth_deg, np.ndarray):
        wrapped = np.mod(azimuth_deg + 180.0, 360.0) - 180.0
        return np.where(wrapped >= 180.0, wrapped - 360.0, wrapped)
    wrapped = (float(azimuth_deg) + 180.0) % 360.0 - 180.0
    # float modulo can land exactly on +180 for tiny negative inputs
    return -180.0 if wrapped >= 180.0 else wrapped


def n_label_frames(length_s):
    return int(round(length_s / FRAME_S))


@dataclasses.dataclass(frozen=True, order=True)
class EventAnnotation:
    frame_index: int
    class_index: int
    source_index: int
    azimuth_deg: float
    elevation_deg: float = 0.0

    def __post_init__(self):
        if self.frame_index < 0:
            raise ConfigError(f"negative frame index {self.frame_index}")
        if not 0 <= self.class_index < NUM_CLASSES:
            raise ConfigError(f"class index {self.class_index} outside [0, {NUM_CLASSES})")
        if self.source_index < 0:
            raise ConfigError(f"negative source index {self.source_index}")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ConfigError(f"elevation {self.elevation_deg} outside [-90, 90]")
        object.__setattr__(self, "azimuth_deg", wrap_azimuth(self.azimuth_deg))

    @property
    def key(self):
        return (self.frame_index, self.class_index, self.source_index)

    def with_direction(self, azimuth_deg, elevation_deg=None):
        return dataclasses.replace(
            self,
            azimuth_deg=azimuth_deg,
            elevation_deg=self.elevation_deg if elevation_deg is None else elevation_deg,
        )


def sort_annotations(annotations):
    return sorted(annotations, key=lambda a: a.key)


def group_by_frame_class(annotations):
    """Map (frame, class) -> list of annotations, keys in ascending order."""
    groups = collections.defaultdict(list)
    for a in annotations:
        groups[(a.frame_index, a.class_index)].append(a)
    return {k: sorted(groups[k], key=lambda a: a.source_index) for k in sorted(groups)}


def sources_per_frame(annotations):
    """Map frame index -> number of active (class, source) records."""
    counts = collections.Counter(a.frame_index for a in annotations)
    return dict(sorted(counts.items()))


def flatten_to_horizontal(annotations):
    return [a.with_direction(a.azimuth_deg, 0.0) for a in annotations]
