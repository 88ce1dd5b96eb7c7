"""Multi-ACCDOA grids: frames x classes x tracks x (x, y, z).

A slot's vector points at the source and its length is the activity.
Source index s occupies track s; only indices beyond the track count are
moved into a free track, so decoding returns the indices that were encoded.
"""

import dataclasses

import numpy as np

from ambisonics import cos_deg, sin_deg
from errors import CapacityError, ConfigError, SignalError
from features import dump_tensor, load_tensor
from labels import NUM_CLASSES, EventAnnotation, group_by_frame_class, sort_annotations

DEFAULT_TRACKS = 3
DEFAULT_THRESHOLD = 0.5


@dataclasses.dataclass(frozen=True, eq=False)
class AccdoaGrid:
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 4 or vectors.shape[1] != NUM_CLASSES or vectors.shape[3] != 3:
            raise SignalError(f"ACCDOA grid must be frames x {NUM_CLASSES} x tracks x 3, got {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise SignalError("ACCDOA grid contains NaN or Inf")
        vectors.flags.writeable = False
        object.__setattr__(self, "vectors", vectors)

    @property
    def frames(self):
        return self.vectors.shape[0]

    @property
    def classes(self):
        return self.vectors.shape[1]

    @property
    def tracks(self):
        return self.vectors.shape[2]

    def activity(self):
        return np.linalg.norm(self.vectors, axis=-1)

    @classmethod
    def zeros(cls, frames, tracks=DEFAULT_TRACKS):
        return cls(np.zeros((frames, NUM_CLASSES, tracks, 3)))

    def save(self, path):
        dump_tensor(path, self.vectors)

    @classmethod
    def load(cls, path):
        return cls(load_tensor(path))


def direction_vector(azimuth_deg, elevation_deg=0.0):
    ce = cos_deg(elevation_deg)
    return np.array([cos_deg(azimuth_deg) * ce, sin_deg(azimuth_deg) * ce, sin_deg(elevation_deg)])


def _assign_tracks(group, tracks):
    """Source s keeps track s; indices >= tracks take the lowest free track."""
    if len(group) > tracks:
        a = group[0]
        raise CapacityError(
            f"frame {a.frame_index} class {a.class_index} has more than {tracks} simultaneous sources"
        )
    if len({a.source_index for a in group}) != len(group):
        a = group[0]
        raise ConfigError(f"frame {a.frame_index} class {a.class_index} repeats a source index")
    assigned = {a.source_index: a for a in group if a.source_index < tracks}
    free = iter(t for t in range(tracks) if t not in assigned)
    for a in group:
        if a.source_index >= tracks:
            assigned[next(free)] = a
    return assigned.items()


def encode_accdoa(annotations, frames, tracks=DEFAULT_TRACKS, horizontal_only=True):
    if tracks < 1:
        raise ConfigError("need at least one track")
    vectors = np.zeros((frames, NUM_CLASSES, tracks, 3))
    for (frame, class_index), group in group_by_frame_class(annotations).items():
        if frame >= frames:
            raise ConfigError(f"annotation frame {frame} outside a {frames}-frame grid")
        for track, a in _assign_tracks(group, tracks):
            elevation = 0.0 if horizontal_only else a.elevation_deg
            vectors[frame, class_index, track] = direction_vector(a.azimuth_deg, elevation)
    return AccdoaGrid(vectors)


def decode_accdoa(grid, threshold=DEFAULT_THRESHOLD, horizontal_only=True):
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"activity threshold must be in (0, 1), got {threshold}")
    norms = grid.activity()
    annotations = []
    for frame, class_index, track in zip(*np.nonzero(norms > threshold)):
        x, y, z = grid.vectors[frame, class_index, track]
        azimuth = np.rad2deg(np.arctan2(y, x))
        elevation = 0.0 if horizontal_only else float(np.rad2deg(np.arcsin(np.clip(z / norms[frame, class_index, track], -1, 1))))
        annotations.append(EventAnnotation(int(frame), int(class_index), int(track), float(azimuth), elevation))
    return sort_annotations(annotations)
