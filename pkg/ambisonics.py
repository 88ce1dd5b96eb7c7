"""First-order Ambisonics buffers, point-source encoding and ACS rotation.

Convention: ambiX, i.e. ACN channel order (W, Y, Z, X) with SN3D
normalization. A plane wave s from azimuth a, elevation e encodes to

    W = s, Y = s sin(a) cos(e), Z = s sin(e), X = s cos(a) cos(e)

Azimuth increases counterclockwise, so +90 is hard left.

Rotations by multiples of 90 degrees are done by swapping and negating
X and Y, never through a rotation matrix, so they are exact.
"""

import dataclasses
import enum

import numpy as np

from errors import SignalError, ConfigError
from labels import wrap_azimuth

ACN_W, ACN_Y, ACN_Z, ACN_X = 0, 1, 2, 3
DEFAULT_SAMPLE_RATE = 24000


def sin_deg(angle_deg):
    """Sine of an angle in degrees, reduced to [-90, 90] before evaluation.

    The reduction makes sin(a) and sin(180 - a) bit-identical and keeps the
    function exactly odd, which the stereo mirror identity depends on.
    """
    a = wrap_azimuth(np.asarray(angle_deg, dtype=np.float64))
    a = np.where(a > 90.0, 180.0 - a, np.where(a < -90.0, -180.0 - a, a))
    return np.sign(a) * np.sin(np.deg2rad(np.abs(a)))


def cos_deg(angle_deg):
    a = wrap_azimuth(np.asarray(angle_deg, dtype=np.float64))
    return sin_deg(90.0 - np.abs(a))


@dataclasses.dataclass(frozen=True)
class Direction:
    azimuth_deg: float
    elevation_deg: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ConfigError(f"elevation {self.elevation_deg} outside [-90, 90]")
        object.__setattr__(self, "azimuth_deg", wrap_azimuth(self.azimuth_deg))

    def gains(self):
        """SN3D gains in ACN order."""
        ce = cos_deg(self.elevation_deg)
        return np.array(
            [
                1.0,
                sin_deg(self.azimuth_deg) * ce,
                sin_deg(self.elevation_deg),
                cos_deg(self.azimuth_deg) * ce,
            ]
        )


class RotationStep(enum.Enum):
    R90 = 90
    R180 = 180
    R270 = 270

    @property
    def degrees(self):
        return self.value

    @classmethod
    def from_degrees(cls, degrees):
        degrees = int(degrees) % 360
        for step in cls:
            if step.value == degrees:
                return step
        raise ConfigError(f"no ACS rotation of {degrees} degrees")


@dataclasses.dataclass(frozen=True, eq=False)
class FoaBuffer:
    data: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != 4:
            raise SignalError(f"FOA buffer needs shape (4, n), got {data.shape}")
        if self.sample_rate_hz <= 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate_hz}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def w(self):
        return self.data[ACN_W]

    @property
    def y(self):
        return self.data[ACN_Y]

    @property
    def z(self):
        return self.data[ACN_Z]

    @property
    def x(self):
        return self.data[ACN_X]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate_hz

    def energy(self):
        """Per-channel energy in ACN order."""
        return np.sum(self.data**2, axis=1)

    def equals(self, other):
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.data, other.data)
        )

    def __add__(self, other):
        if self.sample_rate_hz != other.sample_rate_hz or self.n_samples != other.n_samples:
            raise SignalError("can only add FOA buffers with equal rate and length")
        return FoaBuffer(self.data + other.data, self.sample_rate_hz)

    @classmethod
    def zeros(cls, n_samples, sample_rate_hz=DEFAULT_SAMPLE_RATE):
        return cls(np.zeros((4, n_samples)), sample_rate_hz)


def _as_mono(mono):
    mono = np.asarray(mono, dtype=np.float64)
    if mono.ndim != 1:
        raise SignalError(f"mono signal must be one-dimensional, got shape {mono.shape}")
    if mono.size == 0:
        raise SignalError("cannot encode an empty signal")
    return mono


def encode_point_source(mono, direction, sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Encode a static plane wave."""
    mono = _as_mono(mono)
    return FoaBuffer(np.outer(direction.gains(), mono), sample_rate_hz)


def encode_moving_source(mono, azimuths_deg, elevation_deg=0.0, sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Encode a plane wave whose azimuth changes per sample."""
    mono = _as_mono(mono)
    azimuths_deg = np.asarray(azimuths_deg, dtype=np.float64)
    if azimuths_deg.shape != mono.shape:
        raise SignalError("need one azimuth per sample")
    ce = cos_deg(elevation_deg)
    data = np.stack(
        [
            mono,
            mono * (sin_deg(azimuths_deg) * ce),
            mono * sin_deg(elevation_deg),
            mono * (cos_deg(azimuths_deg) * ce),
        ]
    )
    return FoaBuffer(data, sample_rate_hz)


def acs_rotate(foa, step):
    """Rotate the scene counterclockwise by a multiple of 90 degrees."""
    w, y, z, x = foa.data
    if step is RotationStep.R90:
        new_x, new_y = -y, x
    elif step is RotationStep.R180:
        new_x, new_y = -x, -y
    elif step is RotationStep.R270:
        new_x, new_y = y, -x
    else:
        raise ConfigError(f"unknown rotation {step}")
    return FoaBuffer(np.stack([w, new_y, z, new_x]), foa.sample_rate_hz)


def acs_rotate_labels(labels, step):
    return [
        a.with_direction(wrap_azimuth(a.azimuth_deg + step.degrees)) for a in labels
    ]


def expand_acs(foa, labels):
    """Identity plus the three ACS rotations, in that order."""
    scenes = [(foa, list(labels))]
    for step in RotationStep:
        scenes.append((acs_rotate(foa, step), acs_rotate_labels(labels, step)))
    return scenes
