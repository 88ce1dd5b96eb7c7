"""Classical per-frame direction estimators.

The FOA estimator reads the direction straight off the intensity vector.
The 2-channel estimator only recovers a lateral angle: every estimate it
returns carries the mirrored front/back alternate.
"""

import dataclasses
import enum
import logging

import numpy as np

from ambisonics import sin_deg
from errors import ConfigError, SignalError
from features import FeatureTensor, gcc_lags
from labels import EventAnnotation, wrap_azimuth
from renderers import invert_woodworth

FOA_CONFIDENCE_THRESHOLD = 0.1
GCC_CONFIDENCE_THRESHOLD = 0.3
GCC_FLAT = 1e-9


def mirror_front_back(azimuth_deg):
    return wrap_azimuth(180.0 - azimuth_deg)


@dataclasses.dataclass(frozen=True)
class DoaEstimate:
    frame_index: int
    azimuth_deg: float
    confidence: float
    alternate_azimuth_deg: float = None

    def __post_init__(self):
        object.__setattr__(self, "azimuth_deg", wrap_azimuth(self.azimuth_deg))
        object.__setattr__(self, "confidence", float(np.clip(self.confidence, 0.0, 1.0)))
        if self.alternate_azimuth_deg is not None:
            expected = mirror_front_back(self.azimuth_deg)
            if abs(wrap_azimuth(self.alternate_azimuth_deg - expected)) > 1e-9:
                raise SignalError(
                    f"alternate {self.alternate_azimuth_deg} is not the front/back mirror of {self.azimuth_deg}"
                )
            object.__setattr__(self, "alternate_azimuth_deg", expected)

    @classmethod
    def front_back(cls, frame_index, azimuth_deg, confidence):
        return cls(frame_index, azimuth_deg, confidence, mirror_front_back(azimuth_deg))

    @property
    def ambiguity(self):
        return None if self.alternate_azimuth_deg is None else "front_back"


def doa_foa_intensity(iv, band_energy=None):
    """One estimate per frame from Mel-band intensity vectors (frames x mels x 3).

    Bands are weighted by band_energy (frames x mels), uniformly if absent.
    Confidence is the length of the weighted mean vector.
    """
    data = iv.data if isinstance(iv, FeatureTensor) else np.asarray(iv, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 3:
        raise SignalError(f"intensity tensor must be frames x bands x 3, got {data.shape}")
    weights = np.ones(data.shape[:2]) if band_energy is None else np.asarray(band_energy, dtype=np.float64)
    if weights.shape != data.shape[:2]:
        raise SignalError(f"band energy shape {weights.shape} does not match {data.shape[:2]}")

    total = np.sum(weights, axis=1)
    summed = np.einsum("tm,tmc->tc", weights, data)
    mean = summed / np.where(total > 0, total, 1.0)[:, None]
    azimuths = np.rad2deg(np.arctan2(mean[:, 1], mean[:, 0]))
    confidences = np.where(total > 0, np.linalg.norm(mean, axis=1), 0.0)
    return [DoaEstimate(t, float(az), float(c)) for t, (az, c) in enumerate(zip(azimuths, confidences))]


class TdoaMode(enum.Enum):
    STEREO = "stereo"
    BINAURAL = "binaural"


@dataclasses.dataclass(frozen=True)
class TdoaGeometry:
    separation_m: float = 0.2
    speed_of_sound_mps: float = 343.0
    mode: TdoaMode = TdoaMode.STEREO
    sample_rate_hz: int = 24000
    head_radius_m: float = 0.0875

    def __post_init__(self):
        if self.separation_m <= 0:
            raise ConfigError(f"separation must be positive, got {self.separation_m}")
        if self.speed_of_sound_mps <= 0:
            raise ConfigError("speed of sound must be positive")
        if self.head_radius_m <= 0:
            raise ConfigError("head radius must be positive")
        try:
            object.__setattr__(self, "mode", TdoaMode(self.mode))
        except ValueError:
            raise ConfigError(f"unknown TDOA mode {self.mode!r}")


def _parabolic_offset(left, peak, right):
    denominator = left - 2.0 * peak + right
    if denominator >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denominator, -0.5, 0.5))


def _ild_ratio(levels):
    left, right = levels
    total = left + right
    return 0.0 if total <= 0 else float((left - right) / total)


def doa_2ch_tdoa(gcc, geometry=None, levels=None):
    """One lateral estimate per GCC-PHAT frame (frames x lags, lags centred).

    Stereo mode maps the delay through the microphone separation; when the
    correlation peaks at lag 0 or is flat, the angle comes from the level
    difference of `levels` (frames x 2 RMS) instead. Binaural mode inverts
    the Woodworth delay model.
    """
    geometry = geometry or TdoaGeometry()
    data = gcc.data[:, :, 0] if isinstance(gcc, FeatureTensor) else np.asarray(gcc, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] % 2 != 1:
        raise SignalError(f"GCC tensor must be frames x (2 max_lag + 1), got {data.shape}")
    if levels is not None and np.shape(levels) != (data.shape[0], 2):
        raise SignalError(f"levels must be frames x 2, got {np.shape(levels)}")
    max_lag = data.shape[1] // 2
    lags = gcc_lags(max_lag)
    fs = geometry.sample_rate_hz

    estimates = []
    for t, cc in enumerate(data):
        i = int(np.argmax(cc))
        peak = float(cc[i])
        flat = np.ptp(cc) < GCC_FLAT
        lag = float(lags[i])
        if 0 < i < cc.size - 1 and not flat:
            lag += _parabolic_offset(cc[i - 1], peak, cc[i + 1])
        confidence = max(peak, 0.0)

        if geometry.mode is TdoaMode.BINAURAL:
            lateral = 0.0 if flat else np.rad2deg(
                invert_woodworth(lag / fs, geometry.head_radius_m, geometry.speed_of_sound_mps)
            )
        elif (flat or lags[i] == 0) and levels is not None:
            ratio = _ild_ratio(levels[t])
            lateral = np.rad2deg(np.arcsin(np.clip(ratio, -1.0, 1.0)))
            confidence = max(confidence, abs(ratio))
        elif flat:
            lateral = 0.0
        else:
            sine = geometry.speed_of_sound_mps * (lag / fs) / geometry.separation_m
            lateral = np.rad2deg(np.arcsin(np.clip(sine, -1.0, 1.0)))
        estimates.append(DoaEstimate.front_back(t, float(lateral), confidence))
    return estimates


class ResolutionPolicy(enum.Enum):
    FRONT = "front"
    ALTERNATE = "alternate"
    RANDOM = "random"


def estimates_to_events(estimates, class_hint, threshold, policy=ResolutionPolicy.FRONT, seed=0):
    """Confident estimates become source-0 annotations of class_hint.

    Front/back ambiguous estimates are resolved by `policy`; the random
    policy draws a seeded coin per estimate.
    """
    policy = ResolutionPolicy(policy)
    rng = np.random.default_rng(seed)
    events = []
    for est in estimates:
        # one draw per estimate, confident or not
        coin = rng.random() < 0.5
        if est.confidence < threshold:
            continue
        azimuth = est.azimuth_deg
        if est.ambiguity is not None:
            if policy is ResolutionPolicy.ALTERNATE or (policy is ResolutionPolicy.RANDOM and coin):
                azimuth = est.alternate_azimuth_deg
        events.append(EventAnnotation(est.frame_index, class_hint, 0, azimuth, 0.0))
    logging.debug(f"{len(events)} of {len(estimates)} estimates above threshold {threshold}")
    return events


def lateral_angle_deg(azimuth_deg):
    """Signed lateral angle (the interaural cone) of a horizontal azimuth."""
    return np.rad2deg(np.arcsin(np.clip(sin_deg(azimuth_deg), -1.0, 1.0)))
