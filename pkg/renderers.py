"""FOA to 2-channel conversion: the W +/- Y stereo downmix and a binaural
approximation built on a spherical head.

The binaural path stands in for an HRTF decoder. It keeps the cues that
matter for localization: Woodworth interaural delay, a Brown-Duda style
head-shadow magnitude per ear, and a mild rear high-frequency shelf.
Filters are applied as magnitudes only; all interaural phase comes from the
Woodworth delay.
"""

import dataclasses
import logging

import numpy as np
import scipy.fft
import scipy.signal

from ambisonics import FoaBuffer, cos_deg, sin_deg
from errors import ConfigError, SignalError
from labels import wrap_azimuth

DECODERS = ("parametric", "ring")


@dataclasses.dataclass(frozen=True, eq=False)
class StereoBuffer:
    data: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != 2:
            raise SignalError(f"2-channel buffer needs shape (2, n), got {data.shape}")
        if self.sample_rate_hz <= 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate_hz}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def left(self):
        return self.data[0]

    @property
    def right(self):
        return self.data[1]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def equals(self, other):
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.data, other.data)
        )

    def swapped(self):
        return StereoBuffer(self.data[::-1], self.sample_rate_hz)


def _default_ring():
    return tuple(wrap_azimuth(45.0 * k) for k in range(8))


@dataclasses.dataclass(frozen=True)
class BinauralRendererConfig:
    head_radius_m: float = 0.0875
    virtual_speaker_azimuths_deg: tuple = dataclasses.field(default_factory=_default_ring)
    speed_of_sound_mps: float = 343.0
    # head shadow: alpha(theta) = (1 + a/2) + (1 - a/2) cos(theta / theta_min * 180)
    shadow_alpha_min: float = 0.1
    shadow_theta_min_deg: float = 150.0
    rear_shelf_db: float = -3.0
    rear_shelf_hz: float = 4000.0
    decoder: str = "parametric"
    stft_window: int = 1024
    stft_hop: int = 256

    def __post_init__(self):
        if self.head_radius_m <= 0:
            raise ConfigError(f"head radius must be positive, got {self.head_radius_m}")
        if self.speed_of_sound_mps <= 0:
            raise ConfigError("speed of sound must be positive")
        azimuths = tuple(wrap_azimuth(a) for a in self.virtual_speaker_azimuths_deg)
        if len(azimuths) < 4:
            raise ConfigError(f"need at least 4 virtual speakers, got {len(azimuths)}")
        if len(set(azimuths)) != len(azimuths):
            raise ConfigError("virtual speaker azimuths must be distinct")
        object.__setattr__(self, "virtual_speaker_azimuths_deg", azimuths)
        if not 0 < self.shadow_alpha_min <= 1:
            raise ConfigError("shadow_alpha_min must be in (0, 1]")
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown binaural decoder {self.decoder!r}, expected one of {DECODERS}")
        if not 0 < self.stft_hop <= self.stft_window:
            raise ConfigError("stft_hop must be in (0, stft_window]")

    @property
    def shadow_corner_hz(self):
        return self.speed_of_sound_mps / (np.pi * self.head_radius_m)

    @property
    def max_itd_s(self):
        return woodworth_itd_s(np.pi / 2, self.head_radius_m, self.speed_of_sound_mps)


def foa_to_stereo(foa):
    """left = W + Y, right = W - Y; no gain compensation."""
    return StereoBuffer(np.stack([foa.w + foa.y, foa.w - foa.y]), foa.sample_rate_hz)


def woodworth_itd_s(lateral_rad, head_radius_m, speed_of_sound_mps):
    """Signed ITD for a lateral angle; positive means the left ear leads."""
    lateral_rad = np.asarray(lateral_rad, dtype=np.float64)
    magnitude = np.abs(lateral_rad)
    return np.sign(lateral_rad) * (head_radius_m / speed_of_sound_mps) * (magnitude + np.sin(magnitude))


_WOODWORTH_GRID = np.linspace(0.0, np.pi / 2, 18001)
_WOODWORTH_VALUES = _WOODWORTH_GRID + np.sin(_WOODWORTH_GRID)


def invert_woodworth(itd_s, head_radius_m, speed_of_sound_mps):
    """Lateral angle in radians for a signed ITD, clamped to +/- 90 degrees."""
    itd_s = np.asarray(itd_s, dtype=np.float64)
    scaled = np.abs(itd_s) * speed_of_sound_mps / head_radius_m
    return np.sign(itd_s) * np.interp(scaled, _WOODWORTH_VALUES, _WOODWORTH_GRID)


def _shelf_magnitude(freqs_hz, alpha, corner_hz):
    """|(1 + j alpha f/fc) / (1 + j f/fc)|: unity at DC, alpha at high frequency."""
    ratio = np.asarray(freqs_hz) / corner_hz
    return np.sqrt((1.0 + (alpha * ratio) ** 2) / (1.0 + ratio**2))


def _shadow_alpha(incidence_rad, cfg):
    a_min = cfg.shadow_alpha_min
    theta_min = np.deg2rad(cfg.shadow_theta_min_deg)
    return (1.0 + a_min / 2.0) + (1.0 - a_min / 2.0) * np.cos(incidence_rad / theta_min * np.pi)


def _ear_responses(freqs_hz, lateral, frontal, cfg):
    """Complex left/right responses for directions given by their lateral
    component (cos e sin a) and frontal component (cos e cos a).

    `lateral` and `frontal` broadcast against each other; freqs_hz must
    broadcast against both.
    """
    lateral = np.clip(lateral, -1.0, 1.0)
    incidence_left = np.arccos(lateral)
    incidence_right = np.arccos(-lateral)
    mag_left = _shelf_magnitude(freqs_hz, _shadow_alpha(incidence_left, cfg), cfg.shadow_corner_hz)
    mag_right = _shelf_magnitude(freqs_hz, _shadow_alpha(incidence_right, cfg), cfg.shadow_corner_hz)

    rear_alpha = 10.0 ** (cfg.rear_shelf_db * np.maximum(0.0, -frontal) / 20.0)
    rear = _shelf_magnitude(freqs_hz, rear_alpha, cfg.rear_shelf_hz)

    itd = woodworth_itd_s(np.arcsin(lateral), cfg.head_radius_m, cfg.speed_of_sound_mps)
    delay_left = np.maximum(0.0, -itd)
    delay_right = np.maximum(0.0, itd)
    phase_left = np.exp(-2j * np.pi * freqs_hz * delay_left)
    phase_right = np.exp(-2j * np.pi * freqs_hz * delay_right)
    return mag_left * rear * phase_left, mag_right * rear * phase_right


def _render_parametric(foa, cfg):
    fs = foa.sample_rate_hz
    noverlap = cfg.stft_window - cfg.stft_hop
    freqs, _, spec = scipy.signal.stft(
        foa.data, fs=fs, window="hann", nperseg=cfg.stft_window, noverlap=noverlap
    )
    w, y, z, x = spec
    w_conj = np.conj(w)
    ix = np.real(w_conj * x)
    iy = np.real(w_conj * y)
    iz = np.real(w_conj * z)
    norm = np.sqrt(ix**2 + iy**2 + iz**2)
    safe = np.where(norm > 0, norm, 1.0)
    lateral = np.where(norm > 0, iy / safe, 0.0)
    frontal = np.where(norm > 0, ix / safe, 1.0)

    h_left, h_right = _ear_responses(freqs[:, None], lateral, frontal, cfg)
    _, ears = scipy.signal.istft(
        np.stack([w * h_left, w * h_right]),
        fs=fs,
        window="hann",
        nperseg=cfg.stft_window,
        noverlap=noverlap,
    )
    return _fit_length(ears, foa.n_samples)


def ring_decoder_matrix(azimuths_deg):
    """Mode-matching gains (n_speakers x 3) mapping horizontal (W, X, Y) to speaker feeds."""
    azimuths_deg = np.asarray(azimuths_deg, dtype=np.float64)
    encoding = np.stack([np.ones_like(azimuths_deg), cos_deg(azimuths_deg), sin_deg(azimuths_deg)])
    return np.linalg.pinv(encoding)


def _render_ring(foa, cfg):
    azimuths = np.asarray(cfg.virtual_speaker_azimuths_deg)
    feeds = ring_decoder_matrix(azimuths) @ np.stack([foa.w, foa.x, foa.y])

    max_delay = int(np.ceil(cfg.max_itd_s * foa.sample_rate_hz)) + 1
    n_fft = scipy.fft.next_fast_len(foa.n_samples + max_delay)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / foa.sample_rate_hz)
    feed_spectra = np.fft.rfft(feeds, n=n_fft, axis=-1)

    h_left, h_right = _ear_responses(
        freqs[None, :], sin_deg(azimuths)[:, None], cos_deg(azimuths)[:, None], cfg
    )
    left = np.fft.irfft(np.sum(feed_spectra * h_left, axis=0), n=n_fft)
    right = np.fft.irfft(np.sum(feed_spectra * h_right, axis=0), n=n_fft)
    return np.stack([left, right])[:, : foa.n_samples]


def _fit_length(ears, n_samples):
    if ears.shape[1] >= n_samples:
        return ears[:, :n_samples]
    return np.pad(ears, ((0, 0), (0, n_samples - ears.shape[1])))


def foa_to_binaural(foa, cfg=None):
    cfg = cfg or BinauralRendererConfig()
    logging.debug(f"binaural render: decoder={cfg.decoder}, {foa.n_samples} samples")
    if cfg.decoder == "ring":
        ears = _render_ring(foa, cfg)
    else:
        ears = _render_parametric(foa, cfg)
    return StereoBuffer(ears, foa.sample_rate_hz)


def render(foa, representation, binaural_cfg=None):
    """Dispatch on an input representation name: foa, binaural or stereo."""
    if representation == "foa":
        return foa
    if representation == "stereo":
        return foa_to_stereo(foa)
    if representation == "binaural":
        return foa_to_binaural(foa, binaural_cfg)
    raise ConfigError(f"unknown representation {representation!r}")
