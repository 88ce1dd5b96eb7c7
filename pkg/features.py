"""Feature stack: STFT, log-Mel spectrograms, FOA intensity vectors and
GCC-PHAT, on a 24 kHz / 1024-sample Hann / 480-sample hop grid.

Every tensor is laid out frames x bins x channels.
"""

import dataclasses
import functools

import librosa
import numpy as np
import scipy.signal

from errors import ConfigError, SignalError

LOG_FLOOR = 1e-10
IV_EPS = 1e-12
GCC_EPS = 1e-12
CHUNK_FRAMES = 250
LABEL_POOL = 5


@dataclasses.dataclass(frozen=True)
class StftConfig:
    sample_rate_hz: int = 24000
    window_samples: int = 1024
    hop_samples: int = 480
    fft_size: int = 1024
    n_mels: int = 64
    gcc_max_lag: int = 32

    def __post_init__(self):
        if self.hop_samples > self.window_samples:
            raise ConfigError("hop must not exceed the window")
        if self.fft_size < self.window_samples:
            raise ConfigError("fft_size must be at least the window length")
        if self.gcc_max_lag < 1:
            raise ConfigError("gcc_max_lag must be at least 1")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1


@dataclasses.dataclass(frozen=True, eq=False)
class FeatureTensor:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise SignalError(f"feature tensor must be frames x bins x channels, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise SignalError("feature tensor contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def bins(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def concat_channels(self, other):
        return FeatureTensor(np.concatenate([self.data, other.data], axis=2))


def stft(signal, cfg=None):
    """Hann-windowed, unnormalized forward transform; frames x (fft_size/2+1)."""
    cfg = cfg or StftConfig()
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise SignalError("stft takes a single channel")
    if signal.size < cfg.window_samples:
        raise SignalError(
            f"signal of {signal.size} samples is shorter than one {cfg.window_samples}-sample window"
        )
    frames = np.lib.stride_tricks.sliding_window_view(signal, cfg.window_samples)[:: cfg.hop_samples]
    window = scipy.signal.get_window("hann", cfg.window_samples)
    return np.fft.rfft(frames * window, n=cfg.fft_size, axis=-1)


def stft_multichannel(data, cfg=None):
    """Stack per-channel spectrograms: channels x frames x bins."""
    return np.stack([stft(channel, cfg) for channel in np.asarray(data)])


@functools.lru_cache(maxsize=8)
def mel_filterbank(sample_rate_hz=24000, fft_size=1024, n_mels=64):
    """HTK-scale triangular filters over 0 Hz to Nyquist, area-normalized."""
    return librosa.filters.mel(
        sr=sample_rate_hz,
        n_fft=fft_size,
        n_mels=n_mels,
        fmin=0.0,
        fmax=sample_rate_hz / 2.0,
        htk=True,
        norm="slaney",
        dtype=np.float64,
    )


def _filterbank_for(spec, cfg):
    if spec.shape[-1] != cfg.n_bins:
        raise SignalError(f"expected {cfg.n_bins} frequency bins, got {spec.shape[-1]}")
    return mel_filterbank(cfg.sample_rate_hz, cfg.fft_size, cfg.n_mels)


def mel_power(spec, cfg=None):
    """Linear Mel-band power, frames x n_mels."""
    cfg = cfg or StftConfig()
    fb = _filterbank_for(spec, cfg)
    return (np.abs(spec) ** 2) @ fb.T


def mel_spectrogram(spec, cfg=None):
    """Log-Mel features. A channels x frames x bins stack gives one channel per input."""
    spec = np.asarray(spec)
    if spec.ndim == 2:
        spec = spec[None]
    logs = [np.log(np.maximum(mel_power(s, cfg), LOG_FLOOR)) for s in spec]
    return FeatureTensor(np.stack(logs, axis=-1))


def intensity_vectors(foa_spec, cfg=None):
    """Normalized active intensity (Ix, Iy, Iz) averaged into Mel bands.

    foa_spec holds the four spectrograms in ACN order (W, Y, Z, X).
    """
    cfg = cfg or StftConfig()
    foa_spec = np.asarray(foa_spec)
    if foa_spec.ndim != 3 or foa_spec.shape[0] != 4:
        raise SignalError(f"intensity vectors need 4 aligned spectrograms, got shape {foa_spec.shape}")
    w, y, z, x = foa_spec
    fb = _filterbank_for(w, cfg)

    w_conj = np.conj(w)
    energy = np.abs(w) ** 2 + (np.abs(x) ** 2 + np.abs(y) ** 2 + np.abs(z) ** 2) / 3.0 + IV_EPS
    per_bin = np.stack(
        [np.real(w_conj * x), np.real(w_conj * y), np.real(w_conj * z)], axis=-1
    ) / energy[..., None]

    weights = fb / np.sum(fb, axis=1, keepdims=True)
    # frames x bins x 3 -> frames x mels x 3
    return FeatureTensor(np.einsum("mf,tfc->tmc", weights, per_bin))


def gcc_phat(spec_l, spec_r, max_lag=32, fft_size=None):
    """Phase-transform cross-correlation per frame, lags -max_lag..+max_lag.

    Positive lag means the left channel leads.
    """
    spec_l = np.asarray(spec_l)
    spec_r = np.asarray(spec_r)
    if spec_l.shape != spec_r.shape:
        raise SignalError(f"mismatched spectrograms {spec_l.shape} vs {spec_r.shape}")
    if max_lag < 1:
        raise ConfigError("max_lag must be at least 1")
    fft_size = fft_size or 2 * (spec_l.shape[-1] - 1)
    cross = spec_r * np.conj(spec_l)
    cc = np.fft.irfft(cross / (np.abs(cross) + GCC_EPS), n=fft_size, axis=-1)
    cropped = np.concatenate([cc[:, -max_lag:], cc[:, : max_lag + 1]], axis=-1)
    return FeatureTensor(cropped)


def gcc_lags(max_lag):
    return np.arange(-max_lag, max_lag + 1)


def frame_levels(spec_l, spec_r):
    """Per-frame RMS of each channel (frames x 2), from its spectrogram."""
    return np.stack(
        [np.sqrt(np.mean(np.abs(spec_l) ** 2, axis=-1)), np.sqrt(np.mean(np.abs(spec_r) ** 2, axis=-1))],
        axis=-1,
    )


def chunk_features(t, chunk_frames=CHUNK_FRAMES):
    """Split along time into fixed-length chunks, zero-padding the last one."""
    if t.frames == 0:
        return []
    n_chunks = -(-t.frames // chunk_frames)
    padded = np.zeros((n_chunks * chunk_frames, t.bins, t.channels))
    padded[: t.frames] = t.data
    return [FeatureTensor(c) for c in np.split(padded, n_chunks, axis=0)]


def stack_chunks(t, chunk_frames=CHUNK_FRAMES):
    """chunk_features as one array: chunks x chunk_frames x bins x channels."""
    chunks = chunk_features(t, chunk_frames)
    if not chunks:
        return np.zeros((0, chunk_frames, t.bins, t.channels))
    return np.stack([c.data for c in chunks])


def pool_frames(data, factor=LABEL_POOL):
    """Average groups of `factor` frames along axis 0; a short last group
    averages only the frames it has."""
    data = np.asarray(data.data if isinstance(data, FeatureTensor) else data, dtype=np.float64)
    n_groups = -(-data.shape[0] // factor)
    if n_groups == 0:
        return data[:0]
    return np.stack([data[g * factor : (g + 1) * factor].mean(axis=0) for g in range(n_groups)])


def label_frames_for(n_stft_frames, factor=LABEL_POOL):
    return -(-n_stft_frames // factor)


def dump_tensor(path, array):
    """Write a little-endian float32 .npy file (shape lives in the header)."""
    array = array.data if isinstance(array, FeatureTensor) else np.asarray(array)
    np.save(path, array.astype("<f4"), allow_pickle=False)


def load_tensor(path):
    return np.load(path, allow_pickle=False)
