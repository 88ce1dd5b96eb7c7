"""Synthetic FOA scenes with ground-truth annotations.

Scenes are anechoic sums of encoded point sources, optionally with a
diffuse noise floor and an exponentially decaying diffuse tail per event.
Each event draws its randomness from its own generator seeded by
(scene seed, event seed), so adding an event never changes the others.
"""

import collections
import dataclasses
import logging

import numpy as np
import scipy.signal

from ambisonics import Direction, FoaBuffer, encode_moving_source, encode_point_source
from errors import ConfigError
from labels import FRAME_S, NUM_CLASSES, EventAnnotation, n_label_frames, sort_annotations, sources_per_frame

GENERATORS = ("noise", "tones", "chirp")
SOURCE_RMS = 0.1
FADE_S = 0.005
NOISE_DIRECTIONAL_GAIN = 0.25
REVERB_PREDELAY_S = 0.01
STARSS_POLYPHONY_PROFILE = {1: 0.56, 2: 0.31, 3: 0.10, 4: 0.03}
QUADRANT_BOUNDARIES_DEG = (-135.0, -45.0, 45.0, 135.0)


@dataclasses.dataclass(frozen=True, eq=False)
class EventSpec:
    class_index: int
    onset_s: float
    duration_s: float
    azimuth_deg: float = 0.0
    elevation_deg: float = 0.0
    # piecewise-linear azimuth: ((offset_s, azimuth_deg), ...) relative to onset
    trajectory: tuple = None
    source: object = "noise"
    gain_db: float = 0.0
    seed: int = None
    source_index: int = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError(f"event duration must be positive, got {self.duration_s}")
        if self.onset_s < 0:
            raise ConfigError(f"event onset must be non-negative, got {self.onset_s}")
        if not 0 <= self.class_index < NUM_CLASSES:
            raise ConfigError(f"invalid class index {self.class_index}; {NUM_CLASSES} classes maximum")
        if isinstance(self.source, str) and self.source not in GENERATORS:
            raise ConfigError(f"unknown source generator {self.source!r}")
        if self.trajectory is not None:
            if self.elevation_deg != 0.0:
                raise ConfigError("moving sources must stay on the horizontal plane")
            if len(self.trajectory) < 2:
                raise ConfigError("a trajectory needs at least two breakpoints")
            object.__setattr__(self, "trajectory", tuple(sorted(tuple(p) for p in self.trajectory)))
        Direction(self.azimuth_deg, self.elevation_deg)

    @property
    def end_s(self):
        return self.onset_s + self.duration_s

    def azimuth_at(self, offset_s):
        if self.trajectory is None:
            return np.full(np.shape(offset_s), float(self.azimuth_deg))
        times, azimuths = zip(*self.trajectory)
        return np.interp(offset_s, times, azimuths)

    def active_frames(self, n_frames):
        # active when the frame midpoint falls inside [onset, onset + duration)
        midpoints = (np.arange(n_frames) + 0.5) * FRAME_S
        return np.flatnonzero((midpoints >= self.onset_s) & (midpoints < self.end_s))


@dataclasses.dataclass(frozen=True, eq=False)
class SceneSpec:
    length_s: float
    sample_rate_hz: int = 24000
    events: tuple = ()
    noise_floor_db: float = None
    reverb_rt60_s: float = None
    reverb_gain_db: float = -12.0
    rng_seed: int = 0
    max_polyphony: int = 5

    def __post_init__(self):
        if self.length_s <= 0:
            raise ConfigError("scene length must be positive")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample rate must be positive")
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if ev.end_s > self.length_s + 1e-9:
                raise ConfigError(
                    f"event at {ev.onset_s:.3f}s lasting {ev.duration_s:.3f}s exceeds the {self.length_s}s scene"
                )
        if self.reverb_rt60_s is not None and self.reverb_rt60_s <= 0:
            raise ConfigError("reverb_rt60_s must be positive")

    @property
    def n_samples(self):
        return int(round(self.length_s * self.sample_rate_hz))

    @property
    def n_frames(self):
        return n_label_frames(self.length_s)


def _fade(signal, sample_rate_hz):
    n_fade = min(int(FADE_S * sample_rate_hz), signal.size // 2)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, n_fade))
        signal[:n_fade] *= ramp
        signal[-n_fade:] *= ramp[::-1]
    return signal


def _source_signal(ev, n, sample_rate_hz, rng):
    if not isinstance(ev.source, str):
        given = np.asarray(ev.source, dtype=np.float64)
        return np.pad(given[:n], (0, max(0, n - given.size)))

    t = np.arange(n) / sample_rate_hz
    if ev.source == "noise":
        signal = rng.standard_normal(n)
    elif ev.source == "tones":
        f0 = rng.uniform(200.0, 800.0)
        harmonics = np.arange(1, 9)
        harmonics = harmonics[harmonics * f0 < 0.45 * sample_rate_hz]
        phases = rng.uniform(0.0, 2 * np.pi, harmonics.size)
        signal = np.sum(
            np.sin(2 * np.pi * f0 * harmonics[:, None] * t + phases[:, None]) / harmonics[:, None],
            axis=0,
        )
    else:
        signal = scipy.signal.chirp(t, f0=300.0, t1=max(t[-1], 1.0 / sample_rate_hz), f1=6000.0, method="logarithmic")
    signal = signal * (SOURCE_RMS / max(np.sqrt(np.mean(signal**2)), 1e-12))
    return _fade(signal, sample_rate_hz)


def _diffuse_tail(mono, spec, rng):
    """Decorrelated exponentially decaying tails in ACN order (W full, X/Y/Z at 1/sqrt(3))."""
    fs = spec.sample_rate_hz
    n_ir = int(spec.reverb_rt60_s * fs)
    predelay = int(REVERB_PREDELAY_S * fs)
    envelope = np.exp(-6.9 * np.arange(n_ir) / n_ir)
    channel_gain = np.array([1.0, 1.0, 1.0, 1.0]) / np.sqrt([1.0, 3.0, 3.0, 3.0])
    irs = rng.standard_normal((4, n_ir)) * envelope
    irs /= np.sqrt(np.sum(irs[0] ** 2))
    irs *= (10.0 ** (spec.reverb_gain_db / 20.0)) * channel_gain[:, None]
    tails = scipy.signal.fftconvolve(mono[None, :], irs, axes=-1)
    return np.pad(tails, ((0, 0), (predelay, 0)))


def assign_source_indices(events, n_frames):
    """Per class, the lowest source index not used by an overlapping event."""
    taken = collections.defaultdict(list)
    indices = {}
    for i in sorted(range(len(events)), key=lambda i: (events[i].onset_s, i)):
        ev = events[i]
        frames = set(ev.active_frames(n_frames).tolist())
        if ev.source_index is not None:
            index = ev.source_index
        else:
            busy = {idx for other, idx in taken[ev.class_index] if other & frames}
            index = next(k for k in range(len(events) + 1) if k not in busy)
        taken[ev.class_index].append((frames, index))
        indices[i] = index
    return [indices[i] for i in range(len(events))]


def annotate(spec):
    n_frames = spec.n_frames
    source_indices = assign_source_indices(spec.events, n_frames)
    annotations = []
    for ev, source_index in zip(spec.events, source_indices):
        frames = ev.active_frames(n_frames)
        azimuths = ev.azimuth_at((frames + 0.5) * FRAME_S - ev.onset_s)
        annotations.extend(
            EventAnnotation(int(f), ev.class_index, source_index, float(az), float(ev.elevation_deg))
            for f, az in zip(frames, azimuths)
        )
    annotations = sort_annotations(annotations)
    counts = sources_per_frame(annotations)
    if counts and max(counts.values()) > spec.max_polyphony:
        worst = max(counts, key=counts.get)
        raise ConfigError(
            f"frame {worst} has {counts[worst]} simultaneous sources, more than {spec.max_polyphony}"
        )
    return annotations


def synthesize_scene(spec):
    """Render a SceneSpec to (FoaBuffer, sorted annotations)."""
    annotations = annotate(spec)
    fs = spec.sample_rate_hz
    n = spec.n_samples
    out = np.zeros((4, n))

    for i, ev in enumerate(spec.events):
        rng = np.random.default_rng([spec.rng_seed, ev.seed if ev.seed is not None else i])
        start = int(round(ev.onset_s * fs))
        n_ev = min(int(round(ev.duration_s * fs)), n - start)
        if n_ev <= 0:
            continue
        mono = _source_signal(ev, n_ev, fs, rng) * 10.0 ** (ev.gain_db / 20.0)
        if ev.trajectory is None:
            encoded = encode_point_source(mono, Direction(ev.azimuth_deg, ev.elevation_deg), fs).data
        else:
            encoded = encode_moving_source(mono, ev.azimuth_at(np.arange(n_ev) / fs), 0.0, fs).data
        if spec.reverb_rt60_s is not None:
            tail = _diffuse_tail(mono, spec, rng)
            tail[:, :n_ev] += encoded
            encoded = tail
        stop = min(n, start + encoded.shape[1])
        out[:, start:stop] += encoded[:, : stop - start]

    if spec.noise_floor_db is not None:
        rng = np.random.default_rng([spec.rng_seed, 2**31 - 1])
        amplitude = 10.0 ** (spec.noise_floor_db / 20.0)
        noise = rng.standard_normal((4, n)) * amplitude
        noise[1:] *= NOISE_DIRECTIONAL_GAIN
        out += noise

    logging.debug(f"synthesized {spec.length_s}s scene: {len(spec.events)} events, {len(annotations)} labels")
    return FoaBuffer(out, fs), annotations


def polyphony_profile(annotations):
    """Fraction of active frames that hold k simultaneous (class, source) records."""
    counts = collections.Counter(sources_per_frame(annotations).values())
    total = sum(counts.values())
    return {k: counts[k] / total for k in sorted(counts)} if total else {}


def largest_remainder(profile, n_items):
    """Integer allocation of n_items proportional to profile weights."""
    keys = sorted(profile)
    weights = np.array([profile[k] for k in keys], dtype=np.float64)
    quotas = weights / weights.sum() * n_items
    counts = np.floor(quotas).astype(int)
    order = np.argsort(-(quotas - counts), kind="stable")
    for j in order[: n_items - counts.sum()]:
        counts[j] += 1
    return dict(zip(keys, counts.tolist()))


def single_source_suite(n_scenes, seed=0, length_s=5.0, class_index=0, source="noise",
                        min_duration_s=2.0, max_duration_s=4.0, elevation_deg=0.0):
    """One static event per scene, azimuths stratified uniformly over the circle.

    Azimuths are whole degrees, so they survive the integer metadata files,
    and never sit on a quadrant boundary.
    """
    rng = np.random.default_rng(seed)
    offsets = rng.permutation(n_scenes)
    specs = []
    for i in range(n_scenes):
        azimuth = float(np.floor(-180.0 + 360.0 * (offsets[i] + rng.uniform()) / n_scenes))
        if azimuth in QUADRANT_BOUNDARIES_DEG:
            azimuth += 1.0
        duration = rng.uniform(min_duration_s, max_duration_s)
        onset = rng.uniform(0.0, length_s - duration)
        event = EventSpec(class_index, onset, duration, azimuth, elevation_deg, source=source)
        specs.append(SceneSpec(length_s, events=(event,), rng_seed=seed * 100003 + i))
    return specs


def _spread_azimuths(rng, k, min_separation_deg=20.0):
    while True:
        azimuths = np.floor(rng.uniform(-180.0, 180.0, k))
        diffs = np.abs((azimuths[:, None] - azimuths[None, :] + 180.0) % 360.0 - 180.0)
        np.fill_diagonal(diffs, 360.0)
        if diffs.min() >= min_separation_deg:
            return azimuths


def polyphony_suite(total_s=600.0, profile=None, seed=0, scene_length_s=60.0, segment_s=1.0,
                    class_index=0, sources=GENERATORS):
    """Scenes whose frames follow a target polyphony profile.

    Time is cut into fixed segments; each segment gets a polyphony level so
    that level counts follow the profile by largest remainder, and every
    source in a segment spans it exactly.
    """
    profile = profile or STARSS_POLYPHONY_PROFILE
    rng = np.random.default_rng(seed)
    n_segments = int(round(total_s / segment_s))
    allocation = largest_remainder(profile, n_segments)
    levels = np.concatenate([np.full(count, k) for k, count in allocation.items()])
    levels = rng.permutation(levels)

    per_scene = int(round(scene_length_s / segment_s))
    specs = []
    for scene_i, start in enumerate(range(0, n_segments, per_scene)):
        scene_levels = levels[start : start + per_scene]
        events = []
        for seg_i, k in enumerate(scene_levels):
            for az in _spread_azimuths(rng, int(k)):
                events.append(
                    EventSpec(
                        class_index,
                        seg_i * segment_s,
                        segment_s,
                        float(az),
                        source=sources[int(rng.integers(len(sources)))],
                        gain_db=float(rng.uniform(-6.0, 0.0)),
                    )
                )
        specs.append(
            SceneSpec(len(scene_levels) * segment_s, events=tuple(events), rng_seed=seed * 100003 + scene_i)
        )
    logging.info(f"polyphony suite: {len(specs)} scenes, segment levels {allocation}")
    return specs
