"""Pipeline configuration.

Built-in defaults, overridden by a YAML file, overridden by command-line
flags. Each YAML section maps to one frozen dataclass below; unknown keys
are rejected.

Example file:

    representation: binaural
    seed: 7
    synthesis:
      suite: single
      n_scenes: 200
    estimator:
      policy: front
    renderer:
      decoder: parametric
"""

import dataclasses
import logging

import yaml

from errors import ConfigError, SignalError
from features import StftConfig
from renderers import BinauralRendererConfig
from scene_synth import STARSS_POLYPHONY_PROFILE

REPRESENTATIONS = ("foa", "binaural", "stereo")
SUITES = ("single", "polyphony")
POLICIES = ("front", "alternate", "random")


@dataclasses.dataclass(frozen=True)
class SynthesisConfig:
    suite: str = "single"
    n_scenes: int = 200
    scene_length_s: float = 5.0
    total_s: float = 600.0
    polyphony_scene_length_s: float = 60.0
    segment_s: float = 1.0
    source: str = "noise"
    elevation_deg: float = 0.0
    noise_floor_db: float = None
    reverb_rt60_s: float = None
    profile: dict = dataclasses.field(default_factory=lambda: dict(STARSS_POLYPHONY_PROFILE))

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError(f"synthesis.suite must be one of {SUITES}, got {self.suite!r}")
        if self.n_scenes < 1:
            raise ConfigError("synthesis.n_scenes must be at least 1")
        object.__setattr__(self, "profile", {int(k): float(v) for k, v in self.profile.items()})


@dataclasses.dataclass(frozen=True)
class FeaturesConfig:
    sample_rate_hz: int = 24000
    window_samples: int = 1024
    hop_samples: int = 480
    fft_size: int = 1024
    n_mels: int = 64
    gcc_max_lag: int = 32
    chunk_frames: int = 250

    def __post_init__(self):
        if self.chunk_frames < 1:
            raise ConfigError(f"features.chunk_frames must be at least 1, got {self.chunk_frames}")

    def stft_config(self):
        return StftConfig(
            self.sample_rate_hz, self.window_samples, self.hop_samples, self.fft_size, self.n_mels, self.gcc_max_lag
        )


@dataclasses.dataclass(frozen=True)
class RendererConfig:
    decoder: str = "parametric"
    head_radius_m: float = 0.0875
    speed_of_sound_mps: float = 343.0
    virtual_speaker_azimuths_deg: tuple = (0.0, 45.0, 90.0, 135.0, -180.0, -135.0, -90.0, -45.0)
    rear_shelf_db: float = -3.0
    rear_shelf_hz: float = 4000.0

    def binaural_config(self):
        return BinauralRendererConfig(
            head_radius_m=self.head_radius_m,
            virtual_speaker_azimuths_deg=tuple(self.virtual_speaker_azimuths_deg),
            speed_of_sound_mps=self.speed_of_sound_mps,
            rear_shelf_db=self.rear_shelf_db,
            rear_shelf_hz=self.rear_shelf_hz,
            decoder=self.decoder,
        )


@dataclasses.dataclass(frozen=True)
class EstimatorConfig:
    foa_threshold: float = 0.1
    gcc_threshold: float = 0.3
    policy: str = "front"
    stereo_separation_m: float = 0.2
    class_hint: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"estimator.policy must be one of {POLICIES}, got {self.policy!r}")


@dataclasses.dataclass(frozen=True)
class MetricsConfig:
    tolerance_deg: float = 20.0
    accdoa_threshold: float = 0.5
    accdoa_tracks: int = 3
    lateral_band_deg: tuple = (60.0, 120.0)


SECTIONS = {
    "synthesis": SynthesisConfig,
    "features": FeaturesConfig,
    "renderer": RendererConfig,
    "estimator": EstimatorConfig,
    "metrics": MetricsConfig,
}


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    representation: str = "foa"
    representations: tuple = REPRESENTATIONS
    horizontal_only: bool = True
    acs_enabled: bool = True
    seed: int = 0
    output_dir: str = "seldscope-out"
    workers: int = 1
    synthesis: SynthesisConfig = dataclasses.field(default_factory=SynthesisConfig)
    features: FeaturesConfig = dataclasses.field(default_factory=FeaturesConfig)
    renderer: RendererConfig = dataclasses.field(default_factory=RendererConfig)
    estimator: EstimatorConfig = dataclasses.field(default_factory=EstimatorConfig)
    metrics: MetricsConfig = dataclasses.field(default_factory=MetricsConfig)

    def __post_init__(self):
        object.__setattr__(self, "representations", tuple(self.representations))
        for r in (self.representation, *self.representations):
            if r not in REPRESENTATIONS:
                raise ConfigError(f"unknown representation {r!r}, expected one of {REPRESENTATIONS}")
        if len(set(self.representations)) != len(self.representations):
            raise ConfigError("representations must not repeat")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


def expected_channels(representation):
    return 4 if representation == "foa" else 2


def check_channels(representation, n_channels, where=""):
    if n_channels != expected_channels(representation):
        raise SignalError(
            f"{where}{n_channels}-channel audio where {representation} needs {expected_channels(representation)}"
        )


def _build(cls, values, section):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in section {section!r}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"section {section!r}: {e}")


def from_dict(raw):
    raw = dict(raw or {})
    sections = {name: _build(cls, raw.pop(name, None), name) for name, cls in SECTIONS.items()}
    top = _build(PipelineConfig, raw, "top level")
    return dataclasses.replace(top, **sections)


def load_config(filename=None):
    if filename is None:
        return PipelineConfig()
    try:
        with open(filename) as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {filename}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config {filename} is not valid YAML: {e}")
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"config {filename} must hold a mapping")
    logging.info(f"loaded config {filename}")
    return from_dict(raw)


def with_overrides(cfg, overrides):
    """Apply dotted-key overrides such as {"estimator.policy": "alternate"}; None values are skipped."""
    raw = to_dict(cfg)
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        if section and section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        target = raw[section] if section else raw
        if name not in target:
            raise ConfigError(f"unknown config key {key!r}")
        target[name] = value
    return from_dict(raw)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def to_dict(cfg):
    return _plain(dataclasses.asdict(cfg))


def dump_config(cfg=None):
    return yaml.safe_dump(to_dict(cfg or PipelineConfig()), sort_keys=False, default_flow_style=False)
