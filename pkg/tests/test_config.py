import pytest

from config import (
    PipelineConfig,
    check_channels,
    dump_config,
    expected_channels,
    from_dict,
    load_config,
    to_dict,
    with_overrides,
)
from errors import ConfigError, SignalError


def write_yaml(tmp_path, text):
    path = tmp_path / "seldscope.yaml"
    path.write_text(text)
    return str(path)


class TestDefaults:
    def test_values(self):
        cfg = load_config()
        assert cfg.representation == "foa"
        assert cfg.representations == ("foa", "binaural", "stereo")
        assert cfg.synthesis.n_scenes == 200
        assert cfg.features.hop_samples == 480
        assert cfg.estimator.policy == "front"
        assert cfg.metrics.tolerance_deg == 20.0
        assert cfg.renderer.decoder == "parametric"

    def test_stft_config_follows_the_features_section(self):
        stft = PipelineConfig().features.stft_config()
        assert (stft.window_samples, stft.hop_samples, stft.fft_size) == (1024, 480, 1024)


class TestLoadConfig:
    def test_yaml_sections(self, tmp_path):
        cfg = load_config(write_yaml(tmp_path, "representation: stereo\nseed: 7\nestimator:\n  policy: alternate\n"))
        assert cfg.representation == "stereo"
        assert cfg.seed == 7
        assert cfg.estimator.policy == "alternate"
        assert cfg.estimator.gcc_threshold == 0.3

    def test_lists_become_tuples(self, tmp_path):
        cfg = load_config(write_yaml(tmp_path, "metrics:\n  lateral_band_deg: [50, 130]\n"))
        assert cfg.metrics.lateral_band_deg == (50, 130)

    def test_empty_file(self, tmp_path):
        assert load_config(write_yaml(tmp_path, "")) == PipelineConfig()

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key 'colour' in section 'renderer'"):
            load_config(write_yaml(tmp_path, "renderer:\n  colour: blue\n"))

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError, match="top level"):
            load_config(write_yaml(tmp_path, "verbosity: 3\n"))

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigError, match="not valid YAML"):
            load_config(write_yaml(tmp_path, "seed: [1, 2\n"))

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            load_config(write_yaml(tmp_path, "- 1\n- 2\n"))

    def test_section_not_a_mapping(self):
        with pytest.raises(ConfigError, match="section 'metrics' must be a mapping"):
            from_dict({"metrics": 3})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(str(tmp_path / "absent.yaml"))


class TestValidation:
    def test_policy(self):
        with pytest.raises(ConfigError, match="estimator.policy"):
            from_dict({"estimator": {"policy": "coin"}})

    def test_representation(self):
        with pytest.raises(ConfigError, match="unknown representation 'mono'"):
            from_dict({"representation": "mono"})

    def test_repeated_representations(self):
        with pytest.raises(ConfigError, match="repeat"):
            from_dict({"representations": ["foa", "foa"]})

    def test_suite(self):
        with pytest.raises(ConfigError, match="synthesis.suite"):
            from_dict({"synthesis": {"suite": "huge"}})

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="section 'synthesis'"):
            from_dict({"synthesis": {"n_scenes": "many"}})

    def test_workers(self):
        with pytest.raises(ConfigError, match="workers"):
            from_dict({"workers": 0})

    def test_chunk_frames(self):
        with pytest.raises(ConfigError, match="features.chunk_frames"):
            from_dict({"features": {"chunk_frames": 0}})


class TestOverrides:
    def test_dotted_keys(self):
        cfg = with_overrides(PipelineConfig(), {"estimator.policy": "random", "seed": 3, "synthesis.n_scenes": 4})
        assert (cfg.estimator.policy, cfg.seed, cfg.synthesis.n_scenes) == ("random", 3, 4)

    def test_none_is_skipped(self):
        cfg = with_overrides(PipelineConfig(), {"seed": None, "estimator.policy": None})
        assert cfg == PipelineConfig()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'estimator.bogus'"):
            with_overrides(PipelineConfig(), {"estimator.bogus": 1})

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown config section 'gui'"):
            with_overrides(PipelineConfig(), {"gui.theme": "dark"})

    def test_overrides_are_validated(self):
        with pytest.raises(ConfigError, match="estimator.policy"):
            with_overrides(PipelineConfig(), {"estimator.policy": "coin"})


class TestDumpConfig:
    def test_round_trip(self, tmp_path):
        cfg = from_dict({"representation": "binaural", "seed": 5, "renderer": {"decoder": "ring"}})
        assert load_config(write_yaml(tmp_path, dump_config(cfg))) == cfg

    def test_defaults_dump(self):
        text = dump_config()
        assert text.startswith("representation: foa\n")
        assert "policy: front" in text

    def test_to_dict_is_plain(self):
        d = to_dict(PipelineConfig())
        assert d["representations"] == ["foa", "binaural", "stereo"]
        assert d["metrics"]["lateral_band_deg"] == [60.0, 120.0]


class TestChannels:
    @pytest.mark.parametrize("representation, channels", [("foa", 4), ("binaural", 2), ("stereo", 2)])
    def test_expected(self, representation, channels):
        assert expected_channels(representation) == channels
        check_channels(representation, channels)

    def test_mismatch(self):
        with pytest.raises(SignalError, match="scene.wav: 2-channel audio where foa needs 4"):
            check_channels("foa", 2, "scene.wav: ")
