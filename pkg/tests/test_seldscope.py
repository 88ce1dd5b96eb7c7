import os

import pytest

import seldscope
from audio_io import read_wav, write_metadata_csv
from errors import EXIT_DATA, EXIT_USAGE
from labels import EventAnnotation


@pytest.fixture
def reference_csv(tmp_path):
    path = str(tmp_path / "ref" / "scene_0000.csv")
    write_metadata_csv(path, [EventAnnotation(f, 0, 0, 30.0) for f in range(10)])
    return path


def run(argv):
    with pytest.raises(SystemExit) as info:
        seldscope.main(argv)
    return info.value.code


class TestCompose:
    def test_prints_every_row(self, capsys):
        seldscope.main(["compose"])
        out = capsys.readouterr().out
        for name in ("A", "B+E", "C+E", "binaural", "stereo"):
            assert name in out
        assert "0.6513" in out


class TestEvaluate:
    def test_self_evaluation(self, capsys, reference_csv):
        seldscope.main(["evaluate", "--pred", reference_csv, "--ref", reference_csv])
        lines = capsys.readouterr().out.splitlines()
        assert "error_rate = 0.000000" in lines
        assert "seld_score = 0.000000" in lines
        assert "localization_recall = 1.000000" in lines

    def test_writes_reports(self, tmp_path, reference_csv):
        out_dir = str(tmp_path / "out")
        seldscope.main(["evaluate", "--pred", reference_csv, "--ref", reference_csv, "--output-dir", out_dir])
        assert os.path.isfile(os.path.join(out_dir, "reports", "evaluate_scores.txt"))
        assert os.path.isfile(os.path.join(out_dir, "reports", "evaluate_scores.json"))

    def test_tolerance_flag(self, capsys, tmp_path, reference_csv):
        pred = str(tmp_path / "pred" / "scene_0000.csv")
        write_metadata_csv(pred, [EventAnnotation(f, 0, 0, 55.0) for f in range(10)])
        seldscope.main(["evaluate", "--pred", pred, "--ref", reference_csv, "--tolerance", "30"])
        assert "f_score = 1.000000" in capsys.readouterr().out.splitlines()

    def test_missing_flag_is_a_usage_error(self, reference_csv):
        assert run(["evaluate", "--pred", reference_csv]) == EXIT_USAGE

    def test_missing_file_is_a_usage_error(self, tmp_path, reference_csv):
        assert run(["evaluate", "--pred", str(tmp_path / "absent.csv"), "--ref", reference_csv]) == EXIT_USAGE

    def test_bad_metadata_is_a_data_error(self, tmp_path, reference_csv, caplog):
        bad = tmp_path / "bad.csv"
        bad.write_text("0,0,0,200,0\n")
        assert run(["evaluate", "--pred", str(bad), "--ref", reference_csv]) == EXIT_DATA
        assert "stage=evaluate kind=MetadataFormatError" in caplog.text
        assert "azimuth out of range: 200" in caplog.text

    def test_undecodable_metadata_is_a_data_error(self, tmp_path, reference_csv, caplog):
        bad = tmp_path / "bad.csv"
        bad.write_bytes(b"0,0,0,10,0\n\xff\xfe,1,0,0,0\n")
        assert run(["evaluate", "--pred", str(bad), "--ref", reference_csv]) == EXIT_DATA
        assert "stage=evaluate kind=MetadataFormatError message=line 2: not UTF-8 text" in caplog.text

    def test_unexpected_failure_is_a_data_error(self, monkeypatch, reference_csv, caplog):
        def fail(pairs, cfg):
            raise OSError("disk full")

        monkeypatch.setattr(seldscope.pipeline, "evaluate_stage", fail)
        assert run(["evaluate", "--pred", reference_csv, "--ref", reference_csv]) == EXIT_DATA
        assert "error stage=evaluate kind=OSError message=disk full" in caplog.text


class TestReport:
    def test_writes_the_report_set(self, capsys, tmp_path, reference_csv):
        out_dir = str(tmp_path / "out")
        seldscope.main(["report", "--pred", reference_csv, "--ref", reference_csv, "--output-dir", out_dir])
        names = sorted(os.listdir(os.path.join(out_dir, "reports")))
        assert "report_confusion_grid.csv" in names
        assert "report_lateral.json" in names
        assert "Front" in capsys.readouterr().out


class TestSynth:
    def test_one_scene(self, capsys, tmp_path):
        out_dir = str(tmp_path / "out")
        seldscope.main(["synth", "--output-dir", out_dir, "--n-scenes", "1", "--seed", "4"])
        assert "wrote 1 scenes" in capsys.readouterr().out
        assert sorted(os.listdir(os.path.join(out_dir, "scenes"))) == ["scene_0000.csv", "scene_0000.wav"]

    def test_bad_suite_choice(self, tmp_path):
        assert run(["synth", "--output-dir", str(tmp_path), "--suite", "huge"]) == EXIT_USAGE


class TestRenderAndEstimate:
    def test_render_and_estimate_default_to_configured_representation(self, tmp_path):
        out_dir = str(tmp_path / "out")
        config = tmp_path / "cfg.yaml"
        config.write_text("representation: stereo\n")
        seldscope.main(["synth", "--output-dir", out_dir, "--n-scenes", "1"])
        seldscope.main(["render", os.path.join(out_dir, "scenes"), "--config", str(config), "--output-dir", out_dir])
        rendered = os.path.join(out_dir, "rendered", "stereo")
        assert read_wav(os.path.join(rendered, "scene_0000.wav")).channels == 2
        seldscope.main(["estimate", rendered, "--config", str(config), "--output-dir", out_dir])
        assert os.path.isfile(os.path.join(out_dir, "predictions", "stereo", "scene_0000.csv"))


class TestDumpConfig:
    def test_defaults(self, capsys):
        seldscope.main(["dump-config"])
        out = capsys.readouterr().out
        assert out.startswith("representation: foa\n")
        assert "tolerance_deg: 20.0" in out

    def test_from_file(self, capsys, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("representation: stereo\n")
        seldscope.main(["dump-config", "--config", str(path)])
        assert capsys.readouterr().out.startswith("representation: stereo\n")

    def test_unknown_key_is_a_data_error(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("colour: blue\n")
        assert run(["dump-config", "--config", str(path)]) == EXIT_DATA


class TestParser:
    def test_unknown_command(self):
        assert run(["launch"]) == EXIT_USAGE
