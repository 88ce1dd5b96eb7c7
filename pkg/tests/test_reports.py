import pandas as pd
import pytest

import reports
from analysis import PolyphonyBucket, PolyphonyReport, azimuth_histogram, lateral_robustness, quadrant_confusion
from labels import EventAnnotation
from seld_metrics import SeldScores, compose_reference_rows, match_annotations, score_annotations


def ev(azimuth, frame=0):
    return EventAnnotation(frame, 0, 0, azimuth)


@pytest.fixture
def mirrored_matches():
    refs = [ev(10.0), ev(170.0, frame=1), ev(90.0, frame=2)]
    preds = [ev(10.0), ev(10.0, frame=1), ev(90.0, frame=2)]
    return match_annotations(preds, refs)


class TestFmt:
    @pytest.mark.parametrize("value, text", [(None, "n/a"), (0.5, "0.500"), (3, "3"), ("x", "x")])
    def test_examples(self, value, text):
        assert reports.fmt(value) == text

    def test_digits(self):
        assert reports.fmt(1 / 3, 6) == "0.333333"


class TestWriters:
    def test_key_values_sorted(self, tmp_path):
        path = reports.write_key_values(str(tmp_path / "r" / "scores.txt"), {"b": 0.25, "a": 2, "c": None})
        assert open(path).read() == "a = 2\nb = 0.250000\nc = n/a\n"

    def test_scores_text(self, tmp_path):
        scores = score_annotations([ev(0.0)], [ev(0.0)])
        path = reports.write_key_values(str(tmp_path / "s.txt"), reports.scores_payload(scores))
        lines = open(path).read().splitlines()
        assert "error_rate = 0.000000" in lines
        assert "seld_score = 0.000000" in lines
        assert "true_positives = 1" in lines

    def test_json_round_trip(self, tmp_path):
        payload = reports.scores_payload(SeldScores(0.5, 0.5, None, 0.0))
        path = reports.write_json(str(tmp_path / "s.json"), payload)
        loaded = reports.read_json(path)
        assert loaded["localization_error_deg"] is None
        assert loaded["seld_score"] == pytest.approx(0.75)
        assert open(path).read().endswith("}\n")

    def test_confusion_grid(self, tmp_path, mirrored_matches):
        path = reports.write_confusion_grid(str(tmp_path / "grid.csv"), quadrant_confusion(mirrored_matches))
        df = pd.read_csv(path)
        assert list(df.columns) == ["true_quadrant", "predicted_quadrant", "value"]
        assert len(df) == 16
        back = df[df.true_quadrant == "Back"].set_index("predicted_quadrant")["value"]
        assert back["Front"] == 1.0
        assert back["Back"] == 0.0


class TestPayloads:
    def test_quadrants(self, mirrored_matches):
        payload = reports.quadrant_payload(quadrant_confusion(mirrored_matches))
        assert payload["counts"][2] == [1, 0, 0, 0]
        assert payload["front_back_confusion"] == 0.5
        assert payload["per_quadrant_le"] == {"Front": 0.0, "Left": 0.0, "Back": 160.0, "Right": None}

    def test_polyphony(self):
        payload = reports.polyphony_payload(PolyphonyReport({1: PolyphonyBucket(4, 2, 10.0)}))
        assert payload == {"1": {"n_refs": 4, "n_matched": 2, "recall": 0.5, "localization_error_deg": 5.0}}

    def test_lateral(self, mirrored_matches):
        payload = reports.lateral_payload(lateral_robustness(mirrored_matches))
        assert payload["band_deg"] == [60.0, 120.0]
        assert payload["lateral_pairs"] == 1
        assert payload["front_back_pairs"] == 2
        assert payload["front_back_to_lateral_ratio"] is None


class TestTables:
    def test_comparison(self, mirrored_matches):
        scores = score_annotations([ev(0.0)], [ev(0.0)])
        table = reports.comparison_table(
            [("foa", scores, quadrant_confusion(mirrored_matches)), ("stereo", SeldScores(1.0, 0.0, None, 0.0), None)]
        )
        assert "Front/back confusion" in table
        assert "50.0%" in table
        assert "n/a" in table
        assert table.count("\n") == 5

    def test_quadrant_table(self, mirrored_matches):
        table = reports.quadrant_table(quadrant_confusion(mirrored_matches))
        assert "160.0" in table
        assert "1.000" in table

    def test_polyphony_table_marks_the_open_bucket(self):
        table = reports.polyphony_table(PolyphonyReport({1: PolyphonyBucket(1, 1, 0.0), 4: PolyphonyBucket(2, 0, 0.0)}))
        assert "4+" in table

    def test_reference_rows(self):
        table = reports.reference_rows_table(compose_reference_rows())
        assert "0.6513" in table
        assert "+0.0013" in table
        assert "B+E" in table

    def test_histogram(self):
        table = reports.histogram_table(azimuth_histogram([ev(0.0), ev(100.0), ev(110.0)]))
        row = table.splitlines()[3]
        assert [cell.strip() for cell in row.strip("|").split("|")] == ["1", "2", "0", "0"]
