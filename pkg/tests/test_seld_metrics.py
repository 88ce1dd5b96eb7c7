import itertools

import numpy as np
import pytest

from ambisonics import Direction
from labels import EventAnnotation
from seld_metrics import (
    PUBLISHED_ROWS,
    SeldScores,
    angular_distance,
    angular_distances,
    compose_reference_rows,
    compose_seld,
    compute_scores,
    match_annotations,
    match_frame,
    score_annotations,
)


def ev(azimuth, frame=0, class_index=0, source=0):
    return EventAnnotation(frame, class_index, source, azimuth)


def random_annotations(rng, frames=20, classes=3):
    out = []
    for frame in range(frames):
        for class_index in range(classes):
            for source in range(int(rng.integers(0, 3))):
                out.append(ev(float(rng.integers(-180, 180)), frame, class_index, source))
    return out


# ---------------------------------------------------------------------------
# Angular distance
# ---------------------------------------------------------------------------


class TestAngularDistance:
    @pytest.mark.parametrize(
        "a, b, expected",
        [(10.0, -10.0, 20.0), (170.0, -170.0, 20.0), (0.0, -180.0, 180.0), (0.0, 160.0, 160.0), (45.0, 45.0, 0.0)],
    )
    def test_horizontal_examples(self, a, b, expected):
        assert angular_distance(Direction(a), Direction(b)) == pytest.approx(expected)

    def test_elevation_uses_the_great_circle(self):
        assert angular_distance(Direction(0.0), Direction(0.0, 90.0)) == pytest.approx(90.0)
        assert angular_distance(Direction(0.0, 45.0), Direction(180.0, 45.0)) == pytest.approx(90.0)

    def test_accepts_annotations(self):
        assert angular_distance(ev(30.0), ev(-60.0)) == pytest.approx(90.0)

    def test_broadcasts(self):
        d = angular_distances(np.array([[0.0], [90.0]]), 0.0, np.array([[0.0, 90.0, -90.0]]), 0.0)
        assert d.tolist() == [[0.0, 90.0, 90.0], [90.0, 0.0, 180.0]]


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


class TestMatchFrame:
    def test_total_distance(self):
        m = match_frame([ev(10.0), ev(100.0)], [ev(95.0), ev(20.0)])
        assert sum(p.distance_deg for p in m.pairs) == pytest.approx(15.0)
        assert m.unmatched_preds == m.unmatched_refs == ()

    def test_prefers_the_global_minimum(self):
        m = match_frame([ev(0.0), ev(50.0)], [ev(45.0), ev(5.0)])
        assert sum(p.distance_deg for p in m.pairs) == pytest.approx(10.0)
        assert {(p.pred.azimuth_deg, p.ref.azimuth_deg) for p in m.pairs} == {(0.0, 5.0), (50.0, 45.0)}

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            preds = [ev(float(a)) for a in rng.integers(-180, 180, size=4)]
            refs = [ev(float(a)) for a in rng.integers(-180, 180, size=3)]
            best = min(
                sum(angular_distance(preds[i], r) for i, r in zip(perm, refs))
                for perm in itertools.permutations(range(4), 3)
            )
            m = match_frame(preds, refs)
            assert len(m.pairs) == 3
            assert len(m.unmatched_preds) == 1
            assert sum(p.distance_deg for p in m.pairs) == pytest.approx(best)

    def test_no_predictions(self):
        m = match_frame([], [ev(0.0, frame=4, class_index=2)])
        assert (m.frame_index, m.class_index) == (4, 2)
        assert m.pairs == ()
        assert m.n_refs == 1
        assert m.n_preds == 0

    def test_nothing_at_all(self):
        m = match_frame([], [], frame_index=3, class_index=1)
        assert (m.frame_index, m.class_index, m.n_refs, m.n_preds) == (3, 1, 0, 0)


class TestMatchAnnotations:
    def test_groups_by_frame_and_class(self):
        preds = [ev(0.0, 0, 0), ev(0.0, 1, 2)]
        refs = [ev(5.0, 0, 0), ev(5.0, 0, 1)]
        matches = match_annotations(preds, refs, scene_id="s1")
        assert [(m.frame_index, m.class_index) for m in matches] == [(0, 0), (0, 1), (1, 2)]
        assert [len(m.pairs) for m in matches] == [1, 0, 0]
        assert {m.scene_id for m in matches} == {"s1"}

    def test_classes_never_match_each_other(self):
        (first, second) = match_annotations([ev(0.0, class_index=1)], [ev(0.0, class_index=0)])
        assert first.pairs == second.pairs == ()


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------


class TestComputeScores:
    def test_perfect_prediction(self):
        refs = random_annotations(np.random.default_rng(0))
        scores = score_annotations(refs, refs)
        assert scores.error_rate == 0.0
        assert scores.f_score == 1.0
        assert scores.localization_error_deg == 0.0
        assert scores.localization_recall == 1.0
        assert scores.seld_score == 0.0

    def test_offset_beyond_tolerance(self):
        scores = score_annotations([ev(25.0)], [ev(0.0)])
        assert scores.f_score == 0.0
        assert scores.localization_recall == 1.0
        assert scores.localization_error_deg == pytest.approx(25.0)
        assert scores.error_rate == 1.0
        assert (scores.true_positives, scores.false_positives, scores.false_negatives) == (0, 1, 1)

    def test_offset_within_tolerance(self):
        scores = score_annotations([ev(15.0)], [ev(0.0)])
        assert (scores.f_score, scores.error_rate) == (1.0, 0.0)
        assert scores.localization_error_deg == pytest.approx(15.0)

    def test_tolerance_is_configurable(self):
        assert score_annotations([ev(25.0)], [ev(0.0)], tolerance_deg=30.0).f_score == 1.0

    def test_missed_reference(self):
        scores = score_annotations([], [ev(0.0), ev(90.0, frame=1)])
        assert scores.error_rate == 1.0
        assert scores.localization_recall == 0.0
        assert scores.localization_error_deg is None

    def test_no_references(self):
        preds = [ev(0.0, 0, 0), ev(0.0, 0, 1), ev(0.0, 1, 0)]
        scores = score_annotations(preds, [])
        assert scores.error_rate == 3.0
        assert scores.localization_recall == 0.0
        assert scores.localization_error_deg is None
        assert scores.seld_score == 1.0

    def test_empty_input(self):
        scores = score_annotations([], [])
        assert scores.error_rate == 0.0
        assert scores.f_score == 0.0
        assert scores.seld_score == pytest.approx(0.75)

    def test_frames_of_different_scenes_stay_apart(self):
        matches = match_annotations([], [ev(0.0)], scene_id="a") + match_annotations([ev(0.0)], [], scene_id="b")
        assert compute_scores(matches).error_rate == 2.0
        # same scene: the miss and the insertion share a frame and count as one substitution
        same = match_annotations([], [ev(0.0)], scene_id="a") + match_annotations([ev(0.0)], [], scene_id="a")
        assert compute_scores(same).error_rate == 1.0

    def test_wrong_class_is_a_substitution(self):
        scores = score_annotations([ev(0.0, class_index=1)], [ev(0.0, class_index=0)])
        assert scores.error_rate == 1.0
        assert scores.f_score == 0.0

    def test_rotating_everything_by_180_changes_nothing(self):
        rng = np.random.default_rng(7)
        refs = random_annotations(rng)
        preds = [a.with_direction(a.azimuth_deg + float(rng.normal(0, 15))) for a in refs[::2]]
        preds += random_annotations(rng, frames=5)
        before = score_annotations(preds, refs)
        after = score_annotations(
            [p.with_direction(p.azimuth_deg + 180.0) for p in preds],
            [r.with_direction(r.azimuth_deg + 180.0) for r in refs],
        )
        assert after.error_rate == pytest.approx(before.error_rate)
        assert after.f_score == pytest.approx(before.f_score)
        assert after.localization_error_deg == pytest.approx(before.localization_error_deg)
        assert after.localization_recall == pytest.approx(before.localization_recall)

    @pytest.mark.parametrize("seed", range(5))
    def test_spurious_predictions_never_help(self, seed):
        rng = np.random.default_rng(seed)
        refs = random_annotations(rng, classes=2)
        preds = [a.with_direction(a.azimuth_deg + float(rng.normal(0, 20))) for a in refs if rng.random() < 0.7]
        present = {(a.frame_index, a.class_index) for a in refs}
        before = score_annotations(preds, refs)
        for frame in range(20):
            # a class with no reference in this frame
            class_index = next(c for c in range(3, 13) if (frame, c) not in present)
            preds = preds + [ev(float(rng.integers(-180, 180)), frame, class_index, int(rng.integers(0, 3)))]
            after = score_annotations(preds, refs)
            assert after.error_rate >= before.error_rate
            assert after.f_score <= before.f_score
            before = after

    def test_tolerance_moves_f_and_er_but_not_le(self):
        rng = np.random.default_rng(11)
        refs = random_annotations(rng)
        preds = [a.with_direction(a.azimuth_deg + float(rng.uniform(-60, 60))) for a in refs]
        matches = match_annotations(preds, refs)
        sweep = [compute_scores(matches, tolerance) for tolerance in (0.0, 5.0, 10.0, 20.0, 45.0, 90.0, 180.0)]
        assert len({s.localization_error_deg for s in sweep}) == 1
        assert len({s.localization_recall for s in sweep}) == 1
        f_scores = [s.f_score for s in sweep]
        error_rates = [s.error_rate for s in sweep]
        assert f_scores == sorted(f_scores)
        assert error_rates == sorted(error_rates, reverse=True)
        assert f_scores[0] < f_scores[-1] == 1.0
        assert error_rates[0] > error_rates[-1] == 0.0

    def test_as_dict_carries_the_seld_score(self):
        d = SeldScores(0.5, 0.5, 90.0, 0.5).as_dict()
        assert d["seld_score"] == pytest.approx(0.5)
        assert d["n_pairs"] == 0


class TestComposeSeld:
    def test_error_rate_is_clipped(self):
        assert compose_seld(2.0, 1.0, 0.0, 1.0) == pytest.approx(0.25)

    def test_missing_le_counts_as_180(self):
        assert compose_seld(0.0, 1.0, None, 1.0) == pytest.approx(0.25)

    @pytest.mark.parametrize("name", sorted(PUBLISHED_ROWS))
    def test_published_rows_recompose(self, name):
        components, reported = PUBLISHED_ROWS[name]
        # the B+E row is rounded from a slightly inconsistent set of components
        tolerance = 0.006 if name == "B+E" else 0.005
        assert compose_seld(*components) == pytest.approx(reported, abs=tolerance)

    def test_reference_rows(self):
        rows = compose_reference_rows()
        assert [name for name, *_ in rows] == list(PUBLISHED_ROWS)
        (_, _, reported, recomputed) = rows[0]
        assert (reported, recomputed) == (0.65, pytest.approx(0.6513, abs=1e-4))

    def test_foa_row_is_row_c(self):
        assert PUBLISHED_ROWS["FOA"] == PUBLISHED_ROWS["C"]
