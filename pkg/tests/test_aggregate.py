import io

import numpy as np
import pytest

from xgplus.aggregate import (
    AggRule, METRIC_MENU, MatchMetricRow, PossessionScore, RuleMetricMismatch,
    aggregate_possession, frame_xgplus, match_metric_rows, rows_to_csv,
    score_match, score_possessions_arrays, score_possessions_oracle,
)
from xgplus.synth import SynthConfig, simulate_match


class ConstantModel:
    """Stand-in scorer with a fixed probability for every row."""

    def __init__(self, p):
        self.p = p

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), self.p)


class TestAggregationRules:
    def test_at_least_one_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0, 0.3, 40)
        got = aggregate_possession(vals, AggRule.AT_LEAST_ONE)
        want = 1.0
        for v in vals:
            want *= 1.0 - v
        want = 1.0 - want
        assert got == pytest.approx(want, rel=1e-12)

    def test_max(self):
        assert aggregate_possession([0.1, 0.7, 0.3], AggRule.MAX) == 0.7

    def test_sum_of_shots(self):
        v = aggregate_possession(None, AggRule.SUM_OF_SHOTS, "xG",
                                 shot_xg=[0.2, 0.5])
        assert v == pytest.approx(0.7)

    def test_sum_of_shots_requires_xg(self):
        with pytest.raises(RuleMetricMismatch):
            aggregate_possession(None, AggRule.SUM_OF_SHOTS, "xS", [0.1])
        with pytest.raises(RuleMetricMismatch):
            aggregate_possession(None, AggRule.SUM_OF_SHOTS, "xG+", [0.1])

    def test_empty_series_is_zero(self):
        assert aggregate_possession([], AggRule.AT_LEAST_ONE) == 0.0
        assert aggregate_possession([], AggRule.MAX) == 0.0
        assert aggregate_possession(None, AggRule.SUM_OF_SHOTS, "xG", []) == 0.0

    def test_ordering_max_below_at_least_one(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            vals = rng.uniform(0, 0.5, rng.integers(1, 20))
            alo = aggregate_possession(vals, AggRule.AT_LEAST_ONE)
            mx = aggregate_possession(vals, AggRule.MAX)
            assert mx <= alo <= min(1.0, vals.sum()) + 1e-12

    def test_frame_xgplus_is_product(self):
        assert frame_xgplus(0.2, 0.3) == pytest.approx(0.06)

    def test_menu_has_seven_combos(self):
        assert len(METRIC_MENU) == 7
        for metric, rule in METRIC_MENU:
            if rule is AggRule.SUM_OF_SHOTS:
                assert metric == "xG"
        assert ("xS", AggRule.SUM_OF_SHOTS) not in METRIC_MENU


class TestPossessionScoring:
    def setup_method(self):
        cfg = SynthConfig(n_teams=4, n_seasons=1, seed=23)
        self.res = simulate_match(cfg, 0, 1, 0, 1)

    def test_arrays_scoring_shapes_and_ranges(self):
        scores = score_possessions_arrays(
            self.res.arrays, ConstantModel(0.1), ConstantModel(0.4))
        assert scores
        for s in scores:
            assert len(s.xs) == len(s.xg) == len(s.xgplus)
            assert np.allclose(s.xgplus, s.xs * s.xg)
            assert np.all(s.xs == 0.1)
            assert np.all(s.xg == 0.4)
            assert np.all(s.shot_xg == 0.4)

    def test_arrays_scoring_shot_counts_match_events(self):
        scores = score_possessions_arrays(
            self.res.arrays, ConstantModel(0.1), ConstantModel(0.4))
        n_shots = int(np.sum(self.res.arrays.event == 1))
        assert sum(len(s.shot_xg) for s in scores) == n_shots

    def test_arrays_scoring_goal_flags_match_events(self):
        scores = score_possessions_arrays(
            self.res.arrays, ConstantModel(0.1), ConstantModel(0.4))
        n_goals = int(np.sum(self.res.arrays.event == 2))
        assert sum(s.scored_goal for s in scores) == n_goals

    def test_oracle_scoring_matches_truth(self):
        scores = score_possessions_oracle(self.res)
        assert len(scores) == len(self.res.possessions)
        for s, p in zip(scores, self.res.possessions):
            assert np.array_equal(s.xs, p.p_shot)
            assert np.array_equal(s.xg, p.p_goal)
            assert np.allclose(s.xgplus, p.p_shot * p.p_goal)
            assert len(s.shot_xg) == len(p.shot_anchors)
            assert s.scored_goal == (p.goal_anchor is not None)

    def test_oracle_goal_counts_match_score(self):
        scores = score_possessions_oracle(self.res)
        home = f"T{self.res.home:02d}"
        goals = {}
        for s in scores:
            if s.scored_goal:
                goals[s.team] = goals.get(s.team, 0) + 1
        assert goals.get(home, 0) == self.res.home_goals


class TestMatchRows:
    def make_scores(self):
        return [
            PossessionScore("M:0", "A", np.array([0.1, 0.2]),
                            np.array([0.5, 0.5]), np.array([0.05, 0.1]),
                            np.array([0.3]), True),
            PossessionScore("M:99", "B", np.array([0.4]), np.array([0.25]),
                            np.array([0.1]), np.empty(0), False),
        ]

    def test_row_count_and_sides(self):
        rows = match_metric_rows(0, 1, "A", "B", self.make_scores(),
                                 {"A": 1, "B": 0})
        assert len(rows) == 14
        assert sum(r.home for r in rows) == 7
        a_rows = [r for r in rows if r.team == "A"]
        assert all(r.opponent == "B" and r.home for r in a_rows)
        assert all(r.goals_scored == 1 for r in a_rows)

    def test_values_match_hand_aggregation(self):
        rows = match_metric_rows(0, 1, "A", "B", self.make_scores(),
                                 {"A": 1, "B": 0})
        def get(team, metric, rule):
            return next(r.value for r in rows if r.team == team
                        and r.metric == metric and r.agg is rule)
        assert get("A", "xG", AggRule.SUM_OF_SHOTS) == pytest.approx(0.3)
        assert get("B", "xG", AggRule.SUM_OF_SHOTS) == 0.0
        assert get("A", "xG+", AggRule.AT_LEAST_ONE) == pytest.approx(
            1 - (1 - 0.05) * (1 - 0.1))
        assert get("A", "xG+", AggRule.MAX) == pytest.approx(0.1)
        assert get("A", "xS", AggRule.AT_LEAST_ONE) == pytest.approx(
            1 - 0.9 * 0.8)
        assert get("B", "xS", AggRule.MAX) == pytest.approx(0.4)
        assert get("A", "xG", AggRule.MAX) == pytest.approx(0.5)

    def test_score_match_end_to_end(self):
        cfg = SynthConfig(n_teams=4, n_seasons=1, seed=23)
        res = simulate_match(cfg, 0, 1, 0, 1)
        home, away = "T00", "T01"
        rows = score_match(res.arrays, ConstantModel(0.05), ConstantModel(0.3),
                           0, 1, home, away)
        assert len(rows) == 14
        home_goals = next(r.goals_scored for r in rows
                          if r.team == home and r.home)
        assert home_goals == res.home_goals

    def test_csv_roundtrippable_header(self):
        rows = match_metric_rows(0, 1, "A", "B", self.make_scores(),
                                 {"A": 1, "B": 0})
        buf = io.StringIO()
        rows_to_csv(rows, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "season,matchday,team,opp,home,metric,agg,value,goals"
        assert len(lines) == 15
        first = lines[1].split(",")
        assert first[:5] == ["0", "1", "A", "B", "1"]
