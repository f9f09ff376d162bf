import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import open_goal_rays
from xgplus import pitch
from xgplus.features import (
    FEATURE_NAMES, FEATURE_SETS, WindowTooShort, ball_features,
    build_feature_matrix, compute_feature_vector, feature_matrix_arrays,
    goalkeeper_features, neighbor_features, open_goal_fraction,
)
from xgplus.tracking import frames_to_arrays

from test_tracking import make_frame


class TestFeatureCatalog:
    def test_27_features(self):
        assert len(FEATURE_NAMES) == 27

    def test_feature_sets_nested(self):
        assert FEATURE_SETS["DistOnly"] == ["r"]
        assert set(FEATURE_SETS["DistOnly"]) < set(FEATURE_SETS["BallAll"])
        assert set(FEATURE_SETS["BallAll"]) < set(FEATURE_SETS["BallGK"])
        assert set(FEATURE_SETS["BallGK"]) < set(FEATURE_SETS["All"])
        assert FEATURE_SETS["All"] == list(FEATURE_NAMES)


class TestBallFeatures:
    def test_r_theta_at_known_point(self):
        f = make_frame(0, ball=(pitch.GOAL_X - 10.0, 0.0, 0.0))
        r, theta, z, speed = ball_features([f])
        assert r == pytest.approx(10.0)
        assert theta == pytest.approx(0.0)
        assert z == 0.0
        assert speed == 0.0

    def test_central_difference_speed(self):
        frames = [make_frame(i, ball=(20.0 + 0.1 * i, 0.0, 0.0))
                  for i in range(3)]
        _, _, _, speed = ball_features(frames, mid_index=1)
        # 0.2 m over 2 frames at 30 fps = 3 m/s
        assert speed == pytest.approx(3.0)

    def test_one_sided_fallback(self):
        frames = [make_frame(0, ball=(20.0, 0, 0)),
                  make_frame(1, ball=(20.2, 0, 0))]
        _, _, _, speed = ball_features(frames, mid_index=0)
        assert speed == pytest.approx(6.0)

    def test_empty_window_raises(self):
        with pytest.raises(WindowTooShort):
            ball_features([])


class TestOpenGoal:
    def test_no_defenders_fully_open(self):
        assert open_goal_fraction(40.0, 0.0, np.empty(0), np.empty(0)) == 1.0

    def test_hand_computed_single_defender(self):
        # ball (44.5, 0), defender (48.5, 0): dist 4, shadow half-width on
        # the goal line = 8 * tan(asin(0.375 / 4)) each side of center
        got = open_goal_fraction(44.5, 0.0, np.array([48.5]), np.array([0.0]))
        half_shadow = 8.0 * math.tan(math.asin(0.375 / 4.0))
        expected = 1.0 - 2.0 * half_shadow / 7.32
        assert got == pytest.approx(expected, abs=1e-12)

    def test_defender_behind_ball_ignored(self):
        assert open_goal_fraction(40.0, 0.0, np.array([30.0]),
                                  np.array([0.0])) == 1.0

    def test_ball_at_goal_line(self):
        assert open_goal_fraction(pitch.GOAL_X, 0.0, np.empty(0),
                                  np.empty(0)) == 0.0

    def test_ball_inside_defender_circle(self):
        assert open_goal_fraction(40.0, 0.0, np.array([40.2]),
                                  np.array([0.0])) == 0.0

    def test_wall_blocks_everything(self):
        # discs spaced closer than one diameter form a contiguous wall wider
        # than the mouth: no ray reaches the goal
        ys = np.arange(-4.0, 4.01, 0.7)
        xs = np.full(len(ys), 45.0)
        got = open_goal_fraction(44.0, 0.0, xs, ys)
        assert got == pytest.approx(0.0, abs=1e-9)

    def test_overlapping_shadows_union_not_sum(self):
        one = 1.0 - open_goal_fraction(44.5, 0.0, np.array([48.5]),
                                       np.array([0.0]))
        two = 1.0 - open_goal_fraction(
            44.5, 0.0, np.array([48.5, 48.6]), np.array([0.0, 0.05]))
        assert two < 2 * one - 1e-9

    def test_monotone_in_defender_count(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            bx = rng.uniform(20, 50)
            by = rng.uniform(-15, 15)
            dx = rng.uniform(bx + 0.5, 52.0, 6)
            dy = rng.uniform(-8, 8, 6)
            vals = [open_goal_fraction(bx, by, dx[:k], dy[:k])
                    for k in range(7)]
            assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_against_ray_oracle_spot_checks(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            bx = rng.uniform(20, 48)
            by = rng.uniform(-20, 20)
            k = rng.integers(0, 5)
            dx = rng.uniform(bx + 1.0, 51.5, k)
            dy = rng.uniform(by - 6, by + 6, k)
            got = open_goal_fraction(bx, by, dx, dy)
            want = open_goal_rays(bx, by, list(zip(dx, dy)), n_rays=20_000)
            assert got == pytest.approx(want, abs=6e-3)


class TestGoalkeeperAndNeighbors:
    def test_gk_features(self):
        f = make_frame(0)
        gk = next(p for p in f.defenders() if p.is_goalkeeper)
        gk_r, gk_theta = goalkeeper_features(f)
        assert gk_r == pytest.approx(
            math.hypot(pitch.GOAL_X - gk.x, pitch.GOAL_Y - gk.y))

    def test_neighbor_distances_sorted(self):
        f = make_frame(0)
        def_ang, def_dist, off_ang, off_dist = neighbor_features(f)
        assert def_dist == sorted(def_dist)
        assert off_dist == sorted(off_dist)

    def test_sentinel_padding(self):
        # 2 players per side only (non-strict world)
        from xgplus.tracking import BallState, Frame, PlayerState
        players = tuple([
            PlayerState("A_P00", "A", 10, 0, True),
            PlayerState("A_P01", "A", 20, 1, False),
            PlayerState("B_P00", "B", 50, 0, True),
            PlayerState("B_P01", "B", 30, 2, False),
        ])
        f = Frame("M", 0, BallState(25, 0, 0), players, "A", "A_P01",
                  make_frame(0).event)
        _, def_dist, _, off_dist = neighbor_features(f)
        assert def_dist[1:] == [pitch.SENTINEL_DIST] * 4
        # two attackers, nearest (the carrier) dropped: one real slot left
        assert off_dist[0] == pytest.approx(15.0)
        assert off_dist[1:] == [pitch.SENTINEL_DIST] * 4


class TestInvariances:
    def _vec(self, frames):
        return compute_feature_vector(frames, 1 if len(frames) >= 3 else 0)

    def test_translation_along_goal_line_symmetry(self):
        # reflecting the scene across the y = 0 axis preserves r, openGoal,
        # speed and distances, and negates bearings
        f = make_frame(0, ball=(30.0, 7.0, 0.3))
        flipped = make_frame(0, ball=(30.0, -7.0, 0.3))
        object.__setattr__(flipped, "players", tuple(
            type(p)(p.player_id, p.team_id, p.x, -p.y, p.is_goalkeeper)
            for p in f.players))
        a = self._vec([f]).as_array()
        b = self._vec([flipped]).as_array()
        names = list(FEATURE_NAMES)
        for inv in ("r", "z", "speed", "openGoal", "GK_r") + tuple(
                f"DefDist_{k}" for k in range(5)) + tuple(
                f"OffDist_{k}" for k in range(5)):
            j = names.index(inv)
            assert a[j] == pytest.approx(b[j], abs=1e-12), inv
        for ang in ("theta", "GK_theta"):
            j = names.index(ang)
            assert a[j] == pytest.approx(-b[j], abs=1e-12), ang

    @given(dx=st.floats(-5, 5), dy=st.floats(-5, 5))
    @settings(max_examples=25, deadline=None)
    def test_rigid_translation_of_ball_and_players(self, dx, dy):
        # moving ball and all players together changes r/theta but keeps
        # every ball-relative distance identical
        f = make_frame(0, ball=(30.0, 2.0, 0.0))
        g = make_frame(0, ball=(30.0 + dx, 2.0 + dy, 0.0))
        object.__setattr__(g, "players", tuple(
            type(p)(p.player_id, p.team_id, p.x + dx, p.y + dy,
                    p.is_goalkeeper) for p in f.players))
        a = self._vec([f]).as_array()
        b = self._vec([g]).as_array()
        names = list(FEATURE_NAMES)
        for k in range(5):
            for base in ("DefDist", "OffDist", "DefAngle", "OffAngle"):
                j = names.index(f"{base}_{k}")
                assert a[j] == pytest.approx(b[j], abs=1e-9)


class TestArrayPathEquivalence:
    def test_matches_object_path(self):
        frames = [make_frame(i, ball=(25.0 + 0.2 * i, 1.0 - 0.1 * i, 0.05 * i))
                  for i in range(6)]
        vectors, skipped = build_feature_matrix(frames)
        assert not skipped
        m = frames_to_arrays(frames)
        X = feature_matrix_arrays(m, np.arange(6))
        Xo = np.array([v.as_array() for v in vectors])
        assert np.max(np.abs(X - Xo)) < 1e-12

    def test_skip_log_for_missing_carrier(self):
        frames = [make_frame(0), make_frame(1, carrier=None)]
        vectors, skipped = build_feature_matrix(frames)
        assert len(vectors) == 1
        assert skipped == [(1, "no carrier annotated")]
