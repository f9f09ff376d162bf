"""Synthetic tracking-match generator with known per-second hazards.

Matches are simulated at 1 Hz "anchor" states (ball, 22 players, engineered
features, true shot/goal probabilities) and expanded to 30 fps frames by
linear interpolation. The shot hazard and conditional goal probability are
known functions of the engineered features, so generated data carries an
exact probabilistic ground truth for model-recovery checks.

Conventions:
  - both teams attack +x (normalized coordinates);
  - a possession is one attacking sequence of a single team with a fixed
    carrier; per-second shot decisions happen at anchors;
  - shot events land on the following anchor frame, goal / turnover
    resolution 15 frames later; at most one goal per possession.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pitch
from .features import N_FEATURES, feature_matrix_arrays
from .tracking import MatchArrays


class OutOfDomain(ValueError):
    pass


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class HazardParams:
    """Coefficients of the generative per-second hazards.

    Both heads are logistic in (r, speed, openGoal, DefDist_0), with mild
    curvature and one interaction so the surface is not exactly linear in
    the raw features. Monotone decreasing in r over the pitch.
    """

    shot_intercept: float = -2.7
    shot_r: float = -0.06
    shot_r2: float = -0.0025
    shot_speed: float = 0.12
    shot_open_goal: float = 1.0
    shot_def_dist: float = 0.10
    shot_speed_x_open: float = 0.20
    # non-monotone "sweet spot" in shooting distance
    shot_bump: float = 1.1
    bump_center: float = 11.0
    bump_width: float = 5.0

    goal_intercept: float = -0.4
    goal_r: float = -0.17
    goal_r2: float = -0.002
    goal_speed: float = -0.07
    goal_open_goal: float = 2.0
    goal_def_dist: float = 0.05
    goal_z: float = -0.35

    speed_cap: float = 7.0
    def_dist_cap: float = 8.0

    def shot_logit(self, r, speed, open_goal, def_dist):
        s = np.minimum(speed, self.speed_cap)
        d = np.minimum(def_dist, self.def_dist_cap)
        bump = np.exp(-((r - self.bump_center) / self.bump_width) ** 2)
        return (
            self.shot_intercept
            + self.shot_r * r
            + self.shot_r2 * r * r
            + self.shot_bump * bump
            + self.shot_speed * s
            + self.shot_open_goal * open_goal
            + self.shot_def_dist * d
            + self.shot_speed_x_open * s * open_goal
        )

    def goal_logit(self, r, speed, open_goal, def_dist, z):
        s = np.minimum(speed, self.speed_cap)
        d = np.minimum(def_dist, self.def_dist_cap)
        return (
            self.goal_intercept
            + self.goal_r * r
            + self.goal_r2 * r * r
            + self.goal_speed * s
            + self.goal_open_goal * open_goal
            + self.goal_def_dist * d
            + self.goal_z * z
        )


@dataclass
class SynthConfig:
    n_teams: int = 20
    n_seasons: int = 3
    seed: int = 7
    team_attack: np.ndarray = None        # (n_teams,) log-offsets on possession rate
    team_defense: np.ndarray = None       # (n_teams,) log-offsets conceded by opponent
    home_advantage: float = 0.2           # log scale, possession rate
    player_shot_tendency: np.ndarray = None  # (n_teams, 10) logit offsets, outfield
    hazard: HazardParams = field(default_factory=HazardParams)
    base_possessions: float = 32.0        # attacking-third possessions per team-match
    possession_end_prob: float = 1.0 / 12.0
    rebound_prob: float = 0.3
    max_possession_seconds: int = 45

    def __post_init__(self):
        if self.n_teams % 2 != 0:
            raise ValueError("n_teams must be even")
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xC0FFEE]))
        if self.team_attack is None:
            self.team_attack = rng.normal(0.0, 0.25, self.n_teams)
            self.team_attack -= self.team_attack.mean()
        if self.team_defense is None:
            self.team_defense = rng.normal(0.0, 0.2, self.n_teams)
            self.team_defense -= self.team_defense.mean()
        if self.player_shot_tendency is None:
            self.player_shot_tendency = rng.normal(0.0, 0.3, (self.n_teams, 10))

    @property
    def matchdays_per_season(self) -> int:
        return 2 * (self.n_teams - 1)

    def team_name(self, i: int) -> str:
        return f"T{i:02d}"

    def player_name(self, team: int, k: int) -> str:
        # k = 0 is the goalkeeper, 1..10 outfield
        return f"T{team:02d}_P{k:02d}"

    def tendency_of(self, player_id: str) -> float:
        team = int(player_id[1:3])
        k = int(player_id[-2:])
        if k == 0:
            return 0.0
        return float(self.player_shot_tendency[team, k - 1])


def round_robin_schedule(n_teams: int) -> list[list[tuple[int, int]]]:
    """Double round-robin: 2*(n-1) matchdays of (home, away) pairs."""
    teams = list(range(n_teams))
    half = []
    for day in range(n_teams - 1):
        pairs = []
        for i in range(n_teams // 2):
            a = teams[i]
            b = teams[n_teams - 1 - i]
            pairs.append((a, b) if (day + i) % 2 == 0 else (b, a))
        half.append(pairs)
        teams = [teams[0]] + [teams[-1]] + teams[1:-1]
    return half + [[(b, a) for a, b in day] for day in half]


@dataclass
class PossessionSim:
    """One simulated attacking possession at anchor (1 Hz) resolution."""

    team: int                  # team index
    carrier_roster: int        # roster slot 0..21 in the match arrays
    carrier_id: str
    start_frame: int           # absolute frame index of anchor 0
    ball: np.ndarray           # (T+1, 3) anchor ball positions
    players: np.ndarray        # (T+1, 22, 2) anchor player positions
    features: np.ndarray       # (T+1, 27) engineered features at anchors
    p_shot: np.ndarray         # (T+1,) true per-second shot probability
    p_goal: np.ndarray         # (T+1,) true goal-given-shot probability
    shot_anchors: list         # anchor indices carrying a Shot event
    goal_anchor: Optional[int]
    end_frame: int             # absolute index of the final frame
    ball_ext: np.ndarray = None     # (T+2, 3) incl. one extra anchor for the tail
    players_ext: np.ndarray = None  # (T+2, 22, 2)

    @property
    def n_anchors(self):
        return len(self.ball)

    def anchor_frames(self):
        return self.start_frame + 30 * np.arange(self.n_anchors)


@dataclass
class GroundTruth:
    """Per-anchor true probabilities for one match (attacking-third anchors)."""

    match_id: str
    frame_index: np.ndarray
    p_shot: np.ndarray
    p_goal: np.ndarray
    possession_id: np.ndarray  # object array of possession ids
    carrier_id: np.ndarray


@dataclass
class MatchResult:
    match_id: str
    season: int
    matchday: int
    home: int
    away: int
    arrays: Optional[MatchArrays]
    truth: GroundTruth
    possessions: list          # list of PossessionSim
    home_goals: int
    away_goals: int


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

def _engineered_speed(vel: np.ndarray) -> np.ndarray:
    """Anchor speeds matching a 30 fps central difference on the
    linearly-interpolated path: the mean of adjacent segment velocities."""
    T = len(vel)  # segments; anchors = T + 1
    sp = np.empty(T + 1)
    sp[0] = np.linalg.norm(vel[0])
    sp[-1] = np.linalg.norm(vel[-1])
    if T > 1:
        sp[1:-1] = np.linalg.norm(0.5 * (vel[:-1] + vel[1:]), axis=1)
    return sp


def _simulate_ball(rng, n_anchors: int) -> tuple[np.ndarray, np.ndarray]:
    """Anchor positions (n+1, 3) and segment velocities (n, 3)."""
    x = rng.uniform(18.0, 30.0)
    y = rng.uniform(-24.0, 24.0)
    pos = np.empty((n_anchors + 1, 3))
    pos[0] = (x, y, 0.0)
    vel = np.empty((n_anchors, 3))
    v = np.zeros(3)
    for t in range(n_anchors):
        drift = np.array([
            0.35 * (pitch.GOAL_X - 6.0 - pos[t, 0]),
            0.25 * (pitch.GOAL_Y - pos[t, 1]),
            0.0,
        ])
        v = 0.5 * v + 0.12 * drift + rng.normal(0, 2.2, 3) * (1.0, 1.0, 0.35)
        if rng.random() < 0.12:  # occasional fast ball (pass / cross)
            v[:2] += rng.normal(0, 5.5, 2)
        speed = np.linalg.norm(v)
        if speed > pitch.MAX_BALL_SPEED - 1:
            v *= (pitch.MAX_BALL_SPEED - 1) / speed
        nxt = pos[t] + v
        # keep generated possessions inside the attacking third so every
        # anchor is a scoreable state
        nxt[0] = np.clip(nxt[0], pitch.ATTACKING_THIRD_X + 0.1, pitch.HALF_LENGTH - 1.0)
        nxt[1] = np.clip(nxt[1], -pitch.HALF_WIDTH + 1, pitch.HALF_WIDTH - 1)
        nxt[2] = max(0.0, min(nxt[2], 2.5))
        vel[t] = nxt - pos[t]
        pos[t + 1] = nxt
    return pos, vel


def _clip_step(cur, target, max_step):
    d = target - cur
    dist = np.linalg.norm(d, axis=-1, keepdims=True)
    scale = np.minimum(1.0, max_step / np.maximum(dist, 1e-9))
    return cur + d * scale


def _simulate_players(rng, ball: np.ndarray, att_first: bool) -> np.ndarray:
    """Anchor positions (T+1, 22, 2).

    Roster layout: slots 0..10 home team, 11..21 away team; slot 0 of each
    team is the goalkeeper. The attacking side is chosen by att_first
    (True: home attacks). The carrier slot is overwritten with the ball
    track by the caller.
    """
    T1 = len(ball)
    out = np.empty((T1, 22, 2))
    n_block = rng.integers(1, 7)  # defenders committed between ball and goal

    att_base = 0 if att_first else 11
    def_base = 11 if att_first else 0

    # Static-ish anchors around which players hover.
    def clamp(p):
        p[..., 0] = np.clip(p[..., 0], -pitch.HALF_LENGTH + 0.5, pitch.HALF_LENGTH - 0.3)
        p[..., 1] = np.clip(p[..., 1], -pitch.HALF_WIDTH + 0.5, pitch.HALF_WIDTH - 0.5)
        return p

    cur = np.empty((22, 2))
    # attacking GK stays deep
    cur[att_base] = (-46.0 + rng.normal(0, 1), rng.normal(0, 2))
    # attacking outfield spread around the ball
    cur[att_base + 1:att_base + 11] = ball[0, :2] + rng.normal(0, 9, (10, 2))
    # defending outfield: n_block hold the ball-goal corridor, rest spread
    goal = np.array([pitch.GOAL_X, pitch.GOAL_Y])
    lams = rng.uniform(0.25, 0.85, n_block)
    for j in range(10):
        slot = def_base + 1 + j
        if j < n_block:
            corridor = ball[0, :2] + lams[j] * (goal - ball[0, :2])
            cur[slot] = corridor + rng.normal(0, 1.0, 2)
        else:
            cur[slot] = ball[0, :2] + rng.normal(0, 12, (2,))
    cur = clamp(cur)

    gk_noise = rng.normal(0, 0.45, T1)
    for t in range(T1):
        b = ball[t, :2]
        r = np.linalg.norm(goal - b)
        # keeper advances when the cover is thin and the ball is close
        adv = 0.5 + 0.08 * r + 0.9 * (6 - n_block) + gk_noise[t]
        adv = float(np.clip(adv, 0.4, min(11.0, r - 0.8)))
        to_ball = b - goal
        to_ball /= max(np.linalg.norm(to_ball), 1e-9)
        gk_target = goal + adv * to_ball
        if t == 0:
            cur[def_base] = gk_target
        targets = cur.copy()
        targets[def_base] = gk_target
        # blockers track the corridor; everyone else drifts with the ball
        drift = 0.25 * (b - cur)
        mask = np.ones(22, bool)
        mask[[att_base, def_base]] = False
        for j in range(n_block):
            slot = def_base + 1 + j
            mask[slot] = False
            targets[slot] = b + lams[j] * (goal - b) + rng.normal(0, 0.5, 2)
        targets[mask] = cur[mask] + drift[mask] + rng.normal(0, 1.4, (mask.sum(), 2))
        cur = clamp(_clip_step(cur, targets, pitch.MAX_PLAYER_SPEED - 0.5))
        out[t] = cur
    return out


# ---------------------------------------------------------------------------
# Possession and match simulation
# ---------------------------------------------------------------------------

def _anchor_features(ball, vel, players, carrier_slot, att_first):
    """Engineered features at anchors, matching feature_matrix_arrays."""
    T1 = len(ball)
    bx, by, bz = ball[:, 0], ball[:, 1], ball[:, 2]
    feats = np.empty((T1, N_FEATURES))
    feats[:, 0] = np.hypot(pitch.GOAL_X - bx, pitch.GOAL_Y - by)
    feats[:, 1] = np.arctan2(pitch.GOAL_Y - by, pitch.GOAL_X - bx)
    feats[:, 2] = bz
    feats[:, 3] = _engineered_speed(vel)

    att_base = 0 if att_first else 11
    def_base = 11 if att_first else 0
    from .features import _open_goal_kernel  # jitted kernel

    def_out = players[:, def_base + 1:def_base + 11]  # non-GK defenders
    gk = players[:, def_base]
    att_slots = [att_base + j for j in range(11) if att_base + j != carrier_slot]
    atts = players[:, att_slots]

    for t in range(T1):
        feats[t, 4] = _open_goal_kernel(
            bx[t], by[t], def_out[t, :, 0].copy(), def_out[t, :, 1].copy(),
            pitch.GOAL_X, pitch.GOAL_Y, pitch.DEFENDER_RADIUS, pitch.GOAL_HALF_WIDTH,
        )
    feats[:, 5] = np.hypot(pitch.GOAL_X - gk[:, 0], pitch.GOAL_Y - gk[:, 1])
    feats[:, 6] = np.where(
        feats[:, 5] > 0,
        np.arctan2(pitch.GOAL_Y - gk[:, 1], pitch.GOAL_X - gk[:, 0]), 0.0)

    def block(pl):
        dx = pl[:, :, 0] - bx[:, None]
        dy = pl[:, :, 1] - by[:, None]
        d = np.hypot(dx, dy)
        a = np.arctan2(dy, dx)
        order = np.argsort(d, axis=1, kind="stable")[:, :5]
        rows = np.arange(T1)[:, None]
        dd = d[rows, order]
        aa = a[rows, order]
        if dd.shape[1] < 5:
            pad = 5 - dd.shape[1]
            dd = np.pad(dd, ((0, 0), (0, pad)), constant_values=pitch.SENTINEL_DIST)
            aa = np.pad(aa, ((0, 0), (0, pad)), constant_values=pitch.SENTINEL_ANGLE)
        return aa, dd

    da, ddst = block(def_out)
    # attackers: carrier excluded via slot list; the remaining nearest one is
    # dropped only if it sits on the ball, which it does not here, so the
    # Table-6 "exclude nearest attacker" rule maps to excluding the carrier.
    oa, odst = block(atts)
    feats[:, 7:12] = da
    feats[:, 12:17] = ddst
    feats[:, 17:22] = oa
    feats[:, 22:27] = odst
    return feats


def _simulate_possession(cfg: SynthConfig, rng, team: int, att_first: bool,
                         start_frame: int, match_id: str) -> PossessionSim:
    n_max = cfg.max_possession_seconds
    # Anchors 0..n_max+1 so a shot landing on anchor n_max still has a
    # following anchor for the resolution tail.
    ball, vel = _simulate_ball(rng, n_max + 1)
    players = _simulate_players(rng, ball, att_first)

    att_base = 0 if att_first else 11
    carrier_k = int(rng.integers(1, 11))            # outfield slot within team
    carrier_slot = att_base + carrier_k
    players[:, carrier_slot] = ball[:, :2]          # carrier rides the ball
    carrier_id = cfg.player_name(team, carrier_k)
    tendency = cfg.tendency_of(carrier_id)

    feats = _anchor_features(ball, vel, players, carrier_slot, att_first)
    in_third = ball[:, 0] >= pitch.ATTACKING_THIRD_X
    hz = cfg.hazard
    p_shot = sigmoid(hz.shot_logit(feats[:, 0], feats[:, 3], feats[:, 4], feats[:, 12])
                     + tendency)
    p_goal = sigmoid(hz.goal_logit(feats[:, 0], feats[:, 3], feats[:, 4],
                                   feats[:, 12], feats[:, 2]))

    shot_anchors: list[int] = []
    goal_anchor = None
    t = 0
    end_extra = 15  # turnover / goal resolution lands mid-second
    while True:
        took_shot = in_third[t] and rng.random() < p_shot[t]
        if took_shot:
            shot_anchors.append(t + 1)
            if rng.random() < p_goal[t + 1]:
                goal_anchor = t + 1
                last_anchor = t + 1
                break
            if t + 1 < n_max and rng.random() < cfg.rebound_prob:
                t += 1
                continue
            last_anchor = t + 1
            break
        if t + 1 >= n_max or rng.random() < cfg.possession_end_prob:
            last_anchor = t
            break
        t += 1

    T = last_anchor
    return PossessionSim(
        team=team,
        carrier_roster=carrier_slot,
        carrier_id=carrier_id,
        start_frame=start_frame,
        ball=ball[:T + 1],
        players=players[:T + 1],
        features=feats[:T + 1],
        p_shot=p_shot[:T + 1],
        p_goal=p_goal[:T + 1],
        shot_anchors=shot_anchors,
        goal_anchor=goal_anchor,
        end_frame=start_frame + 30 * T + end_extra,
        ball_ext=ball[:T + 2],
        players_ext=players[:T + 2],
    )


def match_seed(cfg: SynthConfig, season: int, matchday: int, home: int, away: int):
    return np.random.SeedSequence([cfg.seed, season, matchday, home, away])


def simulate_match(cfg: SynthConfig, season: int, matchday: int,
                   home: int, away: int, expand_frames: bool = True) -> MatchResult:
    """Deterministic given (config, season, matchday, fixture)."""
    if home == away:
        raise ValueError("teams must be distinct")
    rng = np.random.default_rng(match_seed(cfg, season, matchday, home, away))
    match_id = f"S{season}D{matchday:03d}_{cfg.team_name(home)}v{cfg.team_name(away)}"

    lam_home = cfg.base_possessions * math.exp(
        cfg.home_advantage + cfg.team_attack[home] + cfg.team_defense[away])
    lam_away = cfg.base_possessions * math.exp(
        cfg.team_attack[away] + cfg.team_defense[home])
    n_home = rng.poisson(lam_home)
    n_away = rng.poisson(lam_away)
    order = np.array([0] * n_home + [1] * n_away)
    rng.shuffle(order)

    possessions = []
    frame_cursor = 0
    for side in order:
        att_first = side == 0
        team = home if att_first else away
        sim = _simulate_possession(cfg, rng, team, att_first, frame_cursor, match_id)
        possessions.append(sim)
        gap = int(rng.integers(60, 240))
        frame_cursor = sim.end_frame + gap
        frame_cursor += (30 - frame_cursor % 30) % 30  # next anchor grid point

    home_goals = sum(1 for p in possessions if p.goal_anchor is not None and p.team == home)
    away_goals = sum(1 for p in possessions if p.goal_anchor is not None and p.team == away)

    truth = _ground_truth(match_id, possessions)
    arrays = expand_match(cfg, match_id, home, away, possessions) if expand_frames else None
    return MatchResult(match_id, season, matchday, home, away, arrays, truth,
                       possessions, home_goals, away_goals)


def _ground_truth(match_id: str, possessions) -> GroundTruth:
    fi, ps, pg, pid, cid = [], [], [], [], []
    for p in possessions:
        anchors = p.anchor_frames()
        mask = p.ball[:, 0] >= pitch.ATTACKING_THIRD_X
        fi.append(anchors[mask])
        ps.append(p.p_shot[mask])
        pg.append(p.p_goal[mask])
        pid.extend([f"{match_id}:{p.start_frame}"] * int(mask.sum()))
        cid.extend([p.carrier_id] * int(mask.sum()))
    return GroundTruth(
        match_id=match_id,
        frame_index=np.concatenate(fi) if fi else np.empty(0, np.int64),
        p_shot=np.concatenate(ps) if ps else np.empty(0),
        p_goal=np.concatenate(pg) if pg else np.empty(0),
        possession_id=np.array(pid, dtype=object),
        carrier_id=np.array(cid, dtype=object),
    )


def expand_match(cfg: SynthConfig, match_id: str, home: int, away: int,
                 possessions) -> MatchArrays:
    """30 fps frame arrays via linear interpolation of anchor states."""
    roster_player = [cfg.player_name(home, k) for k in range(11)] + \
                    [cfg.player_name(away, k) for k in range(11)]
    roster_team = [cfg.team_name(home)] * 11 + [cfg.team_name(away)] * 11
    roster_gk = np.zeros(22, bool)
    roster_gk[0] = roster_gk[11] = True

    chunks_fidx, chunks_ball, chunks_pxy = [], [], []
    chunks_poss, chunks_carrier, chunks_event = [], [], []
    for p in possessions:
        T = p.n_anchors - 1
        n_frames = 30 * T + 1
        tail = p.end_frame - (p.start_frame + 30 * T)  # 15-frame resolution tail
        total = n_frames + tail
        fidx = p.start_frame + np.arange(total)
        # Interpolate over the extended anchor grid so the resolution tail
        # continues with the final segment velocity; this keeps the 30 fps
        # central-difference speed at the last anchor equal to the value the
        # hazard was evaluated on.
        tt = np.arange(total) / 30.0
        base = np.arange(len(p.ball_ext))
        ball = np.empty((total, 3))
        pxy = np.empty((total, 22, 2))
        for d in range(3):
            ball[:, d] = np.interp(tt, base, p.ball_ext[:, d])
        for d in range(2):
            pxy[:, :, d] = np.array(
                [np.interp(tt, base, p.players_ext[:, j, d]) for j in range(22)]
            ).T
        team_name = cfg.team_name(p.team)
        poss = np.full(total, team_name, dtype=object)
        carrier = np.full(total, p.carrier_roster, dtype=np.int16)
        event = np.zeros(total, dtype=np.int8)
        for s in p.shot_anchors:
            event[30 * s] = 1
        if p.goal_anchor is not None:
            event[30 * p.goal_anchor + tail] = 2
        else:
            event[-1] = 3  # turnover resolution
        chunks_fidx.append(fidx)
        chunks_ball.append(ball)
        chunks_pxy.append(pxy)
        chunks_poss.append(poss)
        chunks_carrier.append(carrier)
        chunks_event.append(event)

    if not chunks_fidx:
        return MatchArrays(match_id, np.empty(0, np.int64), np.empty((0, 3)),
                           np.empty((0, 22, 2)), roster_player, roster_team,
                           roster_gk, np.empty(0, object),
                           np.empty(0, np.int16), np.empty(0, np.int8))
    return MatchArrays(
        match_id=match_id,
        frame_index=np.concatenate(chunks_fidx),
        ball=np.concatenate(chunks_ball),
        player_xy=np.concatenate(chunks_pxy),
        roster_player=roster_player,
        roster_team=roster_team,
        roster_gk=roster_gk,
        poss_team=np.concatenate(chunks_poss),
        carrier=np.concatenate(chunks_carrier),
        event=np.concatenate(chunks_event),
    )


def true_probabilities(cfg: SynthConfig, frame, prev_frame=None, next_frame=None):
    """Exact generative (p_shot, p_goal) for a frame in the attacking third.

    The shot head includes the carrier's persistent tendency offset; pass
    neighbor frames to reproduce the central-difference speed.
    """
    from .features import compute_feature_vector

    if frame.ball.x < pitch.ATTACKING_THIRD_X:
        raise OutOfDomain("frame outside the attacking third")
    window = [f for f in (prev_frame, frame, next_frame) if f is not None]
    fv = compute_feature_vector(window, mid_index=window.index(frame))
    tendency = cfg.tendency_of(frame.carrier_id) if frame.carrier_id else 0.0
    hz = cfg.hazard
    p_s = float(sigmoid(hz.shot_logit(fv.r, fv.speed, fv.openGoal, fv.DefDist_0)
                        + tendency))
    p_g = float(sigmoid(hz.goal_logit(fv.r, fv.speed, fv.openGoal, fv.DefDist_0, fv.z)))
    return p_s, p_g


def datasets_from_match(res: MatchResult):
    """(xs, xg) DatasetArrays built directly from anchor states.

    Equivalent to expanding the match to 30 fps and running the labeling
    pipeline, but without materializing frames; used for large runs.
    """
    from .labels import DatasetArrays

    xs_X, xs_y, xs_f, xs_p, xs_c = [], [], [], [], []
    xg_X, xg_y, xg_f, xg_p, xg_c = [], [], [], [], []
    for p in res.possessions:
        pid = f"{res.match_id}:{p.start_frame}"
        anchors = p.anchor_frames()
        shot_set = set(p.shot_anchors)
        n = p.n_anchors
        xs_X.append(p.features)
        xs_y.append(np.array([1 if t + 1 in shot_set else 0 for t in range(n)],
                             dtype=np.int8))
        xs_f.append(anchors)
        xs_p.extend([pid] * n)
        xs_c.extend([p.carrier_id] * n)
        for s in p.shot_anchors:
            xg_X.append(p.features[s])
            xg_y.append(1 if p.goal_anchor == s else 0)
            xg_f.append(p.start_frame + 30 * s)
            xg_p.append(pid)
            xg_c.append(p.carrier_id)

    def pack(X, y, f, pids, cids):
        n = len(y)
        return DatasetArrays(
            X=np.asarray(X, dtype=np.float64).reshape(n, -1),
            y=np.asarray(y, dtype=np.int8),
            match_id=np.array([res.match_id] * n, dtype=object),
            frame_index=np.asarray(f, dtype=np.int64),
            possession_id=np.array(pids, dtype=object),
            carrier_id=np.array(cids, dtype=object),
            season=np.full(n, res.season, dtype=np.int16),
        )

    xs = pack(np.concatenate(xs_X) if xs_X else np.empty((0, N_FEATURES)),
              np.concatenate(xs_y) if xs_y else [],
              np.concatenate(xs_f) if xs_f else [], xs_p, xs_c)
    xg = pack(xg_X, xg_y, xg_f, xg_p, xg_c)
    return xs, xg


def bayes_probabilities(res: MatchResult):
    """True (p_xs, p_xg) aligned row-for-row with datasets_from_match(res)."""
    xs, xg = [], []
    for p in res.possessions:
        xs.append(p.p_shot)
        xg.extend(p.p_goal[s] for s in p.shot_anchors)
    return (np.concatenate(xs) if xs else np.empty(0),
            np.asarray(xg, dtype=np.float64))


def season_fixtures(cfg: SynthConfig):
    """Yield (season, matchday, home, away) over all configured seasons."""
    schedule = round_robin_schedule(cfg.n_teams)
    for season in range(cfg.n_seasons):
        for day, pairs in enumerate(schedule):
            for home, away in pairs:
                yield season, day + 1, home, away


def write_ground_truth(truth: GroundTruth, fh) -> None:
    for i in range(len(truth.frame_index)):
        fh.write(f"{truth.match_id},{truth.frame_index[i]},"
                 f"{truth.p_shot[i]:.9f},{truth.p_goal[i]:.9f}\n")
