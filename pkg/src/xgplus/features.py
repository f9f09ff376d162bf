"""Per-frame feature engineering: ball, goal-mouth occlusion, keeper, neighbors.

27 features per scored frame. Column order matches the export header:
r, theta, z, speed, openGoal, GK_r, GK_theta, DefAngle_0..4, DefDist_0..4,
OffAngle_0..4, OffDist_0..4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import pitch
from .tracking import Frame, MatchArrays

FEATURE_NAMES = (
    ["r", "theta", "z", "speed", "openGoal", "GK_r", "GK_theta"]
    + [f"DefAngle_{k}" for k in range(5)]
    + [f"DefDist_{k}" for k in range(5)]
    + [f"OffAngle_{k}" for k in range(5)]
    + [f"OffDist_{k}" for k in range(5)]
)
N_FEATURES = len(FEATURE_NAMES)

FEATURE_SETS = {
    "DistOnly": ["r"],
    "BallAll": ["r", "theta", "z", "speed"],
    "BallGK": ["r", "theta", "z", "speed", "GK_r", "GK_theta"],
    "All": list(FEATURE_NAMES),
}


class WindowTooShort(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: tuple

    def __getattr__(self, name):
        try:
            return self.values[FEATURE_NAMES.index(name)]
        except ValueError:
            raise AttributeError(name) from None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + math.pi) % (2 * math.pi) - math.pi
    return math.pi if a == -math.pi else a


def _bearing(from_x, from_y, to_x, to_y):
    return _wrap_angle(math.atan2(to_y - from_y, to_x - from_x))


def ball_features(window: list[Frame], mid_index: Optional[int] = None,
                  goal=(pitch.GOAL_X, pitch.GOAL_Y)):
    """(r, theta, z, speed) at the scored frame of a window.

    The scored frame is window[mid_index] (default: the middle of a 3-frame
    window). Speed is a 3-D central difference over the neighboring frames;
    a 2-frame window (stream edge) falls back to a one-sided difference.
    """
    if not window:
        raise WindowTooShort("empty window")
    if mid_index is None:
        mid_index = 1 if len(window) >= 3 else 0
    mid = window[mid_index]
    if len(window) == 1:
        speed = 0.0
    else:
        a, b = window[0], window[-1]
        dt = (b.frame_index - a.frame_index) * pitch.FRAME_DT
        if dt <= 0:
            raise WindowTooShort("window frames not ascending")
        speed = math.dist(
            (a.ball.x, a.ball.y, a.ball.z), (b.ball.x, b.ball.y, b.ball.z)
        ) / dt
    r = math.hypot(goal[0] - mid.ball.x, goal[1] - mid.ball.y)
    theta = _bearing(mid.ball.x, mid.ball.y, goal[0], goal[1])
    return r, theta, mid.ball.z, speed


def open_goal_fraction(
    ball_x: float,
    ball_y: float,
    def_x: np.ndarray,
    def_y: np.ndarray,
    goal_x: float = pitch.GOAL_X,
    goal_y: float = pitch.GOAL_Y,
    radius: float = pitch.DEFENDER_RADIUS,
) -> float:
    """Unobstructed share of the goal mouth seen from the ball.

    Each non-GK defender strictly between the ball and the goal line casts a
    shadow bounded by the two tangent lines from the ball to its 0.375 m
    circle; shadows are intersected with the goal line, clipped to the mouth,
    and unioned. Ball on/behind the goal line or inside a circle gives 0.
    """
    return _open_goal_kernel(
        ball_x, ball_y, np.asarray(def_x, dtype=np.float64),
        np.asarray(def_y, dtype=np.float64), goal_x, goal_y, radius,
        pitch.GOAL_HALF_WIDTH,
    )


@njit(cache=True)
def _open_goal_kernel(bx, by, dxs, dys, gx, gy, radius, half_w):
    depth = gx - bx
    if depth <= 0.0:
        return 0.0
    lo = np.empty(dxs.shape[0])
    hi = np.empty(dxs.shape[0])
    m = 0
    for i in range(dxs.shape[0]):
        dx = dxs[i] - bx
        dy = dys[i] - by
        if dx <= 0.0:
            continue  # level with or behind the ball: no shadow
        dist = math.sqrt(dx * dx + dy * dy)
        if dist <= radius:
            return 0.0  # ball inside the defender circle
        alpha = math.atan2(dy, dx)
        delta = math.asin(radius / dist)
        a1 = alpha - delta
        a2 = alpha + delta
        # Tangent rays at or beyond +-pi/2 never cross the goal line on the
        # attacking side: the shadow is unbounded toward that flank.
        y1 = by + depth * math.tan(a1) if a1 > -math.pi / 2 else -1e18
        y2 = by + depth * math.tan(a2) if a2 < math.pi / 2 else 1e18
        lo[m] = max(y1 - gy, -half_w)
        hi[m] = min(y2 - gy, half_w)
        if hi[m] > lo[m]:
            m += 1
    if m == 0:
        return 1.0
    # Union of clipped intervals.
    order = np.argsort(lo[:m])
    covered = 0.0
    cur_lo = lo[order[0]]
    cur_hi = hi[order[0]]
    for k in range(1, m):
        l = lo[order[k]]
        h = hi[order[k]]
        if l > cur_hi:
            covered += cur_hi - cur_lo
            cur_lo, cur_hi = l, h
        elif h > cur_hi:
            cur_hi = h
    covered += cur_hi - cur_lo
    frac = 1.0 - covered / (2.0 * half_w)
    if frac < 0.0:
        return 0.0
    return frac


def open_goal(frame: Frame, goal=(pitch.GOAL_X, pitch.GOAL_Y)) -> float:
    defs = [p for p in frame.defenders() if not p.is_goalkeeper]
    return open_goal_fraction(
        frame.ball.x, frame.ball.y,
        np.array([p.x for p in defs]), np.array([p.y for p in defs]),
        goal[0], goal[1],
    )


def goalkeeper_features(frame: Frame, goal=(pitch.GOAL_X, pitch.GOAL_Y)):
    gk = next((p for p in frame.defenders() if p.is_goalkeeper), None)
    if gk is None:
        return pitch.SENTINEL_DIST, pitch.SENTINEL_ANGLE
    gk_r = math.hypot(goal[0] - gk.x, goal[1] - gk.y)
    gk_theta = _bearing(gk.x, gk.y, goal[0], goal[1]) if gk_r > 0 else 0.0
    return gk_r, gk_theta


def neighbor_features(frame: Frame):
    """Nearest-5 defender and attacker (dist, bearing) blocks.

    Defenders exclude the goalkeeper; attackers exclude the single attacker
    nearest the ball (the carrier by construction). Missing slots padded
    with (150 m, 0 rad).
    """
    bx, by = frame.ball.x, frame.ball.y

    def ranked(players):
        return sorted(players, key=lambda p: (math.hypot(p.x - bx, p.y - by), p.player_id))

    defs = ranked([p for p in frame.defenders() if not p.is_goalkeeper])[:5]
    atts = ranked(frame.attackers())[1:6]  # drop the nearest attacker

    def block(players):
        dists, angles = [], []
        for p in players:
            dists.append(math.hypot(p.x - bx, p.y - by))
            angles.append(_bearing(bx, by, p.x, p.y))
        while len(dists) < 5:
            dists.append(pitch.SENTINEL_DIST)
            angles.append(pitch.SENTINEL_ANGLE)
        return angles, dists

    def_ang, def_dist = block(defs)
    off_ang, off_dist = block(atts)
    return def_ang, def_dist, off_ang, off_dist


def compute_feature_vector(window: list[Frame],
                           mid_index: Optional[int] = None) -> FeatureVector:
    """All 27 features for the scored frame of a (up to) 3-frame window."""
    if mid_index is None:
        mid_index = 1 if len(window) >= 3 else 0
    mid = window[mid_index]
    r, theta, z, speed = ball_features(window, mid_index)
    og = open_goal(mid)
    gk_r, gk_theta = goalkeeper_features(mid)
    def_ang, def_dist, off_ang, off_dist = neighbor_features(mid)
    return FeatureVector(tuple(
        [r, theta, z, speed, og, gk_r, gk_theta]
        + def_ang + def_dist + off_ang + off_dist
    ))


def build_feature_matrix(frames: list[Frame]):
    """One FeatureVector per filtered frame, plus a skip log.

    Speed windows use true frame-index adjacency: a filtered neighbor that
    is not the adjacent raw frame is not used.
    """
    vectors: list[FeatureVector] = []
    skipped: list[tuple[int, str]] = []
    by_index = {f.frame_index: i for i, f in enumerate(frames)}
    for i, f in enumerate(frames):
        if f.carrier_id is None:
            skipped.append((f.frame_index, "no carrier annotated"))
            continue
        if len(f.players) != 22:
            skipped.append((f.frame_index, "incomplete frame"))
            continue
        window, mid = [f], 0
        j = by_index.get(f.frame_index - 1)
        k = by_index.get(f.frame_index + 1)
        if j is not None and k is not None:
            window, mid = [frames[j], f, frames[k]], 1
        elif k is not None:
            window, mid = [f, frames[k]], 0
        elif j is not None:
            window, mid = [frames[j], f], 1
        vectors.append(compute_feature_vector(window, mid))
    return vectors, skipped


# ---------------------------------------------------------------------------
# Vectorized extraction on MatchArrays
# ---------------------------------------------------------------------------

def feature_matrix_arrays(m: MatchArrays, sample_pos: np.ndarray) -> np.ndarray:
    """Feature matrix (len(sample_pos), 27) at the given frame positions.

    Equivalent to build_feature_matrix on Frame windows; verified against
    the object path in tests. Every sampled position must have a carrier.
    """
    sample_pos = np.asarray(sample_pos, dtype=np.int64)
    n = len(sample_pos)
    out = np.empty((n, N_FEATURES))
    if n == 0:
        return out

    ball = m.ball
    bx = ball[sample_pos, 0]
    by = ball[sample_pos, 1]
    out[:, 0] = np.hypot(pitch.GOAL_X - bx, pitch.GOAL_Y - by)          # r
    out[:, 1] = np.arctan2(pitch.GOAL_Y - by, pitch.GOAL_X - bx)        # theta
    out[:, 2] = ball[sample_pos, 2]                                     # z

    # Central difference where both raw neighbors exist, one-sided otherwise.
    fidx = m.frame_index
    pos_of = {int(f): i for i, f in enumerate(fidx)}
    speed = np.zeros(n)
    for k, p in enumerate(sample_pos):
        f = int(fidx[p])
        j = pos_of.get(f - 1)
        q = pos_of.get(f + 1)
        if j is not None and q is not None:
            d = ball[q] - ball[j]
            speed[k] = math.sqrt(d @ d) / (2 * pitch.FRAME_DT)
        elif q is not None:
            d = ball[q] - ball[p]
            speed[k] = math.sqrt(d @ d) / pitch.FRAME_DT
        elif j is not None:
            d = ball[p] - ball[j]
            speed[k] = math.sqrt(d @ d) / pitch.FRAME_DT
    out[:, 3] = speed

    roster_team = np.array(m.roster_team, dtype=object)
    gk_mask = m.roster_gk
    pxy = m.player_xy[sample_pos]                      # (n, 22, 2)
    poss = m.poss_team[sample_pos]
    att_mask = roster_team[None, :] == poss[:, None]   # (n, 22)
    def_mask = ~att_mask

    dx = pxy[:, :, 0] - bx[:, None]
    dy = pxy[:, :, 1] - by[:, None]
    dist = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx)

    # openGoal over non-GK defenders
    og_mask = def_mask & ~gk_mask[None, :]
    for k in range(n):
        sel = og_mask[k]
        out[k, 4] = _open_goal_kernel(
            bx[k], by[k], pxy[k, sel, 0].copy(), pxy[k, sel, 1].copy(),
            pitch.GOAL_X, pitch.GOAL_Y, pitch.DEFENDER_RADIUS,
            pitch.GOAL_HALF_WIDTH,
        )

    # goalkeeper of the defending team
    gk_sel = def_mask & gk_mask[None, :]
    gk_r = np.full(n, pitch.SENTINEL_DIST)
    gk_theta = np.full(n, pitch.SENTINEL_ANGLE)
    rows, cols = np.nonzero(gk_sel)
    if len(rows):
        first = np.unique(rows, return_index=True)[1]
        rows, cols = rows[first], cols[first]
        gx = pxy[rows, cols, 0]
        gy = pxy[rows, cols, 1]
        gk_r[rows] = np.hypot(pitch.GOAL_X - gx, pitch.GOAL_Y - gy)
        gk_theta[rows] = np.where(
            gk_r[rows] > 0, np.arctan2(pitch.GOAL_Y - gy, pitch.GOAL_X - gx), 0.0
        )
    out[:, 5] = gk_r
    out[:, 6] = gk_theta

    def topk(mask, k=5):
        d = np.where(mask, dist, np.inf)
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        rows_ = np.arange(n)[:, None]
        dd = d[rows_, order]
        aa = np.where(np.isfinite(dd), ang[rows_, order], pitch.SENTINEL_ANGLE)
        dd = np.where(np.isfinite(dd), dd, pitch.SENTINEL_DIST)
        return aa, dd

    def_ang, def_dist_ = topk(og_mask)
    # attackers minus the one nearest the ball
    att_d = np.where(att_mask, dist, np.inf)
    nearest = np.argmin(att_d, axis=1)
    att_mask2 = att_mask.copy()
    att_mask2[np.arange(n), nearest] = False
    off_ang, off_dist_ = topk(att_mask2)

    out[:, 7:12] = def_ang
    out[:, 12:17] = def_dist_
    out[:, 17:22] = off_ang
    out[:, 22:27] = off_dist_
    return out


def export_feature_matrix(matrix: np.ndarray, path) -> None:
    header = ",".join(FEATURE_NAMES)
    np.savetxt(path, matrix, delimiter=",", header=header, comments="")
