"""Independent reference implementations used only by the test suite.

These deliberately avoid the library's own algorithms: geometry by ray
casting, labels by brute-force window scans, statistics by naive summation.
"""

from __future__ import annotations

import math

import numpy as np

GOAL_X = 52.5
GOAL_HALF_W = 3.66
DEF_RADIUS = 0.375


def _segment_hits_circle(px, py, qx, qy, cx, cy, r) -> bool:
    """Does segment p->q intersect the circle at c with radius r?"""
    dx, dy = qx - px, qy - py
    fx, fy = px - cx, py - cy
    a = dx * dx + dy * dy
    if a == 0:
        return fx * fx + fy * fy <= r * r
    t = -(fx * dx + fy * dy) / a
    t = min(1.0, max(0.0, t))
    nx, ny = px + t * dx - cx, py + t * dy - cy
    return nx * nx + ny * ny <= r * r


def open_goal_rays(ball_x, ball_y, defenders, n_rays: int = 100_000) -> float:
    """Monte Carlo openGoal: fraction of goal-mouth targets with a clear ray.

    Targets are evenly spaced on the goal line; a target is blocked when the
    ball-to-target segment intersects any defender circle.
    """
    ys = np.linspace(-GOAL_HALF_W, GOAL_HALF_W, n_rays)
    if ball_x >= GOAL_X:
        return 0.0
    clear = 0
    for ty in ys:
        blocked = False
        for (dx, dy) in defenders:
            if dx <= ball_x:
                continue
            if _segment_hits_circle(ball_x, ball_y, GOAL_X, ty, dx, dy,
                                    DEF_RADIUS):
                blocked = True
                break
        if not blocked:
            clear += 1
    return clear / n_rays


def open_goal_rays_fast(ball_x, ball_y, defenders, n_rays: int = 100_000) -> float:
    """Vectorized version of open_goal_rays with identical semantics."""
    if ball_x >= GOAL_X:
        return 0.0
    ty = np.linspace(-GOAL_HALF_W, GOAL_HALF_W, n_rays)
    seg_dx = GOAL_X - ball_x          # scalar
    seg_dy = ty - ball_y              # (n_rays,)
    a = seg_dx * seg_dx + seg_dy * seg_dy
    blocked = np.zeros(n_rays, dtype=bool)
    for (cx, cy) in defenders:
        if cx <= ball_x:
            continue
        fx = ball_x - cx
        fy = ball_y - cy
        t = np.clip(-(fx * seg_dx + fy * seg_dy) / a, 0.0, 1.0)
        nx = ball_x + t * seg_dx - cx
        ny = ball_y + t * seg_dy - cy
        blocked |= nx * nx + ny * ny <= DEF_RADIUS * DEF_RADIUS
    return float(np.mean(~blocked))


def shot_within_window_labels(sample_frames, shot_frames, window: int = 30):
    """Brute-force xS labels: shot strictly after t, at most window later."""
    out = []
    for t in sample_frames:
        out.append(int(any(t < s <= t + window for s in shot_frames)))
    return out


def naive_log_loss(p, y):
    total = 0.0
    for pi, yi in zip(p, y):
        pi = min(max(pi, 1e-7), 1 - 1e-7)
        total += -(yi * math.log(pi) + (1 - yi) * math.log(1 - pi))
    return total / len(y)


def naive_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def percentile_by_sort(values, q: float) -> float:
    """Linear-interpolation percentile via an explicit sort."""
    v = sorted(values)
    n = len(v)
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = int(math.ceil(pos))
    frac = pos - lo
    return v[lo] * (1 - frac) + v[hi] * frac


def binomial_tail_bruteforce(k: int, n: int, p: float = 0.5) -> float:
    """Exact tail from integer binomial coefficients (small n only)."""
    total = 0.0
    for i in range(k, n + 1):
        total += math.comb(n, i) * p ** i * (1 - p) ** (n - i)
    return total
