"""Supervised dataset construction for the two models.

xS samples: one per stride (default 30 frames = 1 s) over attacking-third
possession frames, labeled 1 when the possessing team shoots within the
next second. xG samples: one per shot frame, labeled by the shot's
resolution (goal or not).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .features import FeatureVector, build_feature_matrix, \
    compute_feature_vector, feature_matrix_arrays
from .tracking import Frame, FrameEvent, MatchArrays, Possession, \
    filter_attacking_third, segment_possessions
from . import pitch

log = logging.getLogger(__name__)

WINDOW_FRAMES = 30  # 1-second shot horizon


class SampleKind(Enum):
    SHOT_WITHIN_SECOND = "ShotWithinSecond"
    GOAL_GIVEN_SHOT = "GoalGivenShot"


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    y: int
    kind: SampleKind
    match_id: str
    frame_index: int
    possession_id: str
    carrier_player_id: Optional[str]


def _possession_id(frames: list[Frame]) -> str:
    return f"{frames[0].match_id}:{frames[0].frame_index}"


def label_xs(frames: list[Frame], stride: int = 30) -> list[LabeledSample]:
    """Stride-sampled shot-within-next-second labels on possession frames.

    The window is (t, t+30] in frame indices, truncated at possession end.
    Input frames are assumed attacking-third filtered and from one
    possession of a single team.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not frames:
        return []
    pid = _possession_id(frames)
    team = frames[0].possession_team
    shot_frames = np.array(
        [f.frame_index for f in frames
         if f.event is FrameEvent.SHOT and f.possession_team == team],
        dtype=np.int64,
    )
    vectors, _ = build_feature_matrix(frames)
    # build_feature_matrix can skip rows; map back by frame index
    vec_by_index = {}
    vi = 0
    skipped_idx = set()
    for f in frames:
        if f.carrier_id is None or len(f.players) != 22:
            skipped_idx.add(f.frame_index)
            continue
        vec_by_index[f.frame_index] = vectors[vi]
        vi += 1

    out = []
    next_sample = frames[0].frame_index
    for f in frames:
        if f.frame_index < next_sample:
            continue
        next_sample = f.frame_index + stride
        if f.frame_index in skipped_idx:
            continue
        y = int(np.any((shot_frames > f.frame_index)
                       & (shot_frames <= f.frame_index + WINDOW_FRAMES)))
        out.append(LabeledSample(
            features=vec_by_index[f.frame_index],
            y=y,
            kind=SampleKind.SHOT_WITHIN_SECOND,
            match_id=f.match_id,
            frame_index=f.frame_index,
            possession_id=pid,
            carrier_player_id=f.carrier_id,
        ))
    return out


def label_xg(frames: list[Frame]) -> list[LabeledSample]:
    """One sample per Shot frame; y = 1 iff the shot resolves as a goal.

    A shot's resolution is the next Goal / Shot / possession-end event;
    a Goal before any further shot marks y = 1. Shots at the very end of
    the stream with no resolution are excluded and logged.
    """
    if not frames:
        return []
    pid = _possession_id(frames)
    events = [(i, f) for i, f in enumerate(frames)
              if f.event in (FrameEvent.SHOT, FrameEvent.GOAL,
                             FrameEvent.POSSESSION_CHANGE)]
    out = []
    for n, (i, f) in enumerate(events):
        if f.event is not FrameEvent.SHOT:
            continue
        resolution = None
        for _, g in events[n + 1:]:
            resolution = g.event
            break
        if resolution is None and i == len(frames) - 1:
            log.warning("unresolved shot at %s:%d excluded", f.match_id, f.frame_index)
            continue
        y = int(resolution is FrameEvent.GOAL)
        if f.carrier_id is None or len(f.players) != 22:
            log.warning("shot frame %s:%d skipped: incomplete", f.match_id,
                        f.frame_index)
            continue
        window = [f]
        if i > 0 and frames[i - 1].frame_index == f.frame_index - 1:
            window.insert(0, frames[i - 1])
        if i + 1 < len(frames) and frames[i + 1].frame_index == f.frame_index + 1:
            window.append(frames[i + 1])
        vec = compute_feature_vector(window, window.index(f))
        out.append(LabeledSample(
            features=vec,
            y=y,
            kind=SampleKind.GOAL_GIVEN_SHOT,
            match_id=f.match_id,
            frame_index=f.frame_index,
            possession_id=pid,
            carrier_player_id=f.carrier_id,
        ))
    return out


def build_labeled_datasets(frames: list[Frame], stride: int = 30,
                           gap_tolerance: int = 15):
    """Full object-path pipeline: segmentation, filtering, both label sets."""
    xs, xg = [], []
    for poss in segment_possessions(frames, gap_tolerance):
        filtered = filter_attacking_third(poss)
        if not filtered:
            continue
        xs.extend(label_xs(filtered, stride))
        xg.extend(label_xg(filtered))
    return xs, xg


# ---------------------------------------------------------------------------
# Array fast path
# ---------------------------------------------------------------------------

@dataclass
class DatasetArrays:
    X: np.ndarray               # (n, 27)
    y: np.ndarray               # (n,) int8
    match_id: np.ndarray        # (n,) object
    frame_index: np.ndarray     # (n,) int64
    possession_id: np.ndarray   # (n,) object
    carrier_id: np.ndarray      # (n,) object
    season: np.ndarray = None   # (n,) int16, filled by callers that know it

    def __len__(self):
        return len(self.y)


def _array_runs(poss_team: np.ndarray, frame_index: np.ndarray = None,
                gap_tolerance: int = 15):
    """(start, end, team) runs; frame-index gaps > gap_tolerance split a run
    even within one team (mirrors tracking._possession_runs)."""
    runs = []
    i, n = 0, len(poss_team)
    while i < n:
        team = poss_team[i]
        j = i
        while (j + 1 < n and poss_team[j + 1] == team
               and (frame_index is None
                    or frame_index[j + 1] - frame_index[j] <= gap_tolerance)):
            j += 1
        runs.append((i, j, team))
        i = j + 1
    return runs


def datasets_from_arrays(m: MatchArrays, stride: int = 30):
    """(xs, xg) DatasetArrays for one match; mirrors the object path."""
    n = len(m)
    xs_pos, xs_y, xs_pid, xs_cid = [], [], [], []
    xg_pos, xg_y, xg_pid, xg_cid = [], [], [], []
    fidx = m.frame_index
    in_third = (m.ball[:, 0] >= pitch.ATTACKING_THIRD_X) & (m.carrier >= 0)

    for s, e, team in _array_runs(m.poss_team, fidx):
        if team is None:
            continue
        pid = f"{m.match_id}:{fidx[s]}"
        sel = np.arange(s, e + 1)[in_third[s:e + 1]]
        if len(sel) == 0:
            continue
        shot_f = fidx[sel][m.event[sel] == 1]
        goal_f = fidx[sel][m.event[sel] == 2]

        # stride sampling by frame index from the first filtered frame
        sample = []
        nxt = fidx[sel[0]]
        for p in sel:
            if fidx[p] >= nxt:
                sample.append(p)
                nxt = fidx[p] + stride
        sample = np.array(sample, dtype=np.int64)
        t = fidx[sample]
        y = ((shot_f[None, :] > t[:, None])
             & (shot_f[None, :] <= t[:, None] + WINDOW_FRAMES)).any(axis=1) \
            if len(shot_f) else np.zeros(len(sample), bool)
        xs_pos.append(sample)
        xs_y.append(y.astype(np.int8))
        xs_pid.extend([pid] * len(sample))
        xs_cid.extend([m.carrier_id(int(p)) for p in sample])

        # xG: shot resolution within the possession
        shots = sel[m.event[sel] == 1]
        for p in shots:
            later_shots = shot_f[shot_f > fidx[p]]
            next_shot = later_shots.min() if len(later_shots) else np.iinfo(np.int64).max
            goals = goal_f[(goal_f >= fidx[p]) & (goal_f < next_shot)]
            xg_pos.append(int(p))
            xg_y.append(1 if len(goals) else 0)
            xg_pid.append(pid)
            xg_cid.append(m.carrier_id(int(p)))

    def pack(pos, ys, pids, cids):
        pos = np.asarray(pos, dtype=np.int64)
        return DatasetArrays(
            X=feature_matrix_arrays(m, pos),
            y=np.asarray(ys, dtype=np.int8),
            match_id=np.array([m.match_id] * len(pos), dtype=object),
            frame_index=fidx[pos] if len(pos) else np.empty(0, np.int64),
            possession_id=np.array(pids, dtype=object),
            carrier_id=np.array(cids, dtype=object),
        )

    empty = DatasetArrays(np.empty((0, 27)), np.empty(0, np.int8),
                          np.empty(0, object), np.empty(0, np.int64),
                          np.empty(0, object), np.empty(0, object))
    xs = pack(np.concatenate(xs_pos), np.concatenate(xs_y), xs_pid, xs_cid) \
        if xs_pos else empty
    xg = pack(xg_pos, xg_y, xg_pid, xg_cid) if xg_pos else empty
    return xs, xg


def concat_datasets(parts: list[DatasetArrays]) -> DatasetArrays:
    parts = [p for p in parts if len(p)]
    if not parts:
        return DatasetArrays(np.empty((0, 27)), np.empty(0, np.int8),
                             np.empty(0, object), np.empty(0, np.int64),
                             np.empty(0, object), np.empty(0, object))
    season = None
    if all(p.season is not None for p in parts):
        season = np.concatenate([p.season for p in parts])
    return DatasetArrays(
        X=np.concatenate([p.X for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        match_id=np.concatenate([p.match_id for p in parts]),
        frame_index=np.concatenate([p.frame_index for p in parts]),
        possession_id=np.concatenate([p.possession_id for p in parts]),
        carrier_id=np.concatenate([p.carrier_id for p in parts]),
        season=season,
    )
