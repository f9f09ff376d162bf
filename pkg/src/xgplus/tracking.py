"""Tracking-stream data model: frames, parsing, possessions, filtering.

The wire format is one text line per frame:

    match_id,frame_index,ball_x,ball_y,ball_z,event,poss_team,carrier_id,
    <22 groups "player_id:team_id:x:y:gk_flag">

All coordinates in meters (3+ fractional digits), LF line endings, UTF-8.
A machine-readable descriptor of this format lives in docs/frame_format.json.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from . import pitch


class FrameEvent(Enum):
    NONE = ""
    SHOT = "Shot"
    GOAL = "Goal"
    POSSESSION_CHANGE = "PossessionChange"


class MalformedRecord(ValueError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class NonMonotonicFrameIndex(ValueError):
    pass


class MissingBall(ValueError):
    pass


@dataclass(frozen=True)
class BallState:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class PlayerState:
    player_id: str
    team_id: str
    x: float
    y: float
    is_goalkeeper: bool


@dataclass(frozen=True)
class Frame:
    match_id: str
    frame_index: int
    ball: BallState
    players: tuple[PlayerState, ...]
    possession_team: Optional[str] = None
    carrier_id: Optional[str] = None
    event: FrameEvent = FrameEvent.NONE

    @property
    def t(self) -> float:
        return self.frame_index / pitch.FPS

    def attackers(self):
        return [p for p in self.players if p.team_id == self.possession_team]

    def defenders(self):
        return [p for p in self.players if p.team_id != self.possession_team]


@dataclass
class Possession:
    match_id: str
    team_id: str
    frame_span: tuple[int, int]  # positions in the source frame list, inclusive
    frames: list = field(repr=False, default_factory=list)

    def __len__(self):
        return len(self.frames)


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def serialize_frame(frame: Frame) -> str:
    head = [
        frame.match_id,
        str(frame.frame_index),
        _fmt(frame.ball.x),
        _fmt(frame.ball.y),
        _fmt(frame.ball.z),
        frame.event.value,
        frame.possession_team or "",
        frame.carrier_id or "",
    ]
    groups = [
        f"{p.player_id}:{p.team_id}:{_fmt(p.x)}:{_fmt(p.y)}:{int(p.is_goalkeeper)}"
        for p in frame.players
    ]
    return ",".join(head + groups)


def serialize_frames(frames: Iterable[Frame]) -> str:
    return "".join(serialize_frame(f) + "\n" for f in frames)


_EVENTS = {e.value: e for e in FrameEvent}
_EVENTS["None"] = FrameEvent.NONE


def _parse_line(line: str, line_no: int, strict: bool) -> Frame:
    parts = line.rstrip("\n").split(",")
    if len(parts) < 8:
        raise MalformedRecord(line_no, f"expected >= 8 fields, got {len(parts)}")
    try:
        frame_index = int(parts[1])
        ball = BallState(float(parts[2]), float(parts[3]), float(parts[4]))
    except ValueError as e:
        raise MalformedRecord(line_no, str(e)) from None
    if parts[5] not in _EVENTS:
        raise MalformedRecord(line_no, f"unknown event {parts[5]!r}")
    players = []
    for g in parts[8:]:
        bits = g.split(":")
        if len(bits) != 5:
            raise MalformedRecord(line_no, f"bad player group {g!r}")
        try:
            players.append(
                PlayerState(bits[0], bits[1], float(bits[2]), float(bits[3]),
                            bits[4] not in ("0", "", "false", "False"))
            )
        except ValueError as e:
            raise MalformedRecord(line_no, str(e)) from None
    if strict and len(players) != 22:
        raise MalformedRecord(line_no, f"expected 22 players, got {len(players)}")
    if ball.z < 0 or abs(ball.y) > pitch.HALF_WIDTH + pitch.POSITION_MARGIN \
            or abs(ball.x) > pitch.HALF_LENGTH + pitch.POSITION_MARGIN:
        raise MalformedRecord(line_no, "ball position out of bounds")
    return Frame(
        match_id=parts[0],
        frame_index=frame_index,
        ball=ball,
        players=tuple(players),
        possession_team=parts[6] or None,
        carrier_id=parts[7] or None,
        event=_EVENTS[parts[5]],
    )


def parse_tracking_file(stream, strict: bool = True) -> list[Frame]:
    """Parse a byte or text stream of frame records into Frames.

    Frames must arrive in strictly ascending frame_index order; gaps are
    allowed. Raises MalformedRecord / NonMonotonicFrameIndex / MissingBall.
    """
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, io.BufferedIOBase) or hasattr(stream, "read") and \
            isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8")

    frames: list[Frame] = []
    last_index: dict[str, int] = {}
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        frame = _parse_line(line, line_no, strict)
        prev = last_index.get(frame.match_id)
        if prev is not None and frame.frame_index <= prev:
            raise NonMonotonicFrameIndex(
                f"line {line_no}: frame_index {frame.frame_index} after {prev}"
            )
        last_index[frame.match_id] = frame.frame_index
        frames.append(frame)
    return frames


def normalize_attacking_direction(frames: list[Frame]) -> list[Frame]:
    """Rotate possessions 180 deg so every possessing team attacks +x.

    A possession run whose net ball x-displacement is negative is assumed
    to attack the -x goal and is rotated (x -> -x, y -> -y). Applying the
    normalization twice equals applying it once.
    """
    out = list(frames)
    for start, end, team in _possession_runs(frames):
        if team is None:
            continue
        dx = frames[end].ball.x - frames[start].ball.x
        if dx < 0:
            for i in range(start, end + 1):
                out[i] = _rotate_frame(out[i])
    return out


def _rotate_frame(f: Frame) -> Frame:
    ball = BallState(-f.ball.x, -f.ball.y, f.ball.z)
    players = tuple(replace(p, x=-p.x, y=-p.y) for p in f.players)
    return replace(f, ball=ball, players=players)


def _possession_runs(frames, gap_tolerance: int = 15):
    """Yield (start, end, team) for maximal runs of identical possession.

    A frame-index discontinuity larger than gap_tolerance breaks the run
    even when the annotated team is unchanged: unobserved time separates
    distinct possessions of the same team.
    """
    runs = []
    i = 0
    n = len(frames)
    while i < n:
        team = frames[i].possession_team
        j = i
        while (j + 1 < n and frames[j + 1].possession_team == team
               and frames[j + 1].frame_index - frames[j].frame_index
               <= gap_tolerance):
            j += 1
        runs.append((i, j, team))
        i = j + 1
    return runs


def segment_possessions(frames: list[Frame], gap_tolerance: int = 15) -> list[Possession]:
    """Split one match's frames into maximal single-team possessions.

    Unannotated runs shorter than gap_tolerance frames are bridged into the
    surrounding possession when the annotated neighbors agree on the team.
    """
    if not frames:
        return []
    runs = _possession_runs(frames, gap_tolerance)

    # Bridge short annotation dropouts between same-team runs.
    merged: list[tuple[int, int, Optional[str]]] = []
    k = 0
    while k < len(runs):
        s, e, team = runs[k]
        if (
            team is None
            and merged
            and k + 1 < len(runs)
            and merged[-1][2] is not None
            and merged[-1][2] == runs[k + 1][2]
            and (e - s + 1) < gap_tolerance
        ):
            ps, _, pteam = merged[-1]
            ns, ne, _ = runs[k + 1]
            merged[-1] = (ps, ne, pteam)
            k += 2
            continue
        merged.append((s, e, team))
        k += 1

    out = []
    for s, e, team in merged:
        if team is None:
            continue
        out.append(
            Possession(
                match_id=frames[s].match_id,
                team_id=team,
                frame_span=(s, e),
                frames=frames[s:e + 1],
            )
        )
    return out


def filter_attacking_third(possession: Possession) -> list[Frame]:
    """Frames with the ball in the final third and a carrier annotated."""
    return [
        f for f in possession.frames
        if f.ball.x >= pitch.ATTACKING_THIRD_X and f.carrier_id is not None
    ]


# ---------------------------------------------------------------------------
# Array-backed match representation (fast path for generated/parsed matches
# with a constant 22-player roster). Vectorized feature extraction and the
# synthetic generator work on this form; converters keep it interchangeable
# with the Frame list API.
# ---------------------------------------------------------------------------

_EVENT_CODES = {
    FrameEvent.NONE: 0,
    FrameEvent.SHOT: 1,
    FrameEvent.GOAL: 2,
    FrameEvent.POSSESSION_CHANGE: 3,
}
_EVENT_FROM_CODE = {v: k for k, v in _EVENT_CODES.items()}


@dataclass
class MatchArrays:
    match_id: str
    frame_index: np.ndarray          # (n,) int64, strictly increasing
    ball: np.ndarray                 # (n, 3) float64
    player_xy: np.ndarray            # (n, 22, 2) float64
    roster_player: list              # 22 player ids
    roster_team: list                # 22 team ids
    roster_gk: np.ndarray            # (22,) bool
    poss_team: np.ndarray            # (n,) object (team id or None)
    carrier: np.ndarray              # (n,) int16 roster index, -1 if none
    event: np.ndarray                # (n,) int8 event code

    def __len__(self):
        return len(self.frame_index)

    def carrier_id(self, i: int) -> Optional[str]:
        c = self.carrier[i]
        return self.roster_player[c] if c >= 0 else None


def frames_to_arrays(frames: list[Frame]) -> MatchArrays:
    if not frames:
        raise ValueError("empty frame list")
    roster = frames[0].players
    ids = [p.player_id for p in roster]
    idx_of = {pid: i for i, pid in enumerate(ids)}
    n = len(frames)
    ball = np.empty((n, 3))
    pxy = np.empty((n, 22, 2))
    poss = np.empty(n, dtype=object)
    carrier = np.full(n, -1, dtype=np.int16)
    event = np.zeros(n, dtype=np.int8)
    fidx = np.empty(n, dtype=np.int64)
    for i, f in enumerate(frames):
        if len(f.players) != 22 or [p.player_id for p in f.players] != ids:
            raise ValueError("frames_to_arrays requires a constant 22-player roster")
        fidx[i] = f.frame_index
        ball[i] = (f.ball.x, f.ball.y, f.ball.z)
        for j, p in enumerate(f.players):
            pxy[i, j] = (p.x, p.y)
        poss[i] = f.possession_team
        if f.carrier_id is not None:
            carrier[i] = idx_of[f.carrier_id]
        event[i] = _EVENT_CODES[f.event]
    return MatchArrays(
        match_id=frames[0].match_id,
        frame_index=fidx,
        ball=ball,
        player_xy=pxy,
        roster_player=ids,
        roster_team=[p.team_id for p in roster],
        roster_gk=np.array([p.is_goalkeeper for p in roster]),
        poss_team=poss,
        carrier=carrier,
        event=event,
    )


def arrays_to_frames(m: MatchArrays) -> list[Frame]:
    out = []
    for i in range(len(m)):
        players = tuple(
            PlayerState(m.roster_player[j], m.roster_team[j],
                        float(m.player_xy[i, j, 0]), float(m.player_xy[i, j, 1]),
                        bool(m.roster_gk[j]))
            for j in range(22)
        )
        out.append(Frame(
            match_id=m.match_id,
            frame_index=int(m.frame_index[i]),
            ball=BallState(*map(float, m.ball[i])),
            players=players,
            possession_team=m.poss_team[i],
            carrier_id=m.carrier_id(i),
            event=_EVENT_FROM_CODE[int(m.event[i])],
        ))
    return out
