"""Player-season totals, over-expected quantities, rankings, and
year-to-year stability."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import pitch
from .features import feature_matrix_arrays
from .labels import _array_runs
from .tracking import MatchArrays

log = logging.getLogger(__name__)


class InsufficientPairs(ValueError):
    pass


@dataclass
class AttributedSecond:
    season: int
    match_id: str
    player_id: str
    xs: float
    xgplus: float


@dataclass
class ShotRecord:
    season: int
    match_id: str
    player_id: str
    xg: float
    goal: bool


def match_attributions(m: MatchArrays, xs_model, xg_model, season: int,
                       stride: int = 30):
    """Scored seconds attributed to the carrier and shots to the shooter.

    Returns (seconds, shots, n_skipped); rows without an annotated carrier
    are skipped and logged.
    """
    fidx = m.frame_index
    in_third = m.ball[:, 0] >= pitch.ATTACKING_THIRD_X
    n_skipped = int(np.sum(in_third & (m.poss_team != None) & (m.carrier < 0)))  # noqa: E711
    if n_skipped:
        log.warning("%s: %d attacking-third frames lack a carrier; skipped",
                    m.match_id, n_skipped)
    in_third &= m.carrier >= 0
    seconds: list[AttributedSecond] = []
    shots: list[ShotRecord] = []
    for s, e, team in _array_runs(m.poss_team, fidx):
        if team is None:
            continue
        sel = np.arange(s, e + 1)[in_third[s:e + 1]]
        if len(sel) == 0:
            continue
        sample = []
        nxt = fidx[sel[0]]
        for p in sel:
            if fidx[p] >= nxt:
                sample.append(p)
                nxt = fidx[p] + stride
        sample = np.asarray(sample, dtype=np.int64)
        shot_pos = sel[m.event[sel] == 1]
        Xp = feature_matrix_arrays(m, np.concatenate([sample, shot_pos]))
        xs_pred = xs_model.predict(Xp[:len(sample)])
        xg_pred = xg_model.predict(Xp)
        for j, p in enumerate(sample):
            seconds.append(AttributedSecond(
                season=season, match_id=m.match_id,
                player_id=m.carrier_id(p),
                xs=float(xs_pred[j]), xgplus=float(xs_pred[j] * xg_pred[j])))
        for j, p in enumerate(shot_pos):
            # a shot scores iff a Goal event lands before the next shot or
            # the end of the possession
            nxt_shot = shot_pos[shot_pos > p]
            stop = nxt_shot[0] if len(nxt_shot) else e + 1
            goal = bool((m.event[p:stop + 1] == 2).any()) if stop <= e \
                else bool((m.event[p:e + 1] == 2).any())
            shots.append(ShotRecord(
                season=season, match_id=m.match_id,
                player_id=m.carrier_id(p),
                xg=float(xg_pred[len(sample) + j]), goal=goal))
    return seconds, shots, n_skipped


@dataclass
class PlayerSeasonLine:
    player_id: str
    season: int
    matches_with_chance: int
    shots: int
    goals: int
    xs_total: float
    xg_total: float
    xgplus_total: float

    @property
    def soe(self) -> float:
        return self.shots - self.xs_total

    @property
    def goe_xg(self) -> float:
        return self.goals - self.xg_total

    @property
    def goe_xgplus(self) -> float:
        return self.goals - self.xgplus_total

    @property
    def soe_pm(self) -> float:
        return self.soe / self.matches_with_chance

    @property
    def goe_xg_pm(self) -> float:
        return self.goe_xg / self.matches_with_chance

    @property
    def goe_xgplus_pm(self) -> float:
        return self.goe_xgplus / self.matches_with_chance


# quantity name -> accessor, for ranking / stability / exports
QUANTITIES = {
    "SOE": lambda l: l.soe,
    "GOE_xG": lambda l: l.goe_xg,
    "GOE_xG+": lambda l: l.goe_xgplus,
    "SOE_pm": lambda l: l.soe_pm,
    "GOE_xG_pm": lambda l: l.goe_xg_pm,
    "GOE_xG+_pm": lambda l: l.goe_xgplus_pm,
    "shots": lambda l: l.shots,
    "goals": lambda l: l.goals,
    "xS": lambda l: l.xs_total,
    "xG": lambda l: l.xg_total,
    "xG+": lambda l: l.xgplus_total,
}


def attribute_and_total(seconds: list[AttributedSecond],
                        shots: list[ShotRecord]) -> list[PlayerSeasonLine]:
    """Sum attributed quantities into one line per (player, season)."""
    acc: dict[tuple, dict] = {}

    def slot(player, season):
        key = (player, season)
        if key not in acc:
            acc[key] = {"matches": set(), "shots": 0, "goals": 0,
                        "xs": 0.0, "xg": 0.0, "xgp": 0.0}
        return acc[key]

    for rec in seconds:
        d = slot(rec.player_id, rec.season)
        d["matches"].add(rec.match_id)
        d["xs"] += rec.xs
        d["xgp"] += rec.xgplus
    for rec in shots:
        d = slot(rec.player_id, rec.season)
        d["matches"].add(rec.match_id)
        d["shots"] += 1
        d["goals"] += int(rec.goal)
        d["xg"] += rec.xg

    lines = []
    for (player, season), d in sorted(acc.items()):
        lines.append(PlayerSeasonLine(
            player_id=player, season=season,
            matches_with_chance=len(d["matches"]),
            shots=d["shots"], goals=d["goals"],
            xs_total=d["xs"], xg_total=d["xg"], xgplus_total=d["xgp"]))
    return lines


def rank_players(lines: list[PlayerSeasonLine], quantity: str,
                 direction: str = "desc", min_matches: int = 10,
                 top_n: int = None) -> list[PlayerSeasonLine]:
    """Filter, sort by the named quantity, deterministic player_id tie-break."""
    f = QUANTITIES[quantity]
    eligible = [l for l in lines if l.matches_with_chance >= min_matches]
    sign = -1.0 if direction == "desc" else 1.0
    ranked = sorted(eligible, key=lambda l: (sign * f(l), l.player_id, l.season))
    return ranked[:top_n] if top_n is not None else ranked


def stability(lines: list[PlayerSeasonLine], quantity: str,
              min_matches: int = 10) -> float:
    """Pearson r between consecutive-season values, pooled across seasons."""
    f = QUANTITIES[quantity]
    by_key = {(l.player_id, l.season): l for l in lines
              if l.matches_with_chance >= min_matches}
    xs, ys = [], []
    for (player, season), line in sorted(by_key.items()):
        nxt = by_key.get((player, season + 1))
        if nxt is not None:
            xs.append(f(line))
            ys.append(f(nxt))
    if len(xs) < 3:
        raise InsufficientPairs(
            f"only {len(xs)} consecutive-season pairs for {quantity}")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    x -= x.mean()
    y -= y.mean()
    denom = np.sqrt((x @ x) * (y @ y))
    if denom == 0:
        raise InsufficientPairs("zero variance in one season vector")
    return float((x @ y) / denom)


def lines_to_csv(lines: list[PlayerSeasonLine], fh) -> None:
    fh.write("player,season,matches,shots,goals,xS,xG,xGplus,"
             "SOE,GOE_xG,GOE_xGplus,SOE_pm,GOE_xG_pm,GOE_xGplus_pm\n")
    for l in lines:
        fh.write(f"{l.player_id},{l.season},{l.matches_with_chance},"
                 f"{l.shots},{l.goals},{l.xs_total:.6f},{l.xg_total:.6f},"
                 f"{l.xgplus_total:.6f},{l.soe:.6f},{l.goe_xg:.6f},"
                 f"{l.goe_xgplus:.6f},{l.soe_pm:.6f},{l.goe_xg_pm:.6f},"
                 f"{l.goe_xgplus_pm:.6f}\n")
