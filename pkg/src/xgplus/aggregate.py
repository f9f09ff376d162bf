"""Per-second combination of shot and goal probabilities and the possession
and match aggregation rules (at-least-one, max, sum-of-shots)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import pitch
from .features import feature_matrix_arrays
from .labels import _array_runs
from .tracking import MatchArrays


class AggRule(Enum):
    AT_LEAST_ONE = "AtLeastOne"
    MAX = "Max"
    SUM_OF_SHOTS = "SumOfShots"


# The seven (metric, aggregation) combinations modeled for team scoring.
METRIC_MENU = [
    ("xG", AggRule.AT_LEAST_ONE),
    ("xG", AggRule.MAX),
    ("xG", AggRule.SUM_OF_SHOTS),
    ("xS", AggRule.AT_LEAST_ONE),
    ("xS", AggRule.MAX),
    ("xG+", AggRule.AT_LEAST_ONE),
    ("xG+", AggRule.MAX),
]


class RuleMetricMismatch(ValueError):
    pass


def frame_xgplus(xs: float, xg: float) -> float:
    """Probability of scoring in the next second: P(shot) x P(goal | shot)."""
    return xs * xg


def aggregate_possession(values, rule: AggRule, metric: str = "xG+",
                         shot_xg=None) -> float:
    """Collapse a possession's per-second series to a single number.

    AtLeastOne: 1 - prod(1 - v_t). Max: max(v_t). SumOfShots: sum of the
    xG of the possession's actual shots (xG metric only).
    """
    if rule is AggRule.SUM_OF_SHOTS:
        if metric != "xG":
            raise RuleMetricMismatch("SumOfShots is defined for the xG metric only")
        return float(np.sum(shot_xg)) if shot_xg is not None and len(shot_xg) else 0.0
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    if rule is AggRule.AT_LEAST_ONE:
        return float(1.0 - np.prod(1.0 - values))
    if rule is AggRule.MAX:
        return float(values.max())
    raise ValueError(rule)


@dataclass
class PossessionScore:
    possession_id: str
    team: str
    xs: np.ndarray        # per scored second
    xg: np.ndarray
    xgplus: np.ndarray
    shot_xg: np.ndarray   # xG at the possession's actual shot frames
    scored_goal: bool

    @property
    def at_least_one(self) -> float:
        return aggregate_possession(self.xgplus, AggRule.AT_LEAST_ONE)

    @property
    def max_value(self) -> float:
        return aggregate_possession(self.xgplus, AggRule.MAX)

    @property
    def shot_xg_sum(self) -> float:
        return aggregate_possession(None, AggRule.SUM_OF_SHOTS, "xG", self.shot_xg)

    def series(self, metric: str) -> np.ndarray:
        return {"xS": self.xs, "xG": self.xg, "xG+": self.xgplus}[metric]


@dataclass
class MatchMetricRow:
    season: int
    matchday: int
    team: str
    opponent: str
    home: bool
    metric: str
    agg: AggRule
    value: float
    goals_scored: int


def score_possessions_arrays(m: MatchArrays, xs_model, xg_model,
                             stride: int = 30) -> list[PossessionScore]:
    """Model-scored per-second series for each possession of one match."""
    out = []
    fidx = m.frame_index
    in_third = (m.ball[:, 0] >= pitch.ATTACKING_THIRD_X) & (m.carrier >= 0)
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
        shots = sel[m.event[sel] == 1]
        Xp = feature_matrix_arrays(m, np.concatenate([sample, shots]))
        xs_pred = xs_model.predict(Xp[:len(sample)])
        xg_pred = xg_model.predict(Xp[:len(sample)])
        shot_xg = xg_model.predict(Xp[len(sample):]) if len(shots) else np.empty(0)
        out.append(PossessionScore(
            possession_id=f"{m.match_id}:{fidx[s]}",
            team=team,
            xs=xs_pred,
            xg=xg_pred,
            xgplus=xs_pred * xg_pred,
            shot_xg=shot_xg,
            scored_goal=bool((m.event[s:e + 1] == 2).any()),
        ))
    return out


def score_possessions_oracle(match) -> list[PossessionScore]:
    """Per-second series from the generator's exact probabilities.

    Same aggregation path as model scoring, with the true (p_shot, p_goal)
    substituted for model predictions; used to isolate downstream evaluation
    from model estimation error.
    """
    out = []
    for p in match.possessions:
        xs = p.p_shot
        xg = p.p_goal
        out.append(PossessionScore(
            possession_id=f"{match.match_id}:{p.start_frame}",
            team=f"T{p.team:02d}",
            xs=xs,
            xg=xg,
            xgplus=xs * xg,
            shot_xg=np.array([p.p_goal[a] for a in p.shot_anchors]),
            scored_goal=p.goal_anchor is not None,
        ))
    return out


def match_metric_rows(season: int, matchday: int, home_team: str, away_team: str,
                      scores: list[PossessionScore],
                      goals: dict[str, int]) -> list[MatchMetricRow]:
    """All 7 Table-2 style metric rows for each side of one match."""
    rows = []
    for team, opp, is_home in ((home_team, away_team, True),
                               (away_team, home_team, False)):
        mine = [s for s in scores if s.team == team]
        for metric, rule in METRIC_MENU:
            if rule is AggRule.SUM_OF_SHOTS:
                value = sum(s.shot_xg_sum for s in mine)
            else:
                value = sum(
                    aggregate_possession(s.series(metric), rule, metric)
                    for s in mine
                )
            rows.append(MatchMetricRow(
                season=season, matchday=matchday, team=team, opponent=opp,
                home=is_home, metric=metric, agg=rule, value=value,
                goals_scored=goals.get(team, 0),
            ))
    return rows


def score_match(m: MatchArrays, xs_model, xg_model, season: int, matchday: int,
                home_team: str, away_team: str, stride: int = 30) -> list[MatchMetricRow]:
    scores = score_possessions_arrays(m, xs_model, xg_model, stride)
    goals = {home_team: 0, away_team: 0}
    for s in scores:
        if s.scored_goal:
            goals[s.team] += 1
    return match_metric_rows(season, matchday, home_team, away_team, scores, goals)


def rows_to_csv(rows: list[MatchMetricRow], fh) -> None:
    fh.write("season,matchday,team,opp,home,metric,agg,value,goals\n")
    for r in rows:
        fh.write(f"{r.season},{r.matchday},{r.team},{r.opponent},"
                 f"{int(r.home)},{r.metric},{r.agg.value},{r.value:.9f},"
                 f"{r.goals_scored}\n")
