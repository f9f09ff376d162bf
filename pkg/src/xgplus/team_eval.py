"""Two-stage Poisson team evaluation.

Stage 1 regresses a possession metric on grouped season / season:team /
season:opponent intercepts plus a fixed home effect (penalized Poisson GLM,
ridge as a Gaussian-prior stand-in for random intercepts). Stage 2 regresses
actual goals on the stage-1 ratings. Evaluation is rolling matchday CV, an
exact binomial matchday-win test, and a subsampling robustness study.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .aggregate import AggRule, MatchMetricRow

PENALTY_GRID = (0.1, 1.0, 10.0)


class NonConvergence(RuntimeError):
    pass


class EmptyGroup(ValueError):
    pass


# ---------------------------------------------------------------------------
# Penalized Poisson IRLS
# ---------------------------------------------------------------------------

def poisson_irls(X: np.ndarray, y: np.ndarray, penalty: np.ndarray,
                 tol: float = 1e-8, max_iter: int = 200):
    """Minimize sum(mu - y*eta) + 0.5*penalty|beta|^2 with log link.

    Newton steps with step halving; the penalized objective decreases
    monotonically. Returns (beta, cov) where cov is the inverse of the
    penalized Fisher information at the optimum.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    beta = np.zeros(k)
    # start the unpenalized intercept at the log mean rate
    if penalty[0] == 0:
        beta[0] = np.log(max(y.mean(), 1e-8))

    def objective(b):
        eta = X @ b
        return float(np.sum(np.exp(eta) - y * eta) + 0.5 * np.sum(penalty * b * b))

    prev = objective(beta)
    for _ in range(max_iter):
        eta = X @ beta
        mu = np.exp(np.clip(eta, -30, 30))
        g = X.T @ (mu - y) + penalty * beta
        if np.max(np.abs(g)) < tol:
            H = (X * mu[:, None]).T @ X
            H[np.diag_indices_from(H)] += penalty + 1e-12
            return beta, np.linalg.inv(H)
        H = (X * mu[:, None]).T @ X
        H[np.diag_indices_from(H)] += penalty + 1e-12
        step = np.linalg.solve(H, g)
        t = 1.0
        for _ in range(50):
            cand = beta - t * step
            val = objective(cand)
            if val <= prev + 1e-12:
                beta, prev = cand, val
                break
            t *= 0.5
        else:
            raise NonConvergence("step halving exhausted")
    raise NonConvergence(f"no convergence in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Stage 1: metric ratings
# ---------------------------------------------------------------------------

@dataclass
class RatingSet:
    metric: str
    agg: AggRule
    intercept: float
    home_coef: float
    home_se: float
    season_effect: dict          # season -> float
    attack: dict                 # (season, team) -> float
    defense: dict                # (season, opponent) -> float
    penalties: dict              # grouping -> lambda used

    def log_rating(self, season, team, opp, home) -> float:
        return (self.intercept
                + self.home_coef * home
                + self.season_effect.get(season, 0.0)
                + self.attack.get((season, team), 0.0)
                + self.defense.get((season, opp), 0.0))

    def predict(self, season, team, opp, home) -> float:
        return float(np.exp(self.log_rating(season, team, opp, home)))


def _stage1_design(rows: list[MatchMetricRow]):
    seasons = sorted({r.season for r in rows})
    teams = sorted({(r.season, r.team) for r in rows})
    opps = sorted({(r.season, r.opponent) for r in rows})
    s_ix = {s: i for i, s in enumerate(seasons)}
    t_ix = {t: i for i, t in enumerate(teams)}
    o_ix = {o: i for i, o in enumerate(opps)}
    n = len(rows)
    k = 2 + len(seasons) + len(teams) + len(opps)
    X = np.zeros((n, k))
    y = np.empty(n)
    X[:, 0] = 1.0
    base_s = 2
    base_t = base_s + len(seasons)
    base_o = base_t + len(teams)
    for i, r in enumerate(rows):
        X[i, 1] = 1.0 if r.home else 0.0
        X[i, base_s + s_ix[r.season]] = 1.0
        X[i, base_t + t_ix[(r.season, r.team)]] = 1.0
        X[i, base_o + o_ix[(r.season, r.opponent)]] = 1.0
        y[i] = r.value
    return X, y, seasons, teams, opps


def fit_stage1(rows: list[MatchMetricRow], penalties: dict = None,
               tol: float = 1e-8) -> RatingSet:
    """Poisson log-link regression of metric value on grouped intercepts.

    penalties: {"season": l, "team": l, "opp": l}; the global intercept and
    the home effect are unpenalized.
    """
    if not rows:
        raise EmptyGroup("no rows")
    if len({r.team for r in rows}) < 2:
        raise EmptyGroup("training rows span fewer than 2 teams")
    penalties = penalties or {"season": 1.0, "team": 1.0, "opp": 1.0}
    X, y, seasons, teams, opps = _stage1_design(rows)
    pen = np.zeros(X.shape[1])
    pen[2:2 + len(seasons)] = penalties["season"]
    pen[2 + len(seasons):2 + len(seasons) + len(teams)] = penalties["team"]
    pen[2 + len(seasons) + len(teams):] = penalties["opp"]
    beta, cov = poisson_irls(X, y, pen, tol=tol)
    base_t = 2 + len(seasons)
    base_o = base_t + len(teams)
    return RatingSet(
        metric=rows[0].metric,
        agg=rows[0].agg,
        intercept=float(beta[0]),
        home_coef=float(beta[1]),
        home_se=float(np.sqrt(cov[1, 1])),
        season_effect={s: float(beta[2 + i]) for i, s in enumerate(seasons)},
        attack={t: float(beta[base_t + i]) for i, t in enumerate(teams)},
        defense={o: float(beta[base_o + i]) for i, o in enumerate(opps)},
        penalties=dict(penalties),
    )


def select_penalties(rows: list[MatchMetricRow], grid=PENALTY_GRID,
                     k: int = 3, seed: int = 0) -> dict:
    """Pick per-grouping ridge penalties by matchday-grouped k-fold CV.

    Joint grid search; scored by held-out Poisson deviance of stage 1.
    """
    mds = sorted({(r.season, r.matchday) for r in rows})
    rng = np.random.default_rng(seed)
    order = np.array(mds, dtype=object)
    rng.shuffle(order)
    fold_of = {tuple(md): i % k for i, md in enumerate(order)}
    best = None
    for ls in grid:
        for lt in grid:
            for lo in grid:
                pen = {"season": ls, "team": lt, "opp": lo}
                dev = 0.0
                for f in range(k):
                    train = [r for r in rows
                             if fold_of[(r.season, r.matchday)] != f]
                    test = [r for r in rows
                            if fold_of[(r.season, r.matchday)] == f]
                    rs = fit_stage1(train, pen)
                    for r in test:
                        mu = rs.predict(r.season, r.team, r.opponent, r.home)
                        dev += mu - r.value * np.log(mu)
                if best is None or dev < best[0]:
                    best = (dev, pen)
    return best[1]


# ---------------------------------------------------------------------------
# Stage 2: goals on ratings
# ---------------------------------------------------------------------------

@dataclass
class GoalsModel:
    seasons: list
    coef: dict            # name -> value
    se: dict              # name -> standard error
    ratings: RatingSet

    def predict_row(self, season, team, opp, home) -> float:
        eta = self.coef["intercept"] + self.coef["home"] * home
        eta += self.coef.get(f"season_{season}", 0.0)
        eta += self.coef["team_off"] * self.ratings.attack.get((season, team), 0.0)
        eta += self.coef["opp_def"] * self.ratings.defense.get((season, opp), 0.0)
        return float(np.exp(eta))


def fit_stage2(rows: list[MatchMetricRow], ratings: RatingSet,
               tol: float = 1e-8) -> GoalsModel:
    """Unpenalized Poisson GLM: goals ~ home + season + team_off + opp_def."""
    seasons = sorted({r.season for r in rows})
    n = len(rows)
    names = ["intercept", "home"]
    names += [f"season_{s}" for s in seasons[1:]]  # first season is baseline
    names += ["team_off", "opp_def"]
    X = np.zeros((n, len(names)))
    y = np.empty(n)
    s_col = {s: 2 + i for i, s in enumerate(seasons[1:])}
    for i, r in enumerate(rows):
        X[i, 0] = 1.0
        X[i, 1] = 1.0 if r.home else 0.0
        if r.season in s_col:
            X[i, s_col[r.season]] = 1.0
        X[i, -2] = ratings.attack.get((r.season, r.team), 0.0)
        X[i, -1] = ratings.defense.get((r.season, r.opponent), 0.0)
        y[i] = r.goals_scored
    pen = np.full(len(names), 1e-10)  # numerical ridge only
    pen[0] = 0.0
    beta, cov = poisson_irls(X, y, pen, tol=tol)
    return GoalsModel(
        seasons=seasons,
        coef={nm: float(b) for nm, b in zip(names, beta)},
        se={nm: float(np.sqrt(cov[j, j])) for j, nm in enumerate(names)},
        ratings=ratings,
    )


# ---------------------------------------------------------------------------
# Rolling matchday cross-validation
# ---------------------------------------------------------------------------

@dataclass
class FoldResult:
    matchday: tuple                  # (season, matchday)
    row_ids: list                    # (season, matchday, team) per row
    predicted: np.ndarray
    actual: np.ndarray

    @property
    def squared_errors(self) -> np.ndarray:
        return (self.predicted - self.actual) ** 2

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.predicted - self.actual)

    @property
    def mse(self) -> float:
        return float(np.mean(self.squared_errors))


@dataclass
class CvSummary:
    mse: float
    mae: float
    interval_90: tuple               # 5th/95th percentile of per-fold MSE
    penalties: dict = field(default_factory=dict)


def filter_rows(rows, metric: str, agg: AggRule):
    return [r for r in rows if r.metric == metric and r.agg is agg]


def _fit_and_predict(train, test, penalties):
    ratings = fit_stage1(train, penalties)
    goals = fit_stage2(train, ratings)
    pred = np.array([
        goals.predict_row(r.season, r.team, r.opponent, r.home) for r in test])
    actual = np.array([float(r.goals_scored) for r in test])
    return pred, actual


def rolling_cv(rows: list[MatchMetricRow], metric: str, agg: AggRule,
               penalties: dict = None, seed: int = 0):
    """One fold per matchday; both stages refit on all other matchdays.

    Returns (folds, summary). Penalties are selected once by inner CV on the
    full row set when not supplied, then reused across folds.
    """
    rows = filter_rows(rows, metric, agg)
    mds = sorted({(r.season, r.matchday) for r in rows})
    if len(mds) < 3:
        raise ValueError("rolling CV needs at least 3 matchdays")
    if penalties is None:
        penalties = select_penalties(rows, seed=seed)
    folds = []
    total_test_rows = 0
    for md in mds:
        test = [r for r in rows if (r.season, r.matchday) == md]
        train = [r for r in rows if (r.season, r.matchday) != md]
        train_ids = {(r.season, r.matchday, r.team) for r in train}
        test_ids = [(r.season, r.matchday, r.team) for r in test]
        assert not train_ids.intersection(test_ids), "fold leakage"
        pred, actual = _fit_and_predict(train, test, penalties)
        folds.append(FoldResult(matchday=md, row_ids=test_ids,
                                predicted=pred, actual=actual))
        total_test_rows += len(test)
    assert total_test_rows == len(rows), "fold partition does not cover rows"
    fold_mse = np.array([f.mse for f in folds])
    all_abs = np.concatenate([f.abs_errors for f in folds])
    all_sq = np.concatenate([f.squared_errors for f in folds])
    summary = CvSummary(
        mse=float(np.mean(all_sq)),
        mae=float(np.mean(all_abs)),
        interval_90=(float(np.quantile(fold_mse, 0.05)),
                     float(np.quantile(fold_mse, 0.95))),
        penalties=dict(penalties),
    )
    return folds, summary


# ---------------------------------------------------------------------------
# Exact binomial matchday test
# ---------------------------------------------------------------------------

def binomial_tail_logsum(k: int, n: int, p: float = 0.5) -> float:
    """P(X >= k), X ~ Binomial(n, p), by log-space summation."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    i = np.arange(k, n + 1)
    logs = (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
            + i * np.log(p) + (n - i) * np.log1p(-p))
    return float(np.exp(logsumexp(logs)))

def binomial_tail_recursion(k: int, n: int, p: float = 0.5) -> float:
    """Same tail via the term ratio recursion, summed smallest-first."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    term = p ** n       # i = n
    total = term
    ratio = (1.0 - p) / p
    for i in range(n, k, -1):
        term *= i / (n - i + 1.0) * ratio   # step i -> i-1
        total += term
    return float(total)


def exact_binomial_tail(k: int, n: int, p: float = 0.5) -> float:
    """P(X >= k) with a cross-check between two independent computations."""
    a = binomial_tail_logsum(k, n, p)
    b = binomial_tail_recursion(k, n, p)
    if abs(a - b) > 1e-10 * max(abs(a), abs(b), 1e-300):
        raise ArithmeticError(f"binomial tail paths disagree: {a!r} vs {b!r}")
    return a


@dataclass
class WinFractions:
    n_folds: int
    wins: int
    ties: int
    fraction: float
    p_value: float


def matchday_win_fractions(method_folds: list[FoldResult],
                           baseline_folds: list[FoldResult]) -> WinFractions:
    """Count matchdays where the method beats the baseline on fold MSE.

    Exact ties count as non-wins. p = P(X >= wins), X ~ Binomial(n, 1/2).
    """
    base = {f.matchday: f.mse for f in baseline_folds}
    if {f.matchday for f in method_folds} != set(base):
        raise ValueError("method and baseline evaluated on different folds")
    wins = 0
    ties = 0
    for f in method_folds:
        if f.mse < base[f.matchday]:
            wins += 1
        elif f.mse == base[f.matchday]:
            ties += 1
    n = len(method_folds)
    return WinFractions(
        n_folds=n, wins=wins, ties=ties,
        fraction=wins / n,
        p_value=exact_binomial_tail(wins, n),
    )


# ---------------------------------------------------------------------------
# Subsampling robustness (fixed holdout, repeated 90% training subsamples)
# ---------------------------------------------------------------------------

@dataclass
class RobustnessResult:
    method: str
    diffs: np.ndarray        # per-rep (method MSE - baseline MSE) on holdout
    interval: tuple          # (min, max)


def subsample_robustness(rows_by_method: dict, baseline: str,
                         n_reps: int = 10, holdout: float = 0.2,
                         subsample: float = 0.9, seed: int = 0,
                         penalties: dict = None) -> list[RobustnessResult]:
    """Appendix-style stability study of MSE differences against a baseline.

    A fixed fraction of matchdays is held out by seed; each rep refits the
    full two-stage pipeline on a random subsample of the remaining matchdays
    and scores the holdout.
    """
    any_rows = next(iter(rows_by_method.values()))
    mds = sorted({(r.season, r.matchday) for r in any_rows})
    rng = np.random.default_rng(seed)
    n_hold = max(1, int(round(holdout * len(mds))))
    perm = rng.permutation(len(mds))
    hold_set = {mds[i] for i in perm[:n_hold]}
    train_mds = [mds[i] for i in perm[n_hold:]]
    n_sub = max(1, int(round(subsample * len(train_mds))))

    if penalties is None:
        penalties = select_penalties(
            [r for r in rows_by_method[baseline]
             if (r.season, r.matchday) not in hold_set], seed=seed)

    mse = {name: np.empty(n_reps) for name in rows_by_method}
    for rep in range(n_reps):
        chosen = set(map(tuple, rng.permutation(
            np.array(train_mds, dtype=object))[:n_sub]))
        for name, rows in rows_by_method.items():
            train = [r for r in rows if (r.season, r.matchday) in chosen]
            test = [r for r in rows if (r.season, r.matchday) in hold_set]
            pred, actual = _fit_and_predict(train, test, penalties)
            mse[name][rep] = float(np.mean((pred - actual) ** 2))

    out = []
    for name in rows_by_method:
        if name == baseline:
            continue
        diffs = mse[name] - mse[baseline]
        out.append(RobustnessResult(method=name, diffs=diffs,
                                    interval=(float(diffs.min()),
                                              float(diffs.max()))))
    return out
