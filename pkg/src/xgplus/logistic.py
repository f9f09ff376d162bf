"""L2-penalized logistic regression fit by iteratively reweighted least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES, FEATURE_SETS


class Diverged(RuntimeError):
    def __init__(self, n_iter):
        self.n_iter = n_iter
        super().__init__(f"IRLS did not converge in {n_iter} iterations")


class DegenerateDesign(ValueError):
    pass


@dataclass
class LogisticModel:
    feature_set: str
    feature_names: list
    weights: np.ndarray        # active-feature coefficients, raw scale
    intercept: float
    l2_lambda: float
    n_iter: int = 0
    columns: np.ndarray = field(default=None)  # indices into the 27-col matrix

    def decision(self, X: np.ndarray) -> np.ndarray:
        Xa = X[:, self.columns] if self.columns is not None else X
        return Xa @ self.weights + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return 1.0 / (1.0 + np.exp(-self.decision(X)))


def _active_columns(feature_set: str):
    names = FEATURE_SETS[feature_set]
    return np.array([FEATURE_NAMES.index(n) for n in names]), names


def fit_logistic(X: np.ndarray, y: np.ndarray, feature_set: str = "All",
                 l2_lambda: float = 1e-6, tol: float = 1e-8,
                 max_iter: int = 200) -> LogisticModel:
    """Maximize the L2-penalized Bernoulli log-likelihood.

    The penalty applies to slopes only, on the standardized scale, so it is
    invariant to feature units. Converged when the max penalized-gradient
    component (raw parametrization) is below tol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty dataset")
    cols, names = _active_columns(feature_set)
    Xa = X[:, cols]
    n, k = Xa.shape

    mu = Xa.mean(axis=0)
    sd = Xa.std(axis=0)
    const = sd == 0
    if const.any() and l2_lambda == 0:
        raise DegenerateDesign(
            f"constant feature(s) {[names[i] for i in np.nonzero(const)[0]]} "
            "with zero penalty")
    sd = np.where(const, 1.0, sd)
    Z = (Xa - mu) / sd

    if y.min() == y.max() and l2_lambda == 0 and k > 0:
        # still fine for an intercept-only design; slopes need a penalty
        raise DegenerateDesign("single-class labels with zero penalty")

    beta = np.zeros(k + 1)  # [intercept, slopes] on standardized scale
    lam = np.full(k + 1, float(l2_lambda))
    lam[0] = 0.0

    def nll(b):
        eta = beta0_eta(b)
        # log(1 + e^eta) - y*eta, stable
        return float(np.sum(np.logaddexp(0, eta) - y * eta)
                     + 0.5 * np.sum(lam * b * b))

    def beta0_eta(b):
        return Z @ b[1:] + b[0]

    prev = nll(beta)
    for it in range(1, max_iter + 1):
        eta = beta0_eta(beta)
        p = 1.0 / (1.0 + np.exp(-eta))
        g = np.empty(k + 1)
        resid = p - y
        g[0] = resid.sum()
        g[1:] = Z.T @ resid
        g += lam * beta
        if np.max(np.abs(g)) < tol * max(1.0, n):
            return _finish(feature_set, names, cols, beta, mu, sd, l2_lambda, it)
        w = np.clip(p * (1.0 - p), 1e-10, None)
        H = np.empty((k + 1, k + 1))
        H[0, 0] = w.sum()
        Zw = Z * w[:, None]
        H[0, 1:] = H[1:, 0] = Zw.sum(axis=0)
        H[1:, 1:] = Z.T @ Zw
        H[np.diag_indices_from(H)] += lam + 1e-12
        step = np.linalg.solve(H, g)
        # step halving on the penalized objective
        t = 1.0
        for _ in range(40):
            cand = beta - t * step
            val = nll(cand)
            if val <= prev + 1e-12:
                beta, prev = cand, val
                break
            t *= 0.5
        else:
            raise Diverged(it)
    # check final gradient once more before declaring divergence
    eta = beta0_eta(beta)
    p = 1.0 / (1.0 + np.exp(-eta))
    g = np.empty(k + 1)
    g[0] = (p - y).sum()
    g[1:] = Z.T @ (p - y)
    g += lam * beta
    if np.max(np.abs(g)) < tol * max(1.0, n):
        return _finish(feature_set, names, cols, beta, mu, sd, l2_lambda, max_iter)
    raise Diverged(max_iter)


def _finish(feature_set, names, cols, beta, mu, sd, l2_lambda, n_iter):
    slopes = beta[1:] / sd
    intercept = beta[0] - float(mu @ slopes)
    return LogisticModel(
        feature_set=feature_set,
        feature_names=list(names),
        weights=slopes,
        intercept=intercept,
        l2_lambda=l2_lambda,
        n_iter=n_iter,
        columns=cols,
    )
