"""Model evaluation and explanation: log loss, possession-level k-fold CV,
partial dependence, and a text model-artifact format that round-trips exactly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES
from .gbt import GbtModel, GbtParams, Tree, fit_gbt
from .logistic import LogisticModel, fit_logistic

PRED_CLIP = 1e-7


class LengthMismatch(ValueError):
    pass


class EmptyGrid(ValueError):
    pass


def log_loss(preds: np.ndarray, labels: np.ndarray) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{preds.shape} vs {labels.shape}")
    p = np.clip(preds, PRED_CLIP, 1 - PRED_CLIP)
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log1p(-p)))


@dataclass
class CvReport:
    fold_losses: list
    mean: float
    sd: float
    oof_pred: np.ndarray = field(default=None, repr=False)
    fold_of: np.ndarray = field(default=None, repr=False)


def possession_folds(possession_id: np.ndarray, season: np.ndarray = None,
                     k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold assignment per sample: possessions stay together, stratified by
    season when available."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    n = len(possession_id)
    fold = np.empty(n, dtype=np.int32)
    if season is None:
        season = np.zeros(n, dtype=np.int16)
    for s in np.unique(season):
        mask = season == s
        pids = possession_id[mask]
        uniq = np.unique(pids)
        rng.shuffle(uniq)
        assign = {pid: i % k for i, pid in enumerate(uniq)}
        fold[mask] = [assign[p] for p in pids]
    return fold


def fit_model_spec(X, y, spec: dict):
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "logistic":
        return fit_logistic(X, y, **spec)
    if kind == "gbt":
        params = spec.pop("params", None) or GbtParams(**spec)
        return fit_gbt(X, y, params, feature_names=list(FEATURE_NAMES))
    raise ValueError(f"unknown model kind {kind!r}")


def kfold_cv(X, y, possession_id, model_spec: dict, season=None,
             k: int = 5, seed: int = 0) -> CvReport:
    """Out-of-fold log loss, possessions never split across folds."""
    fold = possession_folds(np.asarray(possession_id, dtype=object), season, k, seed)
    oof = np.full(len(y), np.nan)
    losses = []
    for f in range(k):
        val = fold == f
        model = fit_model_spec(X[~val], y[~val], model_spec)
        p = model.predict(X[val])
        oof[val] = p
        losses.append(log_loss(p, y[val]))
    return CvReport(
        fold_losses=losses,
        mean=float(np.mean(losses)),
        sd=float(np.std(losses, ddof=1)),
        oof_pred=oof,
        fold_of=fold,
    )


def partial_dependence(model, X: np.ndarray, feature, grid) -> list:
    """(value, mean prediction) pairs with the feature column overwritten."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise EmptyGrid("empty PDP grid")
    j = FEATURE_NAMES.index(feature) if isinstance(feature, str) else int(feature)
    Xw = np.array(X, dtype=np.float64, copy=True)
    curve = []
    for v in grid:
        Xw[:, j] = v
        curve.append((float(v), float(np.mean(model.predict(Xw)))))
    return curve


def reliability_slope(preds: np.ndarray, truth: np.ndarray, n_bins: int = 10):
    """Least-squares slope of bin-mean truth on bin-mean prediction over
    prediction-quantile bins."""
    preds = np.asarray(preds, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    qs = np.quantile(preds, np.linspace(0, 1, n_bins + 1))
    qs[-1] += 1e-12
    which = np.clip(np.searchsorted(qs, preds, side="right") - 1, 0, n_bins - 1)
    xs, ys = [], []
    for b in range(n_bins):
        m = which == b
        if m.any():
            xs.append(preds[m].mean())
            ys.append(truth[m].mean())
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    vx = xs - xs.mean()
    return float((vx @ (ys - ys.mean())) / (vx @ vx))


# ---------------------------------------------------------------------------
# Model artifact serialization (self-describing text, exact round-trip)
# ---------------------------------------------------------------------------

FORMAT_VERSION = "xgplus-model v1"


def _r(v) -> str:
    # repr of a Python float round-trips exactly; numpy scalars do not
    return repr(float(v))


def save_model(model, fh) -> None:
    w = fh.write
    w(FORMAT_VERSION + "\n")
    if isinstance(model, LogisticModel):
        w("kind logistic\n")
        w(f"feature_set {model.feature_set}\n")
        w(f"l2_lambda {_r(model.l2_lambda)}\n")
        w(f"intercept {_r(model.intercept)}\n")
        for name, wt in zip(model.feature_names, model.weights):
            w(f"weight {name} {_r(wt)}\n")
    elif isinstance(model, GbtModel):
        w("kind gbt\n")
        p = model.params
        w(f"params {p.n_rounds} {p.max_depth} {_r(p.learning_rate)} "
          f"{_r(p.min_child_hessian)} {_r(p.reg_lambda)} {_r(p.min_gain)}\n")
        w(f"base_score {_r(model.base_score)}\n")
        w("features " + ",".join(model.feature_names) + "\n")
        w("edges " + " ".join(_r(v) for v in model.bin_edges.ravel()) + "\n")
        for i, t in enumerate(model.trees):
            w(f"tree {i} {len(t.feature)}\n")
            for node in range(len(t.feature)):
                w(f"node {node} {t.feature[node]} {_r(t.threshold[node])} "
                  f"{_r(t.value[node])} {_r(t.gain[node])}\n")
    else:
        raise TypeError(type(model))


def load_model(fh):
    lines = [ln.rstrip("\n") for ln in fh]
    if lines[0] != FORMAT_VERSION:
        raise ValueError(f"unsupported artifact format: {lines[0]!r}")
    kind = lines[1].split(" ", 1)[1]
    if kind == "logistic":
        feature_set = lines[2].split(" ", 1)[1]
        l2 = float(lines[3].split()[1])
        intercept = float(lines[4].split()[1])
        names, weights = [], []
        for ln in lines[5:]:
            _, name, val = ln.split()
            names.append(name)
            weights.append(float(val))
        cols = np.array([FEATURE_NAMES.index(n) for n in names])
        return LogisticModel(feature_set=feature_set, feature_names=names,
                             weights=np.array(weights), intercept=intercept,
                             l2_lambda=l2, columns=cols)
    if kind == "gbt":
        pp = lines[2].split()[1:]
        params = GbtParams(n_rounds=int(pp[0]), max_depth=int(pp[1]),
                           learning_rate=float(pp[2]),
                           min_child_hessian=float(pp[3]),
                           reg_lambda=float(pp[4]), min_gain=float(pp[5]))
        base = float(lines[3].split()[1])
        names = lines[4].split(" ", 1)[1].split(",")
        edge_vals = np.array([float(v) for v in lines[5].split()[1:]])
        edges = edge_vals.reshape(len(names), -1)
        model = GbtModel(params=params, base_score=base, feature_names=names,
                         bin_edges=edges)
        i = 6
        while i < len(lines):
            _, _, m = lines[i].split()
            m = int(m)
            feature = np.full(m, -1, dtype=np.int16)
            threshold = np.zeros(m)
            value = np.zeros(m)
            gain = np.zeros(m)
            for node in range(m):
                parts = lines[i + 1 + node].split()
                idx = int(parts[1])
                feature[idx] = int(parts[2])
                threshold[idx] = float(parts[3])
                value[idx] = float(parts[4])
                gain[idx] = float(parts[5])
            model.trees.append(Tree(feature, threshold, value, gain))
            i += 1 + m
        return model
    raise ValueError(f"unknown model kind {kind!r}")
