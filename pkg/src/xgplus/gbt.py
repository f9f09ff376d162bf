"""From-scratch histogram gradient-boosted trees for binary log loss.

Level-wise growth over 256 equal-frequency bins, second-order (gradient /
hessian) split gain, deterministic given data and params. Trees live in
flat arrays (implicit binary heap layout) for fast numba traversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

N_BINS = 256
LEAF_CLAMP = 10.0  # log-odds


@dataclass
class GbtParams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    min_child_hessian: float = 1.0
    reg_lambda: float = 1.0
    min_gain: float = 1e-12


@dataclass
class Tree:
    feature: np.ndarray     # (m,) int16, -1 for leaf
    threshold: np.ndarray   # (m,) float64, raw-scale; x <= thr goes left
    value: np.ndarray       # (m,) float64 leaf values (log-odds increments)
    gain: np.ndarray        # (m,) float64 split gain


@dataclass
class GbtModel:
    params: GbtParams
    base_score: float                        # log-odds of training prevalence
    trees: list = field(default_factory=list)
    feature_names: list = field(default_factory=list)
    bin_edges: np.ndarray = None             # (n_features, N_BINS) upper edges

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += self.params.learning_rate * _predict_tree(
                X, t.feature, t.threshold, t.value)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return 1.0 / (1.0 + np.exp(-self.decision(X)))


def quantile_bin_edges(X: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Equal-frequency upper bin edges per feature; last edge is +inf."""
    n, f = X.shape
    edges = np.empty((f, n_bins))
    qs = np.linspace(0, 1, n_bins + 1)[1:-1]
    for j in range(f):
        e = np.quantile(X[:, j], qs)
        edges[j, :-1] = e
        edges[j, -1] = np.inf
    return edges


@njit(cache=True, parallel=True)
def _bin_data(X, edges):
    n, f = X.shape
    out = np.empty((n, f), dtype=np.uint8)
    for j in prange(f):
        col_edges = edges[j]
        for i in range(n):
            out[i, j] = np.searchsorted(col_edges, X[i, j], side="left")
    return out


@njit(cache=True, parallel=True)
def _build_hists(binned, grad, hess, node_of, level_base, n_level_nodes):
    f = binned.shape[1]
    hg = np.zeros((n_level_nodes, f, N_BINS))
    hh = np.zeros((n_level_nodes, f, N_BINS))
    for j in prange(f):
        for i in range(binned.shape[0]):
            node = node_of[i]
            if node < level_base:
                continue  # finished in an earlier level
            slot = node - level_base
            b = binned[i, j]
            hg[slot, j, b] += grad[i]
            hh[slot, j, b] += hess[i]
    return hg, hh


@njit(cache=True)
def _best_split(hg, hh, min_child_hessian, reg_lambda):
    """Best (feature, bin, gain) for one node's histograms."""
    f = hg.shape[0]
    g_tot = 0.0
    h_tot = 0.0
    for b in range(N_BINS):
        g_tot += hg[0, b]
        h_tot += hh[0, b]
    parent = g_tot * g_tot / (h_tot + reg_lambda)
    best_gain = 0.0
    best_f = -1
    best_b = -1
    for j in range(f):
        gl = 0.0
        hl = 0.0
        for b in range(N_BINS - 1):
            gl += hg[j, b]
            hl += hh[j, b]
            hr = h_tot - hl
            if hl < min_child_hessian or hr < min_child_hessian:
                continue
            gr = g_tot - gl
            gain = 0.5 * (gl * gl / (hl + reg_lambda)
                          + gr * gr / (hr + reg_lambda) - parent)
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_b = b
    return best_f, best_b, best_gain, g_tot, h_tot


@njit(cache=True)
def _apply_splits(binned, node_of, level_base, split_feature, split_bin):
    for i in range(binned.shape[0]):
        node = node_of[i]
        if node < level_base:
            continue
        slot = node - level_base
        sf = split_feature[slot]
        if sf < 0:
            continue
        if binned[i, sf] <= split_bin[slot]:
            node_of[i] = 2 * node + 1
        else:
            node_of[i] = 2 * node + 2


@njit(cache=True)
def _predict_tree(X, feature, threshold, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = 2 * node + 1
            else:
                node = 2 * node + 2
        out[i] = value[node]
    return out


@njit(cache=True)
def _predict_tree_binned(binned, feature, split_bin, value):
    n = binned.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if binned[i, feature[node]] <= split_bin[node]:
                node = 2 * node + 1
            else:
                node = 2 * node + 2
        out[i] = value[node]
    return out


def _grow_tree(binned, grad, hess, edges, params: GbtParams):
    n = len(grad)
    max_nodes = 2 ** (params.max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int16)
    split_bin = np.zeros(max_nodes, dtype=np.int32)
    threshold = np.zeros(max_nodes)
    value = np.zeros(max_nodes)
    gain_arr = np.zeros(max_nodes)

    node_of = np.zeros(n, dtype=np.int64)
    # leaf value for any node that stops splitting
    def leaf_value(g, h):
        v = -g / (h + params.reg_lambda)
        return float(np.clip(v, -LEAF_CLAMP, LEAF_CLAMP))

    active = True
    for depth in range(params.max_depth):
        if not active:
            break
        level_base = 2 ** depth - 1
        n_level = 2 ** depth
        hg, hh = _build_hists(binned, grad, hess, node_of, level_base, n_level)
        sf = np.full(n_level, -1, dtype=np.int64)
        sb = np.zeros(n_level, dtype=np.int64)
        active = False
        for slot in range(n_level):
            node = level_base + slot
            if hh[slot].sum() <= 0 and hg[slot].sum() == 0:
                continue  # empty node
            f_j, b, g, g_tot, h_tot = _best_split(
                hg[slot], hh[slot], params.min_child_hessian, params.reg_lambda)
            if f_j < 0 or g <= params.min_gain:
                value[node] = leaf_value(g_tot, h_tot)
                continue
            sf[slot] = f_j
            sb[slot] = b
            feature[node] = f_j
            split_bin[node] = b
            threshold[node] = edges[f_j, b]
            gain_arr[node] = g
            active = True
        if active:
            _apply_splits(binned, node_of, level_base, sf, sb)

    # value for max-depth leaves
    last_base = 2 ** params.max_depth - 1
    if active:
        gsum = np.zeros(2 ** params.max_depth)
        hsum = np.zeros(2 ** params.max_depth)
        deep = node_of >= last_base
        np.add.at(gsum, node_of[deep] - last_base, grad[deep])
        np.add.at(hsum, node_of[deep] - last_base, hess[deep])
        for slot in range(2 ** params.max_depth):
            node = last_base + slot
            if hsum[slot] > 0 or gsum[slot] != 0:
                value[node] = leaf_value(gsum[slot], hsum[slot])

    tree = Tree(feature=feature, threshold=threshold, value=value, gain=gain_arr)
    return tree, split_bin


def fit_gbt(X: np.ndarray, y: np.ndarray, params: GbtParams = None,
            feature_names=None) -> GbtModel:
    """Stagewise logistic-loss boosting; deterministic given data and params."""
    params = params or GbtParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("empty dataset")
    prevalence = float(np.clip(y.mean(), 1e-7, 1 - 1e-7))
    base = float(np.log(prevalence / (1 - prevalence)))
    model = GbtModel(params=params, base_score=base,
                     feature_names=list(feature_names or []),
                     bin_edges=quantile_bin_edges(X))
    binned = _bin_data(X, model.bin_edges)
    raw = np.full(n, base)
    model.train_losses_ = []
    for _ in range(params.n_rounds):
        p = 1.0 / (1.0 + np.exp(-raw))
        model.train_losses_.append(
            float(np.mean(np.logaddexp(0, raw) - y * raw)))
        grad = p - y
        hess = p * (1.0 - p)
        tree, split_bin = _grow_tree(binned, grad, hess, model.bin_edges, params)
        raw += params.learning_rate * _predict_tree_binned(
            binned, tree.feature, split_bin, tree.value)
        model.trees.append(tree)
    p = 1.0 / (1.0 + np.exp(-raw))
    model.train_losses_.append(float(np.mean(np.logaddexp(0, raw) - y * raw)))
    return model


def feature_importance_gain(model: GbtModel):
    """Total split gain per feature, descending; ties by feature index."""
    n_feat = model.bin_edges.shape[0]
    gains = np.zeros(n_feat)
    for t in model.trees:
        for node in range(len(t.feature)):
            if t.feature[node] >= 0:
                gains[t.feature[node]] += t.gain[node]
    order = sorted(range(n_feat), key=lambda j: (-gains[j], j))
    names = model.feature_names or [f"f{j}" for j in range(n_feat)]
    return [(names[j], float(gains[j])) for j in order if gains[j] > 0]
