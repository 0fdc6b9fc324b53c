"""Gradient-boosted regression trees on binned features.

Squared-error boosting: each round fits a small tree to the current
residuals and the ensemble adds ``learning_rate`` times its prediction.
Trees grow leaf-wise (always splitting the leaf with the largest gain)
on quantile-binned features, with the variance-reduction gain

    gain = sum_l^2 / n_l + sum_r^2 / n_r - sum_p^2 / n_p

computed from per-bin histograms of residual counts and sums.  Leaf values
are mean residuals.  Everything here is deterministic: there is no row or
feature subsampling, ties prefer the lowest feature then the lowest bin,
and equal-gain leaves split in creation order.

Models serialize to a versioned flat text format, one line per node.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

_FORMAT_HEADER = "stag-gbm v1"
_LEAF = "leaf"
_SPLIT = "split"

# A tree maps heap node ids (left child 2i+1, right child 2i+2) to
# (kind, feature, threshold bin, value) tuples.
Tree = dict[int, tuple[str, int, int, float]]


@dataclass(frozen=True)
class GbmParams:
    """Boosting hyperparameters.

    ``max_depth`` 0 is legal and yields single-leaf trees (the model then
    predicts the target mean).  ``seed`` only matters for cross-validation
    fold assignment; fitting itself draws no random numbers.
    """

    n_rounds: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    max_depth: int = 6
    min_samples_leaf: int = 20
    n_bins: int = 255
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 2 <= self.n_bins <= 255:
            raise ValueError("n_bins must lie in [2, 255]")


@dataclass
class GbmModel:
    """A fitted ensemble: bin edges, base score, and one tree per round."""

    params: GbmParams
    n_features: int
    base_score: float
    bin_edges: list[np.ndarray]
    trees: list[Tree]
    train_mse: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class GridPointResult:
    params: GbmParams
    fold_mse: tuple[float, ...]
    fold_r2: tuple[float, ...]

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.fold_mse))

    @property
    def mean_r2(self) -> float:
        return float(np.mean(self.fold_r2))


@dataclass
class CvReport:
    """Cross-validation outcome for a hyperparameter grid."""

    results: list[GridPointResult]
    best_index: int
    n_folds: int
    seed: int

    @property
    def best_params(self) -> GbmParams:
        return self.results[self.best_index].params


def mean_squared_error(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    return float(np.mean((y_true - y_pred) ** 2))


def r_squared(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Coefficient of determination against the evaluation-set mean."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def _check_matrix(features: np.ndarray, targets: np.ndarray | None = None
                  ) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    y = None
    if targets is not None:
        y = np.asarray(targets, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"{X.shape[0]} feature rows but {y.shape[0]} targets"
            )
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
    return X, y


def _make_bin_edges(col: np.ndarray, n_bins: int) -> np.ndarray:
    """Split points for one feature.

    Few distinct values: midpoints between consecutive distinct values, so
    each value keeps its own bin.  Otherwise: distinct quantile cuts.
    """
    uniq = np.unique(col)
    if uniq.shape[0] <= n_bins:
        return (uniq[:-1] + uniq[1:]) / 2.0
    qs = np.quantile(col, np.arange(1, n_bins) / n_bins)
    return np.unique(qs)


def _apply_bins(bin_edges: list[np.ndarray], X: np.ndarray) -> np.ndarray:
    binned = np.empty(X.shape, dtype=np.int32)
    for j, edges in enumerate(bin_edges):
        binned[:, j] = np.searchsorted(edges, X[:, j], side="right")
    return binned


def _node_best_split(
    flat: np.ndarray,
    resid: np.ndarray,
    idx: np.ndarray,
    offsets: np.ndarray,
    total_bins: int,
    n_features: int,
    min_samples_leaf: int,
) -> tuple[float, int, int] | None:
    """Best (gain, feature, bin) for the rows ``idx``, or None."""
    sub = flat[idx].ravel()
    counts = np.bincount(sub, minlength=total_bins)
    sums = np.bincount(sub, weights=np.repeat(resid[idx], n_features),
                       minlength=total_bins)
    n_node = idx.shape[0]
    best: tuple[float, int, int] | None = None
    for j in range(n_features):
        lo, hi = offsets[j], offsets[j + 1]
        if hi - lo < 2:
            continue
        c = counts[lo:hi]
        s = sums[lo:hi]
        n_left = np.cumsum(c)[:-1]
        s_left = np.cumsum(s)[:-1]
        n_right = n_node - n_left
        s_right = s_left[-1] + s[-1] - s_left
        valid = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        s_node = s_left[-1] + s[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = (s_left * s_left / n_left + s_right * s_right / n_right
                     - s_node * s_node / n_node)
        gains = np.where(valid, gains, -np.inf)
        b = int(np.argmax(gains))
        gain = float(gains[b])
        if gain > 0.0 and (best is None or gain > best[0]):
            best = (gain, j, b)
    return best


def _grow_tree(
    binned: np.ndarray,
    flat: np.ndarray,
    resid: np.ndarray,
    params: GbmParams,
    offsets: np.ndarray,
    total_bins: int,
) -> tuple[Tree, np.ndarray]:
    """One leaf-wise tree fit to the residuals.

    Returns the node table and the tree's prediction for every training
    row (taken straight from the final leaf assignment).
    """
    n, n_features = binned.shape
    pred = np.empty(n)
    all_idx = np.arange(n)

    def candidate(node_id: int, idx: np.ndarray, depth: int):
        best = None
        if depth < params.max_depth and idx.shape[0] >= 2 * params.min_samples_leaf:
            best = _node_best_split(flat, resid, idx, offsets, total_bins,
                                    n_features, params.min_samples_leaf)
        return best

    # Leaves awaiting a decision: [node_id, idx, depth, order, best-or-None]
    order_counter = itertools.count()
    leaves = [[0, all_idx, 0, next(order_counter), candidate(0, all_idx, 0)]]
    nodes: Tree = {}
    while len(leaves) < params.max_leaves:
        splittable = [leaf for leaf in leaves if leaf[4] is not None]
        if not splittable:
            break
        # Largest gain wins; insertion order breaks exact ties.
        chosen = min(splittable, key=lambda leaf: (-leaf[4][0], leaf[3]))
        node_id, idx, depth, _, (gain, feat, threshold_bin) = chosen
        leaves.remove(chosen)
        nodes[node_id] = (_SPLIT, feat, threshold_bin, 0.0)
        mask = binned[idx, feat] <= threshold_bin
        left_idx, right_idx = idx[mask], idx[~mask]
        for child_id, child_idx in ((2 * node_id + 1, left_idx),
                                    (2 * node_id + 2, right_idx)):
            leaves.append([child_id, child_idx, depth + 1,
                           next(order_counter),
                           candidate(child_id, child_idx, depth + 1)])
    if not nodes:
        # A splitless tree models the residual mean, which is identically
        # zero here: the base score is the target mean and leaf values are
        # leaf means, so every round scales the residual mean by (1 - lr)
        # from an exact zero.  Pin the value so the ensemble stays the
        # mean predictor bit for bit instead of accumulating float dust.
        nodes[0] = (_LEAF, -1, -1, 0.0)
        pred.fill(0.0)
        return nodes, pred
    for node_id, idx, _, _, _ in leaves:
        value = float(resid[idx].mean()) if idx.shape[0] else 0.0
        nodes[node_id] = (_LEAF, -1, -1, value)
        pred[idx] = value
    return nodes, pred


def fit(features: np.ndarray, targets: np.ndarray,
        params: GbmParams | None = None) -> GbmModel:
    """Fit a boosted ensemble with squared loss.

    The base score is the target mean; every round fits one tree to the
    residuals.  Training MSE is tracked per round and is non-increasing
    (guarded by an internal check).  Fitting the same arrays twice yields
    the same model; no random numbers are drawn.
    """
    if params is None:
        params = GbmParams()
    X, y = _check_matrix(features, targets)
    n = X.shape[0]
    if n < 2 * params.min_samples_leaf:
        raise ValueError(
            f"need at least {2 * params.min_samples_leaf} rows "
            f"(2 * min_samples_leaf), got {n}"
        )
    bin_edges = [_make_bin_edges(X[:, j], params.n_bins)
                 for j in range(X.shape[1])]
    binned = _apply_bins(bin_edges, X)
    bins_per_feature = np.array([e.shape[0] + 1 for e in bin_edges])
    offsets = np.concatenate([[0], np.cumsum(bins_per_feature)])
    total_bins = int(offsets[-1])
    flat = binned + offsets[:-1][None, :].astype(np.int32)

    base_score = float(y.mean())
    current = np.full(n, base_score)
    train_mse = [mean_squared_error(y, current)]
    trees: list[Tree] = []
    for _ in range(params.n_rounds):
        resid = y - current
        nodes, tree_pred = _grow_tree(binned, flat, resid, params,
                                      offsets, total_bins)
        trees.append(nodes)
        current = current + params.learning_rate * tree_pred
        mse = mean_squared_error(y, current)
        if mse > train_mse[-1] * (1.0 + 1e-9) + 1e-15:
            raise RuntimeError(
                "training MSE increased between rounds; this indicates a "
                "broken residual fit"
            )
        train_mse.append(mse)
    return GbmModel(params=params, n_features=X.shape[1],
                    base_score=base_score, bin_edges=bin_edges,
                    trees=trees, train_mse=train_mse)


def _tree_predict(nodes: Tree, binned: np.ndarray) -> np.ndarray:
    out = np.empty(binned.shape[0])
    stack = [(0, np.arange(binned.shape[0]))]
    while stack:
        node_id, idx = stack.pop()
        kind, feat, threshold_bin, value = nodes[node_id]
        if kind == _LEAF:
            out[idx] = value
            continue
        mask = binned[idx, feat] <= threshold_bin
        stack.append((2 * node_id + 1, idx[mask]))
        stack.append((2 * node_id + 2, idx[~mask]))
    return out


def predict(model: GbmModel, features: np.ndarray) -> np.ndarray:
    """Ensemble prediction for a feature matrix (training bin edges apply)."""
    X, _ = _check_matrix(features)
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model expects {model.n_features} features, got {X.shape[1]}"
        )
    binned = _apply_bins(model.bin_edges, X)
    out = np.full(X.shape[0], model.base_score)
    for nodes in model.trees:
        out += model.params.learning_rate * _tree_predict(nodes, binned)
    return out


def param_grid(base: GbmParams | None = None, **axes) -> list[GbmParams]:
    """Cross product of hyperparameter choices, in deterministic order.

    ``param_grid(learning_rate=[0.1, 0.05], max_leaves=[15, 31])`` yields
    four parameter sets varying the later axes fastest.
    """
    if base is None:
        base = GbmParams()
    if not axes:
        return [base]
    valid = {f.name for f in fields(GbmParams)}
    for name in axes:
        if name not in valid:
            raise ValueError(f"unknown hyperparameter {name!r}")
    names = list(axes)
    combos = itertools.product(*(axes[name] for name in names))
    return [replace(base, **dict(zip(names, combo))) for combo in combos]


def grid_search_cv(features: np.ndarray, targets: np.ndarray,
                   grid: list[GbmParams], k: int = 5,
                   seed: int = 0) -> CvReport:
    """K-fold cross-validated grid search minimizing mean validation MSE.

    Rows are shuffled once with the given seed and split into k folds;
    every grid point trains k times.  The winner is the argmin of mean
    validation MSE, first grid point on ties.
    """
    if not grid:
        raise ValueError("grid must contain at least one parameter set")
    if k < 2:
        raise ValueError("k must be >= 2")
    X, y = _check_matrix(features, targets)
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} rows, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(X.shape[0])
    folds = np.array_split(perm, k)
    results = []
    for params in grid:
        fold_mse = []
        fold_r2 = []
        for i in range(k):
            val_idx = folds[i]
            train_idx = np.concatenate([folds[j] for j in range(k) if j != i])
            model = fit(X[train_idx], y[train_idx], params)
            pred = predict(model, X[val_idx])
            fold_mse.append(mean_squared_error(y[val_idx], pred))
            fold_r2.append(r_squared(y[val_idx], pred))
        results.append(GridPointResult(params=params,
                                       fold_mse=tuple(fold_mse),
                                       fold_r2=tuple(fold_r2)))
    best_index = int(np.argmin([r.mean_mse for r in results]))
    return CvReport(results=results, best_index=best_index, n_folds=k,
                    seed=seed)


def to_text(model: GbmModel) -> str:
    """Serialize a model to versioned flat text (one line per node)."""
    p = model.params
    lines = [
        _FORMAT_HEADER,
        "params "
        f"n_rounds={p.n_rounds} learning_rate={p.learning_rate!r} "
        f"max_leaves={p.max_leaves} max_depth={p.max_depth} "
        f"min_samples_leaf={p.min_samples_leaf} n_bins={p.n_bins} "
        f"seed={p.seed}",
        f"n_features {model.n_features}",
        f"base_score {model.base_score!r}",
    ]
    for j, edges in enumerate(model.bin_edges):
        cells = " ".join(repr(float(e)) for e in edges)
        lines.append(f"edges {j} {cells}".rstrip())
    lines.append("nodes")
    for t, nodes in enumerate(model.trees):
        for node_id in sorted(nodes):
            kind, feat, threshold_bin, value = nodes[node_id]
            lines.append(f"{t} {node_id} {kind} {feat} {threshold_bin} "
                         f"{value!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> GbmModel:
    """Parse a model serialized by :func:`to_text`."""
    lines = text.splitlines()
    if not lines or lines[0] != _FORMAT_HEADER:
        raise ValueError(
            f"unsupported model format; expected header {_FORMAT_HEADER!r}"
        )
    pos = 1

    def line_at(i: int, prefix: str) -> str:
        if i >= len(lines) or not lines[i].startswith(prefix):
            raise ValueError(f"missing {prefix.strip()} line")
        return lines[i]

    kv = dict(item.split("=", 1)
              for item in line_at(pos, "params ").split()[1:])
    params = GbmParams(
        n_rounds=int(kv["n_rounds"]),
        learning_rate=float(kv["learning_rate"]),
        max_leaves=int(kv["max_leaves"]),
        max_depth=int(kv["max_depth"]),
        min_samples_leaf=int(kv["min_samples_leaf"]),
        n_bins=int(kv["n_bins"]),
        seed=int(kv["seed"]),
    )
    pos += 1
    n_features = int(line_at(pos, "n_features ").split()[1])
    pos += 1
    base_score = float(line_at(pos, "base_score ").split()[1])
    pos += 1
    bin_edges = []
    while pos < len(lines) and lines[pos].startswith("edges "):
        cells = lines[pos].split()
        if int(cells[1]) != len(bin_edges):
            raise ValueError(f"edges for feature {cells[1]} out of order")
        bin_edges.append(np.array([float(c) for c in cells[2:]]))
        pos += 1
    if len(bin_edges) != n_features:
        raise ValueError(
            f"expected edges for {n_features} features, got {len(bin_edges)}"
        )
    if pos >= len(lines) or lines[pos] != "nodes":
        raise ValueError("missing nodes section")
    pos += 1
    trees: list[Tree] = []
    for line in lines[pos:]:
        if line == "end":
            break
        cells = line.split()
        if len(cells) != 6:
            raise ValueError(f"malformed node line: {line!r}")
        tree_id, node_id = int(cells[0]), int(cells[1])
        kind = cells[2]
        if kind not in (_SPLIT, _LEAF):
            raise ValueError(f"unknown node kind {kind!r}")
        while len(trees) <= tree_id:
            trees.append({})
        trees[tree_id][node_id] = (kind, int(cells[3]), int(cells[4]),
                                   float(cells[5]))
    else:
        raise ValueError("missing end line")
    if len(trees) != params.n_rounds:
        raise ValueError(
            f"expected {params.n_rounds} trees, found {len(trees)}"
        )
    return GbmModel(params=params, n_features=n_features,
                    base_score=base_score, bin_edges=bin_edges, trees=trees)


def save_model(model: GbmModel, path: str | Path) -> None:
    Path(path).write_text(to_text(model), encoding="utf-8")


def load_model(path: str | Path) -> GbmModel:
    return from_text(Path(path).read_text(encoding="utf-8"))
