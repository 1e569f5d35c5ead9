"""Posting-hour model: multinomial logistic regression from the UTC hour
histogram to percentile longitude bins."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax

log = logging.getLogger(__name__)

DEFAULT_BIN_GRID = (1, 2, 4, 6, 8)
DEFAULT_L2_GRID = (0.01, 0.1, 1.0, 10.0)


def normalize_tau(tau) -> np.ndarray:
    """Rows of hour counts -> relative frequencies; all-zero rows become uniform."""
    t = np.atleast_2d(np.asarray(tau, dtype=float))
    s = t.sum(axis=1, keepdims=True)
    return np.where(s > 0, t / np.where(s > 0, s, 1.0), 1.0 / t.shape[1])


def percentile_edges(lons, n_bins: int) -> np.ndarray:
    """Interior bin edges at longitude quantiles; duplicates collapse (fewer bins)."""
    lons = np.asarray(lons, dtype=float)
    if n_bins <= 1 or len(np.unique(lons)) < 2:
        return np.array([])
    qs = np.quantile(lons, np.arange(1, n_bins) / n_bins)
    edges = np.unique(qs)
    # an edge at the maximum would leave an empty last bin
    return edges[edges < lons.max()]


def assign_bins(lons, edges) -> np.ndarray:
    return np.searchsorted(np.asarray(edges), np.asarray(lons, dtype=float), side="right")


def fit_logistic(X: np.ndarray, y: np.ndarray, n_classes: int, l2: float, max_iter: int = 500) -> np.ndarray:
    """Softmax regression, L2 penalty on the non-bias weights; returns (n_classes, d + 1)."""
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0

    def loss(flat):
        W = flat.reshape(n_classes, d + 1)
        logp = log_softmax(Xb @ W.T, axis=1)
        reg = 0.5 * l2 * np.sum(W[:, :d] ** 2)
        grad = (np.exp(logp) - Y).T @ Xb / n
        grad[:, :d] += l2 * W[:, :d]
        return -np.sum(Y * logp) / n + reg, grad.ravel()

    res = minimize(loss, np.zeros(n_classes * (d + 1)), jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-8})
    return res.x.reshape(n_classes, d + 1)


@dataclass
class TemporalModel:
    bin_edges: np.ndarray  # (|L| - 1,) longitudes
    coefficients: np.ndarray  # (|L|, 25): 24 hour weights + bias
    l2_strength: float

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float).reshape(-1)
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(self.n_bins, -1)
        if (np.diff(self.bin_edges) <= 0).any():
            raise ValueError("bin edges must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) + 1

    def bin_of(self, lons) -> np.ndarray:
        return assign_bins(lons, self.bin_edges)

    def log_proba(self, tau) -> np.ndarray:
        """log P(bin | tau) for each row of ``tau`` (raw counts or frequencies)."""
        X = normalize_tau(tau)
        Xb = np.hstack([X, np.ones((len(X), 1))])
        return log_softmax(Xb @ self.coefficients.T, axis=1)

    def to_dict(self) -> dict:
        return {"bin_edges": self.bin_edges.tolist(), "coefficients": self.coefficients.tolist(),
                "l2_strength": self.l2_strength}

    @classmethod
    def from_dict(cls, d: dict) -> "TemporalModel":
        return cls(np.array(d["bin_edges"]), np.array(d["coefficients"]), d["l2_strength"])


def temporal_factor(tm: TemporalModel, tau, candidate_bins: np.ndarray) -> np.ndarray:
    """log P(c | tau) for every candidate: the log probability of its longitude bin."""
    return tm.log_proba(tau)[0][np.asarray(candidate_bins, dtype=int)]


def _folds(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i::k] for i in range(k)] if k <= n else [order]


def _fit_bins(X, lons, n_bins, l2):
    edges = percentile_edges(lons, n_bins)
    y = assign_bins(lons, edges)
    L = len(edges) + 1
    if L == 1:
        return TemporalModel(edges, np.zeros((1, X.shape[1] + 1)), l2)
    return TemporalModel(edges, fit_logistic(X, y, L, l2), l2)


def select_l2(X, lons, n_bins, l2_grid, folds, seed) -> float:
    """L2 strength maximizing cross-validated bin accuracy."""
    if len(l2_grid) == 1:
        return float(l2_grid[0])
    rng = np.random.default_rng(seed)
    parts = _folds(len(X), folds, rng)
    best = None
    for l2 in l2_grid:
        hits = 0
        for i, test in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != i])
            tm = _fit_bins(X[train], lons[train], n_bins, l2)
            pred = tm.log_proba(X[test]).argmax(1)
            hits += int((pred == tm.bin_of(lons[test])).sum())
        if best is None or hits > best[0]:
            best = (hits, l2)
    return float(best[1])


def fit_temporal(taus, coords, candidate_coords=None, candidate_weights=None,
                 n_bins_grid=DEFAULT_BIN_GRID, l2_grid=DEFAULT_L2_GRID, cv_folds: int = 5,
                 seed: int = 0, downstream=None) -> TemporalModel:
    """Choose |L| by cross-validated downstream error, L2 by bin accuracy, then refit.

    ``coords`` is an (n, 2) array of training (lat, lon). ``downstream`` maps
    ``(train_idx, test_idx, log_temporal)`` to per-user error miles, where
    ``log_temporal`` is the (n_test, n_candidates) temporal log factor. By
    default the content side is replaced by the candidate-weight prior:
    each held-out user is placed at argmax_c log P(bin(c)|tau) + log w_c.
    """
    from ..geo import haversine_array

    X = normalize_tau(taus)
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    lons = coords[:, 1]
    n = len(X)
    if candidate_coords is None:
        uniq, counts = np.unique(np.round(coords, 1), axis=0, return_counts=True)
        candidate_coords, candidate_weights = uniq, counts.astype(float)
    candidate_coords = np.asarray(candidate_coords, dtype=float)
    candidate_weights = np.asarray(candidate_weights, dtype=float)

    grid = sorted({b for b in n_bins_grid if 1 <= b <= max(1, n)})
    if len(np.unique(lons)) < 2 or grid == [1]:
        return _fit_bins(X, lons, 1, float(l2_grid[0]))

    rng = np.random.default_rng(seed)
    parts = _folds(n, cv_folds, rng)
    results = []
    for n_bins in grid:
        l2 = select_l2(X, lons, n_bins, l2_grid, cv_folds, seed) if n_bins > 1 else float(l2_grid[0])
        errors = []
        for i, test in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != i])
            tm = _fit_bins(X[train], lons[train], n_bins, l2)
            log_t = tm.log_proba(X[test])[:, tm.bin_of(candidate_coords[:, 1])]
            if downstream is not None:
                errors.append(np.asarray(downstream(train, test, log_t)))
            else:
                best = np.argmax(log_t + np.log(candidate_weights)[None, :], axis=1)
                errors.append(haversine_array(coords[test, 0], coords[test, 1],
                                              candidate_coords[best, 0], candidate_coords[best, 1]))
        aed = float(np.concatenate(errors).mean())
        log.debug("temporal |L|=%d l2=%g cv AED=%.1f", n_bins, l2, aed)
        results.append((aed, n_bins, l2))
    aed, n_bins, l2 = min(results)
    return _fit_bins(X, lons, n_bins, l2)
