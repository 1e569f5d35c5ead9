"""Bivariate mixture densities over (lat, lon) degrees.

``fit_dpmm`` is a truncated stick-breaking Dirichlet process mixture fit by
coordinate-ascent variational inference (Blei & Jordan style) with
Normal-Gamma priors on each component's mean and precision. ``fit_gmm`` is
plain EM. Both share k-means++ initialization and the same stopping rule:
the per-point objective changes by less than ``tol`` or ``max_iter`` passes
elapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, gammaln, logsumexp

from ..geo import GeoPoint

VARIANCE_FLOOR = 1e-4  # deg^2
DAMPED_WEIGHT = 1e-3
LOG_2PI = math.log(2 * math.pi)


@dataclass
class MixtureDensity:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, 2) lat, lon
    variances: np.ndarray  # (K, 2)
    kind: str = "dpmm"
    covariance_kind: str = "diagonal"
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float).reshape(-1, 2)
        self.variances = np.asarray(self.variances, dtype=float).reshape(-1, 2)
        if abs(self.weights.sum() - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ValueError("mixture weights must lie on the simplex")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def effective_components(self, threshold: float = DAMPED_WEIGHT) -> int:
        return int((self.weights >= threshold).sum())

    def log_density(self, lat, lon) -> np.ndarray:
        """Log mixture density at broadcastable (lat, lon) arrays."""
        x = np.stack([np.asarray(lat, dtype=float), np.asarray(lon, dtype=float)], axis=-1)
        return log_density_points(self, x.reshape(-1, 2)).reshape(np.shape(lat))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "kind": self.kind,
                "covariance_kind": self.covariance_kind}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureDensity":
        return cls(weights=np.array(d["weights"]), means=np.array(d["means"]),
                   variances=np.array(d["variances"]), kind=d["kind"],
                   covariance_kind=d["covariance_kind"])


def log_density_points(m: MixtureDensity, x: np.ndarray) -> np.ndarray:
    live = m.weights > 0
    w, mu, var = m.weights[live], m.means[live], m.variances[live]
    diff2 = (x[:, None, :] - mu[None, :, :]) ** 2
    comp = -0.5 * (LOG_2PI * 2 + np.log(var).sum(axis=1))[None, :] - 0.5 * (diff2 / var[None]).sum(axis=2)
    return logsumexp(comp + np.log(w)[None, :], axis=1)


def density_at(m: MixtureDensity, c: GeoPoint) -> float:
    """log sum_k w_k N(c; mean_k, diag(var_k))."""
    return float(log_density_points(m, np.array([[c.lat, c.lon]]))[0])


# ---------------------------------------------------------------- helpers

def _as_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        x = points.astype(float).reshape(-1, 2)
    else:
        x = np.array([[p.lat, p.lon] for p in points], dtype=float).reshape(-1, 2)
    if len(x) == 0:
        raise ValueError("need at least one point")
    return x


def kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over distinct rows; returns up to k centers."""
    uniq = np.unique(x, axis=0)
    k = min(k, len(uniq))
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            break
        centers.append(x[rng.choice(len(x), p=d2 / total)])
    return np.array(centers)


def _initial_resp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = kmeans_pp(x, k, rng)
    for _ in range(10):  # a few Lloyd steps
        labels = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
        new = np.array([x[labels == j].mean(0) if (labels == j).any() else centers[j]
                        for j in range(len(centers))])
        if np.allclose(new, centers):
            break
        centers = new
    labels = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    resp = np.zeros((len(x), k))
    resp[np.arange(len(x)), labels] = 1.0
    return resp


def _degenerate(x: np.ndarray, kind: str, covariance_kind: str) -> MixtureDensity | None:
    if np.ptp(x, axis=0).max() == 0:
        return MixtureDensity(weights=np.array([1.0]), means=x[:1].copy(),
                              variances=np.full((1, 2), VARIANCE_FLOOR), kind=kind,
                              covariance_kind=covariance_kind)
    return None


def _check_cov(covariance_kind: str) -> None:
    if covariance_kind not in ("diagonal", "spherical"):
        raise ValueError(f"unknown covariance kind {covariance_kind!r}")


# ---------------------------------------------------------------- DPMM

@dataclass
class DPMMPrior:
    concentration: float = 1.0  # stick-breaking Beta(1, alpha)
    mean_precision: float = 1e-3  # beta0, in units of the component precision
    shape: float = 1.0  # a0 of the Gamma precision prior
    scale_variance: float = 1.0  # prior guess of a component variance, deg^2


def fit_dpmm(points, max_components: int = 5, covariance_kind: str = "diagonal", seed: int = 0,
             prior: DPMMPrior | None = None, tol: float = 1e-4, max_iter: int = 200) -> MixtureDensity:
    """Variational truncated Dirichlet process mixture.

    Coordinate ascent runs from a k-means++ start; afterwards pairs of
    components are tentatively merged and a merge is kept only if the
    evidence lower bound improves, which frees components that plain
    coordinate ascent leaves splitting one cluster. Unused components keep a
    tiny but non-zero weight (expected stick-breaking proportion).

    Reported variances are ``b / a`` (inverse expected precision), floored at
    ``VARIANCE_FLOOR``. ``history`` holds the bound after every pass of the
    accepted state, so it never decreases.
    """
    _check_cov(covariance_kind)
    x = _as_array(points)
    deg = _degenerate(x, "dpmm", covariance_kind)
    if deg is not None:
        return deg
    prior = prior or DPMMPrior()
    rng = np.random.default_rng(seed)
    K = max(1, int(max_components))
    vi = _DPMMState(x, K, covariance_kind, prior)

    resp = _initial_resp(x, K, rng)
    resp, params, history = vi.run(resp, max_iter, tol)
    merges = 0
    while merges < K:
        best = None
        for j, k in _merge_order(params["m"], resp):
            trial = resp.copy()
            trial[:, j] += trial[:, k]
            trial[:, k] = 0.0
            t_resp, t_params, t_hist = vi.run(trial, max_iter, tol)
            if t_hist[-1] > history[-1] + 1e-9 * abs(history[-1]):
                best = (t_resp, t_params, t_hist[-1])
                break
        if best is None:
            break
        resp, params = best[0], best[1]
        history.append(best[2])
        merges += 1

    g1, g2, a, b, m = params["g1"], params["g2"], params["a"], params["b"], params["m"]
    ev = g1 / (g1 + g2)
    weights = np.concatenate([ev, [1.0]]) * np.concatenate([[1.0], np.cumprod(1 - ev)])
    weights = weights / weights.sum()
    var = np.broadcast_to(b / a, (K, 2)).copy()
    if covariance_kind == "spherical":
        var[:] = var[:, :1]
    var = np.maximum(var, VARIANCE_FLOOR)
    return MixtureDensity(weights=weights, means=m, variances=var, kind="dpmm",
                          covariance_kind=covariance_kind, history=history)


def _merge_order(means: np.ndarray, resp: np.ndarray):
    """Pairs of occupied components, closest means first; the larger absorbs the smaller."""
    Nk = resp.sum(0)
    live = [i for i in range(len(Nk)) if Nk[i] > 1e-8]
    pairs = []
    for ii, i in enumerate(live):
        for j in live[ii + 1:]:
            d = float(((means[i] - means[j]) ** 2).sum())
            keep, drop = (i, j) if Nk[i] >= Nk[j] else (j, i)
            pairs.append((d, keep, drop))
    return [(keep, drop) for _, keep, drop in sorted(pairs)]


class _DPMMState:
    """Coordinate-ascent updates for one data set and prior."""

    def __init__(self, x: np.ndarray, K: int, covariance_kind: str, prior: DPMMPrior):
        self.x = x
        self.K = K
        self.n, self.D = x.shape
        self.P = self.D if covariance_kind == "diagonal" else 1
        self.m0 = x.mean(axis=0)
        self.beta0 = prior.mean_precision
        self.a0 = prior.shape
        self.b0 = np.full(self.P, prior.shape * prior.scale_variance)
        self.alpha = prior.concentration

    def run(self, resp: np.ndarray, max_iter: int, tol: float):
        history: list[float] = []
        params = None
        for it in range(max_iter):
            params = self.update_globals(resp)
            resp, elbo = self.update_locals(params)
            history.append(elbo)
            if it > 0 and abs(history[-1] - history[-2]) < tol * self.n:
                break
        return resp, params, history

    def update_globals(self, resp: np.ndarray) -> dict:
        x, D, P = self.x, self.D, self.P
        Nk = resp.sum(0) + 1e-12
        xbar = resp.T @ x / Nk[:, None]
        sq = np.einsum("nk,nkd->kd", resp, (x[:, None, :] - xbar[None]) ** 2)  # N_k * S_k
        g1 = 1.0 + Nk[:-1]
        g2 = self.alpha + np.cumsum(Nk[::-1])[::-1][1:]
        beta = self.beta0 + Nk
        m = (self.beta0 * self.m0 + Nk[:, None] * xbar) / beta[:, None]
        b_dims = 0.5 * (sq + (self.beta0 * Nk / beta)[:, None] * (xbar - self.m0) ** 2)
        if P == 1:
            a = self.a0 + 0.5 * D * Nk[:, None]
            b = self.b0 + b_dims.sum(1, keepdims=True)
        else:
            a = self.a0 + 0.5 * Nk[:, None] * np.ones((1, P))
            b = self.b0 + b_dims
        return {"g1": g1, "g2": g2, "beta": beta, "m": m, "a": a, "b": b}

    def update_locals(self, p: dict):
        x, D, K = self.x, self.D, self.K
        g1, g2, beta, m, a, b = p["g1"], p["g2"], p["beta"], p["m"], p["a"], p["b"]
        e_log_lam = digamma(a) - np.log(b)  # (K, P)
        e_lam = a / b
        e_log_v = digamma(g1) - digamma(g1 + g2)
        e_log_1mv = digamma(g2) - digamma(g1 + g2)
        e_log_pi = np.concatenate([e_log_v, [0.0]]) + np.concatenate([[0.0], np.cumsum(e_log_1mv)])
        lam_d = np.broadcast_to(e_lam, (K, D))
        loglam_d = np.broadcast_to(e_log_lam, (K, D))
        quad = ((x[:, None, :] - m[None]) ** 2 * lam_d[None]).sum(-1) + (D / beta)[None, :]
        log_rho = e_log_pi[None, :] + 0.5 * loglam_d.sum(1)[None, :] - 0.5 * D * LOG_2PI - 0.5 * quad
        resp = np.exp(log_rho - logsumexp(log_rho, axis=1, keepdims=True))
        elbo = _dpmm_elbo(resp, log_rho, g1, g2, self.alpha, e_log_v, e_log_1mv, m, beta, a, b,
                          self.m0, self.beta0, self.a0, self.b0, e_log_lam, e_lam, D)
        return resp, elbo


def _dpmm_elbo(resp, log_rho, g1, g2, alpha, e_log_v, e_log_1mv,
               m, beta, a, b, m0, beta0, a0, b0, e_log_lam, e_lam, D):
    # E[log p(x, z | ...)] - E[log q(z)] collapses to sum_n logsumexp(log_rho)
    # only at the optimal q(z); compute the terms explicitly instead.
    with np.errstate(divide="ignore", invalid="ignore"):
        ent_z = -np.sum(np.where(resp > 0, resp * np.log(resp), 0.0))
    lik_and_z = np.sum(resp * log_rho)
    K = len(beta)
    # stick-breaking prior and posterior
    p_v = np.sum(math.log(alpha) + (alpha - 1) * e_log_1mv)
    q_v = np.sum(-betaln(g1, g2) + (g1 - 1) * e_log_v + (g2 - 1) * e_log_1mv)
    # Normal-Gamma prior and posterior; precision groups broadcast over dims
    lam_d = np.broadcast_to(e_lam, (K, D))
    loglam_d = np.broadcast_to(e_log_lam, (K, D))
    p_mu = np.sum(0.5 * math.log(beta0) - 0.5 * LOG_2PI + 0.5 * loglam_d
                  - 0.5 * beta0 * (lam_d * (m - m0) ** 2 + 1.0 / beta[:, None]))
    q_mu = np.sum(0.5 * np.log(beta)[:, None] - 0.5 * LOG_2PI + 0.5 * loglam_d - 0.5)
    p_lam = np.sum(a0 * np.log(b0)[None, :] - gammaln(a0) + (a0 - 1) * e_log_lam - b0[None, :] * e_lam)
    q_lam = np.sum(a * np.log(b) - gammaln(a) + (a - 1) * e_log_lam - a)
    return float(lik_and_z + ent_z + p_v - q_v + p_mu - q_mu + p_lam - q_lam)


# ---------------------------------------------------------------- GMM

def fit_gmm(points, n_components: int = 5, covariance_kind: str = "diagonal", seed: int = 0,
            tol: float = 1e-4, max_iter: int = 200) -> MixtureDensity:
    """Maximum-likelihood Gaussian mixture by EM; variances floored at ``VARIANCE_FLOOR``.

    ``history`` holds the total log-likelihood after every E-step.
    """
    _check_cov(covariance_kind)
    x = _as_array(points)
    deg = _degenerate(x, "gmm", covariance_kind)
    if deg is not None:
        return deg
    rng = np.random.default_rng(seed)
    K = min(max(1, int(n_components)), len(np.unique(x, axis=0)))
    n, D = x.shape
    resp = _initial_resp(x, K, rng)
    history: list[float] = []
    w = mu = var = None
    for it in range(max_iter):
        Nk = resp.sum(0) + 1e-12
        w = Nk / Nk.sum()
        mu = resp.T @ x / Nk[:, None]
        var = np.einsum("nk,nkd->kd", resp, (x[:, None, :] - mu[None]) ** 2) / Nk[:, None]
        if covariance_kind == "spherical":
            var = np.repeat(var.mean(1, keepdims=True), D, axis=1)
        var = np.maximum(var, VARIANCE_FLOOR)
        log_p = (np.log(w)[None, :] - 0.5 * (D * LOG_2PI + np.log(var).sum(1))[None, :]
                 - 0.5 * (((x[:, None, :] - mu[None]) ** 2) / var[None]).sum(-1))
        ll = logsumexp(log_p, axis=1)
        resp = np.exp(log_p - ll[:, None])
        history.append(float(ll.sum()))
        if it > 0 and abs(history[-1] - history[-2]) < tol * n:
            break
    return MixtureDensity(weights=w / w.sum(), means=mu, variances=var, kind="gmm",
                          covariance_kind=covariance_kind, history=history)


def fit_density(points, kind: str = "dpmm", n_components: int = 5, covariance_kind: str = "diagonal",
                seed: int = 0) -> MixtureDensity:
    if kind == "dpmm":
        return fit_dpmm(points, n_components, covariance_kind, seed)
    if kind == "gmm":
        return fit_gmm(points, n_components, covariance_kind, seed)
    raise ValueError(f"unknown density kind {kind!r}")
