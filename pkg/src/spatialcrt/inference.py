"""Model fitting: hyperparameter grid integration with exact Gaussian conditionals.

Every model here is Gaussian-likelihood with Gaussian fixed-effect priors, so
the coefficients integrate out in closed form and only the low-dimensional
hyperparameter posterior needs numerics: a Nelder-Mead mode search on
log-scale hyperparameters, curvature-scaled grid around the mode (full tensor
for <= 2 hyperparameters, cross-plus-diagonal for the spatial model's four),
and per-point conditional Gaussian posteriors. The posterior of the marginal
treatment effect is then a univariate Gaussian mixture.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .datagen import TrialData, aggregate_clusters
from .gaussian import (
    GaussianDist,
    NotPositiveDefiniteError,
    chol_factor,
    chol_with_jitter,
    gls_and_marginal,
)
from .geometry import KernelFamily, domain_diagonal, matern_corr, pairwise_distances
from .priors import FM_FE_VARIANCE, PriorSpec, default_priors


class ModelKind(str, enum.Enum):
    SMM = "smm"            # spatial mixed-effects model
    FM_NAIVE = "fm_naive"  # complete pooling, no cluster term
    FM = "fm"              # cluster dummies as fixed effects
    MM = "mm"              # cluster random intercept
    CLUSTER = "cluster"    # analysis of cluster-level means


HYPER_NAMES: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.SMM: ("sigma_w", "sigma_b", "tau", "phi"),
    ModelKind.MM: ("sigma_w", "sigma_b"),
    ModelKind.FM_NAIVE: ("sigma_w",),
    ModelKind.FM: ("sigma_w",),
    ModelKind.CLUSTER: ("sigma_w",),
}

# Mode search bounds (log scale) and grid construction constants.
_LOG_BOUND = 12.0
_PENALTY = 1e12
_CURVATURE_STEP = 0.1
_STEP_CLIP = (0.05, 2.0)
_WEIGHT_PRUNE = 1e-6
_MAXFEV_PER_DIM = 400


class InferenceError(RuntimeError):
    """Hyperparameter mode search failed; carries the best point found."""

    def __init__(self, message: str, best_log_hyper: dict[str, float] | None = None):
        super().__init__(message)
        self.best_log_hyper = best_log_hyper


@dataclass(frozen=True)
class HyperPoint:
    """One hyperparameter grid point with its conditional coefficient posterior."""

    log_sigma_w: float
    log_sigma_b: float | None
    log_tau: float | None
    log_phi: float | None
    log_weight: float
    conditional: GaussianDist

    def log_values(self) -> dict[str, float]:
        vals = {"sigma_w": self.log_sigma_w, "sigma_b": self.log_sigma_b,
                "tau": self.log_tau, "phi": self.log_phi}
        return {k: v for k, v in vals.items() if v is not None}

    def values(self) -> dict[str, float]:
        return {k: math.exp(v) for k, v in self.log_values().items()}


@dataclass(frozen=True)
class HyperGrid:
    """Weighted hyperparameter points: a Gaussian-mixture posterior over coefficients."""

    points: list[HyperPoint]
    mode: dict[str, float]          # log-scale hyperparameters at the posterior mode
    mode_loglik: float              # marginal log-likelihood at the mode
    mode_logpost: float             # unnormalized log posterior at the mode

    @property
    def weights(self) -> np.ndarray:
        return np.exp([p.log_weight for p in self.points])

    def mode_values(self) -> dict[str, float]:
        return {k: math.exp(v) for k, v in self.mode.items()}


@dataclass(frozen=True)
class EffectPosterior:
    """Univariate Gaussian mixture for the marginal treatment effect."""

    weights: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)
    sds: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_1d(np.asarray(self.means, dtype=float))
        s = np.atleast_1d(np.asarray(self.sds, dtype=float))
        if not (w.size == m.size == s.size):
            raise ValueError("component arrays must have equal length")
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValueError(f"weights must sum to 1, got {w.sum()}")
        if np.any(s <= 0):
            raise ValueError("component sds must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sds", s)

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def sd(self) -> float:
        mu = self.mean()
        second = self.weights @ (self.sds ** 2 + self.means ** 2)
        return float(math.sqrt(max(second - mu * mu, 0.0)))

    def cdf(self, x: float) -> float:
        return float(self.weights @ ndtr((x - self.means) / self.sds))


def _covariate_labels(k: int) -> list[str]:
    if k == 1:
        return ["x"]
    return [f"x{j + 1}" for j in range(k)]


def build_design(data: TrialData, kind: ModelKind,
                 include_intercept: bool = True) -> tuple[np.ndarray, list[str]]:
    """Design matrix and coefficient labels for one model.

    Individual-level models use [const, z, x..., z:x...]; the fixed-effects
    model appends cluster dummies with cluster 1 as the reference; the
    cluster-level model applies the same structure to cluster means.
    """
    if kind == ModelKind.CLUSTER:
        _, xbar, z = aggregate_clusters(data)
        z = z.astype(float)
        x = xbar
    else:
        z = data.z_individual.astype(float)
        x = data.x
    k = x.shape[1]
    cols = []
    labels = []
    if include_intercept:
        cols.append(np.ones_like(z))
        labels.append("const")
    cols.append(z)
    labels.append("z")
    xl = _covariate_labels(k)
    for j in range(k):
        cols.append(x[:, j])
        labels.append(xl[j])
    for j in range(k):
        cols.append(z * x[:, j])
        labels.append(f"z:{xl[j]}")
    if kind == ModelKind.FM:
        for c in range(1, data.n_clusters):
            cols.append((data.cluster_of == c).astype(float))
            labels.append(f"cluster[{c + 1}]")
    return np.column_stack(cols), labels


def build_covariance(kind: ModelKind, hyper, data: TrialData,
                     family: KernelFamily = KernelFamily.EXPONENTIAL,
                     nu: float = 0.5) -> np.ndarray:
    """Outcome covariance for a model at fixed hyperparameters.

    ``hyper`` maps hyperparameter names to natural-scale values (standard
    deviations; phi is the range). The spatial model returns an N x N matrix,
    the cluster-level model an I x I one.
    """
    if isinstance(hyper, HyperPoint):
        hyper = hyper.values()
    sw2 = float(hyper["sigma_w"]) ** 2
    if kind == ModelKind.CLUSTER:
        return sw2 * np.eye(data.n_clusters)
    n = data.n
    if kind in (ModelKind.FM_NAIVE, ModelKind.FM):
        return sw2 * np.eye(n)
    sb2 = float(hyper["sigma_b"]) ** 2
    block = sb2 * (data.cluster_of[:, None] == data.cluster_of[None, :])
    if kind == ModelKind.MM:
        return block + sw2 * np.eye(n)
    if kind == ModelKind.SMM:
        phi = float(hyper["phi"])
        tau2 = float(hyper["tau"]) ** 2
        d = pairwise_distances(data.locations)
        if family == KernelFamily.EXPONENTIAL:
            H = np.exp(-d / phi)
        else:
            H = matern_corr(d, phi, nu)
            np.fill_diagonal(H, 1.0)
        return tau2 * H + block + sw2 * np.eye(n)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Likelihood backends: each evaluates the coefficient-marginalized
# log-likelihood and the conditional coefficient posterior at one
# hyperparameter setting. The structured paths are algebraically identical to
# chol + gls on the dense covariance and are tested against it.
# ---------------------------------------------------------------------------

_LOG_2PI = float(np.log(2.0 * np.pi))


class _IidBackend:
    """Sigma = sigma_w^2 I; sufficient statistics X'X, X'y, y'y."""

    def __init__(self, X: np.ndarray, y: np.ndarray, prior: PriorSpec):
        self.n, self.k = X.shape
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        self.m0 = np.full(self.k, prior.fe_mean)
        self.v0 = prior.fe_variance

    def evaluate(self, hyper: dict[str, float]) -> tuple[float, GaussianDist]:
        s2 = hyper["sigma_w"] ** 2
        return _loglik_from_stats(self.XtX / s2, self.Xty / s2, self.yty / s2,
                                  self.n * math.log(s2), self.n,
                                  self.m0, self.v0)


class _ClusterSumBackend:
    """Sigma = sigma_b^2 C'C + sigma_w^2 I over equal-size clusters.

    Uses the block Sherman-Morrison identity: Sigma^-1 = (I - a C'C) / sigma_w^2
    with a = sigma_b^2 / (sigma_w^2 + m sigma_b^2), so only per-cluster sums
    of X and y are needed.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, cluster_of: np.ndarray,
                 prior: PriorSpec):
        self.n, self.k = X.shape
        self.n_clusters = int(cluster_of.max()) + 1
        self.m = self.n // self.n_clusters
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        self.Sx = np.zeros((self.n_clusters, self.k))
        np.add.at(self.Sx, cluster_of, X)
        self.Sy = np.zeros(self.n_clusters)
        np.add.at(self.Sy, cluster_of, y)
        self.m0 = np.full(self.k, prior.fe_mean)
        self.v0 = prior.fe_variance

    def evaluate(self, hyper: dict[str, float]) -> tuple[float, GaussianDist]:
        s2 = hyper["sigma_w"] ** 2
        b2 = hyper["sigma_b"] ** 2
        a = b2 / (s2 + self.m * b2)
        XtSiX = (self.XtX - a * self.Sx.T @ self.Sx) / s2
        XtSiy = (self.Xty - a * self.Sx.T @ self.Sy) / s2
        ytSiy = (self.yty - a * float(self.Sy @ self.Sy)) / s2
        logdet = ((self.n - self.n_clusters) * math.log(s2)
                  + self.n_clusters * math.log(s2 + self.m * b2))
        return _loglik_from_stats(XtSiX, XtSiy, ytSiy, logdet, self.n,
                                  self.m0, self.v0)


def _loglik_from_stats(XtSiX, XtSiy, ytSiy, logdet_sigma, n, m0, v0):
    """Marginal loglik and conditional posterior from whitened cross-products."""
    k = m0.size
    P = XtSiX + np.eye(k) / v0
    P_chol = chol_factor(P)
    mean = P_chol.solve(XtSiy + m0 / v0)
    cov = P_chol.solve(np.eye(k))
    cov = 0.5 * (cov + cov.T)
    XtSir = XtSiy - XtSiX @ m0
    rtSir = ytSiy - 2.0 * float(m0 @ XtSiy) + float(m0 @ XtSiX @ m0)
    quad = rtSir - float(XtSir @ P_chol.solve(XtSir))
    logdet = logdet_sigma + P_chol.log_det + k * math.log(v0)
    loglik = -0.5 * (n * _LOG_2PI + logdet + quad)
    return loglik, GaussianDist(mean=mean, cov=cov)


class _SpatialBackend:
    """Dense path for the spatial model: one Cholesky per evaluation."""

    def __init__(self, X: np.ndarray, y: np.ndarray, data: TrialData,
                 prior: PriorSpec, family: KernelFamily, nu: float):
        self.X = X
        self.y = y
        self.n = data.n
        self.dist = pairwise_distances(data.locations)
        self.family = family
        self.nu = nu
        self.prior_dist = GaussianDist.iid(X.shape[1], prior.fe_mean, prior.fe_variance)
        self._buf = np.empty_like(self.dist)
        # contiguous cluster runs allow cheap in-place block adds; arbitrary
        # row orders fall back to a precomputed same-cluster mask
        cluster_of = data.cluster_of
        edges = np.flatnonzero(np.diff(cluster_of) != 0) + 1
        starts = np.concatenate([[0], edges])
        stops = np.concatenate([edges, [self.n]])
        if len(starts) == data.n_clusters:
            self._block_slices = list(zip(starts, stops))
            self._block_mask = None
        else:
            self._block_slices = None
            self._block_mask = (cluster_of[:, None] == cluster_of[None, :]).astype(float)

    def _assemble(self, hyper: dict[str, float]) -> np.ndarray:
        tau2 = hyper["tau"] ** 2
        phi = hyper["phi"]
        buf = self._buf
        if self.family == KernelFamily.EXPONENTIAL:
            np.multiply(self.dist, -1.0 / phi, out=buf)
            np.exp(buf, out=buf)
        else:
            buf[...] = matern_corr(self.dist, phi, self.nu)
            np.fill_diagonal(buf, 1.0)
        buf *= tau2
        sb2 = hyper["sigma_b"] ** 2
        if self._block_slices is not None:
            for lo, hi in self._block_slices:
                buf[lo:hi, lo:hi] += sb2
        else:
            buf += sb2 * self._block_mask
        buf[np.diag_indices(self.n)] += hyper["sigma_w"] ** 2
        return buf

    def evaluate(self, hyper: dict[str, float]) -> tuple[float, GaussianDist]:
        sigma = self._assemble(hyper)
        chol = chol_with_jitter(sigma)
        cond, loglik = gls_and_marginal(self.X, self.y, chol, self.prior_dist)
        return loglik, cond


def _make_backend(kind: ModelKind, data: TrialData, X: np.ndarray, y: np.ndarray,
                  prior: PriorSpec, family: KernelFamily, nu: float):
    if kind == ModelKind.SMM:
        return _SpatialBackend(X, y, data, prior, family, nu)
    if kind == ModelKind.MM:
        return _ClusterSumBackend(X, y, data.cluster_of, prior)
    return _IidBackend(X, y, prior)


def _start_values(kind: ModelKind, data: TrialData, y: np.ndarray) -> dict[str, float]:
    """Moment-based starting point: pooled variance split equally among the
    model's variance components; phi starts at half the domain diagonal."""
    v = max(float(np.var(y, ddof=1)), 1e-8)
    names = HYPER_NAMES[kind]
    n_var = len([n for n in names if n != "phi"])
    start = {n: math.sqrt(v / n_var) for n in names if n != "phi"}
    if "phi" in names:
        start["phi"] = max(domain_diagonal(data.locations) / 2.0, 1e-3)
    return start


def hyper_posterior(kind: ModelKind, data: TrialData, priors: PriorSpec | None = None,
                    *, family: KernelFamily = KernelFamily.EXPONENTIAL,
                    nu: float = 0.5,
                    fixed: dict[str, float] | None = None) -> HyperGrid:
    """Posterior over a model's hyperparameters as a weighted grid.

    The mode of log p(y | hyper) + log prior (log scale, with Jacobian) is
    found by Nelder-Mead; a grid scaled by the local curvature is placed
    around it and weighted by the unnormalized posterior; every point carries
    the exact conditional Gaussian posterior of the fixed effects. Passing
    ``fixed`` pins the hyperparameters to a single unit-weight point.
    """
    if priors is None:
        priors = _model_priors(kind)
    X, _ = build_design(data, kind)
    y = aggregate_clusters(data)[0] if kind == ModelKind.CLUSTER else data.y
    names = HYPER_NAMES[kind]
    backend = _make_backend(kind, data, X, y, priors, family, nu)

    if fixed is not None:
        missing = [n for n in names if n not in fixed]
        if missing:
            raise ValueError(f"fixed hyperparameters missing {missing}")
        hyper = {n: float(fixed[n]) for n in names}
        loglik, cond = backend.evaluate(hyper)
        log_mode = {n: math.log(hyper[n]) for n in names}
        point = _make_point(log_mode, 0.0, cond, names)
        return HyperGrid(points=[point], mode=log_mode, mode_loglik=loglik,
                         mode_logpost=loglik + _log_prior(priors, hyper, names))

    def objective(log_h: np.ndarray) -> float:
        over = np.abs(log_h) - _LOG_BOUND
        if np.any(over > 0):
            return _PENALTY * (1.0 + float(over[over > 0].sum()))
        hyper = {n: math.exp(v) for n, v in zip(names, log_h)}
        try:
            loglik, _ = backend.evaluate(hyper)
        except NotPositiveDefiniteError:
            return _PENALTY
        return -(loglik + _log_prior(priors, hyper, names))

    start = _start_values(kind, data, y)
    x0 = np.array([math.log(start[n]) for n in names])
    simplex = np.vstack([x0] + [x0 + 0.5 * e for e in np.eye(len(names))])
    maxfev = _MAXFEV_PER_DIM * len(names)
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"xatol": 1e-3, "fatol": 1e-6, "maxfev": maxfev,
                            "initial_simplex": simplex})
    best_log = {n: float(v) for n, v in zip(names, res.x)}
    if not res.success:
        raise InferenceError(
            f"hyperparameter mode search for {kind.value} did not converge "
            f"within {maxfev} evaluations", best_log)
    mode = np.asarray(res.x, dtype=float)
    f0 = float(res.fun)

    steps = np.empty(len(names))
    for d in range(len(names)):
        e = np.zeros(len(names))
        e[d] = _CURVATURE_STEP
        curv = (objective(mode + e) + objective(mode - e) - 2.0 * f0) / _CURVATURE_STEP ** 2
        steps[d] = 1.0 / math.sqrt(curv) if curv > 0 else 0.75
    np.clip(steps, *_STEP_CLIP, out=steps)

    offsets = _grid_offsets(len(names))
    log_points = mode[None, :] + offsets * steps[None, :]
    log_posts = np.empty(len(log_points))
    conds: list[GaussianDist | None] = [None] * len(log_points)
    mode_loglik = None
    for i, lp in enumerate(log_points):
        hyper = {n: math.exp(v) for n, v in zip(names, lp)}
        try:
            loglik, cond = backend.evaluate(hyper)
        except NotPositiveDefiniteError:
            log_posts[i] = -np.inf
            continue
        log_posts[i] = loglik + _log_prior(priors, hyper, names)
        conds[i] = cond
        if np.all(offsets[i] == 0):
            mode_loglik = loglik

    finite = np.isfinite(log_posts)
    if not finite.any():
        raise InferenceError(
            f"all grid points for {kind.value} failed to factorize", best_log)
    if mode_loglik is None:
        mode_loglik = math.nan
    rel = log_posts - log_posts[finite].max()
    weights = np.where(finite, np.exp(np.where(finite, rel, 0.0)), 0.0)
    keep = weights >= _WEIGHT_PRUNE * weights.max()
    weights = weights[keep]
    weights /= weights.sum()
    points = [
        _make_point({n: float(v) for n, v in zip(names, lp)}, math.log(w), cond, names)
        for lp, w, cond in zip(log_points[keep], weights,
                               [c for c, k_ in zip(conds, keep) if k_])
    ]
    return HyperGrid(points=points, mode=best_log,
                     mode_loglik=float(mode_loglik), mode_logpost=-f0)


def _model_priors(kind: ModelKind) -> PriorSpec:
    if kind == ModelKind.FM:
        return default_priors(fe_variance=FM_FE_VARIANCE)
    return default_priors()


def _log_prior(priors: PriorSpec, hyper: dict[str, float], names) -> float:
    """Prior log-density on the log scale (natural density plus Jacobian)."""
    total = 0.0
    for n in names:
        total += priors.hyper_logpdf(n, hyper[n]) + math.log(hyper[n])
    return total


def _grid_offsets(ndim: int) -> np.ndarray:
    """Integer offset stencil: full tensor {-2..2}^d for d <= 2, else a
    cross (axial +-1, +-2) plus the (+-1)^d diagonal corners."""
    if ndim <= 2:
        return np.array(list(itertools.product((-2, -1, 0, 1, 2), repeat=ndim)),
                        dtype=float)
    rows = [np.zeros(ndim)]
    for d in range(ndim):
        for step in (-2, -1, 1, 2):
            r = np.zeros(ndim)
            r[d] = step
            rows.append(r)
    for corner in itertools.product((-1, 1), repeat=ndim):
        rows.append(np.array(corner, dtype=float))
    return np.vstack(rows)


def _make_point(log_vals: dict[str, float], log_weight: float,
                cond: GaussianDist, names) -> HyperPoint:
    return HyperPoint(
        log_sigma_w=log_vals["sigma_w"],
        log_sigma_b=log_vals.get("sigma_b") if "sigma_b" in names else None,
        log_tau=log_vals.get("tau") if "tau" in names else None,
        log_phi=log_vals.get("phi") if "phi" in names else None,
        log_weight=float(log_weight),
        conditional=cond,
    )


def marginal_effect(grid: HyperGrid, data: TrialData, kind: ModelKind) -> EffectPosterior:
    """Posterior of the marginal treatment effect theta = mu1 - mu0.

    theta = beta + xbar1'(gamma + delta) - xbar0'gamma with xbar1/xbar0 the
    observed arm-wise covariate means, a linear functional of the coefficient
    vector; each grid point maps to one Gaussian mixture component.
    """
    z = data.z_individual.astype(bool)
    if not z.any() or z.all():
        raise ValueError("both arms need at least one cluster for a marginal effect")
    xbar1 = data.x[z].mean(axis=0)
    xbar0 = data.x[~z].mean(axis=0)
    _, labels = build_design(data, kind)
    k = data.x.shape[1]
    xl = _covariate_labels(k)
    a = np.zeros(len(labels))
    a[labels.index("z")] = 1.0
    for j in range(k):
        a[labels.index(xl[j])] = xbar1[j] - xbar0[j]
        a[labels.index(f"z:{xl[j]}")] = xbar1[j]
    weights, means, sds = [], [], []
    for p in grid.points:
        weights.append(math.exp(p.log_weight))
        means.append(float(a @ p.conditional.mean))
        sds.append(math.sqrt(max(float(a @ p.conditional.cov @ a), 1e-300)))
    w = np.asarray(weights)
    return EffectPosterior(weights=w / w.sum(), means=np.asarray(means),
                           sds=np.asarray(sds))


@dataclass(frozen=True)
class FitResult:
    """A fitted model: hyperparameter grid plus marginal-effect posterior."""

    kind: ModelKind
    grid: HyperGrid
    effect: EffectPosterior

    @property
    def post_mean(self) -> float:
        return self.effect.mean()

    @property
    def post_sd(self) -> float:
        return self.effect.sd()

    def diagnostics(self) -> dict:
        """Fit summary for export: mode, grid size, loglik, mixture components."""
        return {
            "model": self.kind.value,
            "hyper_mode": self.grid.mode_values(),
            "n_grid_points": len(self.grid.points),
            "mode_loglik": self.grid.mode_loglik,
            "post_mean": self.post_mean,
            "post_sd": self.post_sd,
            "components": [
                {"weight": float(w), "mean": float(m), "sd": float(s)}
                for w, m, s in zip(self.effect.weights, self.effect.means,
                                   self.effect.sds)
            ],
        }

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics(), sort_keys=True, indent=2)


def fit(kind: ModelKind, data: TrialData, priors: PriorSpec | None = None,
        *, family: KernelFamily = KernelFamily.EXPONENTIAL, nu: float = 0.5,
        fixed: dict[str, float] | None = None) -> FitResult:
    """Fit one model to a trial and return grid plus effect posterior."""
    grid = hyper_posterior(kind, data, priors, family=family, nu=nu, fixed=fixed)
    effect = marginal_effect(grid, data, kind)
    return FitResult(kind=kind, grid=grid, effect=effect)


def prob_exceeds(post: EffectPosterior, delta: float) -> float:
    """P(theta > delta) under the mixture, in closed form."""
    return float(post.weights @ ndtr((post.means - delta) / post.sds))


def credible_interval(post: EffectPosterior, level: float) -> tuple[float, float]:
    """Equal-tailed credible interval from the mixture CDF by bisection."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0,1), got {level}")
    tail = (1.0 - level) / 2.0
    lo_bracket = float(np.min(post.means - 12.0 * post.sds))
    hi_bracket = float(np.max(post.means + 12.0 * post.sds))

    def quantile(p: float) -> float:
        lo, hi = lo_bracket, hi_bracket
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            if post.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return quantile(tail), quantile(1.0 - tail)
