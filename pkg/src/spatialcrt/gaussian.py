"""Dense Gaussian numerics: Cholesky, MVN density/sampling, conjugate GLS.

All covariance solves go through a lower Cholesky factor and triangular
solves; nothing in here forms an explicit inverse of an N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

LOG_2PI = float(np.log(2.0 * np.pi))

# Relative pivot threshold below which a factorization is treated as failed.
PIVOT_RTOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix has no acceptable Cholesky factorization.

    ``pivot_index`` is the 0-based index of the offending pivot.
    """

    def __init__(self, message: str, pivot_index: int):
        super().__init__(message)
        self.pivot_index = pivot_index


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor plus the log-determinant it implies."""

    lower: np.ndarray = field(repr=False)
    log_det: float

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """L^-1 b via forward substitution."""
        return solve_triangular(self.lower, b, lower=True, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """(L L')^-1 b via two triangular solves."""
        z = solve_triangular(self.lower, b, lower=True, check_finite=False)
        return solve_triangular(self.lower.T, z, lower=False, check_finite=False)


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate normal with dense mean and covariance."""

    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dimension(self) -> int:
        return self.mean.size

    @classmethod
    def iid(cls, k: int, mean: float = 0.0, variance: float = 1.0) -> "GaussianDist":
        return cls(np.full(k, mean), variance * np.eye(k))


def chol_factor(A: np.ndarray) -> CholFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefiniteError when LAPACK fails or when any pivot falls
    at or below PIVOT_RTOL times the largest diagonal entry of A.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = float(np.max(np.diag(A))) if A.size else 0.0
    try:
        L = cholesky(A, lower=True, check_finite=False)
    except LinAlgError as exc:
        # LAPACK reports the 1-based order of the failing leading minor.
        idx = getattr(exc, "info", None)
        if idx is None:
            digits = [int(s) for s in str(exc).split() if s.isdigit()]
            idx = digits[0] if digits else A.shape[0]
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (pivot {idx - 1})", idx - 1
        ) from exc
    diag = np.diag(L)
    bad = np.flatnonzero(diag * diag <= PIVOT_RTOL * scale)
    if bad.size:
        raise NotPositiveDefiniteError(
            f"pivot {bad[0]} is below tolerance ({diag[bad[0]]**2:.3e} <= "
            f"{PIVOT_RTOL:.0e} * {scale:.3e})",
            int(bad[0]),
        )
    log_det = 2.0 * float(np.sum(np.log(diag)))
    return CholFactor(lower=L, log_det=log_det)


def chol_with_jitter(A: np.ndarray, jitter_scale: float = 1e-8) -> CholFactor:
    """chol_factor with a single retry after adding jitter to the diagonal.

    The jitter is ``jitter_scale * mean(diag(A))``; failure after the retry
    propagates the NotPositiveDefiniteError.
    """
    try:
        return chol_factor(A)
    except NotPositiveDefiniteError:
        A = np.asarray(A, dtype=float)
        jitter = jitter_scale * float(np.mean(np.diag(A)))
        return chol_factor(A + jitter * np.eye(A.shape[0]))


def mvn_logpdf(y: np.ndarray, mu: np.ndarray, chol: CholFactor) -> float:
    """Log-density of N(mu, Sigma) at y, with Sigma given by its factor."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = chol.dimension
    if y.shape != (n,) or mu.shape not in ((n,), ()):
        raise ValueError(f"dimension mismatch: y {y.shape}, mu {np.shape(mu)}, factor {n}")
    u = chol.solve_lower(y - mu)
    return -0.5 * (n * LOG_2PI + chol.log_det + float(u @ u))


def mvn_sample(mu: np.ndarray, chol: CholFactor, rng: np.random.Generator) -> np.ndarray:
    """One draw mu + L z with z standard normal; deterministic given rng."""
    z = rng.standard_normal(chol.dimension)
    return np.asarray(mu, dtype=float) + chol.lower @ z


def gls_posterior(X: np.ndarray, y: np.ndarray, sigma_chol: CholFactor,
                  prior: GaussianDist) -> GaussianDist:
    """Conjugate Gaussian posterior of b in y ~ N(X b, Sigma), b ~ prior.

    Posterior precision is X' Sigma^-1 X + V0^-1 and the mean solves it
    against X' Sigma^-1 y + V0^-1 m0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != sigma_chol.dimension or X.shape[1] != prior.dimension:
        raise ValueError(f"shape mismatch: X {X.shape}, Sigma {sigma_chol.dimension}, "
                         f"prior dim {prior.dimension}")
    W = sigma_chol.solve_lower(X)
    u = sigma_chol.solve_lower(y)
    V0_chol = chol_factor(prior.cov)
    V0_inv = V0_chol.solve(np.eye(prior.dimension))
    P = W.T @ W + V0_inv
    try:
        P_chol = chol_factor(P)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            f"posterior precision is singular (pivot {exc.pivot_index})", exc.pivot_index
        ) from exc
    rhs = W.T @ u + V0_inv @ prior.mean
    mean = P_chol.solve(rhs)
    cov = P_chol.solve(np.eye(prior.dimension))
    cov = 0.5 * (cov + cov.T)
    return GaussianDist(mean=mean, cov=cov)


def marginal_loglik(X: np.ndarray, y: np.ndarray, sigma: np.ndarray,
                    prior: GaussianDist) -> float:
    """log p(y) with the coefficients of X integrated out under the prior.

    Formed directly as the density of N(X m0, Sigma + X V0 X'); the dense
    matrix is cheap at this problem size.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    A = sigma + X @ prior.cov @ X.T
    return mvn_logpdf(y, X @ prior.mean, chol_factor(A))


def gls_and_marginal(X: np.ndarray, y: np.ndarray, sigma_chol: CholFactor,
                     prior: GaussianDist) -> tuple[GaussianDist, float]:
    """Conditional coefficient posterior and marginal log-likelihood together.

    Shares one factorization of Sigma: the marginal uses the matrix
    determinant lemma and Woodbury form of N(X m0, Sigma + X V0 X'), which
    agrees with marginal_loglik to floating-point accuracy.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    W = sigma_chol.solve_lower(X)
    u_y = sigma_chol.solve_lower(y)
    u = u_y - W @ prior.mean  # whitened residual against the prior mean
    V0_chol = chol_factor(prior.cov)
    V0_inv = V0_chol.solve(np.eye(k))
    P = W.T @ W + V0_inv
    P_chol = chol_factor(P)
    Wu = W.T @ u
    # conditional posterior of the coefficients
    rhs = W.T @ u_y + V0_inv @ prior.mean
    mean = P_chol.solve(rhs)
    cov = P_chol.solve(np.eye(k))
    cov = 0.5 * (cov + cov.T)
    # marginal: log det(Sigma + X V0 X') = log det Sigma + log det P + log det V0
    log_det = sigma_chol.log_det + P_chol.log_det + V0_chol.log_det
    quad = float(u @ u) - float(Wu @ P_chol.solve(Wu))
    loglik = -0.5 * (n * LOG_2PI + log_det + quad)
    return GaussianDist(mean=mean, cov=cov), loglik
