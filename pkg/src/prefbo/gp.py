"""ARD RBF covariances, Cholesky factorization, and GP prediction.

Latent utilities are modeled with a zero-mean Gaussian process whose
covariance is the squared-exponential kernel with one length-scale per
input dimension:

    k(x, y) = v * exp(-0.5 * sum_d (x_d - y_d)^2 / l_d^2)

A small diagonal jitter keeps the factorization positive definite; on
failure it escalates geometrically before raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "KernelHyper",
    "CovMatrix",
    "NumericalDegeneracyError",
    "rbf",
    "rbf_cross",
    "covariance",
    "gp_predict",
]

#: starting jitter as a fraction of the kernel variance
JITTER_SCALE = 1e-6
#: jitter escalation gives up at this fraction of the kernel variance
JITTER_CEILING = 1e-2


class NumericalDegeneracyError(np.linalg.LinAlgError):
    """Covariance factorization failed even after jitter escalation."""


@dataclass(frozen=True)
class KernelHyper:
    """ARD RBF hyperparameters.

    Parameters
    ----------
    lengthscales :
        Per-dimension positive length-scales, shape (D,).
    variance :
        Kernel variance (the k(x, x) value), strictly positive.
    jitter :
        Diagonal jitter added to covariance matrices.  ``None`` selects
        ``JITTER_SCALE * variance``.
    """

    lengthscales: np.ndarray
    variance: float = 1.0
    jitter: float | None = None

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a non-empty 1-D vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError("lengthscales must be finite and positive")
        object.__setattr__(self, "lengthscales", ls)
        if not np.isfinite(self.variance) or self.variance <= 0:
            raise ValueError("kernel variance must be finite and positive")
        if self.jitter is not None and self.jitter <= 0:
            raise ValueError("jitter must be positive")

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @property
    def base_jitter(self) -> float:
        return self.jitter if self.jitter is not None else JITTER_SCALE * self.variance


@dataclass(frozen=True)
class CovMatrix:
    """Covariance of the training points, with its Cholesky factor.

    ``K`` already includes ``jitter`` on the diagonal; ``chol`` is the
    lower-triangular factor of that same matrix.
    """

    K: np.ndarray
    chol: np.ndarray
    jitter: float
    hyper: KernelHyper = field(repr=False)

    @property
    def n(self) -> int:
        return self.K.shape[0]


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("points must form an (N, D) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return X


def rbf(x_i, x_j, hyper: KernelHyper) -> float:
    """Evaluate the ARD RBF kernel between two points."""
    a = np.asarray(x_i, dtype=float).ravel()
    b = np.asarray(x_j, dtype=float).ravel()
    if a.size != b.size or a.size != hyper.dim:
        raise ValueError(
            f"dimension mismatch: points have {a.size} and {b.size} coords, "
            f"kernel has {hyper.dim} length-scales"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("kernel inputs must be finite")
    r2 = np.sum(((a - b) / hyper.lengthscales) ** 2)
    return float(hyper.variance * np.exp(-0.5 * r2))


def rbf_cross(A, B, hyper: KernelHyper) -> np.ndarray:
    """Cross-covariance matrix k(A_i, B_j), shape (n, m).  No jitter."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[1] != hyper.dim or B.shape[1] != hyper.dim:
        raise ValueError("dimension mismatch between points and length-scales")
    diff = A[:, None, :] - B[None, :, :]
    r2 = np.sum((diff / hyper.lengthscales) ** 2, axis=-1)
    return hyper.variance * np.exp(-0.5 * r2)


def _nearest_pair(X: np.ndarray) -> tuple[int, int, float]:
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return int(min(i, j)), int(max(i, j)), float(dist[i, j])


def covariance(X, hyper: KernelHyper) -> CovMatrix:
    """Build the jittered training covariance and factorize it.

    The jitter starts at ``hyper.base_jitter`` and escalates tenfold on
    Cholesky failure, up to ``JITTER_CEILING * variance``; past that a
    :class:`NumericalDegeneracyError` names the nearest pair of points.
    """
    X = _as_points(X)
    if X.shape[0] < 1:
        raise ValueError("covariance requires at least one point")
    K0 = rbf_cross(X, X, hyper)
    jitter = hyper.base_jitter
    ceiling = JITTER_CEILING * hyper.variance
    while True:
        K = K0 + jitter * np.eye(X.shape[0])
        try:
            chol = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            if jitter * 10 <= ceiling:
                jitter *= 10
                continue
            i, j, dist = _nearest_pair(X)
            raise NumericalDegeneracyError(
                f"covariance not positive definite up to jitter {jitter:.1e}; "
                f"nearest points are #{i} and #{j} at distance {dist:.3e}"
            ) from None
        return CovMatrix(K=K, chol=chol, jitter=jitter, hyper=hyper)


def gp_predict(x_star, X, cov: CovMatrix, f) -> tuple[float, float]:
    """Predictive mean and variance of the latent function at ``x_star``.

    Conditions the GP on sampled latent values ``f`` at the training
    points ``X`` whose factorized covariance is ``cov``:

        mu = k*' K^-1 f        s2 = k(x*, x*) - k*' K^-1 k*

    Negative round-off variances are clamped to zero.
    """
    X = _as_points(X)
    f = np.asarray(f, dtype=float).ravel()
    if f.size != X.shape[0]:
        raise ValueError("f must have one entry per training point")
    k_star = rbf_cross(x_star, X, cov.hyper).ravel()
    v = solve_triangular(cov.chol, k_star, lower=True)
    w = solve_triangular(cov.chol, f, lower=True)
    mu = float(v @ w)
    s2 = float(cov.hyper.variance - v @ v)
    return mu, max(s2, 0.0)
