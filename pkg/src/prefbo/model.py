"""Tie-supporting Bradley-Terry likelihood and the model's log joint density.

A pairwise judgment between points with latent utilities f1 and f2 is a
three-way categorical draw.  With d = (f1 - f2) / sqrt(2 * sigma_p^2),
z1 = sigmoid(d), z2 = 1 - z1, and tie parameter beta >= 1:

    P(first worse)  = z2 / (z2 + beta * z1)
    P(equivalent)   = (beta^2 - 1) * z1 * z2
                      / ((z1 + beta * z2) * (z2 + beta * z1))
    P(first better) = 1 - P(first worse) - P(equivalent)

beta = 1 collapses to the binary Bradley-Terry model (ties impossible);
larger beta moves mass into the equivalence outcome.

The log joint adds standard-normal priors on the kernel pre-length-scales
gamma, a zero-mean GP prior on the utilities f, and the comparison
likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .gp import KernelHyper, covariance

__all__ = [
    "Outcome",
    "ComparisonRecord",
    "ModelHyper",
    "LatentState",
    "stable_sigmoid",
    "lengthscale_transform",
    "tie_probabilities",
    "comparison_log_probs",
    "log_likelihood",
    "log_joint",
]

#: floor for log-probabilities; keeps saturated comparisons finite
LOG_FLOOR = -745.0

#: default tie parameter when none is configured
DEFAULT_BETA = 1.5


class Outcome(IntEnum):
    """Result of one pairwise comparison, wire-encoded as -1 / 0 / +1."""

    FIRST_WORSE = -1
    EQUIVALENT = 0
    FIRST_BETTER = 1


@dataclass(frozen=True)
class ComparisonRecord:
    """One observed judgment between points ``i`` and ``j`` of the design X."""

    i: int
    j: int
    outcome: Outcome

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("a comparison needs two distinct points")
        object.__setattr__(self, "outcome", Outcome(self.outcome))


@dataclass(frozen=True)
class ModelHyper:
    """Fixed hyperparameters of the preference model.

    ``alpha`` holds the per-dimension (low, high) length-scale bounds used
    by :func:`lengthscale_transform`; ``beta`` is the tie parameter;
    ``sigma_p`` scales the comparison noise; ``kernel_variance`` is the
    RBF amplitude.
    """

    alpha: np.ndarray
    beta: float = DEFAULT_BETA
    sigma_p: float = 1.0
    kernel_variance: float = 1.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 2 or alpha.shape[1] != 2:
            raise ValueError("alpha must be a (D, 2) array of bounds")
        if np.any(alpha[:, 0] <= 0) or np.any(alpha[:, 0] >= alpha[:, 1]):
            raise ValueError("length-scale bounds must satisfy 0 < low < high")
        object.__setattr__(self, "alpha", alpha)
        if self.beta < 1.0:
            raise ValueError("tie parameter beta must be >= 1")
        if self.sigma_p <= 0:
            raise ValueError("sigma_p must be positive")
        if self.kernel_variance <= 0:
            raise ValueError("kernel_variance must be positive")

    @property
    def dim(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def for_box(cls, box, beta: float = DEFAULT_BETA, sigma_p: float = 1.0,
                kernel_variance: float = 1.0) -> "ModelHyper":
        """Default hyperparameters for a bounding box.

        Length-scale bounds default to (0.05, 2.0) times the box width in
        each dimension; zero-width dimensions fall back to (0.05, 2.0).
        """
        box = np.asarray(box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] == 0:
            raise ValueError("box must be a non-empty list of (low, high) pairs")
        widths = box[:, 1] - box[:, 0]
        widths = np.where(widths > 0, widths, 1.0)
        alpha = np.stack([0.05 * widths, 2.0 * widths], axis=1)
        return cls(alpha=alpha, beta=beta, sigma_p=sigma_p,
                   kernel_variance=kernel_variance)

    def kernel_hyper(self, theta: np.ndarray) -> KernelHyper:
        return KernelHyper(lengthscales=theta, variance=self.kernel_variance)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "sigma_p": self.sigma_p,
            "kernel_variance": self.kernel_variance,
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelHyper":
        return cls(alpha=np.asarray(d["alpha"], dtype=float), beta=d["beta"],
                   sigma_p=d["sigma_p"], kernel_variance=d["kernel_variance"])


@dataclass(frozen=True)
class LatentState:
    """Joint latent variables: utilities ``f`` and pre-length-scales ``gamma``."""

    f: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).ravel())
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).ravel())


def stable_sigmoid(x):
    """1 / (1 + exp(-x)) without overflow for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def lengthscale_transform(gamma, alpha) -> np.ndarray:
    """Squash unbounded ``gamma`` into the length-scale bounds ``alpha``.

    theta_d = sigmoid(gamma_d) * (high_d - low_d) + low_d, so theta stays
    strictly inside (low_d, high_d) and is increasing in gamma_d.
    """
    gamma = np.asarray(gamma, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if gamma.shape[-1] != alpha.shape[0]:
        raise ValueError("gamma and alpha dimensions differ")
    low, high = alpha[:, 0], alpha[:, 1]
    return stable_sigmoid(gamma) * (high - low) + low


def _log1p_exp(x):
    """log(1 + exp(x)), stable (softplus)."""
    return np.logaddexp(0.0, x)


def comparison_log_probs(d, beta: float):
    """Log-probabilities (log P(worse), log P(equiv), log P(better)).

    ``d`` is the scaled utility difference (f1 - f2) / sqrt(2 sigma_p^2);
    accepts scalars or arrays.  Saturated inputs stay finite through
    log-domain evaluation; results are floored at ``LOG_FLOOR``.
    """
    if beta < 1.0:
        raise ValueError("tie parameter beta must be >= 1")
    d = np.asarray(d, dtype=float)
    log_z1 = -_log1p_exp(-d)
    log_z2 = -_log1p_exp(d)
    log_beta = np.log(beta)
    # log(z2 + beta z1) and log(z1 + beta z2)
    log_a = np.logaddexp(log_z2, log_beta + log_z1)
    log_b = np.logaddexp(log_z1, log_beta + log_z2)
    log_worse = log_z2 - log_a
    log_better = log_z1 - log_b
    if beta == 1.0:
        log_equiv = np.full_like(d, -np.inf)
    else:
        log_equiv = np.log(beta**2 - 1.0) + log_z1 + log_z2 - log_a - log_b
    floor = LOG_FLOOR
    return (np.maximum(log_worse, floor),
            np.maximum(log_equiv, floor) if beta > 1.0 else log_equiv,
            np.maximum(log_better, floor))


def tie_probabilities(f1: float, f2: float, beta: float,
                      sigma_p: float) -> tuple[float, float, float]:
    """Three-way outcome probabilities for utilities ``f1`` vs ``f2``.

    Returns (P(first worse), P(equivalent), P(first better)); the last is
    computed as one minus the other two.  beta = 1 gives an exact zero
    tie probability.
    """
    if sigma_p <= 0:
        raise ValueError("sigma_p must be positive")
    d = (f1 - f2) / np.sqrt(2.0 * sigma_p**2)
    log_worse, log_equiv, _ = comparison_log_probs(d, beta)
    p_worse = float(np.exp(log_worse))
    p_equiv = float(np.exp(log_equiv)) if np.isfinite(log_equiv) else 0.0
    # complement can round a hair below zero when p_worse saturates
    p_better = max(1.0 - p_worse - p_equiv, 0.0)
    return p_worse, p_equiv, p_better


def log_likelihood(comparisons, f, hyper: ModelHyper) -> float:
    """Sum of log outcome probabilities over the comparison list."""
    if not comparisons:
        return 0.0
    f = np.asarray(f, dtype=float).ravel()
    idx_i = np.array([c.i for c in comparisons])
    idx_j = np.array([c.j for c in comparisons])
    if idx_i.max() >= f.size or idx_j.max() >= f.size or min(idx_i.min(), idx_j.min()) < 0:
        raise IndexError("comparison references a point outside f")
    d = (f[idx_i] - f[idx_j]) / np.sqrt(2.0 * hyper.sigma_p**2)
    log_worse, log_equiv, log_better = comparison_log_probs(d, hyper.beta)
    outcomes = np.array([int(c.outcome) for c in comparisons])
    total = np.where(
        outcomes == Outcome.FIRST_WORSE, log_worse,
        np.where(outcomes == Outcome.EQUIVALENT, log_equiv, log_better),
    )
    return float(np.maximum(total, LOG_FLOOR).sum())


def log_joint(state: LatentState, X, comparisons, hyper: ModelHyper) -> float:
    """Unnormalized log posterior density of (f, gamma) given the data.

    Standard-normal priors on gamma, a zero-mean GP prior on f with the
    covariance implied by theta = lengthscale_transform(gamma), and the
    comparison likelihood.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    f, gamma = state.f, state.gamma
    if f.size != X.shape[0]:
        raise ValueError("f must have one entry per point in X")
    theta = lengthscale_transform(gamma, hyper.alpha)
    cov = covariance(X, hyper.kernel_hyper(theta))
    n = f.size
    w = np.linalg.solve(cov.chol, f)
    log_prior_f = (-0.5 * w @ w
                   - np.log(np.diag(cov.chol)).sum()
                   - 0.5 * n * np.log(2.0 * np.pi))
    log_prior_gamma = float(-0.5 * gamma @ gamma
                            - 0.5 * gamma.size * np.log(2.0 * np.pi))
    return float(log_prior_f) + log_prior_gamma + log_likelihood(comparisons, f, hyper)
