"""Shared fixtures, including independent brute-force oracles.

The oracles here recompute model quantities from first principles
(inline kernel, sigmoid, and outcome-probability formulas plus
Gauss-Hermite quadrature) so they share no code path with the library
internals they check.
"""

from itertools import product

import numpy as np
import pytest
from scipy.special import logsumexp

from prefbo.acquisition import ProposalConfig
from prefbo.vi import FitConfig


def _sig(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def brute_force_log_evidence(X, comparisons, hyper, nodes: int = 80) -> float:
    """log p(c) by Gauss-Hermite quadrature over all N + D <= 3 latents.

    Integrates the generative model directly: standard-normal gamma,
    f = chol(K(theta(gamma)) + jitter I) @ u with standard-normal u, and
    the three-way outcome probabilities evaluated from their defining
    ratios.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n + d > 3:
        raise ValueError("quadrature oracle supports at most 3 latent dims")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    sqd = (X[:, None, :] - X[None, :, :]) ** 2
    variance = hyper.kernel_variance
    jitter = 1e-6 * variance
    alpha = hyper.alpha
    beta = hyper.beta
    scale = np.sqrt(2.0 * hyper.sigma_p**2)
    if n == 1:
        U = (np.sqrt(2.0) * t)[None, :]
        log_wu = np.log(w)
    else:
        U = np.stack(np.meshgrid(np.sqrt(2.0) * t, np.sqrt(2.0) * t,
                                 indexing="ij")).reshape(2, -1)
        log_wu = np.add.outer(np.log(w), np.log(w)).ravel()
    chunks = []
    for gamma_idx in product(range(nodes), repeat=d):
        gamma = np.sqrt(2.0) * t[list(gamma_idx)]
        log_wg = float(np.sum(np.log(w[list(gamma_idx)])))
        theta = alpha[:, 0] + _sig(gamma) * (alpha[:, 1] - alpha[:, 0])
        K = variance * np.exp(-0.5 * np.sum(sqd / theta**2, axis=-1))
        K = K + jitter * np.eye(n)
        L = np.linalg.cholesky(K)
        F = L @ U
        loglik = np.zeros(U.shape[1])
        for c in comparisons:
            dd = (F[c.i] - F[c.j]) / scale
            z1 = _sig(dd)
            z2 = 1.0 - z1
            if int(c.outcome) == 1:
                p = z1 / (z1 + beta * z2)
            elif int(c.outcome) == -1:
                p = z2 / (z2 + beta * z1)
            else:
                p = ((beta**2 - 1.0) * z1 * z2
                     / ((z1 + beta * z2) * (z2 + beta * z1)))
            loglik += np.log(np.maximum(p, 1e-300))
        chunks.append(logsumexp(log_wg + log_wu + loglik))
    return float(logsumexp(chunks) - 0.5 * (n + d) * np.log(np.pi))


def expected_improvement_quadrature(mu: float, s: float, f_best: float,
                                    points: int = 200_001) -> float:
    """Numeric integral of max(y - f_best, 0) * N(y; mu, s^2) dy."""
    if s == 0.0:
        return max(mu - f_best, 0.0)
    lo = max(f_best, mu - 12.0 * s)
    hi = max(f_best, mu) + 12.0 * s
    y = np.linspace(lo, hi, points)
    density = np.exp(-0.5 * ((y - mu) / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
    return float(np.trapezoid((y - f_best) * density, y))


@pytest.fixture
def quadrature_log_evidence():
    return brute_force_log_evidence


@pytest.fixture
def ei_quadrature():
    return expected_improvement_quadrature


@pytest.fixture
def cheap_fit():
    """Small fit budget for experiment-level tests."""
    return FitConfig(mc_samples=8, max_steps=120, step_size=0.05,
                     convergence_window=30, convergence_tol=2e-3)


@pytest.fixture
def cheap_proposal():
    return ProposalConfig(posterior_samples=16, candidate_count=128,
                          local_refinement_steps=12)
