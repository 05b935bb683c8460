"""Acquisition functions over the variational posterior and the argmax search.

The next query point maximizes a Monte Carlo average of a per-sample
acquisition over posterior draws (f, gamma): expected improvement against
the incumbent's latent value, or pure exploration (predictive variance).
The same fixed set of posterior samples scores every candidate, so the
argmax is taken on one well-defined surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr

from .design import latin_hypercube
from .model import ModelHyper
from .vi import PosteriorSample, VariationalParams, sample_q
from .gp import rbf_cross

__all__ = [
    "AcquisitionKind",
    "ProposalConfig",
    "ei_closed_form",
    "acquisition_surface",
    "integrated_acquisition",
    "propose_next",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class AcquisitionKind(str, Enum):
    EXPECTED_IMPROVEMENT = "ei"
    PURE_EXPLORATION = "pe"
    RANDOM_SEARCH = "random"


@dataclass(frozen=True)
class ProposalConfig:
    """Search effort for one proposal."""

    posterior_samples: int = 64
    candidate_count: int = 1024
    local_refinement_steps: int = 64
    seed: int | None = None

    def __post_init__(self):
        if min(self.posterior_samples, self.candidate_count,
               self.local_refinement_steps) < 1:
            raise ValueError("proposal effort values must be positive")

    def to_dict(self) -> dict:
        return {
            "posterior_samples": self.posterior_samples,
            "candidate_count": self.candidate_count,
            "local_refinement_steps": self.local_refinement_steps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProposalConfig":
        return cls(**d)


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def ei_closed_form(mu: float, s: float, f_best: float) -> float:
    """Expected improvement of N(mu, s^2) over f_best.

    Two-branch closed form with d = mu - f_best:

        d * Phi(d / s) + s * phi(d / s)   if s > 0
        0                                  if s = 0
    """
    if s < 0:
        raise ValueError("predictive scale s must be nonnegative")
    if s == 0.0:
        return 0.0
    d = mu - f_best
    u = d / s
    return float(d * ndtr(u) + s * _phi(u))


def _ei_vec(mu: np.ndarray, s: np.ndarray, f_best: float) -> np.ndarray:
    d = mu - f_best
    out = np.zeros_like(mu)
    pos = s > 0
    u = d[pos] / s[pos]
    out[pos] = d[pos] * ndtr(u) + s[pos] * _phi(u)
    return out


def _predict_batch(candidates: np.ndarray, sample: PosteriorSample,
                   X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive (mu, s2) at each candidate under one posterior sample."""
    cov = sample.cov
    k_star = rbf_cross(candidates, X, cov.hyper)  # (C, N)
    v = solve_triangular(cov.chol, k_star.T, lower=True)  # (N, C)
    w = solve_triangular(cov.chol, sample.f, lower=True)
    mu = v.T @ w
    s2 = np.maximum(cov.hyper.variance - np.einsum("nc,nc->c", v, v), 0.0)
    return mu, s2


def acquisition_surface(candidates, samples: list[PosteriorSample], X,
                        kind: AcquisitionKind,
                        best_index: int | None) -> np.ndarray:
    """Average per-sample acquisition over a fixed posterior sample set.

    For expected improvement, f_best is each sample's own latent value at
    the incumbent index, so the improvement target moves coherently with
    the sampled utilities.
    """
    kind = AcquisitionKind(kind)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    X = np.asarray(X, dtype=float)
    if kind is AcquisitionKind.EXPECTED_IMPROVEMENT and best_index is None:
        raise ValueError(
            "expected improvement needs an incumbent; record a comparison first"
        )
    total = np.zeros(candidates.shape[0])
    for sample in samples:
        mu, s2 = _predict_batch(candidates, sample, X)
        if kind is AcquisitionKind.PURE_EXPLORATION:
            total += s2
        else:
            f_best = float(sample.f[best_index])
            total += _ei_vec(mu, np.sqrt(s2), f_best)
    return total / len(samples)


def integrated_acquisition(x_star, lam: VariationalParams, X,
                           hyper: ModelHyper, kind: AcquisitionKind,
                           best_index: int | None = None,
                           n_samples: int = 64, rng=None) -> float:
    """Monte Carlo integrated acquisition at a single point."""
    if rng is None:
        rng = np.random.default_rng()
    samples = [sample_q(lam, X, hyper, rng) for _ in range(n_samples)]
    value = acquisition_surface(np.atleast_2d(x_star), samples, X, kind, best_index)
    return float(value[0])


def _pattern_search(x0, f0, evaluate, box: np.ndarray, steps: int) -> np.ndarray:
    """Derivative-free coordinate refinement inside the box.

    Probes +/- delta along each axis, moves to the best improvement, and
    halves delta whenever nothing improves.  Degenerate dimensions keep a
    zero step.  Deterministic given the acquisition surface.
    """
    widths = box[:, 1] - box[:, 0]
    delta = widths / 10.0
    x, fx = x0.copy(), f0
    for _ in range(steps):
        if np.all(delta < 1e-12):
            break
        trials = []
        for d in range(box.shape[0]):
            if delta[d] == 0.0:
                continue
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[d] = np.clip(trial[d] + sign * delta[d], box[d, 0], box[d, 1])
                trials.append(trial)
        values = evaluate(np.array(trials))
        best = int(np.argmax(values))
        if values[best] > fx:
            x, fx = trials[best], float(values[best])
        else:
            delta = delta / 2.0
    return x


def propose_next(box, lam: VariationalParams | None, X, hyper: ModelHyper,
                 kind: AcquisitionKind, best_index: int | None,
                 config: ProposalConfig, rng) -> np.ndarray:
    """Argmax of the integrated acquisition over the bounding box.

    Scores a Latin-hypercube candidate set under a shared posterior
    sample draw, then refines the best candidate with pattern search.
    Random search skips the model and returns a uniform point in the box.
    """
    kind = AcquisitionKind(kind)
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] == 0:
        raise ValueError("box must be a (D, 2) array")
    widths = box[:, 1] - box[:, 0]
    if np.all(widths <= 0):
        raise ValueError("box is degenerate: zero width in every dimension")
    dim = box.shape[0]
    if kind is AcquisitionKind.RANDOM_SEARCH:
        return box[:, 0] + rng.random(dim) * widths
    if lam is None:
        raise ValueError("model-based proposals need fitted variational parameters")
    X = np.asarray(X, dtype=float)
    samples = [sample_q(lam, X, hyper, rng)
               for _ in range(config.posterior_samples)]

    def evaluate(points):
        return acquisition_surface(points, samples, X, kind, best_index)

    candidates = latin_hypercube(dim, config.candidate_count, box, rng)
    values = evaluate(candidates)
    best = int(np.argmax(values))
    return _pattern_search(candidates[best], float(values[best]), evaluate,
                           box, config.local_refinement_steps)
