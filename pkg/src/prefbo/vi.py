"""Mean-field Gaussian variational inference for the preference posterior.

The posterior over z = (f, gamma) is approximated by a fully factorized
Gaussian with one (mean, scale) pair per latent coordinate: N + D means
and N + D scales, 2N + 2D parameters in total.  Scales are kept positive
through a softplus parameterization.  The evidence lower bound

    ELBO = E_q[log p(f, gamma, c) - log q(f, gamma)]

is estimated by Monte Carlo with reparameterized draws z = mu + sigma * eps
and maximized with Adam-style adaptive gradient ascent; gradients are
propagated analytically through the draw, the length-scale transform, the
covariance build, and the likelihood, so finite differences of the
frozen-noise estimator reproduce them exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import model as _model
from .gp import JITTER_CEILING, JITTER_SCALE, NumericalDegeneracyError, covariance
from .model import ModelHyper, Outcome, lengthscale_transform, stable_sigmoid

__all__ = [
    "VariationalParams",
    "PosteriorSample",
    "FitConfig",
    "DivergenceError",
    "softplus",
    "softplus_inv",
    "sample_q",
    "elbo_estimate",
    "elbo_value_and_grad",
    "elbo_gradient",
    "fit",
]

#: initial scale of the f-coordinate marginals
INIT_SIGMA_F = 0.5
#: initial scale of the gamma-coordinate marginals
INIT_SIGMA_GAMMA = 1.0

_LOG_2PI = np.log(2.0 * np.pi)


class DivergenceError(RuntimeError):
    """The ELBO was non-finite for too many consecutive steps."""


def softplus(x):
    """log(1 + exp(x)), overflow-safe."""
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of :func:`softplus` for y > 0."""
    y = np.asarray(y, dtype=float)
    return np.log(np.expm1(y))


@dataclass(frozen=True)
class VariationalParams:
    """Means and unconstrained scales of the factorized Gaussian.

    Layout: the first ``n_points`` coordinates are the latent utilities f,
    the trailing ``n_dims`` are the pre-length-scales gamma.
    """

    mu: np.ndarray
    rho: np.ndarray
    n_points: int
    n_dims: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        rho = np.asarray(self.rho, dtype=float).ravel()
        expected = self.n_points + self.n_dims
        if mu.size != expected or rho.size != expected:
            raise ValueError(
                f"expected {expected} coordinates (N={self.n_points}, D={self.n_dims}), "
                f"got mu:{mu.size} rho:{rho.size}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rho", rho)

    @property
    def sigma(self) -> np.ndarray:
        return softplus(self.rho)

    @property
    def n_params(self) -> int:
        """Total scalar parameter count, 2N + 2D."""
        return 2 * (self.n_points + self.n_dims)

    @classmethod
    def initial(cls, n_points: int, n_dims: int) -> "VariationalParams":
        mu = np.zeros(n_points + n_dims)
        rho = np.concatenate([
            np.full(n_points, softplus_inv(INIT_SIGMA_F)),
            np.full(n_dims, softplus_inv(INIT_SIGMA_GAMMA)),
        ])
        return cls(mu=mu, rho=rho, n_points=n_points, n_dims=n_dims)

    def extended(self, n_new: int) -> "VariationalParams":
        """Warm start for a design grown by ``n_new`` points.

        Existing coordinates keep their fitted values; the new f
        coordinates get the fresh initialization.
        """
        if n_new == 0:
            return self
        n = self.n_points
        mu = np.concatenate([self.mu[:n], np.zeros(n_new), self.mu[n:]])
        rho = np.concatenate([
            self.rho[:n],
            np.full(n_new, softplus_inv(INIT_SIGMA_F)),
            self.rho[n:],
        ])
        return VariationalParams(mu=mu, rho=rho, n_points=n + n_new,
                                 n_dims=self.n_dims)

    def f_mean(self) -> np.ndarray:
        """Posterior mean of the latent utilities."""
        return self.mu[: self.n_points].copy()


@dataclass(frozen=True)
class PosteriorSample:
    """One joint draw from q, with the length-scales and covariance it implies."""

    f: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    cov: object


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the stochastic ELBO optimization.

    ``time_budget_s`` caps wall-clock time cooperatively: the step loop
    stops and returns the current parameters once the budget is spent.
    """

    mc_samples: int = 8
    max_steps: int = 3000
    step_size: float = 0.02
    convergence_window: int = 50
    convergence_tol: float = 1e-3
    report_samples: int = 256
    time_budget_s: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if min(self.mc_samples, self.max_steps, self.convergence_window,
               self.report_samples) < 1:
            raise ValueError("sample and step counts must be positive")
        if self.step_size <= 0 or self.convergence_tol <= 0:
            raise ValueError("step size and tolerance must be positive")
        if self.time_budget_s is not None and self.time_budget_s <= 0:
            raise ValueError("time budget must be positive")

    def to_dict(self) -> dict:
        return {
            "mc_samples": self.mc_samples,
            "max_steps": self.max_steps,
            "step_size": self.step_size,
            "convergence_window": self.convergence_window,
            "convergence_tol": self.convergence_tol,
            "report_samples": self.report_samples,
            "time_budget_s": self.time_budget_s,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        return cls(**d)


def sample_q(lam: VariationalParams, X, hyper: ModelHyper, rng) -> PosteriorSample:
    """Draw one reparameterized sample z = mu + sigma * eps from q.

    Retries with fresh noise up to five times if the implied covariance
    cannot be factorized.
    """
    sigma = lam.sigma
    last_err = None
    for _ in range(5):
        eps = rng.standard_normal(lam.mu.size)
        z = lam.mu + sigma * eps
        f, gamma = z[: lam.n_points], z[lam.n_points:]
        theta = lengthscale_transform(gamma, hyper.alpha)
        try:
            cov = covariance(X, hyper.kernel_hyper(theta))
        except NumericalDegeneracyError as err:
            last_err = err
            continue
        return PosteriorSample(f=f, gamma=gamma, theta=theta, cov=cov)
    raise NumericalDegeneracyError(
        f"could not factorize a posterior covariance in 5 attempts: {last_err}"
    )


class _Workspace:
    """Precomputed, X-dependent pieces shared by all ELBO evaluations."""

    def __init__(self, X, comparisons, hyper: ModelHyper):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X = X
        self.n, self.d = X.shape
        if self.d != hyper.dim:
            raise ValueError("X dimension does not match the hyperparameters")
        diff = X[:, None, :] - X[None, :, :]
        self.sqd = np.ascontiguousarray(np.moveaxis(diff**2, -1, 0))  # (D, N, N)
        self.hyper = hyper
        self.alpha_low = hyper.alpha[:, 0]
        self.alpha_range = hyper.alpha[:, 1] - hyper.alpha[:, 0]
        self.idx_i = np.array([c.i for c in comparisons], dtype=int)
        self.idx_j = np.array([c.j for c in comparisons], dtype=int)
        self.outcomes = np.array([int(c.outcome) for c in comparisons], dtype=int)
        if self.idx_i.size and (self.idx_i.max() >= self.n or self.idx_j.max() >= self.n):
            raise IndexError("comparison references a point outside X")
        self.noise_scale = np.sqrt(2.0 * hyper.sigma_p**2)

    def check_params(self, lam: VariationalParams):
        if lam.n_points != self.n or lam.n_dims != self.d:
            raise ValueError("variational parameters sized for a different dataset")


def _batched_chol(k_rbf: np.ndarray, variance: float):
    """Cholesky of k_rbf + jitter*I for a (S, N, N) stack, escalating jitter."""
    jitter = JITTER_SCALE * variance
    ceiling = JITTER_CEILING * variance
    eye = np.eye(k_rbf.shape[-1])
    while True:
        k = k_rbf + jitter * eye
        try:
            return k, np.linalg.cholesky(k), jitter
        except np.linalg.LinAlgError:
            if jitter * 10 > ceiling:
                raise NumericalDegeneracyError(
                    f"batched covariance not positive definite at jitter {jitter:.1e}"
                ) from None
            jitter *= 10


def _likelihood_terms(ws: _Workspace, f: np.ndarray, want_grad: bool):
    """Per-sample comparison log-likelihood and its gradient w.r.t. f.

    ``f`` has shape (S, N); returns (loglik (S,), grad (S, N) or None).
    """
    s_count = f.shape[0]
    if ws.idx_i.size == 0:
        grad = np.zeros_like(f) if want_grad else None
        return np.zeros(s_count), grad
    beta = ws.hyper.beta
    d = (f[:, ws.idx_i] - f[:, ws.idx_j]) / ws.noise_scale  # (S, M)
    log_worse, log_equiv, log_better = _model.comparison_log_probs(d, beta)
    chosen = np.where(
        ws.outcomes == Outcome.FIRST_WORSE, log_worse,
        np.where(ws.outcomes == Outcome.EQUIVALENT, log_equiv, log_better),
    )
    loglik = np.maximum(chosen, _model.LOG_FLOOR).sum(axis=1)
    if not want_grad:
        return loglik, None
    # d/dd of the chosen log-probability, in terms of z1 = S(d), z2 = 1 - z1.
    # Denominators z1 + beta*z2 and z2 + beta*z1 live in [1, beta]: safe.
    z1 = stable_sigmoid(d)
    z2 = 1.0 - z1
    # z1*z2 computed through the log domain so saturated d stays accurate
    z1z2 = np.exp(-(softplus(d) + softplus(-d)))
    denom_b = z1 + beta * z2
    denom_a = z2 + beta * z1
    g_better = z2 - z1z2 * (1.0 - beta) / denom_b
    g_worse = -z1 - z1z2 * (beta - 1.0) / denom_a
    if beta > 1.0:
        g_equiv = z2 - z1 - z1z2 * (1.0 - beta) / denom_b - z1z2 * (beta - 1.0) / denom_a
    else:
        g_equiv = np.zeros_like(d)
    g = np.where(
        ws.outcomes == Outcome.FIRST_WORSE, g_worse,
        np.where(ws.outcomes == Outcome.EQUIVALENT, g_equiv, g_better),
    ) / ws.noise_scale
    grad = np.zeros_like(f)
    rows = np.broadcast_to(np.arange(s_count)[:, None], d.shape)
    np.add.at(grad, (rows, np.broadcast_to(ws.idx_i, d.shape)), g)
    np.add.at(grad, (rows, np.broadcast_to(ws.idx_j, d.shape)), -g)
    return loglik, grad


def _elbo_batch(ws: _Workspace, mu: np.ndarray, sigma: np.ndarray,
                eps: np.ndarray, want_grad: bool):
    """ELBO estimate (and optional gradient) for a block of frozen draws.

    Returns ``(value, grad_mu, grad_sigma)``; the gradient pieces are
    ``None`` when ``want_grad`` is false.  The q-side derivative w.r.t. mu
    cancels exactly under the reparameterization, and w.r.t. sigma it
    reduces to 1/sigma.
    """
    n, d_dims = ws.n, ws.d
    variance = ws.hyper.kernel_variance
    z = mu + sigma * eps  # (S, N+D)
    f, gamma = z[:, :n], z[:, n:]
    sig_g = stable_sigmoid(gamma)
    theta = ws.alpha_low + sig_g * ws.alpha_range  # (S, D)
    inv_theta2 = 1.0 / theta**2
    k_rbf = variance * np.exp(-0.5 * np.einsum("sd,dnm->snm", inv_theta2, ws.sqd))
    k, chol, _ = _batched_chol(k_rbf, variance)
    logdet_half = np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    if want_grad:
        kinv = np.linalg.inv(k)
        alpha = np.einsum("snm,sm->sn", kinv, f)
    else:
        alpha = np.linalg.solve(k, f[:, :, None])[:, :, 0]
    quad = np.einsum("sn,sn->s", f, alpha)
    log_mvn = -0.5 * quad - logdet_half - 0.5 * n * _LOG_2PI
    log_prior_gamma = -0.5 * np.einsum("sd,sd->s", gamma, gamma) - 0.5 * d_dims * _LOG_2PI
    loglik, grad_f_lik = _likelihood_terms(ws, f, want_grad)
    # log q at the drawn z: (z - mu)/sigma is eps by construction
    log_q = (-np.log(sigma).sum()
             - 0.5 * np.einsum("sk,sk->s", eps, eps)
             - 0.5 * (n + d_dims) * _LOG_2PI)
    per_sample = log_mvn + log_prior_gamma + loglik - log_q
    value = float(per_sample.mean())
    if not want_grad:
        return value, None, None
    grad_f = -alpha + grad_f_lik
    # gamma gradient: prior plus the MVN term routed through theta
    a_mat = kinv - alpha[:, :, None] * alpha[:, None, :]
    inv_theta3 = inv_theta2 / theta
    g_theta = np.empty_like(theta)
    for dd in range(d_dims):
        dk = k_rbf * ws.sqd[dd] * inv_theta3[:, dd, None, None]
        g_theta[:, dd] = -0.5 * np.einsum("snm,snm->s", a_mat, dk)
    dtheta_dgamma = sig_g * (1.0 - sig_g) * ws.alpha_range
    grad_gamma = -gamma + g_theta * dtheta_dgamma
    grad_z = np.concatenate([grad_f, grad_gamma], axis=1)  # (S, N+D)
    grad_mu = grad_z.mean(axis=0)
    grad_sigma = (grad_z * eps).mean(axis=0) + 1.0 / sigma
    return value, grad_mu, grad_sigma


def elbo_value_and_grad(lam: VariationalParams, X, comparisons,
                        hyper: ModelHyper, eps: np.ndarray):
    """ELBO estimate and gradient for explicitly supplied noise draws.

    ``eps`` has shape (S, N+D).  Deterministic given its contents, which
    makes the estimator directly checkable by finite differences.
    Returns ``(value, grad)`` with the gradient laid out as
    ``concat(d/d mu, d/d rho)`` of length 2(N + D).
    """
    ws = _Workspace(X, comparisons, hyper)
    ws.check_params(lam)
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 2 or eps.shape[1] != lam.mu.size:
        raise ValueError("eps must have shape (S, N+D)")
    sigma = lam.sigma
    value, grad_mu, grad_sigma = _elbo_batch(ws, lam.mu, sigma, eps, want_grad=True)
    grad_rho = grad_sigma * stable_sigmoid(lam.rho)
    return value, np.concatenate([grad_mu, grad_rho])


def elbo_estimate(lam: VariationalParams, X, comparisons, hyper: ModelHyper,
                  n_samples: int, rng) -> float:
    """Unbiased Monte Carlo ELBO estimate from ``n_samples`` fresh draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    ws = _Workspace(X, comparisons, hyper)
    ws.check_params(lam)
    eps = rng.standard_normal((n_samples, lam.mu.size))
    value, _, _ = _elbo_batch(ws, lam.mu, lam.sigma, eps, want_grad=False)
    return value


def elbo_gradient(lam: VariationalParams, X, comparisons, hyper: ModelHyper,
                  n_samples: int, rng) -> np.ndarray:
    """Reparameterization gradient of the ELBO estimator, fresh draws."""
    eps = rng.standard_normal((n_samples, lam.mu.size))
    _, grad = elbo_value_and_grad(lam, X, comparisons, hyper, eps)
    return grad


def fit(lam_init: VariationalParams, X, comparisons, hyper: ModelHyper,
        config: FitConfig | None = None, rng=None) -> VariationalParams:
    """Maximize the ELBO with Adam, starting from ``lam_init``.

    Stops at ``max_steps`` or when the mean ELBO over the last
    ``convergence_window`` steps improves on the previous window by less
    than ``convergence_tol`` in relative terms.  Ten consecutive
    non-finite ELBO estimates raise :class:`DivergenceError`.
    """
    config = config or FitConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    ws = _Workspace(X, comparisons, hyper)
    ws.check_params(lam_init)
    mu = lam_init.mu.copy()
    rho = lam_init.rho.copy()
    size = mu.size
    m = np.zeros(2 * size)
    v = np.zeros(2 * size)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    window = config.convergence_window
    history: list[float] = []
    nonfinite_streak = 0
    deadline = (None if config.time_budget_s is None
                else time.monotonic() + config.time_budget_s)
    for step in range(1, config.max_steps + 1):
        if deadline is not None and time.monotonic() >= deadline:
            break
        eps = rng.standard_normal((config.mc_samples, size))
        sigma = softplus(rho)
        value, grad_mu, grad_sigma = _elbo_batch(ws, mu, sigma, eps, want_grad=True)
        grad = np.concatenate([grad_mu, grad_sigma * stable_sigmoid(rho)])
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            nonfinite_streak += 1
            if nonfinite_streak >= 10:
                raise DivergenceError(
                    "ELBO non-finite for 10 consecutive steps; "
                    "try a smaller step_size"
                )
            continue
        nonfinite_streak = 0
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad**2
        m_hat = m / (1 - beta1**step)
        v_hat = v / (1 - beta2**step)
        update = config.step_size * m_hat / (np.sqrt(v_hat) + adam_eps)
        mu = mu + update[:size]
        rho = rho + update[size:]
        history.append(value)
        if len(history) >= 2 * window and len(history) % window == 0:
            recent = float(np.mean(history[-window:]))
            previous = float(np.mean(history[-2 * window:-window]))
            if (recent - previous) / max(1.0, abs(previous)) < config.convergence_tol:
                break
    return replace(lam_init, mu=mu, rho=rho)
