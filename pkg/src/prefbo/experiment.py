"""Sequential preference experiment: propose pairs, record judgments, refit.

Typical use::

    import prefbo

    exp = prefbo.PreferenceExperiment([[-5.0, 5.0], [0.0, 10.0]], seed=7)
    for _ in range(n_rounds):
        x1, x2 = exp.find_next()
        exp.prefer(x1, x2, ask_user(x1, x2))   # -1: x1 worse, 0: tie, 1: x1 better

The experiment starts from a Latin-hypercube design of 2D+1 points served
pairwise against the running best, then switches to model-based proposals.
Every preference triggers a warm-started variational refit (configurable).
State round-trips losslessly through JSON, including the RNG, so sessions
can be persisted and replayed deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import vi
from .acquisition import AcquisitionKind, ProposalConfig, propose_next
from .design import latin_hypercube
from .model import ComparisonRecord, ModelHyper, Outcome
from .vi import FitConfig, VariationalParams

__all__ = [
    "BoundingBox",
    "ExperimentConfig",
    "PreferenceExperiment",
    "PHASE_INITIALIZING",
    "PHASE_ACTIVE",
]

PHASE_INITIALIZING = "initializing"
PHASE_ACTIVE = "active"

#: per-coordinate tolerance for treating two points as the same
DEDUP_TOL = 1e-9
#: tolerance for matching a posted pair against the outstanding one
PAIR_MATCH_TOL = 1e-9

_STATE_VERSION = 1


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned search domain, one (low, high) pair per dimension."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] == 0:
            raise ValueError("bounding box must be a non-empty list of (low, high) pairs")
        if not np.all(np.isfinite(b)):
            raise ValueError("bounding box must be finite")
        if np.any(b[:, 0] > b[:, 1]):
            raise ValueError("bounding box requires low <= high in every dimension")
        if np.all(b[:, 0] == b[:, 1]):
            raise ValueError("bounding box needs at least one dimension with low < high")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            return False
        span = np.maximum(self.widths, 1.0)
        return bool(np.all(x >= self.bounds[:, 0] - tol * span)
                    and np.all(x <= self.bounds[:, 1] + tol * span))


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment-level knobs: acquisition kind, refit policy, sub-configs.

    ``refit`` is "always" (after every preference), "batch" (after every
    ``refit_batch``-th preference), or "never".
    """

    acquisition: AcquisitionKind = AcquisitionKind.EXPECTED_IMPROVEMENT
    fit: FitConfig = field(default_factory=FitConfig)
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    refit: str = "always"
    refit_batch: int = 5

    def __post_init__(self):
        object.__setattr__(self, "acquisition", AcquisitionKind(self.acquisition))
        if self.refit not in ("always", "batch", "never"):
            raise ValueError("refit must be 'always', 'batch', or 'never'")
        if self.refit_batch < 1:
            raise ValueError("refit_batch must be positive")

    def to_dict(self) -> dict:
        return {
            "acquisition": self.acquisition.value,
            "fit": self.fit.to_dict(),
            "proposal": self.proposal.to_dict(),
            "refit": self.refit,
            "refit_batch": self.refit_batch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            acquisition=AcquisitionKind(d["acquisition"]),
            fit=FitConfig.from_dict(d["fit"]),
            proposal=ProposalConfig.from_dict(d["proposal"]),
            refit=d["refit"],
            refit_batch=d["refit_batch"],
        )


class PreferenceExperiment:
    """Mutable preference-optimization session over a bounding box.

    Single-owner semantics: callers must serialize ``find_next``/``prefer``
    per experiment.  Snapshots taken with :meth:`to_dict` are safe to read
    concurrently.
    """

    def __init__(self, box, hyper: ModelHyper | None = None,
                 config: ExperimentConfig | None = None,
                 seed: int | None = None):
        self.box = box if isinstance(box, BoundingBox) else BoundingBox(box)
        self.hyper = hyper or ModelHyper.for_box(self.box.bounds)
        if self.hyper.dim != self.box.dim:
            raise ValueError("hyperparameters sized for a different dimension")
        self.config = config or ExperimentConfig()
        self._rng = np.random.default_rng(seed)
        self.X: list[np.ndarray] = []
        self.comparisons: list[ComparisonRecord] = []
        self.best_index: int | None = None
        self.best_history: list[int] = []
        self.lam: VariationalParams | None = None
        d = self.box.dim
        self._init_design = latin_hypercube(d, 2 * d + 1, self.box.bounds, self._rng)
        self._init_cursor = 0
        self._pending_pair: tuple[np.ndarray, np.ndarray] | None = None

    # ------------------------------------------------------------------
    # read-only views

    @property
    def n_points(self) -> int:
        return len(self.X)

    @property
    def n_comparisons(self) -> int:
        return len(self.comparisons)

    @property
    def phase(self) -> str:
        if self._init_cursor < len(self._init_design):
            return PHASE_INITIALIZING
        return PHASE_ACTIVE

    @property
    def best(self) -> np.ndarray | None:
        if self.best_index is None:
            return None
        return self.X[self.best_index].copy()

    @property
    def init_design(self) -> np.ndarray:
        return self._init_design.copy()

    # ------------------------------------------------------------------
    # the find_next / prefer loop

    def find_next(self) -> tuple[np.ndarray, np.ndarray]:
        """Next pair to show the user: (candidate, incumbent).

        During initialization the candidate is the next design point; the
        very first call serves the first two design points.  Afterwards
        the candidate maximizes the configured acquisition.  The pair is
        cached until a preference is recorded.
        """
        if self._pending_pair is not None:
            a, b = self._pending_pair
            return a.copy(), b.copy()
        design = self._init_design
        if self._init_cursor == 0:
            pair = (design[0].copy(), design[1].copy())
            self._init_cursor = 2
        elif self._init_cursor < len(design):
            reference = (self.X[self.best_index] if self.best_index is not None
                         else design[self._init_cursor - 1])
            pair = (design[self._init_cursor].copy(), reference.copy())
            self._init_cursor += 1
        else:
            incumbent = self.X[self.best_index]
            if (self.lam is None
                    and self.config.acquisition is not AcquisitionKind.RANDOM_SEARCH):
                self.refit()  # batch/never modes may not have fitted yet
            proposal = propose_next(
                self.box.bounds, self.lam, np.asarray(self.X), self.hyper,
                self.config.acquisition, self.best_index,
                self.config.proposal, self._rng,
            )
            pair = (proposal, incumbent.copy())
        self._pending_pair = (pair[0].copy(), pair[1].copy())
        return pair

    def prefer(self, x1, x2, order: int) -> None:
        """Record that x1 compared to x2 came out as ``order`` (-1/0/+1).

        The points must be the outstanding pair from :meth:`find_next` or
        caller-chosen points inside the box.  Updates the incumbent (a tie
        keeps it) and refits the variational posterior.
        """
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        try:
            outcome = Outcome(int(order))
        except ValueError:
            raise ValueError(f"order must be -1, 0, or 1, got {order!r}") from None
        if not (self.box.contains(x1) and self.box.contains(x2)):
            raise ValueError("compared points must lie inside the bounding box")
        i = self._ingest(x1)
        j = self._ingest(x2)
        if i == j:
            raise ValueError("cannot compare a point against itself")
        self.comparisons.append(ComparisonRecord(i=i, j=j, outcome=outcome))
        self._update_best(i, j, outcome)
        self.best_history.append(self.best_index)
        self._pending_pair = None
        if self.config.refit == "always" or (
                self.config.refit == "batch"
                and self.n_comparisons % self.config.refit_batch == 0):
            self.refit()

    def refit(self) -> None:
        """Warm-started variational refit on the current comparison set."""
        lam = self.lam if self.lam is not None else VariationalParams.initial(0, self.box.dim)
        lam = lam.extended(self.n_points - lam.n_points)
        self.lam = vi.fit(lam, np.asarray(self.X), self.comparisons, self.hyper,
                          self.config.fit, rng=self._rng)

    def matches_pending(self, x1, x2) -> bool:
        """Whether (x1, x2) is the outstanding pair, within tolerance."""
        if self._pending_pair is None:
            return False
        a, b = self._pending_pair
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        return (x1.size == a.size and x2.size == b.size
                and np.all(np.abs(x1 - a) <= PAIR_MATCH_TOL)
                and np.all(np.abs(x2 - b) <= PAIR_MATCH_TOL))

    def _ingest(self, x: np.ndarray) -> int:
        for idx, existing in enumerate(self.X):
            if np.all(np.abs(existing - x) <= DEDUP_TOL):
                return idx
        self.X.append(x.copy())
        if self.lam is not None:
            self.lam = self.lam.extended(1)
        return len(self.X) - 1

    def _update_best(self, i: int, j: int, outcome: Outcome) -> None:
        if self.best_index is None:
            if outcome is Outcome.FIRST_WORSE:
                self.best_index = j
            else:  # winner, or x1 on a tie
                self.best_index = i
            return
        if outcome is Outcome.FIRST_BETTER and j == self.best_index:
            self.best_index = i
        elif outcome is Outcome.FIRST_WORSE and i == self.best_index:
            self.best_index = j
        # ties and comparisons not involving the incumbent keep it

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        return {
            "version": _STATE_VERSION,
            "box": self.box.bounds.tolist(),
            "hyper": self.hyper.to_dict(),
            "config": self.config.to_dict(),
            "points": [x.tolist() for x in self.X],
            "comparisons": [
                {"i": c.i, "j": c.j, "outcome": int(c.outcome)}
                for c in self.comparisons
            ],
            "best_index": self.best_index,
            "best_history": list(self.best_history),
            "rng_state": self._rng.bit_generator.state,
            "lambda": (None if self.lam is None else
                       {"mu": self.lam.mu.tolist(), "rho": self.lam.rho.tolist()}),
            "phase": self.phase,
            "init_design": self._init_design.tolist(),
            "init_cursor": self._init_cursor,
            "pending_pair": (None if self._pending_pair is None else
                             [self._pending_pair[0].tolist(),
                              self._pending_pair[1].tolist()]),
        }

    @classmethod
    def from_dict(cls, state: dict) -> "PreferenceExperiment":
        if state.get("version") != _STATE_VERSION:
            raise ValueError(f"unsupported state version {state.get('version')!r}")
        exp = cls.__new__(cls)
        exp.box = BoundingBox(state["box"])
        exp.hyper = ModelHyper.from_dict(state["hyper"])
        exp.config = ExperimentConfig.from_dict(state["config"])
        exp._rng = np.random.default_rng()
        exp._rng.bit_generator.state = state["rng_state"]
        exp.X = [np.asarray(p, dtype=float) for p in state["points"]]
        exp.comparisons = [
            ComparisonRecord(i=c["i"], j=c["j"], outcome=Outcome(c["outcome"]))
            for c in state["comparisons"]
        ]
        exp.best_index = state["best_index"]
        exp.best_history = list(state["best_history"])
        lam = state["lambda"]
        if lam is None:
            exp.lam = None
        else:
            mu = np.asarray(lam["mu"], dtype=float)
            exp.lam = VariationalParams(
                mu=mu, rho=np.asarray(lam["rho"], dtype=float),
                n_points=len(exp.X), n_dims=exp.box.dim,
            )
        exp._init_design = np.asarray(state["init_design"], dtype=float)
        exp._init_cursor = state["init_cursor"]
        pending = state["pending_pair"]
        exp._pending_pair = (None if pending is None else
                             (np.asarray(pending[0], dtype=float),
                              np.asarray(pending[1], dtype=float)))
        return exp

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PreferenceExperiment":
        return cls.from_dict(json.loads(text))
