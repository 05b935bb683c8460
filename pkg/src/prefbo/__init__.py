"""Preference-based Bayesian optimization from pairwise comparisons.

A Gaussian-process latent utility with a tie-aware Bradley-Terry
likelihood, fitted by mean-field variational inference; new query points
come from integrated expected improvement over the posterior.
"""

from .acquisition import (AcquisitionKind, ProposalConfig, ei_closed_form,
                          integrated_acquisition, propose_next)
from .benchmark import TEST_FUNCTIONS, TestFunction, run_benchmark, simulated_pref, summarize
from .design import latin_hypercube
from .experiment import BoundingBox, ExperimentConfig, PreferenceExperiment
from .gp import CovMatrix, KernelHyper, NumericalDegeneracyError, covariance, gp_predict, rbf
from .model import (ComparisonRecord, LatentState, ModelHyper, Outcome,
                    lengthscale_transform, log_joint, log_likelihood,
                    tie_probabilities)
from .vi import (FitConfig, PosteriorSample, VariationalParams, elbo_estimate,
                 elbo_gradient, fit, sample_q)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionKind",
    "BoundingBox",
    "ComparisonRecord",
    "CovMatrix",
    "ExperimentConfig",
    "FitConfig",
    "KernelHyper",
    "LatentState",
    "ModelHyper",
    "NumericalDegeneracyError",
    "Outcome",
    "PosteriorSample",
    "PreferenceExperiment",
    "ProposalConfig",
    "TEST_FUNCTIONS",
    "TestFunction",
    "VariationalParams",
    "covariance",
    "ei_closed_form",
    "elbo_estimate",
    "elbo_gradient",
    "fit",
    "gp_predict",
    "integrated_acquisition",
    "latin_hypercube",
    "lengthscale_transform",
    "log_joint",
    "log_likelihood",
    "propose_next",
    "rbf",
    "run_benchmark",
    "sample_q",
    "simulated_pref",
    "summarize",
    "tie_probabilities",
]
