"""Operator augmentation for linear systems with noisy, nonsymmetric operators."""

from .augmentation import (
    AutocorrelationShrink,
    BetaEstimate,
    Deterministic,
    ExplicitMatrix,
    GaussianWithAutocorrelation,
    InverseShrink,
    IsotropicGaussian,
    MatrixEnsemble,
    apply_augmented,
    bootstrap_beta_general,
    bootstrap_beta_mc,
    bootstrap_beta_taylor,
    bootstrap_beta_taylor_prior,
    optimal_beta_exact,
    semi_bayes_objective,
    threshold_beta,
)
from .errors import (
    ConfigError,
    DegenerateAugmentationError,
    DimensionError,
    NoiseModelError,
    SingularMatrixError,
)
from .harness import ExperimentConfig, load_config, run_experiment
from .linalg import LUFactor, factorize, solve, weighted_inner, weighted_seminorm_sq
from .markov import ChainSpec, TransitionBootstrap, build_chain, reward_vector, sample_empirical_transition

__version__ = "0.1.0"
