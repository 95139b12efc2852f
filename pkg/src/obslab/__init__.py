"""obslab: a seeded numerical laboratory for observation-space overfitting
in linear-quadratic control.

Core pieces: exact infinite-horizon LQR costs and gradients (Lyapunov solves
via the vectorized linear system), observation-projected level families,
layered linear policies trained by full-batch gradient descent, the exact
closed-form theory of the one-step case, norm-based complexity measures, and
a deterministic experiment CLI.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, ConsistencyError, IngestionError, ObslabError,
                     TrainingDivergedError, UnstableSystemError)
from .linalg import (MatrixNorms, norms, pseudoinverse,
                     sample_gaussian, sample_haar_orthogonal_partition,
                     sample_semi_orthogonal, solve_discrete_lyapunov)
from .lqr import (LqrEval, LqrProblem, default_problem, lqr_cost,
                  lqr_cost_and_gradient, lqr_gradient, make_problem)
from .levels import (GapResult, Level, LevelFamily, effective_policy,
                     generalization_gap, get_level, level_cost, level_gradient,
                     make_family)
from .measures import (DecisionRecord, MarginReport, NormProducts, WeightStack,
                       margin_distribution, norm_products, phi_frobenius_count,
                       phi_l1_count, r_distance, r_spectral_fro, r_spectral_l1)
from .one_step import (GeneralizationTerms, OneStepInstance, OneStepParams,
                       TheoremCheck, cost_population, cost_sample,
                       expected_generalization, gd_limit, grad_sample, k_min,
                       projector, sample_instance, verify_theorem, z_pinv)
from .policy import (LayeredPolicy, TrainConfig, compose, init_policy,
                     layer_gradients, train)
from .rng import SeededRng, derive_seed

__all__ = [
    "__version__",
    # errors
    "ObslabError", "UnstableSystemError", "TrainingDivergedError",
    "ConsistencyError", "ConfigError", "IngestionError",
    # rng
    "SeededRng", "derive_seed",
    # linalg
    "MatrixNorms", "norms", "pseudoinverse", "sample_gaussian",
    "sample_haar_orthogonal_partition", "sample_semi_orthogonal",
    "solve_discrete_lyapunov",
    # lqr
    "LqrProblem", "LqrEval", "default_problem", "make_problem", "lqr_cost",
    "lqr_gradient", "lqr_cost_and_gradient",
    # levels
    "LevelFamily", "Level", "GapResult", "make_family", "get_level",
    "effective_policy", "level_cost", "level_gradient", "generalization_gap",
    # policy
    "LayeredPolicy", "TrainConfig", "init_policy", "compose",
    "layer_gradients", "train",
    # one-step theory
    "OneStepParams", "OneStepInstance", "GeneralizationTerms", "TheoremCheck",
    "sample_instance", "cost_sample", "cost_population", "grad_sample",
    "z_pinv", "projector", "k_min", "gd_limit", "expected_generalization",
    "verify_theorem",
    # measures
    "WeightStack", "DecisionRecord", "NormProducts", "MarginReport",
    "phi_frobenius_count", "phi_l1_count", "norm_products", "r_spectral_l1",
    "r_distance", "r_spectral_fro", "margin_distribution",
]
