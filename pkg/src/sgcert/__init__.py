"""Stochastic first-order methods with white-box certificates of their high-probability analyses."""

from .core import (ConfigError, Domain, DomainError, InvalidInputError, NormPair, Objective,
                   ProblemSpec, RngStream, dual_norm, make_problem)
from .noise import (NoiseKind, NoiseModel, StochasticOracle, certify_subgaussian,
                    mgf_lemma_check, sample)
from .geometry import MirrorMap, bregman, mirror_step
from .algorithms import (RunTrace, StepSchedule, run_adagrad_coord, run_adagrad_norm, run_asmd,
                         run_sgd, run_smd)
from .certificates import (MgfConfig, WeightSequence, build_weights, check_adagrad_lemmas,
                           check_asmd, check_md, check_sgd, check_step_asmd, check_step_md,
                           check_step_sgd, martingale_trace, mgf_theorem_check, theorem_bound)
from .harness import (ExperimentConfig, TrialStats, emit_plotdata, fit_slope, parse_config,
                      rate_slope, run_trials)

__version__ = "0.1.0"
