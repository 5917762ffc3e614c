"""Rate bounds, auxiliary-channel search and coding simulation for
multi-decoder lossy source coding with side information."""
from ._validation import InfeasibleError, ValidationError
from .aux import (AuxSystem, ReconstructionFunction, check_markov_constraint, check_P2,
                  example3_instance, induce_joint, optimal_reconstruction)
from .bounds import (RateRegion, degraded_rd_value, hb_r0, inner_region, latent_region_contains,
                     lossless_region, phi, scalable_region, slepian_wolf_rate, td_degraded_region,
                     thm2_value)
from .coding import (EpsilonSchedule, NestedCodebook, RateAllocation, allocate_rates, decode, encode,
                     is_jointly_typical, is_typical, run_trials, typicality_bounds)
from .info import (binary_entropy, conditional_entropy, conditional_mutual_information, entropy,
                   mutual_information)
from .lattice import LatticeSets, SubsetList, canonical_list, derive_sets, enumerate_lists
from .optimize import (InnerBoundaryTracer, R0Minimizer, SearchConfig, Thm2Minimizer, minimize_r0,
                       minimize_thm2, trace_inner_boundary)
from .source import DistortionMeasure, JointSourcePmf, is_degraded, marginal, validate_source

__version__ = "0.1.0"

__all__ = [
    "allocate_rates",
    "AuxSystem",
    "binary_entropy",
    "canonical_list",
    "check_markov_constraint",
    "check_P2",
    "conditional_entropy",
    "conditional_mutual_information",
    "decode",
    "degraded_rd_value",
    "derive_sets",
    "DistortionMeasure",
    "encode",
    "entropy",
    "enumerate_lists",
    "EpsilonSchedule",
    "example3_instance",
    "hb_r0",
    "induce_joint",
    "InfeasibleError",
    "inner_region",
    "InnerBoundaryTracer",
    "is_degraded",
    "is_jointly_typical",
    "is_typical",
    "JointSourcePmf",
    "latent_region_contains",
    "LatticeSets",
    "lossless_region",
    "marginal",
    "minimize_r0",
    "minimize_thm2",
    "mutual_information",
    "NestedCodebook",
    "optimal_reconstruction",
    "phi",
    "R0Minimizer",
    "RateAllocation",
    "RateRegion",
    "ReconstructionFunction",
    "run_trials",
    "scalable_region",
    "SearchConfig",
    "slepian_wolf_rate",
    "SubsetList",
    "td_degraded_region",
    "thm2_value",
    "Thm2Minimizer",
    "trace_inner_boundary",
    "typicality_bounds",
    "validate_source",
    "ValidationError",
]
