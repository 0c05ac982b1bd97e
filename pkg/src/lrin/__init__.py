"""Low-rank inducing norms: values, proximal mappings and first-order solvers."""
from .gauges import (Ell, Flavor, MagnitudeProfile, NormSpec, ScaledNorm, dual_norm_value,
                     make_profile, norm_value, truncated_gauge)
from .vecprox import (CandidateSolution, SearchMode, SearchResult, count_candidate_solves,
                      project_kyfan_l1_ball, project_truncated_l2_ball, prox_vec, prox_vec_info)

__version__ = "0.1.0"
