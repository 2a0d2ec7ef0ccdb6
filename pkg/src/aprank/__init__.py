"""Low-rank approximation of real symmetric tensors with certified error.

Three constructions are provided: greedy energy increment
(:func:`decompose_energy`), Maurey sparsification of an existing
decomposition (:func:`maurey_sparsify`) and Frank-Wolfe over the Veronese
body (:func:`fw_decompose`), together with the sphere norms, moment formulas
and search routines they rely on.
"""

from ._parallel import get_threads, set_threads
from .apps import InstanceSpec, LinfInterval, bench_suite, estimate_linf, generate_instance
from .energy import GreedyState, certify, decompose_energy, project_hs
from .errors import (
    AprankError, BudgetExceededError, FrankWolfeError, RankDeficiencyError, SearchFailure,
    ShapeMismatchError, SparsifyFailure,
)
from .frankwolfe import FWConfig, FWTrace, audit_trace, fw_decompose, lmo
from .norms import (
    BarvinokBracket, EstimateResult, barvinok_bracket, barvinok_factor, linf_lower, lr_exact_even,
    lr_monte_carlo, lr_norm, lr_quadrature, sample_sphere, sphere_moment,
)
from .search import (
    SearchConfig, alpha_bound, covering_oracle, local_ascent, sample_size_bound, search_halfnorm,
)
from .sparsify import SparsifyConfig, maurey_sparsify, nuclear_upper, type2_bound
from .tensor import (
    Decomposition, RankOneTerm, SymmetricTensor, evaluate, evaluate_decomposition, gram_matrix,
    hs_inner, hs_norm, materialize, monomials, multinomials, rank_one,
)

__version__ = "0.1.0"

__all__ = [
    "AprankError", "BarvinokBracket", "BudgetExceededError", "Decomposition", "EstimateResult",
    "FWConfig", "FWTrace", "FrankWolfeError", "GreedyState", "InstanceSpec", "LinfInterval",
    "RankDeficiencyError", "RankOneTerm", "SearchConfig", "SearchFailure", "ShapeMismatchError",
    "SparsifyConfig", "SparsifyFailure", "SymmetricTensor", "alpha_bound", "audit_trace",
    "barvinok_bracket", "barvinok_factor", "bench_suite", "certify", "covering_oracle",
    "decompose_energy", "estimate_linf", "evaluate", "evaluate_decomposition", "fw_decompose",
    "generate_instance", "get_threads", "gram_matrix", "hs_inner", "hs_norm", "linf_lower",
    "lmo", "local_ascent", "lr_exact_even", "lr_monte_carlo", "lr_norm", "lr_quadrature",
    "materialize", "maurey_sparsify", "monomials", "multinomials", "nuclear_upper",
    "project_hs", "rank_one", "sample_size_bound", "sample_sphere", "search_halfnorm",
    "set_threads", "sphere_moment", "type2_bound",
]
