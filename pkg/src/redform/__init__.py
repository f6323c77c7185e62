"""Revenue-optimal multi-item auctions for additive bidders under arbitrary
finite feasibility constraints, via reduction to welfare maximization.

The library revolves around the polytope of feasible reduced forms: a
separation oracle decides membership through max-weight allocation queries,
a geometric walk decomposes any feasible point into a mixture of simple
virtual VCG rules, and an exact rational LP turns the whole thing into
revenue-optimal, approximately truthful mechanisms. Brute-force oracles
cross-validate every step at desk scale.
"""

from .errors import CapExceeded, RedformError, SolverFault, ValidationError
from .feasibility import FeasibilitySpec, max_weight_allocation, validate_allocation
from .geometry import (
    Decomposition,
    FeasibilityVerdict,
    corner_oracle,
    decompose,
    second_order_decompose,
    second_order_feasibility,
    separation_oracle,
)
from .model import (
    BidderType,
    Correlated,
    Independent,
    Instance,
    ReducedForm,
    SecondOrderReducedForm,
    conditional_others,
    load_instance,
    profile_space,
)
from .optimizer import (
    Mechanism,
    PricingRule,
    RegretReport,
    bic_regret,
    ir_check,
    run_pipeline,
    simulate,
    solve_revenue_lp,
)
from .sampling import ProxyDistribution, build_proxy, genuine_biased_split
from .vvcg import (
    SecondOrderVCGRule,
    VirtualVCGRule,
    reduced_form_of,
    rule_from_weights,
    run_vvcg,
    second_order_reduced_form,
    sovcg_collapse,
    tie_break,
    w_value,
)

__version__ = "0.1.0"
