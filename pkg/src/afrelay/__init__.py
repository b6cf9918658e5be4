"""Power allocation and effective capacity for amplify-and-forward
successive relaying under inter-relay interference constraints."""

__version__ = "0.1.0"

from .allocation import (ConstraintSpec, CutoffSolution, PowerPolicy, QosContext,
                         allocate, mu_waterfill, resolve_policy)
from .capacity import (EffectiveCapacityResult, effective_capacity_analytic,
                       effective_capacity_mc, ergodic_capacity_mc,
                       hd_effective_capacity, theta_grid)
from .channel import LinkBudget, cdf_gamma_eq, pdf_gamma_eq, sample_fading
from .protocol import multiplexing_ratio, schedule
