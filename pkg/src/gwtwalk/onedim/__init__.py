"""One-dimensional centred random-walk laboratory.

Everything downstream of the many-to-one reduction lives here: increment
laws with verified moment conditions, survival/ladder simulation kernels,
estimators for the fluctuation constants (``c_+``, ``c_-``, ``c_R``, the
renewal function), conditioned-walk functionals, the quadratures that
assemble the limit constants of the heavy-range law, and a Monte Carlo
probe harness for the supporting inequality catalog.
"""

from gwtwalk.onedim.laws import (
    Walk1DLaw,
    gaussian_law,
    mixture_law,
    moment_check,
    rademacher_law,
    tilted_gaussian_law,
    uniform_law,
)
from gwtwalk.onedim.walks import WalkSummary, simulate_walk
from gwtwalk.onedim.constants import (
    LadderPool,
    WalkConstants,
    estimate_constants,
    harvest_ladder_heights,
    product_identity_report,
    renewal_function,
)
from gwtwalk.onedim.conditioned import (
    SurvivorEnsemble,
    collect_survivors,
    estimate_C0,
    estimate_C_ab,
    estimate_G,
)
from gwtwalk.onedim.limits import (
    LimitConstants,
    lambda0,
    lambda1_product_route,
    lambda1_quadrature_route,
    limit_constants,
)
from gwtwalk.onedim.inequalities import (
    ProbeResult,
    inequality_probe,
    probe_catalog,
    run_probe_catalog,
)

__all__ = [
    "LadderPool",
    "LimitConstants",
    "ProbeResult",
    "SurvivorEnsemble",
    "Walk1DLaw",
    "WalkConstants",
    "WalkSummary",
    "collect_survivors",
    "estimate_C0",
    "estimate_C_ab",
    "estimate_G",
    "estimate_constants",
    "gaussian_law",
    "harvest_ladder_heights",
    "inequality_probe",
    "lambda0",
    "lambda1_product_route",
    "lambda1_quadrature_route",
    "limit_constants",
    "mixture_law",
    "moment_check",
    "probe_catalog",
    "product_identity_report",
    "rademacher_law",
    "renewal_function",
    "run_probe_catalog",
    "simulate_walk",
    "tilted_gaussian_law",
    "uniform_law",
]
