"""Randomly biased walks on Galton-Watson trees, near the slow-movement regime.

The package has three layers:

- environments and the quenched walk (``environment``, ``walker``,
  ``observables``): grow boundary-case branching random walk potentials,
  run the nearest-neighbour conductance walk by excursions, and measure
  ranges, barriers and additive martingales;
- exact quenched formulas (``quenched``): closed-form hitting
  probabilities, single-excursion local-time laws and their geometric
  compounds, against which the simulations are verified;
- one-dimensional limit theory (``onedim``) and the spine construction
  (``spine``): conditioned random-walk functionals, renewal constants and
  the limit constants governing heavy-range asymptotics.

``experiments`` and the ``gwtwalk`` command line tie the layers together
into reproducible verification runs.
"""

from .environment import (
    DiscreteLaw,
    Environment,
    GaussianBinaryLaw,
    PopulationCapError,
    law_from_config,
    make_canonical_law,
    verify_boundary_case,
)
from .estimates import ConstantEstimate
from .walker import (
    StepCapExceeded,
    StepCapPolicy,
    WalkRecord,
    estimate_hitting_probability,
    run_excursion,
    run_n_excursions,
    transition,
)

__version__ = "0.1.0"

__all__ = [
    "ConstantEstimate",
    "DiscreteLaw",
    "Environment",
    "GaussianBinaryLaw",
    "PopulationCapError",
    "StepCapExceeded",
    "StepCapPolicy",
    "WalkRecord",
    "estimate_hitting_probability",
    "law_from_config",
    "make_canonical_law",
    "run_excursion",
    "run_n_excursions",
    "transition",
    "verify_boundary_case",
    "__version__",
]
