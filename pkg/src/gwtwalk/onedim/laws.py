"""Centred increment laws for the one-dimensional walk laboratory.

Every estimator in this subpackage is driven by a :class:`Walk1DLaw`: a
mean-zero increment distribution with finite variance and finite
exponential moments ``E[exp(-d0*X)]`` and ``E[exp((1+d0)*X)]`` for some
``d0 > 0``.  The laws are deliberately simple (Gaussian, uniform, a
uniform+Gaussian mixture, Rademacher) so that analytic moments are exact
and the compiled kernels can sample them from a small integer tag.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Tuple

import numpy as np

# Integer tags understood by the compiled kernels in ``_kernels``.
KIND_GAUSSIAN = 0
KIND_UNIFORM = 1
KIND_MIXTURE = 2
KIND_RADEMACHER = 3

_KIND_NAMES = {
    KIND_GAUSSIAN: "gaussian",
    KIND_UNIFORM: "uniform",
    KIND_MIXTURE: "mixture",
    KIND_RADEMACHER: "rademacher",
}


@dataclasses.dataclass(frozen=True)
class Walk1DLaw:
    """A centred step distribution with known variance.

    Parameters
    ----------
    name:
        Human-readable tag used in reports and CSV output.
    kind:
        One of the ``KIND_*`` constants; tells the compiled kernels how
        to draw a step from ``(p0, p1)``.
    p0, p1:
        Kernel parameters.  Their meaning depends on ``kind``:
        scale for Gaussian, half-width for uniform, Gaussian admixture
        scale for the mixture.  ``p1`` is reserved (always 0 for the
        built-in laws).
    sigma2:
        Analytic variance of a single step.
    lattice:
        True when the law is supported on a lattice.  Lattice laws are
        fine for survival probabilities and inequality probes but are
        rejected by the conditioned-functional estimators, whose window
        events assume a continuous endpoint density.
    """

    name: str
    kind: int
    p0: float
    p1: float
    sigma2: float
    lattice: bool = False

    def __post_init__(self) -> None:
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown law kind {self.kind}")
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be positive and finite")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def kernel_params(self) -> Tuple[int, float, float]:
        """``(kind, p0, p1)`` triple consumed by the compiled kernels."""
        return (self.kind, self.p0, self.p1)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw increments with numpy (vectorised, for short-horizon work).

        The compiled kernels sample the same distributions step by step;
        both routes draw from the identical family, though not from the
        same stream positions.
        """
        if self.kind == KIND_GAUSSIAN:
            return rng.normal(0.0, self.p0, size=size)
        if self.kind == KIND_UNIFORM:
            return rng.uniform(-self.p0, self.p0, size=size)
        if self.kind == KIND_MIXTURE:
            return rng.uniform(-1.0, 1.0, size=size) + self.p0 * rng.normal(
                0.0, 1.0, size=size
            )
        # Rademacher
        return np.where(rng.random(size=size) < 0.5, 1.0, -1.0)

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "kind": _KIND_NAMES[self.kind],
            "p0": self.p0,
            "p1": self.p1,
            "sigma2": self.sigma2,
            "lattice": self.lattice,
        }


def gaussian_law(sigma: float = 1.0) -> Walk1DLaw:
    """Centred Gaussian steps with standard deviation ``sigma``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Walk1DLaw(
        name=f"gaussian(sigma={sigma:g})",
        kind=KIND_GAUSSIAN,
        p0=float(sigma),
        p1=0.0,
        sigma2=float(sigma) ** 2,
    )


def uniform_law(half_width: float = 1.0) -> Walk1DLaw:
    """Uniform steps on ``[-half_width, half_width]``."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    return Walk1DLaw(
        name=f"uniform(w={half_width:g})",
        kind=KIND_UNIFORM,
        p0=float(half_width),
        p1=0.0,
        sigma2=float(half_width) ** 2 / 3.0,
    )


def mixture_law(eps: float = 0.25) -> Walk1DLaw:
    """Uniform[-1, 1] step plus an independent ``eps * N(0,1)`` smear.

    A convenient "lattice-free but not Gaussian" law for cross-checking
    that estimators depend on the increment distribution only through
    its variance.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return Walk1DLaw(
        name=f"mixture(eps={eps:g})",
        kind=KIND_MIXTURE,
        p0=float(eps),
        p1=0.0,
        sigma2=1.0 / 3.0 + float(eps) ** 2,
    )


def rademacher_law() -> Walk1DLaw:
    """Fair ±1 steps (lattice; excluded from window-based estimators)."""
    return Walk1DLaw(
        name="rademacher",
        kind=KIND_RADEMACHER,
        p0=0.0,
        p1=0.0,
        sigma2=1.0,
        lattice=True,
    )


def tilted_gaussian_law() -> Walk1DLaw:
    """The size-biased step law of the canonical binary environment.

    Under the change of measure used by the many-to-one reduction, the
    potential along the distinguished ray of the canonical Gaussian
    binary environment performs a centred Gaussian walk with variance
    ``2 ln 2`` per step.  This law is the bridge between tree-level
    simulations and the one-dimensional estimates here.
    """
    sigma2 = 2.0 * math.log(2.0)
    law = Walk1DLaw(
        name="canonical-tilted",
        kind=KIND_GAUSSIAN,
        p0=math.sqrt(sigma2),
        p1=0.0,
        sigma2=sigma2,
    )
    return law


def moment_check(
    law: Walk1DLaw,
    rng: Optional[np.random.Generator] = None,
    samples: int = 200_000,
    delta0: float = 0.5,
) -> dict:
    """Numerically probe the standing moment assumptions of a law.

    Checks, by plain Monte Carlo:

    * the mean is zero within 4 standard errors;
    * the sample variance matches ``law.sigma2`` within 4 standard errors;
    * ``E[exp(-delta0 * X)]`` and ``E[exp((1 + delta0) * X)]`` are finite
      (their sample means are finite and stable).

    Returns a dict with the estimates, their standard errors, and an
    overall ``ok`` flag.
    """
    if rng is None:
        rng = np.random.default_rng()
    if samples < 1000:
        raise ValueError("need at least 1000 samples for a meaningful check")
    x = law.sample(rng, size=samples)

    mean = float(np.mean(x))
    se_mean = float(np.std(x, ddof=1) / math.sqrt(samples))
    var = float(np.var(x, ddof=1))
    # SE of the sample variance via the fourth central moment.
    m4 = float(np.mean((x - mean) ** 4))
    se_var = math.sqrt(max(m4 - var**2, 0.0) / samples)

    neg_exp = np.exp(-delta0 * x)
    pos_exp = np.exp((1.0 + delta0) * x)
    neg_mean = float(np.mean(neg_exp))
    pos_mean = float(np.mean(pos_exp))

    # The variance floor matters for laws whose sample variance is nearly
    # deterministic (e.g. Rademacher), where the 4-SE band collapses.
    ok = (
        abs(mean) <= 4.0 * se_mean + 1e-12
        and abs(var - law.sigma2) <= 4.0 * se_var + 1e-4 * law.sigma2
        and math.isfinite(neg_mean)
        and math.isfinite(pos_mean)
    )
    return {
        "law": law.name,
        "samples": samples,
        "mean": mean,
        "mean_se": se_mean,
        "variance": var,
        "variance_se": se_var,
        "sigma2_analytic": law.sigma2,
        "delta0": delta0,
        "exp_moment_neg": neg_mean,
        "exp_moment_pos": pos_mean,
        "ok": bool(ok),
    }
