"""Common container for Monte Carlo / numerical estimates.

Every estimator in this package returns a :class:`ConstantEstimate` so that
downstream code (comparison helpers, CLI reports, CSV writers) can treat a
simulated hitting probability, a fitted exponent and a limit constant the
same way: a value, an uncertainty, and enough metadata to reproduce the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class ConstantEstimate:
    """A point estimate with its standard error and provenance.

    Attributes
    ----------
    value : float
        The estimate itself.
    se : float
        Standard error attached to ``value`` (0.0 for exact computations).
    samples : int
        Number of Monte Carlo samples / replicas behind the estimate,
        or 0 for deterministic numerics.
    method : str
        Short tag naming the estimator ("excursion-mc", "ladder-renewal", ...).
    params : dict
        Estimator parameters needed to reproduce the number (n, seeds,
        window widths, quadrature settings, ...).
    notes : str
        Free-form remarks, e.g. warnings about truncation.
    batch_values : list[float] | None
        Per-batch values when the estimate was produced by batch means.
        Carrying them along lets derived quantities (products, ratios,
        quadratures over many correlated nodes) recompute an honest SE by
        pushing each batch through the whole pipeline instead of
        pretending independence.
    """

    value: float
    se: float
    samples: int = 0
    method: str = ""
    params: dict[str, Any] = field(default_factory=dict)
    notes: str = ""
    batch_values: list[float] | None = None

    @classmethod
    def from_batches(
        cls,
        batch_values,
        samples: int = 0,
        method: str = "",
        params: dict[str, Any] | None = None,
        notes: str = "",
        value: float | None = None,
    ) -> "ConstantEstimate":
        """Build an estimate whose SE is the standard error of batch means.

        ``value`` defaults to the mean of the batches; passing it
        explicitly lets the caller use a pooled estimate for the value
        while keeping the batch spread as the uncertainty.
        """
        vals = [float(v) for v in batch_values]
        if len(vals) < 2:
            raise ValueError("need at least two batches for a batch-means SE")
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
        se = (var / len(vals)) ** 0.5
        return cls(
            value=mean if value is None else float(value),
            se=se,
            samples=samples,
            method=method,
            params={} if params is None else params,
            notes=notes,
            batch_values=vals,
        )

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        """Symmetric ``z``-standard-error interval around the value."""
        return self.value - z * self.se, self.value + z * self.se

    def consistent_with(self, other: float | "ConstantEstimate", z: float = 3.0) -> bool:
        """Whether ``other`` lies within ``z`` joint standard errors.

        For two estimates the errors are combined in quadrature; for a
        plain float only this estimate's error is used.
        """
        if isinstance(other, ConstantEstimate):
            gap = abs(self.value - other.value)
            width = z * (self.se ** 2 + other.se ** 2) ** 0.5
        else:
            gap = abs(self.value - float(other))
            width = z * self.se
        return gap <= width

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        tag = f" [{self.method}]" if self.method else ""
        return f"{self.value:.6g} +/- {self.se:.2g}{tag}"
