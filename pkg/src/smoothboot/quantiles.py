"""Empirical distribution and order-statistic utilities.

The sample quantile is ``inf{x : F_n(x) >= q}``, i.e. the ``ceil(n q)``-th
order statistic (1-indexed). No interpolation variants are offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# n*q products such as 3*0.1 carry representation error in the last ulp;
# snapping to the nearest integer first keeps ceil() on the intended side.
_SNAP = 1e-9


def _ceil_product(n: int, p: float) -> int:
    x = n * p
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def order_index(n: int, q: float) -> int:
    """0-based index of the ``ceil(n q)``-th order statistic, clamped to the sample."""
    return min(max(_ceil_product(n, q), 1), n) - 1


@dataclass(frozen=True, eq=False)
class Sample:
    """An observed data vector, stored sorted."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size < 1:
            raise ValueError("a sample needs at least one observation")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_values(s) -> np.ndarray:
    """Sorted float array from a ``Sample`` or any array-like."""
    if isinstance(s, Sample):
        return s.values
    return Sample(s).values


def _check_prob(q: float, name: str = "q"):
    if not 0.0 < q < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {q}")


def sample_quantile(s, q: float) -> float:
    _check_prob(q)
    v = as_values(s)
    return float(v[order_index(v.size, q)])


def delta_n(n: int, q: float) -> float:
    """``1 + nq - ceil(nq)``, the lattice offset of the sample quantile."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_prob(q)
    return 1.0 + n * q - _ceil_product(n, q)


def empirical_cdf(s, t):
    v = as_values(s)
    out = np.searchsorted(v, t, side="right") / v.size
    return float(out) if np.ndim(t) == 0 else out
