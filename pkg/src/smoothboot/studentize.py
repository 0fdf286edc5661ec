"""Kernel plug-in estimate of n Var(F_n^{-1}(q)), used to Studentize roots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import TRIANGULAR, Kernel
from .quantiles import as_values, order_index


class DegenerateStudentizerError(ArithmeticError):
    """No observation falls inside the h-window around the sample quantile."""

    def __init__(self, n: int, xi: float, q: float):
        self.n, self.xi, self.q = n, xi, q
        super().__init__(f"degenerate Studentizer: zero kernel sum (n={n}, xi={xi:g}, q={q:g})")


@dataclass(frozen=True)
class StudentizeSpec:
    xi: float
    q: float = 0.5
    kernel_h: Kernel = TRIANGULAR

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")


def kernel_sums(rows: np.ndarray, centers, xi, h: Kernel) -> np.ndarray:
    """``sum_i h((center - X_i) / xi)`` along the last axis of ``rows``."""
    centers = np.asarray(centers, dtype=float)
    return h.pdf((centers[..., None] - rows) / np.asarray(xi)[..., None]).sum(axis=-1)


def s_hat_from_sums(sums, n: int, xi, q: float):
    """``s_hat`` (not squared) from h-sums; zero sums give ``inf``."""
    sums = np.asarray(sums, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sqrt(q * (1.0 - q)) * n * np.asarray(xi) / sums


def s_hat_squared(s, spec: StudentizeSpec) -> float:
    """``q(1-q) (n xi)^2 / (sum_i h((F_n^{-1}(q) - X_i)/xi))^2``."""
    v = as_values(s)
    n = v.size
    quantile = v[order_index(n, spec.q)]
    total = float(kernel_sums(v, quantile, spec.xi, spec.kernel_h))
    if total <= 0.0:
        raise DegenerateStudentizerError(n, spec.xi, spec.q)
    return spec.q * (1.0 - spec.q) * (n * spec.xi) ** 2 / total**2


def studentized_root(s, target: float, spec: StudentizeSpec) -> float:
    v = as_values(s)
    n = v.size
    quantile = v[order_index(n, spec.q)]
    return float(np.sqrt(n) * (quantile - target) / np.sqrt(s_hat_squared(v, spec)))
