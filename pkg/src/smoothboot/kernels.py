"""Compact-support kernels and the kernel-smoothed empirical distribution.

All evaluations are exact sums over the sample; nothing is binned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

QUANTILE_TOL = 1e-10
QUANTILE_MAXITER = 200


class UnsupportedDerivativeError(ValueError):
    """Raised when a kernel cannot supply the requested density derivative."""


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density supported on ``[-a, a]``.

    ``derivatives`` maps an order to a vectorised callable for the
    piecewise derivative of the pdf; at kink points the callable returns
    the average of the one-sided limits.
    """

    name: str
    pdf: ArrayFn
    cdf: ArrayFn
    quantile: ArrayFn
    support_halfwidth: float
    derivatives: dict = field(default_factory=dict)

    def derivative(self, x, order: int) -> np.ndarray:
        try:
            fn = self.derivatives[order]
        except KeyError:
            raise UnsupportedDerivativeError(
                f"kernel {self.name!r} has no derivative of order {order}"
            ) from None
        return fn(np.asarray(x, dtype=float))

    def second_moment(self) -> float:
        from scipy.integrate import quad

        a = self.support_halfwidth
        return quad(lambda x: x * x * float(self.pdf(np.asarray(x))), -a, a)[0]

    def scaled(self, c: float, name: str | None = None) -> "Kernel":
        """Kernel of ``c * W`` where ``W`` has this kernel's law."""
        if c <= 0:
            raise ValueError("scale must be positive")
        derivs = {
            order: (lambda x, fn=fn, order=order: fn(x / c) / c ** (order + 1))
            for order, fn in self.derivatives.items()
        }
        return Kernel(
            name=name or f"{self.name}*{c:g}",
            pdf=lambda x: self.pdf(np.asarray(x) / c) / c,
            cdf=lambda x: self.cdf(np.asarray(x) / c),
            quantile=lambda u: c * self.quantile(u),
            support_halfwidth=c * self.support_halfwidth,
            derivatives=derivs,
        )

    def unit_variance(self) -> "Kernel":
        """Rescale so that the second moment equals one."""
        return self.scaled(1.0 / np.sqrt(self.second_moment()), name=f"{self.name}-unitvar")


def _tri_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(1.0 - np.abs(x), 0.0)


def _tri_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    return np.where(x < 0.0, 0.5 * (1.0 + x) ** 2, 1.0 - 0.5 * (1.0 - x) ** 2)


def _tri_quantile(u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        t = 1.0 - np.sqrt(2.0 * min(u, 1.0 - u))
        return np.copysign(t, u - 0.5)
    t = np.subtract(1.0, u)
    np.minimum(u, t, out=t)
    t *= 2.0
    np.sqrt(t, out=t)
    np.subtract(1.0, t, out=t)
    return np.copysign(t, u - 0.5, out=t)


def _tri_d1(x):
    ax = np.abs(x)
    inner = np.where(ax < 1.0, -np.sign(x), 0.0)
    # one-sided averages at the kinks 0 and +-1
    return np.where(ax == 1.0, -0.5 * np.sign(x), inner)


def make_triangular_kernel() -> Kernel:
    """The triangular density ``1 - |x|`` on ``[-1, 1]``, unnormalised in variance."""
    return Kernel(
        name="triangular",
        pdf=_tri_pdf,
        cdf=_tri_cdf,
        quantile=_tri_quantile,
        support_halfwidth=1.0,
        derivatives={1: _tri_d1},
    )


def _epa_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)


def _epa_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * x - 0.25 * x**3


def _epa_quantile(u):
    u = np.asarray(u, dtype=float)
    return 2.0 * np.sin(np.arcsin(2.0 * u - 1.0) / 3.0)


def _epa_d1(x):
    ax = np.abs(x)
    inner = np.where(ax < 1.0, -1.5 * x, 0.0)
    return np.where(ax == 1.0, -0.75 * x, inner)


def _epa_d2(x):
    ax = np.abs(x)
    return np.where(ax < 1.0, -1.5, np.where(ax == 1.0, -0.75, 0.0))


def make_epanechnikov_kernel() -> Kernel:
    return Kernel(
        name="epanechnikov",
        pdf=_epa_pdf,
        cdf=_epa_cdf,
        quantile=_epa_quantile,
        support_halfwidth=1.0,
        derivatives={1: _epa_d1, 2: _epa_d2},
    )


KERNELS = {
    "triangular": make_triangular_kernel,
    "epanechnikov": make_epanechnikov_kernel,
}


def get_kernel(name: str, unit_variance: bool = False) -> Kernel:
    try:
        kernel = KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None
    return kernel.unit_variance() if unit_variance else kernel


TRIANGULAR = make_triangular_kernel()


@dataclass(frozen=True, eq=False)
class SmoothedDistribution:
    """Kernel-smoothed empirical distribution of ``sample`` at ``bandwidth``."""

    sample: np.ndarray
    bandwidth: float
    kernel: Kernel = TRIANGULAR

    def __post_init__(self):
        values = np.sort(np.asarray(self.sample, dtype=float).ravel())
        if values.size == 0:
            raise ValueError("empty sample")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        values.setflags(write=False)
        object.__setattr__(self, "sample", values)

    @property
    def n(self) -> int:
        return self.sample.size

    def cdf(self, t):
        return smoothed_cdf(self, t)

    def pdf(self, t):
        return smoothed_pdf(self, t)

    def quantile(self, q: float) -> float:
        return smoothed_quantile(self, q)

    def rvs(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.n, size=size)
        return self.sample[idx] + self.bandwidth * self.kernel.quantile(rng.random(size))


def _scalar_or_array(out, t):
    return float(out) if np.ndim(t) == 0 else out


def smoothed_cdf(d: SmoothedDistribution, t):
    t = np.asarray(t, dtype=float)
    z = (t[..., None] - d.sample) / d.bandwidth
    return _scalar_or_array(d.kernel.cdf(z).mean(axis=-1), t)


def smoothed_pdf(d: SmoothedDistribution, t):
    t = np.asarray(t, dtype=float)
    z = (t[..., None] - d.sample) / d.bandwidth
    return _scalar_or_array(d.kernel.pdf(z).mean(axis=-1) / d.bandwidth, t)


def smoothed_pdf_derivative(d: SmoothedDistribution, t, order: int):
    t = np.asarray(t, dtype=float)
    z = (t[..., None] - d.sample) / d.bandwidth
    vals = d.kernel.derivative(z, order).mean(axis=-1) / d.bandwidth ** (1 + order)
    return _scalar_or_array(vals, t)


def smoothed_quantile(d: SmoothedDistribution, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return float(smoothed_quantiles(d.sample, d.bandwidth, q, d.kernel))


def smoothed_quantiles(rows, bandwidth, q: float, kernel: Kernel = TRIANGULAR) -> np.ndarray:
    """Vectorised ``F_hat^{-1}(q)`` for every row of ``rows``.

    ``rows`` has shape ``(..., n)`` and ``bandwidth`` broadcasts against
    ``rows.shape[:-1]``. A zero bandwidth gives the unsmoothed order
    statistic. Bisection runs until the bracket collapses to a few ulps,
    so the right end is the left-most point with cdf >= q, matching the
    inf-convention, and its cdf is within ``QUANTILE_TOL`` of q.
    """
    from .quantiles import order_index

    rows = np.asarray(rows, dtype=float)
    h = np.broadcast_to(np.asarray(bandwidth, dtype=float), rows.shape[:-1])
    n = rows.shape[-1]
    if np.any(h < 0):
        raise ValueError("bandwidth must be nonnegative")

    result = np.empty(rows.shape[:-1])
    zero = h == 0
    if np.any(zero):
        k = order_index(n, q)
        result[zero] = np.partition(rows[zero], k, axis=-1)[..., k]
    if np.all(zero):
        return result if result.ndim else result[()]

    pos = ~zero
    x = rows[pos]
    hp = h[pos][:, None]
    a = kernel.support_halfwidth
    lo = x.min(axis=-1) - a * hp[:, 0]
    hi = x.max(axis=-1) + a * hp[:, 0]
    for _ in range(QUANTILE_MAXITER):
        mid = 0.5 * (lo + hi)
        f = kernel.cdf((mid[:, None] - x) / hp).mean(axis=-1)
        below = f < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.spacing(np.abs(hi) + 1.0)):
            break
    result[pos] = hi
    return result if result.ndim else result[()]


def sample_from_kernel(kernel: Kernel, rng: np.random.Generator, size=None):
    u = rng.random(size)
    out = kernel.quantile(u)
    return float(out) if size is None else out
