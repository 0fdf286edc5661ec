"""Monte Carlo machinery for the smoothed and iterated bootstrap.

Randomness is drawn from counter-based Philox streams keyed by
``(seed, *spawn_key, level, index)``. Nothing depends on evaluation order,
so results are identical however replications are spread over workers.

The first-level batches (for G_hat / K_hat) and the outer-level batches
(for J_hat / L_hat) come from the same keyed stream when batch sharing
is on. Draws fill row-major, so the first ``min(B1, B2)`` batches are the
same ``(Y*, W*)`` realised at the two bandwidths eta and beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import TRIANGULAR, Kernel, smoothed_quantiles
from .quantiles import as_values, order_index, _ceil_product
from .studentize import StudentizeSpec, kernel_sums, s_hat_from_sums

# stream levels
DATA, FIRST, OUTER, INNER, OUTERMOST, SELECT = range(6)
_Y, _W = 0, 1

Progress = Optional[Callable[[int, int], None]]


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def substream(root, *key: int) -> np.random.SeedSequence:
    root = as_seed_sequence(root)
    return np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(key))


def stream(root, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(substream(root, *key)))


@dataclass(frozen=True)
class BootstrapPlan:
    """Monte Carlo sizes and shared settings for one interval construction."""

    b_first: int = 1000
    b_outer: int = 1500
    b_inner: int = 1000
    q: float = 0.5
    seed: int = 0
    kernel: Kernel = TRIANGULAR
    kernel_h: Kernel = TRIANGULAR
    share_batches: bool = True
    chunk_elements: int = 2_000_000

    def __post_init__(self):
        for name in ("b_first", "b_outer", "b_inner"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")

    def studentizer(self, xi: float) -> StudentizeSpec:
        return StudentizeSpec(xi=xi, q=self.q, kernel_h=self.kernel_h)

    @property
    def first_level(self) -> int:
        return OUTER if self.share_batches else FIRST


@dataclass(frozen=True)
class SharedBatch:
    y_star: np.ndarray  # 0-based indices into the sorted sample
    w_star: np.ndarray


@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    """Sorted Monte Carlo realisations of a bootstrap distribution."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size < 1:
            raise ValueError("empty distribution")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    def quantile(self, p: float) -> float:
        """``values[ceil(B p)]`` with the index clamped to ``[1, B]``.

        Calibrated levels can reach 0 or 1 exactly, so unlike the public
        ``empirical_quantile`` this accepts the closed interval.
        """
        b = self.size
        k = min(max(_ceil_product(b, p), 1), b)
        return float(self.values[k - 1])

    def cdf(self, t):
        out = np.searchsorted(self.values, t, side="right") / self.size
        return float(out) if np.ndim(t) == 0 else out


def empirical_quantile(d: EmpiricalDist, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return d.quantile(p)


def prepivot(d: EmpiricalDist, t):
    return d.cdf(t)


def draw_shared_batch(n: int, kernel: Kernel, rng: np.random.Generator) -> SharedBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    y = rng.integers(0, n, size=n)
    w = kernel.quantile(rng.random(n))
    return SharedBatch(y_star=y, w_star=w)


def realize_resample(s, batch: SharedBatch, bandwidth: float) -> np.ndarray:
    if bandwidth < 0:
        raise ValueError("bandwidth must be nonnegative")
    v = as_values(s)
    return np.sort(v[batch.y_star] + bandwidth * batch.w_star)


def draw_batches(root, level: int, count: int, n: int, kernel: Kernel):
    """``count`` batches of ``(Y*, W*)`` as two ``(count, n)`` arrays."""
    idx = stream(root, level, _Y).integers(0, n, size=(count, n))
    w = kernel.quantile(stream(root, level, _W).random((count, n)))
    return idx, w


def resample_roots(resamples, centers, q: float, studentize: Optional[StudentizeSpec] = None):
    """Roots ``n^{1/2}(F*^{-1}(q) - center)``, optionally divided by ``s_hat``.

    ``resamples`` has shape ``(..., n)``; ``centers`` broadcasts against
    ``resamples.shape[:-1]``. A zero h-sum gives a root of ``+-inf`` with
    the sign of the numerator.
    """
    resamples = np.asarray(resamples, dtype=float)
    n = resamples.shape[-1]
    k = order_index(n, q)
    qstar = np.partition(resamples, k, axis=-1)[..., k]
    num = np.sqrt(n) * (qstar - centers)
    if studentize is None:
        return num
    sums = kernel_sums(resamples, qstar, studentize.xi, studentize.kernel_h)
    degenerate = sums <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = num / s_hat_from_sums(sums, n, studentize.xi, q)
    if np.any(degenerate):
        roots = np.where(degenerate, np.copysign(np.inf, num), roots)
        roots = np.where(degenerate & (num == 0.0), 0.0, roots)
    return roots


def estimate_root_dist(
    s,
    plan: BootstrapPlan,
    level_bandwidth: float,
    studentize: Optional[StudentizeSpec] = None,
    rng=None,
) -> EmpiricalDist:
    """G_hat (or K_hat when Studentized) by B1 resamples from F_hat at ``level_bandwidth``."""
    v = as_values(s)
    root = plan.seed if rng is None else rng
    center = smoothed_quantiles(v, level_bandwidth, plan.q, plan.kernel)
    idx, w = draw_batches(root, plan.first_level, plan.b_first, v.size, plan.kernel)
    resamples = v[idx] + level_bandwidth * w
    return EmpiricalDist(resample_roots(resamples, center, plan.q, studentize))


def estimate_prepivot_dist(
    s,
    plan: BootstrapPlan,
    beta: float,
    eta: float,
    studentize: Optional[StudentizeSpec] = None,
    rng=None,
    progress: Progress = None,
) -> EmpiricalDist:
    """J_hat (or L_hat when Studentized): the law of the prepivoted outer root.

    Each outer sample X* is drawn from F_hat at ``beta``; its inner
    distribution uses B3 resamples from the ``eta``-smoothed empirical of
    X*, centred at that distribution's q-quantile.
    """
    v = as_values(s)
    n = v.size
    q = plan.q
    root = plan.seed if rng is None else rng

    idx, w = draw_batches(root, OUTER, plan.b_outer, n, plan.kernel)
    outer = v[idx] + beta * w
    outer_center = smoothed_quantiles(v, beta, q, plan.kernel)
    outer_roots = resample_roots(outer, outer_center, q, studentize)
    inner_centers = smoothed_quantiles(outer, eta, q, plan.kernel)

    u = np.empty(plan.b_outer)
    chunk = max(1, plan.chunk_elements // (plan.b_inner * n))
    for start in range(0, plan.b_outer, chunk):
        stop = min(start + chunk, plan.b_outer)
        c = stop - start
        idx2 = np.empty((c, plan.b_inner, n), dtype=np.int64)
        u2 = np.empty((c, plan.b_inner, n))
        for j, m in enumerate(range(start, stop)):
            g = stream(root, INNER, m)
            idx2[j] = g.integers(0, n, size=(plan.b_inner, n))
            g.random(out=u2[j])
        idx2 += (np.arange(c) * n)[:, None, None]
        inner = outer[start:stop].ravel()[idx2] + eta * plan.kernel.quantile(u2)
        inner_roots = resample_roots(inner, inner_centers[start:stop, None], q, studentize)
        u[start:stop] = (inner_roots <= outer_roots[start:stop, None]).mean(axis=-1)
        if progress is not None:
            progress(stop, plan.b_outer)
    return EmpiricalDist(u)
