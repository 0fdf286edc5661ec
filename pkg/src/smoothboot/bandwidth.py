"""Bootstrap selection of bandwidths over grids at the optimal orders.

An outermost level of samples X° is drawn from F_hat at a deliberately
larger bandwidth gamma. Each candidate bandwidth tuple is scored by how
often its interval, built on X°, covers the gamma-smoothed quantile of
the original sample. The candidate with the smallest coverage error wins.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import (
    OUTERMOST,
    SELECT,
    BootstrapPlan,
    Progress,
    draw_batches,
    resample_roots,
    substream,
)
from .intervals import ROLES, canonical_method, fit_interval
from .kernels import smoothed_quantiles
from .quantiles import as_values, order_index, _ceil_product
from .studentize import DegenerateStudentizerError, kernel_sums, s_hat_from_sums

GRID_LOW, GRID_HIGH = 0.2, 2.0

# (Delta_lo, Delta_hi) on the -log_n scale; the grid spans
# [GRID_LOW * n^-Delta_hi, GRID_HIGH * n^-Delta_lo]
GRID_EXPONENTS = {
    ("I1", "eta"): (1 / 4, 3 / 8),
    ("I2", "beta"): (1 / 12, 2 / 9),
    ("I2", "eta"): (1 / 3, 1 / 3),
    ("I3", "eta"): (1 / 6, 1 / 6),
    ("I3", "xi"): (3 / 8, 1 / 2),
    ("I4", "beta"): (2 / 19, 2 / 19),
    ("I4", "eta"): (11 / 57, 11 / 57),
    ("I4", "xi"): (1 / 2, 11 / 19),
}

DEFAULT_GRID_SIZE = {"I1": 20, "I2": 5, "I3": 20, "I4": 4}

ROLE_ALIASES = {"outer_beta": "beta", "inner_eta": "eta", "studentize_xi": "xi"}

# the bandwidth whose largest pilot value sets gamma
OUTER_ROLE = {"I1": "eta", "I2": "beta", "I3": "eta", "I4": "beta"}


@dataclass(frozen=True)
class BandwidthGrid:
    role: str
    values: tuple
    order_exponents: tuple


def default_grid(method: str, role: str, n: int, size: Optional[int] = None) -> BandwidthGrid:
    method = canonical_method(method)
    role = ROLE_ALIASES.get(role, role)
    try:
        lo_exp, hi_exp = GRID_EXPONENTS[(method, role)]
    except KeyError:
        raise ValueError(f"no bandwidth grid for method {method} and role {role!r}") from None
    size = size or DEFAULT_GRID_SIZE[method]
    values = np.linspace(GRID_LOW * n ** (-hi_exp), GRID_HIGH * n ** (-lo_exp), size)
    return BandwidthGrid(role=role, values=tuple(float(x) for x in values),
                         order_exponents=(lo_exp, hi_exp))


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "I1"
    alpha: float = 0.05
    M: float = 1.5
    n_outermost: int = 500
    grid_sizes: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)  # role -> explicit values, overriding defaults

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if self.method not in DEFAULT_GRID_SIZE:
            raise ValueError(f"bandwidth selection is not defined for {self.method}")
        if not self.M > 1:
            raise ValueError("M must exceed 1")
        if self.n_outermost < 1:
            raise ValueError("n_outermost must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def grid(self, n: int) -> dict:
        out = {}
        for role in ROLES[self.method]:
            if role in self.grids:
                values = tuple(sorted(float(x) for x in self.grids[role]))
                if not values or values[0] <= 0:
                    raise ValueError(f"grid for {role} must be nonempty and positive")
                out[role] = values
            else:
                out[role] = default_grid(self.method, role, n, self.grid_sizes.get(role)).values
        return out


@dataclass
class SelectionResult:
    method: str
    chosen: dict
    gamma: float
    target: float
    table: list  # dicts: role values + coverage + error + n_valid

    def chosen_row(self) -> dict:
        for row in self.table:
            if all(row[r] == v for r, v in self.chosen.items()):
                return row
        raise LookupError("chosen bandwidths missing from table")


def _outermost_samples(v: np.ndarray, gamma: float, count: int, plan: BootstrapPlan, root):
    idx, w = draw_batches(root, OUTERMOST, count, v.size, plan.kernel)
    # sorted rows so shared indices mean the same thing as in fit_interval
    return np.sort(v[idx] + gamma * w, axis=-1)


def _first_level(root, j: int, plan: BootstrapPlan, n: int):
    return draw_batches(substream(root, SELECT, j), plan.first_level, plan.b_first, n, plan.kernel)


def _coverage_fast(method, samples, grid, target, alpha, plan, root, progress):
    """Covered indicators, shape (n_outermost, *grid shape), for I1 and I3."""
    m, n = samples.shape
    q = plan.q
    eta = np.asarray(grid["eta"])
    xi = np.asarray(grid["xi"]) if method == "I3" else None
    kq = order_index(n, q)
    b = plan.b_first
    ka = min(max(_ceil_product(b, alpha), 1), b) - 1
    shape = (m, eta.size) if xi is None else (m, eta.size, xi.size)
    covered = np.zeros(shape, dtype=bool)

    per_row = eta.size * b * n * (1 if xi is None else xi.size)
    chunk = max(1, 4_000_000 // per_row)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        x = samples[start:stop]
        draws = [_first_level(root, j, plan, n) for j in range(start, stop)]
        idx = np.stack([d[0] for d in draws])
        w = np.stack([d[1] for d in draws])
        base = np.take_along_axis(np.broadcast_to(x[:, None, :], idx.shape), idx, axis=-1)
        res = base[:, None] + eta[None, :, None, None] * w[:, None]  # (c, G, B, n)
        centers = smoothed_quantiles(np.broadcast_to(x[:, None, :], (stop - start, eta.size, n)),
                                     eta[None, :], q, plan.kernel)
        qx = np.partition(x, kq, axis=-1)[:, kq]
        if xi is None:
            roots = resample_roots(res, centers[..., None], q)
            crit = np.partition(roots, ka, axis=-1)[..., ka]
            upper = qx[:, None] - crit / math.sqrt(n)
        else:
            qstar = np.partition(res, kq, axis=-1)[..., kq]            # (c, G, B)
            num = math.sqrt(n) * (qstar - centers[..., None])
            sums = kernel_sums(res[:, :, None], qstar[:, :, None], xi[None, None, :, None],
                               plan.kernel_h)                           # (c, G, X, B)
            roots = num[:, :, None] / s_hat_from_sums(sums, n, xi[None, None, :, None], q)
            crit = np.partition(roots, ka, axis=-1)[..., ka]          # (c, G, X)
            s_orig = s_hat_from_sums(kernel_sums(x[:, None, :], qx[:, None], xi[None, :],
                                                 plan.kernel_h), n, xi[None, :], q)  # (c, X)
            upper = qx[:, None, None] - s_orig[:, None, :] * crit / math.sqrt(n)
        covered[start:stop] = target <= upper
        if progress:
            progress(stop, m)
    return covered


def select_bandwidths(
    s,
    cfg: SelectionConfig,
    plan: BootstrapPlan,
    rng=None,
    progress: Progress = None,
    vectorized: bool = True,
) -> SelectionResult:
    v = as_values(s)
    n = v.size
    root = plan.seed if rng is None else rng
    method = cfg.method
    grid = cfg.grid(n)
    roles = ROLES[method]
    gamma = cfg.M * max(grid[OUTER_ROLE[method]])
    target = float(smoothed_quantiles(v, gamma, plan.q, plan.kernel))
    samples = _outermost_samples(v, gamma, cfg.n_outermost, plan, root)

    points = list(itertools.product(*(grid[r] for r in roles)))
    if vectorized and method in ("I1", "I3"):
        cov = _coverage_fast(method, samples, grid, target, cfg.alpha, plan, root, progress)
        # grid axes are (eta,) or (eta, xi), which matches ROLES order
        hits = cov.reshape(cfg.n_outermost, -1).sum(axis=0)
        valid = np.full(len(points), cfg.n_outermost)
    else:
        hits = np.zeros(len(points), dtype=int)
        valid = np.zeros(len(points), dtype=int)
        for j, xo in enumerate(samples):
            sub = substream(root, SELECT, j)
            for p, point in enumerate(points):
                try:
                    fitted = fit_interval(xo, method, plan, dict(zip(roles, point)), rng=sub)
                except DegenerateStudentizerError:
                    continue
                valid[p] += 1
                hits[p] += target <= fitted.interval(cfg.alpha).upper
            if progress:
                progress(j + 1, cfg.n_outermost)

    nominal = 1.0 - cfg.alpha
    table = []
    for point, h, nv in zip(points, hits, valid):
        cov = h / nv if nv else float("nan")
        row = dict(zip(roles, point))
        row.update(coverage=float(cov), error=float(abs(cov - nominal)) if nv else float("inf"),
                   n_valid=int(nv))
        table.append(row)
    usable = [r for r in table if r["n_valid"] > 0]
    if not usable:
        raise DegenerateStudentizerError(n, float("nan"), plan.q)
    # ties go to the smallest bandwidth tuple (grid order is ascending)
    best = min(usable, key=lambda r: (r["error"], tuple(r[k] for k in roles)))
    return SelectionResult(method=method, chosen={r: best[r] for r in roles},
                           gamma=gamma, target=target, table=table)
