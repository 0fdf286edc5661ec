"""Upper confidence bounds for a population quantile.

Every method reduces to ``upper = center - scale * R^{-1}(lambda)`` where
``R`` is a Monte Carlo root distribution and ``lambda`` is either the
nominal ``alpha`` or a level calibrated by a second bootstrap level:

=========  ==========================  ===============  ==================
method     center                      scale            calibration
=========  ==========================  ===============  ==================
I1         F_n^{-1}(q)                 n^{-1/2}         none
I2         F_n^{-1}(q)                 n^{-1/2}         J_hat
I3         F_n^{-1}(q)                 n^{-1/2} s_hat   none
I4         F_n^{-1}(q)                 n^{-1/2} s_hat   L_hat
I1_kappa   zeta-smoothed quantile      n^{-1/2}         none
=========  ==========================  ===============  ==================
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from scipy.stats import norm

from .engine import (
    BootstrapPlan,
    EmpiricalDist,
    Progress,
    draw_batches,
    estimate_prepivot_dist,
    estimate_root_dist,
)
from .kernels import smoothed_quantiles
from .quantiles import as_values, sample_quantile
from .studentize import s_hat_squared

METHODS = ("I1", "I2", "I3", "I4", "I1_kappa")
ITERATED = ("I2", "I4")
STUDENTIZED = ("I3", "I4")

# roles each method consumes
ROLES = {
    "I1": ("eta",),
    "I2": ("beta", "eta"),
    "I3": ("eta", "xi"),
    "I4": ("beta", "eta", "xi"),
    "I1_kappa": ("eta", "zeta"),
}

# -log_n exponents of the fixed simulation bandwidths
DEFAULT_EXPONENTS = {
    "I1": {"eta": 1 / 3},
    "I2": {"beta": 1 / 5, "eta": 1 / 3},
    "I3": {"eta": 1 / 6, "xi": 1 / 2},
    "I4": {"beta": 2 / 19, "eta": 11 / 57, "xi": 1 / 2},
    "I1_kappa": {"eta": 0.3, "zeta": 1 / 2},
}

ALIASES = {"i1": "I1", "i2": "I2", "i3": "I3", "i4": "I4", "i1k": "I1_kappa", "i1_kappa": "I1_kappa"}


def canonical_method(name: str) -> str:
    if name in METHODS:
        return name
    try:
        return ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS}") from None


def default_bandwidths(method: str, n: int, multipliers: Optional[dict] = None) -> dict:
    method = canonical_method(method)
    multipliers = multipliers or {}
    return {
        role: multipliers.get(role, 1.0) * n ** (-expo)
        for role, expo in DEFAULT_EXPONENTS[method].items()
    }


@dataclass(frozen=True)
class IntervalResult:
    """One-sided interval ``(-inf, upper]`` of nominal level ``1 - alpha``."""

    upper: float
    method: str
    nominal: float
    calibrated_level: Optional[float] = None
    mc_sizes: dict = field(default_factory=dict)
    bandwidths: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.upper):
            raise ValueError("interval endpoint is not finite")
        if not 0.0 < self.nominal < 1.0:
            raise ValueError("nominal level must lie in (0, 1)")
        if self.calibrated_level is not None and not 0.0 <= self.calibrated_level <= 1.0:
            raise ValueError("calibrated level outside [0, 1]")

    @property
    def alpha(self) -> float:
        return 1.0 - self.nominal

    def contains(self, theta: float) -> bool:
        return theta <= self.upper

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TwoSidedResult:
    lower: float
    upper: float
    nominal: float
    length: float
    crossed: bool = False

    def contains(self, theta: float) -> bool:
        return self.lower < theta <= self.upper


@dataclass(frozen=True, eq=False)
class FittedRoot:
    """The alpha-independent part of an interval: reuse it across levels."""

    method: str
    center: float
    scale: float
    roots: EmpiricalDist
    calibration: Optional[EmpiricalDist]
    mc_sizes: dict
    bandwidths: dict

    def level(self, alpha: float) -> float:
        if self.calibration is None:
            return alpha
        return self.calibration.quantile(alpha)

    def interval(self, alpha: float) -> IntervalResult:
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        lam = self.level(alpha)
        upper = self.center - self.scale * self.roots.quantile(lam)
        return IntervalResult(
            upper=upper,
            method=self.method,
            nominal=1.0 - alpha,
            calibrated_level=lam if self.calibration is not None else None,
            mc_sizes=dict(self.mc_sizes),
            bandwidths=dict(self.bandwidths),
        )


def _require(bw: dict, role: str, method: str) -> float:
    value = bw.get(role)
    if value is None:
        raise ValueError(f"method {method} needs bandwidth {role!r}")
    return float(value)


def fit_interval(
    s,
    method: str,
    plan: BootstrapPlan,
    bandwidths: Optional[dict] = None,
    rng=None,
    kappa_center: str = "eta",
    progress: Progress = None,
) -> FittedRoot:
    """Run the Monte Carlo for ``method`` once; missing bandwidths take the defaults."""
    method = canonical_method(method)
    v = as_values(s)
    n = v.size
    q = plan.q
    bw = default_bandwidths(method, n)
    bw.update({k: v_ for k, v_ in (bandwidths or {}).items() if v_ is not None and k in ROLES[method]})
    rng = plan.seed if rng is None else rng

    center = sample_quantile(v, q)
    scale = 1.0 / math.sqrt(n)
    calibration = None
    sizes = {"b_first": plan.b_first}
    eta = _require(bw, "eta", method)

    if method in STUDENTIZED:
        spec = plan.studentizer(_require(bw, "xi", method))
        scale *= math.sqrt(s_hat_squared(v, spec))
    else:
        spec = None

    if method == "I1_kappa":
        zeta = _require(bw, "zeta", method)
        if kappa_center not in ("eta", "zeta"):
            raise ValueError("kappa_center must be 'eta' or 'zeta'")
        center = float(smoothed_quantiles(v, zeta, q, plan.kernel))
        ref = float(smoothed_quantiles(v, eta if kappa_center == "eta" else zeta, q, plan.kernel))
        idx, w = draw_batches(rng, plan.first_level, plan.b_first, n, plan.kernel)
        resamples = v[idx] + eta * w
        stats = smoothed_quantiles(resamples, zeta, q, plan.kernel)
        roots = EmpiricalDist(math.sqrt(n) * (stats - ref))
    else:
        roots = estimate_root_dist(v, plan, eta, spec, rng=rng)

    if method in ITERATED:
        beta = _require(bw, "beta", method)
        calibration = estimate_prepivot_dist(v, plan, beta, eta, spec, rng=rng, progress=progress)
        sizes.update(b_outer=plan.b_outer, b_inner=plan.b_inner)

    return FittedRoot(
        method=method,
        center=center,
        scale=scale,
        roots=roots,
        calibration=calibration,
        mc_sizes=sizes,
        bandwidths={k: bw[k] for k in ROLES[method]},
    )


def build_I1(s, eta: float, alpha: float, plan: BootstrapPlan, rng=None) -> IntervalResult:
    return fit_interval(s, "I1", plan, {"eta": eta}, rng).interval(alpha)


def build_I2(s, beta: float, eta: float, alpha: float, plan: BootstrapPlan, rng=None) -> IntervalResult:
    return fit_interval(s, "I2", plan, {"beta": beta, "eta": eta}, rng).interval(alpha)


def build_I3(s, eta: float, xi: float, alpha: float, plan: BootstrapPlan, rng=None) -> IntervalResult:
    return fit_interval(s, "I3", plan, {"eta": eta, "xi": xi}, rng).interval(alpha)


def build_I4(
    s, beta: float, eta: float, xi: float, alpha: float, plan: BootstrapPlan, rng=None
) -> IntervalResult:
    return fit_interval(s, "I4", plan, {"beta": beta, "eta": eta, "xi": xi}, rng).interval(alpha)


def build_I1_kappa(
    s, eta: float, zeta: float, alpha: float, plan: BootstrapPlan, rng=None, kappa_center: str = "eta"
) -> IntervalResult:
    return fit_interval(s, "I1_kappa", plan, {"eta": eta, "zeta": zeta}, rng, kappa_center).interval(alpha)


def two_sided(lower_from: IntervalResult, upper_from: IntervalResult) -> TwoSidedResult:
    """``I_{alpha_lo} minus I_{alpha_hi}``: the interval ``(lower_from.upper, upper_from.upper]``.

    ``lower_from`` is the bound at the larger alpha (e.g. 0.95) and
    ``upper_from`` the one at the smaller alpha (e.g. 0.05). Crossed
    endpoints are clamped to an empty interval and flagged.
    """
    if lower_from.method != upper_from.method:
        raise ValueError("two-sided interval needs bounds from the same method")
    if not lower_from.nominal < upper_from.nominal:
        raise ValueError("lower_from must have the larger alpha")
    lo, hi = lower_from.upper, upper_from.upper
    crossed = lo >= hi
    if crossed:
        lo = hi
    return TwoSidedResult(
        lower=lo,
        upper=hi,
        nominal=upper_from.nominal - lower_from.nominal,
        length=hi - lo,
        crossed=crossed,
    )


def eq1_error_term(f_at_q: float, f_prime_at_q: float, q: float, alpha: float) -> float:
    """Leading ``n^{-1/2}`` coefficient in the coverage of I1.

    Coverage of I1 is approximately ``1 - alpha + n^{-1/2} * eq1_error_term(...)``.
    """
    if not f_at_q > 0:
        raise ValueError("density at the quantile must be positive")
    sigma = math.sqrt(q * (1.0 - q))
    z = norm.ppf(alpha)
    coef = (2 * q - 1) / (2 * sigma) + sigma * f_prime_at_q / f_at_q**2
    return float(coef * z * z * norm.pdf(z))
