import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from smoothboot.engine import BootstrapPlan, EmpiricalDist
from smoothboot.intervals import (
    IntervalResult,
    build_I1,
    build_I1_kappa,
    build_I2,
    build_I3,
    build_I4,
    canonical_method,
    default_bandwidths,
    eq1_error_term,
    fit_interval,
    two_sided,
)
from smoothboot.models import STD_LOGNORMAL
from smoothboot.quantiles import sample_quantile
from smoothboot.studentize import DegenerateStudentizerError

X15 = np.random.default_rng(21).standard_normal(15)
SMALL = BootstrapPlan(b_first=300, b_outer=60, b_inner=50, q=0.5, seed=5)
ALPHAS = (0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99)


def test_aliases():
    assert canonical_method("i4") == "I4" and canonical_method("i1k") == "I1_kappa"
    with pytest.raises(ValueError):
        canonical_method("I9")


def test_default_bandwidths():
    bw = default_bandwidths("I4", 15)
    assert bw == pytest.approx({"beta": 15 ** (-2 / 19), "eta": 15 ** (-11 / 57), "xi": 15 ** -0.5})


@pytest.mark.parametrize("method", ["I1", "I2", "I3", "I4", "I1_kappa"])
def test_nesting_in_alpha(method):
    fitted = fit_interval(X15, method, SMALL)
    ups = [fitted.interval(a).upper for a in ALPHAS]
    assert all(a >= b for a, b in zip(ups, ups[1:]))


@pytest.mark.parametrize("method", ["I1", "I2", "I3", "I4", "I1_kappa"])
def test_affine_equivariance(method):
    a, c = 3.0, -2.0
    bw = default_bandwidths(method, 15)
    f = fit_interval(X15, method, SMALL, bw)
    g = fit_interval(a * X15 + c, method, SMALL, {k: a * v for k, v in bw.items()})
    for alpha in (0.05, 0.5, 0.95):
        assert g.interval(alpha).upper == pytest.approx(a * f.interval(alpha).upper + c, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-10, 10), st.sampled_from(["I1", "I3"]))
def test_affine_equivariance_property(a, c, method):
    plan = replace(SMALL, b_first=100)
    bw = default_bandwidths(method, 15)
    f = fit_interval(X15, method, plan, bw).interval(0.1).upper
    g = fit_interval(a * X15 + c, method, plan, {k: a * v for k, v in bw.items()}).interval(0.1).upper
    assert g == pytest.approx(a * f + c, abs=1e-8 * (1 + abs(c) + a))


def test_builders_agree_with_fit():
    bw = default_bandwidths("I4", 15)
    assert build_I1(X15, bw["eta"], 0.05, SMALL).upper == fit_interval(X15, "I1", SMALL, bw).interval(0.05).upper
    r = build_I4(X15, bw["beta"], bw["eta"], bw["xi"], 0.05, SMALL)
    assert r.method == "I4" and 0 <= r.calibrated_level <= 1
    assert r.mc_sizes == {"b_first": 300, "b_outer": 60, "b_inner": 50}
    assert build_I2(X15, 0.5, 0.4, 0.05, SMALL).calibrated_level is not None
    assert build_I3(X15, 0.6, 0.3, 0.05, SMALL).calibrated_level is None


def test_i1_definition():
    fitted = fit_interval(X15, "I1", SMALL)
    res = fitted.interval(0.05)
    expect = sample_quantile(X15, 0.5) - fitted.roots.quantile(0.05) / math.sqrt(15)
    assert res.upper == expect and res.nominal == 0.95


def test_median_level_near_sample_quantile():
    res = build_I1(X15, 15 ** (-1 / 3), 0.5, replace(SMALL, b_first=2000))
    assert abs(res.upper - sample_quantile(X15, 0.5)) < 0.5 / math.sqrt(15)


def test_uniform_calibration_reduces_to_unit_level():
    # an exactly uniform calibration grid leaves alpha unchanged up to 1/B
    b2 = 2000
    i2 = fit_interval(X15, "I2", SMALL)
    i1 = fit_interval(X15, "I1", SMALL)
    uniform = EmpiricalDist((np.arange(1, b2 + 1) - 0.5) / b2)
    i2 = replace(i2, calibration=uniform)
    for alpha in (0.05, 0.25, 0.95):
        assert abs(i2.level(alpha) - alpha) <= 1 / b2
        assert i2.interval(alpha).upper == i1.interval(alpha).upper


def test_kappa_reduces_to_i1_as_zeta_vanishes():
    eta = 15 ** (-0.3)
    k = build_I1_kappa(X15, eta, 1e-12, 0.05, SMALL)
    i1 = build_I1(X15, eta, 0.05, SMALL)
    assert k.method == "I1_kappa" and math.isfinite(k.upper)
    assert k.upper == pytest.approx(i1.upper, abs=1e-9)


def test_kappa_center_switch():
    a = fit_interval(X15, "I1_kappa", SMALL, kappa_center="eta")
    b = fit_interval(X15, "I1_kappa", SMALL, kappa_center="zeta")
    assert a.center == b.center and not np.array_equal(a.roots.values, b.roots.values)
    with pytest.raises(ValueError):
        fit_interval(X15, "I1_kappa", SMALL, kappa_center="beta")


def test_degenerate_original_sample_is_hard_error():
    zero = replace(SMALL.kernel_h, pdf=lambda x: np.zeros_like(np.asarray(x, dtype=float)))
    with pytest.raises(DegenerateStudentizerError):
        fit_interval(X15, "I3", replace(SMALL, kernel_h=zero))


def test_interval_result_validation():
    with pytest.raises(ValueError):
        IntervalResult(upper=float("inf"), method="I1", nominal=0.95)
    with pytest.raises(ValueError):
        IntervalResult(upper=1.0, method="I2", nominal=0.95, calibrated_level=1.5)
    r = IntervalResult(upper=1.0, method="I1", nominal=0.95)
    assert r.contains(1.0) and not r.contains(1.0001) and r.alpha == pytest.approx(0.05)


class TestTwoSided:
    def test_nominal_level(self):
        f = fit_interval(X15, "I1", SMALL)
        t = two_sided(f.interval(0.95), f.interval(0.05))
        assert t.nominal == pytest.approx(0.90) and t.length > 0 and not t.crossed
        assert t.contains(sample_quantile(X15, 0.5))

    def test_identical_endpoints_flagged(self):
        a = IntervalResult(upper=1.0, method="I1", nominal=0.05)
        b = IntervalResult(upper=1.0, method="I1", nominal=0.95)
        t = two_sided(a, b)
        assert t.length == 0 and t.crossed and not t.contains(1.0)

    def test_crossed_clamped(self):
        a = IntervalResult(upper=2.0, method="I1", nominal=0.05)
        b = IntervalResult(upper=1.0, method="I1", nominal=0.95)
        t = two_sided(a, b)
        assert (t.lower, t.upper, t.length, t.crossed) == (1.0, 1.0, 0.0, True)

    def test_set_difference_identity(self):
        f = fit_interval(X15, "I3", SMALL)
        lo, hi = f.interval(0.95), f.interval(0.05)
        t = two_sided(lo, hi)
        for theta in np.linspace(-2, 2, 81):
            assert t.contains(theta) == (hi.contains(theta) and not lo.contains(theta))

    def test_misuse(self):
        a = IntervalResult(upper=1.0, method="I1", nominal=0.95)
        with pytest.raises(ValueError):
            two_sided(a, IntervalResult(upper=2.0, method="I2", nominal=0.95))
        with pytest.raises(ValueError):
            two_sided(a, IntervalResult(upper=2.0, method="I1", nominal=0.05))


class TestErrorTerm:
    def test_normal_median_vanishes(self):
        assert eq1_error_term(norm.pdf(0), 0.0, 0.5, 0.05) == 0.0

    def test_median_level_vanishes(self):
        assert eq1_error_term(0.3, -1.7, 0.8, 0.5) == 0.0

    def test_lognormal_coefficient(self):
        f = STD_LOGNORMAL.pdf(1.0)
        h = 1e-6
        fd = (STD_LOGNORMAL.pdf(1 + h) - STD_LOGNORMAL.pdf(1 - h)) / (2 * h)
        assert STD_LOGNORMAL.pdf_prime(1.0) == pytest.approx(fd, abs=1e-8)
        assert f == pytest.approx(0.39894, abs=1e-5) and fd == pytest.approx(-0.39894, abs=1e-5)
        coef = eq1_error_term(f, fd, 0.5, 0.05) / (norm.ppf(0.05) ** 2 * norm.pdf(norm.ppf(0.05)))
        assert coef == pytest.approx(-1.2533, abs=1e-4)

    def test_independent_formula(self):
        q, f, fp, alpha = 0.75, 0.3, 0.2, 0.1
        s = math.sqrt(q * (1 - q))
        z = norm.ppf(alpha)
        expect = ((2 * q - 1) / (2 * s) + s * fp / f**2) * z**2 * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
        assert eq1_error_term(f, fp, q, alpha) == pytest.approx(expect, rel=1e-12)

    def test_requires_positive_density(self):
        with pytest.raises(ValueError):
            eq1_error_term(0.0, 0.0, 0.5, 0.05)
