"""Acceptance criteria, each checked at its stated tolerance.

Scale is chosen by ``ACCEPTANCE_SCALE`` (``full``, the default, or ``desk``).
Simulation results are cached under ``runs/acceptance`` keyed by config hash;
set ``ACCEPTANCE_FRESH=1`` to recompute. Cached reports are reloaded through
their indicator digest, so a stale or edited file fails to load.

Run directly (``python tests/test_acceptance.py``) for one line per criterion.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import kstest

from smoothboot.bandwidth import SelectionConfig
from smoothboot.engine import BootstrapPlan, EmpiricalDist, estimate_prepivot_dist, stream
from smoothboot.intervals import default_bandwidths, eq1_error_term, fit_interval
from smoothboot.kernels import SmoothedDistribution
from smoothboot.models import get_model
from smoothboot.quantiles import Sample
from smoothboot.studentize import StudentizeSpec, s_hat_squared
from smoothboot.study import (
    CoverageReport,
    StudyConfig,
    binomial_se,
    run_coverage_study,
    run_selection_study,
)

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]
CACHE = ROOT / "runs" / "acceptance"
SCALE = os.environ.get("ACCEPTANCE_SCALE", "full")
FRESH = os.environ.get("ACCEPTANCE_FRESH") == "1"

REFERENCE_N15 = {  # lower, upper, overall
    "I1": (0.096, 0.894, 0.798),
    "I2": (0.067, 0.938, 0.871),
    "I3": (0.057, 0.932, 0.875),
    "I4": (0.049, 0.942, 0.893),
}
REFERENCE_LOGNORMAL = {"I2": 0.885, "I4": 0.901}


def _line(criterion, label, value, target, tol, ok):
    return (f"[{'PASS' if ok else 'FAIL'}] criterion {criterion} ({SCALE}) {label}: "
            f"{value:.4f} target {target:.4f} tol {tol:.4f}")


def cached_study(name: str, cfg: StudyConfig) -> CoverageReport:
    path = CACHE / f"{name}-{cfg.config_hash()[:12]}.json"
    if path.exists() and not FRESH:
        report = CoverageReport.from_json(path.read_text())
        assert StudyConfig.from_mapping(report.config).config_hash() == cfg.config_hash()
        return report
    report = run_coverage_study(cfg)
    CACHE.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
    return report


def _normal_n15_config() -> StudyConfig:
    if SCALE == "full":
        return StudyConfig(model="std_normal", n=15, q=0.5, replications=1000,
                           b_first=1000, b_outer=1500, b_inner=1000, seed=20240601)
    return StudyConfig(model="std_normal", n=15, q=0.5, replications=400,
                       b_first=1000, b_outer=500, b_inner=300, seed=20240601)


@pytest.fixture(scope="module")
def normal_n15():
    return cached_study("normal-n15", _normal_n15_config())


def test_criterion1_normal_n15_coverage(normal_n15, record_acceptance):
    tol = 0.03 if SCALE == "full" else 0.05
    ok_all = True
    for method, (lo, up, overall) in REFERENCE_N15.items():
        got = (normal_n15.coverage(method, 0.95), normal_n15.coverage(method, 0.05),
               normal_n15.two_sided_row(method).coverage)
        for label, g, t in zip(("lower", "upper", "overall"), got, (lo, up, overall)):
            ok = abs(g - t) <= tol
            ok_all &= ok
            record_acceptance(_line(1, f"{method} {label}", g, t, tol, ok))
    assert ok_all


def test_criterion2_iteration_improves(normal_n15, record_acceptance):
    report = normal_n15
    if report.config["replications"] < 1000:
        cfg = StudyConfig(**{**_normal_n15_config().to_dict(), "replications": 1000})
        report = cached_study("normal-n15-r1000", cfg)
    err = {m: abs(report.coverage(m, 0.05) - 0.95) for m in REFERENCE_N15}
    ok_a = err["I2"] < err["I1"]
    ok_b = err["I4"] <= err["I3"] + 0.01
    record_acceptance(f"[{'PASS' if ok_a else 'FAIL'}] criterion 2 ({SCALE}) |I2-0.95|={err['I2']:.4f} "
                      f"< |I1-0.95|={err['I1']:.4f}")
    record_acceptance(f"[{'PASS' if ok_b else 'FAIL'}] criterion 2 ({SCALE}) |I4-0.95|={err['I4']:.4f} "
                      f"<= |I3-0.95|+0.01={err['I3'] + 0.01:.4f}")
    assert ok_a and ok_b


def test_criterion3_lognormal_upper_quartile(record_acceptance):
    cfg = StudyConfig(model="std_lognormal", n=100, q=0.75, methods=("I2", "I4"),
                      replications=1000 if SCALE == "full" else 400,
                      b_first=1000, b_outer=500, b_inner=300, seed=20240602)
    report = cached_study("lognormal-q75", cfg)
    tol = 0.03 if SCALE == "full" else 0.05
    ok_all = True
    for method, target in REFERENCE_LOGNORMAL.items():
        got = report.two_sided_row(method).coverage
        ok = abs(got - target) <= tol
        ok_all &= ok
        record_acceptance(_line(3, f"{method} overall", got, target, tol, ok))
    assert ok_all


def test_criterion4_selection_pipeline(record_acceptance):
    reps = 1000 if SCALE == "full" else 400
    sel = SelectionConfig(method="I1", alpha=0.95, M=1.5, n_outermost=500)
    plan = BootstrapPlan(b_first=500, q=0.5)
    key = json.dumps({"reps": reps, "sel": repr(sel), "b_first": plan.b_first, "seed": 20240603},
                     sort_keys=True)
    path = CACHE / f"selection-i1-{hashlib.sha256(key.encode()).hexdigest()[:12]}.json"
    if path.exists() and not FRESH:
        hits = json.loads(path.read_text())["indicators"]
        assert len(hits) == reps
    else:
        res = run_selection_study("std_normal", 15, 0.5, sel, plan, reps, seed=20240603)
        hits = res.indicators
        CACHE.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"key": key, "coverage": res.coverage, "indicators": hits,
                                    "chosen": res.chosen}, sort_keys=True) + "\n")
    cov = sum(hits) / len(hits)
    tol = 0.03 if SCALE == "full" else 3 * binomial_se(0.057, reps) + 0.01
    ok = abs(cov - 0.057) <= tol
    record_acceptance(_line(4, "I1 coverage at nominal 0.05", cov, 0.057, tol, ok))
    assert ok


def test_criterion5_analytic_error_term(record_acceptance):
    alpha, n = 0.95, 100
    cfg = StudyConfig(model="std_lognormal", n=n, q=0.5, alphas=(alpha,), methods=("I1",),
                      replications=2000, b_first=1000, seed=20240604)
    report = cached_study("i1-error-term", cfg)
    simulated = report.coverage("I1", alpha) - (1 - alpha)
    dm = get_model("std_lognormal")
    x = dm.true_quantile(0.5)
    predicted = eq1_error_term(dm.pdf(x), dm.pdf_prime(x), 0.5, alpha) / math.sqrt(n)
    same_sign = np.sign(simulated) == np.sign(predicted)
    ratio = abs(simulated / predicted) if predicted else math.inf
    ok = bool(same_sign and 1 / 3 <= ratio <= 3)
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion 5 ({SCALE}) simulated deviation "
                      f"{simulated:+.4f} (se {report.one_sided[0].se:.4f}) vs predicted "
                      f"{predicted:+.4f}; same sign {bool(same_sign)}, ratio {ratio:.2f}")
    assert ok


def test_criterion6_property_suite(record_acceptance):
    rng = np.random.default_rng(6)
    failures = []

    # CDF monotone, quantile inverts the CDF
    for _ in range(100):
        n = int(rng.integers(2, 40))
        x = rng.standard_normal(n) * rng.uniform(0.1, 5)
        d = SmoothedDistribution(x, float(rng.uniform(0.05, 2)))
        t = np.linspace(x.min() - 3, x.max() + 3, 400)
        if np.any(np.diff(d.cdf(t)) < 0):
            failures.append("cdf monotone")
        for p in rng.uniform(0.01, 0.99, 5):
            if abs(d.cdf(d.quantile(p)) - p) > 1e-8:
                failures.append("quantile inversion")

    # s_hat^2 location invariance and scale equivariance
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(5, 40)))
        spec = StudentizeSpec(xi=0.7, q=0.5)
        base = s_hat_squared(x, spec)
        c, a = rng.uniform(-5, 5), rng.uniform(0.5, 3)
        if abs(s_hat_squared(x + c, spec) - base) > 1e-12 * max(1, base):
            failures.append("s_hat location")
        scaled = s_hat_squared(a * x, StudentizeSpec(xi=0.7 * a, q=0.5))
        if abs(scaled - a * a * base) > 1e-12 * max(1, a * a * base):
            failures.append("s_hat scale")

    # nesting in alpha and affine equivariance, coupled seeds
    plan = BootstrapPlan(b_first=200, b_outer=60, b_inner=40, q=0.5, seed=3)
    x = rng.standard_normal(15)
    a, c = 2.5, -1.25
    for method in ("I1", "I2", "I3", "I4"):
        bw = default_bandwidths(method, 15)
        f = fit_interval(x, method, plan, bw)
        g = fit_interval(a * x + c, method, plan, {k: a * v for k, v in bw.items()})
        ups = [f.interval(al).upper for al in (0.01, 0.05, 0.1, 0.5, 0.9, 0.95)]
        if any(np.diff(ups) > 1e-12):
            failures.append(f"nesting {method}")
        for al in (0.05, 0.95):
            if abs(g.interval(al).upper - (a * f.interval(al).upper + c)) > 1e-9:
                failures.append(f"affine {method}")

    # bandwidth zero gives the ordinary bootstrap
    v = np.sort(x)
    p0 = BootstrapPlan(b_first=300, q=0.5, seed=9)
    f0 = fit_interval(v, "I1", p0, {"eta": 0.0})
    idx = stream(9, p0.first_level, 0).integers(0, 15, size=(300, 15))
    plain = np.sqrt(15) * (np.sort(v[idx], axis=1)[:, 7] - v[7])
    if not np.array_equal(np.sort(plain), f0.roots.values):
        failures.append("bandwidth zero")

    # Galois: quantile(p) <= t  iff  p <= cdf(t)
    d = EmpiricalDist(rng.integers(0, 20, 97).astype(float))
    for p in np.linspace(0.001, 0.999, 120):
        for t in np.arange(-1, 21, 0.5):
            if (d.quantile(p) <= t) != (p <= d.cdf(t)):
                failures.append("galois")

    ok = not failures
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion 6 ({SCALE}) property suite"
                      + ("" if ok else f": {sorted(set(failures))}"))
    assert ok


def test_criterion7_prepivot_uniformity(record_acceptance):
    x = Sample(np.random.default_rng(7).standard_normal(30))
    bw = default_bandwidths("I2", 30)
    plan = BootstrapPlan(b_outer=500, b_inner=300, q=0.5, seed=7)
    u = estimate_prepivot_dist(x, plan, bw["beta"], bw["eta"])
    ks = kstest(u.values, "uniform").statistic
    ok = ks < 0.15
    record_acceptance(_line(7, "KS distance of prepivot sample", ks, 0.0, 0.15, ok))
    assert ok


def test_criterion8_determinism_across_workers(tmp_path, record_acceptance):
    cfg = tmp_path / "det.cfg"
    cfg.write_text('model = "std_normal"\nn = 15\nreplications = 16\nb_first = 200\n'
                   'b_outer = 40\nb_inner = 30\nseed = 88\n')
    outputs = {}
    for workers in (1, 8):
        prefix = tmp_path / f"w{workers}"
        subprocess.run([sys.executable, "-m", "smoothboot.cli", "study", "--config", str(cfg),
                        "--workers", str(workers), "--out", str(prefix)],
                       check=True, capture_output=True)
        outputs[workers] = (prefix.with_suffix(".csv").read_bytes(),
                            prefix.with_suffix(".json").read_bytes())
    ok = outputs[1] == outputs[8]
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion 8 ({SCALE}) CSV and JSON "
                      f"byte-identical at 1 and 8 workers")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
