"""Coverage-study driver: replicate, build intervals, aggregate, serialise."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .engine import DATA, BootstrapPlan, stream
from .intervals import canonical_method, fit_interval
from .kernels import get_kernel
from .models import draw_sample, get_model
from .studentize import DegenerateStudentizerError

if TYPE_CHECKING:
    from .bandwidth import SelectionConfig

log = logging.getLogger(__name__)

FAILURE_FLAG_FRACTION = 0.01
CSV_COLUMNS = ("method", "alpha", "coverage", "se", "mean_length", "var_length",
               "n", "q", "model", "seed", "n_valid")


@dataclass(frozen=True)
class StudyConfig:
    model: str = "std_normal"
    n: int = 15
    q: float = 0.5
    alphas: tuple = (0.05, 0.95)
    methods: tuple = ("I1", "I2", "I3", "I4")
    replications: int = 1000
    b_first: int = 1000
    b_outer: int = 1500
    b_inner: int = 1000
    seed: int = 0
    bandwidths: dict = field(default_factory=dict)  # method -> {role: value}
    share_batches: bool = True
    kernel: str = "triangular"
    unit_variance_kernel: bool = False
    kappa_center: str = "eta"

    def __post_init__(self):
        get_model(self.model)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "methods", tuple(canonical_method(m) for m in self.methods))
        object.__setattr__(
            self, "bandwidths",
            {canonical_method(m): dict(v) for m, v in (self.bandwidths or {}).items()},
        )
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.alphas or any(not 0 < a < 1 for a in self.alphas):
            raise ValueError("alphas must be a nonempty list of values in (0, 1)")
        if not self.methods:
            raise ValueError("methods must be nonempty")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise KeyError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**mapping)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alphas"] = list(self.alphas)
        d["methods"] = list(self.methods)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def plan(self) -> BootstrapPlan:
        kernel = get_kernel(self.kernel, self.unit_variance_kernel)
        return BootstrapPlan(
            b_first=self.b_first, b_outer=self.b_outer, b_inner=self.b_inner,
            q=self.q, seed=self.seed, kernel=kernel, kernel_h=kernel,
            share_batches=self.share_batches,
        )

    def two_sided_pairs(self) -> list:
        alphas = sorted(set(self.alphas))
        return [(a, b) for a in alphas for b in alphas if a < b and abs(a + b - 1.0) < 1e-12]


def replication_root(seed: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(r,))


def run_replication(cfg: StudyConfig, r: int, plan: Optional[BootstrapPlan] = None) -> dict:
    """Upper endpoints for every (method, alpha) on replication ``r``'s sample.

    A method whose construction degenerates records ``None`` for its
    endpoints and the error text.
    """
    plan = plan or cfg.plan()
    root = replication_root(cfg.seed, r)
    sample = draw_sample(get_model(cfg.model), cfg.n, stream(root, DATA))
    out = {}
    for method in cfg.methods:
        try:
            fitted = fit_interval(sample, method, plan, cfg.bandwidths.get(method),
                                  rng=root, kappa_center=cfg.kappa_center)
            out[method] = {"uppers": [fitted.interval(a).upper for a in cfg.alphas]}
        except DegenerateStudentizerError as exc:
            out[method] = {"uppers": None, "error": str(exc)}
    return out


def _run_chunk(args):
    cfg, indices = args
    plan = cfg.plan()
    return [run_replication(cfg, r, plan) for r in indices]


@dataclass
class OneSidedRow:
    method: str
    alpha: float
    coverage: float
    se: float
    n_valid: int


@dataclass
class TwoSidedRow:
    method: str
    alpha_lo: float
    alpha_hi: float
    coverage: float
    se: float
    mean_length: float
    var_length: float
    n_valid: int
    crossed: int = 0


@dataclass
class CoverageReport:
    config: dict
    one_sided: list
    two_sided: list
    failures: dict
    flagged: bool
    true_quantile: float
    endpoints: dict = field(default_factory=dict)   # method -> R x |alphas| (None for failures)
    indicators: dict = field(default_factory=dict)  # "method|alpha" -> list of 0/1

    def indicator_digest(self) -> str:
        blob = json.dumps(self.indicators, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def coverage(self, method: str, alpha: float) -> float:
        for row in self.one_sided:
            if row.method == method and abs(row.alpha - alpha) < 1e-12:
                return row.coverage
        raise KeyError((method, alpha))

    def two_sided_row(self, method: str) -> TwoSidedRow:
        for row in self.two_sided:
            if row.method == method:
                return row
        raise KeyError(method)

    def table(self) -> list:
        """Summary rows as in the CSV encoding."""
        c = self.config
        rows = []
        for method in c["methods"]:
            for row in self.one_sided:
                if row.method == method:
                    rows.append({"method": method, "alpha": row.alpha, "coverage": row.coverage,
                                 "se": row.se, "mean_length": None, "var_length": None,
                                 "n": c["n"], "q": c["q"], "model": c["model"],
                                 "seed": c["seed"], "n_valid": row.n_valid})
            for row in self.two_sided:
                if row.method == method:
                    rows.append({"method": method, "alpha": f"{row.alpha_lo!r}:{row.alpha_hi!r}",
                                 "coverage": row.coverage, "se": row.se,
                                 "mean_length": row.mean_length, "var_length": row.var_length,
                                 "n": c["n"], "q": c["q"], "model": c["model"],
                                 "seed": c["seed"], "n_valid": row.n_valid})
        return rows

    def to_json(self) -> str:
        d = {
            "config": self.config,
            "true_quantile": self.true_quantile,
            "one_sided": [asdict(r) for r in self.one_sided],
            "two_sided": [asdict(r) for r in self.two_sided],
            "failures": self.failures,
            "flagged": self.flagged,
            "indicator_digest": self.indicator_digest(),
            "indicators": self.indicators,
            "endpoints": self.endpoints,
        }
        return json.dumps(d, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CoverageReport":
        d = json.loads(text)
        report = cls(
            config=d["config"],
            one_sided=[OneSidedRow(**r) for r in d["one_sided"]],
            two_sided=[TwoSidedRow(**r) for r in d["two_sided"]],
            failures=d["failures"],
            flagged=d["flagged"],
            true_quantile=d["true_quantile"],
            endpoints=d["endpoints"],
            indicators=d["indicators"],
        )
        if report.indicator_digest() != d["indicator_digest"]:
            raise ValueError("indicator digest mismatch")
        return report

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.table():
            writer.writerow(["" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k])
                             for k in CSV_COLUMNS])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{'method':<9} {'alpha':<10} {'coverage':>8} {'se':>7} {'mean_len':>9} {'var_len':>9}"]
        for row in self.table():
            ml = "" if row["mean_length"] is None else f"{row['mean_length']:.4f}"
            vl = "" if row["var_length"] is None else f"{row['var_length']:.4f}"
            alpha = row["alpha"] if isinstance(row["alpha"], str) else f"{row['alpha']:.4g}"
            lines.append(f"{row['method']:<9} {alpha:<10} {row['coverage']:8.4f} "
                         f"{row['se']:7.4f} {ml:>9} {vl:>9}")
        return "\n".join(lines)


def read_csv_table(text: str) -> list:
    """Parse a report CSV back into the row dicts produced by ``CoverageReport.table``."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        alpha = rec["alpha"]
        rows.append({
            "method": rec["method"],
            "alpha": alpha if ":" in alpha else float(alpha),
            "coverage": float(rec["coverage"]),
            "se": float(rec["se"]),
            "mean_length": float(rec["mean_length"]) if rec["mean_length"] else None,
            "var_length": float(rec["var_length"]) if rec["var_length"] else None,
            "n": int(rec["n"]),
            "q": float(rec["q"]),
            "model": rec["model"],
            "seed": int(rec["seed"]),
            "n_valid": int(rec["n_valid"]),
        })
    return rows


def binomial_se(p: float, count: int) -> float:
    return math.sqrt(p * (1.0 - p) / count) if count > 0 else float("nan")


def aggregate(cfg: StudyConfig, results: list) -> CoverageReport:
    theta = get_model(cfg.model).true_quantile(cfg.q)
    R = len(results)
    one, two, failures, endpoints, indicators = [], [], {}, {}, {}
    alpha_pos = {a: i for i, a in enumerate(cfg.alphas)}
    for method in cfg.methods:
        per = [res[method]["uppers"] for res in results]
        failures[method] = sum(u is None for u in per)
        endpoints[method] = per
        valid = [u for u in per if u is not None]
        nv = len(valid)
        for a in cfg.alphas:
            ind = [int(theta <= u[alpha_pos[a]]) for u in valid]
            indicators[f"{method}|{a!r}"] = ind
            p = sum(ind) / nv if nv else float("nan")
            one.append(OneSidedRow(method, a, p, binomial_se(p, nv), nv))
        for a_lo, a_hi in cfg.two_sided_pairs():
            hits, lengths, crossed = [], [], 0
            for u in valid:
                lower_bound, upper_bound = u[alpha_pos[a_hi]], u[alpha_pos[a_lo]]
                lo = min(lower_bound, upper_bound)
                crossed += lower_bound >= upper_bound
                hits.append(int(lo < theta <= upper_bound))
                lengths.append(upper_bound - lo)
            indicators[f"{method}|{a_lo!r}:{a_hi!r}"] = hits
            p = sum(hits) / nv if nv else float("nan")
            lengths = np.asarray(lengths)
            two.append(TwoSidedRow(
                method, a_lo, a_hi, p, binomial_se(p, nv),
                float(lengths.mean()) if nv else float("nan"),
                float(lengths.var(ddof=1)) if nv > 1 else 0.0,
                nv, int(crossed),
            ))
    flagged = any(c >= FAILURE_FLAG_FRACTION * R for c in failures.values() if c)
    if flagged:
        log.warning("failed replications exceed %.0f%% of R: %s", 100 * FAILURE_FLAG_FRACTION, failures)
    return CoverageReport(
        config=cfg.to_dict(), one_sided=one, two_sided=two, failures=failures,
        flagged=flagged, true_quantile=theta, endpoints=endpoints, indicators=indicators,
    )


def run_coverage_study(
    cfg: StudyConfig,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> CoverageReport:
    R = cfg.replications
    results: list = [None] * R
    if workers <= 1:
        plan = cfg.plan()
        for r in range(R):
            results[r] = run_replication(cfg, r, plan)
            if progress:
                progress(r + 1, R)
    else:
        chunk = max(1, min(25, R // (4 * workers) or 1))
        jobs = [(cfg, list(range(s, min(s + chunk, R)))) for s in range(0, R, chunk)]
        done = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (_, indices), chunk_results in zip(jobs, pool.map(_run_chunk, jobs)):
                for r, res in zip(indices, chunk_results):
                    results[r] = res
                done += len(indices)
                if progress:
                    progress(done, R)
    return aggregate(cfg, results)


@dataclass
class SelectionStudyResult:
    coverage: float
    se: float
    indicators: list
    chosen: list
    config: dict


def run_selection_study(
    model: str,
    n: int,
    q: float,
    sel: "SelectionConfig",
    plan: BootstrapPlan,
    replications: int,
    seed: int = 0,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SelectionStudyResult:
    """Coverage of intervals whose bandwidths are chosen per sample by bootstrap selection."""
    from .bandwidth import select_bandwidths

    dm = get_model(model)
    theta = dm.true_quantile(q)
    plan = BootstrapPlan(**{**plan.__dict__, "q": q})
    hits, chosen = [], []
    for r in range(replications):
        root = replication_root(seed, r)
        sample = draw_sample(dm, n, stream(root, DATA))
        picked = select_bandwidths(sample, sel, plan, rng=root).chosen
        fitted = fit_interval(sample, sel.method, plan, picked, rng=root)
        hits.append(int(theta <= fitted.interval(sel.alpha).upper))
        chosen.append(picked)
        if progress:
            progress(r + 1, replications)
    p = sum(hits) / replications
    return SelectionStudyResult(
        coverage=p, se=binomial_se(p, replications), indicators=hits, chosen=chosen,
        config={"model": model, "n": n, "q": q, "method": sel.method, "alpha": sel.alpha,
                "M": sel.M, "n_outermost": sel.n_outermost, "b_first": plan.b_first,
                "replications": replications, "seed": seed},
    )
