"""Command-line front end.

Subcommands: ``interval``, ``select``, ``study``, ``error-term``.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from .bandwidth import SelectionConfig, select_bandwidths
from .engine import BootstrapPlan
from .intervals import ROLES, canonical_method, eq1_error_term, fit_interval
from .kernels import get_kernel
from .models import get_model
from .quantiles import Sample
from .studentize import DegenerateStudentizerError
from .study import StudyConfig, run_coverage_study

EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 2, 3, 4


class DataError(Exception):
    pass


class ConfigError(Exception):
    pass


def read_data(path: str, column: str | None = None) -> Sample:
    """One number per line, or one column of a CSV file (index or header name)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    values = []
    lines = text.splitlines()
    if column is None:
        for lineno, line in enumerate(lines, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number: {line!r}") from None
    else:
        reader = csv.reader(lines)
        rows = list(reader)
        if not rows:
            raise DataError(f"{path}: empty file")
        if column.isdigit():
            col, start = int(column), 0
        else:
            if column not in rows[0]:
                raise DataError(f"{path}: no column named {column!r}")
            col, start = rows[0].index(column), 1
        for lineno, row in enumerate(rows[start:], start + 1):
            if not row or not "".join(row).strip():
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: no numeric value in column {column}") from None
    if not values:
        raise DataError(f"{path}: no data values")
    if not all(math.isfinite(v) for v in values):
        raise DataError(f"{path}: non-finite value in data")
    return Sample(values)


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def read_config(path: str) -> dict:
    """A ``key = value`` file (values JSON-decoded when possible) or a JSON object."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.endswith(".json"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[study]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {k: _parse_value(v) for k, v in parser["study"].items()}


def _plan(args, q: float) -> BootstrapPlan:
    kernel = get_kernel(args.kernel, args.unit_variance_kernel)
    return BootstrapPlan(
        b_first=args.b1, b_outer=args.b2, b_inner=args.b3, q=q, seed=args.seed,
        kernel=kernel, kernel_h=kernel, share_batches=not args.no_share,
    )


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _progress(label: str):
    state = {"last": -1}

    def report(done: int, total: int):
        pct = int(100 * done / total)
        if pct // 5 != state["last"] // 5 or done == total:
            state["last"] = pct
            print(f"{label} {done}/{total}", file=sys.stderr)

    return report


def cmd_interval(args) -> int:
    sample = read_data(args.data, args.column)
    method = canonical_method(args.method)
    plan = _plan(args, args.q)
    overrides = {r: getattr(args, r) for r in ROLES[method] if getattr(args, r) is not None}
    t0 = time.perf_counter()
    fitted = fit_interval(sample, method, plan, overrides, kappa_center=args.kappa_center,
                          progress=_progress("outer") if args.progress else None)
    res = fitted.interval(args.alpha)
    record = {
        "method": res.method,
        "upper": res.upper,
        "nominal": res.nominal,
        "alpha": args.alpha,
        "q": args.q,
        "n": sample.n,
        "calibrated_level": res.calibrated_level,
        "bandwidths": res.bandwidths,
        "mc_sizes": res.mc_sizes,
        "seed": args.seed,
        "version": __version__,
    }
    if args.format == "json":
        text = _json(record)
    elif args.format == "csv":
        cols = ["method", "upper", "nominal", "calibrated_level", "q", "n", "seed"]
        bw_cols = sorted(res.bandwidths)
        text = ",".join(cols + bw_cols) + "\n"
        text += ",".join("" if record[c] is None else repr(record[c]) if isinstance(record[c], float)
                         else str(record[c]) for c in cols)
        text += "".join("," + repr(res.bandwidths[b]) for b in bw_cols) + "\n"
    else:
        bws = ", ".join(f"{k}={v:.4f}" for k, v in res.bandwidths.items())
        text = (f"{res.method}: (-inf, {res.upper:.4f}]  nominal {res.nominal:.4f}"
                + (f"  calibrated level {res.calibrated_level:.4f}" if res.calibrated_level is not None else "")
                + f"\n  bandwidths: {bws}\n  Monte Carlo sizes: {res.mc_sizes}\n  seed: {args.seed}\n")
    _emit(text, args.out)
    print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


def cmd_select(args) -> int:
    sample = read_data(args.data, args.column)
    method = canonical_method(args.method)
    plan = _plan(args, args.q)
    sizes = {}
    if args.grid_size:
        sizes = {r: args.grid_size for r in ROLES[method]}
    sel = SelectionConfig(method=method, alpha=args.alpha, M=args.M,
                          n_outermost=args.outermost, grid_sizes=sizes)
    result = select_bandwidths(sample, sel, plan,
                               progress=_progress("outermost") if args.progress else None)
    roles = list(ROLES[method])
    if args.format == "json":
        text = _json({"method": method, "chosen": result.chosen, "gamma": result.gamma,
                      "target": result.target, "alpha": args.alpha, "q": args.q, "M": args.M,
                      "n_outermost": args.outermost, "seed": args.seed, "version": __version__,
                      "table": result.table})
    elif args.format == "csv":
        cols = roles + ["coverage", "error", "n_valid", "chosen"]
        lines = [",".join(cols)]
        for row in result.table:
            chosen = all(row[r] == result.chosen[r] for r in roles)
            lines.append(",".join([repr(row[r]) for r in roles]
                                  + [repr(row["coverage"]), repr(row["error"]), str(row["n_valid"]),
                                     str(int(chosen))]))
        text = "\n".join(lines) + "\n"
    else:
        lines = ["  ".join(f"{r:>8}" for r in roles) + "  coverage"]
        for row in result.table:
            mark = " *" if all(row[r] == result.chosen[r] for r in roles) else ""
            lines.append("  ".join(f"{row[r]:8.4f}" for r in roles) + f"  {row['coverage']:8.4f}{mark}")
        lines.append("chosen: " + ", ".join(f"{k}={v:.4f}" for k, v in result.chosen.items())
                     + f"  (gamma={result.gamma:.4f})")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def cmd_study(args) -> int:
    mapping = read_config(args.config)
    workers = mapping.pop("workers", None)
    workers = args.workers if args.workers is not None else (workers or 1)
    try:
        cfg = StudyConfig.from_mapping(mapping)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None

    t0 = time.perf_counter()
    report = run_coverage_study(cfg, workers=int(workers),
                                progress=_progress("replication") if args.progress else None)
    runtime = time.perf_counter() - t0
    provenance = {"seed": cfg.seed, "config_hash": cfg.config_hash(), "version": __version__}

    prefix = Path(args.out or Path(args.config).with_suffix(""))
    csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
    csv_path.write_text(
        "# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n" + report.to_csv()
    )
    payload = json.loads(report.to_json())
    payload["provenance"] = provenance
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    manifest = dict(provenance, workers=int(workers), runtime_seconds=round(runtime, 3),
                    config=cfg.to_dict(), outputs=[str(csv_path), str(json_path)])
    prefix.with_suffix(".manifest.json").write_text(_json(manifest))

    sys.stdout.write(report.format_table() + "\n")
    if report.flagged:
        print(f"warning: failed replications {report.failures}", file=sys.stderr)
    print(f"wrote {csv_path} and {json_path} ({runtime:.1f}s)", file=sys.stderr)
    return 0


def predicted_i1_coverage(model: str, q: float, alpha: float, n: int) -> float:
    dm = get_model(model)
    x = dm.true_quantile(q)
    return 1.0 - alpha + eq1_error_term(dm.pdf(x), dm.pdf_prime(x), q, alpha) / math.sqrt(n)


def cmd_error_term(args) -> int:
    dm = get_model(args.model)
    x = dm.true_quantile(args.q)
    term = eq1_error_term(dm.pdf(x), dm.pdf_prime(x), args.q, args.alpha)
    pred = predicted_i1_coverage(args.model, args.q, args.alpha, args.n)
    if args.format == "json":
        text = _json({"model": dm.tag, "q": args.q, "alpha": args.alpha, "n": args.n,
                      "error_term": term, "predicted_coverage": pred})
    else:
        text = f"{pred:.6f}\n" if args.format == "csv" else (
            f"{dm.tag} q={args.q} alpha={args.alpha} n={args.n}: "
            f"predicted I1 coverage {pred:.4f} (n^-1/2 term {term / math.sqrt(args.n):+.4f})\n")
    _emit(text, args.out)
    return 0


def _prob(value: str) -> float:
    x = float(value)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError(f"{value} is not in (0, 1)")
    return x


def _positive_int(value: str) -> int:
    x = int(value)
    if x < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return x


def _positive(value: str) -> float:
    x = float(value)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{value} must be positive")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothboot", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, b_defaults=(1000, 1500, 1000)):
        sp.add_argument("--data", required=True)
        sp.add_argument("--column", help="CSV column index or header name")
        sp.add_argument("--method", required=True,
                        choices=["i1", "i2", "i3", "i4", "i1k", "I1", "I2", "I3", "I4", "I1_kappa"])
        sp.add_argument("--q", type=_prob, default=0.5)
        sp.add_argument("--alpha", type=_prob, default=0.05)
        sp.add_argument("--b1", type=_positive_int, default=b_defaults[0])
        sp.add_argument("--b2", type=_positive_int, default=b_defaults[1])
        sp.add_argument("--b3", type=_positive_int, default=b_defaults[2])
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=_positive_int, default=1)
        sp.add_argument("--kernel", default="triangular")
        sp.add_argument("--unit-variance-kernel", action="store_true")
        sp.add_argument("--no-share", action="store_true", help="fresh first-level batches")
        sp.add_argument("--format", choices=["json", "csv", "text"], default="json")
        sp.add_argument("--out")
        sp.add_argument("--progress", action="store_true")

    sp = sub.add_parser("interval", help="one-sided upper confidence bound")
    common(sp)
    for role in ("eta", "beta", "xi", "zeta"):
        sp.add_argument(f"--{role}", type=_positive)
    sp.add_argument("--kappa-center", choices=["eta", "zeta"], default="eta")
    sp.set_defaults(func=cmd_interval)

    sp = sub.add_parser("select", help="bootstrap bandwidth selection")
    common(sp, b_defaults=(500, 500, 300))
    sp.add_argument("--M", type=float, default=1.5)
    sp.add_argument("--outermost", type=_positive_int, default=500)
    sp.add_argument("--grid-size", type=_positive_int)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("study", help="Monte Carlo coverage study from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=_positive_int)
    sp.add_argument("--out", help="output path prefix (default: config path without suffix)")
    sp.add_argument("--progress", action="store_true")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("error-term", help="analytic leading-order coverage of I1")
    sp.add_argument("--model", required=True)
    sp.add_argument("--q", type=_prob, default=0.5)
    sp.add_argument("--alpha", type=_prob, default=0.05)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--format", choices=["json", "csv", "text"], default="text")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_error_term)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateStudentizerError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
