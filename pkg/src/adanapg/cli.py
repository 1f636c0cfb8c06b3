"""Command-line entry point: ``adanapg {solve,experiment,analyze,oracle}``.

Exit codes: 0 success, 2 configuration or capability error, 3 solver runtime
error, 4 provenance (config hash) mismatch, 5 unmet diagnostic precondition.
The output directory comes from ``--out``, else ``$ADANAPG_OUT``, else the
config's ``[output] directory``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, load_config
from .core import CapabilityError
from .io import ProvenanceError, parse_float, read_csv, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PROVENANCE, EXIT_DIAGNOSTIC = 0, 2, 3, 4, 5
DIAGNOSTICS = ("rmse", "ratefit", "efficiency", "deltaw", "normality", "samplecomplexity")


def _out_dir(args, cfg=None):
    if args.out:
        return Path(args.out)
    env = os.environ.get("ADANAPG_OUT")
    if env:
        return Path(env)
    if cfg is None:
        raise ConfigError("output.directory", "no output directory given")
    return cfg.resolve_path(cfg.output["directory"])


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_solve(args):
    from .experiment import run_solve
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    records = run_solve(cfg, out)
    last = records[-1]
    print(f"wrote {out / 'trajectory.csv'} ({len(records)} rows, "
          f"final gmap_norm={last.gmap_norm:.6g}, samples={last.cum_samples})")
    return EXIT_OK


def cmd_experiment(args):
    from .experiment import run_experiment
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    results, _, _ = run_experiment(cfg, out, jobs=args.jobs)
    print(f"wrote {len(results)} replications to {out}")
    return EXIT_OK


def cmd_oracle(args):
    from .experiment import run_oracle
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    xs, g = run_oracle(cfg, out)
    print(f"wrote {out / 'xstar.csv'} (gradient-mapping norm {g:.3e})")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------

class DiagnosticUnavailable(Exception):
    pass


def _sorted_reps(folder: Path):
    files = list(folder.glob("rep_*.csv"))
    return sorted(files, key=lambda p: int(p.stem.split("_")[1]))


def load_ensemble(directory):
    """Rebuild a :class:`ReplicationEnsemble` from an experiment directory.

    Every file must carry the config hash recorded in ``meta.csv``.
    """
    d = Path(directory)
    if not (d / "meta.csv").exists():
        raise ProvenanceError(f"{d}: no meta.csv; not an experiment directory")
    h, _, rows = read_csv(d / "meta.csv")
    meta = {k: parse_float(v) for k, v in rows}

    def check(path):
        fh, header, body = read_csv(path)
        if fh != h:
            raise ProvenanceError(f"{path}: config hash {fh} does not match meta.csv ({h})")
        return header, body

    x_star = None
    if (d / "xstar.csv").exists():
        _, body = check(d / "xstar.csv")
        x_star = np.array([float(r[1]) for r in body])

    runs = _sorted_reps(d / "runs")
    if not runs:
        raise ProvenanceError(f"{d}: no replication files")
    cols = {}
    for path in runs:
        header, body = check(path)
        for name in ("batch_size", "cum_samples", "objective", "dist_sq"):
            i = header.index(name)
            vals = [parse_float(r[i]) for r in body]
            cols.setdefault(name, []).append(vals)

    def arr(name):
        v = cols[name]
        if len({len(r) for r in v}) != 1:
            raise analysis.DiagnosticError("replications have different lengths")
        if any(x is None for r in v for x in r):
            return None
        return np.array(v, dtype=np.float64)

    def stack(sub):
        files = _sorted_reps(d / sub)
        if not files:
            return None
        mats = []
        for path in files:
            _, body = check(path)
            mats.append([[float(x) for x in r[1:]] for r in body])
        return np.array(mats, dtype=np.float64)

    ens = analysis.ReplicationEnsemble(
        batch_size=arr("batch_size"), cum_samples=arr("cum_samples"),
        objective=arr("objective"), dist_sq=arr("dist_sq"),
        iterates=stack("iterates"), noise=stack("noise"), x_star=x_star, meta=meta)
    return ens, h


def _window(arg, T):
    if arg:
        lo, hi = (int(v) for v in arg.split(","))
        return lo, hi
    return T // 4, T - 1


def run_diagnostic(name, ens, out, h, args):
    meta = ens.meta
    T = ens.n_iterations
    if name == "rmse":
        write_csv(out / "rmse.csv", ("iter", "rmse"), analysis.rmse_curve(ens), h)
    elif name == "ratefit":
        lo, hi = _window(args.window, T)
        fit = analysis.rate_fit(analysis.rmse_curve(ens), (lo, hi), meta["rho"])
        write_csv(out / "ratefit.csv",
                  ("window_lo", "window_hi", "slope", "intercept", "r_squared",
                   "theoretical_slope", "ratio"),
                  [(lo, hi, fit.slope, fit.intercept, fit.r_squared, fit.theoretical_slope,
                    fit.ratio)], h)
    elif name == "efficiency":
        write_csv(out / "efficiency.csv", ("mean_cum_samples", "mean_objective"),
                  analysis.efficiency_curve(ens), h)
    elif name == "deltaw":
        write_csv(out / "deltaw.csv", ("iter", "delta_w"),
                  analysis.covariance_gap_curve(ens, meta["rho"]), h)
    elif name == "samplecomplexity":
        write_csv(out / "samplecomplexity.csv", ("iter", "median_product"),
                  analysis.sample_complexity_check(ens), h)
    elif name == "normality":
        n = T - 1 if args.terminal is None else args.terminal
        rep = analysis.normality_report(ens, n)
        rows = [(c, rep.mean[i], rep.variance[i], rep.skewness[i], rep.excess_kurtosis[i],
                 bool(rep.skew_pass[i]), bool(rep.kurt_pass[i]))
                for i, c in enumerate(rep.components)]
        write_csv(out / "normality.csv", ("component", "mean", "variance", "skewness",
                                          "excess_kurtosis", "skew_pass", "kurt_pass"), rows, h)
        write_csv(out / "normality_summary.csv", ("key", "value"),
                  [("n_terminal", n), ("replications", rep.n_replications),
                   ("min_eigenvalue", rep.min_eigenvalue),
                   ("stabilization_gap", rep.stabilization_gap)], h)
        k = rep.covariance.shape[0]
        write_csv(out / "normality_covariance.csv", [f"c{i}" for i in range(k)],
                  rep.covariance.tolist(), h)
        z = analysis.scaled_errors(ens, n, meta["alpha"], meta["rho"])
        hist = []
        for c in rep.components:
            counts, edges = np.histogram(z[:, c], bins=20)
            hist.extend((c, edges[i], edges[i + 1], int(counts[i])) for i in range(20))
        write_csv(out / "normality_histogram.csv", ("component", "bin_lo", "bin_hi", "count"),
                  hist, h)


def cmd_analyze(args):
    ens, h = load_ensemble(args.ensemble)
    out = Path(args.out) if args.out else Path(os.environ.get("ADANAPG_OUT") or args.ensemble)
    names = [s.strip() for s in args.diagnostics.split(",") if s.strip()]
    for name in names:
        if name not in DIAGNOSTICS:
            raise ConfigError("--diagnostics", f"unknown diagnostic {name!r}; choose from {DIAGNOSTICS}")
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        try:
            run_diagnostic(name, ens, out, h, args)
        except analysis.DiagnosticError as exc:
            raise DiagnosticUnavailable(f"{name}: {exc}") from None
        print(f"{name}: ok")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="adanapg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help="output directory (overrides $ADANAPG_OUT and the config)")

    p = sub.add_parser("solve", help="run one solver path and write trajectory.csv")
    common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("experiment", help="run replications and write ensemble CSVs")
    common(p)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_experiment)
    p = sub.add_parser("oracle", help="solve with exact gradients and write xstar.csv")
    common(p)
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("analyze", help="compute diagnostics over an experiment directory")
    p.add_argument("ensemble", help="experiment output directory")
    p.add_argument("--diagnostics", default="rmse",
                   help=f"comma-separated subset of {','.join(DIAGNOSTICS)}")
    p.add_argument("--out", help="where to write diagnostic CSVs (default: the ensemble directory)")
    p.add_argument("--window", help="rate-fit window 'lo,hi' (default: last three quarters)")
    p.add_argument("--terminal", type=int, default=None,
                   help="iteration for the normality report (default: last)")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        _err("--jobs must be >= 1")
        return EXIT_CONFIG
    from .experiment import ReplicationError
    from .solver import OracleConvergenceError
    try:
        return args.func(args)
    except (ConfigError, CapabilityError) as exc:
        _err(exc)
        return EXIT_CONFIG
    except ProvenanceError as exc:
        _err(exc)
        return EXIT_PROVENANCE
    except DiagnosticUnavailable as exc:
        _err(exc)
        return EXIT_DIAGNOSTIC
    except (ReplicationError, OracleConvergenceError, FloatingPointError, ArithmeticError) as exc:
        _err(exc)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, OSError) as exc:
        _err(exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
