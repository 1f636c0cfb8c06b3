"""Build problems and solvers from a config and run (replicated) experiments.

Output layout of an experiment directory::

    meta.csv                 key,value pairs (alpha, rho, mu, L, ...)
    xstar.csv                reference optimum, when one is known or computable
    runs/rep_<j>.csv         per-replication trajectory
    noise/rep_<j>.csv        gradient noise per iteration (record_noise)
    iterates/rep_<j>.csv     iterates per iteration (record_iterates)
    ensemble_summary.csv     per-iteration aggregates across replications
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, ExperimentConfig
from .core import CapabilityError, RandomStream
from .io import TRAJECTORY_COLUMNS, read_vector_file, trajectory_rows, write_csv
from .problems import load_sparse_dataset, make_lasso_toy, make_logistic, make_param_estimation
from .sampling import AdaptiveTestParams, SamplingSchedule
from .solver import OracleConvergenceError, SolverOptions, run, solve_oracle


class ReplicationError(RuntimeError):
    def __init__(self, replication, base_seed, cause):
        # keep every field in args so the exception survives pickling from workers
        super().__init__(replication, base_seed, str(cause))
        self.replication, self.base_seed, self.cause = replication, base_seed, str(cause)

    def __str__(self):
        return f"replication {self.replication} (base_seed={self.base_seed}) failed: {self.cause}"


def build_problem(cfg: ExperimentConfig):
    p = cfg.problem
    kind = p["kind"]
    if kind == "logistic":
        return make_logistic(p["n_samples"], p["dimension"], p["lambda1"], p["lambda2"],
                             label_noise=p["label_noise"], seed=p["data_seed"])
    if kind == "dataset":
        return load_sparse_dataset(cfg.resolve_path(p["data_path"]), p["data_format"],
                                   p["lambda1"] or 0.0, p["lambda2"] or 0.0)
    if kind == "param_estimation":
        return make_param_estimation(p["dimension"], p["condition_number"], p["sigma_v"],
                                     lam=p["lambda2"] or 0.0, seed=p["data_seed"])
    lam = 0.5 if p["lambda2"] is None else p["lambda2"]
    return make_lasso_toy(p["dimension"], lam=lam, noise_std=p["noise_std"], seed=p["data_seed"])


def build_schedule(cfg: ExperimentConfig) -> SamplingSchedule:
    s = cfg.sampling
    if s["strategy"] == "adaptive":
        return SamplingSchedule.adaptive(AdaptiveTestParams(
            theta=s["theta"], nu=s["nu"], k_initial=s["k_initial"], k_max=s["k_max"],
            max_augment_rounds=s["max_augment_rounds"], gmap_floor=s["gmap_floor"]))
    if s["strategy"] == "geometric":
        return SamplingSchedule.geometric(s["k0"], s["gamma1"], k_max=s["k_max"])
    if s["strategy"] == "polynomial":
        return SamplingSchedule.polynomial(s["k0"], s["gamma2"], k_max=s["k_max"])
    return SamplingSchedule.fixed(s["fixed_k"])


def build_options(cfg: ExperimentConfig, dim: int) -> SolverOptions:
    s = cfg.solver
    x0 = None
    if s["x0_path"] is not None:
        x0 = read_vector_file(cfg.resolve_path(s["x0_path"]))
        if x0.shape != (dim,):
            raise ConfigError("solver.x0_path", f"expected {dim} components, got {x0.shape[0]}")
    return SolverOptions(
        algorithm=s["algorithm"], mode=s["mode"], max_iterations=s["max_iterations"],
        stop_gmap_tol=s["stop_gmap_tol"], pi0=s["pi0"], alpha_override=s["alpha_override"],
        sample_budget=s["sample_budget"], record_noise=cfg.experiment["record_noise"],
        record_iterates=cfg.experiment["record_iterates"], x0=x0)


def check_capabilities(cfg: ExperimentConfig, problem):
    """Fail before any run when the config asks for something the problem lacks."""
    if cfg.experiment["record_noise"] and not problem.has_full_gradient:
        raise CapabilityError("experiment.record_noise: the problem has no exact gradient")
    if cfg.solver["algorithm"] == "full_gradient_accel" and not problem.has_full_gradient:
        raise CapabilityError("solver.algorithm: full_gradient_accel needs an exact gradient")
    if cfg.solver["mode"] == "strongly_convex" and not problem.mu > 0:
        raise ConfigError("solver.mode", "strongly_convex requires a strongly convex problem")


def reference_optimum(cfg: ExperimentConfig, problem):
    """``x*`` from ``problem.x_star_path``, the problem itself, or the exact-gradient oracle."""
    path = cfg.problem["x_star_path"]
    if path is not None:
        xs = read_vector_file(cfg.resolve_path(path))
        if xs.shape != (problem.dim,):
            raise ConfigError("problem.x_star_path",
                              f"expected {problem.dim} components, got {xs.shape[0]}")
        return xs
    if problem.x_star is not None:
        return problem.x_star
    if problem.has_full_gradient:
        return solve_oracle(problem, cfg.solver["oracle_max_iter"], cfg.solver["oracle_tol"])
    return None


def run_meta(cfg: ExperimentConfig, problem, x_star) -> dict:
    sch = build_schedule(cfg)
    opts = build_options(cfg, problem.dim)
    from .solver import step_size
    alpha = step_size(problem, sch, opts)
    s = cfg.sampling
    meta = {
        "dim": problem.dim, "lipschitz": problem.lipschitz, "mu": problem.mu,
        "theta": s["theta"], "nu": s["nu"], "alpha": alpha,
        "rho": analysis.rho(problem.mu, problem.lipschitz, s["theta"], s["nu"]),
        "replications": cfg.experiment["replications"],
        "max_iterations": cfg.solver["max_iterations"],
        "f_star": None,
    }
    if x_star is not None and problem.has_smooth_value:
        meta["f_star"] = problem.objective(x_star)
    return meta


# -- workers -------------------------------------------------------------------

_CACHE: dict = {}


def _context(cfg: ExperimentConfig, x_star):
    key = cfg.config_hash
    if key not in _CACHE:
        problem = build_problem(cfg)
        _CACHE.clear()
        _CACHE[key] = (problem, build_schedule(cfg), build_options(cfg, problem.dim))
    return _CACHE[key]


def run_replication(cfg: ExperimentConfig, j: int, x_star, out_dir=None):
    """Run replication ``j`` on stream ``(base_seed, j)``; optionally write its files."""
    problem, schedule, options = _context(cfg, x_star)
    seed = cfg.experiment["base_seed"]
    try:
        records = run(problem, options, schedule, RandomStream(seed, j), x_star=x_star)
    except Exception as exc:
        raise ReplicationError(j, seed, exc) from exc
    if out_dir is not None:
        write_replication(Path(out_dir), cfg, j, records, problem.dim)
    # drop the heavy arrays before sending results back to the parent
    for rec in records:
        rec.noise = None
        rec.x = None
    return records


def write_replication(out: Path, cfg: ExperimentConfig, j: int, records, dim: int):
    h = cfg.config_hash
    write_csv(out / "runs" / f"rep_{j}.csv", TRAJECTORY_COLUMNS,
              trajectory_rows(j, records, cfg.experiment["timing"]), h)
    cols = ["iter"] + [f"c{i}" for i in range(dim)]
    if cfg.experiment["record_noise"]:
        write_csv(out / "noise" / f"rep_{j}.csv", cols,
                  ([r.n, *r.noise] for r in records if r.noise is not None), h)
    if cfg.experiment["record_iterates"]:
        write_csv(out / "iterates" / f"rep_{j}.csv", cols, ([r.n, *r.x] for r in records), h)


def _task(args):
    return run_replication(*args)


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int | None = None):
    """Run every replication (in a process pool when ``jobs > 1``) and write outputs."""
    out = Path(out_dir)
    problem = build_problem(cfg)
    check_capabilities(cfg, problem)
    x_star = reference_optimum(cfg, problem)
    meta = run_meta(cfg, problem, x_star)
    M = cfg.experiment["replications"]
    jobs = jobs or os.cpu_count() or 1
    tasks = [(cfg, j, x_star, out) for j in range(M)]
    if jobs <= 1 or M == 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, M)) as pool:
            results = list(pool.map(_task, tasks))
    h = cfg.config_hash
    write_meta(out, meta, h)
    if x_star is not None:
        write_csv(out / "xstar.csv", ("index", "value"), enumerate(x_star), h)
    write_summary(out / "ensemble_summary.csv", results, h)
    return results, meta, x_star


def write_meta(out: Path, meta: dict, config_hash: str):
    write_csv(out / "meta.csv", ("key", "value"), sorted(meta.items()), config_hash)


def write_summary(path, results, config_hash):
    T = max(len(r) for r in results)
    rows = []
    for n in range(T):
        recs = [r[n] for r in results if len(r) > n]
        objs = [r.objective for r in recs if r.objective is not None]
        dists = [r.dist_sq for r in recs if r.dist_sq is not None]
        rows.append((
            n, len(recs),
            float(np.mean(objs)) if objs else None,
            float(np.median(objs)) if objs else None,
            math.sqrt(float(np.mean(dists))) if dists else None,
            float(np.mean([r.cum_samples for r in recs])),
            float(np.mean([r.batch_size for r in recs])),
        ))
    write_csv(path, ("iter", "replications", "mean_objective", "median_objective", "rmse",
                     "mean_cum_samples", "mean_batch_size"), rows, config_hash)


def run_solve(cfg: ExperimentConfig, out_dir):
    """Single path on replication 0; writes ``trajectory.csv``."""
    if cfg.experiment["replications"] != 1:
        raise ConfigError("experiment.replications", "solve requires replications = 1")
    problem = build_problem(cfg)
    check_capabilities(cfg, problem)
    x_star = reference_optimum(cfg, problem)
    options = build_options(cfg, problem.dim)
    records = run(problem, options, build_schedule(cfg),
                  RandomStream(cfg.experiment["base_seed"], 0), x_star=x_star)
    write_csv(Path(out_dir) / "trajectory.csv", TRAJECTORY_COLUMNS,
              trajectory_rows(0, records, cfg.experiment["timing"]), cfg.config_hash)
    return records


def run_oracle(cfg: ExperimentConfig, out_dir):
    """Exact-gradient solve; writes ``xstar.csv`` and returns ``(x_star, gmap_norm)``."""
    problem = build_problem(cfg)
    if not problem.has_full_gradient:
        raise CapabilityError("oracle: the problem has no exact gradient")
    x0 = build_options(cfg, problem.dim).x0
    xs = solve_oracle(problem, cfg.solver["oracle_max_iter"], cfg.solver["oracle_tol"], x0=x0)
    from .prox import gradient_mapping
    g = float(np.linalg.norm(gradient_mapping(problem, xs, problem.full_gradient(xs),
                                              1.0 / problem.lipschitz)))
    write_csv(Path(out_dir) / "xstar.csv", ("index", "value"), enumerate(xs), cfg.config_hash)
    return xs, g


__all__ = ["ReplicationError", "OracleConvergenceError", "build_problem", "build_schedule",
           "build_options", "reference_optimum", "run_experiment", "run_solve", "run_oracle",
           "run_replication"]
