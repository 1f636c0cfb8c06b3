"""INI experiment configuration: parsing, validation and the canonical hash.

Sections are ``[problem]``, ``[solver]``, ``[sampling]``, ``[experiment]`` and
``[output]``.  Every key has a typed default; unknown sections or keys are
rejected.  The hash is the SHA-256 of the canonical JSON of every resolved
value outside ``[output]``, so key order, whitespace, comments and spelling
out a default never change it.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

PROBLEM_KINDS = ("logistic", "dataset", "param_estimation", "lasso_toy")
STRATEGIES = ("adaptive", "geometric", "polynomial", "fixed")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the offending ``section.key``."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


def _opt_int(s):
    return None if s.strip().lower() in ("", "none") else int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return s.strip()


def _opt_str(s):
    s = s.strip()
    return None if s.lower() in ("", "none") else s


# key -> (parser, default)
SCHEMA = {
    "problem": {
        "kind": (_str, "logistic"),
        "dimension": (int, 20),
        "n_samples": (int, 200),
        "lambda1": (_opt_float, None),
        "lambda2": (_opt_float, None),
        "sigma_v": (float, 1.0),
        "condition_number": (float, 10.0),
        "label_noise": (float, 0.1),
        "noise_std": (float, 1.0),
        "data_path": (_opt_str, None),
        "data_format": (_opt_str, None),
        "data_seed": (int, 0),
        "x_star_path": (_opt_str, None),
    },
    "solver": {
        "algorithm": (_str, "adanapg"),
        "mode": (_str, "general"),
        "max_iterations": (int, 100),
        "stop_gmap_tol": (_opt_float, None),
        "pi0": (float, 1.0),
        "alpha_override": (_opt_float, None),
        "sample_budget": (_opt_int, None),
        "x0_path": (_opt_str, None),
        "oracle_max_iter": (int, 100_000),
        "oracle_tol": (float, 1e-10),
    },
    "sampling": {
        "strategy": (_str, "adaptive"),
        "theta": (float, 0.9),
        "nu": (float, 5.5),
        "k_initial": (int, 2),
        "k_max": (int, 10**6),
        "max_augment_rounds": (int, 10),
        "gmap_floor": (float, 1e-16),
        "k0": (int, 2),
        "gamma1": (float, 0.05),
        "gamma2": (float, 0.01),
        "fixed_k": (int, 10),
    },
    "experiment": {
        "replications": (int, 1),
        "base_seed": (int, 0),
        "record_noise": (_bool, False),
        "record_iterates": (_bool, False),
        "timing": (_bool, False),
    },
    "output": {
        "directory": (_str, "out"),
    },
}


@dataclass
class ExperimentConfig:
    problem: dict
    solver: dict
    sampling: dict
    experiment: dict
    output: dict
    base_dir: Path = Path(".")

    def canonical(self) -> dict:
        """Resolved values of every hashed section."""
        return {s: dict(getattr(self, s)) for s in ("problem", "solver", "sampling", "experiment")}

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def resolve_path(self, p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _check(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def validate(cfg: ExperimentConfig):
    p, s, sm, e = cfg.problem, cfg.solver, cfg.sampling, cfg.experiment
    _check(p["kind"] in PROBLEM_KINDS, "problem.kind", f"must be one of {PROBLEM_KINDS}")
    _check(p["dimension"] >= 1, "problem.dimension", "must be >= 1")
    _check(p["n_samples"] >= 1, "problem.n_samples", "must be >= 1")
    for k in ("lambda1", "lambda2"):
        _check(p[k] is None or p[k] >= 0, f"problem.{k}", "must be nonnegative")
    _check(p["sigma_v"] >= 0, "problem.sigma_v", "must be nonnegative")
    _check(p["condition_number"] >= 1, "problem.condition_number", "must be >= 1")
    _check(0 <= p["label_noise"] <= 0.5, "problem.label_noise", "must lie in [0, 0.5]")
    _check(p["noise_std"] >= 0, "problem.noise_std", "must be nonnegative")
    if p["kind"] == "dataset":
        _check(p["data_path"] is not None, "problem.data_path", "required when kind = dataset")
    _check(p["data_format"] in (None, "csv", "svmlight"), "problem.data_format",
           "must be csv or svmlight")
    if p["kind"] == "lasso_toy":
        _check(p["lambda2"] is None or p["lambda2"] > 0, "problem.lambda2",
               "must be positive for lasso_toy")

    from .solver import ALGORITHMS, MODES
    _check(s["algorithm"] in ALGORITHMS, "solver.algorithm", f"must be one of {ALGORITHMS}")
    _check(s["mode"] in MODES, "solver.mode", f"must be one of {MODES}")
    _check(s["max_iterations"] >= 0, "solver.max_iterations", "must be nonnegative")
    _check(s["stop_gmap_tol"] is None or s["stop_gmap_tol"] >= 0, "solver.stop_gmap_tol",
           "must be nonnegative")
    _check(0 < s["pi0"] <= 1, "solver.pi0", "must lie in (0, 1]")
    _check(s["alpha_override"] is None or s["alpha_override"] > 0, "solver.alpha_override",
           "must be positive")
    _check(s["sample_budget"] is None or s["sample_budget"] >= 1, "solver.sample_budget",
           "must be positive")
    _check(s["oracle_max_iter"] >= 1, "solver.oracle_max_iter", "must be >= 1")
    _check(s["oracle_tol"] >= 0, "solver.oracle_tol", "must be nonnegative")

    _check(sm["strategy"] in STRATEGIES, "sampling.strategy", f"must be one of {STRATEGIES}")
    _check(sm["theta"] > 0, "sampling.theta", "must be positive")
    _check(sm["nu"] > 0, "sampling.nu", "must be positive")
    _check(sm["k_initial"] >= 2, "sampling.k_initial", "must be >= 2")
    _check(sm["k_max"] >= sm["k_initial"], "sampling.k_max", "must be >= sampling.k_initial")
    _check(sm["max_augment_rounds"] >= 1, "sampling.max_augment_rounds", "must be >= 1")
    _check(sm["gmap_floor"] >= 0, "sampling.gmap_floor", "must be nonnegative")
    _check(sm["k0"] >= 1, "sampling.k0", "must be >= 1")
    _check(sm["gamma1"] > 0, "sampling.gamma1", "must be positive")
    _check(sm["gamma2"] > 0, "sampling.gamma2", "must be positive")
    _check(sm["fixed_k"] >= 1, "sampling.fixed_k", "must be >= 1")
    if s["algorithm"] == "adanapg":
        _check(sm["strategy"] == "adaptive", "sampling.strategy", "adanapg requires adaptive")

    _check(e["replications"] >= 1, "experiment.replications", "must be >= 1")
    _check(e["base_seed"] >= 0, "experiment.base_seed", "must be nonnegative")


def _finite(v):
    return not isinstance(v, float) or math.isfinite(v)


def parse_config_text(text: str, base_dir=".") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    # no value spans lines, so indentation is never a continuation
    text = "\n".join(line.strip() for line in text.splitlines())
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse: {exc}") from None
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
    for section, keys in SCHEMA.items():
        out = {k: default for k, (_, default) in keys.items()}
        if cp.has_section(section):
            for key, raw in cp.items(section):
                if key not in keys:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                try:
                    v = keys[key][0](raw)
                except (TypeError, ValueError):
                    raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None
                if not _finite(v):
                    raise ConfigError(f"{section}.{key}", "must be finite")
                out[key] = v
        values[section] = out
    cfg = ExperimentConfig(**values, base_dir=Path(base_dir))
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, base_dir=path.parent)
