"""Experiment configuration: YAML defaults, deep merge, validation, weight files."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import QuadrotorParams, hover_equilibrium, linearize
from .riccati import LqgWeights, params_from_weights, weights_from_params
from .simulation import DisturbanceSpec, SimConfig
from .tuner import METHODS, OptimizerConfig, TuningContext


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source, self.line = source, line
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


def _default_text() -> str:
    return resources.files("lqgtune.data").joinpath("default.yaml").read_text()


def default_dict() -> dict:
    return yaml.safe_load(_default_text())


def _key_lines(node, prefix=()) -> dict:
    """Map key paths to the line they appear on, from a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            out.update(_key_lines(v, path))
    return out


def _merge(base: dict, user: dict, lines: dict, source, prefix=()) -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        path = prefix + (key,)
        if key not in base:
            raise ConfigError(f"unknown key {'.'.join(map(str, path))!r}", source, lines.get(path))
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(path)} must be a mapping", source, lines.get(path))
            out[key] = _merge(base[key], value, lines, source, path)
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    params: QuadrotorParams
    sim: SimConfig
    W: np.ndarray
    V: np.ndarray
    lam: float
    tol: float
    max_dev_x: tuple
    max_dev_u: tuple
    workers: int
    methods: tuple
    budget: int
    train_seed: int
    eval_seeds: tuple
    manual_preset: str
    landscape_grid: tuple
    q_bounds: tuple
    r_bounds: tuple
    landscape_noise: bool
    raw: dict = field(repr=False, default_factory=dict)

    def context(self, seed: int | None = None, sim: SimConfig | None = None) -> TuningContext:
        sim = sim or self.sim
        if seed is not None:
            from dataclasses import replace
            sim = replace(sim, seed=int(seed))
        model = linearize(self.params, hover_equilibrium(self.params))
        return TuningContext(model, self.params, self.W, self.V, sim, self.lam,
                             self.max_dev_x, self.max_dev_u)

    def optimizer(self, method: str, budget: int | None = None,
                  seed: int | None = None) -> OptimizerConfig:
        t = self.raw["tuning"]
        kw = dict(method=method, budget=self.budget if budget is None else budget,
                  seed=self.train_seed if seed is None else seed, tol=self.tol,
                  workers=self.workers)
        if method == "CMA":
            kw.update(sigma0=t["cma"]["sigma0"], popsize=t["cma"]["popsize"])
        elif method == "PS":
            p = t["pso"]
            kw.update(popsize=p["popsize"], box=p["box"], pso_inertia=p["inertia"],
                      pso_cognitive=p["cognitive"], pso_social=p["social"],
                      warm_start=bool(p["warm_start"]))
        elif method == "GA":
            g = t["ga"]
            kw.update(popsize=g["popsize"], box=g["box"], ga_crossover=g["crossover"],
                      ga_mutation=g["mutation"], ga_mutation_scale=g["mutation_scale"],
                      ga_tournament=g["tournament"], ga_blend_alpha=g["blend_alpha"],
                      warm_start=bool(g["warm_start"]))
        elif method == "MT":
            kw.update(manual_theta=tuple(params_from_weights(load_preset(self.manual_preset))))
        return OptimizerConfig(**kw)


def _floats(value, n, name, source, lines):
    try:
        arr = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers", source, lines.get(tuple(name.split("."))))
    if len(arr) != n:
        raise ConfigError(f"{name} must have {n} entries", source, lines.get(tuple(name.split("."))))
    return arr


def build_config(d: dict, source: str | None = None, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}

    def fail(msg, *path):
        return ConfigError(msg, source, lines.get(path))

    q = d["quadrotor"]
    try:
        params = QuadrotorParams(**{k: (np.asarray(v, float) if k == "inertia" else float(v))
                                    for k, v in q.items()})
    except (TypeError, ValueError) as exc:
        raise fail(f"quadrotor: {exc}", "quadrotor")
    s = d["simulation"]
    try:
        dist = DisturbanceSpec(**s["disturbance"])
        sim = SimConfig(horizon=float(s["horizon"]), dt=float(s["dt"]), plant=s["plant"],
                        seed=int(s["seed"]), disturbance=dist, saturation=bool(s["saturation"]))
    except (TypeError, ValueError) as exc:
        raise fail(f"simulation: {exc}", "simulation")

    W = np.diag(_floats(d["noise"]["process"], 12, "noise.process", source, lines))
    V = np.diag(_floats(d["noise"]["measurement"], 6, "noise.measurement", source, lines))
    if np.any(np.diag(W) < 0) or np.any(np.diag(V) <= 0):
        raise fail("noise: process must be >= 0 and measurement > 0", "noise")

    t = d["tuning"]
    b = d["benchmark"]
    methods = tuple(str(m) for m in b["methods"])
    if not methods:
        raise fail("benchmark.methods must name at least one method", "benchmark", "methods")
    for m in methods:
        if m not in METHODS:
            raise fail(f"unknown method {m!r}; choose from {', '.join(METHODS)}", "benchmark", "methods")
    eval_seeds = tuple(int(x) for x in b["eval_seeds"])
    if len(set(eval_seeds)) != len(eval_seeds):
        raise fail("benchmark.eval_seeds must be distinct", "benchmark", "eval_seeds")
    if int(b["train_seed"]) in eval_seeds:
        raise fail("benchmark.train_seed must not be an evaluation seed", "benchmark", "train_seed")
    if not float(t["tol"]) > 0:
        raise fail("tuning.tol must be > 0", "tuning", "tol")
    if not float(t["lam"]) > 0:
        raise fail("tuning.lam must be > 0", "tuning", "lam")

    ls = d["landscape"]
    grid = tuple(int(g) for g in ls["grid"])
    qb = _floats(ls["q_bounds"], 2, "landscape.q_bounds", source, lines)
    rb = _floats(ls["r_bounds"], 2, "landscape.r_bounds", source, lines)
    if len(grid) != 2 or min(grid) < 1:
        raise fail("landscape.grid must be two positive integers", "landscape", "grid")
    if min(qb + rb) <= 0:
        raise fail("landscape bounds must be positive", "landscape")

    cfg = ExperimentConfig(
        params=params, sim=sim, W=W, V=V, lam=float(t["lam"]), tol=float(t["tol"]),
        max_dev_x=_floats(t["max_dev_x"], 12, "tuning.max_dev_x", source, lines),
        max_dev_u=_floats(t["max_dev_u"], 4, "tuning.max_dev_u", source, lines),
        workers=int(t["workers"]), methods=methods, budget=int(b["budget"]),
        train_seed=int(b["train_seed"]), eval_seeds=eval_seeds,
        manual_preset=str(t["manual_preset"]), landscape_grid=grid, q_bounds=qb,
        r_bounds=rb, landscape_noise=bool(ls["noise"]), raw=d,
    )
    for m in methods:
        try:
            cfg.optimizer(m)
        except (TypeError, ValueError, KeyError, OSError) as exc:
            raise fail(f"method {m}: {exc}", "tuning")
    return cfg


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the user file (if any), then ``overrides``."""
    merged = default_dict()
    lines: dict = {}
    source = None
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source)
        try:
            user = yaml.safe_load(text)
            node = yaml.compose(text)
        except yaml.MarkedYAMLError as exc:
            line = exc.problem_mark.line + 1 if exc.problem_mark else None
            raise ConfigError(f"YAML syntax error: {exc.problem}", source, line)
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML error: {exc}", source)
        if user is None:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError("top level must be a mapping", source, 1)
        lines = _key_lines(node)
        merged = _merge(merged, user, lines, source)
    if overrides:
        merged = _merge(merged, overrides, {}, "<overrides>")
    try:
        return build_config(merged, source, lines)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}", source)


# --- weight files --------------------------------------------------------

def weights_to_dict(w: LqgWeights) -> dict:
    return {
        "schema": "lqg_weights",
        "schema_version": 1,
        "Q": w.Q.tolist(),
        "R": w.R.tolist(),
        "theta": params_from_weights(w).tolist(),
    }


def weights_from_dict(d: dict) -> LqgWeights:
    """Accepts either a flat ``theta`` (88 values) or full ``Q``/``R`` matrices.

    Matrices take precedence when both are present.
    """
    if "Q" in d and "R" in d:
        Q = np.asarray(d["Q"], dtype=float)
        R = np.asarray(d["R"], dtype=float)
        if Q.shape != (12, 12) or R.shape != (4, 4):
            raise ValueError(f"weights must be 12x12 and 4x4, got {Q.shape} and {R.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(R))):
            raise ValueError("weights must be finite")
        try:
            return LqgWeights.from_matrices(Q, R)
        except np.linalg.LinAlgError:
            raise ValueError("Q must be PSD and R positive definite")
    if "theta" in d:
        theta = np.asarray(d["theta"], dtype=float)
        if theta.shape != (88,):
            raise ValueError(f"theta must have 88 entries, got {theta.size}")
        return weights_from_params(theta)
    raise ValueError("weights file needs Q and R, or theta")


def save_weights(path, w: LqgWeights) -> None:
    Path(path).write_text(json.dumps(weights_to_dict(w), indent=1) + "\n")


def load_weights(path) -> LqgWeights:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}")
    return weights_from_dict(d)


PRESETS = ("mt_fragile", "mt_identity", "tuned")


def load_preset(name: str) -> LqgWeights:
    """Bundled weight set, or a path to a weights file."""
    if name in PRESETS:
        text = resources.files("lqgtune.data.presets").joinpath(f"{name}.json").read_text()
        return weights_from_dict(json.loads(text))
    return load_weights(name)
