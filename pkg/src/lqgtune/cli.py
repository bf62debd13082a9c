"""Command-line entry point: ``lqgtune {linearize,simulate,tune,benchmark,landscape}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, load_preset, save_weights
from .dynamics import hover_equilibrium, linearize
from .riccati import RiccatiError, synthesize
from .simulation import SCHEMA_VERSION, compute_metrics, simulate
from .tuner import landscape_scan, tune

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("lqgtune")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_options(parser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="YAML config merged over the defaults")
    parser.add_argument("--seed", type=int, default=d, help="override the simulation / training seed")
    parser.add_argument("--out-dir", default=argparse.SUPPRESS if suppress else ".",
                        help="directory for output files (default: current)")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lqgtune", description="Bi-level LQG weight tuning for a hovering quadrotor.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(p, suppress=False)
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("linearize", parents=[common], help="write the hover linearization A, B, C")

    s = sub.add_parser("simulate", parents=[common], help="closed-loop rollout for one weight set")
    s.add_argument("--weights", default="tuned",
                   help="weights JSON path or bundled preset (mt_fragile, mt_identity, tuned)")
    s.add_argument("--plant", choices=("linear", "nonlinear"), default=None)

    t = sub.add_parser("tune", parents=[common], help="run one outer-loop optimizer")
    t.add_argument("--method", required=True, choices=("CMA", "PS", "GA", "BR", "MT"))
    t.add_argument("--budget", type=int, default=None, help="evaluation budget")
    t.add_argument("--checkpoint", default=None,
                   help="checkpoint file (default: <out-dir>/tune_<method>.ckpt.json)")
    t.add_argument("--no-checkpoint", action="store_true")

    b = sub.add_parser("benchmark", parents=[common], help="tune all methods, score on held-out seeds")
    b.add_argument("--budget", type=int, default=None)

    g = sub.add_parser("landscape", parents=[common], help="J_out over a (Q position, R) scale grid")
    g.add_argument("--grid", default=None, help="NxM, e.g. 50x50")
    g.add_argument("--bounds", default=None, help="qmin,qmax,rmin,rmax (positive)")
    return p


def _parse_grid(text):
    try:
        n, m = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid expects NxM, got {text!r}")
    if n < 2 or m < 2:
        raise UsageError("--grid must be at least 2x2")
    return n, m


def _parse_bounds(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--bounds expects four numbers, got {text!r}")
    if len(vals) != 4:
        raise UsageError("--bounds expects qmin,qmax,rmin,rmax")
    if min(vals) <= 0:
        raise UsageError("--bounds must be positive")
    if vals[0] >= vals[1] or vals[2] >= vals[3]:
        raise UsageError("--bounds need min < max")
    return tuple(vals[:2]), tuple(vals[2:])


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def cmd_linearize(args, cfg, out: Path) -> int:
    eq = hover_equilibrium(cfg.params)
    model = linearize(cfg.params, eq)
    A = model.A
    checks = {
        "A[pos,vel] is identity": np.allclose(A[0:3, 3:6], np.eye(3), atol=1e-12),
        "A[att,rate] is identity": np.allclose(A[6:9, 9:12], np.eye(3), atol=1e-12),
        "A[vel,att] couples gravity only": np.count_nonzero(A[3:6, 6:9]) == 2,
        "B thrust entry equals 1/m": np.isclose(model.B[5, 0], 1.0 / cfg.params.mass),
    }
    payload = {"schema": "linear_model", "schema_version": SCHEMA_VERSION, **model.to_dict()}
    _write(out / "linear_model.json", _dump(payload))
    if not args.quiet:
        print("A[0:3,3:6] =")
        print(np.array2string(A[0:3, 3:6], precision=6, suppress_small=True))
        print(f"B[5,0] = {model.B[5, 0]:.6g}")
        for name, ok in checks.items():
            print(f"  {'ok ' if ok else 'FAIL'} {name}")
        print(f"nonzeros: A {np.count_nonzero(A)}/144, B {np.count_nonzero(model.B)}/48")
    return EXIT_OK


def cmd_simulate(args, cfg, out: Path) -> int:
    try:
        weights = load_preset(args.weights)
    except FileNotFoundError:
        raise UsageError(f"weights file not found: {args.weights}")
    except ValueError as exc:
        raise UsageError(str(exc))
    weights = weights.with_noise(cfg.W, cfg.V)
    sim = cfg.sim
    if args.plant:
        sim = replace(sim, plant=args.plant)
    ctx = cfg.context(sim=sim)
    gains = synthesize(ctx.model, weights, kalman=ctx.kalman())
    traj = simulate(ctx.model, cfg.params, gains, weights, sim)
    metrics = compute_metrics(traj, weights, cfg.lam)
    _write(out / "trajectory.csv", traj.to_csv())
    from .benchmark import _clean
    _write(out / "metrics.json", _dump(_clean({"schema": "run_metrics",
                                               "schema_version": SCHEMA_VERSION,
                                               "weights": args.weights, "plant": sim.plant,
                                               "seed": sim.seed, **metrics.to_dict()})))
    if not args.quiet:
        state = f"diverged at t={traj.divergence_time:.3f} s" if traj.diverged else "stable"
        print(f"{sim.plant} plant, seed {sim.seed}: {state}; J_out = {metrics.outer_cost:.6g}")
    return EXIT_OK


def cmd_tune(args, cfg, out: Path) -> int:
    ocfg = cfg.optimizer(args.method, budget=args.budget)
    ckpt = None
    if not args.no_checkpoint and args.method in ("CMA", "PS", "GA"):
        ckpt = args.checkpoint or str(out / f"tune_{args.method}.ckpt.json")
    ctx = cfg.context(seed=cfg.train_seed)

    def report(gen, best):
        if not args.quiet and gen % 10 == 0:
            print(f"  generation {gen}: best J_out {best:.6g}", flush=True)

    try:
        res = tune(ocfg, ctx, checkpoint=ckpt, callback=report)
    except ValueError as exc:
        raise UsageError(str(exc))
    _write(out / f"tune_{args.method}.json", _dump(res.to_dict(include_timing=False)))
    save_weights(out / f"weights_{args.method}.json", res.best_weights())
    _write(out / f"tune_{args.method}.timing.json", _dump({"wall_time": res.wall_time}))
    if ckpt and os.path.exists(ckpt):
        os.remove(ckpt)
    if not args.quiet:
        print(f"{args.method}: best J_out = {res.best_cost:.6g} after {res.evaluations} evaluations")
    return EXIT_OK


def cmd_benchmark(args, cfg, out: Path) -> int:
    from .benchmark import run_benchmark, write_outputs

    def progress(m, entry):
        if args.quiet:
            return
        if "error" in entry:
            print(f"  {m}: failed ({entry['error']})")
        else:
            print(f"  {m}: held-out J_out {entry['held_out']['outer_cost']:.6g}", flush=True)

    report, timing = run_benchmark(cfg, budget=args.budget, progress=progress)
    paths = write_outputs(report, timing, out)
    if not args.quiet:
        from .benchmark import table_csv
        print(table_csv(report), end="")
        print("outputs:", ", ".join(sorted(paths)))
    return EXIT_OK


def cmd_landscape(args, cfg, out: Path) -> int:
    n, m = _parse_grid(args.grid) if args.grid else cfg.landscape_grid
    qb, rb = _parse_bounds(args.bounds) if args.bounds else (cfg.q_bounds, cfg.r_bounds)
    if n < 2 or m < 2:
        raise UsageError("landscape grid must be at least 2x2")
    ctx = landscape_context(cfg)
    qs = np.logspace(np.log10(qb[0]), np.log10(qb[1]), n)
    rs = np.logspace(np.log10(rb[0]), np.log10(rb[1]), m)
    land = landscape_scan(ctx, qs, rs)
    lines = [f"# schema=landscape schema_version={SCHEMA_VERSION}", "q_scale,r_scale,J_out"]
    lines += [f"{q!r},{r!r},{J!r}" for q, r, J in land.rows()]
    _write(out / "landscape.csv", "\n".join(lines) + "\n")
    if not args.quiet:
        print(f"{n}x{m} grid: J_out in [{land.costs.min():.4g}, {land.costs.max():.4g}], "
              f"ratio {land.dynamic_range:.3g}, {len(land.local_minima())} interior local minima")
    return EXIT_OK


def landscape_context(cfg):
    """Tuning context for the scan; noise draws are off unless configured."""
    return replace(cfg.context(), noisy=cfg.landscape_noise)


COMMANDS = {
    "linearize": cmd_linearize,
    "simulate": cmd_simulate,
    "tune": cmd_tune,
    "benchmark": cmd_benchmark,
    "landscape": cmd_landscape,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        overrides = None
        if args.seed is not None:
            overrides = {"simulation": {"seed": args.seed}, "benchmark": {"train_seed": args.seed}}
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.train_seed = args.seed
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RiccatiError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
