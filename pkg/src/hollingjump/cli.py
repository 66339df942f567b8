"""Command-line interface.

Exit codes: 0 success, 1 unreadable or malformed input, 2 the model violates
the standing assumptions, 3 the simulation diverged.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import classify_regime, run_ensemble, theorem_verdicts, write_stats_csv
from .config import ConfigError, ExperimentConfig, canonical_json, load_config
from .errors import DivergenceError, DomainError, ValidationError
from .integrator import (SolverConfig, convergence_study, integrate_path,
                         write_metadata_json, write_trajectory_csv)
from .jumps import RngSpec, write_schedule_csv
from .model import validate_assumption1
from .presets import PRESETS

EXIT_OK, EXIT_PARSE, EXIT_ASSUMPTION, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_PARSE)


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{s} is not positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hollingjump",
                     description="Stochastic Holling-II predator-prey model with jumps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="experiment JSON file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in model")
    common.add_argument("--seed", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--dt", type=_positive_float, help="maximum step between jumps")
    common.add_argument("--stride", type=int, help="record every k-th grid point")
    common.add_argument("--allow-degenerate", action="store_true", default=None,
                        help="accept vanishing positivity coefficients")
    common.add_argument("--out", help="output directory")

    sub.add_parser("validate", parents=[common], help="check the modelling assumptions")
    sub.add_parser("classify", parents=[common], help="label the regime of each species")
    sub.add_parser("simulate", parents=[common], help="integrate one trajectory")
    ens = sub.add_parser("ensemble", parents=[common],
                         help="simulate many paths and check the long-time results")
    ens.add_argument("--paths", type=int)
    ens.add_argument("--workers", type=int)
    conv = sub.add_parser("convergence", parents=[common],
                          help="estimate strong and weak orders")
    conv.add_argument("--paths", type=int)
    conv.add_argument("--dts", type=_positive_float, nargs="+")
    return parser


def _load(args) -> ExperimentConfig:
    if args.preset:
        cfg = ExperimentConfig(model=PRESETS[args.preset](), solver=SolverConfig(100.0))
    else:
        cfg = load_config(args.config)
    solver = cfg.solver
    rng = RngSpec(args.seed, solver.rng.stream_id) if args.seed is not None else solver.rng
    try:
        solver = SolverConfig(
            horizon=solver.horizon if args.horizon is None else args.horizon,
            dt_max=solver.dt_max if args.dt is None else args.dt,
            record_stride=solver.record_stride if args.stride is None else args.stride,
            rng=rng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    updates = {"solver": solver}
    if args.allow_degenerate:
        updates["allow_degenerate"] = True
    if args.out is not None:
        updates["output_dir"] = args.out
    if getattr(args, "paths", None) is not None:
        if args.paths < 1:
            raise ConfigError("--paths must be >= 1")
        updates["n_paths"] = args.paths
    if getattr(args, "workers", None) is not None:
        updates["workers"] = max(1, args.workers)
    if getattr(args, "dts", None) is not None:
        updates["dts"] = list(args.dts)
    return replace(cfg, **updates)


def _provenance(cfg: ExperimentConfig) -> str:
    return f"config_sha256={cfg.digest()} seed={cfg.solver.rng.seed}"


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _with_provenance(obj: dict, cfg: ExperimentConfig) -> dict:
    return {"provenance": {"config_sha256": cfg.digest(), "seed": cfg.solver.rng.seed},
            **obj}


def _echo(cfg: ExperimentConfig, out: Path | None = None) -> None:
    print("effective config: " + canonical_json(cfg.to_dict()), file=sys.stderr)
    if out is not None:
        _write_json(_with_provenance(cfg.to_dict(runtime=False), cfg),
                    out / "effective_config.json")


def _require_valid(cfg: ExperimentConfig) -> None:
    report = validate_assumption1(cfg.model, allow_degenerate=cfg.allow_degenerate)
    if not report.passed:
        raise ValidationError(report)


def cmd_validate(cfg: ExperimentConfig) -> int:
    _echo(cfg)
    report = validate_assumption1(cfg.model, allow_degenerate=cfg.allow_degenerate)
    print(report)
    return EXIT_OK if report.passed else EXIT_ASSUMPTION


def cmd_classify(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    _echo(cfg, out)
    an = cfg.analysis
    report = classify_regime(cfg.model, horizon=an.average_horizon, tol=an.classifier_tol,
                             predator_absent=an.predator_absent,
                             allow_degenerate=cfg.allow_degenerate)
    print(report.table())
    _write_json(_with_provenance(report.as_dict(), cfg), out / "regime.json")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    _echo(cfg, out)
    traj = integrate_path(cfg.model, cfg.solver, allow_degenerate=cfg.allow_degenerate)
    prov = _provenance(cfg)
    write_trajectory_csv(traj, out / "trajectory.csv", prov)
    write_schedule_csv(traj.events, out / "events.csv", prov)
    write_metadata_json({**traj.meta, "config_sha256": cfg.digest()}, out / "metadata.json")
    if traj.diverged:
        print(f"diverged at t={traj.meta['diverged_at']}; reduce dt_max "
              f"(currently {cfg.solver.dt_max})", file=sys.stderr)
        return EXIT_DIVERGED
    x1, x2 = (float(v) for v in traj.final)
    print(f"t={float(traj.times[-1])!r} x1={x1!r} x2={x2!r} events={len(traj.events)}")
    return EXIT_OK


def cmd_ensemble(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    _echo(cfg, out)
    an = cfg.analysis
    report = classify_regime(cfg.model, horizon=an.average_horizon, tol=an.classifier_tol,
                             predator_absent=an.predator_absent,
                             allow_degenerate=cfg.allow_degenerate)
    stats = run_ensemble(cfg.model, cfg.solver, cfg.n_paths, an, workers=cfg.workers,
                         allow_degenerate=cfg.allow_degenerate)
    write_stats_csv(stats, out / "stats.csv", _provenance(cfg))
    verdicts = theorem_verdicts(stats, report, an)
    _write_json(_with_provenance({"n_paths": stats.n_paths, "n_diverged": stats.n_diverged,
                                  "labels": report.labels, "verdicts": verdicts}, cfg),
                out / "verdicts.json")
    width = max(len(k) for k in verdicts)
    for key, v in verdicts.items():
        val = v["value"]
        shown = "" if val is None or (isinstance(val, float) and math.isnan(val)) else f"{val:.6g}"
        flag = "  (low power)" if v["low_power"] else ""
        print(f"{key:<{width}}  {v['status']:<15}{shown}{flag}")
    if stats.n_diverged:
        print(f"{stats.n_diverged} of {stats.n_paths} paths diverged", file=sys.stderr)
    return EXIT_OK


def cmd_convergence(cfg: ExperimentConfig) -> int:
    out = _outdir(cfg)
    _echo(cfg, out)
    _require_valid(cfg)
    rep = convergence_study(cfg.model, cfg.dts, cfg.n_paths, cfg.solver.horizon,
                            seed=cfg.solver.rng.seed)
    _write_json(_with_provenance(rep.as_dict(), cfg), out / "convergence.json")
    print(f"{'dt':>12}{'strong':>16}{'weak':>16}")
    for dt, s, w in zip(rep.dts, rep.strong_errors, rep.weak_errors):
        print(f"{dt:>12.6g}{s:>16.6g}{w:>16.6g}")
    print(f"strong order {rep.strong_order:.4f}, weak order {rep.weak_order:.4f}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(exc.report, file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
