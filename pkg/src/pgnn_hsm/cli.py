"""Command-line entry point.

    pgnn-hsm [-v] <command> [--config FILE] [--out DIR] [--seed N] ...

Commands: ``collect``, ``fit``, ``train``, ``simulate``, ``compare``,
``sweep`` and ``demo-cosine``.  The config file holds the experiment; flags
only override scalars.  Output goes to ``--out``, else ``$PGNN_HSM_OUT``,
else the config's ``output_dir``, else ``./pgnn_hsm_out``.

Exit codes: 0 success, 1 config or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig, bundled_config_path, load_config
from .errors import ConfigError, LookaheadUnavailable, NumericalError, TraceTooShort
from .experiments import (TrainedModels, mae, run_collection, run_comparison, run_cosine_demo, run_velocity_sweep,
                          simulate_tracking, write_manifest)
from .inverse_model import PgnnModel, PhysicalModel, fit_physical, load_model, regressors_from_trace, \
    train_blackbox, train_residual
from .motor_sim import SimTrace, write_columns_csv

log = logging.getLogger("pgnn_hsm")

OUT_ENV = "PGNN_HSM_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _velocities(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config (default: bundled default.toml)")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or config output_dir)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="pgnn-hsm", description="Physics-guided feedforward for a simulated hybrid stepper motor.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, dest="verbose_top")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("collect", parents=[common], help="simulate the training experiment, write trace.csv")

    s = sub.add_parser("fit", parents=[common], help="least-squares physical model from a trace")
    s.add_argument("--trace", help="trace CSV (default: <out>/trace.csv)")

    s = sub.add_parser("train", parents=[common], help="train a network model from a trace")
    s.add_argument("--kind", choices=("pgnn", "blackbox"), default="pgnn")
    s.add_argument("--trace", help="trace CSV (default: <out>/trace.csv)")
    s.add_argument("--physical", help="physical model JSON for pgnn (default: fit on the trace)")
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--epochs", type=int)

    s = sub.add_parser("simulate", parents=[common], help="track one evaluation stroke")
    s.add_argument("--model", help="model JSON; omit for feedback only")
    s.add_argument("--velocity", type=float, help="stroke velocity in rad/s (default: training velocity)")

    for name, text in (("compare", "MAE of each feedforward at the given velocities"),
                       ("sweep", "MAE over the configured velocity grid")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--models", help="directory with physical.json/blackbox.json/pgnn.json "
                                        "(default: collect and train)")
        s.add_argument("--roster", type=_names, help="comma-separated subset of none,physical,blackbox,pgnn")
        s.add_argument("--velocities", type=_velocities, help="comma-separated velocities in rad/s")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
        s.add_argument("--save-traces", action="store_true", default=(name == "compare"))

    s = sub.add_parser("demo-cosine", parents=[common], help="periodic-function extrapolation demo")
    s.add_argument("--n1", type=_velocities, help="comma-separated hidden-layer widths for the sweep")
    return p


# --- helpers -------------------------------------------------------------------

def _config(args) -> ExperimentConfig:
    path = args.config or bundled_config_path("default")
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or cfg.output_dir or "pgnn_hsm_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _trace_ref(path: Path) -> dict:
    # name and content hash rather than a location, so manifests do not depend on the directory
    return {"trace": path.name, "trace_sha256": hashlib.sha256(path.read_bytes()).hexdigest()}


def _read_trace(path: Path) -> SimTrace:
    if not path.is_file():
        raise UsageError(f"trace file {path} not found (run 'pgnn-hsm collect' first or pass --trace)")
    try:
        return SimTrace.from_csv(path)
    except ValueError as exc:
        raise UsageError(f"cannot read trace {path}: {exc}") from exc


def _load(path: Path):
    if not path.is_file():
        raise UsageError(f"model file {path} not found")
    try:
        return load_model(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc


def _write_model(model, path: Path, cfg: ExperimentConfig, **extra) -> None:
    model.save(path)
    write_manifest(path, cfg, kind=model.kind, **extra)


def _write_loss(history, path: Path, cfg: ExperimentConfig) -> None:
    write_columns_csv(path, ["epoch", "loss"], [np.arange(len(history)), history])
    write_manifest(path, cfg)


def _models_from_dir(path: Path, roster) -> TrainedModels:
    loaded = {}
    for name in ("physical", "blackbox", "pgnn"):
        f = path / f"{name}.json"
        if f.is_file():
            loaded[name] = _load(f)
    phys = loaded.get("physical")
    if phys is None and isinstance(loaded.get("pgnn"), PgnnModel):
        phys = loaded["pgnn"].physical
    missing = [m for m in roster if m != "none" and (phys if m == "physical" else loaded.get(m)) is None]
    if missing:
        raise UsageError(f"no model file for {', '.join(missing)} in {path}")
    return TrainedModels(phys, loaded.get("blackbox"), loaded.get("pgnn"))


def _roster(args, cfg: ExperimentConfig):
    roster = tuple(args.roster or cfg.evaluation.roster)
    try:
        dataclasses.replace(cfg.evaluation, roster=roster)
    except ConfigError as exc:
        raise UsageError(f"--roster: {exc}") from exc
    return roster


# --- commands ------------------------------------------------------------------

def cmd_collect(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    trace = run_collection(cfg, out)
    print(f"wrote {out / 'trace.csv'} ({len(trace)} samples)")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    trace_path = Path(args.trace) if args.trace else out / "trace.csv"
    regs = regressors_from_trace(_read_trace(trace_path), cfg.regressor)
    model = fit_physical(regs, cfg.regressor)
    _write_model(model, out / "physical.json", cfg, **_trace_ref(trace_path))
    print(f"theta_J = {model.theta_inertia:.9g}")
    print(f"theta_fv = {model.theta_viscous:.9g}")
    print(f"residual_rms = {model.residual_rms:.6g}")
    print(f"wrote {out / 'physical.json'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    tc = cfg.train_config(args.kind)
    changes = {}
    if args.learning_rate is not None:
        changes["learning_rate"] = args.learning_rate
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if changes:
        try:
            tc = dataclasses.replace(tc, **changes)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc
    trace_path = Path(args.trace) if args.trace else out / "trace.csv"
    regs = regressors_from_trace(_read_trace(trace_path), cfg.regressor)
    if args.kind == "pgnn":
        if args.physical:
            phys = _load(Path(args.physical))
            if not isinstance(phys, PhysicalModel):
                raise UsageError(f"{args.physical} is not a physical model")
        else:
            phys = fit_physical(regs, cfg.regressor)
        print(f"theta_J = {phys.theta_inertia:.9g}")
        print(f"theta_fv = {phys.theta_viscous:.9g}")
        result = train_residual(regs, phys, tc)
    else:
        result = train_blackbox(regs, tc, cfg.regressor)
    path = out / f"{args.kind}.json"
    _write_model(result.model, path, cfg, **_trace_ref(trace_path), best_epoch=result.best_epoch,
                 final_loss=result.final_loss)
    _write_loss(result.loss_history, out / f"{args.kind}_loss.csv", cfg)
    print(f"final_loss = {result.final_loss:.6g} (epoch {result.best_epoch})")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    model = _load(Path(args.model)) if args.model else None
    v = args.velocity if args.velocity is not None else cfg.training_velocity
    if not v > 0:
        raise UsageError("--velocity must be > 0")
    trace, start, stop = simulate_tracking(cfg, model, v)
    name = model.kind if model is not None else "none"
    path = out / f"simulate_{name}_v{v:g}.csv"
    trace.to_csv(path)
    err = mae(trace.y_star[start:stop], trace.y[start:stop])
    write_manifest(path, cfg, model=name, velocity=v, measure_start=start, measure_stop=stop, mae=err)
    print(f"{name} v={v:g}: MAE = {err:.6g} rad")
    print(f"wrote {path}")
    return EXIT_OK


def _grid(args, sweep: bool) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    roster = _roster(args, cfg)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.velocities is not None and (not args.velocities or any(not v > 0 for v in args.velocities)):
        raise UsageError("--velocities must be positive numbers")
    models = _models_from_dir(Path(args.models), roster) if args.models else None
    kw = dict(models=models, velocities=args.velocities, roster=roster, out_dir=out,
              save_traces=args.save_traces, jobs=args.jobs)
    report = run_velocity_sweep(cfg, **kw) if sweep else run_comparison(cfg, **kw)[0]
    for r in report.rows:
        flag = " (extrapolation)" if r.extrapolation else ""
        print(f"{r.model:>9} v={r.velocity:<5g} MAE = {r.mae:.4e}{flag}")
    print(f"wrote {out / (('sweep' if sweep else 'compare') + '_report.json')}")
    return EXIT_OK


def cmd_compare(args) -> int:
    return _grid(args, sweep=False)


def cmd_sweep(args) -> int:
    return _grid(args, sweep=True)


def cmd_demo_cosine(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    n1 = None
    if args.n1 is not None:
        if any(int(n) != n or n < 1 for n in args.n1) or not args.n1:
            raise UsageError("--n1 must list positive integers")
        n1 = [int(n) for n in args.n1]
    report = run_cosine_demo(cfg.seed, n1, cfg.cosine, out, cfg)
    for r in report["extrapolation"]:
        print(f"{r['transform']:>4} n1={r['n1']}: max extrapolation error {r['max_error_extrapolation']:.4g}")
    mn = report["min_neurons"]
    print(f"neurons for max error <= {cfg.cosine.accuracy:g}: mod {mn['mod']}, raw {mn['raw']}")
    print(f"wrote {out / 'cosine_report.json'}")
    return EXIT_OK


COMMANDS = {
    "collect": cmd_collect, "fit": cmd_fit, "train": cmd_train, "simulate": cmd_simulate,
    "compare": cmd_compare, "sweep": cmd_sweep, "demo-cosine": cmd_demo_cosine,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = max(args.verbose, args.verbose_top)
    logging.basicConfig(level=logging.WARNING - 10 * min(level, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, TraceTooShort, LookaheadUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        msg = f"numerical failure ({type(exc).__name__}): {exc}"
        if exc.hint:
            msg += f"\nhint: {exc.hint}"
        print(msg, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
