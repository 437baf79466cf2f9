"""End-to-end studies: data collection, feedforward comparisons, velocity
sweeps and the periodic-function extrapolation demo.

Every function is a deterministic function of its config (and seed).  When
an output directory is given, each written file gets a sibling
``<name>.manifest.json`` carrying the config hash and seed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash, derive_seed
from .errors import EmptyTrace
from .feedforward import FeedforwardEvaluator
from .inverse_model import (InverseModel, PhysicalModel, TrainConfig, TrainResult, fit_network, fit_physical,
                            nn_forward, regressors_from_trace, train_blackbox, train_residual)
from .motor_sim import SimTrace, closed_loop_simulate, write_columns_csv
from .trajectory import MotionLimits, ReferenceProfile, back_and_forth, collection_profile, hold, third_order_move

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def mae(y_star, y) -> float:
    """Mean absolute tracking error ``mean(|y* - y|)``."""
    y_star = np.asarray(y_star, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_star.shape != y.shape:
        raise ValueError("y_star and y must have equal length")
    if y.size == 0:
        raise EmptyTrace("cannot compute MAE of an empty trace")
    return float(np.mean(np.abs(y_star - y)))


# --- artifacts -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, config: ExperimentConfig, **extra) -> Path:
    path = Path(path)
    doc = {
        "artifact": path.name,
        "sha256": _sha256(path),
        "config_hash": config_hash(config),
        "seed": config.seed,
        "package_version": __version__,
    }
    doc.update(extra)
    mpath = path.with_name(path.name + ".manifest.json")
    mpath.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return mpath


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --- data collection -----------------------------------------------------------

def collection_reference(config: ExperimentConfig) -> ReferenceProfile:
    c = config.collection
    return collection_profile(c.rotations, c.limits(), config.gains.sample_time, c.dwell, c.duration)


def run_collection(config: ExperimentConfig, out_dir=None) -> SimTrace:
    """Closed-loop training experiment on the back-and-forth reference.

    With ``collection.feedforward = "physical"`` a feedback-only pass is run
    first to identify the physical model used as feedforward in the
    recorded pass.
    """
    profile = collection_reference(config)
    trace = closed_loop_simulate(profile, None, config.motor, config.gains, config.substeps)
    if config.collection.feedforward == "physical":
        phys = fit_physical(regressors_from_trace(trace, config.regressor), config.regressor)
        trace = closed_loop_simulate(profile, FeedforwardEvaluator(phys, profile), config.motor, config.gains,
                                     config.substeps)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "trace.csv"
        trace.to_csv(path)
        write_manifest(path, config, samples=len(trace), sample_time=config.gains.sample_time,
                       duration=config.collection.duration)
    return trace


# --- model identification ------------------------------------------------------

@dataclass
class TrainedModels:
    physical: PhysicalModel
    blackbox: Optional[InverseModel] = None
    pgnn: Optional[InverseModel] = None
    results: dict = field(default_factory=dict)

    def get(self, name: str) -> Optional[InverseModel]:
        if name == "none":
            return None
        model = getattr(self, name)
        if model is None:
            raise KeyError(f"model {name!r} was not trained")
        return model


def train_models(config: ExperimentConfig, trace: SimTrace,
                 kinds: Iterable[str] = ("physical", "blackbox", "pgnn")) -> TrainedModels:
    """Fit the physical model, then the requested networks on the same data."""
    kinds = set(kinds)
    regs = regressors_from_trace(trace, config.regressor)
    phys = fit_physical(regs, config.regressor)
    log.info("physical model: theta_J=%.6g theta_fv=%.6g", phys.theta_inertia, phys.theta_viscous)
    models = TrainedModels(phys)
    if "pgnn" in kinds:
        res = train_residual(regs, phys, config.train_config("pgnn"))
        models.pgnn = res.model
        models.results["pgnn"] = res
    if "blackbox" in kinds:
        res = train_blackbox(regs, config.train_config("blackbox"), config.regressor)
        models.blackbox = res.model
        models.results["blackbox"] = res
    return models


# --- tracking experiments ------------------------------------------------------

def evaluation_reference(config: ExperimentConfig, velocity: float) -> tuple[ReferenceProfile, int, int]:
    """Warm-up back-and-forth cycle, then the measured forward stroke and a final dwell.

    Returns the profile and the ``[start, stop)`` sample window of the measured stroke.
    """
    ev = config.evaluation
    ts = config.gains.sample_time
    limits = MotionLimits(velocity, ev.a_max, ev.j_max)
    amp = TWO_PI * ev.rotations
    warm = back_and_forth(ev.rotations, limits, ts, ev.dwell, 1)
    fwd = third_order_move(-amp, amp, limits, ts)
    parts = [warm, ReferenceProfile(fwd.y[1:], ts), hold(amp, ev.dwell, ts)]
    profile = ReferenceProfile.concat(parts)
    return profile, len(warm), len(profile)


@dataclass
class MaeRow:
    experiment: str
    model: str
    velocity: float
    mae: float
    max_error: float
    measure_start: int
    measure_stop: int
    extrapolation: bool
    trace_file: str = ""


@dataclass
class MaeReport:
    rows: list
    training_velocity: float

    def get(self, model: str, velocity: float) -> MaeRow:
        for r in self.rows:
            if r.model == model and r.velocity == velocity:
                return r
        raise KeyError((model, velocity))

    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.rows))

    def velocities(self) -> list[float]:
        return sorted(set(r.velocity for r in self.rows))

    def to_dict(self) -> dict:
        return {"training_velocity": self.training_velocity, "rows": [asdict(r) for r in self.rows]}

    def write(self, out_dir, stem: str, config: ExperimentConfig) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath = out / f"{stem}.json"
        write_json(jpath, self.to_dict())
        cpath = out / f"{stem}.csv"
        with open(cpath, "w", newline="") as fh:
            fh.write("experiment,model,velocity,mae,max_error,measure_start,measure_stop,extrapolation,trace_file\n")
            for r in self.rows:
                fh.write(f"{r.experiment},{r.model},{r.velocity!r},{r.mae!r},{r.max_error!r},{r.measure_start},"
                         f"{r.measure_stop},{int(r.extrapolation)},{r.trace_file}\n")
        lpath = out / f"{stem}_long.csv"
        with open(lpath, "w", newline="") as fh:
            fh.write("experiment,model,velocity,metric,value\n")
            for r in self.rows:
                for metric in ("mae", "max_error"):
                    fh.write(f"{r.experiment},{r.model},{r.velocity!r},{metric},{getattr(r, metric)!r}\n")
        for p in (jpath, cpath, lpath):
            write_manifest(p, config)
        return [jpath, cpath, lpath]


def simulate_tracking(config: ExperimentConfig, model: Optional[InverseModel], velocity: float
                      ) -> tuple[SimTrace, int, int]:
    profile, start, stop = evaluation_reference(config, velocity)
    ff = FeedforwardEvaluator(model, profile) if model is not None else None
    trace = closed_loop_simulate(profile, ff, config.motor, config.gains, config.substeps)
    return trace, start, stop


def _track_job(args):
    config, name, model, velocity, experiment = args
    trace, start, stop = simulate_tracking(config, model, velocity)
    e = trace.y_star[start:stop] - trace.y[start:stop]
    row = MaeRow(experiment, name, float(velocity), mae(trace.y_star[start:stop], trace.y[start:stop]),
                 float(np.max(np.abs(e))), start, stop, velocity > config.training_velocity)
    return row, trace


def _run_grid(config: ExperimentConfig, models: TrainedModels, roster, velocities, experiment: str,
              out_dir, save_traces: bool, jobs: int) -> tuple[MaeReport, dict]:
    jobs_list = [(config, name, models.get(name), float(v), experiment) for v in velocities for name in roster]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_track_job, jobs_list))
    else:
        results = [_track_job(j) for j in jobs_list]
    rows, traces = [], {}
    for row, trace in results:
        key = (row.model, row.velocity)
        if out_dir is not None and save_traces:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = f"{experiment}_trace_{row.model}_v{row.velocity:g}.csv"
            # only the measured window is persisted; the report indices refer to the full run
            trace.slice(row.measure_start, row.measure_stop).to_csv(out / name)
            write_manifest(out / name, config, model=row.model, velocity=row.velocity,
                           measure_start=row.measure_start, measure_stop=row.measure_stop)
            row.trace_file = name
        rows.append(row)
        traces[key] = trace
    return MaeReport(rows, config.training_velocity), traces


def _ensure_models(config: ExperimentConfig, models: Optional[TrainedModels], roster) -> TrainedModels:
    if models is not None:
        return models
    kinds = [m for m in roster if m in ("blackbox", "pgnn")]
    return train_models(config, run_collection(config), kinds)


def run_comparison(config: ExperimentConfig, models: Optional[TrainedModels] = None,
                   velocities: Optional[Iterable[float]] = None, roster: Optional[Iterable[str]] = None,
                   out_dir=None, save_traces: bool = True, jobs: int = 1) -> tuple[MaeReport, dict]:
    """Track the evaluation stroke with each feedforward in the roster.

    Defaults to the training velocity.  MAE covers the measured stroke only
    (the warm-up cycle is excluded).
    """
    roster = tuple(roster or config.evaluation.roster)
    velocities = tuple(velocities or (config.training_velocity,))
    models = _ensure_models(config, models, roster)
    report, traces = _run_grid(config, models, roster, velocities, "compare", out_dir, save_traces, jobs)
    if out_dir is not None:
        report.write(out_dir, "compare_report", config)
    return report, traces


def run_velocity_sweep(config: ExperimentConfig, models: Optional[TrainedModels] = None,
                       velocities: Optional[Iterable[float]] = None, roster: Optional[Iterable[str]] = None,
                       out_dir=None, save_traces: bool = False, jobs: int = 1) -> MaeReport:
    """MAE per velocity and model; rows above the training velocity are flagged as extrapolation."""
    roster = tuple(roster or config.evaluation.roster)
    velocities = tuple(velocities or config.evaluation.velocities)
    models = _ensure_models(config, models, roster)
    report, _ = _run_grid(config, models, roster, velocities, "sweep", out_dir, save_traces, jobs)
    if out_dir is not None:
        report.write(out_dir, "sweep_report", config)
    return report


# --- periodic-function extrapolation demo --------------------------------------

def _cos_fit(x_train: np.ndarray, u: np.ndarray, n1: int, spec, seed: int) -> Callable[[np.ndarray], np.ndarray]:
    scale = float(np.max(np.abs(x_train))) or 1.0
    cfg = TrainConfig(hidden=n1, optimizer=spec.optimizer, epochs=spec.iterations, restarts=spec.restarts,
                      seed=seed, learning_rate=1e-2)
    nn, _, _ = fit_network((x_train / scale)[:, None], u, cfg)
    return lambda x: np.asarray(nn_forward(nn, (np.asarray(x) / scale)[:, None]))


def _wrap(y):
    return np.mod(y, TWO_PI)


def run_cosine_demo(seed: int, n1_list: Optional[Iterable[int]] = None, spec=None, out_dir=None,
                    config: Optional[ExperimentConfig] = None) -> dict:
    """Learn ``u = cos(y)`` with raw-angle and wrapped-angle network inputs.

    Part one trains on one period and measures extrapolation error on
    ``[2*pi, 6*pi]``.  Part two trains on the full range for every hidden
    width in ``n1_list`` and reports the smallest width whose max error
    over the range reaches ``spec.accuracy``.
    """
    from .config import CosineSpec

    spec = spec or (config.cosine if config is not None else CosineSpec())
    n1_list = tuple(sorted(set(n1_list or spec.n1_list)))
    if not n1_list:
        raise ValueError("n1_list must be nonempty")
    spp = spec.samples_per_period
    transforms = {"mod": _wrap, "raw": lambda y: np.asarray(y, dtype=float)}

    y_tr = np.arange(spp * spec.train_periods) * (TWO_PI / spp)
    y_ex = np.linspace(TWO_PI, 3 * TWO_PI, 20 * spp + 1)
    y_in = np.linspace(0.0, TWO_PI * spec.train_periods, 10 * spp + 1)
    curves = {"y": np.linspace(0.0, 3 * TWO_PI, 30 * spp + 1)}
    curves["cos"] = np.cos(curves["y"])
    extrapolation = []
    for i, (name, T) in enumerate(transforms.items()):
        f = _cos_fit(T(y_tr), np.cos(y_tr), spec.n1, spec, derive_seed(seed, f"cosine.extrap.{name}"))
        extrapolation.append({
            "transform": name, "n1": spec.n1,
            "max_error_train_range": float(np.max(np.abs(f(T(y_in)) - np.cos(y_in)))),
            "max_error_extrapolation": float(np.max(np.abs(f(T(y_ex)) - np.cos(y_ex)))),
        })
        curves[name] = f(T(curves["y"]))

    periods = spec.full_range_periods
    y_full = np.arange(spp * periods) * (TWO_PI / spp)
    y_dense = np.linspace(0.0, TWO_PI * periods, 10 * spp * periods + 1)
    sweep = []
    for name, T in transforms.items():
        for n1 in n1_list:
            f = _cos_fit(T(y_full), np.cos(y_full), n1, spec, derive_seed(seed, f"cosine.sweep.{name}.{n1}"))
            err = f(T(y_dense)) - np.cos(y_dense)
            sweep.append({"transform": name, "n1": n1, "max_error": float(np.max(np.abs(err))),
                          "rms_error": float(np.sqrt(np.mean(err ** 2)))})

    def min_neurons(name):
        ok = [r["n1"] for r in sweep if r["transform"] == name and r["max_error"] <= spec.accuracy]
        return min(ok) if ok else None

    report = {
        "seed": seed,
        "n1": spec.n1,
        "n1_list": list(n1_list),
        "accuracy": spec.accuracy,
        "extrapolation_threshold": spec.extrapolation_threshold,
        "raw_threshold": spec.raw_threshold,
        "extrapolation": extrapolation,
        "sweep": sweep,
        "min_neurons": {"mod": min_neurons("mod"), "raw": min_neurons("raw")},
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "cosine_report.json", out / "cosine_curves.csv", out / "cosine_long.csv"]
        write_json(paths[0], report)
        write_columns_csv(paths[1], ["y", "cos", "mod", "raw"], [curves[k] for k in ("y", "cos", "mod", "raw")])
        with open(paths[2], "w", newline="") as fh:
            fh.write("experiment,model,n1,metric,value\n")
            for r in extrapolation:
                for m in ("max_error_train_range", "max_error_extrapolation"):
                    fh.write(f"cosine_extrapolation,{r['transform']},{r['n1']},{m},{r[m]!r}\n")
            for r in sweep:
                for m in ("max_error", "rms_error"):
                    fh.write(f"cosine_sweep,{r['transform']},{r['n1']},{m},{r[m]!r}\n")
        if config is not None:
            for p in paths:
                write_manifest(p, config)
    return report
