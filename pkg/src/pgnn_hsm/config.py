"""Experiment configuration: TOML file <-> frozen dataclasses.

The file schema is documented in ``docs/config.md``.  Every table maps onto
one dataclass; unknown keys and ill-typed values raise ``ConfigError``
naming the offending dotted key.  All randomness derives from the single
top-level ``seed``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

try:
    import tomllib as tomli
except ImportError:  # Python < 3.11
    import tomli

from .errors import ConfigError
from .inverse_model import RegressorSpec, TrainConfig
from .motor_sim import ControllerGains, MotorParams, ParasiticParams
from .trajectory import MotionLimits

CONFIG_VERSION = 1
ROSTER = ("none", "physical", "blackbox", "pgnn")


@dataclass(frozen=True)
class CollectionSpec:
    """Back-and-forth data-generation experiment."""

    rotations: float = 3.0
    v_max: float = 15.0
    a_max: float = 80.0
    j_max: float = 1000.0
    dwell: float = 0.2
    duration: float = 20.0
    feedforward: str = "none"

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("collection.duration must be > 0")
        if not self.rotations > 0:
            raise ConfigError("collection.rotations must be > 0")
        if self.dwell < 0:
            raise ConfigError("collection.dwell must be >= 0")
        if self.feedforward not in ("none", "physical"):
            raise ConfigError("collection.feedforward must be 'none' or 'physical'")
        self.limits()

    def limits(self) -> MotionLimits:
        return MotionLimits(self.v_max, self.a_max, self.j_max)


@dataclass(frozen=True)
class EvaluationSpec:
    """Tracking experiments: a warm-up back-and-forth cycle, then one measured forward stroke."""

    velocities: tuple[float, ...] = (2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)
    roster: tuple[str, ...] = ROSTER
    rotations: float = 3.0
    a_max: float = 80.0
    j_max: float = 1000.0
    dwell: float = 0.2

    def __post_init__(self):
        v = tuple(float(x) for x in self.velocities)
        if not v or any(not x > 0 for x in v) or list(v) != sorted(v) or len(set(v)) != len(v):
            raise ConfigError("evaluation.velocities must be nonempty, strictly positive and sorted")
        object.__setattr__(self, "velocities", v)
        r = tuple(self.roster)
        bad = [m for m in r if m not in ROSTER]
        if bad or not r or len(set(r)) != len(r):
            raise ConfigError(f"evaluation.roster entries must be distinct members of {ROSTER}, got {list(r)}")
        object.__setattr__(self, "roster", r)
        if not self.rotations > 0 or self.dwell < 0:
            raise ConfigError("evaluation.rotations must be > 0 and evaluation.dwell >= 0")
        MotionLimits(1.0, self.a_max, self.j_max)


@dataclass(frozen=True)
class CosineSpec:
    """Periodic-function extrapolation demo settings (thresholds are ours)."""

    n1: int = 2
    n1_list: tuple[int, ...] = (1, 2, 3, 4, 6, 8, 12, 16)
    samples_per_period: int = 100
    train_periods: int = 1
    full_range_periods: int = 3
    optimizer: str = "lbfgs"
    iterations: int = 20000
    restarts: int = 3
    extrapolation_threshold: float = 0.05
    raw_threshold: float = 0.5
    accuracy: float = 1e-2

    def __post_init__(self):
        lst = tuple(int(n) for n in self.n1_list)
        if not lst or any(n < 1 for n in lst):
            raise ConfigError("cosine.n1_list must be a nonempty list of positive integers")
        object.__setattr__(self, "n1_list", tuple(sorted(set(lst))))
        if self.n1 < 1 or self.samples_per_period < 4 or self.iterations < 1 or self.restarts < 1:
            raise ConfigError("cosine.n1, samples_per_period, iterations and restarts must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    motor: MotorParams = field(default_factory=MotorParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    substeps: int = 10
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    collection: CollectionSpec = field(default_factory=CollectionSpec)
    evaluation: EvaluationSpec = field(default_factory=EvaluationSpec)
    pgnn_train: TrainConfig = field(default_factory=TrainConfig)
    blackbox_train: TrainConfig = field(default_factory=TrainConfig)
    cosine: CosineSpec = field(default_factory=CosineSpec)
    seed: int = 0
    output_dir: Optional[str] = None

    def __post_init__(self):
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigError("simulation.substeps must be an integer >= 1")
        # the inverse models always run at the controller rate
        if self.regressor.sample_time != self.gains.sample_time:
            object.__setattr__(self, "regressor",
                               dataclasses.replace(self.regressor, sample_time=self.gains.sample_time))

    @property
    def training_velocity(self) -> float:
        return self.collection.v_max

    def train_config(self, kind: str) -> TrainConfig:
        """Training settings with the seed derived from the top-level seed."""
        base = self.pgnn_train if kind == "pgnn" else self.blackbox_train
        return dataclasses.replace(base, seed=derive_seed(self.seed, f"train.{kind}"))

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def derive_seed(seed: int, label: str) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode())])
    return int(ss.generate_state(1)[0])


# --- dict/TOML conversion ----------------------------------------------------

def _coerce(value: Any, default: Any, key: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite")
        return value
    if isinstance(default, str) or default is None:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    raise ConfigError(f"{key}: unsupported value {value!r}")


def _build(cls, table: dict, prefix: str, skip: tuple[str, ...] = ()):
    if not isinstance(table, dict):
        raise ConfigError(f"[{prefix}] must be a table")
    names = {f.name for f in fields(cls)} - set(skip)
    for k in table:
        if k not in names:
            raise ConfigError(f"unknown key '{prefix}.{k}'")
    defaults = cls()
    kwargs = {}
    for k, v in table.items():
        kwargs[k] = _coerce(v, getattr(defaults, k), f"{prefix}.{k}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{prefix}]: {exc}") from exc


_TOP_KEYS = {"version", "seed", "output_dir", "motor", "gains", "simulation", "regressor", "collection",
             "evaluation", "train", "cosine"}


def config_from_dict(doc: dict) -> ExperimentConfig:
    for k in doc:
        if k not in _TOP_KEYS:
            raise ConfigError(f"unknown key '{k}'")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")

    motor_tab = dict(doc.get("motor", {}))
    par_tab = motor_tab.pop("parasitic", {})
    if "ripple" in par_tab:
        ripple = par_tab["ripple"]
        if not isinstance(ripple, list) or any(not isinstance(r, list) or len(r) != 3 for r in ripple):
            raise ConfigError("motor.parasitic.ripple must be a list of [harmonic, amplitude, phase] triples")
        if any(isinstance(r[0], bool) or not isinstance(r[0], int) for r in ripple):
            raise ConfigError("motor.parasitic.ripple harmonic must be an integer")
    parasitic = _build(ParasiticParams, par_tab, "motor.parasitic")
    motor = _build(MotorParams, motor_tab, "motor", skip=("parasitic",))
    motor = dataclasses.replace(motor, parasitic=parasitic)

    sim = doc.get("simulation", {})
    for k in sim:
        if k != "substeps":
            raise ConfigError(f"unknown key 'simulation.{k}'")

    train = doc.get("train", {})
    for k in train:
        if k not in ("pgnn", "blackbox"):
            raise ConfigError(f"unknown key 'train.{k}'")

    seed = _coerce(doc.get("seed", 0), 0, "seed")
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    return ExperimentConfig(
        motor=motor,
        gains=_build(ControllerGains, doc.get("gains", {}), "gains"),
        substeps=_coerce(sim.get("substeps", 10), 10, "simulation.substeps"),
        regressor=_build(RegressorSpec, doc.get("regressor", {}), "regressor", skip=("sample_time",)),
        collection=_build(CollectionSpec, doc.get("collection", {}), "collection"),
        evaluation=_build(EvaluationSpec, doc.get("evaluation", {}), "evaluation"),
        pgnn_train=_build(TrainConfig, train.get("pgnn", {}), "train.pgnn", skip=("seed",)),
        blackbox_train=_build(TrainConfig, train.get("blackbox", {}), "train.blackbox", skip=("seed",)),
        cosine=_build(CosineSpec, doc.get("cosine", {}), "cosine"),
        seed=seed,
        output_dir=out,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical, JSON-serializable form (also what the config hash covers)."""

    def plain(obj):
        d = dataclasses.asdict(obj)
        return json.loads(json.dumps(d))

    motor = plain(cfg.motor)
    motor["parasitic"]["ripple"] = [list(r) for r in cfg.motor.parasitic.ripple]
    pg = plain(cfg.pgnn_train)
    bb = plain(cfg.blackbox_train)
    pg.pop("seed")
    bb.pop("seed")
    doc = {
        "version": CONFIG_VERSION,
        "seed": cfg.seed,
        "motor": motor,
        "gains": plain(cfg.gains),
        "simulation": {"substeps": cfg.substeps},
        "regressor": {k: v for k, v in plain(cfg.regressor).items() if k != "sample_time"},
        "collection": plain(cfg.collection),
        "evaluation": plain(cfg.evaluation),
        "train": {"pgnn": pg, "blackbox": bb},
        "cosine": plain(cfg.cosine),
    }
    if cfg.output_dir is not None:
        doc["output_dir"] = cfg.output_dir
    return doc


def config_hash(cfg: ExperimentConfig) -> str:
    doc = config_to_dict(cfg)
    doc.pop("output_dir", None)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)


def bundled_config_path(name: str = "default") -> Path:
    return Path(str(resources.files("pgnn_hsm") / "configs" / f"{name}.toml"))


def default_config() -> ExperimentConfig:
    return load_config(bundled_config_path("default"))
