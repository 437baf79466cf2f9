"""Inverse-dynamics model classes and their JSON serialization.

Three variants share the ``InverseModel`` interface: a linear physical
model on the delta features, a black-box network on the raw window, and
the physics-guided sum of both.  ``predict`` accepts one window or a batch
of windows (rows).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Optional

import numpy as np

from .nn import NNParams, nn_forward
from .regressors import TWO_PI, RegressorSpec, delta, delta2, input_transform

FORMAT_VERSION = 1
TRANSFORMS = ("identity", "physics_guided")


class InverseModel:
    kind: ClassVar[str] = ""
    regressor: RegressorSpec

    def predict(self, phi):
        raise NotImplementedError

    def predict_window(self, window) -> float:
        """Scalar prediction for one window given as a sequence of floats."""
        return float(self.predict(np.asarray(window, dtype=float)))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def save(self, path) -> None:
        save_model(self, path)


@dataclass
class PhysicalModel(InverseModel):
    """``u = theta_inertia * delta^2 y + theta_viscous * delta y``."""

    kind: ClassVar[str] = "physical"
    theta_inertia: float
    theta_viscous: float
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    residual_rms: float = float("nan")

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta_inertia, self.theta_viscous])

    def features(self, phi) -> np.ndarray:
        c = self.regressor.center_index()
        ts = self.regressor.sample_time
        return np.stack([delta2(phi, ts, c), delta(phi, ts, c)], axis=-1)

    def predict(self, phi):
        out = self.features(phi) @ self.theta
        return float(out) if np.ndim(out) == 0 else out

    def predict_window(self, w) -> float:
        c = self.regressor.center_index()
        ts = self.regressor.sample_time
        d2 = (w[c - 2] - 2.0 * w[c] + w[c + 2]) / (4.0 * ts * ts)
        d1 = (w[c - 1] - w[c + 1]) / (2.0 * ts)
        return self.theta_inertia * d2 + self.theta_viscous * d1

    def to_dict(self) -> dict:
        return {"theta_inertia": self.theta_inertia, "theta_viscous": self.theta_viscous,
                "residual_rms": self.residual_rms}


def _nn_input(phi, transform: str, spec: RegressorSpec, in_scale: np.ndarray) -> np.ndarray:
    x = input_transform(phi, spec) if transform == "physics_guided" else np.asarray(phi, dtype=float)
    return x / in_scale


@dataclass
class BlackBoxModel(InverseModel):
    """Network acting directly on the raw (scaled) regressor window."""

    kind: ClassVar[str] = "blackbox"
    nn: NNParams
    in_scale: np.ndarray
    out_scale: float = 1.0
    regressor: RegressorSpec = field(default_factory=RegressorSpec)

    def predict(self, phi):
        x = _nn_input(phi, "identity", self.regressor, self.in_scale)
        out = self.out_scale * np.asarray(nn_forward(self.nn, x))
        return float(out) if np.ndim(out) == 0 else out

    def predict_window(self, w) -> float:
        h = np.tanh(self.nn.W1 @ (np.asarray(w, dtype=float) / self.in_scale) + self.nn.B1)
        return self.out_scale * float(self.nn.W2[0] @ h + self.nn.B2[0])

    def to_dict(self) -> dict:
        return {"transform": "identity", "nn": self.nn.to_dict(),
                "in_scale": np.asarray(self.in_scale).tolist(), "out_scale": self.out_scale}


@dataclass
class PgnnModel(InverseModel):
    """Physical model plus a network on the transformed window.

    ``in_scale`` divides the transformed features and ``out_scale``
    multiplies the network output; both are fixed at training time.
    """

    kind: ClassVar[str] = "pgnn"
    physical: PhysicalModel
    nn: NNParams
    in_scale: np.ndarray
    out_scale: float = 1.0
    transform: str = "physics_guided"
    regressor: RegressorSpec = field(default_factory=RegressorSpec)

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        n0 = 3 if self.transform == "physics_guided" else self.regressor.length
        if self.nn.n_inputs != n0:
            raise ValueError(f"network expects {self.nn.n_inputs} inputs, transform yields {n0}")

    def nn_part(self, phi):
        x = _nn_input(phi, self.transform, self.regressor, self.in_scale)
        return self.out_scale * np.asarray(nn_forward(self.nn, x))

    def predict(self, phi):
        out = np.asarray(self.physical.predict(phi)) + self.nn_part(phi)
        return float(out) if np.ndim(out) == 0 else out

    def predict_window(self, w) -> float:
        if self.transform == "physics_guided":
            c = self.regressor.center_index()
            ts = self.regressor.sample_time
            wrapped = w[c] % TWO_PI
            x = np.array([(w[c - 2] - 2.0 * w[c] + w[c + 2]) / (4.0 * ts * ts),
                          (w[c - 1] - w[c + 1]) / (2.0 * ts),
                          0.0 if wrapped >= TWO_PI else wrapped])
        else:
            x = np.asarray(w, dtype=float)
        h = np.tanh(self.nn.W1 @ (x / self.in_scale) + self.nn.B1)
        return self.physical.predict_window(w) + self.out_scale * float(self.nn.W2[0] @ h + self.nn.B2[0])

    def to_dict(self) -> dict:
        return {"physical": self.physical.to_dict(), "transform": self.transform, "nn": self.nn.to_dict(),
                "in_scale": np.asarray(self.in_scale).tolist(), "out_scale": self.out_scale}


def model_to_json(model: InverseModel) -> str:
    spec = model.regressor
    doc = {
        "format": "pgnn_hsm.inverse_model",
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "regressor": {"n_a": spec.n_a, "n_b": spec.n_b, "n_k": spec.n_k, "sample_time": spec.sample_time},
        "model": model.to_dict(),
    }
    # json emits repr(float), which round-trips binary64 exactly
    return json.dumps(doc, indent=1, allow_nan=True)


def model_from_json(text: str) -> InverseModel:
    doc = json.loads(text)
    if doc.get("format") != "pgnn_hsm.inverse_model":
        raise ValueError("not an inverse model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    spec = RegressorSpec(**doc["regressor"])
    m = doc["model"]
    kind = doc["kind"]

    def physical(d):
        return PhysicalModel(float(d["theta_inertia"]), float(d["theta_viscous"]), spec,
                             float(d.get("residual_rms", float("nan"))))

    if kind == "physical":
        return physical(m)
    nn = NNParams.from_dict(m["nn"])
    in_scale = np.array(m["in_scale"], dtype=float)
    if kind == "blackbox":
        return BlackBoxModel(nn, in_scale, float(m["out_scale"]), spec)
    if kind == "pgnn":
        return PgnnModel(physical(m["physical"]), nn, in_scale, float(m["out_scale"]), m["transform"], spec)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: InverseModel, path) -> None:
    Path(path).write_text(model_to_json(model) + "\n")


def load_model(path) -> InverseModel:
    return model_from_json(Path(path).read_text())
