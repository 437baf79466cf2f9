"""Hybrid stepper motor plant under discrete-time field-oriented control.

The continuous plant (rotor mechanics plus two coil circuits) is integrated
with fixed-step RK4 between controller samples.  The controller side runs at
``sample_time``: a position feedback law, optional feedforward, a dq current
loop and the inverse dq rotation back to coil voltages, held by a ZOH.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError, NonFiniteState

if TYPE_CHECKING:
    from .feedforward import FeedforwardEvaluator
    from .trajectory import ReferenceProfile


TRACE_COLUMNS = ("t", "y_star", "y", "u", "u_ff", "u_fb", "i_d", "i_q", "i_a", "i_b", "v_d", "v_q")


@dataclass(frozen=True)
class ParasiticParams:
    """Position- and velocity-dependent disturbance torques.

    ``ripple`` holds ``(harmonic, amplitude, phase)`` triples; ``harmonic`` is
    the number of cycles per mechanical revolution, so every term is
    2*pi periodic in the rotor angle.
    """

    coulomb_level: float = 0.0
    coulomb_smoothing: float = 0.05
    ripple: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if not self.coulomb_level >= 0:
            raise ConfigError("motor.parasitic.coulomb_level must be >= 0")
        if not self.coulomb_smoothing > 0:
            raise ConfigError("motor.parasitic.coulomb_smoothing must be > 0")
        ripple = tuple((int(h), float(a), float(p)) for h, a, p in self.ripple)
        for h, a, p in ripple:
            if h < 1:
                raise ConfigError("motor.parasitic.ripple harmonic must be a positive integer")
            if not a >= 0:
                raise ConfigError("motor.parasitic.ripple amplitude must be >= 0")
            if not math.isfinite(p):
                raise ConfigError("motor.parasitic.ripple phase must be finite")
        object.__setattr__(self, "ripple", ripple)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.ripple:
            empty = np.zeros(0)
            return empty, empty, empty
        h, a, p = zip(*self.ripple)
        return np.array(h, dtype=float), np.array(a, dtype=float), np.array(p, dtype=float)


@dataclass(frozen=True)
class MotorParams:
    """Physical constants of the HSM (SI units)."""

    inertia: float = 5.7e-5
    viscous_friction: float = 1.0e-4
    motor_constant: float = 0.1
    rotor_teeth: int = 50
    inductance: float = 1.5e-3
    resistance: float = 0.55
    parasitic: ParasiticParams = field(default_factory=ParasiticParams)

    def __post_init__(self):
        for name in ("inertia", "viscous_friction", "motor_constant", "inductance", "resistance"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"motor.{name} must be a finite number > 0, got {value!r}")
        if isinstance(self.rotor_teeth, bool) or int(self.rotor_teeth) != self.rotor_teeth or self.rotor_teeth < 1:
            raise ConfigError(f"motor.rotor_teeth must be an integer >= 1, got {self.rotor_teeth!r}")
        object.__setattr__(self, "rotor_teeth", int(self.rotor_teeth))


@dataclass(frozen=True)
class ControllerGains:
    """Discrete controller gains.

    The current loop is ``C_i = kp + ki/s`` discretized with a backward-Euler
    integrator.  Position feedback is ``kp*e + kd*(e(k) - e(k-1))/T_s``.
    """

    current_kp: float = 6.6
    current_ki: float = 0.0
    position_kp: float = 5.0
    position_kd: float = 0.0
    sample_time: float = 1e-4

    def __post_init__(self):
        for name in ("current_kp", "current_ki", "position_kp", "position_kd"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"gains.{name} must be finite")
        if not self.sample_time > 0:
            raise ConfigError("gains.sample_time must be > 0")


@dataclass(frozen=True)
class MotorState:
    y: float = 0.0
    omega: float = 0.0
    i_a: float = 0.0
    i_b: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.y, self.omega, self.i_a, self.i_b], dtype=float)

    @classmethod
    def from_array(cls, a) -> "MotorState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass
class SimTrace:
    """Per-sample closed-loop record; every array has the same length."""

    t: np.ndarray
    y_star: np.ndarray
    y: np.ndarray
    u: np.ndarray
    u_ff: np.ndarray
    u_fb: np.ndarray
    i_d: np.ndarray
    i_q: np.ndarray
    i_a: np.ndarray
    i_b: np.ndarray
    v_d: np.ndarray
    v_q: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in TRACE_COLUMNS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"trace column {name!r} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)

    def __len__(self):
        return len(self.t)

    @property
    def sample_time(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else float("nan")

    def slice(self, start: int, stop: Optional[int] = None) -> "SimTrace":
        return SimTrace(**{c: getattr(self, c)[start:stop] for c in TRACE_COLUMNS})

    def to_csv(self, path) -> None:
        write_columns_csv(path, TRACE_COLUMNS, [getattr(self, c) for c in TRACE_COLUMNS])

    @classmethod
    def from_csv(cls, path) -> "SimTrace":
        header, data = read_columns_csv(path)
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing trace columns {missing}")
        return cls(**{c: data[:, header.index(c)] for c in TRACE_COLUMNS})


def write_columns_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write float columns with 17 significant digits (lossless for binary64)."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.zeros((0, 0))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",", newline="\n")


def read_columns_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return header, data


# --- transforms --------------------------------------------------------------

def dq_transform(y: float, i_a: float, i_b: float, N: int) -> tuple[float, float]:
    c, s = math.cos(N * y), math.sin(N * y)
    return c * i_a + s * i_b, -s * i_a + c * i_b


def inverse_dq_transform(y: float, v_d: float, v_q: float, N: int) -> tuple[float, float]:
    c, s = math.cos(N * y), math.sin(N * y)
    return c * v_d - s * v_q, s * v_d + c * v_q


def dq_matrix(y: float, N: int) -> np.ndarray:
    c, s = math.cos(N * y), math.sin(N * y)
    return np.array([[c, s], [-s, c]])


def driving_torque(y: float, i_a: float, i_b: float, k_m: float, N: int) -> float:
    return k_m * (-i_a * math.sin(N * y) + i_b * math.cos(N * y))


def parasitic_torque(y: float, omega: float, p: ParasiticParams) -> float:
    tau = -p.coulomb_level * math.tanh(omega / p.coulomb_smoothing)
    for h, a, ph in p.ripple:
        tau += a * math.sin(h * y + ph)
    return tau


# --- plant kernel ------------------------------------------------------------

@njit(cache=True)
def _deriv(y, w, ia, ib, va, vb, J, fv, km, N, L, R, coul, smooth, rh, ra, rp):
    s = math.sin(N * y)
    c = math.cos(N * y)
    torque = km * (-ia * s + ib * c)
    tau_p = -coul * math.tanh(w / smooth)
    for m in range(rh.shape[0]):
        tau_p += ra[m] * math.sin(rh[m] * y + rp[m])
    dw = (torque + tau_p - fv * w) / J
    dia = (va - R * ia + km * w * s) / L
    dib = (vb - R * ib - km * w * c) / L
    return w, dw, dia, dib


@njit(cache=True)
def _rk4_advance(x, va, vb, dt, nsteps, J, fv, km, N, L, R, coul, smooth, rh, ra, rp):
    y, w, ia, ib = x[0], x[1], x[2], x[3]
    for _ in range(nsteps):
        k1 = _deriv(y, w, ia, ib, va, vb, J, fv, km, N, L, R, coul, smooth, rh, ra, rp)
        h2 = 0.5 * dt
        k2 = _deriv(y + h2 * k1[0], w + h2 * k1[1], ia + h2 * k1[2], ib + h2 * k1[3],
                    va, vb, J, fv, km, N, L, R, coul, smooth, rh, ra, rp)
        k3 = _deriv(y + h2 * k2[0], w + h2 * k2[1], ia + h2 * k2[2], ib + h2 * k2[3],
                    va, vb, J, fv, km, N, L, R, coul, smooth, rh, ra, rp)
        k4 = _deriv(y + dt * k3[0], w + dt * k3[1], ia + dt * k3[2], ib + dt * k3[3],
                    va, vb, J, fv, km, N, L, R, coul, smooth, rh, ra, rp)
        y += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        w += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        ia += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        ib += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    x[0], x[1], x[2], x[3] = y, w, ia, ib


class _Plant:
    """Flattened parameter tuple for the jitted kernel."""

    def __init__(self, params: MotorParams):
        p = params.parasitic
        rh, ra, rp = p.arrays()
        self.args = (
            float(params.inertia), float(params.viscous_friction), float(params.motor_constant),
            float(params.rotor_teeth), float(params.inductance), float(params.resistance),
            float(p.coulomb_level), float(p.coulomb_smoothing), rh, ra, rp,
        )

    def advance(self, x: np.ndarray, v_a: float, v_b: float, dt: float, nsteps: int) -> None:
        _rk4_advance(x, v_a, v_b, dt, nsteps, *self.args)


def hsm_derivative(s: MotorState, v_a: float, v_b: float, params: MotorParams) -> MotorState:
    """Time derivative of the plant state for held coil voltages."""
    d = _deriv(s.y, s.omega, s.i_a, s.i_b, float(v_a), float(v_b), *_Plant(params).args)
    return MotorState(*d)


def rk4_step(s: MotorState, v_a: float, v_b: float, dt: float, params: MotorParams) -> MotorState:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    x = s.as_array()
    _Plant(params).advance(x, float(v_a), float(v_b), float(dt), 1)
    return MotorState.from_array(x)


# --- control -----------------------------------------------------------------

@dataclass(frozen=True)
class CurrentControlState:
    integral_d: float = 0.0
    integral_q: float = 0.0


def current_control_step(i_d: float, i_q: float, i_q_star: float,
                         ctrl_state: CurrentControlState, gains: ControllerGains):
    """One sample of the dq current PI loop; returns ``(v_d, v_q, new_state)``."""
    e_d = -i_d
    e_q = i_q_star - i_q
    if gains.current_ki != 0.0:
        ts = gains.sample_time
        ctrl_state = CurrentControlState(ctrl_state.integral_d + ts * e_d,
                                         ctrl_state.integral_q + ts * e_q)
    v_d = gains.current_kp * e_d + gains.current_ki * ctrl_state.integral_d
    v_q = gains.current_kp * e_q + gains.current_ki * ctrl_state.integral_q
    return v_d, v_q, ctrl_state


def closed_loop_simulate(profile: "ReferenceProfile",
                         ff: Optional["FeedforwardEvaluator"],
                         params: MotorParams,
                         gains: ControllerGains,
                         substeps: int = 10,
                         initial_state: Optional[MotorState] = None) -> SimTrace:
    """Run the cascaded FOC loop over every sample of ``profile``.

    The plant starts at rest on the first reference sample unless
    ``initial_state`` is given.  Feedforward is queried online, one sample at
    a time, so it can only see what the evaluator is allowed to read.
    """
    if int(substeps) != substeps or substeps < 1:
        raise ValueError("substeps must be an integer >= 1")
    ts = gains.sample_time
    if abs(profile.sample_time - ts) > 1e-12 * ts:
        raise ValueError(f"profile sample time {profile.sample_time} != controller sample time {ts}")
    n = len(profile)
    N = params.rotor_teeth
    k_m = params.motor_constant
    kp, kd = gains.position_kp, gains.position_kd
    ci_kp, ci_ki = gains.current_kp, gains.current_ki
    use_int = ci_ki != 0.0
    dt = ts / substeps
    plant = _Plant(params)

    x = (initial_state or MotorState(y=float(profile.y[0]))).as_array()
    if ff is not None:
        ff.reset()

    out = np.empty((n, 12))
    ref = profile.y
    e_prev = ref[0] - x[0]
    int_d = int_q = 0.0
    cos, sin = math.cos, math.sin
    for k in range(n):
        y, ia, ib = x[0], x[2], x[3]
        e = ref[k] - y
        u_fb = kp * e + kd * (e - e_prev) / ts
        e_prev = e
        u_ff = ff.step(k) if ff is not None else 0.0
        u = u_fb + u_ff

        c, s = cos(N * y), sin(N * y)
        i_d = c * ia + s * ib
        i_q = -s * ia + c * ib
        e_d = -i_d
        e_q = u / k_m - i_q
        if use_int:
            int_d += ts * e_d
            int_q += ts * e_q
        v_d = ci_kp * e_d + ci_ki * int_d
        v_q = ci_kp * e_q + ci_ki * int_q
        v_a = c * v_d - s * v_q
        v_b = s * v_d + c * v_q

        out[k] = (k * ts, ref[k], y, u, u_ff, u_fb, i_d, i_q, ia, ib, v_d, v_q)
        plant.advance(x, v_a, v_b, dt, substeps)
        if not (math.isfinite(x[0]) and math.isfinite(x[1]) and math.isfinite(x[2]) and math.isfinite(x[3])):
            raise NonFiniteState(
                f"plant state became non-finite at sample {k} (t={k * ts:.6g} s); "
                "check gains and substeps")
    return SimTrace(*out.T.copy())
