"""Regressor windows and the central-difference (delta) operators."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TraceTooShort

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RegressorSpec:
    """Orders of the inverse model.

    The output part of the window runs newest first from ``y(k+n_k+1)`` down
    to ``y(k+n_k-n_a+1)``; the input part holds ``u(k-1) ... u(k-n_b+1)``
    (empty for ``n_b <= 1``).
    """

    n_a: int = 4
    n_b: int = 0
    n_k: int = 1
    sample_time: float = 1e-4

    def __post_init__(self):
        for name in ("n_a", "n_b", "n_k"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigError(f"regressor.{name} must be a nonnegative integer")
        if not self.sample_time > 0:
            raise ConfigError("regressor.sample_time must be > 0")

    @property
    def y_offsets(self) -> list[int]:
        return list(range(self.n_k + 1, self.n_k - self.n_a, -1))

    @property
    def u_offsets(self) -> list[int]:
        return list(range(-1, -self.n_b, -1))

    @property
    def length(self) -> int:
        return self.n_a + 1 + max(self.n_b - 1, 0)

    def center_index(self) -> int:
        """Column of ``y(k)`` in the window; requires ``y(k-2) ... y(k+2)`` inside it."""
        return _center_index(self.n_a, self.n_k)


@functools.lru_cache(maxsize=None)
def _center_index(n_a: int, n_k: int) -> int:
    offs = list(range(n_k + 1, n_k - n_a, -1))
    if not {2, 1, 0, -1, -2} <= set(offs):
        raise ConfigError(
            f"regressor window {offs} does not cover y(k-2)..y(k+2) needed by the delta operators")
    return offs.index(0)


def _stencil(phi: np.ndarray, center: int):
    phi = np.asarray(phi, dtype=float)
    c = center
    return phi[..., c - 2], phi[..., c - 1], phi[..., c], phi[..., c + 1], phi[..., c + 2]


def delta(window, sample_time: float, center: int = 2) -> np.ndarray:
    """``(y(k+1) - y(k-1)) / (2 T_s)`` for windows ordered newest first."""
    _, yp1, _, ym1, _ = _stencil(window, center)
    return (yp1 - ym1) / (2.0 * sample_time)


def delta2(window, sample_time: float, center: int = 2) -> np.ndarray:
    """Delta operator applied twice: ``(y(k+2) - 2 y(k) + y(k-2)) / (4 T_s^2)``."""
    yp2, _, y0, _, ym2 = _stencil(window, center)
    return (yp2 - 2.0 * y0 + ym2) / (4.0 * sample_time ** 2)


def input_transform(phi, spec: RegressorSpec = RegressorSpec()) -> np.ndarray:
    """Map windows to ``[delta^2 y(k), delta y(k), y(k) mod 2*pi]``.

    The modulo is floored, so the last column lies in ``[0, 2*pi)`` for
    negative angles too.
    """
    c = spec.center_index()
    phi = np.asarray(phi, dtype=float)
    ts = spec.sample_time
    wrapped = np.mod(phi[..., c], TWO_PI)
    # np.mod can round up to exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return np.stack([delta2(phi, ts, c), delta(phi, ts, c), wrapped], axis=-1)


def rotation_mask(spec: RegressorSpec) -> np.ndarray:
    """Ones on the position entries of a window, zeros on past inputs."""
    return np.concatenate([np.ones(spec.n_a + 1), np.zeros(max(spec.n_b - 1, 0))])


@dataclass
class RegressorSet:
    """Stacked regressors ``phi`` (one row per sample), targets ``u`` and their sample indices ``k``."""

    phi: np.ndarray
    u: np.ndarray
    k: np.ndarray

    def __len__(self):
        return len(self.u)

    def __iter__(self):
        return iter(zip(self.phi, self.u))

    def subsample(self, stride: int) -> "RegressorSet":
        if stride <= 1:
            return self
        return RegressorSet(self.phi[::stride], self.u[::stride], self.k[::stride])


def build_regressors(y, u, spec: RegressorSpec = RegressorSpec()) -> RegressorSet:
    """One ``(phi(k), u(k))`` pair for every ``k`` with a complete window."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    n = len(y)
    if len(u) != n:
        raise ValueError("y and u must have equal length")
    if n <= spec.n_a + spec.n_k + 2:
        raise TraceTooShort(f"trace of {n} samples is too short for regressor {spec}")
    k_lo = max(-(spec.n_k - spec.n_a + 1), spec.n_b - 1, 0)
    k_hi = n - 1 - (spec.n_k + 1)
    if k_hi < k_lo:
        raise TraceTooShort(f"trace of {n} samples yields no complete regressor")
    ks = np.arange(k_lo, k_hi + 1)
    cols = [y[ks + m] for m in spec.y_offsets] + [u[ks + m] for m in spec.u_offsets]
    return RegressorSet(np.column_stack(cols), u[ks].copy(), ks)


def regressors_from_trace(trace, spec: RegressorSpec = RegressorSpec()) -> RegressorSet:
    return build_regressors(trace.y, trace.u, spec)
