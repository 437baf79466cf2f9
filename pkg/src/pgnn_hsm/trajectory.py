"""Jerk-limited (third-order) position references sampled at a fixed rate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidLimits


@dataclass(frozen=True)
class MotionLimits:
    v_max: float = 15.0
    a_max: float = 80.0
    j_max: float = 1000.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "j_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidLimits(f"{name} must be finite and > 0, got {v!r}")


class ReferenceProfile:
    """Dense sampled reference with held boundaries.

    ``at(k)`` returns ``y[k]`` for in-range indices, the first sample for
    ``k < 0`` and the final (held) sample past the end.  Past-the-end reads
    further than ``max_lookahead`` samples are a contract violation.
    Setting ``audit`` to a list makes every read append its index, which is
    how the causality of feedforward evaluators is checked.
    """

    def __init__(self, y, sample_time: float, max_lookahead: int = 8):
        self.y = np.asarray(y, dtype=float)
        if self.y.ndim != 1 or self.y.size == 0:
            raise ValueError("profile needs at least one sample")
        if not sample_time > 0:
            raise ValueError("sample_time must be > 0")
        self.sample_time = float(sample_time)
        self.max_lookahead = int(max_lookahead)
        self.audit: Optional[list] = None

    def __len__(self):
        return self.y.size

    @property
    def duration(self) -> float:
        return (self.y.size - 1) * self.sample_time

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.y.size) * self.sample_time

    def at(self, k: int) -> float:
        if self.audit is not None:
            self.audit.append(k)
        n = self.y.size
        if k < 0:
            return float(self.y[0])
        if k >= n:
            if k > n - 1 + self.max_lookahead:
                raise IndexError(f"reference index {k} beyond lookahead horizon")
            return float(self.y[-1])
        return float(self.y[k])

    def window(self, k: int, hi: int, lo: int) -> np.ndarray:
        """``[y*(k+hi), y*(k+hi-1), ..., y*(k+lo)]`` (newest first)."""
        return np.array([self.at(k + m) for m in range(hi, lo - 1, -1)])

    def shifted(self, offset: float) -> "ReferenceProfile":
        return ReferenceProfile(self.y + offset, self.sample_time, self.max_lookahead)

    def velocity(self) -> np.ndarray:
        """Central-difference velocity, one value per sample (held ends)."""
        yp = np.concatenate(([self.y[0]], self.y, [self.y[-1]]))
        return (yp[2:] - yp[:-2]) / (2 * self.sample_time)

    def acceleration(self) -> np.ndarray:
        """Second difference matching the wide stencil used by the inverse models."""
        yp = np.concatenate(([self.y[0]] * 2, self.y, [self.y[-1]] * 2))
        return (yp[4:] - 2 * yp[2:-2] + yp[:-4]) / (4 * self.sample_time ** 2)

    @staticmethod
    def concat(parts: list["ReferenceProfile"]) -> "ReferenceProfile":
        ts = parts[0].sample_time
        return ReferenceProfile(np.concatenate([p.y for p in parts]), ts, parts[0].max_lookahead)


def _segment_times(distance: float, lim: MotionLimits) -> tuple[float, float, float]:
    """Jerk time, acceleration-phase time and cruise time of a rest-to-rest move."""
    v, a, j = lim.v_max, lim.a_max, lim.j_max
    if v * j >= a * a:
        tj = a / j
        ta = tj + v / a
    else:
        tj = math.sqrt(v / j)
        ta = 2 * tj
    # distance covered while accelerating to peak and back down
    v_peak = j * tj * (ta - tj)
    tv = distance / v_peak - ta
    if tv >= 0:
        return tj, ta, tv
    # peak velocity not reached
    tj = a / j
    ta = 0.5 * (tj + math.sqrt(tj * tj + 4 * distance / a))
    if ta < 2 * tj:
        tj = (distance / (2 * j)) ** (1.0 / 3.0)
        ta = 2 * tj
    return tj, ta, 0.0


def _jerk_schedule(distance: float, lim: MotionLimits):
    tj, ta, tv = _segment_times(distance, lim)
    j = lim.j_max
    tc = ta - 2 * tj
    durations = [tj, tc, tj, tv, tj, tc, tj]
    jerks = [j, 0.0, -j, 0.0, -j, 0.0, j]
    return durations, jerks


def _sample_schedule(durations, jerks, t: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact piecewise-cubic position of a jerk schedule at times ``t``."""
    pos = np.zeros_like(t)
    p0 = v0 = a0 = 0.0
    t0 = 0.0
    for d, jk in zip(durations, jerks):
        m = (t >= t0) & (t < t0 + d)
        tau = t[m] - t0
        pos[m] = p0 + v0 * tau + a0 * tau ** 2 / 2 + jk * tau ** 3 / 6
        p0 += v0 * d + a0 * d * d / 2 + jk * d ** 3 / 6
        v0 += a0 * d + jk * d * d / 2
        a0 += jk * d
        t0 += d
    pos[t >= t0] = p0
    return pos, t0


def third_order_move(start: float, end: float, limits: MotionLimits, sample_time: float,
                     max_lookahead: int = 8) -> ReferenceProfile:
    """Rest-to-rest 7-segment jerk-limited move from ``start`` to ``end``.

    Samples are taken at ``k*sample_time`` until the move is complete; the
    last sample equals ``end`` exactly.
    """
    if not isinstance(limits, MotionLimits):
        raise InvalidLimits("limits must be MotionLimits")
    if not sample_time > 0:
        raise InvalidLimits("sample_time must be > 0")
    distance = abs(end - start)
    if distance == 0:
        return ReferenceProfile([float(start)], sample_time, max_lookahead)
    durations, jerks = _jerk_schedule(distance, limits)
    total = sum(durations)
    n = int(math.ceil(total / sample_time - 1e-9)) + 1
    t = np.arange(n) * sample_time
    s, _ = _sample_schedule(durations, jerks, t)
    y = start + np.sign(end - start) * s
    y[-1] = end
    return ReferenceProfile(y, sample_time, max_lookahead)


def hold(position: float, duration: float, sample_time: float, max_lookahead: int = 8) -> ReferenceProfile:
    n = max(int(round(duration / sample_time)), 0)
    return ReferenceProfile(np.full(max(n, 1), float(position)), sample_time, max_lookahead)


def back_and_forth(rotations: float, limits: MotionLimits, sample_time: float,
                   dwell: float = 0.2, repetitions: int = 1, max_lookahead: int = 8) -> ReferenceProfile:
    """Cycles between ``-rotations`` and ``+rotations`` full turns.

    The profile starts with a dwell at ``-2*pi*rotations``; each repetition
    moves to ``+2*pi*rotations``, dwells, moves back and dwells again.
    """
    if repetitions < 0:
        raise ValueError("repetitions must be >= 0")
    amp = 2 * math.pi * rotations
    parts = [hold(-amp, dwell, sample_time, max_lookahead)]
    forward = third_order_move(-amp, amp, limits, sample_time, max_lookahead)
    backward = third_order_move(amp, -amp, limits, sample_time, max_lookahead)
    for _ in range(repetitions):
        parts += [ReferenceProfile(forward.y[1:], sample_time), hold(amp, dwell, sample_time),
                  ReferenceProfile(backward.y[1:], sample_time), hold(-amp, dwell, sample_time)]
    return ReferenceProfile.concat(parts)


def collection_profile(rotations: float, limits: MotionLimits, sample_time: float,
                       dwell: float, duration: float, max_lookahead: int = 8) -> ReferenceProfile:
    """Back-and-forth cycling truncated to exactly ``round(duration/sample_time)`` samples."""
    n = int(round(duration / sample_time))
    one = back_and_forth(rotations, limits, sample_time, dwell, 1, max_lookahead)
    reps = max(1, int(math.ceil(n / max(len(one) - 1, 1))))
    full = back_and_forth(rotations, limits, sample_time, dwell, reps, max_lookahead)
    return ReferenceProfile(full.y[:n], sample_time, max_lookahead)
