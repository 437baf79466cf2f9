"""Inverse models evaluated as causal feedforward laws along a reference."""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import LookaheadUnavailable
from .inverse_model import InverseModel
from .trajectory import ReferenceProfile


class FeedforwardEvaluator:
    """Computes ``u_ff(k)`` from the reference window and past ``u_ff``.

    At sample ``k`` only reference indices up to ``k + n_k + 1`` are read.
    With ``n_b = 0`` (the default orders) the past-input buffer is empty and
    the law is memoryless.
    """

    def __init__(self, model: InverseModel, profile: ReferenceProfile):
        spec = model.regressor
        if abs(spec.sample_time - profile.sample_time) > 1e-12 * profile.sample_time:
            raise ValueError("model and reference sample times differ")
        if spec.n_k + 1 > profile.max_lookahead:
            raise LookaheadUnavailable(
                f"model needs {spec.n_k + 1} samples of lookahead, profile supplies {profile.max_lookahead}")
        self.model = model
        self.profile = profile
        self._y_offsets = spec.y_offsets
        self._n_hist = max(spec.n_b - 1, 0)
        self.buffer: deque = deque(maxlen=self._n_hist or None)
        self.reset()

    def reset(self) -> None:
        self.buffer.clear()
        self.buffer.extend([0.0] * self._n_hist)

    def regressor(self, k: int) -> np.ndarray:
        return np.array(self._window(k), dtype=float)

    def _window(self, k: int) -> list:
        at = self.profile.at
        return [at(k + m) for m in self._y_offsets] + list(self.buffer)

    def step(self, k: int) -> float:
        u = self.model.predict_window(self._window(k))
        if self._n_hist:
            self.buffer.appendleft(u)
        return u


def ff_step(evaluator: FeedforwardEvaluator, k: int) -> float:
    return evaluator.step(k)


def ff_trace(evaluator: FeedforwardEvaluator, profile: ReferenceProfile | None = None) -> np.ndarray:
    """``u_ff`` for every sample of the profile, evaluated in order from a reset buffer."""
    if profile is not None and profile is not evaluator.profile:
        evaluator = FeedforwardEvaluator(evaluator.model, profile)
    evaluator.reset()
    if evaluator._n_hist:
        return np.array([evaluator.step(k) for k in range(len(evaluator.profile))])
    # memoryless: evaluate all windows at once, reading the same indices step() would
    p = evaluator.profile
    ks = np.arange(len(p))
    n = len(p)
    cols = []
    for m in evaluator._y_offsets:
        idx = ks + m
        if idx.max() > n - 1 + p.max_lookahead:
            raise LookaheadUnavailable("reference too short for the model lookahead")
        cols.append(p.y[np.clip(idx, 0, n - 1)])
    return np.asarray(evaluator.model.predict(np.column_stack(cols)), dtype=float).reshape(n)
