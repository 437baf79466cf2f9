"""Property-based checks of the invariants shared across modules."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pgnn_hsm.experiments import mae
from pgnn_hsm.feedforward import FeedforwardEvaluator
from pgnn_hsm.inverse_model import (NNParams, PgnnModel, PhysicalModel, RegressorSpec, build_regressors,
                                    model_from_json, model_to_json, rotation_mask)
from pgnn_hsm.motor_sim import ParasiticParams, dq_transform, inverse_dq_transform, parasitic_torque
from pgnn_hsm.trajectory import ReferenceProfile

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(y=finite, a=finite, b=finite, N=st.integers(1, 200))
def test_dq_preserves_norm_and_inverts(y, a, b, N):
    d, q = dq_transform(y, a, b, N)
    assert abs(math.hypot(d, q) - math.hypot(a, b)) <= 1e-12 * (1 + math.hypot(a, b))
    a2, b2 = inverse_dq_transform(y, d, q, N)
    assert abs(a2 - a) <= 1e-12 * (1 + abs(a) + abs(b)) and abs(b2 - b) <= 1e-12 * (1 + abs(a) + abs(b))


@given(y=st.floats(-50, 50), w=st.floats(-100, 100), n=st.integers(-4, 4),
       ripple=st.lists(st.tuples(st.integers(1, 60), st.floats(0, 1e-3), st.floats(-3, 3)), max_size=4),
       level=st.floats(0, 1e-2), smooth=st.floats(1e-3, 5))
def test_parasitic_torque_periodic_and_bounded(y, w, n, ripple, level, smooth):
    p = ParasiticParams(level, smooth, tuple(ripple))
    t = parasitic_torque(y, w, p)
    assert abs(parasitic_torque(y + 2 * math.pi * n, w, p) - t) < 1e-9 * (1 + abs(n))
    assert abs(t) <= level + sum(r[1] for r in ripple) + 1e-15


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(-10, 10))
def test_mae_nonnegative_and_shift_invariant(ys, c):
    y = np.array(ys)
    ref = y[::-1].copy()
    m = mae(ref, y)
    assert m >= 0
    assert abs(mae(ref + c, y + c) - m) <= 1e-9 * (1 + m + abs(c))
    assert mae(y, y) == 0.0


@settings(max_examples=30, deadline=None)
@given(n_a=st.integers(4, 7), n_b=st.integers(0, 3), n_k=st.integers(1, 3), n=st.integers(12, 40))
def test_regressor_rows_and_feedforward_causality(n_a, n_b, n_k, n):
    spec = RegressorSpec(n_a=n_a, n_b=n_b, n_k=n_k)
    assume(n_a >= n_k + 3)  # window covers y(k-2)..y(k+2)
    y = np.arange(n, dtype=float)
    regs = build_regressors(y, -y, spec)
    for row, k in zip(regs.phi, regs.k):
        np.testing.assert_array_equal(row[:n_a + 1], k + np.array(spec.y_offsets))
        np.testing.assert_array_equal(row[n_a + 1:], -(k + np.array(spec.u_offsets)))
    prof = ReferenceProfile(y, spec.sample_time)
    ev = FeedforwardEvaluator(PhysicalModel(1e-3, 1e-3, spec), prof)
    for k in range(n):
        prof.audit = []
        ev.step(k)
        assert max(prof.audit) <= k + n_k + 1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), hidden=st.integers(1, 12), y0=st.floats(-40, 40), v=st.floats(-20, 20),
       n=st.integers(-3, 3))
def test_pgnn_invariance_and_serialization(seed, hidden, y0, v, n):
    rng = np.random.default_rng(seed)
    pg = PgnnModel(PhysicalModel(*rng.uniform(1e-5, 1e-3, 2)), NNParams.init(3, hidden, rng),
                   rng.uniform(1, 100, 3), float(rng.uniform(1e-4, 1e-2)))
    ts = pg.regressor.sample_time
    phi = y0 + v * ts * np.array([2, 1, 0, -1, -2])
    u = pg.predict(phi)
    shifted = pg.predict(phi + 2 * math.pi * n * rotation_mask(pg.regressor))
    d = abs(np.mod(y0, 2 * math.pi) - np.mod(y0 + 2 * math.pi * n, 2 * math.pi))
    assume(min(d, 2 * math.pi - d) < 1e-9 and 1e-6 < np.mod(y0, 2 * math.pi) < 2 * math.pi - 1e-6)
    assert abs(shifted - u) < 1e-9 * (1 + abs(u))
    back = model_from_json(model_to_json(pg))
    assert back.predict(phi) == u
