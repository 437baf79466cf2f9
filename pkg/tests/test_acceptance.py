"""The ten acceptance criteria at their stated tolerances and runtime budgets.

Each test appends one ``[PASS]``/``[FAIL]`` line that pytest prints in its
terminal summary.  Run directly with ``python tests/test_acceptance.py``.
"""

import dataclasses
import filecmp
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pgnn_hsm.cli import main as cli_main
from pgnn_hsm.config import CosineSpec, derive_seed
from pgnn_hsm.experiments import collection_reference, run_collection, run_comparison, run_cosine_demo, \
    run_velocity_sweep
from pgnn_hsm.inverse_model import (NNParams, PhysicalModel, TrainConfig, build_regressors, fit_physical,
                                    mse_and_gradient, regressors_from_trace, rotation_mask, train_residual)
from pgnn_hsm.motor_sim import MotorParams, MotorState, dq_transform, inverse_dq_transform, rk4_step

TWO_PI = 2 * math.pi


def record(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_dq_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    ys = rng.uniform(-100, 100, 100_000)
    ias = rng.uniform(-10, 10, 100_000)
    ibs = rng.uniform(-10, 10, 100_000)
    worst_norm = worst_trip = 0.0
    for y, a, b in zip(ys.tolist(), ias.tolist(), ibs.tolist()):
        d, q = dq_transform(y, a, b, 50)
        worst_norm = max(worst_norm, abs(math.hypot(d, q) - math.hypot(a, b)))
        a2, b2 = inverse_dq_transform(y, d, q, 50)
        worst_trip = max(worst_trip, abs(a2 - a), abs(b2 - b))
    dt = time.perf_counter() - t0
    ok = worst_norm < 1e-10 and worst_trip < 1e-10 and dt < 1.0
    record(1, ok, f"norm err {worst_norm:.1e}, roundtrip err {worst_trip:.1e} (< 1e-10), {dt:.2f} s (< 1 s)")


def test_criterion_02_rk4_order():
    t0 = time.perf_counter()
    params = MotorParams()
    horizon = 0.01
    exact = math.exp(-params.resistance / params.inductance * horizon)
    ns = np.array([10, 20, 40, 80])
    errs = []
    for n in ns:
        # rotor parked at y = 0 with i_b = 0: zero torque, pure exponential coil decay
        s = MotorState(0.0, 0.0, 1.0, 0.0)
        for _ in range(n):
            s = rk4_step(s, 0.0, 0.0, horizon / n, params)
        errs.append(abs(s.i_a - exact))
    order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    dt = time.perf_counter() - t0
    record(2, order >= 3.5 and dt < 5.0, f"RK4 convergence exponent {order:.3f} (>= 3.5), {dt:.2f} s (< 5 s)")


def test_criterion_03_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    h = 1e-6
    for _ in range(100):
        n0, n1, m = rng.integers(1, 7), rng.integers(1, 17), rng.integers(5, 40)
        nn = NNParams.init(n0, n1, rng)
        nn.B1[:] = rng.normal(scale=0.5, size=n1)
        X = rng.normal(size=(m, n0))
        y = rng.normal(size=m)
        l2 = float(rng.choice([0.0, 1e-4, 1e-1]))
        theta = nn.flat()
        _, g = mse_and_gradient(nn, X, y, l2)
        fd = np.empty_like(theta)
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = h
            fd[i] = (mse_and_gradient(nn.unflat(theta + e), X, y, l2)[0]
                     - mse_and_gradient(nn.unflat(theta - e), X, y, l2)[0]) / (2 * h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd)))
    dt = time.perf_counter() - t0
    record(3, worst < 1e-6 and dt < 5.0, f"max relative gradient error {worst:.1e} (< 1e-6), {dt:.2f} s (< 5 s)")


def test_criterion_04_physical_identification(clean_cfg):
    t0 = time.perf_counter()
    trace = run_collection(clean_cfg)
    phys = fit_physical(regressors_from_trace(trace, clean_cfg.regressor), clean_cfg.regressor)
    dt = time.perf_counter() - t0
    ej = abs(phys.theta_inertia / clean_cfg.motor.inertia - 1)
    ef = abs(phys.theta_viscous / clean_cfg.motor.viscous_friction - 1)
    ok = ej < 0.02 and ef < 0.02 and dt < 60
    record(4, ok, f"J error {100 * ej:.2f}%, f_v error {100 * ef:.2f}% (< 2%), {dt:.1f} s (< 60 s)")


def test_criterion_05_rotational_reproducibility(trained):
    t0 = time.perf_counter()
    pg = trained["models"].pgnn
    rng = np.random.default_rng(505)
    n = 10_000
    ts = pg.regressor.sample_time
    offs = np.array(pg.regressor.y_offsets, dtype=float) * ts
    y0 = rng.uniform(-25, 25, (n, 1))
    v = rng.uniform(-20, 20, (n, 1))
    a = rng.uniform(-100, 100, (n, 1))
    phi = y0 + v * offs + 0.5 * a * offs ** 2
    mask = rotation_mask(pg.regressor)
    u = pg.predict(phi)
    worst = 0.0
    for k in range(-3, 4):
        diff = np.abs(pg.predict(phi + TWO_PI * k * mask) - u) / (1e-9 * (1 + np.abs(u)))
        worst = max(worst, float(np.max(diff)))
    dt = time.perf_counter() - t0
    record(5, worst < 1.0 and dt < 5.0,
           f"max |u(phi) - u(phi + 2 pi n)| / (1e-9 (1 + |u|)) = {worst:.2e} (< 1), {dt:.2f} s (< 5 s)")


def test_criterion_06_planted_residual(default_cfg):
    t0 = time.perf_counter()
    spec = default_cfg.regressor
    y = collection_reference(default_cfg).y
    regs = build_regressors(y, np.zeros_like(y), spec)
    truth = PhysicalModel(default_cfg.motor.inertia, default_cfg.motor.viscous_friction, spec)
    r = 0.05 * np.sin(np.mod(regs.phi[:, spec.center_index()], TWO_PI))
    regs.u = truth.predict(regs.phi) + r
    phys = fit_physical(regs, spec)
    cfg = TrainConfig(hidden=16, epochs=2000, subsample=8, seed=derive_seed(default_cfg.seed, "planted"))
    model = train_residual(regs, phys, cfg).model
    rel = float(np.sqrt(np.mean((model.predict(regs.phi) - regs.u) ** 2)) / np.sqrt(np.mean(r ** 2)))
    dt = time.perf_counter() - t0
    record(6, rel < 0.1 and dt < 120, f"RMS error {100 * rel:.2f}% of residual RMS (< 10%), {dt:.1f} s (< 120 s)")


def test_criterion_07_three_way_comparison(default_cfg, trained):
    t0 = time.perf_counter()
    v = default_cfg.training_velocity
    report, _ = run_comparison(default_cfg, trained["models"], velocities=[v],
                               roster=["none", "physical", "blackbox", "pgnn"])
    m = {name: report.get(name, v).mae for name in report.models()}
    dt = time.perf_counter() - t0 + trained["collect_s"] + trained["train_s"]
    ratio = m["physical"] / m["pgnn"]
    ok = (m["none"] > m["physical"] > m["pgnn"] and m["none"] > m["blackbox"] > m["pgnn"]
          and ratio >= 1.5 and dt < 300)
    detail = ", ".join(f"{k} {m[k]:.2e}" for k in ("none", "blackbox", "physical", "pgnn"))
    record(7, ok, f"MAE at {v:g} rad/s: {detail}; physical/pgnn = {ratio:.2f} (>= 1.5), "
                  f"{dt:.0f} s incl. training (< 300 s)")


def test_criterion_08_velocity_sweep(default_cfg, trained):
    t0 = time.perf_counter()
    report = run_velocity_sweep(default_cfg, trained["models"], roster=["physical", "pgnn"])
    dt = time.perf_counter() - t0 + trained["collect_s"] + trained["train_s"]
    vmax = default_cfg.training_velocity
    inside = [v for v in report.velocities() if v <= vmax]
    bad = [v for v in inside if report.get("pgnn", v).mae > report.get("physical", v).mae]
    flags_ok = all(r.extrapolation == (r.velocity > vmax) for r in report.rows)
    ratios = " ".join(f"{v:g}:{report.get('physical', v).mae / report.get('pgnn', v).mae:.2f}"
                      for v in report.velocities())
    ok = not bad and flags_ok and len(inside) > 0 and dt < 600
    record(8, ok, f"pgnn <= physical at all {len(inside)} velocities <= {vmax:g} rad/s "
                  f"(violations: {bad or 'none'}); physical/pgnn {ratios}; {dt:.0f} s incl. training (< 600 s)")


def test_criterion_09_cosine_extrapolation(default_cfg):
    t0 = time.perf_counter()
    spec = default_cfg.cosine
    rep = run_cosine_demo(default_cfg.seed, spec=spec)
    ext = {r["transform"]: r["max_error_extrapolation"] for r in rep["extrapolation"]}
    mn = rep["min_neurons"]
    fewer = mn["mod"] is not None and (mn["raw"] is None or mn["mod"] < mn["raw"])
    dt = time.perf_counter() - t0
    ok = ext["mod"] < spec.extrapolation_threshold and ext["raw"] > spec.raw_threshold and fewer and dt < 120
    record(9, ok, f"extrapolation error mod {ext['mod']:.4f} (< {spec.extrapolation_threshold:g}), "
                  f"raw {ext['raw']:.3f} (> {spec.raw_threshold:g}); neurons for {spec.accuracy:g}: "
                  f"mod {mn['mod']} < raw {mn['raw']}; {dt:.0f} s (< 120 s)")


def _tree(root: Path):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_criterion_10_determinism(short_cfg, tmp_path):
    from test_cli import write_config

    cfg = short_cfg.with_overrides(cosine=CosineSpec(n1_list=(2, 3), iterations=400, restarts=2))
    cfile = write_config(tmp_path / "cfg.toml", cfg)
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        for argv in (["collect"], ["fit"], ["train", "--kind", "pgnn"], ["train", "--kind", "blackbox"],
                     ["simulate", "--model", str(out / "pgnn.json")],
                     ["compare", "--models", str(out)],
                     ["sweep", "--models", str(out), "--roster", "physical,pgnn", "--jobs", "2"],
                     ["demo-cosine"]):
            assert cli_main(argv + ["--config", cfile, "--out", str(out)]) == 0
        runs.append(out)
    files = _tree(runs[0])
    same_set = files == _tree(runs[1])
    differ = [str(f) for f in files if not filecmp.cmp(runs[0] / f, runs[1] / f, shallow=False)]
    record(10, same_set and not differ and len(files) > 20,
           f"{len(files)} output files from collect/fit/train/simulate/compare/sweep/demo-cosine, "
           f"byte-identical across re-runs (differing: {differ or 'none'})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
