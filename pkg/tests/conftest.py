import dataclasses
import time

import pytest

from pgnn_hsm.config import bundled_config_path, default_config, load_config
from pgnn_hsm.experiments import run_collection, train_models

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def clean_cfg():
    return load_config(bundled_config_path("parasitic_free"))


@pytest.fixture(scope="session")
def short_cfg(default_cfg):
    """Default plant with a 2 s collection and short training, for fast end-to-end tests."""
    col = dataclasses.replace(default_cfg.collection, duration=2.0)
    ev = dataclasses.replace(default_cfg.evaluation, rotations=0.1, dwell=0.02, velocities=(5.0, 15.0, 20.0))
    tr = dataclasses.replace(default_cfg.pgnn_train, epochs=60, subsample=8)
    return default_cfg.with_overrides(collection=col, evaluation=ev, pgnn_train=tr,
                                      blackbox_train=dataclasses.replace(tr, regularization=0.0))


@pytest.fixture(scope="session")
def trained(default_cfg):
    """Collection on the parasitic plant and all three models, with timings."""
    t0 = time.perf_counter()
    trace = run_collection(default_cfg)
    t1 = time.perf_counter()
    models = train_models(default_cfg, trace)
    t2 = time.perf_counter()
    return {"trace": trace, "models": models, "collect_s": t1 - t0, "train_s": t2 - t1}
