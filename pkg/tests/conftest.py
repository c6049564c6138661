import numpy as np
import pytest

from sslt.config import PipelineConfig
from sslt.dataset import SynthConfig, constant_motion, split_challenge_suite, synthesize, write_sequence
from sslt.pipeline import run_sequence, tracker_only

# criterion number -> (name, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_sequence():
    """A short translating sequence, cheap enough for many tests."""
    cfg = SynthConfig(name="small", n_frames=8, width=160, height=120,
                      polygon=[[-22, -16], [22, -16], [22, 16], [-22, 16]],
                      start_center=(70.0, 60.0), motion=constant_motion(8, dx=2.0), seed=3)
    return synthesize(cfg)


@pytest.fixture(scope="session")
def small_sequence_dir(tmp_path_factory, small_sequence):
    root = tmp_path_factory.mktemp("data")
    write_sequence(*small_sequence, root / "small")
    return root


@pytest.fixture(scope="session")
def suite_configs():
    return split_challenge_suite(0)


@pytest.fixture(scope="session")
def suite(suite_configs):
    return {cfg.name: synthesize(cfg) for cfg in suite_configs}


@pytest.fixture(scope="session")
def suite_runs(suite):
    cfg = PipelineConfig()
    return {name: run_sequence(seq, gt.boxes[0], cfg) for name, (seq, gt) in suite.items()}


@pytest.fixture(scope="session")
def suite_tracker(suite):
    return {name: tracker_only(seq, gt.boxes[0]) for name, (seq, gt) in suite.items()}
