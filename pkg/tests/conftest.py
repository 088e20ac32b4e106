import numpy as np
import pytest

from snnconvert import manifest as mf
from snnconvert.transformer import AnnModel, EncoderConfig, convert, quantize_model

ACCEPTANCE_RESULTS = []

SMALL = EncoderConfig(n=4, d=8, heads=2, d_ff=16, layers=1, levels=8, classes=5)
BASE = EncoderConfig(n=8, d=16, heads=2, d_ff=64, layers=2, levels=16, classes=10)


def build_pair(config, seed, calib=16):
    """Random float model, its calibrated QANN and the converted SNN."""
    ann = AnnModel(config, mf.generate_weights(config, seed))
    calib_inputs = mf.generate_inputs(config, calib, seed + 10_000)
    qann = quantize_model(ann, list(calib_inputs))
    return ann, qann, convert(qann)


@pytest.fixture(scope="session")
def small_pair():
    return build_pair(SMALL, 7)


@pytest.fixture(scope="session")
def base_pair():
    return build_pair(BASE, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
