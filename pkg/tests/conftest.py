import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cospace.data import build_stacked_system, onehot_encode  # noqa: E402
from cospace.graph import supervised_laplacian  # noqa: E402


def make_system(rng, d1=3, d2=3, n=20, c=3):
    x1 = rng.standard_normal((d1, n))
    x2 = rng.standard_normal((d2, n))
    labels = np.arange(n) % c
    rng.shuffle(labels)
    enc = onehot_encode(labels, c)
    return build_stacked_system(x1, x2, enc, supervised_laplacian(enc.labels)), x1, x2, enc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_system(rng):
    return make_system(rng)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
