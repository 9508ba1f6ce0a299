import numpy as np
import pytest

from bld.data import default_codewords, make_codeword_dataset
from bld.model import fit
from bld.nn import AdamState, DenoiserNet
from bld.schedule import build_schedule


@pytest.fixture(scope="session")
def codewords():
    return default_codewords()


@pytest.fixture(scope="session")
def trained_codeword_net(codewords):
    """A denoiser fitted well enough to the codeword task for sampler property tests.

    Uses a larger learning rate than the acceptance run so
    the fixture is reliable and fast.
    """
    rng = np.random.default_rng(123)
    s = build_schedule("linear", 16)
    data = make_codeword_dataset(codewords, 4096, rng)
    net = DenoiserNet(8, 16, 128, 2, rng=rng)
    fit(net, data, s, 3000, rng, opt=AdamState(lr=3e-3), batch_size=64)
    return net, s


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
