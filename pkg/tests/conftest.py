import numpy as np
import pytest

from compact_bilinear import LocalDescriptorGrid


def random_grid(rng, n=1, h=2, w=2, c=4, nonneg=False):
    x = rng.normal(size=(n, h, w, c))
    return LocalDescriptorGrid(np.abs(x) if nonneg else x)


@pytest.fixture
def nprng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
