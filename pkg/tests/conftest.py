import math

import numpy as np
import pytest
from scipy import integrate


def quad_pdf_moment(a, b, k):
    """k-th raw moment of N(0,1) over (a, b) by adaptive quadrature (oracle)."""
    f = lambda x: x**k * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)  # noqa: E731
    val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@pytest.fixture(scope="session")
def normal_1e6():
    return np.random.default_rng(20240611).standard_normal(1_000_000)


@pytest.fixture(scope="session")
def samples_2d():
    from rdquant.ecvq import sample_gaussian

    return sample_gaussian(2, 100_000, 7)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: float(s.split()[0])):
        terminalreporter.write_line(line)
