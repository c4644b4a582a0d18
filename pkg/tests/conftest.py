import numpy as np
import pytest


def random_sl2(rng, scale=1.0):
    """A det-1 complex matrix with entries of size ~scale."""
    M = scale * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    d = np.linalg.det(M)
    return M / np.sqrt(d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
