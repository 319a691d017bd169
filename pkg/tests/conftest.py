import numpy as np
import pytest

from dirac_codazzi.clifford import build_clifford
from dirac_codazzi.deformation import CodazziField, TrigPoly
from dirac_codazzi.torus import TorusSpec

PROFILE_B1 = TrigPoly(1.0, ((0.2, "sin", (1, 0)),))
HESS_F = TrigPoly(0.0, ((0.004, "cos", (1, 1)), (0.004, "sin", (0, 1))))


def torus(N, spin=(0.5, 0.0)):
    return TorusSpec(((1.0, 0.0), (0.0, 1.0)), spin, (N, N))


def profile(spec, b2=1.5, b1=PROFILE_B1):
    return CodazziField.diagonal_profile(spec, b1, [b2])


def hessian(spec):
    return CodazziField.hessian_perturbed(spec, 1.0, HESS_F)


def non_codazzi(spec):
    y = spec.points()[..., 1]
    beta = np.zeros(spec.grid + (2, 2))
    beta[..., 0, 0] = 1 + 0.2 * np.sin(2 * np.pi * y)
    beta[..., 1, 1] = 1.0
    return CodazziField.samples(spec, beta)


def random_band_limited(rng, spec, modes=3, amp=1.0):
    """Real trigonometric field with |k| <= modes on each axis."""
    u = spec.points()
    out = np.zeros(spec.grid)
    for _ in range(6):
        k = rng.integers(-modes, modes + 1, size=spec.n)
        phase = 2 * np.pi * (u @ k) + rng.uniform(0, 2 * np.pi)
        out += amp * rng.normal() * np.cos(phase)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture(scope="session")
def rep2():
    return build_clifford(2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
