import numpy as np
import pytest

from mflindblad.config import load_config, shipped_config_path
from mflindblad.generators import ModelSpec, solve_meanfield_reference
from mflindblad.meanfield import InteractionKernel
from mflindblad.operators import SIGMA_MINUS, SIGMA_X, SIGMA_Z


@pytest.fixture(scope="session")
def shipped():
    return load_config(shipped_config_path())


@pytest.fixture(scope="session")
def qubit_spec(shipped):
    return shipped.spec


@pytest.fixture(scope="session")
def qubit_scheme(shipped):
    return shipped.scheme


@pytest.fixture(scope="session")
def qubit_reference(qubit_spec):
    return solve_meanfield_reference(qubit_spec, 1.0, 1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def free_spec(H=None, L=None, d=2, psi0=None):
    """No interaction; defaults to a driven, damped qubit."""
    H = 0.5 * SIGMA_X + 0.3 * SIGMA_Z if H is None else H
    L = 0.7 * SIGMA_MINUS if L is None else L
    d = np.asarray(H).shape[0]
    psi0 = np.eye(d, dtype=complex)[0] if psi0 is None else psi0
    return ModelSpec(H=H, L=L, kernel=InteractionKernel.zeros(d), psi0=psi0)


def random_hermitian(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def random_kernel(d, rng):
    """Random kernel passing validate_kernel.

    Exchange symmetry plus Hermiticity preservation of rho -> A^rho force a
    real kernel, so this draws a real one and symmetrizes it.
    """
    t = rng.standard_normal((d,) * 4)
    t = t + t.transpose(1, 0, 3, 2)
    a = t.reshape(d * d, d * d)
    return InteractionKernel(d, (0.5 * (a + a.T)).astype(complex))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
