import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from mflindblad.generators import (
    MAX_NBODY_DIM,
    ModelSpec,
    NBodyGenerator,
    NumericalError,
    PhysicalityError,
    check_physicality,
    meanfield_lindblad_rhs,
    n_steps,
    nbody_lindblad_rhs,
    rk4_solve,
    solve_meanfield_reference,
    solve_nbody_reference,
)
from mflindblad.meanfield import InteractionKernel, qubit_example_kernel
from mflindblad.operators import SIGMA_MINUS, SIGMA_X, SIGMA_Z, density_from_pure, partial_trace, random_density

from conftest import free_spec, random_hermitian, random_kernel

# m_T for the shipped qubit model (H = 3 sigma_x, L = sqrt(0.2) sigma_-, psi0 = e1,
# kernel diag(1,0,0,1)) from an adaptive DOP853 solve at rtol 1e-13
QUBIT_M_T = np.array(
    [
        [0.9088633927186495, 0.00424893776499476 - 0.12152148534091751j],
        [0.00424893776499476 + 0.12152148534091751j, 0.09113660728135042],
    ]
)


def liouvillian(H, L):
    """Column-stacking superoperator of the linear Lindblad generator."""
    d = H.shape[0]
    eye = np.eye(d)
    LdL = L.conj().T @ L
    return (
        -1j * (np.kron(eye, H) - np.kron(H.T, eye))
        + np.kron(L.conj(), L)
        - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    )


def lindblad_exact(H, L, rho0, t):
    v = expm(liouvillian(H, L) * t) @ rho0.reshape(-1, order="F")
    return v.reshape(rho0.shape, order="F")


def test_model_spec_validation():
    k = qubit_example_kernel()
    with pytest.raises(ValueError, match="Hermitian"):
        ModelSpec(H=np.array([[0, 1], [0, 0]]), L=SIGMA_MINUS, kernel=k, psi0=[1, 0])
    with pytest.raises(ValueError, match="exactly one"):
        ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=k, psi0=[1, 0], rho0=np.eye(2) / 2)
    with pytest.raises(ValueError, match="exactly one"):
        ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=k)
    with pytest.raises(ValueError, match="normalized"):
        ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=k, psi0=[1, 1])
    with pytest.raises(ValueError):
        ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=k, rho0=np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=InteractionKernel.zeros(3), psi0=[1, 0])


def test_initial_vector_from_rank_one_rho():
    psi = np.array([0.6, 0.8j])
    spec = ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=qubit_example_kernel(), rho0=density_from_pure(psi))
    v = spec.initial_vector()
    assert np.allclose(density_from_pure(v), density_from_pure(psi))
    mixed = ModelSpec(H=SIGMA_Z, L=SIGMA_MINUS, kernel=qubit_example_kernel(), rho0=np.eye(2) / 2)
    with pytest.raises(ValueError, match="rank-1"):
        mixed.initial_vector()


def test_rhs_trivial_and_stationary():
    spec = ModelSpec(H=np.zeros((2, 2)), L=np.zeros((2, 2)), kernel=InteractionKernel.zeros(2), psi0=[1, 0])
    assert not np.any(meanfield_lindblad_rhs(np.eye(2) / 2, spec))
    # ground state is stationary for pure decay without drive
    spec = free_spec(H=0.4 * SIGMA_Z)
    assert np.allclose(meanfield_lindblad_rhs(np.diag([1, 0]), spec), 0)


def test_rhs_traceless_and_hermitian(rng):
    spec = ModelSpec(H=random_hermitian(3, rng), L=rng.standard_normal((3, 3)) + 0j, kernel=random_kernel(3, rng),
                     rho0=random_density(3, rng))
    for _ in range(5):
        r = meanfield_lindblad_rhs(random_density(3, rng), spec)
        assert abs(np.trace(r)) < 1e-12
        assert np.max(np.abs(r - r.conj().T)) < 1e-12


def test_reference_matches_adaptive_oracle(qubit_reference):
    assert np.max(np.abs(qubit_reference.states[-1] - QUBIT_M_T)) < 1e-10


def test_reference_physicality(qubit_reference):
    v = qubit_reference.violations()
    assert v["max_trace_error"] <= 1e-8
    assert v["max_hermiticity_error"] <= 1e-10
    assert v["min_eigenvalue"] >= -1e-6
    assert len(qubit_reference.times) == 1001


def test_linear_case_against_matrix_exponential():
    spec = free_spec()
    ref = solve_meanfield_reference(spec, 2.0, 1e-2)
    want = lindblad_exact(spec.H, spec.L, spec.initial_density, 2.0)
    assert np.max(np.abs(ref.states[-1] - want)) < 1e-9


def test_rk4_fourth_order():
    spec = free_spec()
    exact = lindblad_exact(spec.H, spec.L, spec.initial_density, 1.0)
    errs = []
    for dt in (0.1, 0.05):
        _, xs = rk4_solve(lambda m: meanfield_lindblad_rhs(m, spec), spec.initial_density, 1.0, dt)
        errs.append(np.max(np.abs(xs[-1] - exact)))
    order = np.log2(errs[0] / errs[1])
    assert 3.7 < order < 4.3


def test_rk4_time_grid_and_zero_horizon():
    t, xs = rk4_solve(lambda x: -x, np.ones(1), 0.0, 0.1)
    assert t.tolist() == [0.0] and xs.shape == (1, 1)
    t, xs = rk4_solve(lambda x: -x, np.ones(1), 1.0, 0.1)
    assert len(t) == 11 and np.isclose(t[-1], 1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_rk4_detects_blow_up():
    with pytest.raises(NumericalError) as err:
        rk4_solve(lambda x: x * x, np.array([1e200]), 1.0, 0.1)
    assert err.value.step == 1


def test_n_steps_rules():
    assert n_steps(1.0, 1e-3) == 1000
    assert n_steps(1.0, 0.3) == 4
    assert n_steps(0.0, 0.1) == 0
    with pytest.raises(ValueError):
        n_steps(1.0, 0.0)
    with pytest.raises(ValueError):
        n_steps(-1.0, 0.1)
    with pytest.raises(ValueError):
        n_steps(1.0, 1e-8)


def test_physicality_failures_raise():
    states = np.array([np.eye(2) / 2, np.diag([0.6, 0.6])])
    with pytest.raises(PhysicalityError, match="trace") as err:
        check_physicality(np.array([0.0, 0.1]), states)
    assert err.value.step == 1
    states = np.array([np.eye(2) / 2, np.diag([1.1, -0.1])])
    with pytest.raises(PhysicalityError, match="positivity"):
        check_physicality(np.array([0.0, 0.1]), states)
    states = np.array([np.eye(2) / 2, np.array([[0.5, 1e-6], [0, 0.5]])])
    with pytest.raises(PhysicalityError, match="Hermiticity"):
        check_physicality(np.array([0.0, 0.1]), states)


def test_nbody_cap():
    spec = ModelSpec(H=np.zeros((3, 3)), L=np.zeros((3, 3)), kernel=InteractionKernel.zeros(3), psi0=[1, 0, 0])
    NBodyGenerator(spec, 3)
    with pytest.raises(ValueError, match="cap"):
        NBodyGenerator(spec, 4)
    assert 3**4 > MAX_NBODY_DIM


def test_nbody_one_site_is_linear_lindblad(qubit_spec, rng):
    rho = random_density(2, rng)
    lin = qubit_spec.with_kernel(InteractionKernel.zeros(2))
    assert np.allclose(nbody_lindblad_rhs(rho, qubit_spec, 1), meanfield_lindblad_rhs(rho, lin))


def test_nbody_pair_term_weight(qubit_spec):
    gen = NBodyGenerator(qubit_spec, 3)
    single = sum(np.kron(np.kron(*ops[:2]), ops[2]) for ops in
                 ([qubit_spec.H, np.eye(2), np.eye(2)], [np.eye(2), qubit_spec.H, np.eye(2)],
                  [np.eye(2), np.eye(2), qubit_spec.H]))
    a = qubit_spec.kernel.a
    pairs = np.kron(a, np.eye(2)) + np.kron(np.eye(2), a)
    # sites (1,3): a is diag(1,0,0,1) = projector onto equal z-labels
    p13 = np.diag([1.0 if (i >> 2) == (i & 1) else 0.0 for i in range(8)])
    assert np.allclose(gen.H, single + (pairs + p13) / 3)


@pytest.mark.parametrize("n", [2, 3])
def test_nbody_factorizes_without_interaction(n):
    spec = free_spec()
    ref1 = solve_meanfield_reference(spec, 1.0, 1e-2)
    refn = solve_nbody_reference(spec, n, 1.0, 1e-2)
    for k in (0, 50, 100):
        prod = ref1.states[k]
        for _ in range(n - 1):
            prod = np.kron(prod, ref1.states[k])
        # both sides carry their own O(dt^4) RK4 error
        assert np.max(np.abs(refn.states[k] - prod)) < 1e-8
        assert np.allclose(partial_trace(refn.states[k], n, n, 2), ref1.states[k], atol=1e-8)


def test_nbody_is_a_lindblad_flow(qubit_spec):
    sol = solve_nbody_reference(qubit_spec, 3, 1.0, 1e-2)
    assert sol.max_trace_error < 1e-10
    assert sol.min_eigenvalue > -1e-6
    # exchangeable initial state stays exchangeable
    m1 = partial_trace(sol.states[-1], 1, 3, 2)
    m3 = partial_trace(sol.states[-1], 3, 3, 2)
    assert np.allclose(m1, m3, atol=1e-12)


def test_adaptive_oracle_is_independent():
    # the frozen constant really is what an adaptive solve gives for the qubit model
    s = np.sqrt(0.2)
    H = 3 * SIGMA_X
    L = s * SIGMA_MINUS

    def rhs(t, y):
        m = y.reshape(2, 2)
        A = np.diag(np.conj(np.diag(m)))
        K = H + A
        return (-1j * (K @ m - m @ K) + L @ m @ L.conj().T - 0.5 * (L.conj().T @ L @ m + m @ L.conj().T @ L)).ravel()

    sol = solve_ivp(rhs, (0, 1), np.array([1, 0, 0, 0], dtype=complex), method="DOP853", rtol=1e-12, atol=1e-13)
    assert np.max(np.abs(sol.y[:, -1].reshape(2, 2) - QUBIT_M_T)) < 1e-9
