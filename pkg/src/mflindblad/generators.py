"""Deterministic generators: the nonlinear mean-field Lindblad ODE, the exact
N-body Lindblad ODE, and a fixed-step RK4 reference integrator."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .meanfield import InteractionKernel, apply_kernel
from .operators import (
    DimensionError,
    as_matrix,
    density_from_pure,
    embed_pair,
    embed_single,
    hermiticity_violation,
    hermitize,
)

logger = logging.getLogger(__name__)

MAX_NBODY_DIM = 64
MAX_STEPS = 10_000_000

TRACE_TOL = 1e-8
HERMITIAN_CHECK_TOL = 1e-10
POSITIVITY_FLOOR = -1e-6
POSITIVITY_ABORT = -1e-4


class NumericalError(RuntimeError):
    """Non-finite values or a physicality failure during integration."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time


class PhysicalityError(NumericalError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Single-particle model: Hamiltonian, channel, kernel and initial state."""

    H: np.ndarray
    L: np.ndarray
    kernel: InteractionKernel
    psi0: np.ndarray | None = None
    rho0: np.ndarray | None = None
    tol: float = 1e-12

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        L = as_matrix(self.L, "L")
        d = H.shape[0]
        if L.shape != H.shape:
            raise DimensionError("H and L must have the same shape")
        if self.kernel.d != d:
            raise DimensionError(f"kernel d={self.kernel.d} does not match H dimension {d}")
        viol = hermiticity_violation(H)
        if viol > self.tol:
            raise ValueError(f"H is not Hermitian (max violation {viol:.3e})")
        if (self.psi0 is None) == (self.rho0 is None):
            raise ValueError("exactly one of psi0 / rho0 must be given")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", L)
        if self.psi0 is not None:
            psi0 = np.asarray(self.psi0, dtype=complex).reshape(-1)
            if psi0.size != d:
                raise DimensionError(f"psi0 has length {psi0.size}, expected {d}")
            nrm = np.linalg.norm(psi0)
            if abs(nrm - 1.0) > self.tol:
                raise ValueError(f"psi0 is not normalized (norm {nrm!r})")
            object.__setattr__(self, "psi0", psi0)
        else:
            rho0 = as_matrix(self.rho0, "rho0")
            if rho0.shape != H.shape:
                raise DimensionError("rho0 has the wrong dimension")
            check_density(rho0, self.tol)
            object.__setattr__(self, "rho0", rho0)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def initial_density(self) -> np.ndarray:
        return density_from_pure(self.psi0) if self.psi0 is not None else self.rho0.copy()

    def initial_vector(self, rank_tol: float = 1e-10) -> np.ndarray:
        """psi0, or the dominant eigenvector of a rank-1 rho0."""
        if self.psi0 is not None:
            return self.psi0.copy()
        w, v = np.linalg.eigh(hermitize(self.rho0))
        if np.sum(w > rank_tol) != 1 or abs(w[-1] - 1.0) > rank_tol:
            raise ValueError("pure-state modes need psi0 or a rank-1 rho0")
        return v[:, -1].astype(complex)

    def with_kernel(self, kernel: InteractionKernel) -> "ModelSpec":
        return ModelSpec(self.H, self.L, kernel, self.psi0, self.rho0, self.tol)


def check_density(rho: np.ndarray, tol: float = 1e-12, eig_floor: float = -1e-10) -> None:
    viol = hermiticity_violation(rho)
    if viol > tol:
        raise ValueError(f"density matrix is not Hermitian (max violation {viol:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix has trace {tr!r}")
    lo = float(np.linalg.eigvalsh(hermitize(rho))[0])
    if lo < eig_floor:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")


def lindblad_dissipator(rho: np.ndarray, L: np.ndarray, LdL: np.ndarray | None = None) -> np.ndarray:
    if LdL is None:
        LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def meanfield_lindblad_rhs(m, spec: ModelSpec) -> np.ndarray:
    """-i[H + A^m, m] + L m L^dagger - 1/2 {L^dagger L, m}."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (spec.d, spec.d):
        raise DimensionError(f"state has shape {m.shape}, expected {(spec.d, spec.d)}")
    heff = spec.H + apply_kernel(spec.kernel, m)
    return -1j * (heff @ m - m @ heff) + lindblad_dissipator(m, spec.L)


class NBodyGenerator:
    """Precomputed operators of the N-body Lindblad generator on d^N.

    H^N = sum_l H_l + (1/N) sum_{l > l'} A_{l l'} with the kernel matrix used as
    the pair operator; the single-particle Hamiltonian enters unmodified.
    """

    def __init__(self, spec: ModelSpec, n: int):
        if n < 1:
            raise ValueError("N must be >= 1")
        dim = spec.d**n
        if dim > MAX_NBODY_DIM:
            raise ValueError(f"d^N = {dim} exceeds the dense N-body cap of {MAX_NBODY_DIM}")
        self.n, self.d, self.dim = n, spec.d, dim
        h = sum(embed_single(spec.H, l, n) for l in range(1, n + 1))
        if not spec.kernel.is_zero:
            for lp in range(1, n + 1):
                for l in range(lp + 1, n + 1):
                    h = h + embed_pair(spec.kernel.a, lp, l, n) / n
        self.H = np.asarray(h, dtype=complex)
        self.Ls = [embed_single(spec.L, l, n) for l in range(1, n + 1)]
        self.LdL = sum(Ll.conj().T @ Ll for Ll in self.Ls)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(f"state has shape {rho.shape}, expected {(self.dim, self.dim)}")
        out = -1j * (self.H @ rho - rho @ self.H) - 0.5 * (self.LdL @ rho + rho @ self.LdL)
        for Ll in self.Ls:
            out += Ll @ rho @ Ll.conj().T
        return out


def nbody_lindblad_rhs(rho_n, spec: ModelSpec, n: int) -> np.ndarray:
    return NBodyGenerator(spec, n)(np.asarray(rho_n, dtype=complex))


def n_steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    ratio = T / dt
    k = round(ratio)
    steps = k if abs(ratio - k) <= 1e-9 * max(1.0, ratio) else math.ceil(ratio)
    if steps > MAX_STEPS:
        raise ValueError(f"T/dt = {ratio:.3g} exceeds {MAX_STEPS}")
    return int(steps)


def rk4_solve(rhs: Callable[[np.ndarray], np.ndarray], x0, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 with fixed step; returns (times, states) at every step."""
    steps = n_steps(T, dt)
    x = np.array(x0, dtype=complex)
    out = np.empty((steps + 1,) + x.shape, dtype=complex)
    out[0] = x
    for k in range(steps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state at step {k + 1}", step=k + 1, time=(k + 1) * dt)
        out[k + 1] = x
    return np.arange(steps + 1) * dt, out


@dataclass
class ReferenceSolution:
    times: np.ndarray
    states: np.ndarray
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def violations(self) -> dict:
        return {
            "max_trace_error": self.max_trace_error,
            "max_hermiticity_error": self.max_hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
        }


def check_physicality(times: np.ndarray, states: np.ndarray) -> ReferenceSolution:
    sol = ReferenceSolution(times, states)
    tr_err = np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)
    herm = np.max(np.abs(states - np.conj(np.swapaxes(states, 1, 2))), axis=(1, 2))
    mins = np.linalg.eigvalsh(0.5 * (states + np.conj(np.swapaxes(states, 1, 2))))[:, 0]
    sol.max_trace_error = float(tr_err.max())
    sol.max_hermiticity_error = float(herm.max())
    sol.min_eigenvalue = float(mins.min())
    for name, arr, tol in (("trace", tr_err, TRACE_TOL), ("Hermiticity", herm, HERMITIAN_CHECK_TOL)):
        bad = np.flatnonzero(arr > tol)
        if bad.size:
            k = int(bad[0])
            raise PhysicalityError(
                f"{name} check failed at t={times[k]:.6g} (error {arr[k]:.3e} > {tol:g})", step=k, time=float(times[k])
            )
    bad = np.flatnonzero(mins < POSITIVITY_ABORT)
    if bad.size:
        k = int(bad[0])
        raise PhysicalityError(
            f"positivity failed at t={times[k]:.6g} (min eigenvalue {mins[k]:.3e})", step=k, time=float(times[k])
        )
    bad = np.flatnonzero(mins < POSITIVITY_FLOOR)
    if bad.size:
        k = int(bad[0])
        msg = f"min eigenvalue {mins[k]:.3e} below {POSITIVITY_FLOOR:g} at t={times[k]:.6g}"
        logger.warning(msg)
        sol.warnings.append(msg)
    return sol


def solve_meanfield_reference(spec: ModelSpec, T: float, dt: float) -> ReferenceSolution:
    times, states = rk4_solve(lambda m: meanfield_lindblad_rhs(m, spec), spec.initial_density, T, dt)
    return check_physicality(times, states)


def solve_nbody_reference(spec: ModelSpec, n: int, T: float, dt: float) -> ReferenceSolution:
    gen = NBodyGenerator(spec, n)
    rho1 = spec.initial_density
    rho0 = rho1
    for _ in range(n - 1):
        rho0 = np.kron(rho0, rho1)
    times, states = rk4_solve(gen, rho0, T, dt)
    return check_physicality(times, states)
