"""Interaction kernel and the mean-field operator map rho -> A^rho.

The kernel is stored as a d^2 x d^2 matrix with
``a[idx(x, y), idx(x', y')] = a(x, y; x', y')`` and ``idx(x, y) = (x-1)d + (y-1)``.
The mean-field operator is

    A^m(x, y) = sum_{x', y'} a(x, y; x', y') conj(m(x', y'))

which is conjugate-linear in ``m``; callers only feed it convex combinations
of Hermitian matrices, where it behaves linearly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import DimensionError, as_matrix, devec, hermiticity_violation, hs_norm, vec_dagger

KERNEL_TOL = 1e-12
PRESERVATION_TOL = 1e-10
_PROBES = 8
_PROBE_SEED = 20240607


@dataclass(frozen=True)
class KernelReport:
    exchange_violation: float
    adjoint_violation: float
    preservation_violation: float
    tol: float = KERNEL_TOL
    preservation_tol: float = PRESERVATION_TOL

    @property
    def exchange_ok(self) -> bool:
        return self.exchange_violation <= self.tol

    @property
    def adjoint_ok(self) -> bool:
        return self.adjoint_violation <= self.tol

    @property
    def preservation_ok(self) -> bool:
        return self.preservation_violation <= self.preservation_tol

    @property
    def passed(self) -> bool:
        return self.exchange_ok and self.adjoint_ok and self.preservation_ok

    def failures(self) -> list[str]:
        out = []
        if not self.exchange_ok:
            out.append(f"exchange symmetry violated (max {self.exchange_violation:.3e})")
        if not self.adjoint_ok:
            out.append(f"self-adjointness violated (max {self.adjoint_violation:.3e})")
        if not self.preservation_ok:
            out.append(f"Hermiticity preservation violated (max {self.preservation_violation:.3e})")
        return out

    def as_dict(self) -> dict:
        return {
            "exchange_violation": self.exchange_violation,
            "adjoint_violation": self.adjoint_violation,
            "preservation_violation": self.preservation_violation,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class InteractionKernel:
    d: int
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = as_matrix(self.a, "kernel")
        if a.shape != (self.d * self.d, self.d * self.d):
            raise DimensionError(f"kernel must be {self.d**2}x{self.d**2}, got {a.shape}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_matrix(cls, a) -> "InteractionKernel":
        a = as_matrix(a, "kernel")
        d = int(round(np.sqrt(a.shape[0])))
        if d * d != a.shape[0]:
            raise DimensionError("kernel dimension must be a perfect square")
        return cls(d, a)

    @classmethod
    def zeros(cls, d: int) -> "InteractionKernel":
        return cls(d, np.zeros((d * d, d * d), dtype=complex))

    @property
    def hs_norm(self) -> float:
        return hs_norm(self.a)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.a)

    def tensor(self) -> np.ndarray:
        """View as a[x, y, x', y'] (0-based)."""
        d = self.d
        return self.a.reshape(d, d, d, d)


def qubit_example_kernel() -> InteractionKernel:
    """a(1,1;1,1) = a(2,2;2,2) = 1, all else 0."""
    return InteractionKernel(2, np.diag([1, 0, 0, 1]).astype(complex))


def validate_kernel(k: InteractionKernel, tol: float = KERNEL_TOL, seed: int = _PROBE_SEED) -> KernelReport:
    t = k.tensor()
    exchange = float(np.max(np.abs(t - t.transpose(1, 0, 3, 2))))
    adjoint = hermiticity_violation(k.a)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(_PROBES):
        g = rng.standard_normal((k.d, k.d)) + 1j * rng.standard_normal((k.d, k.d))
        rho = g + g.conj().T
        worst = max(worst, hermiticity_violation(apply_kernel(k, rho)))
    return KernelReport(exchange, adjoint, worst, tol=tol)


def _check(k: InteractionKernel, rho: np.ndarray) -> np.ndarray:
    rho = as_matrix(rho, "rho")
    if rho.shape[0] != k.d:
        raise DimensionError(f"state dim {rho.shape[0]} does not match kernel d={k.d}")
    return rho


def apply_kernel(k: InteractionKernel, rho) -> np.ndarray:
    """A^rho = devec(a @ vec_dagger(rho))."""
    rho = _check(k, rho)
    return devec(k.a @ vec_dagger(rho))


def apply_kernel_direct(k: InteractionKernel, rho) -> np.ndarray:
    """Same map written as the explicit double sum over (x', y')."""
    rho = _check(k, rho)
    return np.einsum("xyuv,uv->xy", k.tensor(), rho.conj())


def kernel_bound_check(k: InteractionKernel, rho) -> tuple[float, float]:
    """(||A^rho||^2, ||rho||^2 ||a||^2); the first never exceeds the second."""
    rho = _check(k, rho)
    lhs = hs_norm(apply_kernel(k, rho)) ** 2
    rhs = hs_norm(rho) ** 2 * k.hs_norm**2
    return lhs, rhs


def empirical_density(states) -> np.ndarray:
    """(1/N) sum_l |psi_l><psi_l| for an (N, d) array of state vectors."""
    if isinstance(states, np.ndarray):
        psi = states.astype(complex, copy=False)
    else:
        psi = np.array([np.asarray(s, dtype=complex).reshape(-1) for s in states], dtype=complex)
    if psi.size == 0:
        raise ValueError("empty ensemble")
    if psi.ndim == 1:
        psi = psi[None, :]
    if psi.shape[0] == 0:
        raise ValueError("empty ensemble")
    return np.einsum("ni,nj->ij", psi, psi.conj()) / psi.shape[0]


def empirical_mean_field(k: InteractionKernel, states) -> np.ndarray:
    """A applied to the empirical density of the ensemble."""
    return apply_kernel(k, empirical_density(states))
