"""Dense complex linear algebra and quantum-state primitives.

Matrices are plain ``numpy`` complex arrays. Site indices (``l``) and the
matrix-element labels ``(x, y)`` used in docstrings are 1-based; storage is
0-based row-major, so element ``(x, y)`` lives at flat position
``(x - 1) * d + (y - 1)``. That mapping is shared by :func:`vec_dagger`,
:func:`devec` and the interaction-kernel addressing in
:mod:`mflindblad.meanfield`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# e1 is the ground state (sigma_z = +1); sigma_minus maps e2 -> e1
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite square complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class PureState:
    """State vector; ``normalized`` marks psi-mode (True) vs chi-mode (False)."""

    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size == 0 or not np.all(np.isfinite(amp)):
            raise ValueError("state amplitudes must be non-empty and finite")
        if self.normalized and abs(np.linalg.norm(amp) - 1.0) > 1e-9:
            raise ValueError(f"normalized state has norm {np.linalg.norm(amp)!r}")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    @classmethod
    def from_unnormalized(cls, v) -> "PureState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        return cls(v / np.linalg.norm(v), True)


def _vec(psi) -> np.ndarray:
    return np.asarray(psi, dtype=complex).reshape(-1)


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def dagger(m) -> np.ndarray:
    return np.conj(np.asarray(m, dtype=complex)).T


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return a @ b + b @ a


def trace(m) -> complex:
    return complex(np.trace(as_matrix(m)))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product tr(a^dagger b)."""
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return complex(np.vdot(a, b))


def hs_norm(m) -> float:
    return float(np.linalg.norm(as_matrix(m)))


def hermiticity_violation(m) -> float:
    """max |M(x,y) - conj(M(y,x))|."""
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_violation(m) <= tol


def hermitize(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


def expectation(op, psi) -> complex:
    """<psi|O|psi>."""
    op = as_matrix(op)
    v = _vec(psi)
    if op.shape[0] != v.size:
        raise DimensionError(f"operator dim {op.shape[0]} vs state dim {v.size}")
    return complex(np.vdot(v, op @ v))


def density_from_pure(psi) -> np.ndarray:
    v = _vec(psi)
    return np.outer(v, v.conj())


def purity(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.trace(rho @ rho)))


def bloch_vector(rho) -> tuple[float, float, float]:
    """(<sigma_x>, <sigma_y>, <sigma_z>) for a qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError("Bloch coordinates need a 2x2 matrix")
    return tuple(float(np.real(np.trace(rho @ s))) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))


def vec_dagger(rho) -> np.ndarray:
    """Row-major vectorisation of conj(rho): out[(x-1)d + (y-1)] = conj(rho(x, y)).

    For Hermitian ``rho`` this equals ``rho(y, x)``; at d = 2 it is
    (rho11, rho21, rho12, rho22).
    """
    return np.conj(as_matrix(rho, "rho")).reshape(-1)


def devec(v) -> np.ndarray:
    """Inverse reshape: out(x, y) = v[(x-1)d + (y-1)], no conjugation."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if v.size == 0 or d * d != v.size:
        raise DimensionError(f"length {v.size} is not a perfect square")
    return v.reshape(d, d).copy()


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _check_site(l: int, n: int) -> None:
    if not (1 <= l <= n):
        raise IndexError(f"site {l} out of range 1..{n}")


def embed_single(op, l: int, n: int) -> np.ndarray:
    """I^(l-1) (x) O (x) I^(N-l) on d^N."""
    op = as_matrix(op)
    _check_site(l, n)
    eye = np.eye(op.shape[0], dtype=complex)
    return reduce(np.kron, [op if k == l else eye for k in range(1, n + 1)])


def embed_pair(b, l: int, lp: int, n: int) -> np.ndarray:
    """Two-site operator ``b`` (on d^2) acting on factors ``l < lp`` of d^N."""
    b = as_matrix(b)
    if not (1 <= l < lp <= n):
        raise IndexError(f"need 1 <= l < l' <= N, got l={l}, l'={lp}, N={n}")
    d = int(round(np.sqrt(b.shape[0])))
    if d * d != b.shape[0]:
        raise DimensionError("pair operator dimension must be a perfect square")
    rest = d ** (n - 2)
    full = np.kron(b, np.eye(rest, dtype=complex)).reshape((d,) * (2 * n))
    # axis order of `full` is [l, l', others...] for rows then columns
    others = [k for k in range(n) if k not in (l - 1, lp - 1)]
    src_order = [l - 1, lp - 1] + others
    perm = np.argsort(src_order)
    axes = list(perm) + [n + p for p in perm]
    return full.transpose(axes).reshape(d**n, d**n)


def partial_trace(rho_n, keep: int, n: int, d: int) -> np.ndarray:
    """Reduced d x d state of site ``keep`` (1-based)."""
    rho_n = as_matrix(rho_n, "rho_n")
    if rho_n.shape[0] != d**n:
        raise DimensionError(f"expected dimension {d**n}, got {rho_n.shape[0]}")
    _check_site(keep, n)
    t = rho_n.reshape((d,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[:n])
    cols[keep - 1] = "Z"
    spec = "".join(rows) + "".join(cols) + "->" + rows[keep - 1] + "Z"
    return np.einsum(spec, t)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
