"""Pure-numpy kernels, vectorised over particles.

Reductions over the (tiny) single-particle dimension are written as explicit
loops so that the accumulation order is the same for every particle and
matches the JIT backend term by term.
"""
import numpy as np

from ._common import ALGORITHM1, CONSISTENT, GOLDEN, HALVED, MIX1, MIX2, TWO_PI, U53

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def _finalize(z):
    z = (z ^ (z >> _S30)) * MIX1
    z = (z ^ (z >> _S27)) * MIX2
    return z ^ (z >> _S31)


def gaussian_increments(seed, ids, step, out):
    """Standard normals, one per id, as a pure function of (seed, id, step)."""
    with np.errstate(over="ignore"):
        k = _finalize(np.uint64(seed) + GOLDEN)
        k = _finalize((k ^ ids.astype(np.uint64)) + GOLDEN)
        k = _finalize((k ^ np.uint64(step)) + GOLDEN)
        z1 = _finalize(k + GOLDEN)
        z2 = _finalize(k + GOLDEN + GOLDEN)
    u1 = ((z1 >> _S11) + np.uint64(1)).astype(np.float64) * U53
    u2 = ((z2 >> _S11) + np.uint64(1)).astype(np.float64) * U53
    out[:] = np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def _matvec(m, x):
    d = x.shape[1]
    out = np.zeros(x.shape, dtype=np.complex128)
    for j in range(d):
        out += m[:, j][None, :] * x[:, j][:, None]
    return out


def _vdot_rows(x, y):
    acc = np.zeros(x.shape[0], dtype=np.complex128)
    for i in range(x.shape[1]):
        acc += np.conj(x[:, i]) * y[:, i]
    return acc


def _sqnorm_rows(y):
    acc = np.zeros(y.shape[0])
    for i in range(y.shape[1]):
        acc += y[:, i].real * y[:, i].real + y[:, i].imag * y[:, i].imag
    return acc


def step_normalized(psi, heff, L, LdL, dW, dt, variant, renormalize, out, norms):
    Lx = _matvec(L, psi)
    q = _matvec(LdL, psi)
    h = _matvec(heff, psi)
    w = dW[:, None]
    if variant == CONSISTENT:
        r = _vdot_rows(psi, Lx).real[:, None]
        y = psi - 1j * h * dt - 0.5 * q * dt + r * Lx * dt - 0.5 * r * r * psi * dt + (Lx - r * psi) * w
    else:
        eL = _vdot_rows(psi, Lx)[:, None]
        eLL = _vdot_rows(psi, q).real[:, None]
        if variant == HALVED:
            eL = 0.5 * eL
        elif variant != ALGORITHM1:
            raise ValueError(f"unknown variant code {variant}")
        y = psi - 1j * h * dt - 0.5 * (q - eLL * psi) * dt + (Lx - eL * psi) * w
    nrm = np.sqrt(_sqnorm_rows(y))
    norms[:] = nrm
    if renormalize:
        with np.errstate(divide="ignore", invalid="ignore"):
            y = y * (1.0 / nrm)[:, None]
    out[:] = y


def step_unnormalized(chi, heff, L, LdL, dW, dt, out, norms):
    Lx = _matvec(L, chi)
    q = _matvec(LdL, chi)
    h = _matvec(heff, chi)
    y = chi - 1j * h * dt - 0.5 * q * dt + Lx * dW[:, None]
    norms[:] = np.sqrt(_sqnorm_rows(y))
    out[:] = y


def step_density(gam, heff, L, LdL, dW, dt, renormalize, out, traces):
    Ld = L.conj().T
    Lg = np.einsum("ik,nkj->nij", L, gam)
    gLd = np.einsum("nik,kj->nij", gam, Ld)
    comm = np.einsum("ik,nkj->nij", heff, gam) - np.einsum("nik,kj->nij", gam, heff)
    diss = np.einsum("nik,kj->nij", Lg, Ld) - 0.5 * (
        np.einsum("ik,nkj->nij", LdL, gam) + np.einsum("nik,kj->nij", gam, LdL)
    )
    c = np.einsum("ki,nik->n", L + Ld, gam)[:, None, None]
    y = gam + (-1j * comm + diss) * dt + (Lg + gLd - c * gam) * dW[:, None, None]
    y = 0.5 * (y + np.conj(np.swapaxes(y, 1, 2)))
    tr = np.trace(y, axis1=1, axis2=2).real
    traces[:] = tr
    if renormalize:
        with np.errstate(divide="ignore", invalid="ignore"):
            y = y * (1.0 / tr)[:, None, None]
    out[:] = y
