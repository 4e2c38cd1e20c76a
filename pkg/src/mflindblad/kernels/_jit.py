"""numba kernels; same arithmetic as ``_numpy`` written per particle."""
import os

import numba as nb
import numpy as np

from ._common import CONSISTENT, GOLDEN, HALVED, MIX1, MIX2, TWO_PI, U53

if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "workqueue"

_opts = dict(nogil=True, cache=True, fastmath=False, error_model="numpy")

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)


@nb.njit(**_opts)
def _finalize(z):
    z = (z ^ (z >> _S30)) * MIX1
    z = (z ^ (z >> _S27)) * MIX2
    return z ^ (z >> _S31)


@nb.njit(parallel=True, **_opts)
def gaussian_increments(seed, ids, step, out):
    k0 = _finalize(np.uint64(seed) + GOLDEN)
    s = np.uint64(step)
    for p in nb.prange(ids.shape[0]):
        k = _finalize((k0 ^ np.uint64(ids[p])) + GOLDEN)
        k = _finalize((k ^ s) + GOLDEN)
        z1 = _finalize(k + GOLDEN)
        z2 = _finalize(k + GOLDEN + GOLDEN)
        u1 = np.float64((z1 >> _S11) + _ONE) * U53
        u2 = np.float64((z2 >> _S11) + _ONE) * U53
        out[p] = np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


@nb.njit(parallel=True, **_opts)
def step_normalized(psi, heff, L, LdL, dW, dt, variant, renormalize, out, norms):
    n, d = psi.shape
    for p in nb.prange(n):
        # out[p] doubles as scratch for L psi
        eL = 0j
        eLL = 0j
        for i in range(d):
            s = 0j
            t = 0j
            for j in range(d):
                s += L[i, j] * psi[p, j]
                t += LdL[i, j] * psi[p, j]
            out[p, i] = s
            eL += np.conj(psi[p, i]) * s
            eLL += np.conj(psi[p, i]) * t
        w = dW[p]
        r = eL.real
        eLLr = eLL.real
        if variant == HALVED:
            eL = 0.5 * eL
        nrm2 = 0.0
        for i in range(d):
            h = 0j
            q = 0j
            for j in range(d):
                h += heff[i, j] * psi[p, j]
                q += LdL[i, j] * psi[p, j]
            x = psi[p, i]
            lx = out[p, i]
            if variant == CONSISTENT:
                y = x - 1j * h * dt - 0.5 * q * dt + r * lx * dt - 0.5 * r * r * x * dt + (lx - r * x) * w
            else:
                y = x - 1j * h * dt - 0.5 * (q - eLLr * x) * dt + (lx - eL * x) * w
            out[p, i] = y
            nrm2 += y.real * y.real + y.imag * y.imag
        nrm = np.sqrt(nrm2)
        norms[p] = nrm
        if renormalize:
            inv = 1.0 / nrm
            for i in range(d):
                out[p, i] = out[p, i] * inv


@nb.njit(parallel=True, **_opts)
def step_unnormalized(chi, heff, L, LdL, dW, dt, out, norms):
    n, d = chi.shape
    for p in nb.prange(n):
        w = dW[p]
        nrm2 = 0.0
        for i in range(d):
            h = 0j
            q = 0j
            lx = 0j
            for j in range(d):
                lx += L[i, j] * chi[p, j]
                q += LdL[i, j] * chi[p, j]
                h += heff[i, j] * chi[p, j]
            y = chi[p, i] - 1j * h * dt - 0.5 * q * dt + lx * w
            out[p, i] = y
            nrm2 += y.real * y.real + y.imag * y.imag
        norms[p] = np.sqrt(nrm2)


@nb.njit(parallel=True, **_opts)
def step_density(gam, heff, L, LdL, dW, dt, renormalize, out, traces):
    n, d = gam.shape[0], gam.shape[1]
    for p in nb.prange(n):
        g = gam[p]
        lg = np.zeros((d, d), dtype=np.complex128)
        for i in range(d):
            for j in range(d):
                s = 0j
                for k in range(d):
                    s += L[i, k] * g[k, j]
                lg[i, j] = s
        c = 0j
        for i in range(d):
            for k in range(d):
                c += (L[k, i] + np.conj(L[i, k])) * g[i, k]
        w = dW[p]
        y = np.empty((d, d), dtype=np.complex128)
        for i in range(d):
            for j in range(d):
                comm = 0j
                anti = 0j
                sand = 0j
                gld = 0j
                for k in range(d):
                    comm += heff[i, k] * g[k, j] - g[i, k] * heff[k, j]
                    anti += LdL[i, k] * g[k, j] + g[i, k] * LdL[k, j]
                    sand += lg[i, k] * np.conj(L[j, k])
                    gld += g[i, k] * np.conj(L[j, k])
                y[i, j] = g[i, j] + (-1j * comm + (sand - 0.5 * anti)) * dt + (lg[i, j] + gld - c * g[i, j]) * w
        tr = 0.0
        for i in range(d):
            tr += y[i, i].real
        traces[p] = tr
        scale = 1.0 / tr if renormalize else 1.0
        for i in range(d):
            for j in range(d):
                out[p, i, j] = 0.5 * (y[i, j] + np.conj(y[j, i])) * scale
