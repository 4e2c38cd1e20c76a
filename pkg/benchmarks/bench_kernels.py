"""Time the numba and pure-numpy particle kernels on identical inputs.

    python benchmarks/bench_kernels.py [--N 10000] [--steps 200] [--d 2]

Both backends are imported directly, so the MFLINDBLAD_DISABLE_JIT flag does
not matter here. The first numba call per signature is excluded (compile or
cache load).
"""
import argparse
import time

import numpy as np

from mflindblad.kernels import VARIANT_CODES, jit_backend, numpy_backend


def make_inputs(n, d, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    psi /= np.linalg.norm(psi, axis=1)[:, None]
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    heff = np.ascontiguousarray(g + g.conj().T)
    L = np.ascontiguousarray(rng.standard_normal((d, d)) + 0j)
    return psi, heff, L, np.ascontiguousarray(L.conj().T @ L)


def run(backend, kind, n, d, steps, dt=1e-3):
    psi, heff, L, LdL = make_inputs(n, d)
    out = np.empty_like(psi)
    norms = np.empty(n)
    dW = np.empty(n)
    ids = np.arange(n, dtype=np.int64)
    gam = np.einsum("ni,nj->nij", psi, psi.conj())
    gout = np.empty_like(gam)
    code = VARIANT_CODES["density-consistent"]

    def one(k):
        backend.gaussian_increments(np.uint64(7), ids, np.int64(k), dW)
        if kind == "normalized":
            backend.step_normalized(psi, heff, L, LdL, dW, dt, code, True, out, norms)
        elif kind == "unnormalized":
            backend.step_unnormalized(psi, heff, L, LdL, dW, dt, out, norms)
        else:
            backend.step_density(gam, heff, L, LdL, dW, dt, True, gout, norms)

    one(0)  # warm-up
    t0 = time.perf_counter()
    for k in range(1, steps + 1):
        one(k)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--d", type=int, default=2)
    args = ap.parse_args()
    print(f"N={args.N} d={args.d} steps={args.steps}")
    print(f"{'kernel':<14}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'ns/particle-step':>18}")
    for kind in ("normalized", "unnormalized", "density"):
        t_np = run(numpy_backend, kind, args.N, args.d, args.steps)
        if jit_backend is None:
            print(f"{kind:<14}{t_np:>12.3f}{'n/a':>12}")
            continue
        t_jit = run(jit_backend, kind, args.N, args.d, args.steps)
        per = 1e9 * t_jit / (args.N * args.steps)
        print(f"{kind:<14}{t_np:>12.3f}{t_jit:>12.3f}{t_np / t_jit:>10.1f}{per:>18.1f}")


if __name__ == "__main__":
    main()
