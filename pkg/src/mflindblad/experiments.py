"""Desk-scale studies: Monte-Carlo rate in N, synchronous-coupling chaos rate,
exact N-body comparison and the Euler weak-bias sweep.

Every study is a deterministic function of its arguments. Cells (N, seed) can
be farmed out to worker processes but are always reduced in sorted order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .generators import ModelSpec, NumericalError, ReferenceSolution, solve_meanfield_reference, solve_nbody_reference
from .operators import hs_norm, partial_trace
from .trajectories import (
    ParticleEnsemble,
    SchemeConfig,
    reference_mean_fields,
    simulate,
    simulate_mckean_iid,
    step_ensemble,
)

MIN_N_VALUES = 4
MIN_SPAN = 16
MIN_SEEDS = 8
MAX_EXCLUDED_FRACTION = 0.10
DEFAULT_SEEDS = tuple(range(16))


class StudyError(ValueError):
    """Study preconditions not met."""


def fit_loglog_slope(points) -> tuple[float, float, float]:
    """OLS of log(error) on log(N); returns (slope, intercept, r^2)."""
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(n <= 0 for n, _ in pts):
        raise ValueError("N values must be positive")
    bad = [e for _, e in pts if not e > 0]
    if bad:
        raise ValueError(f"nonpositive error value {bad[0]!r}")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("N values must not all be equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_res == 0.0:
        r2 = 1.0
    elif ss_tot == 0.0:
        r2 = 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def check_study_grid(N_values, seeds) -> tuple[list[int], list[int]]:
    ns = [int(n) for n in N_values]
    ss = [int(s) for s in seeds]
    if ns != sorted(ns) or len(set(ns)) != len(ns):
        raise StudyError("N_values must be strictly increasing")
    if len(ns) < MIN_N_VALUES:
        raise StudyError(f"need at least {MIN_N_VALUES} N values, got {len(ns)}")
    if ns[0] < 1 or ns[-1] < MIN_SPAN * ns[0]:
        raise StudyError(f"N values must span at least {MIN_SPAN}x")
    if len(ss) < MIN_SEEDS:
        raise StudyError(f"need at least {MIN_SEEDS} seeds, got {len(ss)}")
    if len(set(ss)) != len(ss):
        raise StudyError("seeds must be distinct")
    return ns, ss


def _fit_or_nan(ns, values):
    pts = [(n, v) for n, v in zip(ns, values) if np.isfinite(v) and v > 0]
    if len(pts) < 3:
        return float("nan"), float("nan"), float("nan")
    return fit_loglog_slope(pts)


def _map(fn, cells, workers: int):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, cells))
    return [fn(c) for c in cells]


def _mean_stderr(vals) -> tuple[float, float]:
    v = np.asarray(vals, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


# Monte-Carlo rate -------------------------------------------------------------


@dataclass
class ConvergenceReport:
    N_values: list[int]
    seeds: list[int]
    dt: float
    T: float
    mode: str
    variant: str
    mean_error: list[float]
    stderr: list[float]
    sup_of_mean: list[float]
    per_seed: dict[int, list[float]]
    slope: float
    intercept: float
    r2: float
    excluded: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def total_cells(self) -> int:
        return len(self.N_values) * len(self.seeds)

    @property
    def valid(self) -> bool:
        return len(self.excluded) <= MAX_EXCLUDED_FRACTION * self.total_cells

    def as_dict(self) -> dict:
        d = asdict(self)
        d["per_seed"] = {str(n): v for n, v in self.per_seed.items()}
        d["excluded"] = [{"N": n, "seed": s, "reason": r} for n, s, r in self.excluded]
        d["valid"] = self.valid
        d["kind"] = "convergence"
        return d

    def summary_rows(self):
        return [(n, e, s) for n, e, s in zip(self.N_values, self.mean_error, self.stderr)]

    def long_rows(self):
        for n in self.N_values:
            for seed, e in zip(self.seeds, self.per_seed[n]):
                yield n, seed, e


def _convergence_cell(args):
    spec, scheme, n, seed, ref_states = args
    try:
        rec = simulate(spec, scheme, n, seed)
    except NumericalError as err:
        return None, str(err)
    diff = ref_states[rec.steps] - rec.states
    errs = np.real(np.einsum("kij,kji->k", diff, diff))
    return errs, None


def convergence_study(spec: ModelSpec, scheme: SchemeConfig, N_values, seeds=DEFAULT_SEEDS, T: float | None = None,
                      dt: float | None = None, workers: int = 0, reference: ReferenceSolution | None = None
                      ) -> ConvergenceReport:
    """sup over the recording grid of tr((m_t - m_hat_t)^2), averaged over seeds, per N."""
    ns, ss = check_study_grid(N_values, seeds)
    scheme = scheme.with_(T=scheme.T if T is None else T, dt=scheme.dt if dt is None else dt)
    ref = reference if reference is not None else solve_meanfield_reference(spec, scheme.T, scheme.dt)
    cells = [(spec, scheme, n, s, ref.states) for n in ns for s in ss]
    results = _map(_convergence_cell, cells, workers)
    per_seed, mean_err, stderr, sup_mean, excluded = {}, [], [], [], []
    it = iter(results)
    for n in ns:
        sups, curves = [], []
        for s in ss:
            errs, why = next(it)
            if errs is None:
                excluded.append((n, s, why))
                sups.append(float("nan"))
                continue
            sups.append(float(errs.max()))
            curves.append(errs)
        per_seed[n] = sups
        m, se = _mean_stderr([v for v in sups if np.isfinite(v)])
        mean_err.append(m)
        stderr.append(se)
        sup_mean.append(float(np.mean(curves, axis=0).max()) if curves else float("nan"))
    slope, intercept, r2 = _fit_or_nan(ns, mean_err)
    return ConvergenceReport(ns, ss, scheme.dt, scheme.T, scheme.mode, scheme.diffusion_variant, mean_err, stderr,
                             sup_mean, per_seed, slope, intercept, r2, excluded)


# synchronous coupling -----------------------------------------------------------


@dataclass
class CouplingReport:
    N_values: list[int]
    seeds: list[int]
    dt: float
    T: float
    mode: str
    variant: str
    sup_distance: list[float]
    pooled: list[float]
    pooled_stderr: list[float]
    slope: float
    intercept: float
    r2: float
    pooled_slope: float
    excluded: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def total_cells(self) -> int:
        return len(self.N_values) * len(self.seeds)

    @property
    def valid(self) -> bool:
        return len(self.excluded) <= MAX_EXCLUDED_FRACTION * self.total_cells

    def as_dict(self) -> dict:
        d = asdict(self)
        d["excluded"] = [{"N": n, "seed": s, "reason": r} for n, s, r in self.excluded]
        d["valid"] = self.valid
        d["kind"] = "coupling"
        return d

    def summary_rows(self):
        return [(n, e, s) for n, e, s in zip(self.N_values, self.sup_distance, self.pooled_stderr)]

    def long_rows(self):
        for n, e, p in zip(self.N_values, self.sup_distance, self.pooled):
            yield n, "sup_particle", e
            yield n, "pooled", p


def coupled_distances(spec: ModelSpec, scheme: SchemeConfig, n: int, seed: int, m_fields: np.ndarray) -> np.ndarray:
    """Per-step, per-particle |psi_l - psi_tilde_l|^2 for one synchronously coupled pair of ensembles.

    Both ensembles use the same seed and particle ids, so every particle sees
    identical increments; only the mean-field operator differs.
    """
    inter = ParticleEnsemble.start(spec, scheme, n, seed)
    iid = ParticleEnsemble.start(spec, scheme, n, seed)
    steps = scheme.steps
    out = np.zeros((steps + 1, n))
    for k in range(steps):
        step_ensemble(inter)
        step_ensemble(iid, m_fields[k])
        diff = (inter.states - iid.states).reshape(n, -1)
        out[k + 1] = np.sum(diff.real**2 + diff.imag**2, axis=1)
    return out


def _coupling_cell(args):
    spec, scheme, n, seed, m_fields = args
    try:
        return coupled_distances(spec, scheme, n, seed, m_fields), None
    except NumericalError as err:
        return None, str(err)


def coupled_chaos_study(spec: ModelSpec, scheme: SchemeConfig, N_values, seeds=DEFAULT_SEEDS, T: float | None = None,
                        dt: float | None = None, workers: int = 0, reference: ReferenceSolution | None = None
                        ) -> CouplingReport:
    """Mean-square distance between interacting particles and their i.i.d. McKean-Vlasov twins.

    ``sup_distance`` is the sup over particle index and grid time of the seed
    average, and carries the fitted slope. ``pooled`` also averages over the
    (exchangeable) particles before the sup over time; it has far less
    selection bias at large N and gets its own slope.
    """
    ns, ss = check_study_grid(N_values, seeds)
    scheme = scheme.with_(T=scheme.T if T is None else T, dt=scheme.dt if dt is None else dt)
    ref = reference if reference is not None else solve_meanfield_reference(spec, scheme.T, scheme.dt)
    m_fields = reference_mean_fields(spec, ref, scheme.steps)
    cells = [(spec, scheme, n, s, m_fields) for n in ns for s in ss]
    results = _map(_coupling_cell, cells, workers)
    pooled, pooled_se, sup_part, excluded = [], [], [], []
    it = iter(results)
    for n in ns:
        runs = []
        for s in ss:
            dist, why = next(it)
            if dist is None:
                excluded.append((n, s, why))
            else:
                runs.append(dist)
        if not runs:
            pooled.append(float("nan"))
            pooled_se.append(float("nan"))
            sup_part.append(float("nan"))
            continue
        arr = np.stack(runs)  # (seeds, steps+1, n)
        curve = arr.mean(axis=(0, 2))
        k = int(np.argmax(curve))
        pooled.append(float(curve[k]))
        per_seed_at_k = arr[:, k, :].mean(axis=1)
        pooled_se.append(float(per_seed_at_k.std(ddof=1) / np.sqrt(len(runs))) if len(runs) > 1 else 0.0)
        sup_part.append(float(arr.mean(axis=0).max()))
    slope, intercept, r2 = _fit_or_nan(ns, sup_part)
    pooled_slope = _fit_or_nan(ns, pooled)[0]
    return CouplingReport(ns, ss, scheme.dt, scheme.T, scheme.mode, scheme.diffusion_variant, sup_part, pooled,
                          pooled_se, slope, intercept, r2, pooled_slope, excluded)


# exact N-body comparison ----------------------------------------------------------


@dataclass
class NBodyTable:
    N_values: list[int]
    times: np.ndarray
    discrepancy: dict[int, np.ndarray]
    monotone_at_T: bool

    def at_T(self) -> dict[int, float]:
        return {n: float(v[-1]) for n, v in self.discrepancy.items()}

    def as_dict(self) -> dict:
        return {
            "kind": "nbody",
            "N_values": self.N_values,
            "discrepancy_at_T": {str(n): v for n, v in self.at_T().items()},
            "max_discrepancy": {str(n): float(v.max()) for n, v in self.discrepancy.items()},
            "monotone_at_T": self.monotone_at_T,
        }

    def long_rows(self):
        for n in self.N_values:
            for t, v in zip(self.times, self.discrepancy[n]):
                yield n, t, v


def chaos_vs_nbody(spec: ModelSpec, N_values=(1, 2, 3, 4), T: float = 1.0, dt: float = 1e-3,
                   reference: ReferenceSolution | None = None) -> NBodyTable:
    """HS distance between the one-site marginal of the exact N-body state and m_t."""
    ns = [int(n) for n in N_values]
    if ns != sorted(ns) or not ns or ns[0] < 1:
        raise ValueError("N_values must be increasing positive integers")
    ref = reference if reference is not None else solve_meanfield_reference(spec, T, dt)
    d = spec.d
    table = {}
    for n in ns:
        sol = solve_nbody_reference(spec, n, T, dt)
        marg = np.array([partial_trace(r, 1, n, d) for r in sol.states])
        table[n] = np.sqrt(np.real(np.einsum("kij,kij->k", marg - ref.states, (marg - ref.states).conj())))
    # N = 1 has no pair terms at all, so the trend is only meaningful from N = 2 on
    at_t = [table[n][-1] for n in ns if n >= 2]
    monotone = all(b <= a for a, b in zip(at_t, at_t[1:]))
    return NBodyTable(ns, ref.times, table, monotone)


# Euler weak bias ---------------------------------------------------------------


@dataclass
class BiasReport:
    dts: list[float]
    M: int
    seeds: list[int]
    T: float
    errors: list[float]
    stat_error: list[float]

    @property
    def ratios(self) -> list[float]:
        return [a / b for a, b in zip(self.errors, self.errors[1:])]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = self.ratios
        d["kind"] = "euler-bias"
        return d


def _bias_cell(args):
    spec, scheme, M, seed, ref_states = args
    rec = simulate_mckean_iid(spec, scheme, M, seed, ref_states)
    return rec.final_state - ref_states[-1]


def euler_bias_study(spec: ModelSpec, scheme: SchemeConfig, dts=(2e-3, 1e-3), M: int = 100_000, seeds=range(16),
                     T: float = 1.0, workers: int = 0) -> BiasReport:
    """HS norm of the seed-averaged (mean state - m_T) for each dt.

    Differences are averaged before the norm so the statistical floor shrinks
    like 1/sqrt(M * seeds) and the weak Euler bias is what remains.
    """
    ss = [int(s) for s in seeds]
    errors, stat = [], []
    for dt in dts:
        sc = scheme.with_(dt=float(dt), T=float(T))
        sc = sc.with_(record_stride=sc.steps)
        ref = solve_meanfield_reference(spec, sc.T, sc.dt)
        diffs = np.array(_map(_bias_cell, [(spec, sc, M, s, ref.states) for s in ss], workers))
        mean = diffs.mean(axis=0)
        errors.append(hs_norm(mean))
        # standard error of the averaged matrix, in HS norm
        stat.append(float(np.sqrt(np.sum(np.abs(diffs - mean) ** 2) / (len(ss) - 1) / len(ss))) if len(ss) > 1 else float("nan"))
    return BiasReport([float(x) for x in dts], int(M), ss, float(T), errors, stat)


__all__ = [
    "BiasReport",
    "ConvergenceReport",
    "CouplingReport",
    "NBodyTable",
    "StudyError",
    "chaos_vs_nbody",
    "check_study_grid",
    "convergence_study",
    "coupled_chaos_study",
    "coupled_distances",
    "euler_bias_study",
    "fit_loglog_slope",
]
