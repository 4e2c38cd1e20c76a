"""Euler-Maruyama steppers for mean-field quantum trajectories and the
interacting particle system that approximates them.

The ensemble keeps all particle states in one array so that a step is a
single kernel call: the mean-field operator is computed once from the
pre-step ensemble, every particle is advanced with its own counter-based
increment, and the result depends only on (spec, scheme, seed, particle ids).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .generators import ModelSpec, NumericalError, ReferenceSolution, n_steps
from .meanfield import apply_kernel, empirical_density
from .noise import NoiseStream
from .operators import DimensionError, PureState, as_matrix, bloch_vector, hermiticity_violation

NORMALIZED_PURE = "normalized-pure"
UNNORMALIZED_PURE = "unnormalized-pure"
NORMALIZED_DENSITY = "normalized-density"
MODES = (NORMALIZED_PURE, UNNORMALIZED_PURE, NORMALIZED_DENSITY)
VARIANTS = tuple(kernels.VARIANT_CODES)
TRACE_UNDERFLOW = 1e-9


@dataclass(frozen=True)
class SchemeConfig:
    mode: str = NORMALIZED_PURE
    diffusion_variant: str = "algorithm1"
    renormalize_each_step: bool = True
    dt: float = 1e-3
    T: float = 1.0
    record_stride: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.diffusion_variant not in VARIANTS:
            raise ValueError(f"unknown diffusion variant {self.diffusion_variant!r}; expected one of {VARIANTS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("T must be at least dt")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be >= 1")
        n_steps(self.T, self.dt)

    @property
    def steps(self) -> int:
        return n_steps(self.T, self.dt)

    @property
    def variant_code(self) -> int:
        return kernels.VARIANT_CODES[self.diffusion_variant]

    @property
    def is_density(self) -> bool:
        return self.mode == NORMALIZED_DENSITY

    def with_(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)


def _operators(spec: ModelSpec):
    L = np.ascontiguousarray(spec.L)
    return L, np.ascontiguousarray(L.conj().T @ L)


def _heff(spec: ModelSpec, aeff) -> np.ndarray:
    aeff = as_matrix(aeff, "mean-field operator")
    if aeff.shape != spec.H.shape:
        raise DimensionError(f"mean-field operator has shape {aeff.shape}, expected {spec.H.shape}")
    return np.ascontiguousarray(spec.H + aeff)


# single-particle steppers ---------------------------------------------------


def euler_step_normalized_pure(psi, aeff, spec: ModelSpec, scheme: SchemeConfig, dW: float) -> PureState:
    """One Euler step of the normalized (psi) trajectory; ``dW`` is the Wiener increment."""
    x = np.ascontiguousarray(np.asarray(psi, dtype=complex).reshape(1, -1))
    L, LdL = _operators(spec)
    out = np.empty_like(x)
    norms = np.empty(1)
    kernels.step_normalized(
        x, _heff(spec, aeff), L, LdL, np.array([float(dW)]), scheme.dt, scheme.variant_code,
        scheme.renormalize_each_step, out, norms,
    )
    if not np.isfinite(norms[0]) or norms[0] == 0.0:
        raise NumericalError(f"state norm collapsed to {norms[0]!r}")
    return PureState(out[0], normalized=bool(scheme.renormalize_each_step))


def euler_step_unnormalized_pure(chi, aeff, spec: ModelSpec, scheme: SchemeConfig, dY: float) -> PureState:
    x = np.ascontiguousarray(np.asarray(chi, dtype=complex).reshape(1, -1))
    L, LdL = _operators(spec)
    out = np.empty_like(x)
    norms = np.empty(1)
    kernels.step_unnormalized(x, _heff(spec, aeff), L, LdL, np.array([float(dY)]), scheme.dt, out, norms)
    if not np.isfinite(norms[0]):
        raise NumericalError("non-finite unnormalized state")
    return PureState(out[0], normalized=False)


def euler_step_density(gamma, aeff, spec: ModelSpec, scheme: SchemeConfig, dW: float) -> np.ndarray:
    g = np.ascontiguousarray(as_matrix(gamma, "gamma")[None, :, :])
    L, LdL = _operators(spec)
    out = np.empty_like(g)
    traces = np.empty(1)
    kernels.step_density(
        g, _heff(spec, aeff), L, LdL, np.array([float(dW)]), scheme.dt, scheme.renormalize_each_step, out, traces
    )
    if not np.isfinite(traces[0]) or abs(traces[0]) < TRACE_UNDERFLOW:
        raise NumericalError(f"trace underflow ({traces[0]!r})")
    return out[0]


# ensembles ------------------------------------------------------------------


class ParticleEnsemble:
    """N particle states advanced together on a shared time grid."""

    def __init__(self, spec: ModelSpec, scheme: SchemeConfig, states: np.ndarray, seed: int,
                 particle_ids=None, step_index: int = 0):
        self.spec = spec
        self.scheme = scheme
        self.states = np.ascontiguousarray(states, dtype=complex)
        expected = 3 if scheme.is_density else 2
        if self.states.ndim != expected or self.states.shape[1] != spec.d:
            raise DimensionError(f"states have shape {self.states.shape} for mode {scheme.mode}")
        if self.states.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        ids = np.arange(self.N) if particle_ids is None else np.asarray(particle_ids)
        if ids.shape != (self.N,):
            raise ValueError("particle_ids must have one entry per particle")
        self.noise = NoiseStream(seed, ids)
        self.step_index = int(step_index)
        self._L, self._LdL = _operators(spec)
        self._next = np.empty_like(self.states)
        self._norms = np.empty(self.N)

    @classmethod
    def start(cls, spec: ModelSpec, scheme: SchemeConfig, n: int, seed: int, particle_ids=None) -> "ParticleEnsemble":
        if n < 1:
            raise ValueError("N must be >= 1")
        if scheme.is_density:
            states = np.repeat(spec.initial_density[None, :, :], n, axis=0)
        else:
            states = np.repeat(spec.initial_vector()[None, :], n, axis=0)
        return cls(spec, scheme, states, seed, particle_ids)

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def seed(self) -> int:
        return self.noise.seed

    @property
    def particle_ids(self) -> np.ndarray:
        return self.noise.particle_ids

    @property
    def time(self) -> float:
        return self.step_index * self.scheme.dt

    def empirical_state(self) -> np.ndarray:
        """(1/N) sum of particle projectors (raw average in unnormalized mode)."""
        if self.scheme.is_density:
            return self.states.mean(axis=0)
        return empirical_density(self.states)

    def mean_field(self) -> np.ndarray:
        return apply_kernel(self.spec.kernel, self.empirical_state())

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.spec, self.scheme, self.states.copy(), self.seed, self.particle_ids, self.step_index)


def step_ensemble(ens: ParticleEnsemble, mean_field: np.ndarray | None = None) -> ParticleEnsemble:
    """Advance every particle by one step, in place.

    ``mean_field`` defaults to A of the current empirical state; pass a fixed
    operator to drive independent McKean-Vlasov copies instead.
    """
    scheme = ens.scheme
    aeff = ens.mean_field() if mean_field is None else mean_field
    heff = _heff(ens.spec, aeff)
    dW = ens.noise.increments(ens.step_index, scheme.dt)
    k = ens.step_index
    if scheme.mode == NORMALIZED_PURE:
        kernels.step_normalized(ens.states, heff, ens._L, ens._LdL, dW, scheme.dt, scheme.variant_code,
                                scheme.renormalize_each_step, ens._next, ens._norms)
        bad = ~np.isfinite(ens._norms) | (ens._norms == 0.0)
        what = "state norm collapsed"
    elif scheme.mode == UNNORMALIZED_PURE:
        kernels.step_unnormalized(ens.states, heff, ens._L, ens._LdL, dW, scheme.dt, ens._next, ens._norms)
        bad = ~np.isfinite(ens._norms)
        what = "non-finite unnormalized state"
    else:
        kernels.step_density(ens.states, heff, ens._L, ens._LdL, dW, scheme.dt, scheme.renormalize_each_step,
                             ens._next, ens._norms)
        bad = ~np.isfinite(ens._norms) | (np.abs(ens._norms) < TRACE_UNDERFLOW)
        what = "trace underflow"
    if bad.any():
        l = int(np.flatnonzero(bad)[0])
        err = NumericalError(f"{what} for particle {int(ens.particle_ids[l])} at step {k + 1}",
                             step=k + 1, time=(k + 1) * scheme.dt)
        err.particle = int(ens.particle_ids[l])
        raise err
    ens.states, ens._next = ens._next, ens.states
    ens.step_index = k + 1
    return ens


# recorded runs --------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    steps: np.ndarray
    times: np.ndarray
    states: np.ndarray
    N: int
    seed: int
    scheme: SchemeConfig
    violations: dict = field(default_factory=dict)
    failed_step: int | None = None
    ensemble: ParticleEnsemble | None = field(default=None, repr=False)

    @property
    def traces(self) -> np.ndarray:
        return np.real(np.trace(self.states, axis1=1, axis2=2))

    @property
    def purities(self) -> np.ndarray:
        return np.real(np.einsum("kij,kji->k", self.states, self.states))

    def bloch(self) -> np.ndarray:
        return np.array([bloch_vector(m) for m in self.states])

    def weight_normalized(self) -> np.ndarray:
        return self.states / self.traces[:, None, None]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class _Recorder:
    def __init__(self, ens: ParticleEnsemble, steps: int, stride: int):
        self.ens, self.stride = ens, stride
        self.last = steps
        self.ks: list[int] = []
        self.ms: list[np.ndarray] = []
        self.viol = {"max_norm_error": 0.0, "max_hermiticity_error": 0.0, "max_trace_error": 0.0,
                     "min_eigenvalue": 1.0}

    def maybe(self, k: int) -> None:
        if k % self.stride and k != self.last:
            return
        ens = self.ens
        m = ens.empirical_state()
        self.ks.append(k)
        self.ms.append(m)
        v = self.viol
        v["max_hermiticity_error"] = max(v["max_hermiticity_error"], hermiticity_violation(m))
        v["min_eigenvalue"] = min(v["min_eigenvalue"], float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]))
        if ens.scheme.mode != UNNORMALIZED_PURE:
            v["max_trace_error"] = max(v["max_trace_error"], abs(np.trace(m) - 1.0))
        if ens.scheme.mode == NORMALIZED_PURE:
            err = np.max(np.abs(np.linalg.norm(ens.states, axis=1) - 1.0))
            v["max_norm_error"] = max(v["max_norm_error"], float(err))

    def record(self, failed_step=None) -> TrajectoryRecord:
        ens = self.ens
        d = ens.spec.d
        ks = np.array(self.ks, dtype=np.int64)
        states = np.array(self.ms, dtype=complex).reshape(-1, d, d)
        return TrajectoryRecord(ks, ks * ens.scheme.dt, states, ens.N, ens.seed, ens.scheme, dict(self.viol),
                                failed_step, ens)


def _run(ens: ParticleEnsemble, mean_fields=None) -> TrajectoryRecord:
    steps = ens.scheme.steps
    rec = _Recorder(ens, steps, int(ens.scheme.record_stride))
    rec.maybe(0)
    for k in range(steps):
        try:
            step_ensemble(ens, None if mean_fields is None else mean_fields[k])
        except NumericalError as err:
            err.record = rec.record(failed_step=err.step)
            raise
        rec.maybe(k + 1)
    return rec.record()


def simulate(spec: ModelSpec, scheme: SchemeConfig, N: int, seed: int, particle_ids=None) -> TrajectoryRecord:
    """Interacting N-particle run; records the empirical state every ``record_stride`` steps."""
    return _run(ParticleEnsemble.start(spec, scheme, N, seed, particle_ids))


def reference_mean_fields(spec: ModelSpec, m_ref, steps: int) -> np.ndarray:
    """A^{m_ref(t_k)} for k = 0 .. steps-1 on the simulation grid."""
    states = m_ref.states if isinstance(m_ref, ReferenceSolution) else np.asarray(m_ref, dtype=complex)
    if states.shape[0] < steps:
        raise ValueError(f"reference has {states.shape[0]} grid points, need at least {steps}")
    return np.array([apply_kernel(spec.kernel, states[k]) for k in range(steps)])


def simulate_mckean_iid(spec: ModelSpec, scheme: SchemeConfig, M: int, seed: int, m_ref,
                        particle_ids=None) -> TrajectoryRecord:
    """M independent copies whose drift uses the reference law instead of the empirical one."""
    ens = ParticleEnsemble.start(spec, scheme, M, seed, particle_ids)
    return _run(ens, reference_mean_fields(spec, m_ref, scheme.steps))
