"""JSON run configuration: parsing, validation and command-line overrides.

Matrices and vectors are written as nested lists of ``[re, im]`` pairs, row
major, so ``H[x-1][y-1]`` holds entry (x, y).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .generators import ModelSpec, check_density
from .meanfield import InteractionKernel, validate_kernel
from .operators import HERMITIAN_TOL, hermiticity_violation
from .trajectories import MODES, NORMALIZED_DENSITY, VARIANTS, SchemeConfig

SCHEMA_VERSION = 1
FORMATS = ("csv", "json")
RANK_ONE_TOL = 1e-10


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration files."""


def _complex(entry, where: str) -> complex:
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return complex(entry)
    if (isinstance(entry, (list, tuple)) and len(entry) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry)):
        return complex(entry[0], entry[1])
    raise ConfigError(f"{where}: expected [re, im] pair, got {entry!r}")


def parse_vector(data, where: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{where}: expected a non-empty list")
    return np.array([_complex(v, f"{where}[{i}]") for i, v in enumerate(data)], dtype=complex)


def parse_matrix(data, where: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ConfigError(f"{where}: expected a nested list of rows")
    width = len(data[0])
    if any(len(r) != width for r in data):
        raise ConfigError(f"{where}: ragged rows")
    m = np.array([[_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(data)],
                 dtype=complex)
    if shape is not None and m.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {m.shape}")
    return m


def matrix_literal(m) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in m]
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


@dataclass(frozen=True)
class RunConfig:
    N: int = 64
    seed: int = 0
    seeds: tuple[int, ...] = tuple(range(16))
    N_values: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    M: int = 10_000
    nbody_N_values: tuple[int, ...] = (1, 2, 3, 4)
    workers: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    formats: tuple[str, ...] = FORMATS
    write_entries: bool = True


@dataclass(frozen=True)
class SimulationConfig:
    spec: ModelSpec
    scheme: SchemeConfig
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    schema_version: int = SCHEMA_VERSION
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def with_overrides(self, N=None, seed=None, dt=None, T=None, out=None, M=None) -> "SimulationConfig":
        cfg = self
        run = cfg.run
        if N is not None:
            if N < 1:
                raise ConfigError("run.N: must be >= 1")
            run = replace(run, N=int(N))
        if seed is not None:
            run = replace(run, seed=int(seed))
        if M is not None:
            if M < 1:
                raise ConfigError("run.M: must be >= 1")
            run = replace(run, M=int(M))
        changes = {}
        if dt is not None:
            changes["dt"] = float(dt)
        if T is not None:
            changes["T"] = float(T)
        try:
            scheme = cfg.scheme.with_(**changes) if changes else cfg.scheme
        except ValueError as err:
            raise ConfigError(f"scheme: {err}") from err
        output = cfg.output if out is None else replace(cfg.output, directory=str(out))
        return replace(cfg, run=run, scheme=scheme, output=output)


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in obj:
        raise ConfigError(f"{where}.{key}: missing")
    return obj[key]


def _int_list(value, where: str) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{where}: expected a list of integers")
    return tuple(value)


def _model(data: dict, mode: str) -> ModelSpec:
    d = _require(data, "d", "model")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ConfigError("model.d: expected a positive integer")
    H = parse_matrix(_require(data, "H", "model"), "model.H", (d, d))
    L = parse_matrix(_require(data, "L", "model"), "model.L", (d, d))
    a = parse_matrix(_require(data, "kernel", "model"), "model.kernel", (d * d, d * d))
    herm = hermiticity_violation(H)
    if herm > HERMITIAN_TOL:
        raise ConfigError(f"model.H: Hermiticity check failed (max violation {herm:.3e})")
    kernel = InteractionKernel(d, a)
    report = validate_kernel(kernel)
    if not report.passed:
        raise ConfigError("model.kernel: " + "; ".join(report.failures()))
    init = _require(data, "initial", "model")
    if not isinstance(init, dict):
        raise ConfigError("model.initial: expected an object")
    has_psi, has_rho = "psi0" in init, "rho0" in init
    if has_psi == has_rho:
        raise ConfigError("model.initial: exactly one of psi0 / rho0 is required")
    psi0 = rho0 = None
    if has_psi:
        psi0 = parse_vector(init["psi0"], "model.initial.psi0")
        if psi0.shape != (d,):
            raise ConfigError(f"model.initial.psi0: expected length {d}")
        err = abs(np.linalg.norm(psi0) - 1.0)
        if err > 1e-9:
            raise ConfigError(f"model.initial.psi0: normalization check failed (|norm - 1| = {err:.3e})")
    else:
        rho0 = parse_matrix(init["rho0"], "model.initial.rho0", (d, d))
        try:
            check_density(rho0)
        except ValueError as e:
            raise ConfigError(f"model.initial.rho0: {e}") from e
        if mode != NORMALIZED_DENSITY:
            ev = np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T))
            if ev[-2:-1].size and ev[-2] > RANK_ONE_TOL:
                raise ConfigError(f"model.initial.rho0: rank-1 check failed for pure-state mode "
                                  f"(second eigenvalue {ev[-2]:.3e})")
    try:
        return ModelSpec(H=H, L=L, kernel=kernel, psi0=psi0, rho0=rho0)
    except ValueError as e:
        raise ConfigError(f"model: {e}") from e


def _scheme(data: dict) -> SchemeConfig:
    if not isinstance(data, dict):
        raise ConfigError("scheme: expected an object")
    known = {"mode", "diffusion_variant", "renormalize_each_step", "dt", "T", "record_stride"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"scheme: unknown field(s) {sorted(extra)}")
    if data.get("mode", MODES[0]) not in MODES:
        raise ConfigError(f"scheme.mode: expected one of {MODES}")
    if data.get("diffusion_variant", VARIANTS[0]) not in VARIANTS:
        raise ConfigError(f"scheme.diffusion_variant: expected one of {VARIANTS}")
    try:
        return SchemeConfig(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"scheme: {e}") from e


def _run(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run: expected an object")
    kw = {}
    for key in ("N", "seed", "M", "workers"):
        if key in data:
            v = data[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"run.{key}: expected an integer")
            kw[key] = v
    for key in ("seeds", "N_values", "nbody_N_values"):
        if key in data:
            kw[key] = _int_list(data[key], f"run.{key}")
    if kw.get("N", 1) < 1:
        raise ConfigError("run.N: must be >= 1")
    return RunConfig(**kw)


def _output(data: dict) -> OutputConfig:
    if not isinstance(data, dict):
        raise ConfigError("output: expected an object")
    kw = {}
    if "directory" in data:
        kw["directory"] = str(data["directory"])
    if "formats" in data:
        fmts = data["formats"]
        if not isinstance(fmts, list) or not set(fmts) <= set(FORMATS) or not fmts:
            raise ConfigError(f"output.formats: expected a non-empty subset of {list(FORMATS)}")
        kw["formats"] = tuple(fmts)
    if "write_entries" in data:
        kw["write_entries"] = bool(data["write_entries"])
    return OutputConfig(**kw)


def config_from_dict(data: dict, source: str | None = None) -> SimulationConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    scheme = _scheme(data.get("scheme", {}))
    spec = _model(_require(data, "model", "config"), scheme.mode)
    return SimulationConfig(spec, scheme, _run(data.get("run", {})), _output(data.get("output", {})),
                            SCHEMA_VERSION, source, data)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read ({e.strerror})") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: JSON parse error: {e.msg}") from e
    return config_from_dict(data, str(path))


def shipped_config_path(name: str = "qubit_example.json") -> Path:
    return Path(__file__).parent / "data" / name


def spec_to_dict(spec: ModelSpec) -> dict:
    init = {"psi0": matrix_literal(spec.psi0)} if spec.psi0 is not None else {"rho0": matrix_literal(spec.rho0)}
    return {"d": spec.d, "H": matrix_literal(spec.H), "L": matrix_literal(spec.L),
            "kernel": matrix_literal(spec.kernel.a), "initial": init}
