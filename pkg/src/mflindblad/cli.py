"""Command-line entry point: ``mflindblad <subcommand> --config PATH [overrides]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 invalid study.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .config import ConfigError, SimulationConfig, load_config, shipped_config_path
from .experiments import StudyError, chaos_vs_nbody, convergence_study, coupled_chaos_study, euler_bias_study
from .generators import NumericalError, solve_meanfield_reference
from .io import write_csv, write_json, write_reference_csv, write_trajectory_csv
from .meanfield import validate_kernel
from .operators import hs_norm
from .trajectories import simulate, simulate_mckean_iid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STUDY = 4


def _meta(cfg: SimulationConfig, **extra) -> dict:
    sc = cfg.scheme
    meta = {
        "config": cfg.source,
        "dt": sc.dt,
        "T": sc.T,
        "mode": sc.mode,
        "variant": sc.diffusion_variant,
        "renormalize_each_step": sc.renormalize_each_step,
        "record_stride": sc.record_stride,
        "backend": kernels.BACKEND,
        "version": __version__,
    }
    meta.update(extra)
    return meta


def _wants(cfg: SimulationConfig, fmt: str) -> bool:
    return fmt in cfg.output.formats


def _out(cfg: SimulationConfig) -> Path:
    path = Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _say(msg: str) -> None:
    print(msg, flush=True)


def cmd_validate(cfg: SimulationConfig) -> int:
    rep = validate_kernel(cfg.spec.kernel)
    for name, value in rep.as_dict().items():
        _say(f"{name}: {value}")
    _say("config OK" if rep.passed else "kernel validation FAILED")
    return EXIT_OK if rep.passed else EXIT_CONFIG


def cmd_reference(cfg: SimulationConfig) -> int:
    t0 = time.perf_counter()
    ref = solve_meanfield_reference(cfg.spec, cfg.scheme.T, cfg.scheme.dt)
    out = _out(cfg)
    if _wants(cfg, "csv"):
        _say(f"wrote {write_reference_csv(out / 'reference.csv', ref)}")
    if _wants(cfg, "json"):
        meta = _meta(cfg, steps=len(ref.times) - 1, wall_clock=time.perf_counter() - t0,
                     violations=ref.violations(), warnings=ref.warnings)
        _say(f"wrote {write_json(out / 'reference.json', meta)}")
    return EXIT_OK


def _write_record(cfg, rec, name, t0, **extra) -> None:
    out = _out(cfg)
    if _wants(cfg, "csv"):
        _say(f"wrote {write_trajectory_csv(out / f'{name}.csv', rec, cfg.output.write_entries)}")
    if _wants(cfg, "json"):
        meta = _meta(cfg, seed=rec.seed, N=rec.N, wall_clock=time.perf_counter() - t0,
                     violations=rec.violations, failed_step=rec.failed_step, **extra)
        _say(f"wrote {write_json(out / f'{name}.json', meta)}")


def cmd_simulate(cfg: SimulationConfig) -> int:
    t0 = time.perf_counter()
    try:
        rec = simulate(cfg.spec, cfg.scheme, cfg.run.N, cfg.run.seed)
    except NumericalError as err:
        partial = getattr(err, "record", None)
        if partial is not None:
            _write_record(cfg, partial, "trajectory", t0, error=str(err))
        raise
    _write_record(cfg, rec, "trajectory", t0)
    return EXIT_OK


def cmd_mckean(cfg: SimulationConfig) -> int:
    t0 = time.perf_counter()
    ref = solve_meanfield_reference(cfg.spec, cfg.scheme.T, cfg.scheme.dt)
    rec = simulate_mckean_iid(cfg.spec, cfg.scheme, cfg.run.M, cfg.run.seed, ref)
    hs = hs_norm(rec.final_state - ref.states[rec.steps[-1]])
    _write_record(cfg, rec, "mckean", t0, M=cfg.run.M, hs_distance_at_T=hs)
    _say(f"HS distance to reference at T: {hs:.6g}")
    return EXIT_OK


def _emit_study(cfg, rep, name, summary_header, long_header) -> int:
    out = _out(cfg)
    if _wants(cfg, "csv"):
        _say(f"wrote {write_csv(out / f'{name}.csv', summary_header, rep.summary_rows())}")
        _say(f"wrote {write_csv(out / f'{name}_long.csv', long_header, rep.long_rows())}")
    if _wants(cfg, "json"):
        _say(f"wrote {write_json(out / f'{name}.json', _meta(cfg, **rep.as_dict()))}")
    _say(f"slope {rep.slope:.4f} (r^2 {rep.r2:.4f}), excluded cells {len(rep.excluded)}/{rep.total_cells}")
    if not rep.valid:
        _say("study INVALID: too many failed cells")
        return EXIT_STUDY
    return EXIT_OK


def cmd_converge(cfg: SimulationConfig) -> int:
    rep = convergence_study(cfg.spec, cfg.scheme, cfg.run.N_values, cfg.run.seeds, workers=cfg.run.workers)
    return _emit_study(cfg, rep, "convergence", ["N", "mean_error", "stderr"], ["N", "seed", "sup_error"])


def cmd_chaos(cfg: SimulationConfig) -> int:
    rep = coupled_chaos_study(cfg.spec, cfg.scheme, cfg.run.N_values, cfg.run.seeds, workers=cfg.run.workers)
    return _emit_study(cfg, rep, "coupling", ["N", "sup_distance", "pooled_stderr"], ["N", "estimator", "distance"])


def cmd_nbody(cfg: SimulationConfig) -> int:
    table = chaos_vs_nbody(cfg.spec, cfg.run.nbody_N_values, cfg.scheme.T, cfg.scheme.dt)
    out = _out(cfg)
    if _wants(cfg, "csv"):
        _say(f"wrote {write_csv(out / 'nbody_long.csv', ['N', 't', 'discrepancy'], table.long_rows())}")
        rows = [(n, v) for n, v in table.at_T().items()]
        _say(f"wrote {write_csv(out / 'nbody.csv', ['N', 'discrepancy_at_T'], rows)}")
    if _wants(cfg, "json"):
        _say(f"wrote {write_json(out / 'nbody.json', _meta(cfg, **table.as_dict()))}")
    for n, v in table.at_T().items():
        _say(f"N={n}: discrepancy at T = {v:.6g}")
    return EXIT_OK


def cmd_bias(cfg: SimulationConfig, dts) -> int:
    rep = euler_bias_study(cfg.spec, cfg.scheme, dts, cfg.run.M, cfg.run.seeds, cfg.scheme.T, cfg.run.workers)
    out = _out(cfg)
    if _wants(cfg, "csv"):
        _say(f"wrote {write_csv(out / 'bias.csv', ['dt', 'hs_error', 'stat_error'], zip(rep.dts, rep.errors, rep.stat_error))}")
    if _wants(cfg, "json"):
        _say(f"wrote {write_json(out / 'bias.json', _meta(cfg, **rep.as_dict()))}")
    for dt, e in zip(rep.dts, rep.errors):
        _say(f"dt={dt:g}: HS error {e:.6g}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "reference": cmd_reference,
    "simulate": cmd_simulate,
    "mckean": cmd_mckean,
    "converge": cmd_converge,
    "chaos": cmd_chaos,
    "nbody": cmd_nbody,
    "bias": cmd_bias,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mflindblad", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", default=str(shipped_config_path()),
                       help="JSON config (default: the shipped qubit example)")
        s.add_argument("--N", type=int)
        s.add_argument("--M", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--T", type=float)
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, help="numba threads (never changes results)")
        if name == "bias":
            s.add_argument("--dts", type=float, nargs="+", default=[2e-3, 1e-3])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(N=args.N, seed=args.seed, dt=args.dt, T=args.T,
                                                       out=args.out, M=args.M)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    kernels.set_num_threads(args.threads)
    try:
        if args.command == "bias":
            return cmd_bias(cfg, args.dts)
        return COMMANDS[args.command](cfg)
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StudyError as err:
        print(f"invalid study: {err}", file=sys.stderr)
        return EXIT_STUDY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
