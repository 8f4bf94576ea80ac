"""Command-line drivers for the standard numerical experiments.

Commands:

* ``propagate``        population trace of a single run
* ``sweep-lambda``     trapping time and efficiency vs reorganization energy
* ``grid-shift-temp``  efficiency on a (site-energy shift x temperature) grid
* ``sweep-temp``       trapping time, efficiency, thermal deviation vs T
* ``bench``            hierarchy-scaling wall-time benchmark

Every command accepts ``--config FILE`` with flat ``key = value`` lines plus
per-field override flags (flags win). Output is CSV preceded by
``#``-prefixed header lines that carry the effective configuration, so every
artifact reparses into the configuration that produced it. With ``--plot`` a
figure is rendered next to the CSV. Exit codes: 0 ok, 2 configuration error,
3 numerical divergence, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .heom import (ConvergenceFailure, PropagationConfig, PropagationDiverged,
                   auto_truncate, propagate, _graph)
from .hierarchy import hierarchy_size
from .model import BathParams, MarkovRates, build_fmo_system, gibbs_state
from .observables import Trajectory, efficiency, thermal_deviation, trapping_time
from .redfield import propagate_redfield


class ConfigError(ValueError):
    """Invalid configuration file or flag combination."""


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one command invocation.

    ``n_max = None`` means automatic truncation at ``auto_tol_ps``. Sweep
    lists are only set for the commands that use them.
    """

    solver: str = "heom"
    lambda_cm1: float = 35.0
    gamma_inv_fs: float = 166.0
    temperature_k: float = 300.0
    gamma_rc_inv_ps: float = 2.5
    gamma_phot_inv_ps: float = 250.0
    site: int = 1
    delta_e_cm1: float = 0.0
    e_rc_cm1: float = 0.0
    add_reorg_to_diagonal: bool = False
    dt_fs: float = 2.5
    n_max: Optional[int] = 8
    auto_tol_ps: float = 0.02
    n_cap: int = 20
    t_end_fs: Optional[float] = None
    residual: Optional[float] = 1e-5
    hard_cap_ps: float = 200.0
    record_stride: int = 1
    precision: str = "double"
    therm_t_end_ps: float = 30.0
    workers: int = 1
    lambdas: Optional[tuple[float, ...]] = None
    sites: Optional[tuple[int, ...]] = None
    delta_e_list: Optional[tuple[float, ...]] = None
    temperatures: Optional[tuple[float, ...]] = None
    n_max_list: Optional[tuple[int, ...]] = None
    steps: int = 1000


_FLOAT, _INT, _BOOL, _STR = "float", "int", "bool", "str"
_OPT_FLOAT, _N_MAX = "opt_float", "n_max"
_FLOATS, _INTS = "float_list", "int_list"

_FIELD_KINDS = {
    "solver": _STR,
    "lambda_cm1": _FLOAT,
    "gamma_inv_fs": _FLOAT,
    "temperature_k": _FLOAT,
    "gamma_rc_inv_ps": _FLOAT,
    "gamma_phot_inv_ps": _FLOAT,
    "site": _INT,
    "delta_e_cm1": _FLOAT,
    "e_rc_cm1": _FLOAT,
    "add_reorg_to_diagonal": _BOOL,
    "dt_fs": _FLOAT,
    "n_max": _N_MAX,
    "auto_tol_ps": _FLOAT,
    "n_cap": _INT,
    "t_end_fs": _OPT_FLOAT,
    "residual": _OPT_FLOAT,
    "hard_cap_ps": _FLOAT,
    "record_stride": _INT,
    "precision": _STR,
    "therm_t_end_ps": _FLOAT,
    "workers": _INT,
    "lambdas": _FLOATS,
    "sites": _INTS,
    "delta_e_list": _FLOATS,
    "temperatures": _FLOATS,
    "n_max_list": _INTS,
    "steps": _INT,
}

#: keys allowed (and ignored) in headers for round-tripping artifacts
_RESERVED_KEYS = frozenset({"version"})


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _BOOL:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == _STR:
            return raw
        if kind == _OPT_FLOAT:
            return None if raw.lower() == "none" else float(raw)
        if kind == _N_MAX:
            return None if raw.lower() == "auto" else int(raw)
        if kind == _FLOATS:
            return tuple(float(x) for x in raw.split(",") if x.strip() != "")
        if kind == _INTS:
            return tuple(int(x) for x in raw.split(",") if x.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise AssertionError(kind)


def _format_value(kind: str, value) -> str:
    if value is None:
        return "auto" if kind == _N_MAX else "none"
    if kind == _BOOL:
        return "true" if value else "false"
    if kind in (_FLOATS, _INTS):
        return ",".join(repr(v) if kind == _FLOATS else str(v) for v in value)
    if kind == _FLOAT or kind == _OPT_FLOAT:
        return repr(float(value))
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines (optionally '#'-prefixed) into fields.

    Unknown keys are rejected with the offending line number; lines without
    '=' are treated as comments.
    """
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip().lstrip("#").strip()
        if not stripped or "=" not in stripped:
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in _RESERVED_KEYS:
            continue
        if key not in _FIELD_KINDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(_FIELD_KINDS[key], raw, f"{source}:{lineno}")
    return out


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=path)


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.solver not in ("heom", "redfield", "both"):
        raise ConfigError(f"unknown solver {cfg.solver!r}")
    if cfg.precision not in ("double", "single"):
        raise ConfigError(f"unknown precision {cfg.precision!r}")
    if not 1 <= cfg.site <= 7:
        raise ConfigError(f"site must be in 1..7, got {cfg.site}")
    if cfg.lambda_cm1 < 0:
        raise ConfigError("lambda_cm1 must be >= 0")
    if cfg.gamma_inv_fs <= 0:
        raise ConfigError("gamma_inv_fs must be > 0")
    if cfg.temperature_k <= 0:
        raise ConfigError("temperature_k must be > 0")
    if cfg.dt_fs <= 0:
        raise ConfigError("dt_fs must be > 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.t_end_fs is None and cfg.residual is None:
        raise ConfigError("need a stop policy: t_end_fs or residual")
    return cfg


def emit_config(cfg: RunConfig) -> list[str]:
    """Canonical ``key = value`` lines; sweep lists appear only when set."""
    lines = [f"version = {__version__}"]
    for f in fields(RunConfig):
        kind = _FIELD_KINDS[f.name]
        value = getattr(cfg, f.name)
        if value is None and kind in (_FLOATS, _INTS):
            continue
        lines.append(f"{f.name} = {_format_value(kind, value)}")
    return lines


# ---------------------------------------------------------------------------
# runs

def _objects(cfg: RunConfig, lambda_cm1=None, temperature_k=None, delta_e=None,
             isolated=False):
    lam = cfg.lambda_cm1 if lambda_cm1 is None else lambda_cm1
    temp = cfg.temperature_k if temperature_k is None else temperature_k
    de = cfg.delta_e_cm1 if delta_e is None else delta_e
    system = build_fmo_system(
        delta_e_cm1=de, e_rc_cm1=cfg.e_rc_cm1,
        reorg_shift_cm1=lam if cfg.add_reorg_to_diagonal else 0.0)
    bath = BathParams.from_timescale(lam, cfg.gamma_inv_fs, temp)
    if isolated:
        rates = MarkovRates.none()
    else:
        rates = MarkovRates.from_inverse_ps(cfg.gamma_rc_inv_ps, cfg.gamma_phot_inv_ps)
    return system, bath, rates


def _prop_config(cfg: RunConfig, **overrides) -> PropagationConfig:
    kwargs = dict(
        dt_fs=cfg.dt_fs,
        n_max=cfg.n_max if cfg.n_max is not None else 0,
        t_end_fs=cfg.t_end_fs,
        residual=cfg.residual,
        hard_cap_fs=1000.0 * cfg.hard_cap_ps,
        record_stride=cfg.record_stride,
        precision=cfg.precision,
    )
    kwargs.update(overrides)
    return PropagationConfig(**kwargs)


def _run_point(cfg: RunConfig, solver: str, lambda_cm1=None, temperature_k=None,
               delta_e=None, site=None, isolated=False, t_end_fs=None,
               record_stride=None, n_max=None) -> tuple[int, Trajectory]:
    """One propagation; returns (n_max_used, trajectory)."""
    system, bath, rates = _objects(cfg, lambda_cm1, temperature_k, delta_e,
                                   isolated=isolated)
    overrides = {}
    if t_end_fs is not None:
        overrides = {"t_end_fs": t_end_fs, "residual": None}
    if record_stride is not None:
        overrides["record_stride"] = record_stride
    pconf = _prop_config(cfg, **overrides)
    which = cfg.site if site is None else site
    if solver == "redfield":
        return 0, propagate_redfield(system, bath, rates, pconf, which)
    n_fixed = n_max if n_max is not None else cfg.n_max
    if n_fixed is None:
        n_used, traj = auto_truncate(system, bath, rates, pconf, which,
                                     tol_ps=cfg.auto_tol_ps, n_cap=cfg.n_cap)
        return n_used, traj
    pconf = replace(pconf, n_max=n_fixed)
    return n_fixed, propagate(system, bath, rates, pconf, which)


def _parallel(points, worker, n_workers):
    """Evaluate worker(point) for each point, preserving point order."""
    if n_workers <= 1:
        return [worker(p) for p in points]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(worker, points))


def cmd_propagate(cfg: RunConfig):
    _, traj = _run_point(cfg, cfg.solver if cfg.solver != "both" else "heom")
    cols = ["t_fs", "p_ground"] + [f"p_site{m}" for m in range(1, 8)] + ["p_RC", "trace"]
    rows = []
    for i, t in enumerate(traj.times_fs):
        p = traj.populations[i]
        rows.append([t, p[0], *p[1:8], p[8], p.sum()])
    return [("", cols, rows)]


def cmd_sweep_lambda(cfg: RunConfig):
    if not cfg.lambdas or not cfg.sites:
        raise ConfigError("sweep-lambda needs 'lambdas' and 'sites'")
    solver = cfg.solver
    if solver == "both":
        raise ConfigError("sweep-lambda runs one solver at a time")
    points = [(lam, site) for lam in cfg.lambdas for site in cfg.sites]

    def worker(point):
        lam, site = point
        n_used, traj = _run_point(cfg, solver, lambda_cm1=lam, site=site)
        return [lam, site, n_used, trapping_time(traj), efficiency(traj)]

    rows = _parallel(points, worker, cfg.workers)
    cols = ["lambda_cm1", "site", "n_max_used", "trapping_time_ps", "efficiency"]
    return [("", cols, rows)]


def cmd_grid_shift_temp(cfg: RunConfig):
    if not cfg.delta_e_list or not cfg.temperatures:
        raise ConfigError("grid-shift-temp needs 'delta_e_list' and 'temperatures'")
    solver = "heom" if cfg.solver == "both" else cfg.solver
    points = [(de, t) for de in cfg.delta_e_list for t in cfg.temperatures]

    def worker(point):
        de, temp = point
        _, traj = _run_point(cfg, solver, temperature_k=temp, delta_e=de)
        return [de, temp, efficiency(traj)]

    rows = _parallel(points, worker, cfg.workers)
    return [("", ["delta_e_cm1", "temperature_k", "efficiency"], rows)]


def cmd_sweep_temp(cfg: RunConfig):
    if not cfg.temperatures:
        raise ConfigError("sweep-temp needs 'temperatures'")
    solvers = ["heom", "redfield"] if cfg.solver == "both" else [cfg.solver]
    outputs = []
    for solver in solvers:
        def worker(temp, solver=solver):
            n_used, traj = _run_point(cfg, solver, temperature_k=temp)
            system, bath, _ = _objects(cfg, temperature_k=temp, isolated=True)
            # the auxiliary isolated run reuses the main run's truncation
            _, iso = _run_point(cfg, solver, temperature_k=temp, isolated=True,
                                t_end_fs=1000.0 * cfg.therm_t_end_ps,
                                record_stride=max(cfg.record_stride, 10),
                                n_max=n_used if solver == "heom" else None)
            idx = np.asarray(system.site_indices)
            stationary = iso.final_rho[np.ix_(idx, idx)]
            dev = thermal_deviation(stationary, gibbs_state(system, temp))
            return [temp, trapping_time(traj), efficiency(traj), dev]

        rows = _parallel(list(cfg.temperatures), worker, cfg.workers)
        cols = ["temperature_k", "trapping_time_ps", "efficiency", "thermal_deviation"]
        outputs.append((solver if len(solvers) > 1 else "", cols, rows))
    return outputs


def cmd_bench(cfg: RunConfig):
    n_list = cfg.n_max_list or (4, 6, 8, 10, 12)
    if cfg.steps < 0:
        raise ConfigError("steps must be >= 0")
    rows = []
    # warm up the compiled kernels so the first timed row is comparable
    if cfg.steps > 0:
        warm = replace(cfg, n_max=0, steps=2)
        _bench_run(warm, 0)
    for n in n_list:
        n_tot = hierarchy_size(7, n)
        if cfg.steps == 0:
            rows.append([n, n_tot, 0.0, 0.0])
            continue
        wall = _bench_run(cfg, n)
        rows.append([n, n_tot, wall, cfg.steps / wall])
    return [("", ["n_max", "n_tot", "wall_seconds", "steps_per_second"], rows)]


def _bench_run(cfg: RunConfig, n_max: int) -> float:
    system, bath, rates = _objects(cfg, isolated=True)
    pconf = _prop_config(cfg, n_max=n_max, t_end_fs=cfg.steps * cfg.dt_fs,
                         residual=None, record_stride=max(1, cfg.steps))
    _graph(system.site_count, n_max)  # enumeration excluded from the timing
    start = time.perf_counter()
    propagate(system, bath, rates, pconf, cfg.site)
    return time.perf_counter() - start


_COMMANDS = {
    "propagate": cmd_propagate,
    "sweep-lambda": cmd_sweep_lambda,
    "grid-shift-temp": cmd_grid_shift_temp,
    "sweep-temp": cmd_sweep_temp,
    "bench": cmd_bench,
}


# ---------------------------------------------------------------------------
# output

def _format_cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(command: str, cfg: RunConfig, cols, rows, stream) -> None:
    stream.write(f"# excitonflow {command}\n")
    for line in emit_config(cfg):
        stream.write(f"# {line}\n")
    stream.write(",".join(cols) + "\n")
    for row in rows:
        stream.write(",".join(_format_cell(x) for x in row) + "\n")


def _output_path(base: str, suffix: str) -> Path:
    path = Path(base)
    if not suffix:
        return path
    return path.with_name(f"{path.stem}.{suffix}{path.suffix or '.csv'}")


# ---------------------------------------------------------------------------
# argument parsing

def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--plot", action="store_true",
                   help="render a figure next to the CSV (requires --out)")
    for flag, key, typ in [
        ("--solver", "solver", str),
        ("--lambda-cm1", "lambda_cm1", float),
        ("--gamma-inv-fs", "gamma_inv_fs", float),
        ("--temperature-k", "temperature_k", float),
        ("--gamma-rc-inv-ps", "gamma_rc_inv_ps", float),
        ("--gamma-phot-inv-ps", "gamma_phot_inv_ps", float),
        ("--site", "site", int),
        ("--delta-e-cm1", "delta_e_cm1", float),
        ("--e-rc-cm1", "e_rc_cm1", float),
        ("--dt-fs", "dt_fs", float),
        ("--auto-tol-ps", "auto_tol_ps", float),
        ("--n-cap", "n_cap", int),
        ("--hard-cap-ps", "hard_cap_ps", float),
        ("--record-stride", "record_stride", int),
        ("--precision", "precision", str),
        ("--therm-t-end-ps", "therm_t_end_ps", float),
        ("--workers", "workers", int),
        ("--steps", "steps", int),
    ]:
        p.add_argument(flag, dest=key, type=typ, default=None)
    # string-typed so the file syntax ('auto', 'none', comma lists) matches
    for flag, key in [
        ("--n-max", "n_max"),
        ("--t-end-fs", "t_end_fs"),
        ("--residual", "residual"),
        ("--lambdas", "lambdas"),
        ("--sites", "sites"),
        ("--delta-e-list", "delta_e_list"),
        ("--temperatures", "temperatures"),
        ("--n-max-list", "n_max_list"),
    ]:
        p.add_argument(flag, dest=key, type=str, default=None)
    p.add_argument("--add-reorg-to-diagonal", dest="add_reorg_to_diagonal",
                   action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excitonflow",
        description="Exciton energy-transfer dynamics: propagation, sweeps, benchmark.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common_flags(sub.add_parser(name))
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    fields_present = {}
    if args.config:
        fields_present.update(load_config(args.config))
    for key, kind in _FIELD_KINDS.items():
        raw = getattr(args, key, None)
        if raw is None:
            continue
        if isinstance(raw, str):
            fields_present[key] = _parse_value(kind, raw, f"flag --{key.replace('_', '-')}")
        else:
            fields_present[key] = raw
    return validate_config(RunConfig(**fields_present))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.plot and not args.out:
            raise ConfigError("--plot requires --out")
        outputs = _COMMANDS[args.command](cfg)
        written = []
        for suffix, cols, rows in outputs:
            if args.out:
                path = _output_path(args.out, suffix)
                with open(path, "w") as fh:
                    write_csv(args.command, cfg, cols, rows, fh)
                written.append(path)
            else:
                write_csv(args.command, cfg, cols, rows, sys.stdout)
        if args.plot:
            from . import plots
            for path in written:
                plots.render(args.command, path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PropagationDiverged as exc:
        print(f"error: numerical divergence: {exc}", file=sys.stderr)
        return 3
    except ConvergenceFailure as exc:
        print(f"error: convergence failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
