"""Command line front end.

Five subcommands, all driven by a single TOML config file::

    settleflow simulate  run.toml     # time integration, series + snapshots
    settleflow r0        run.toml     # reproduction number and growth report
    settleflow equilibrium run.toml   # nontrivial steady state, if any
    settleflow verify    run.toml     # long-run behaviour checks
    settleflow audit     run.toml     # structural assumptions on the rates

Exit codes: 0 success, 1 configuration problem, 2 numerical failure,
3 verify check failed.

All CSV output is deterministic: no timestamps, floats printed with
``%.17g``, and a hash of the config file echoed in the metadata comments so
results can be traced back to their inputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, build_initial_u, build_initial_w, load_config
from .equilibrium import positive_equilibrium
from .errors import ConfigError, EngineError, NumericalError
from .rates import SpatialField, audit_assumptions
from .solver import simulate
from .spectral import principal_eigenvalue, spectral_report
from .verify import run_suite

__all__ = ["main", "run"]


def _fmt(value: float) -> str:
    return "%.17g" % float(value)


def _meta_lines(cfg: RunConfig, subcommand: str) -> list[str]:
    return [
        f"# settleflow {__version__} {subcommand}",
        f"# config: {cfg.config_hash}",
        f"# n_x={cfg.grid.n_x} dt={_fmt(cfg.grid.dt)} n_a={cfg.grid.n_a} A={_fmt(cfg.grid.A)}",
    ]


def _write_csv(path: Path, meta: list[str], header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(line + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_dat(path: Path, header: str, blocks) -> None:
    """Gnuplot-friendly whitespace table; blocks separated by blank lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        for i, block in enumerate(blocks):
            if i:
                fh.write("\n")
            for row in block:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _cmd_simulate(cfg: RunConfig) -> int:
    sim = cfg.simulate
    if "t_end" not in sim:
        raise ConfigError("[simulate]: t_end is required")
    t_end = float(sim["t_end"])
    t0 = float(sim.get("t0", 0.0))
    initial = sim.get("initial", {})
    u0 = build_initial_u(initial.get("u", {"kind": "constant"}), cfg.params, cfg.grid, cfg.base_dir)
    w0 = build_initial_w(initial.get("w", {"kind": "exp_decay"}), cfg.params, cfg.grid, cfg.base_dir)
    output_times = sim.get("output_times")
    if output_times is not None:
        output_times = [float(t) for t in output_times]

    traj = simulate(
        cfg.params,
        cfg.grid,
        u0,
        w0,
        t_end,
        t0=t0,
        output_times=output_times,
        record_u=bool(sim.get("record_u", False)),
    )

    meta = _meta_lines(cfg, "simulate")
    series_rows = zip(traj.t_series, traj.P_series, traj.u_norm_series, traj.u_min_series)
    _write_csv(cfg.output_dir / "series.csv", meta, "t,P,max_u,min_u", series_rows)

    for idx, snap in enumerate(traj.snapshots):
        tag = f"{idx:03d}"
        snap_meta = meta + [f"# t = {_fmt(snap.t)}"]
        _write_csv(
            cfg.output_dir / f"snapshot_{tag}_u.csv",
            snap_meta,
            "x,u",
            zip(cfg.grid.x, snap.u),
        )
        w_rows = (
            (cfg.grid.x[i], cfg.grid.ages[j], snap.w[i, j])
            for i in range(cfg.grid.n_x)
            for j in range(cfg.grid.n_a)
        )
        _write_csv(cfg.output_dir / f"snapshot_{tag}_w.csv", snap_meta, "x,a,w", w_rows)

    if cfg.plot:
        _write_dat(
            cfg.output_dir / "series.dat",
            "t P max_u min_u",
            [zip(traj.t_series, traj.P_series, traj.u_norm_series, traj.u_min_series)],
        )
        for idx, snap in enumerate(traj.snapshots):
            tag = f"{idx:03d}"
            _write_dat(cfg.output_dir / f"snapshot_{tag}_u.dat", "x u", [zip(cfg.grid.x, snap.u)])
            blocks = [
                [(cfg.grid.x[i], cfg.grid.ages[j], snap.w[i, j]) for j in range(cfg.grid.n_a)]
                for i in range(cfg.grid.n_x)
            ]
            _write_dat(cfg.output_dir / f"snapshot_{tag}_w.dat", "x a w", blocks)

    final = traj.final
    print(f"simulate: t = {_fmt(final.t)}")
    print(f"  P        = {_fmt(final.P)}")
    print(f"  max u    = {_fmt(final.u.max())}")
    print(f"  min u    = {_fmt(final.u.min())}")
    print(f"  snapshots written: {len(traj.snapshots)} -> {cfg.output_dir}")
    if traj.clamped_entries:
        print(f"  negative dust clamped: {traj.clamped_entries} entries")
    return 0


def _settlement_override(cfg: RunConfig) -> SpatialField | None:
    node = cfg.r0.get("settlement")
    if node is None:
        return None
    from .config import _spatial_field

    return _spatial_field(node, cfg.grid.n_x, cfg.params.L, "[r0.settlement]")


def _cmd_r0(cfg: RunConfig) -> int:
    override = _settlement_override(cfg)
    report = spectral_report(cfg.params, cfg.grid, settlement_field=override)

    meta = _meta_lines(cfg, "r0")
    _write_csv(
        cfg.output_dir / "principal_mode.csv",
        meta + [f"# lambda_hat_0 = {_fmt(report.lambda_hat_0)}"],
        "x,phi",
        zip(cfg.grid.x, report.phi),
    )
    k_values = [float(k) for k in cfg.r0.get("k_values", [])]
    if k_values:
        rows = []
        for k in sorted(k_values):
            lam, _, _, _ = principal_eigenvalue(cfg.params, cfg.grid, k)
            rows.append((k, lam))
        _write_csv(cfg.output_dir / "growth_curve.csv", meta, "k,lambda_hat", rows)

    print(f"r0: {_fmt(report.r0)}")
    print(f"  lambda_hat_0 = {_fmt(report.lambda_hat_0)}")
    if report.s_l0 is None:
        print("  growth bound = none (subcritical, unbounded ages)")
    else:
        print(f"  growth bound = {_fmt(report.s_l0)}")
    print(f"  iterations   = {report.iterations}")
    print(f"  residual     = {_fmt(report.residual)}")
    print(f"  reports written -> {cfg.output_dir}")
    return 0


def _cmd_equilibrium(cfg: RunConfig) -> int:
    fp_tol = float(cfg.equilibrium.get("fp_tol", 1e-10))
    report = positive_equilibrium(cfg.params, cfg.grid, fp_tol=fp_tol)

    meta = _meta_lines(cfg, "equilibrium")
    eq_meta = meta + [f"# p_star = {_fmt(report.p_star)}"]
    _write_csv(cfg.output_dir / "u_star.csv", eq_meta, "x,u", zip(cfg.grid.x, report.u_star))
    w_rows = (
        (cfg.grid.x[i], cfg.grid.ages[j], report.w_star[i, j])
        for i in range(cfg.grid.n_x)
        for j in range(cfg.grid.n_a)
    )
    _write_csv(cfg.output_dir / "w_star.csv", eq_meta, "x,a,w", w_rows)
    if report.h_samples.size:
        _write_csv(cfg.output_dir / "h_samples.csv", meta, "P,H", report.h_samples)

    print(f"equilibrium: r0 = {_fmt(report.r0)}")
    print(f"  P*                   = {_fmt(report.p_star)}")
    print(f"  reaction residual    = {_fmt(report.fkpp_residual)}")
    print(f"  fixed-point residual = {_fmt(report.fixed_point_residual)}")
    for note in report.notes:
        print(f"  note: {note}")
    print(f"  reports written -> {cfg.output_dir}")
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    checks = tuple(cfg.verify.get("checks", ("extinction", "persistence", "bounds", "comparison")))
    seed = int(cfg.verify.get("seed", 0))
    t_end_bounds = float(cfg.verify.get("t_end_bounds", 40.0))
    verdicts = run_suite(cfg.params, cfg.grid, checks=checks, seed=seed, t_end_bounds=t_end_bounds)

    meta = _meta_lines(cfg, "verify")
    rows = []
    for v in verdicts:
        rows.append(
            f"{v.name},{'pass' if v.passed else 'FAIL'},{_fmt(v.measured)},"
            f"{_fmt(v.expected)},{_fmt(v.tolerance)},{'yes' if v.skipped else 'no'}"
        )
    path = cfg.output_dir / "verify_report.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(line + "\n")
        fh.write("check,result,measured,expected,tolerance,skipped\n")
        for row in rows:
            fh.write(row + "\n")

    failed = False
    for v in verdicts:
        status = "skip" if v.skipped else ("pass" if v.passed else "FAIL")
        print(f"verify [{status:4s}] {v.name}: measured={_fmt(v.measured)} vs {_fmt(v.expected)}")
        for note in v.notes:
            print(f"         note: {note}")
        if not v.passed:
            failed = True
    print(f"  report written -> {path}")
    return 3 if failed else 0


def _cmd_audit(cfg: RunConfig) -> int:
    report = audit_assumptions(cfg.params, cfg.grid)
    flags = [
        ("birth_map_increasing", report.birth_map_increasing),
        ("mortality_nonincreasing_in_p", report.mortality_nonincreasing_in_p),
        ("settlement_nondecreasing_in_p", report.settlement_nondecreasing_in_p),
        ("crowding_monotone", report.crowding_monotone),
        ("kernels_decreasing_in_p", report.kernels_decreasing_in_p),
    ]
    for name, ok in flags:
        print(f"audit [{'ok' if ok else 'NO':2s}] {name}")
        if not ok and name in report.first_violations:
            print(f"        first violation: {report.first_violations[name]}")
    print(f"  comparison_ready = {report.comparison_ready}")
    for note in report.notes:
        print(f"  note: {note}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "r0": _cmd_r0,
    "equilibrium": _cmd_equilibrium,
    "verify": _cmd_verify,
    "audit": _cmd_audit,
}


def run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="settleflow",
        description="Numerical engine for a dispersal and settlement population model.",
    )
    parser.add_argument("--version", action="version", version=f"settleflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("config", help="path to the TOML run configuration")
        p.add_argument("--output", help="override the [output] directory", default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; fold that into the config-error code
        return 0 if exc.code == 0 else 1

    try:
        cfg = load_config(args.config)
        if args.output is not None:
            cfg.output_dir = Path(args.output)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"settleflow: configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"settleflow: numerical failure: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"settleflow: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
