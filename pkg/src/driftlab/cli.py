"""Batch front-end: one subcommand per pipeline stage.

All experiment parameters live in the config file; flags carry only paths
and verbosity.  Every run writes its outputs plus a manifest (config hash,
package versions, wall time) into the output directory, so a run can be
reproduced exactly from the manifest alone.

Exit codes: 0 success, 2 config error, 3 splitting condition violated,
4 junction minimum on the box boundary, 5 solver non-convergence.
"""

from __future__ import annotations

import argparse
import datetime
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash
from .diffusion import build_diffusing_orbit, plan_chain, scaling_study
from .errors import (
    ChainAborted,
    Condition1Violated,
    ConfigError,
    DriftLabError,
    MinimumOnBoundary,
    SolverDidNotConverge,
)
from .melnikov import certify_at, certify_condition1, melnikov_field
from .records import write_csv, write_record
from .transition import find_transition
from .variational import BoundarySpec, action, residual_norms, solve_loop

logger = logging.getLogger(__name__)

_FALLBACK_DURATION = 120.0  # loop window when mu = 0 leaves 2 a0/mu unbounded


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ChainAborted) and exc.cause is not None:
        return _exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, Condition1Violated):
        return 3
    if isinstance(exc, MinimumOnBoundary):
        return 4
    if isinstance(exc, SolverDidNotConverge):
        return 5
    return 1


def _versions() -> dict:
    import scipy
    import yaml as _yaml

    return {
        "python": sys.version.split()[0],
        "driftlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": getattr(_yaml, "__version__", "unknown"),
    }


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig,
                    outputs: list, wall: float) -> None:
    write_record(
        out / f"manifest_{command}.yaml",
        {
            "command": command,
            "config_hash": config_hash(cfg),
            "config": cfg.to_dict(),
            "versions": _versions(),
            "wall_time_s": wall,
            "written": [str(Path(p).name) for p in outputs],
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
        kind="manifest",
    )


def _cmd_melnikov(cfg: ExperimentConfig, out: Path) -> list:
    stage = cfg.require("melnikov")
    f = cfg.system.to_system().perturbation
    outputs = []
    for omega in stage.omega_values:
        field = melnikov_field(omega, stage.grid_n, stage.grid_n, f)
        path = out / f"melnikov_field_omega{omega:g}.csv"
        field.to_csv(path)
        outputs.append(path)
        if cfg.figures:
            from . import plots

            fig_path = out / f"melnikov_field_omega{omega:g}.png"
            plots.field_heatmap(omega, field.T0, field.Q0, field.values.T, fig_path)
            outputs.append(fig_path)
    if stage.certify and stage.sweep_step > 0:
        certs, global_gap = certify_condition1(
            (stage.sweep_start, stage.sweep_stop),
            stage.sweep_step,
            f,
            workers=cfg.workers,
        )
        rows = [
            (c.omega, c.T_min, c.Q_min, c.min_value, c.boundary_min, c.gap)
            for c in certs
        ]
        sweep_path = out / "condition1_sweep.csv"
        write_csv(
            sweep_path,
            ["omega", "T_min", "Q_min", "min_value", "boundary_min", "gap"],
            rows,
        )
        outputs.append(sweep_path)
        summary_path = out / "condition1_summary.yaml"
        write_record(
            summary_path,
            {
                "omega_start": stage.sweep_start,
                "omega_stop": stage.sweep_stop,
                "omega_step": stage.sweep_step,
                "frequencies": len(certs),
                "global_gap": global_gap,
            },
            kind="condition1_summary",
        )
        outputs.append(summary_path)
        if cfg.figures:
            from . import plots

            fig_path = out / "condition1_sweep.png"
            plots.gap_sweep([c.omega for c in certs], [c.gap for c in certs], fig_path)
            outputs.append(fig_path)
        print(f"condition 1 holds on the sweep; global gap {global_gap:.6g}")
    elif stage.certify:
        for omega in stage.omega_values:
            cert = certify_at(omega, f)
            path = out / f"condition1_omega{omega:g}.yaml"
            write_record(path, cert.to_record(), kind="condition1_certificate")
            outputs.append(path)
            print(f"omega {omega:g}: min {cert.min_value:.6g}, gap {cert.gap:.6g}")
    return outputs


def _cmd_loop(cfg: ExperimentConfig, out: Path) -> list:
    stage = cfg.require("loop")
    s = cfg.system.to_system()
    if stage.duration > 0:
        duration = stage.duration
    elif s.mu > 0:
        duration = 2.0 * s.loop_time
    else:
        duration = _FALLBACK_DURATION
    boundary = BoundarySpec(
        T0=0.0, T1=duration, Q0=0.0, Q1=stage.omega * duration,
        qa=-math.pi, qb=math.pi,
    )
    mesh = stage.n_segments if stage.n_segments > 0 else None
    curve, profile = solve_loop(boundary, s, opt_tol=stage.opt_tol, mesh=mesh)
    grad_max, residual = residual_norms(curve, s)
    parts = action(curve, s)
    curve_path = out / "loop_curve.csv"
    curve.to_csv(curve_path)
    record_path = out / "loop_record.yaml"
    write_record(
        record_path,
        {
            "omega": stage.omega,
            "mu": s.mu,
            "duration": duration,
            "n_segments": curve.n_segments,
            "action": parts.F,
            "action_kinetic_geometric": parts.F0,
            "action_perturbation": parts.P,
            "grad_max": grad_max,
            "residual": residual,
            "profile": profile.as_dict(),
        },
        kind="loop",
    )
    outputs = [curve_path, record_path]
    if cfg.figures:
        from . import plots

        fig_path = out / "loop_curve.png"
        plots.curve_overview(curve.times, curve.q_nodes, curve.Q_nodes, fig_path)
        outputs.append(fig_path)
    print(
        f"loop solved: {curve.n_segments} segments, action {parts.F:.9g}, "
        f"grad max {grad_max:.3e}"
    )
    return outputs


def _cmd_transition(cfg: ExperimentConfig, out: Path) -> list:
    stage = cfg.require("transition")
    s = cfg.system.to_system()
    if s.mu <= 0:
        raise ConfigError("transition stage requires mu > 0")
    T = s.loop_time
    outer = BoundarySpec(
        T0=0.0,
        T1=2.0 * T,
        Q0=0.0,
        Q1=T * (stage.omega1 + stage.omega2),
        qa=-math.pi,
        qb=3.0 * math.pi,
    )
    cert = certify_at(stage.omega1, s.perturbation)
    record, curve = find_transition(
        outer,
        stage.omega1,
        stage.omega2,
        s,
        cert,
        opt_tol=stage.opt_tol,
        grid_n=stage.grid_n,
        boundary_samples=stage.boundary_samples,
        workers=cfg.workers,
    )
    curve_path = out / "transition_curve.csv"
    curve.to_csv(curve_path)
    record_path = out / "transition_record.yaml"
    write_record(record_path, record.to_record(), kind="transition")
    outputs = [curve_path, record_path]
    if cfg.figures:
        from . import plots

        fig_path = out / "transition_curve.png"
        plots.curve_overview(
            curve.times, curve.q_nodes, curve.Q_nodes, fig_path,
            junctions=[(record.T0, record.Q0)],
        )
        outputs.append(fig_path)
    print(
        f"transition found: junction ({record.T0:.6g}, {record.Q0:.6g}), "
        f"margin {record.margin:.6g}, velocity jump {record.vel_jump:.3e}"
    )
    return outputs


def _cmd_diffuse(cfg: ExperimentConfig, out: Path) -> list:
    stage = cfg.require("diffuse")
    s = cfg.system.to_system()
    plan = plan_chain(stage.omega_start, stage.omega_end, s.mu)
    curve_name = "diffusion_curve.csv"
    try:
        curve, report = build_diffusing_orbit(
            plan,
            s,
            opt_tol=stage.opt_tol,
            boundary_samples=stage.boundary_samples,
            workers=cfg.workers,
            curve_ref=curve_name,
        )
    except ChainAborted as exc:
        partial_path = out / "diffusion_report_partial.yaml"
        write_record(partial_path, exc.partial_report.to_record(), kind="diffusion")
        print(f"chain aborted; partial report in {partial_path}", file=sys.stderr)
        raise
    curve_path = out / curve_name
    curve.to_csv(curve_path)
    report_path = out / "diffusion_report.yaml"
    write_record(report_path, report.to_record(), kind="diffusion")
    outputs = [curve_path, report_path]
    if cfg.figures:
        from . import plots

        fig_path = out / "diffusion_curve.png"
        plots.curve_overview(
            curve.times, curve.q_nodes, curve.Q_nodes, fig_path,
            junctions=report.junctions,
        )
        outputs.append(fig_path)
    print(
        f"chain of {len(plan) - 1} windows: Qdot {report.Qdot_start:.4f} -> "
        f"{report.Qdot_end:.4f}, t_d = {report.t_d:.6g}"
    )
    return outputs


def _cmd_scaling(cfg: ExperimentConfig, out: Path) -> list:
    stage = cfg.require("scaling")
    s = cfg.system.to_system()
    study = scaling_study(
        stage.mu_values,
        (stage.omega_start, stage.omega_end),
        s,
        opt_tol=stage.opt_tol,
        boundary_samples=stage.boundary_samples,
        workers=cfg.workers,
    )
    table_path = out / "scaling.csv"
    write_csv(table_path, ["mu", "t_d", "p_partial", "status"], study.to_rows())
    first = study.rows[0]
    summary_path = out / "scaling_summary.yaml"
    write_record(
        summary_path,
        {
            "mu_values": [r.mu for r in study.rows],
            "omega_start": stage.omega_start,
            "omega_end": stage.omega_end,
            "exponent": study.exponent,
            "C_at_first_mu": first.t_d * first.mu**2
            if math.isfinite(first.t_d)
            else math.nan,
            "statuses": [r.status for r in study.rows],
        },
        kind="scaling",
    )
    outputs = [table_path, summary_path]
    if cfg.figures:
        from . import plots

        fig_path = out / "scaling.png"
        plots.scaling_loglog(
            [r.mu for r in study.rows],
            [r.t_d for r in study.rows],
            study.exponent,
            fig_path,
        )
        outputs.append(fig_path)
    print(f"fitted exponent p = {study.exponent:.4f} over {len(study.rows)} runs")
    return outputs


_COMMANDS = {
    "melnikov": _cmd_melnikov,
    "loop": _cmd_loop,
    "transition": _cmd_transition,
    "diffuse": _cmd_diffuse,
    "scaling": _cmd_scaling,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="variational construction of diffusing orbits, stage by stage",
    )
    parser.add_argument("--version", action="version", version=f"driftlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="experiment config (YAML)")
    common.add_argument("--out", default=None, help="override the config output_dir")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "melnikov": "sample the splitting functional and certify its minima",
        "loop": "solve one minimising loop",
        "transition": "glue a loop pair across a certified junction",
        "diffuse": "build a diffusing orbit across a frequency span",
        "scaling": "measure drift times over a mu list and fit the exponent",
    }
    for name in _COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    started = time.perf_counter()
    try:
        cfg = ExperimentConfig.load(args.config)
        out = Path(args.out) if args.out else Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        outputs = _COMMANDS[args.command](cfg, out)
    except DriftLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out, args.command, cfg, outputs, time.perf_counter() - started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
