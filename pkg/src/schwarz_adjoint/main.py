#!/usr/bin/env python3
"""
schwarz-adjoint - CLI
Overlapping Schwarz solves with adjoint-based splitting of the QoI error into
iteration and discretization parts.

Examples:
  schwarz-adjoint run --nx 20 --ny 20 --px 2 --py 1 --beta 0.1 --K 2
  schwarz-adjoint run --config experiment.yaml --method additive --tau 0.4 --output row.csv
  schwarz-adjoint table t1 --jobs 4 --output t1.csv --md t1.md
  schwarz-adjoint two-stage --nx 10 --ny 10 --px 2 --py 2 --beta 0.2 --K 6
  schwarz-adjoint gs-check --systems 50
  schwarz-adjoint mesh-dump --nx 10 --ny 10 --refine 0.3,0.3,1,1 --output mesh.txt

Exit codes: 0 success, 2 invalid configuration, 1 solver or estimation failure.
"""

import argparse
import logging
import sys
import time
import tomllib
from dataclasses import replace
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as package_version
from pathlib import Path
from typing import Any, Dict, List, Optional

from schwarz_adjoint.cliui import set_verbose, ui
from schwarz_adjoint.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    validate_config,
)
from schwarz_adjoint.decomp import DecompositionError
from schwarz_adjoint.estimator import TwoStagePolicy
from schwarz_adjoint.experiment import ExperimentError, run_experiment, run_two_stage
from schwarz_adjoint.exporters import export_csv, export_json, export_md, export_two_stage_md
from schwarz_adjoint.geometry import Rect
from schwarz_adjoint.gsanalog import gs_check_sweep
from schwarz_adjoint.mesh import MeshError, build_uniform, format_mesh, refine_region, write_mesh
from schwarz_adjoint.models import ExperimentResult
from schwarz_adjoint.solver import SolverError
from schwarz_adjoint.tables import TableError, run_table, table_configs

# Largest tolerated relative violation of the Gauss-Seidel error identity.
GS_IDENTITY_TOL = 1e-12

_OVERRIDE_KEYS = (
    "problem",
    "nx",
    "ny",
    "px",
    "py",
    "beta",
    "overlap",
    "K",
    "method",
    "tau",
    "forward_degree",
    "adjoint_degree",
    "qoi_rect",
    "sweep_order",
    "reference",
    "output",
    "log_level",
    "refine_subdomain",
    "stage2_beta",
)


def _read_pyproject_version() -> str | None:
    pyproject_path = Path(__file__).resolve().parents[2] / "pyproject.toml"
    try:
        with open(pyproject_path, "rb") as f:
            pyproject = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError):
        return None

    project = pyproject.get("project")
    if not isinstance(project, dict):
        return None

    version = project.get("version")
    if not isinstance(version, str):
        return None
    return version


def get_schwarz_adjoint_version() -> str:
    try:
        return package_version("schwarz-adjoint")
    except PackageNotFoundError:
        return _read_pyproject_version() or "unknown"


def format_version_output() -> str:
    return f"{get_schwarz_adjoint_version()} (schwarz-adjoint)"


def _add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="Flat YAML experiment config")
    parser.add_argument("--problem", type=str, help="poisson or convdiff")
    parser.add_argument("--nx", type=int, help="Mesh cells in x")
    parser.add_argument("--ny", type=int, help="Mesh cells in y")
    parser.add_argument("--px", type=int, help="Subdomains in x")
    parser.add_argument("--py", type=int, help="Subdomains in y")
    parser.add_argument("--beta", type=float, help="Overlap length")
    parser.add_argument("--overlap", type=str, help="How beta is read: width (total overlap, default) or extension (per side)")
    parser.add_argument("--K", "-K", dest="K", type=int, help="Schwarz iterations")
    parser.add_argument("--method", type=str, help="multiplicative or additive")
    parser.add_argument("--tau", type=float, help="Additive relaxation parameter")
    parser.add_argument("--forward-degree", dest="forward_degree", type=int, help="Forward element degree (1-3)")
    parser.add_argument("--adjoint-degree", dest="adjoint_degree", type=int, help="Adjoint element degree (1-3)")
    parser.add_argument("--qoi-rect", dest="qoi_rect", type=str, help="QoI rectangle x0,y0,x1,y1")
    parser.add_argument("--sweep-order", dest="sweep_order", type=str, help="row, column or a comma list")
    parser.add_argument("--reference", type=str, help="exact, surrogate or none")
    parser.add_argument("--refine-subdomain", dest="refine_subdomain", type=int, help="Refine this subdomain (1-based) first")
    parser.add_argument("--stage2-beta", dest="stage2_beta", type=float, help="Overlap used when stage 2 increases beta")
    parser.add_argument("--log-level", dest="log_level", type=str, help="debug, info, warning or error")
    parser.add_argument("--output", type=str, help="CSV output path (stdout when omitted)")
    parser.add_argument("--extended", action="store_true", help="Append S_1..S_p columns")
    parser.add_argument("--json", type=str, help="Also write a JSON report to this path")
    parser.add_argument("--md", type=str, help="Also write a Markdown report to this path")
    parser.add_argument("-v", "--verbose", action="store_true", help="Verbose output")


def _collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    if getattr(args, "extended", False):
        overrides["extended"] = True
    return overrides


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = _collect_overrides(args)
    if args.config:
        return load_config(args.config, overrides)
    return validate_config(apply_overrides(ExperimentConfig(), overrides))


def _setup_logging(level: str, verbose: bool) -> None:
    set_verbose(verbose)
    logging.basicConfig(level="DEBUG" if verbose else level.upper())


def _emit_results(
    results: List[ExperimentResult],
    output: Optional[str],
    extended: bool,
    json_path: Optional[str] = None,
    md_path: Optional[str] = None,
    title: str = "Error Report",
    config: Optional[Dict[str, Any]] = None,
) -> None:
    csv_text = export_csv(results, output, extended=extended)
    if output:
        ui.success(f"CSV written to {output}")
    else:
        sys.stdout.write(csv_text)
    if json_path:
        export_json(results, json_path, config=config)
        ui.success(f"JSON report written to {json_path}")
    if md_path:
        export_md(results, title=title, output_file=md_path)
        ui.success(f"Markdown report written to {md_path}")


def _cmd_run(args: argparse.Namespace) -> None:
    cfg = _resolve_config(args)
    _setup_logging(cfg.log_level, args.verbose)
    ui.set_total_steps(2)
    ui.step("Forward solve, adjoints and error estimates")
    start = time.time()
    result = run_experiment(cfg)
    ui.show_report(result.report)
    ui.debug(f"Mesh: {result.info.vertices} vertices, {result.info.triangles} triangles")
    ui.step("Export")
    _emit_results([result], cfg.output, cfg.extended, args.json, args.md, config=cfg.to_dict())
    ui.info(f"Run completed in {time.time() - start:.1f}s")


def _cmd_table(args: argparse.Namespace) -> None:
    _setup_logging(args.log_level or "info", args.verbose)
    spec = table_configs(args.name)
    ui.info(f"Table {spec.name}: {spec.title} ({len(spec.rows)} rows)")

    def _override(cfg: ExperimentConfig) -> ExperimentConfig:
        if args.reference:
            cfg = replace(cfg, reference=args.reference)
        return cfg

    progress = ui.create_progress_bar(len(spec.rows))
    results = run_table(spec.name, jobs=args.jobs, overrides=_override, on_row=lambda _i, _r: progress.update())
    progress.finish()
    _emit_results(
        results,
        args.output,
        args.extended or spec.extended,
        args.json,
        args.md,
        title=f"{spec.name}: {spec.title}",
    )


def _cmd_two_stage(args: argparse.Namespace) -> None:
    cfg = _resolve_config(args)
    _setup_logging(cfg.log_level, args.verbose)
    ui.set_total_steps(3)
    ui.step("Stage 1")
    result = run_two_stage(cfg, TwoStagePolicy(cfg.stage2_beta, cfg.forward_degree), compare_uniform=not args.no_uniform)
    ui.show_report(result.stage1.report, "Stage 1")
    ui.show_recommendation(result.recommendation)
    ui.step("Stage 2")
    if result.stage2 is None:
        ui.info("Stage 2 skipped")
    else:
        ui.show_report(result.stage2.report, f"Stage 2 ({result.stage2.info.vertices} vertices)")
    if result.uniform is not None:
        ui.show_report(result.uniform.report, f"Uniform refinement ({result.uniform.info.vertices} vertices)")
    ui.step("Export")
    rows = result.results()
    _emit_results(rows, cfg.output, True, None, None)
    if args.json:
        export_json(rows, args.json, recommendation=result.recommendation, config=cfg.to_dict())
        ui.success(f"JSON report written to {args.json}")
    if args.md:
        export_two_stage_md(result, args.md)
        ui.success(f"Markdown report written to {args.md}")


def _cmd_gs_check(args: argparse.Namespace) -> None:
    _setup_logging("info", args.verbose)
    checks = gs_check_sweep(n_systems=args.systems, seed=args.seed, noise=args.noise)
    worst = max((c.violation for c in checks), default=0.0)
    print(f"systems {len(checks)} max_violation {worst:.3e}")
    if worst > GS_IDENTITY_TOL:
        ui.error("Gauss-Seidel error identity violated", f"max relative violation {worst:.3e}")
        sys.exit(1)
    ui.success("Gauss-Seidel error identity holds")


def _cmd_mesh_dump(args: argparse.Namespace) -> None:
    _setup_logging("info", args.verbose)
    mesh = build_uniform(args.nx, args.ny)
    if args.refine:
        try:
            region = Rect.from_sequence([float(v) for v in args.refine.split(",")])
        except ValueError as exc:
            raise ConfigError(f"Invalid --refine rectangle '{args.refine}': {exc}") from exc
        mesh = refine_region(mesh, region)
    if args.output:
        write_mesh(mesh, args.output)
        ui.success(f"Mesh with {mesh.num_vertices} vertices written to {args.output}")
    else:
        sys.stdout.write(format_mesh(mesh))


def main(argv: Optional[List[str]] = None):
    p = argparse.ArgumentParser(prog="schwarz-adjoint", description="Schwarz domain decomposition error estimation")
    p.add_argument(
        "--version",
        action="version",
        version=format_version_output(),
        help="Show the installed schwarz-adjoint version",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    sub.add_parser("version", help="Show the installed schwarz-adjoint version")

    p_run = sub.add_parser("run", help="Run one experiment and print its CSV row")
    _add_experiment_arguments(p_run)

    p_table = sub.add_parser("table", help="Reproduce a result table (t1..t13)")
    p_table.add_argument("name", type=str, help="Table id, e.g. t1")
    p_table.add_argument("--jobs", type=int, default=1, help="Rows run concurrently")
    p_table.add_argument("--reference", type=str, help="exact, surrogate or none")
    p_table.add_argument("--output", type=str, help="CSV output path (stdout when omitted)")
    p_table.add_argument("--extended", action="store_true", help="Append S_1..S_p columns")
    p_table.add_argument("--json", type=str, help="Also write a JSON report")
    p_table.add_argument("--md", type=str, help="Also write a Markdown report")
    p_table.add_argument("--log-level", dest="log_level", type=str, default="info")
    p_table.add_argument("-v", "--verbose", action="store_true", help="Verbose output")

    p_two = sub.add_parser("two-stage", help="Run stage 1, apply the recommendation, run stage 2")
    _add_experiment_arguments(p_two)
    p_two.add_argument("--no-uniform", action="store_true", help="Skip the uniform-refinement comparison")

    p_gs = sub.add_parser("gs-check", help="Check the block Gauss-Seidel adjoint error identity")
    p_gs.add_argument("--systems", type=int, default=50, help="Number of random systems")
    p_gs.add_argument("--seed", type=int, default=20240501, help="Random seed")
    p_gs.add_argument("--noise", type=float, default=1e-3, help="Perturbation of the iterates")
    p_gs.add_argument("-v", "--verbose", action="store_true", help="Verbose output")

    p_mesh = sub.add_parser("mesh-dump", help="Write a (locally refined) mesh as plain text")
    p_mesh.add_argument("--nx", type=int, default=10)
    p_mesh.add_argument("--ny", type=int, default=10)
    p_mesh.add_argument("--refine", type=str, help="Refine rectangle x0,y0,x1,y1")
    p_mesh.add_argument("--output", type=str, help="Output path (stdout when omitted)")
    p_mesh.add_argument("-v", "--verbose", action="store_true", help="Verbose output")

    args = p.parse_args(argv)

    if args.cmd == "version":
        print(format_version_output())
        return

    handlers = {
        "run": _cmd_run,
        "table": _cmd_table,
        "two-stage": _cmd_two_stage,
        "gs-check": _cmd_gs_check,
        "mesh-dump": _cmd_mesh_dump,
    }
    try:
        handlers[args.cmd](args)
    except FileNotFoundError as e:
        ui.error("Config file not found", str(e))
        sys.exit(2)
    except (ConfigError, MeshError, DecompositionError, TableError) as e:
        ui.error("Invalid configuration", str(e))
        sys.exit(2)
    except (ExperimentError, SolverError) as e:
        ui.error("Solver failure", str(e))
        sys.exit(1)


if __name__ == "__main__":
    main()
