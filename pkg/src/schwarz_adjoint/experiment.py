from __future__ import annotations

import logging
import math
import time
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from schwarz_adjoint.adjoint import (
    AdjointError,
    solve_additive_adjoints,
    solve_global_adjoint,
    solve_multiplicative_adjoints,
)
from schwarz_adjoint.config import ConfigError, ExperimentConfig, validate_config
from schwarz_adjoint.constants import CONVDIFF_SOURCE, CONVDIFF_VELOCITY
from schwarz_adjoint.decomp import Decomposition, QoiData, build_grid, decomposition_from_rects
from schwarz_adjoint.estimator import (
    EstimatorError,
    TwoStagePolicy,
    build_report,
    exact_poisson_qoi,
    qoi_value,
    reference_errors,
    two_stage_advise,
)
from schwarz_adjoint.fem import Problem, indicator
from schwarz_adjoint.mesh import Mesh, build_uniform, element_region_consistency, refine_region
from schwarz_adjoint.models import ExperimentResult, RunInfo, TwoStageResult
from schwarz_adjoint.schwarz import SchwarzConfig, SchwarzError, run_schwarz
from schwarz_adjoint.solver import SolverError

logger = logging.getLogger(__name__)


class ExperimentError(Exception):
    """Raised when an experiment fails after its configuration was accepted."""


def _poisson_source(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return 8.0 * math.pi**2 * np.sin(2 * math.pi * x) * np.sin(2 * math.pi * y)


def _poisson_exact(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.sin(2 * math.pi * x) * np.sin(2 * math.pi * y)


def _unit_source(points: np.ndarray) -> np.ndarray:
    return np.full(points.shape[0], CONVDIFF_SOURCE)


def build_problem(name: str) -> Problem:
    if name == "poisson":
        return Problem("poisson", _poisson_source, exact=_poisson_exact)
    if name == "convdiff":
        return Problem("convdiff", _unit_source, convection=CONVDIFF_VELOCITY)
    raise ConfigError(f"Unknown problem '{name}'")


def prepare_mesh(cfg: ExperimentConfig) -> Tuple[Mesh, Decomposition]:
    """Uniform mesh and subdomain grid, with the optional subdomain refined first.

    Subdomains are widened by ``cfg.subdomain_extension()``, so with the default
    ``overlap="width"`` neighbouring subdomains share a strip of width ``beta``.
    """
    coarse = build_uniform(cfg.nx, cfg.ny)
    decomp = build_grid(cfg.px, cfg.py, cfg.subdomain_extension(), coarse, cfg.sweep_order)
    if cfg.refine_subdomain is None:
        return coarse, decomp
    region = decomp.subdomains[cfg.refine_subdomain - 1].rect
    mesh = refine_region(coarse, region)
    logger.info(
        "Refined subdomain %d (%s): %d -> %d vertices",
        cfg.refine_subdomain,
        region,
        coarse.num_vertices,
        mesh.num_vertices,
    )
    refined = decomposition_from_rects(
        mesh, decomp.rects, sweep_order=decomp.order, beta=decomp.beta, shape=decomp.shape
    )
    return mesh, refined


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Forward trace, adjoint family, global adjoint, then the error report."""
    validate_config(cfg)
    start = time.time()
    problem = build_problem(cfg.problem)
    mesh, decomp = prepare_mesh(cfg)
    rect = cfg.qoi_rectangle()
    if not element_region_consistency(mesh, [rect]):
        raise ConfigError(f"qoi_rect {rect} is not aligned with the mesh")
    psi = indicator(rect)
    qoi = QoiData(psi, decomp, rect)
    q = cfg.resolved_adjoint_degree()

    try:
        trace = run_schwarz(
            problem,
            mesh,
            decomp,
            SchwarzConfig(method=cfg.method, K=cfg.K, tau=cfg.tau, degree=cfg.forward_degree),
        )
        if cfg.method == "multiplicative":
            family = solve_multiplicative_adjoints(problem, decomp, cfg.K, qoi, q)
        else:
            family = solve_additive_adjoints(problem, decomp, cfg.K, cfg.tau, qoi, q)
        phi = solve_global_adjoint(problem, mesh, q, psi)
        references = None
        if cfg.reference != "none":
            use_exact = cfg.reference == "exact" and problem.exact is not None
            references = reference_errors(
                trace, problem, psi, rect, exact_poisson_qoi if use_exact else None
            )
        report = build_report(trace, phi, family, problem, references)
    except (SchwarzError, AdjointError, EstimatorError, SolverError) as exc:
        raise ExperimentError(f"{cfg.label or 'run'} failed: {exc}") from exc

    info = RunInfo(
        label=cfg.label,
        nx=cfg.nx,
        ny=cfg.ny,
        beta=cfg.beta,
        K=cfg.K,
        method=cfg.method,
        tau=cfg.tau,
        px=cfg.px,
        py=cfg.py,
        vertices=mesh.num_vertices,
        triangles=mesh.num_triangles,
    )
    recommendation = two_stage_advise(report, TwoStagePolicy(cfg.stage2_beta, cfg.forward_degree))
    logger.info(
        "%s: eta=%.3e eta_D=%.3e eta_I=%.3e (%.1fs)",
        cfg.label or f"{cfg.method} {cfg.px}x{cfg.py}",
        report.eta_total,
        report.eta_disc,
        report.eta_iter,
        time.time() - start,
    )
    return ExperimentResult(info, report, recommendation, qoi_value(trace.final, psi))


def stage_two_config(cfg: ExperimentConfig, result: ExperimentResult) -> Optional[ExperimentConfig]:
    """Config implementing the stage-one recommendation, or None when nothing is advised."""
    rec = result.recommendation
    if rec is None or rec.action == "none":
        return None
    if rec.action == "refine_subdomain":
        return replace(cfg, refine_subdomain=rec.target, label="stage 2")
    return replace(cfg, beta=rec.new_beta, label="stage 2")


def run_uniform_comparison(cfg: ExperimentConfig) -> ExperimentResult:
    """Same run on the uniformly refined mesh."""
    return run_experiment(replace(cfg, nx=2 * cfg.nx, ny=2 * cfg.ny, refine_subdomain=None, label="uniform"))


def run_two_stage(
    cfg: ExperimentConfig,
    policy: Optional[TwoStagePolicy] = None,
    compare_uniform: bool = True,
) -> TwoStageResult:
    if policy is not None:
        cfg = replace(cfg, stage2_beta=policy.stage2_beta)
    stage1 = run_experiment(replace(cfg, label=cfg.label or "stage 1"))
    rec = stage1.recommendation
    result = TwoStageResult(stage1=stage1, recommendation=rec)
    cfg2 = stage_two_config(cfg, stage1)
    if cfg2 is None:
        logger.info("Stage 1 error is zero; no stage 2 run")
        return result
    logger.info("Stage 2: %s", rec.reason)
    result.stage2 = run_experiment(cfg2)
    if compare_uniform and rec.action == "refine_subdomain":
        result.uniform = run_uniform_comparison(cfg)
    return result
