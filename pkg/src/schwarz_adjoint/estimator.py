"""
QoI error estimates from Schwarz traces and their adjoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from schwarz_adjoint.adjoint import AdjointFamily
from schwarz_adjoint.constants import DEFAULT_STAGE2_BETA, REFERENCE_DEGREE, REFERENCE_REFINEMENTS
from schwarz_adjoint.decomp import Decomposition, decomposition_from_rects
from schwarz_adjoint.fem import (
    FeFunction,
    Problem,
    interpolate,
    inner_product,
    weak_residual,
)
from schwarz_adjoint.geometry import Rect
from schwarz_adjoint.mesh import refine_uniform
from schwarz_adjoint.models import ErrorReport, Recommendation
from schwarz_adjoint.schwarz import SchwarzConfig, SchwarzTrace, run_schwarz, solve_global

logger = logging.getLogger(__name__)


class EstimatorError(Exception):
    """Raised when a trace and an adjoint family cannot be combined."""


def total_estimate(trace: SchwarzTrace, global_adjoint: FeFunction, problem: Problem) -> float:
    """Weak residual of the final iterate weighted by the global adjoint."""
    return weak_residual(trace.final, global_adjoint, problem)


def discretization_estimate(
    trace: SchwarzTrace,
    family: AdjointFamily,
    problem: Problem,
    decomp: Decomposition,
) -> Tuple[float, List[float]]:
    """Sum of subdomain residuals of the local solves weighted by ``phi - pi phi``.

    ``pi`` is nodal interpolation onto the forward subdomain space with
    homogeneous boundary values, lifted back to the adjoint degree.
    """
    if family.variant != trace.method:
        raise EstimatorError(
            f"Adjoint family is {family.variant} but the trace is {trace.method}"
        )
    keys = trace.solve_keys()
    missing = [key for key in keys if key not in family.members]
    if missing or len(family.members) != len(keys):
        raise EstimatorError(f"Trace and adjoint family do not match (missing members {missing[:3]})")

    forward_space = trace.space
    adjoint_space = family.space
    masks = [forward_space.restrict(sub.elements) for sub in decomp.subdomains]
    S = np.zeros(decomp.p)
    for k, i in keys:
        phi = family.members[(k, i)]
        projected = interpolate(phi, forward_space, mask=masks[i])
        lifted = interpolate(projected, adjoint_space)
        weight = phi - lifted
        S[i] += weak_residual(trace.local_solves[(k, i)], weight, problem, decomp.subdomains[i].elements)
    contributions = [float(s) for s in S]
    return float(sum(contributions)), contributions


def iteration_estimate(eta_total: float, eta_disc: float) -> float:
    return eta_total - eta_disc


def exact_poisson_qoi(rect: Rect) -> float:
    """Integral of sin(2 pi x) sin(2 pi y) over an axis-aligned rectangle."""
    two_pi = 2.0 * math.pi
    ix = (math.cos(two_pi * rect.x0) - math.cos(two_pi * rect.x1)) / two_pi
    iy = (math.cos(two_pi * rect.y0) - math.cos(two_pi * rect.y1)) / two_pi
    return ix * iy


def qoi_value(u: FeFunction, psi) -> float:
    return inner_product(u, psi, u.space.mesh)


def reference_qoi(
    problem: Problem,
    mesh,
    psi,
    qoi_rect: Optional[Rect] = None,
    exact_qoi: Optional[Callable[[Rect], float]] = None,
) -> float:
    """Q(u): closed form when available, else a degree-3 solve on a 4x refined mesh."""
    if exact_qoi is not None and qoi_rect is not None:
        return exact_qoi(qoi_rect)
    fine = refine_uniform(mesh, REFERENCE_REFINEMENTS)
    u_ref = solve_global(problem, fine, REFERENCE_DEGREE)
    logger.debug("Reference solution on %d vertices at degree %d", fine.num_vertices, REFERENCE_DEGREE)
    return qoi_value(u_ref, psi)


def surrogate_iterate_qoi(trace: SchwarzTrace, problem: Problem, psi) -> float:
    """Q of the same Schwarz run repeated at degree+1 on a 4x refined mesh."""
    decomp = trace.decomp
    fine = refine_uniform(decomp.mesh, REFERENCE_REFINEMENTS)
    fine_decomp = decomposition_from_rects(
        fine, decomp.rects, sweep_order=decomp.order, beta=decomp.beta, shape=decomp.shape
    )
    config = SchwarzConfig(
        method=trace.method,
        K=trace.K,
        tau=trace.tau,
        degree=min(trace.space.degree + 1, REFERENCE_DEGREE),
    )
    fine_trace = run_schwarz(problem, fine, fine_decomp, config)
    return qoi_value(fine_trace.final, psi)


def reference_errors(
    trace: SchwarzTrace,
    problem: Problem,
    psi,
    qoi_rect: Optional[Rect] = None,
    exact_qoi: Optional[Callable[[Rect], float]] = None,
) -> Tuple[float, float, float]:
    """(ref_total, ref_disc, ref_iter) against the final iterate of ``trace``."""
    q_discrete = qoi_value(trace.final, psi)
    q_true = reference_qoi(problem, trace.decomp.mesh, psi, qoi_rect, exact_qoi)
    q_iterate = surrogate_iterate_qoi(trace, problem, psi)
    ref_total = q_true - q_discrete
    ref_disc = q_iterate - q_discrete
    return ref_total, ref_disc, ref_total - ref_disc


def build_report(
    trace: SchwarzTrace,
    global_adjoint: FeFunction,
    family: AdjointFamily,
    problem: Problem,
    references: Optional[Tuple[float, float, float]] = None,
) -> ErrorReport:
    eta_total = total_estimate(trace, global_adjoint, problem)
    eta_disc, S = discretization_estimate(trace, family, problem, trace.decomp)
    report = ErrorReport(
        eta_total=eta_total,
        eta_disc=eta_disc,
        eta_iter=iteration_estimate(eta_total, eta_disc),
        S=S,
    )
    if references is not None:
        report.ref_total_err, report.ref_disc_err, report.ref_iter_err = references
    return report


@dataclass
class TwoStagePolicy:
    stage2_beta: float = DEFAULT_STAGE2_BETA
    degree: int = 1


def two_stage_advise(report: ErrorReport, policy: Optional[TwoStagePolicy] = None) -> Recommendation:
    """Pick the stage-two action from the split of the stage-one error.

    Dominant iteration error asks for more overlap; otherwise the subdomain
    with the largest |S_i| is refined, which for degree d should shrink its
    contribution by about 4**d.
    """
    policy = policy or TwoStagePolicy()
    if report.eta_iter == 0.0 and report.eta_disc == 0.0:
        return Recommendation(action="none", reason="estimated error is zero")
    if abs(report.eta_iter) > abs(report.eta_disc):
        return Recommendation(
            action="increase_overlap",
            new_beta=policy.stage2_beta,
            current=report.eta_iter,
            reason=f"|eta_I|={abs(report.eta_iter):.3e} exceeds |eta_D|={abs(report.eta_disc):.3e}",
        )
    if not report.S:
        return Recommendation(action="none", reason="no subdomain contributions")
    idx = int(np.argmax(np.abs(report.S)))
    current = report.S[idx]
    return Recommendation(
        action="refine_subdomain",
        target=idx + 1,
        current=current,
        predicted=current / 4**policy.degree,
        reason=f"subdomain {idx + 1} carries the largest discretization contribution {current:.3e}",
    )
