"""
Global adjoint and the backward adjoint cascades of both Schwarz variants.

All members live in the whole-mesh space of degree ``q`` and vanish outside
their subdomain (homogeneous Dirichlet data on the subdomain boundary).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from schwarz_adjoint.decomp import Decomposition, QoiData
from schwarz_adjoint.fem import FeFunction, FeSpace, Problem, assemble_load, lagrange_space
from schwarz_adjoint.schwarz import LocalProblems, SchwarzError, solve_global
from schwarz_adjoint.solver import SolverError

logger = logging.getLogger(__name__)


class AdjointError(Exception):
    """Raised when an adjoint solve fails."""


@dataclass
class AdjointFamily:
    """Adjoint members keyed like the local solves of the matching trace.

    Multiplicative: ``members[(Q, i)]`` for ``Q = 0..K-1``.
    Additive: ``members[(k, i)]`` for ``k = 1..K`` and ``tails[(k, i)]`` the
    sum of members of levels ``k+1..K``.
    """

    variant: str
    space: FeSpace
    K: int
    members: Dict[Tuple[int, int], FeFunction] = field(default_factory=dict)
    tails: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    def keys(self) -> List[Tuple[int, int]]:
        return sorted(self.members)


def solve_global_adjoint(problem: Problem, mesh, degree: int, psi) -> FeFunction:
    """Solve a(v, phi) = (psi, v) for all v on the whole mesh."""
    try:
        phi = solve_global(problem, mesh, degree, adjoint=True, load=psi)
    except SolverError as exc:
        raise AdjointError(f"Global adjoint solve failed: {exc}") from exc
    logger.debug("Solved global adjoint with %d DOFs", phi.space.ndofs)
    return phi


def _qoi_loads(space: FeSpace, decomp: Decomposition, qoi: QoiData) -> List[np.ndarray]:
    """Per subdomain i: sum over j of (psi_j, v) on the overlap of i and j."""
    pieces = qoi.pieces()
    loads = []
    for i in range(decomp.p):
        total = np.zeros(space.ndofs)
        for j in range(decomp.p):
            elems = decomp.overlap(i, j)
            if elems.size:
                total += assemble_load(space, pieces[j], elems)
        loads.append(total)
    return loads


def _local_adjoint_problems(problem: Problem, decomp: Decomposition, space: FeSpace) -> LocalProblems:
    try:
        return LocalProblems(problem, decomp, space, adjoint=True)
    except SchwarzError as exc:
        raise AdjointError(str(exc)) from exc


def _solve(local: LocalProblems, i: int, rhs: np.ndarray, context: str) -> FeFunction:
    try:
        return FeFunction(local.space, local.solve(i, rhs))
    except SolverError as exc:
        raise AdjointError(f"Adjoint solve failed at {context}: {exc}") from exc


def solve_multiplicative_adjoints(
    problem: Problem,
    decomp: Decomposition,
    K: int,
    qoi: QoiData,
    degree: int,
) -> AdjointFamily:
    """Backward cascade over sweeps ``Q = K-1..0`` and sweep positions ``p..1``.

    Couplings to members later in the same sweep use level ``Q``; couplings to
    earlier members use level ``Q + 1``. Only the last sweep sees the QoI.
    """
    space = lagrange_space(decomp.mesh, degree)
    local = _local_adjoint_problems(problem, decomp, space)
    final_loads = _qoi_loads(space, decomp, qoi)
    order = decomp.order
    family = AdjointFamily("multiplicative", space, K)

    for Q in range(K - 1, -1, -1):
        for pos in range(decomp.p - 1, -1, -1):
            i = order[pos]
            rhs = final_loads[i].copy() if Q == K - 1 else np.zeros(space.ndofs)
            for earlier in order[:pos]:
                elems = decomp.overlap(i, earlier)
                if Q < K - 1 and elems.size:
                    rhs -= local.apply(family.members[(Q + 1, earlier)], elems)
            for later in order[pos + 1 :]:
                elems = decomp.overlap(i, later)
                if elems.size:
                    rhs -= local.apply(family.members[(Q, later)], elems)
            label = decomp.subdomains[i].label
            family.members[(Q, i)] = _solve(local, i, rhs, f"Q={Q}, i={label}")
        logger.debug("Multiplicative adjoint level Q=%d done", Q)
    return family


def solve_additive_adjoints(
    problem: Problem,
    decomp: Decomposition,
    K: int,
    tau: float,
    qoi: QoiData,
    degree: int,
) -> AdjointFamily:
    """Backward cascade over ``k = K..1``; the subdomain solves of one level are independent."""
    space = lagrange_space(decomp.mesh, degree)
    local = _local_adjoint_problems(problem, decomp, space)
    qoi_loads = _qoi_loads(space, decomp, qoi)
    family = AdjointFamily("additive", space, K)
    tails = [np.zeros(space.ndofs) for _ in range(decomp.p)]

    for k in range(K, 0, -1):
        for i in range(decomp.p):
            family.tails[(k, i)] = tails[i].copy()
        level = []
        for i in range(decomp.p):
            rhs = qoi_loads[i].copy()
            for j in range(decomp.p):
                elems = decomp.overlap(i, j)
                if elems.size and np.any(tails[j]):
                    rhs -= local.apply(FeFunction(space, tails[j]), elems)
            label = decomp.subdomains[i].label
            level.append(_solve(local, i, tau * rhs, f"k={k}, i={label}"))
        for i, member in enumerate(level):
            family.members[(k, i)] = member
            tails[i] = tails[i] + member.coefficients
        logger.debug("Additive adjoint level k=%d done", k)
    return family
