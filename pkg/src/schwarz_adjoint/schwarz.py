"""
Overlapping multiplicative and additive Schwarz iterations in lifted form.

Each subdomain solve computes a correction ``w`` in the homogeneous space of
the subdomain, ``a_i(w, v) = l_i(v) - a_i(U, v)``, so the local solution is
``U + w`` on the subdomain and agrees with ``U`` on its boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from schwarz_adjoint.constants import METHODS
from schwarz_adjoint.decomp import Decomposition
from schwarz_adjoint.fem import (
    BilinearForm,
    FeFunction,
    FeSpace,
    Problem,
    SubSpace,
    assemble_load,
    lagrange_space,
)
from schwarz_adjoint.solver import Factorization, LinearSystem, SolverError, solve

logger = logging.getLogger(__name__)


class SchwarzError(Exception):
    """Raised when a Schwarz sweep cannot complete."""


@dataclass
class SchwarzConfig:
    method: str = "multiplicative"
    K: int = 2
    tau: float = 1.0
    degree: int = 1
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise SchwarzError(f"Unknown Schwarz method '{self.method}'; expected one of {METHODS}")
        if int(self.K) != self.K or self.K < 1:
            raise SchwarzError(f"Iteration count K must be a positive integer, got {self.K}")
        if self.method == "additive" and not self.tau > 0:
            raise SchwarzError(f"Relaxation tau must be positive for additive Schwarz, got {self.tau}")


@dataclass
class SchwarzTrace:
    """Global iterates and every local solve of a Schwarz run.

    Multiplicative: ``iterates[k * p + s]`` is the iterate after ``s`` sub-steps
    of sweep ``k``; ``local_solves[(k, i)]`` for ``k = 0..K-1``.
    Additive: ``iterates[k]`` is ``U^k``; ``local_solves[(k, i)]`` for
    ``k = 1..K`` holds the solve that produced ``U^k``.
    Local solves are stored on the support of their subdomain and vanish elsewhere.
    """

    method: str
    space: FeSpace
    decomp: Decomposition
    K: int
    tau: float
    iterates: List[FeFunction] = field(default_factory=list)
    local_solves: Dict[Tuple[int, int], FeFunction] = field(default_factory=dict)

    @property
    def final(self) -> FeFunction:
        return self.iterates[-1]

    def global_iterate(self, k: int) -> FeFunction:
        """U^k after ``k`` complete iterations."""
        if self.method == "multiplicative":
            return self.iterates[k * self.decomp.p]
        return self.iterates[k]

    def solve_keys(self) -> List[Tuple[int, int]]:
        """Local-solve keys, iteration outer and subdomain inner, ascending."""
        return sorted(self.local_solves)


class LocalProblems:
    """Subdomain matrices and factorizations of one form on one space."""

    def __init__(self, problem: Problem, decomp: Decomposition, space: FeSpace, adjoint: bool = False):
        self.problem = problem
        self.decomp = decomp
        self.space = space
        self.form = BilinearForm(space, space, problem, adjoint=adjoint)
        self.subspaces: List[SubSpace] = []
        self.factorizations: List[Factorization] = []
        for sub in decomp.subdomains:
            subspace = space.restrict(sub.elements)
            matrix = self.form.assemble(sub.elements)
            reduced = LinearSystem.reduce(matrix, np.zeros(space.ndofs), subspace.free)
            try:
                factorization = Factorization(reduced.matrix)
            except SolverError as exc:
                raise SchwarzError(f"Subdomain {sub.label}: {exc}") from exc
            self.subspaces.append(subspace)
            self.factorizations.append(factorization)
        logger.debug(
            "Factorized %d subdomain systems at degree %d (adjoint=%s)",
            decomp.p,
            space.degree,
            adjoint,
        )

    def solve(self, i: int, rhs: np.ndarray) -> np.ndarray:
        """Solve on subdomain ``i`` for a full-length right-hand side; return extension by zero."""
        subspace = self.subspaces[i]
        local = self.factorizations[i].solve(rhs[subspace.free])
        return subspace.extend(local)

    def apply(self, u: FeFunction, elements: np.ndarray) -> np.ndarray:
        return self.form.apply(u, elements)


def _initial_iterate(space: FeSpace, config: SchwarzConfig) -> FeFunction:
    if config.initial is None:
        return space.zero()
    return space.function(np.array(config.initial, dtype=float))


def _local_loads(problem: Problem, decomp: Decomposition, space: FeSpace) -> List[np.ndarray]:
    return [assemble_load(space, problem.source, sub.elements) for sub in decomp.subdomains]


def run_multiplicative(
    problem: Problem,
    mesh,
    decomp: Decomposition,
    config: SchwarzConfig,
    local: Optional[LocalProblems] = None,
) -> SchwarzTrace:
    """K sweeps over the subdomains in the decomposition's sweep order."""
    if decomp.mesh is not mesh:
        raise SchwarzError("Decomposition was built on a different mesh")
    space = lagrange_space(mesh, config.degree)
    local = local or LocalProblems(problem, decomp, space)
    loads = _local_loads(problem, decomp, space)
    current = _initial_iterate(space, config)
    trace = SchwarzTrace("multiplicative", space, decomp, config.K, config.tau, [current])

    for k in range(config.K):
        for i in decomp.order:
            sub = decomp.subdomains[i]
            rhs = loads[i] - local.apply(current, sub.elements)
            try:
                correction = local.solve(i, rhs)
            except SolverError as exc:
                raise SchwarzError(f"Local solve failed at k={k}, i={sub.label}: {exc}") from exc
            current = FeFunction(space, current.coefficients + correction)
            trace.iterates.append(current)
            trace.local_solves[(k, i)] = FeFunction(
                space, local.subspaces[i].mask_support(current.coefficients)
            )
        logger.debug("Multiplicative sweep %d/%d done", k + 1, config.K)
    return trace


def run_additive(
    problem: Problem,
    mesh,
    decomp: Decomposition,
    config: SchwarzConfig,
    local: Optional[LocalProblems] = None,
) -> SchwarzTrace:
    """K relaxed additive iterations; all subdomains see the same iterate."""
    if decomp.mesh is not mesh:
        raise SchwarzError("Decomposition was built on a different mesh")
    space = lagrange_space(mesh, config.degree)
    local = local or LocalProblems(problem, decomp, space)
    loads = _local_loads(problem, decomp, space)
    current = _initial_iterate(space, config)
    trace = SchwarzTrace("additive", space, decomp, config.K, config.tau, [current])

    for k in range(1, config.K + 1):
        corrections = []
        for i, sub in enumerate(decomp.subdomains):
            rhs = loads[i] - local.apply(current, sub.elements)
            try:
                correction = local.solve(i, rhs)
            except SolverError as exc:
                raise SchwarzError(f"Local solve failed at k={k - 1}, i={sub.label}: {exc}") from exc
            corrections.append(correction)
            trace.local_solves[(k, i)] = FeFunction(
                space, local.subspaces[i].mask_support(current.coefficients + correction)
            )
        increment = np.zeros(space.ndofs)
        for correction in corrections:
            increment += correction
        current = FeFunction(space, current.coefficients + config.tau * increment)
        trace.iterates.append(current)
        logger.debug("Additive iteration %d/%d done", k, config.K)
    return trace


def run_schwarz(
    problem: Problem,
    mesh,
    decomp: Decomposition,
    config: SchwarzConfig,
    local: Optional[LocalProblems] = None,
) -> SchwarzTrace:
    if config.method == "multiplicative":
        return run_multiplicative(problem, mesh, decomp, config, local)
    return run_additive(problem, mesh, decomp, config, local)


def solve_global(problem: Problem, mesh, degree: int, adjoint: bool = False, load=None) -> FeFunction:
    """Monolithic Galerkin solution on the whole mesh with homogeneous Dirichlet data."""
    space = lagrange_space(mesh, degree)
    form = BilinearForm(space, space, problem, adjoint=adjoint)
    subspace = space.restrict(None)
    matrix = form.assemble(None)
    rhs = assemble_load(space, problem.source if load is None else load, None)
    solution = solve(LinearSystem.reduce(matrix, rhs, subspace.free))
    return FeFunction(space, subspace.extend(solution))
