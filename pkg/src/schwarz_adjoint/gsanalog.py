"""
Block Gauss-Seidel on dense systems and its backward adjoint recursion.

The K sweeps of block Gauss-Seidel are one lower block-bidiagonal system
``C_gs X = b_stack`` over the stacked iterates; the adjoint recursion solves
``C_gs^T phi = (0, ..., 0, psi)`` block by block, so the QoI error of any
stacked guess equals its residual weighted by ``phi``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from schwarz_adjoint.solver import SolverError

logger = logging.getLogger(__name__)


@dataclass
class BlockSystem:
    matrix: np.ndarray
    sizes: Tuple[int, ...]
    b: np.ndarray
    _factors: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.sizes = tuple(int(s) for s in self.sizes)
        n = sum(self.sizes)
        if self.matrix.shape != (n, n) or self.b.shape != (n,):
            raise ValueError(
                f"Block sizes {self.sizes} do not match matrix {self.matrix.shape} and rhs {self.b.shape}"
            )
        self._factors = []
        for i in range(self.p):
            block = self.block(i, i)
            lu, piv = scipy.linalg.lu_factor(block, check_finite=True)
            zero = np.flatnonzero(np.diag(lu) == 0.0)
            if zero.size:
                raise SolverError(f"Diagonal block {i + 1} is singular", pivot=int(zero[0]))
            self._factors.append((lu, piv))

    @property
    def p(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def span(self, i: int) -> slice:
        off = self.offsets
        return slice(int(off[i]), int(off[i + 1]))

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[self.span(i), self.span(j)]

    def _block_mask(self, upper: bool) -> np.ndarray:
        mask = np.zeros_like(self.matrix, dtype=bool)
        for i in range(self.p):
            for j in range(self.p):
                if (j > i) == upper:
                    mask[self.span(i), self.span(j)] = True
        return mask

    @property
    def A(self) -> np.ndarray:
        """Block lower triangle including the diagonal blocks."""
        return np.where(self._block_mask(upper=False), self.matrix, 0.0)

    @property
    def B(self) -> np.ndarray:
        """Strictly upper block triangle."""
        return np.where(self._block_mask(upper=True), self.matrix, 0.0)

    def solve_diagonal(self, i: int, rhs: np.ndarray, trans: bool = False) -> np.ndarray:
        return scipy.linalg.lu_solve(self._factors[i], rhs, trans=1 if trans else 0)


def gs_iterate(system: BlockSystem, x0: Optional[np.ndarray], K: int) -> List[np.ndarray]:
    """Iterates x^1..x^K of forward block Gauss-Seidel."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    x = np.zeros(system.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    iterates = []
    for _ in range(K):
        x = x.copy()
        for i in range(system.p):
            rows = system.span(i)
            rhs = system.b[rows] - system.matrix[rows] @ x + system.block(i, i) @ x[rows]
            x[rows] = system.solve_diagonal(i, rhs)
        iterates.append(x)
    return iterates


def gs_adjoint(system: BlockSystem, psi: np.ndarray, K: int) -> Dict[Tuple[int, int], np.ndarray]:
    """Adjoint blocks ``phi[(k, i)]`` for k = 1..K, computed backwards."""
    psi = np.asarray(psi, dtype=float)
    phi: Dict[Tuple[int, int], np.ndarray] = {}
    for k in range(K, 0, -1):
        for i in range(system.p - 1, -1, -1):
            rhs = psi[system.span(i)].copy() if k == K else np.zeros(system.sizes[i])
            for j in range(i + 1, system.p):
                rhs -= system.block(j, i).T @ phi[(k, j)]
            if k < K:
                for j in range(i):
                    rhs -= system.block(j, i).T @ phi[(k + 1, j)]
            phi[(k, i)] = system.solve_diagonal(i, rhs, trans=True)
    return phi


def stack_adjoint(system: BlockSystem, phi: Dict[Tuple[int, int], np.ndarray], K: int) -> np.ndarray:
    return np.concatenate([phi[(k, i)] for k in range(1, K + 1) for i in range(system.p)])


def build_cgs(system: BlockSystem, K: int) -> np.ndarray:
    """Lower block-bidiagonal operator of K sweeps: A on the diagonal, B below."""
    n = system.n
    C = np.zeros((K * n, K * n))
    A, B = system.A, system.B
    for k in range(K):
        C[k * n : (k + 1) * n, k * n : (k + 1) * n] = A
        if k > 0:
            C[k * n : (k + 1) * n, (k - 1) * n : k * n] = B
    return C


def stacked_rhs(system: BlockSystem, K: int, x0: Optional[np.ndarray] = None) -> np.ndarray:
    first = system.b.copy()
    if x0 is not None:
        first -= system.B @ np.asarray(x0, dtype=float)
    return np.concatenate([first] + [system.b] * (K - 1))


def stacked_qoi(psi: np.ndarray, K: int) -> np.ndarray:
    """QoI over the stack: only the final iterate is weighted."""
    psi = np.asarray(psi, dtype=float)
    return np.concatenate([np.zeros(psi.shape[0] * (K - 1)), psi])


def gs_error_identity(
    system: BlockSystem,
    x_hat: np.ndarray,
    psi: np.ndarray,
    K: int,
    x0: Optional[np.ndarray] = None,
) -> Tuple[float, float]:
    """Return ``((x - x_hat, psi), (b - C x_hat, phi))`` over the stacked iterates."""
    x_hat = np.asarray(x_hat, dtype=float).ravel()
    if x_hat.shape[0] != K * system.n:
        raise ValueError(f"Stacked iterate must have {K * system.n} entries, got {x_hat.shape[0]}")
    C = build_cgs(system, K)
    b_stack = stacked_rhs(system, K, x0)
    x_exact = np.linalg.solve(C, b_stack)
    phi = stack_adjoint(system, gs_adjoint(system, psi, K), K)
    lhs = float((x_exact - x_hat) @ stacked_qoi(psi, K))
    rhs = float((b_stack - C @ x_hat) @ phi)
    return lhs, rhs


def random_block_system(
    rng: np.random.Generator,
    p: int,
    block_size: int = 3,
    dominance: float = 2.0,
) -> Tuple[BlockSystem, np.ndarray]:
    """Strictly block-diagonally-dominant system with random rhs and QoI vector."""
    n = p * block_size
    matrix = rng.standard_normal((n, n))
    row_sums = np.abs(matrix).sum(axis=1)
    matrix[np.arange(n), np.arange(n)] += dominance * row_sums
    b = rng.standard_normal(n)
    psi = rng.standard_normal(n)
    return BlockSystem(matrix, (block_size,) * p, b), psi


@dataclass
class IdentityCheck:
    p: int
    K: int
    lhs: float
    rhs: float

    @property
    def violation(self) -> float:
        return abs(self.lhs - self.rhs) / max(1.0, abs(self.lhs))


def gs_check_sweep(
    n_systems: int = 50,
    seed: int = 20240501,
    ps: Sequence[int] = (1, 2, 4),
    Ks: Sequence[int] = (1, 3, 5),
    noise: float = 1e-3,
) -> List[IdentityCheck]:
    """Seeded sweep of the error identity over random systems and perturbed iterates."""
    rng = np.random.default_rng(seed)
    checks = []
    for s in range(n_systems):
        p = ps[s % len(ps)]
        K = Ks[(s // len(ps)) % len(Ks)]
        system, psi = random_block_system(rng, p)
        iterates = np.concatenate(gs_iterate(system, None, K))
        x_hat = iterates + noise * rng.standard_normal(iterates.shape[0])
        lhs, rhs = gs_error_identity(system, x_hat, psi, K)
        checks.append(IdentityCheck(p, K, lhs, rhs))
    worst = max(c.violation for c in checks) if checks else 0.0
    logger.info("Checked %d block systems, max identity violation %.3e", len(checks), worst)
    return checks
