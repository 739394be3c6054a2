"""
Direct sparse solves for the reduced finite element systems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12


class SolverError(Exception):
    """Raised when a linear system is singular or cannot be solved accurately."""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass
class LinearSystem:
    """Square system over the free DOFs ``free`` of a larger space."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n_rows, n_cols = self.matrix.shape
        if n_rows != n_cols:
            raise SolverError(f"System matrix must be square, got {n_rows}x{n_cols}")
        if n_rows != len(self.free) or self.rhs.shape != (n_rows,):
            raise SolverError(
                f"Dimension mismatch: matrix {n_rows}, rhs {self.rhs.shape}, free DOFs {len(self.free)}"
            )

    @classmethod
    def reduce(cls, matrix: sp.spmatrix, rhs: np.ndarray, free: np.ndarray) -> "LinearSystem":
        """Keep only free rows and columns (homogeneous Dirichlet elimination)."""
        matrix = sp.csr_matrix(matrix)
        return cls(matrix[free][:, free], np.asarray(rhs)[free], np.asarray(free))


class Factorization:
    """Reusable LU factorization of a square sparse matrix."""

    def __init__(self, matrix: sp.spmatrix):
        self.matrix = sp.csc_matrix(matrix)
        n = self.matrix.shape[0]
        if n == 0:
            self._lu = None
            return
        structural = np.flatnonzero(np.diff(self.matrix.indptr) == 0)
        if structural.size:
            raise SolverError(
                f"Matrix is structurally singular: column {int(structural[0])} is empty",
                pivot=int(structural[0]),
            )
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as exc:
            pivot = _dense_zero_pivot(self.matrix)
            raise SolverError(f"Sparse LU failed at pivot {pivot}: {exc}", pivot=pivot) from exc
        diag = self._lu.U.diagonal()
        zero = np.flatnonzero(diag == 0.0)
        if zero.size:
            pivot = int(self._lu.perm_c[zero[0]])
            raise SolverError(f"Matrix is singular at pivot {pivot}", pivot=pivot)
        logger.debug("Factorized %dx%d matrix with %d nonzeros", n, n, self.matrix.nnz)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def solve(self, rhs: np.ndarray, trans: bool = False) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self._lu is None:
            return np.zeros(0)
        mode = "T" if trans else "N"
        operator = self.matrix.T if trans else self.matrix
        x = self._lu.solve(rhs, trans=mode)
        scale = np.linalg.norm(rhs)
        residual = rhs - operator @ x
        if np.linalg.norm(residual) > RESIDUAL_TOL * scale:
            x = x + self._lu.solve(residual, trans=mode)
            residual = rhs - operator @ x
        if not np.all(np.isfinite(x)):
            raise SolverError("Solution contains non-finite values")
        rel = np.linalg.norm(residual) / scale if scale > 0 else np.linalg.norm(residual)
        if rel > RESIDUAL_TOL:
            logger.warning("Relative residual %.3e above %.0e after refinement", rel, RESIDUAL_TOL)
        return x


def _dense_zero_pivot(matrix: sp.spmatrix) -> Optional[int]:
    """Index of the first vanishing pivot of a dense LU, for diagnostics."""
    if matrix.shape[0] > 4000:
        return None
    _, _, upper = scipy.linalg.lu(matrix.toarray())
    diag = np.abs(np.diag(upper))
    scale = max(float(diag.max(initial=0.0)), 1.0)
    small = np.flatnonzero(diag <= np.finfo(float).eps * scale * matrix.shape[0])
    return int(small[0]) if small.size else None


def solve(system: LinearSystem) -> np.ndarray:
    """Solve a reduced system by sparse LU with one refinement step."""
    return Factorization(system.matrix).solve(system.rhs)
