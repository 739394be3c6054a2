"""
Parameter sweeps reproducing the published result tables (t1..t13).

Every row reads beta as the total overlap width (overlap="width").
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

from schwarz_adjoint.config import ExperimentConfig
from schwarz_adjoint.constants import CANCELLATION_QOI_RECT, DEFAULT_TAU
from schwarz_adjoint.experiment import run_experiment
from schwarz_adjoint.models import ExperimentResult

logger = logging.getLogger(__name__)


class TableError(ValueError):
    """Raised for unknown table ids."""


@dataclass
class TableSpec:
    name: str
    title: str
    rows: List[ExperimentConfig]
    extended: bool = False


def _poisson_sweep(method: str, px: int, py: int, tau: float) -> List[ExperimentConfig]:
    """Base row, larger overlap, base, more iterations, base, finer mesh."""
    base = ExperimentConfig(
        problem="poisson", nx=20, ny=20, px=px, py=py, beta=0.1, overlap="width", K=2, method=method, tau=tau
    )
    return [
        replace(base, label="base"),
        replace(base, beta=0.2, label="beta=0.2"),
        replace(base, label="base"),
        replace(base, K=4, label="K=4"),
        replace(base, label="base"),
        replace(base, nx=40, ny=40, label="40x40"),
    ]


def _cancellation(method: str, tau: float) -> List[ExperimentConfig]:
    base = ExperimentConfig(
        problem="poisson",
        nx=40,
        ny=40,
        px=2,
        py=1,
        beta=0.05,
        overlap="width",
        method=method,
        tau=tau,
        qoi_rect=list(CANCELLATION_QOI_RECT),
    )
    return [replace(base, K=K, label=f"K={K}") for K in range(1, 11)]


def _convdiff(method: str, tau: float) -> List[ExperimentConfig]:
    base = ExperimentConfig(problem="convdiff", nx=20, ny=20, beta=0.1, overlap="width", method=method, tau=tau)
    rows = []
    for px, py in ((4, 1), (1, 4)):
        for K in (2, 4, 6):
            rows.append(replace(base, px=px, py=py, K=K, label=f"{px}x{py} K={K}"))
    return rows


def _two_stage_discretization(method: str, tau: float) -> List[ExperimentConfig]:
    base = ExperimentConfig(
        problem="poisson", nx=10, ny=10, px=2, py=2, beta=0.2, overlap="width", K=6, method=method, tau=tau
    )
    return [
        replace(base, label="stage 1"),
        replace(base, refine_subdomain=4, label="stage 2"),
        replace(base, nx=20, ny=20, label="uniform"),
    ]


def _two_stage_iteration(method: str, tau: float) -> List[ExperimentConfig]:
    base = ExperimentConfig(
        problem="poisson", nx=40, ny=40, px=2, py=2, beta=0.05, overlap="width", K=2, method=method, tau=tau
    )
    return [replace(base, label="stage 1"), replace(base, beta=0.2, label="stage 2")]


def _build_tables() -> Dict[str, TableSpec]:
    tables: Dict[str, TableSpec] = {}
    for offset, method, tau in ((0, "multiplicative", 1.0), (7, "additive", DEFAULT_TAU)):
        kind = method.capitalize()
        entries = [
            (1, f"{kind} Schwarz, Poisson, 2x1 subdomains", _poisson_sweep(method, 2, 1, tau), False),
            (2, f"{kind} Schwarz, Poisson, 4x1 subdomains", _poisson_sweep(method, 4, 1, tau), False),
            (3, f"{kind} Schwarz, Poisson, 4x4 subdomains", _poisson_sweep(method, 4, 4, tau), False),
            (4, f"{kind} Schwarz, cancellation of error components", _cancellation(method, tau), False),
            (5, f"{kind} Schwarz, convection-diffusion", _convdiff(method, tau), False),
            (6, f"{kind} Schwarz, two-stage strategy for discretization error", _two_stage_discretization(method, tau), True),
            (7, f"{kind} Schwarz, two-stage strategy for iteration error", _two_stage_iteration(method, tau), False),
        ]
        for number, title, rows, extended in entries:
            if method == "additive" and number == 4:
                continue
            index = number + offset - (1 if method == "additive" and number > 4 else 0)
            name = f"t{index}"
            tables[name] = TableSpec(name, title, rows, extended)
    return tables


# t1-t7 multiplicative, t8-t13 additive (no additive cancellation table).
TABLES: Dict[str, TableSpec] = _build_tables()


def table_configs(name: str) -> TableSpec:
    key = name.strip().lower()
    if key not in TABLES:
        raise TableError(f"Unknown table '{name}'; expected one of {', '.join(TABLES)}")
    return TABLES[key]


def run_table(
    name: str,
    jobs: int = 1,
    overrides: Optional[Callable[[ExperimentConfig], ExperimentConfig]] = None,
    on_row: Optional[Callable[[int, ExperimentResult], None]] = None,
) -> List[ExperimentResult]:
    """Run every row of a table; results come back in declared row order."""
    spec = table_configs(name)
    rows = [overrides(cfg) if overrides else cfg for cfg in spec.rows]
    logger.info("Running table %s (%d rows, jobs=%d)", spec.name, len(rows), jobs)
    if jobs <= 1:
        results = []
        for idx, cfg in enumerate(rows):
            result = run_experiment(cfg)
            results.append(result)
            if on_row:
                on_row(idx, result)
        return results
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        results = list(executor.map(run_experiment, rows))
    if on_row:
        for idx, result in enumerate(results):
            on_row(idx, result)
    return results
