"""
Data models for schwarz-adjoint reports
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class ErrorReport:
    eta_total: float
    eta_disc: float
    eta_iter: float
    S: List[float] = field(default_factory=list)  # per subdomain, 1..p
    ref_total_err: Optional[float] = None
    ref_disc_err: Optional[float] = None
    ref_iter_err: Optional[float] = None

    @property
    def gamma(self) -> Optional[float]:
        return _ratio(self.eta_total, self.ref_total_err)

    @property
    def gamma_D(self) -> Optional[float]:
        return _ratio(self.eta_disc, self.ref_disc_err)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta_total": self.eta_total,
            "eta_disc": self.eta_disc,
            "eta_iter": self.eta_iter,
            "S": list(self.S),
            "ref_total_err": self.ref_total_err,
            "ref_disc_err": self.ref_disc_err,
            "ref_iter_err": self.ref_iter_err,
            "gamma": self.gamma,
            "gamma_D": self.gamma_D,
        }


def _ratio(estimate: float, reference: Optional[float]) -> Optional[float]:
    if reference is None:
        return None
    if reference == 0.0:
        return 1.0 if estimate == 0.0 else None
    return estimate / reference


@dataclass
class Recommendation:
    action: str  # refine_subdomain / increase_overlap / none
    target: Optional[int] = None  # one-based subdomain number
    current: Optional[float] = None
    predicted: Optional[float] = None
    new_beta: Optional[float] = None
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "action": self.action,
            "target": self.target,
            "current": self.current,
            "predicted": self.predicted,
            "new_beta": self.new_beta,
            "reason": self.reason,
        }


@dataclass
class RunInfo:
    label: str = ""
    nx: int = 0
    ny: int = 0
    beta: float = 0.0
    K: int = 0
    method: str = ""
    tau: float = 1.0
    px: int = 1
    py: int = 1
    vertices: int = 0
    triangles: int = 0


@dataclass
class ExperimentResult:
    info: RunInfo
    report: ErrorReport
    recommendation: Optional[Recommendation] = None
    qoi_value: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"run": dict(self.info.__dict__), "report": self.report.to_dict()}
        if self.qoi_value is not None:
            out["qoi"] = self.qoi_value
        if self.recommendation is not None:
            out["recommendation"] = self.recommendation.to_dict()
        return out


@dataclass
class TwoStageResult:
    stage1: ExperimentResult
    recommendation: Recommendation
    stage2: Optional[ExperimentResult] = None
    uniform: Optional[ExperimentResult] = None

    def results(self) -> List[ExperimentResult]:
        rows = [self.stage1]
        if self.stage2 is not None:
            rows.append(self.stage2)
        if self.uniform is not None:
            rows.append(self.uniform)
        return rows
