"""
Export functionality for error reports
"""

import csv
import io
import json
from typing import Any, Dict, List, Optional, Sequence

from schwarz_adjoint.constants import CSV_COLUMNS, CSV_FLOAT_FORMAT
from schwarz_adjoint.models import ExperimentResult, Recommendation, TwoStageResult


def _num(value: Optional[float]) -> str:
    if value is None:
        return ""
    return CSV_FLOAT_FORMAT.format(float(value))


def csv_header(extended: bool = False, p: int = 0) -> List[str]:
    header = list(CSV_COLUMNS)
    if extended:
        header.extend(f"S_{i}" for i in range(1, p + 1))
    return header


def format_csv_row(result: ExperimentResult, extended: bool = False, p: int = 0) -> List[str]:
    info, report = result.info, result.report
    row = [
        str(info.nx),
        str(info.ny),
        _num(info.beta),
        str(info.K),
        info.method,
        _num(info.tau),
        _num(report.eta_total),
        _num(report.gamma),
        _num(report.eta_disc),
        _num(report.gamma_D),
        _num(report.eta_iter),
    ]
    if extended:
        values = list(report.S) + [None] * max(0, p - len(report.S))
        row.extend(_num(v) for v in values[:p])
    return row


def export_csv(
    results: Sequence[ExperimentResult],
    out_path: Optional[str] = None,
    extended: bool = False,
) -> str:
    """
    Export results as CSV rows in the given order.
    """
    p = max((len(r.report.S) for r in results), default=0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(csv_header(extended, p))
    for result in results:
        writer.writerow(format_csv_row(result, extended, p))
    s = buffer.getvalue()
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as f:
            f.write(s)
    return s


def export_json(
    results: Sequence[ExperimentResult],
    out_path: Optional[str] = None,
    recommendation: Optional[Recommendation] = None,
    config: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Export results (and the stage-two recommendation) to JSON format.
    """
    obj: Dict[str, Any] = {"results": [r.to_dict() for r in results]}
    if config is not None:
        obj["config"] = config
    if recommendation is not None:
        obj["recommendation"] = recommendation.to_dict()
    s = json.dumps(obj, ensure_ascii=False, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(s)
    return s


def _md_num(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2e}"


def export_md(
    results: Sequence[ExperimentResult],
    title: str = "Error Report",
    output_file: Optional[str] = None,
) -> str:
    """
    Export results to a Markdown table
    """
    md_content = f"# {title}\n\n"
    if not results:
        md_content += "No runs.\n"
        return md_content

    md_content += "| Run | Mesh | Vertices | beta | K | Estimate | gamma | e_D | gamma_D | e_I |\n"
    md_content += "|-----|------|----------|------|---|----------|-------|-----|---------|-----|\n"
    for result in results:
        info, report = result.info, result.report
        gamma = "-" if report.gamma is None else f"{report.gamma:.3f}"
        gamma_d = "-" if report.gamma_D is None else f"{report.gamma_D:.3f}"
        md_content += (
            f"| {info.label or info.method} | {info.nx}x{info.ny} | {info.vertices} | {info.beta:g} | {info.K} "
            f"| {_md_num(report.eta_total)} | {gamma} | {_md_num(report.eta_disc)} | {gamma_d} "
            f"| {_md_num(report.eta_iter)} |\n"
        )

    with_s = [r for r in results if r.report.S and len(r.report.S) > 1]
    if with_s:
        md_content += "\n## Subdomain contributions\n\n"
        for result in with_s:
            values = ", ".join(f"S_{i}={s:.2e}" for i, s in enumerate(result.report.S, start=1))
            md_content += f"- {result.info.label or result.info.method}: {values}\n"

    if output_file:
        with open(output_file, "w", encoding="utf-8") as f:
            f.write(md_content)

    return md_content


def export_two_stage_md(result: TwoStageResult, output_file: Optional[str] = None) -> str:
    md_content = export_md(result.results(), title="Two-Stage Report")
    rec = result.recommendation
    md_content += "\n## Recommendation\n\n"
    md_content += f"**Action:** {rec.action}\n\n"
    if rec.target is not None:
        md_content += f"**Target subdomain:** {rec.target}\n\n"
    if rec.predicted is not None:
        md_content += f"**Predicted S_{rec.target}:** {rec.predicted:.2e}\n\n"
    if rec.new_beta is not None:
        md_content += f"**New overlap:** {rec.new_beta:g}\n\n"
    if rec.reason:
        md_content += f"**Why:** {rec.reason}\n"
    if output_file:
        with open(output_file, "w", encoding="utf-8") as f:
            f.write(md_content)
    return md_content
