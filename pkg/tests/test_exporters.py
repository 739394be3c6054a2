"""
Tests for exporters module
"""

import json
import os
import sys

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.exporters import (
    csv_header,
    export_csv,
    export_json,
    export_md,
    export_two_stage_md,
    format_csv_row,
)
from schwarz_adjoint.models import (
    ErrorReport,
    ExperimentResult,
    Recommendation,
    RunInfo,
    TwoStageResult,
)


def _result(label="base", S=None, references=True, **info):
    S = S if S is not None else [4.0e-4, 2.56e-4]
    report = ErrorReport(eta_total=1.02e-3, eta_disc=sum(S), eta_iter=1.02e-3 - sum(S), S=S)
    if references:
        report.ref_total_err = 1.022e-3
        report.ref_disc_err = 6.57e-4
        report.ref_iter_err = 3.65e-4
    defaults = dict(label=label, nx=20, ny=20, beta=0.1, K=2, method="multiplicative", tau=1.0, px=2, py=1, vertices=441)
    defaults.update(info)
    return ExperimentResult(RunInfo(**defaults), report)


class TestExportCsv:
    """Test cases for export_csv function"""

    def test_header(self):
        assert csv_header() == [
            "nx",
            "ny",
            "beta",
            "K",
            "method",
            "tau",
            "eta_total",
            "gamma",
            "eta_disc",
            "gamma_D",
            "eta_iter",
        ]
        assert csv_header(extended=True, p=2)[-2:] == ["S_1", "S_2"]

    def test_row_format(self):
        row = format_csv_row(_result())

        assert row[:6] == ["20", "20", "1.00000e-01", "2", "multiplicative", "1.00000e+00"]
        assert row[6] == "1.02000e-03"
        assert row[8] == "6.56000e-04"
        assert len(row) == 11

    def test_missing_references_leave_gamma_empty(self):
        row = format_csv_row(_result(references=False))

        assert row[7] == ""
        assert row[9] == ""

    def test_extended_rows_are_padded(self, tmp_path):
        results = [_result(S=[1e-4, 2e-4, 3e-4, 4e-4], px=2, py=2), _result(S=[5e-4])]
        out = tmp_path / "t6.csv"

        text = export_csv(results, str(out), extended=True)

        lines = text.splitlines()
        assert lines[0].endswith(",S_1,S_2,S_3,S_4")
        assert lines[1].endswith(",1.00000e-04,2.00000e-04,3.00000e-04,4.00000e-04")
        assert lines[2].endswith(",5.00000e-04,,,")
        assert out.read_text(encoding="utf-8") == text

    def test_rows_keep_order(self):
        text = export_csv([_result(K=k) for k in (1, 2, 3)])

        ks = [line.split(",")[3] for line in text.splitlines()[1:]]
        assert ks == ["1", "2", "3"]

    def test_deterministic(self):
        assert export_csv([_result()]) == export_csv([_result()])


class TestExportJson:
    """Test cases for export_json function"""

    def test_bundle(self, tmp_path):
        rec = Recommendation(action="refine_subdomain", target=2, current=2.56e-4, predicted=6.4e-5)
        out = tmp_path / "report.json"

        text = export_json([_result()], str(out), recommendation=rec, config={"nx": 20})

        data = json.loads(text)
        assert data["config"] == {"nx": 20}
        assert data["recommendation"]["target"] == 2
        assert data["results"][0]["run"]["label"] == "base"
        assert data["results"][0]["report"]["S"] == [4.0e-4, 2.56e-4]
        assert json.loads(out.read_text(encoding="utf-8")) == data

    def test_without_extras(self):
        data = json.loads(export_json([]))

        assert data == {"results": []}


class TestExportMd:
    """Test cases for export_md function"""

    def test_table_rows(self):
        md = export_md([_result(), _result(label="40x40", nx=40, ny=40)], title="t1")

        assert md.startswith("# t1\n")
        assert "| base | 20x20 | 441 | 0.1 | 2 | 1.02e-03 |" in md
        assert "| 40x40 | 40x40 |" in md
        assert "## Subdomain contributions" in md

    def test_empty(self):
        assert "No runs." in export_md([])

    def test_two_stage_report(self, tmp_path):
        stage1 = _result(label="stage 1", S=[1e-4, -2e-4, -2e-4, 9e-4])
        stage2 = _result(label="stage 2", vertices=302)
        rec = Recommendation(action="refine_subdomain", target=4, current=9e-4, predicted=2.25e-4, reason="largest")
        out = tmp_path / "two_stage.md"

        md = export_two_stage_md(TwoStageResult(stage1, rec, stage2), str(out))

        assert "# Two-Stage Report" in md
        assert "**Target subdomain:** 4" in md
        assert "**Predicted S_4:** 2.25e-04" in md
        assert "| stage 2 |" in md
        assert out.read_text(encoding="utf-8") == md
