#!/usr/bin/env python3
"""
Table reproduction check for schwarz-adjoint
--------------------------------------------
Runs `schwarz-adjoint table <id>` for every table named in `expected_values.json`,
compares the CSV cells against the tabulated values, and reports hits per table.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, List, Optional

SCRIPT_DIR = Path(__file__).resolve().parent
DEFAULT_BENCH_ROOT = SCRIPT_DIR.parent
DEFAULT_REPO_ROOT = DEFAULT_BENCH_ROOT.parent
DEFAULT_EXPECTED = DEFAULT_BENCH_ROOT / "tables" / "expected_values.json"
DEFAULT_REPORT_DIR = DEFAULT_REPO_ROOT / "reports" / "benchmarks"


def emit_output(text: str, output_path: Optional[Path]) -> None:
    """Print output and optionally persist it to a file."""
    print(text)
    if not output_path:
        return
    output_path = output_path.expanduser()
    output_path.parent.mkdir(parents=True, exist_ok=True)
    if not text.endswith("\n"):
        text = f"{text}\n"
    output_path.write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Compare regenerated result tables against tabulated values.")
    parser.add_argument(
        "--expected",
        type=Path,
        default=DEFAULT_EXPECTED,
        help="Expectation file (default: %(default)s).",
    )
    parser.add_argument(
        "--report-dir",
        type=Path,
        default=DEFAULT_REPORT_DIR,
        help="Directory for the generated CSV files (default: %(default)s).",
    )
    parser.add_argument("--tables", nargs="+", help="Only check these table ids (default: all).")
    parser.add_argument("--jobs", type=int, default=1, help="Rows run concurrently per table.")
    parser.add_argument(
        "--reuse",
        action="store_true",
        help="Reuse CSV files already present in the report directory.",
    )
    parser.add_argument("--tolerance", type=float, help="Override the default relative tolerance.")
    parser.add_argument("--json", action="store_true", help="Return results as JSON.")
    parser.add_argument("--out-file", type=Path, help="Write the printed results to this file as well.")
    return parser


def load_expected(path: Path) -> Dict[str, Any]:
    with path.open(encoding="utf-8") as handle:
        return json.load(handle)


def run_table(name: str, csv_path: Path, jobs: int) -> None:
    cmd = ["schwarz-adjoint", "table", name, "--jobs", str(jobs), "--output", str(csv_path)]
    try:
        subprocess.run(cmd, check=True, capture_output=True, text=True)
    except FileNotFoundError:  # pragma: no cover - runtime environment issue
        print("schwarz-adjoint CLI not found on PATH.", file=sys.stderr)
        sys.exit(5)
    except subprocess.CalledProcessError as exc:  # pragma: no cover - CLI error bubble up
        print(f"schwarz-adjoint table {name} failed:", file=sys.stderr)
        if exc.stderr:
            print(exc.stderr, file=sys.stderr)
        sys.exit(exc.returncode)


def read_rows(csv_path: Path) -> List[Dict[str, str]]:
    with csv_path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def check_entry(entry: Dict[str, Any], rows: List[Dict[str, str]], tolerance: float) -> Dict[str, Any]:
    row = entry["row"]
    cell = rows[row].get(entry["column"], "") if row < len(rows) else ""
    expected = float(entry["value"])
    result = {"id": entry["id"], "expected": expected, "actual": None, "deviation": None, "matched": False}
    if not cell:
        return result
    actual = float(cell)
    result["actual"] = actual
    if entry.get("sign_only"):
        result["matched"] = actual * expected > 0
        return result
    deviation = abs(actual - expected) / abs(expected)
    result["deviation"] = deviation
    result["matched"] = deviation <= entry.get("tolerance", tolerance)
    return result


def main() -> None:
    args = build_parser().parse_args()
    data = load_expected(args.expected)
    tolerance = args.tolerance if args.tolerance is not None else float(data.get("tolerance", 0.15))

    by_table: Dict[str, List[Dict[str, Any]]] = defaultdict(list)
    for entry in data.get("expected", []):
        by_table[entry["table"]].append(entry)
    if args.tables:
        missing = set(args.tables) - set(by_table)
        if missing:
            print(f"No expectations for tables: {', '.join(sorted(missing))}", file=sys.stderr)
            sys.exit(7)
        by_table = {name: by_table[name] for name in args.tables}

    report_dir = args.report_dir.resolve()
    report_dir.mkdir(parents=True, exist_ok=True)
    table_results = []
    for name, entries in by_table.items():
        csv_path = report_dir / f"{name}.csv"
        if not (args.reuse and csv_path.exists()):
            run_table(name, csv_path, args.jobs)
        rows = read_rows(csv_path)
        checks = [check_entry(entry, rows, tolerance) for entry in entries]
        table_results.append(
            {
                "table": name,
                "csv": str(csv_path),
                "matched": sum(1 for c in checks if c["matched"]),
                "total": len(checks),
                "checks": checks,
            }
        )

    matched = sum(t["matched"] for t in table_results)
    total = sum(t["total"] for t in table_results)
    if args.json:
        payload = {"tables": table_results, "totals": {"matched": matched, "total": total, "tolerance": tolerance}}
        emit_output(json.dumps(payload, indent=2), args.out_file)
        return

    lines: List[str] = []
    for table in table_results:
        lines.append(f"[{table['table']}] matched={table['matched']}/{table['total']}")
        for check in table["checks"]:
            if check["matched"]:
                continue
            actual = "missing" if check["actual"] is None else f"{check['actual']:.3e}"
            lines.append(f"  off : {check['id']} expected {check['expected']:.3e} got {actual}")
        lines.append(f"  csv : {table['csv']}")
    lines.append(f"TOTAL matched={matched}/{total} tolerance={tolerance}")
    emit_output("\n".join(lines), args.out_file)


if __name__ == "__main__":
    main()
