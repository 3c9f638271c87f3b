# core/diagnostics.py
"""Rendering of results: human tables, JSON and fixed-column CSV."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

VERSION = "0.1.0"

COLUMNS: Dict[str, Sequence[str]] = {
    "distribution": ("pattern", "probability"),
    "loss": ("eta", "r", "g", "margin"),
    "growth": ("N", "p", "eta", "trials", "mean_pulses", "stderr", "mean_attempts"),
    "claims": ("claim", "expected", "observed", "tolerance", "passed"),
    "sweep": ("eta_e", "eta_d", "eta", "success_probability", "r", "fidelity"),
}


def _json_safe(x: Any):
    """
    Recursively convert objects so that json.dumps won't fail.
    - numpy scalars/arrays -> Python numbers/lists
    - complex -> [re, im]
    - enums -> value, dataclasses -> dict, Path -> str
    - fallback: str(x)
    """
    if isinstance(x, (str, bool)) or x is None:
        return x
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return [_json_safe(i) for i in x.tolist()]
    if isinstance(x, Enum):
        return x.value
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return _json_safe(dataclasses.asdict(x))
    if isinstance(x, (list, tuple, set, frozenset)):
        return [_json_safe(i) for i in x]
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, Exception):
        return f"{x.__class__.__name__}: {x}"
    return str(x)


def as_json(payload: Any) -> str:
    """Sorted keys so identical inputs give byte-identical files."""
    return json.dumps({"version": VERSION, "result": _json_safe(payload)}, indent=2, sort_keys=True) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def as_csv(rows: Iterable[Dict[str, Any]], kind: str) -> str:
    columns = COLUMNS[kind]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_text(text: str, path: Optional[Path]) -> None:
    if path is None:
        print(text, end="")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --------------------------------------------------------------------
# Human tables
# --------------------------------------------------------------------
def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def pretty_table(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
    if not rows:
        return "(no rows)\n"
    cells = [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells)
    return "\n".join(lines) + "\n"


def pretty_outcome(name: str, record: Dict[str, Any], fidelity: Optional[float] = None) -> str:
    lines = [f"{name}: {record['status']}"]
    lines.append(f"success probability: {record['probability']:.6f}")
    if fidelity is not None:
        lines.append(f"fidelity: {fidelity:.6f}")
    for b in record.get("branches", []):
        corr = " ".join(b["corrections"]) or "-"
        lines.append(f"  {b['pattern']}  p={b['probability']:.6f}  corrections: {corr}")
    return "\n".join(lines) + "\n"


def pretty_claims(rows: Sequence[Dict[str, Any]]) -> str:
    table = pretty_table(rows, COLUMNS["claims"])
    failed = sum(1 for r in rows if not r["passed"])
    verdict = "all claims pass" if not failed else f"{failed} claim(s) FAILED"
    return table + verdict + "\n"
