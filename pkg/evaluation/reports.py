"""
Deterministic report rendering.

Reports are JSON with keys sorted and every float printed with exactly six
decimals, so identical inputs give byte-identical files. Non-finite values
are rejected before anything is written.
"""
import hashlib
import json
import logging
import math
import numbers
import sys
from pathlib import Path
from typing import Any, Mapping, Optional

from avrag.exceptions import DataIOError, ReportError

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "jsonl")


def _float(value: float, where: str) -> str:
    if not math.isfinite(value):
        raise ReportError(f"non-finite value {value!r} at {where or '<root>'}")
    # + 0.0 turns -0.0 into 0.0
    return f"{round(value, 6) + 0.0:.6f}"


def _render(value: Any, where: str, indent: Optional[int], depth: int) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return _float(float(value), where)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)

    if indent is None:
        newline, pad, closing_pad, separator = "", "", "", ", "
    else:
        newline = "\n"
        pad = " " * (indent * (depth + 1))
        closing_pad = " " * (indent * depth)
        separator = ","

    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = []
        for key in sorted(value, key=str):
            rendered = _render(value[key], f"{where}.{key}" if where else str(key), indent, depth + 1)
            items.append(f"{pad}{json.dumps(str(key), ensure_ascii=False)}: {rendered}")
        return "{" + newline + (separator + newline).join(items) + newline + closing_pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [
            f"{pad}{_render(item, f'{where}[{position}]', indent, depth + 1)}"
            for position, item in enumerate(value)
        ]
        return "[" + newline + (separator + newline).join(items) + newline + closing_pad + "]"
    raise ReportError(f"cannot serialize {type(value).__name__} at {where or '<root>'}")


def render_report(report: Mapping[str, Any], fmt: str = "json") -> str:
    """Report text, newline-terminated; "json" is indented, "jsonl" one line."""
    if fmt not in REPORT_FORMATS:
        raise ReportError(f"unknown report format {fmt!r}")
    return _render(report, "", 2 if fmt == "json" else None, 0) + "\n"


def report_digest(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def write_report(report: Mapping[str, Any], path: str = "-", fmt: str = "json", stdout=None) -> str:
    """
    Render and write a report; path "-" writes to stdout.

    Returns the rendered text.
    """
    text = render_report(report, fmt)
    if path == "-":
        (stdout or sys.stdout).write(text)
        return text
    try:
        Path(path).write_text(text, encoding='utf-8')
    except OSError as e:
        raise DataIOError(f"{path}: cannot write report ({e})") from e
    logger.info(f"Report written to {path}")
    return text
