import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import jinja2
import jsonlines
import numpy as np

from asymlab.config import asymlab_home

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_ASSERTION = 2

SUMMARY_TEMPLATE = Path(__file__).parent / "templates" / "summary.md.j2"


@dataclass
class Check:
    """One numeric claim of a run block and the tolerance it was checked against."""
    name: str
    value: object
    tolerance: object
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "passed": bool(self.passed), "detail": self.detail}


@dataclass
class BlockResult:
    index: int
    kind: str
    name: str = ""
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    incomplete: bool = False
    error: str | None = None

    def check(self, name, value, tolerance, passed, detail=""):
        self.checks.append(Check(name, value, tolerance, bool(passed), detail))

    @property
    def passed(self):
        return not self.incomplete and all(c.passed for c in self.checks)

    @property
    def label(self):
        return self.name or f"{self.index:02d}-{self.kind}"

    def to_dict(self):
        return {"index": self.index, "kind": self.kind, "name": self.name, "incomplete": self.incomplete,
                "error": self.error, "passed": self.passed, "checks": [c.to_dict() for c in self.checks],
                "artifacts": list(self.artifacts), "data": self.data}


def exit_code(results):
    if any(r.incomplete for r in results):
        return EXIT_OPERATIONAL
    if any(not r.passed for r in results):
        return EXIT_ASSERTION
    return EXIT_OK


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    return value


def to_json(value, indent=2, level=0):
    """
    JSON text with floats written to 17 significant digits and non-finite
    floats as the strings "nan", "inf", "-inf". Key order is preserved.
    """
    value = _plain(value)
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return _scalar(value)
    if isinstance(value, float):
        if math.isnan(value):
            return '"nan"'
        if math.isinf(value):
            return '"inf"' if value > 0 else '"-inf"'
        return format(value, ".17g")
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_scalar(str(k))}: {to_json(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{pad}{to_json(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    return _scalar(str(value))


def _scalar(value):
    return json.dumps(value, ensure_ascii=False)


def emit_report(results, out_dir, config=None, timestamp=None):
    """
    Write `report.json` and `summary.md` for a list of BlockResult.

    Returns:
        dict: the report as written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = sorted(results, key=lambda r: r.index)
    report = {
        "timestamp": timestamp or datetime.now().isoformat(),
        "seed": config.seed if config else None,
        "exit_code": exit_code(results),
        "incomplete": any(r.incomplete for r in results),
        "passed": all(r.passed for r in results),
        "tolerances": dict(config.tolerances) if config else {},
        "blocks": [r.to_dict() for r in results],
    }
    (out_dir / "report.json").write_text(to_json(report) + "\n", encoding="utf-8")
    template = jinja2.Template(SUMMARY_TEMPLATE.read_text(encoding="utf-8"))
    (out_dir / "summary.md").write_text(template.render(report=report), encoding="utf-8")
    return report


class RunLedger:
    """Append-only record of completed runs in `~/.asymlab/runs.jsonl`."""

    def __init__(self, home=None):
        self.home = Path(home) if home else asymlab_home()
        self.path = self.home / "runs.jsonl"

    def record(self, config_path, seed, status, code, out_dir):
        self.home.mkdir(parents=True, exist_ok=True)
        with jsonlines.open(self.path, mode="a") as writer:
            writer.write({
                "config": str(config_path) if config_path else None,
                "seed": seed,
                "status": status,
                "exit_code": code,
                "output": str(out_dir),
                "dateCreated": datetime.now().isoformat(),
            })

    def entries(self):
        if not self.path.exists():
            return []
        with jsonlines.open(self.path) as reader:
            return list(reader)
