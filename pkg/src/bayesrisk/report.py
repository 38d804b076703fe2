"""
Risk reports: analytic values, Monte Carlo estimates and per-check verdicts.

The JSON form is the full report. The CSV form is one row per check. The
determinism hash covers everything except the ``provenance`` block, which
holds timings and library versions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("check", "analytic", "mc_value", "std_error", "tolerance", "verdict")

#: Named tolerances referenced by every verdict.
TOLERANCES = {
    "mc_4se": 4.0,
    "identity_rel_1e-10": 1e-10,
    "decomposition_abs_1e-12": 1e-12,
    "cf_5_over_sqrt_k": 5.0,
    "woodbury_rel_1e-9": 1e-9,
    "monotone_slack_1e-12": 1e-12,
}


@dataclass
class Check:
    """One verdict. `tolerance` is the absolute bound actually applied."""

    name: str
    passed: bool
    tolerance: float
    tolerance_name: str
    analytic: float | None = None
    mc_value: float | None = None
    std_error: float | None = None
    detail: str = ""

    def __post_init__(self):
        if self.tolerance_name not in TOLERANCES:
            raise ValueError(f"unknown tolerance name {self.tolerance_name!r}")
        self.passed = bool(self.passed)


@dataclass
class RiskReport:
    study: str
    seed: int
    analytic: dict = field(default_factory=dict)
    monte_carlo: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    selection: dict | None = None
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_mc(self, name: str, estimate) -> None:
        self.monte_carlo.append({"name": name, **estimate.to_dict()})

    def payload(self) -> dict:
        """Everything covered by the determinism hash."""
        return _plain(
            {
                "study": self.study,
                "seed": self.seed,
                "config": self.config,
                "analytic": self.analytic,
                "monte_carlo": self.monte_carlo,
                "checks": [asdict(c) for c in self.checks],
                "selection": self.selection,
                "passed": self.passed,
            }
        )

    def determinism_hash(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        out = self.payload()
        out["determinism_hash"] = self.determinism_hash()
        out["provenance"] = _plain(self.provenance)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RiskReport:
        return cls(
            study=data["study"],
            seed=data["seed"],
            analytic=data.get("analytic", {}),
            monte_carlo=data.get("monte_carlo", []),
            checks=[Check(**c) for c in data.get("checks", [])],
            selection=data.get("selection"),
            config=data.get("config", {}),
            provenance=data.get("provenance", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.checks:
            writer.writerow(
                [c.name, _num(c.analytic), _num(c.mc_value), _num(c.std_error), _num(c.tolerance),
                 "pass" if c.passed else "fail"]
            )
        return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            return None
        return x
    return obj


def emit(report: RiskReport, path: str | Path, format: str = "json") -> None:
    """Write `report` atomically; a failed write leaves no partial file."""
    if format == "json":
        text = report.to_json()
    elif format == "csv":
        text = report.to_csv()
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {format!r}")
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load(path: str | Path) -> RiskReport:
    return RiskReport.from_dict(json.loads(Path(path).read_text()))
