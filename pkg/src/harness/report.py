"""
Report Module

ExperimentReport holds the raw per-rep p-values of every method and arm;
rejection rates are always recomputed from them. Reports are written as a
summary CSV plus a raw p-value sidecar, or as one JSON document.
"""

import json
import logging
import math
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

ARMS = ("type1", "power")
SUMMARY_COLUMNS = ["method", "setting", "alpha", "rejection_rate", "reps", "seed"]
PVALUE_COLUMNS = ["method", "setting", "rep", "p_value"]


def rejection_rate(p_values, alpha: float) -> float:
    """Share of finite p-values at or below alpha (NaN when none are finite)"""
    p = np.asarray(p_values, dtype=float)
    finite = np.isfinite(p)
    excluded = int(p.size - np.count_nonzero(finite))
    if excluded:
        logger.warning("rejection rate at alpha=%g excludes %d of %d reps with no p-value (quarantined)",
                       alpha, excluded, p.size)
    p = p[finite]
    if p.size == 0:
        return float("nan")
    return float(np.count_nonzero(p <= alpha)) / p.size


def _nan_to_none(values) -> List[Optional[float]]:
    return [None if v is None or math.isnan(v) else float(v) for v in values]


def _none_to_nan(values) -> List[float]:
    return [float("nan") if v is None else float(v) for v in values]


class ExperimentReport:
    """Outcome of one experiment: p-values per arm and method, plus diagnostics"""

    def __init__(self,
                 config: Dict,
                 setting: str,
                 p_values: Dict[str, Dict[str, List[float]]],
                 failures: Optional[Dict[str, Dict[str, int]]] = None,
                 unavailable: Optional[List[str]] = None,
                 diagnostics: Optional[Dict[str, float]] = None,
                 wall_clock: float = 0.0):
        """
        Initialize a report

        Args:
            config: Echo of the ExperimentConfig
            setting: Hidden-mask label, e.g. "setting1"
            p_values: arm -> method -> per-rep p-values (NaN for a failed rep)
            failures: arm -> method -> number of quarantined reps
            unavailable: Methods that were requested but are not implemented
            diagnostics: Oracle diagnostics
            wall_clock: Seconds spent
        """
        self.config = dict(config)
        self.setting = setting
        self.p_values = {arm: {method: [float(p) for p in values] for method, values in methods.items()}
                         for arm, methods in p_values.items()}
        self.failures = failures or {arm: {method: 0 for method in methods}
                                     for arm, methods in self.p_values.items()}
        self.unavailable = list(unavailable or [])
        self.diagnostics = dict(diagnostics or {})
        self.wall_clock = float(wall_clock)

    @property
    def seed(self) -> int:
        return int(self.config.get("seed", 0))

    @property
    def alphas(self) -> List[float]:
        return list(self.config.get("alphas", [0.05]))

    def methods(self) -> List[str]:
        seen = []
        for methods in self.p_values.values():
            seen.extend(m for m in methods if m not in seen)
        return seen

    def rejection_rate(self, arm: str, method: str, alpha: float) -> float:
        try:
            return rejection_rate(self.p_values[arm][method], alpha)
        except KeyError:
            raise InvalidInputError(f"report has no p-values for method '{method}' in arm '{arm}'")

    def summary_rows(self) -> List[Dict]:
        """One row per (method, arm, alpha), in method / arm / alpha order"""
        rows = []
        for method in self.methods():
            for arm in ARMS:
                if arm not in self.p_values or method not in self.p_values[arm]:
                    continue
                values = np.asarray(self.p_values[arm][method], dtype=float)
                for alpha in self.alphas:
                    rows.append({
                        "method": method,
                        "setting": f"{self.setting}-{arm}",
                        "alpha": alpha,
                        "rejection_rate": rejection_rate(values, alpha),
                        "reps": int(np.count_nonzero(np.isfinite(values))),
                        "seed": self.seed,
                    })
        return rows

    def p_value_rows(self) -> List[Dict]:
        rows = []
        for method in self.methods():
            for arm in ARMS:
                for rep, p in enumerate(self.p_values.get(arm, {}).get(method, [])):
                    rows.append({"method": method, "setting": f"{self.setting}-{arm}",
                                 "rep": rep, "p_value": p})
        return rows

    def to_dict(self) -> Dict:
        return {
            "setting": self.setting,
            "config": self.config,
            "p_values": {arm: {method: _nan_to_none(values) for method, values in methods.items()}
                         for arm, methods in self.p_values.items()},
            "failures": self.failures,
            "unavailable": self.unavailable,
            "diagnostics": {key: (None if isinstance(v, float) and math.isnan(v) else v)
                            for key, v in self.diagnostics.items()},
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExperimentReport':
        return cls(
            config=data["config"],
            setting=data["setting"],
            p_values={arm: {method: _none_to_nan(values) for method, values in methods.items()}
                      for arm, methods in data["p_values"].items()},
            failures=data.get("failures"),
            unavailable=data.get("unavailable"),
            diagnostics={key: (float("nan") if v is None else v)
                         for key, v in data.get("diagnostics", {}).items()},
            wall_clock=data.get("wall_clock", 0.0),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentReport) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"ExperimentReport({self.setting}, methods={self.methods()}, reps={self.config.get('reps')})"


def sidecar_path(path: str) -> str:
    """Raw p-value file written next to a summary CSV"""
    root, ext = os.path.splitext(path)
    return f"{root}_pvalues{ext or '.csv'}"


def emit_report(report: ExperimentReport, path: str, format: str = "csv") -> List[str]:
    """
    Write a report to disk

    Args:
        report: Report to write
        path: Output file
        format: "csv" (summary plus p-value sidecar) or "json"

    Returns:
        Paths written
    """
    if format not in ("csv", "json"):
        raise InvalidInputError(f"unknown report format '{format}', expected csv or json")
    try:
        if format == "json":
            with open(path, "w") as f:
                json.dump(report.to_dict(), f, indent=2)
            written = [path]
        else:
            pd.DataFrame(report.summary_rows(), columns=SUMMARY_COLUMNS).to_csv(path, index=False)
            side = sidecar_path(path)
            pd.DataFrame(report.p_value_rows(), columns=PVALUE_COLUMNS).to_csv(side, index=False)
            written = [path, side]
    except OSError as e:
        raise OSError(e.errno, f"cannot write report: {e.strerror}", path) from e
    logger.info("wrote report to %s", ", ".join(written))
    return written


def emit_reports(reports: List[ExperimentReport], path: str, format: str = "csv",
                 vary: str = "q") -> List[str]:
    """Write a sweep: CSV rows are concatenated and tagged with the swept field, JSON becomes a list"""
    if format == "json":
        try:
            with open(path, "w") as f:
                json.dump([r.to_dict() for r in reports], f, indent=2)
        except OSError as e:
            raise OSError(e.errno, f"cannot write report: {e.strerror}", path) from e
        return [path]
    if format != "csv":
        raise InvalidInputError(f"unknown report format '{format}', expected csv or json")
    summary, raw = [], []
    for report in reports:
        tag = f"{vary}{report.config.get(vary)}"
        summary.extend(dict(row, setting=f"{row['setting']}-{tag}") for row in report.summary_rows())
        raw.extend(dict(row, setting=f"{row['setting']}-{tag}") for row in report.p_value_rows())
    try:
        pd.DataFrame(summary, columns=SUMMARY_COLUMNS).to_csv(path, index=False)
        pd.DataFrame(raw, columns=PVALUE_COLUMNS).to_csv(sidecar_path(path), index=False)
    except OSError as e:
        raise OSError(e.errno, f"cannot write report: {e.strerror}", path) from e
    return [path, sidecar_path(path)]


def load_report(path: str) -> ExperimentReport:
    """Read a JSON report written by emit_report"""
    with open(path, "r") as f:
        return ExperimentReport.from_dict(json.load(f))
