"""Estimate reports: one row per measured inequality, CSV/JSON output.

A row stores the scan (the parameter swept, usually a time threshold), the
measured normalized sup at each scan point, an optional fitted log-log
exponent with its standard error, and the pass flag computed by the owning
suite's rule.  Numeric CSV fields are written with ``repr`` so identical
runs produce bit-identical files (wall time lives in the run metadata, not
in the determinism-checked columns).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .anchors import ALL_CHECK_IDS

SCHEMA_VERSION = 1

# Normalized sups below this are treated as exactly zero (e.g. the free
# particle): decade and fit rules pass trivially.
ZERO_FLOOR = 1e-9


@dataclass
class EstimateRow:
    suite: str
    check_id: str
    scan_name: str
    scan_values: list
    sups: list
    passed: bool
    threshold: str
    fitted_exponent: float | None = None
    fit_stderr: float | None = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.check_id not in ALL_CHECK_IDS:
            raise ValueError(f"unregistered check id {self.check_id!r}")

    @property
    def sup_overall(self):
        return max(self.sups) if self.sups else 0.0


@dataclass
class EstimateReport:
    suite: str
    rows: list
    wall_seconds: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def row(self, check_id):
        for r in self.rows:
            if r.check_id == check_id:
                return r
        raise KeyError(check_id)

    def summary_dict(self):
        return {
            "suite": self.suite,
            "passed": self.passed,
            "wall_seconds": self.wall_seconds,
            "checks": {
                r.check_id: {
                    "passed": r.passed,
                    "sup": r.sup_overall,
                    "fitted_exponent": r.fitted_exponent,
                    "fit_stderr": r.fit_stderr,
                    "threshold": r.threshold,
                    "detail": r.detail,
                }
                for r in self.rows
            },
        }


CSV_FIELDS = (
    "schema",
    "suite",
    "check_id",
    "scan_name",
    "scan_values",
    "sups",
    "sup_overall",
    "fitted_exponent",
    "fit_stderr",
    "threshold",
    "passed",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(repr(float(x)) for x in v)
    return str(v)


def write_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for rep in reports:
            for r in rep.rows:
                w.writerow(
                    [
                        SCHEMA_VERSION,
                        r.suite,
                        r.check_id,
                        r.scan_name,
                        _fmt(r.scan_values),
                        _fmt(r.sups),
                        _fmt(float(r.sup_overall)),
                        _fmt(r.fitted_exponent),
                        _fmt(r.fit_stderr),
                        r.threshold,
                        int(r.passed),
                    ]
                )


def write_summary(path, reports, extra=None):
    payload = {
        "schema": SCHEMA_VERSION,
        "passed": all(rep.passed for rep in reports),
        "suites": {rep.suite: rep.summary_dict() for rep in reports},
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def loglog_fit(x, y):
    """Least-squares slope of log y against log x, with its standard error.

    Returns (None, None) when fewer than two usable (positive) points
    remain, so identically-zero measurements skip the fit cleanly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (y > ZERO_FLOOR) & (x > 0)
    if np.sum(keep) < 2:
        return None, None
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if np.sum(keep) == 2:
        slope = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return float(slope), None
    coef, cov = np.polyfit(lx, ly, 1, cov=True)
    return float(coef[0]), float(np.sqrt(cov[0, 0]))


def decade_bounded(scan_values, sups, slack=1.05, floor=ZERO_FLOOR):
    """Largest-decade max must not exceed the smallest-decade max * slack.

    The rule certifies that a normalized sup stays bounded as the scan
    parameter grows; measurements entirely below ``floor`` pass trivially.
    """
    scan_values = np.asarray(scan_values, dtype=float)
    sups = np.asarray(sups, dtype=float)
    if np.max(sups, initial=0.0) < floor:
        return True
    lo = scan_values.min()
    hi = scan_values.max()
    first = sups[scan_values < lo * 10.0]
    last = sups[scan_values > hi / 10.0]
    if len(first) == 0 or len(last) == 0:
        return bool(np.max(sups) < floor)
    return bool(np.max(last) <= slack * np.max(first) + floor)


class StopWatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False
