"""Structured verification results.

A Report records one named check: the measured sides, statistical error,
slack, and a PASS/FAIL/INCONCLUSIVE verdict.  Verdict policy: the verified
statements are exact inequalities, so the harness must separate genuine
violation from noise.  With margin = 3 SE + discretization allowance,

  PASS          slack >= -allowance            (no violation beyond h-error)
  INCONCLUSIVE  -margin <= slack < -allowance  (violation indicated, inside
                noise; rerun at 4x paths), or any exponent-cap hit
  FAIL          slack < -margin

JSON schema per report: {check, params, lhs, rhs, se, slack, verdict,
clock_note, runtime_s}.  The suite summary CSV excludes runtime so that
fixed-seed runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


def classify(slack, se3, allowance, capped=False):
    if capped:
        return "INCONCLUSIVE"
    if slack >= -allowance:
        return "PASS"
    if slack >= -(allowance + se3):
        return "INCONCLUSIVE"
    return "FAIL"


def _jsonable(x):
    import numpy as np

    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class Report:
    check: str
    params: dict
    lhs: object
    rhs: object
    se: object
    slack: float
    verdict: str
    clock_note: str = ""
    runtime_s: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json(self):
        payload = {
            "check": self.check,
            "params": _jsonable(self.params),
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "se": _jsonable(self.se),
            "slack": _jsonable(self.slack),
            "verdict": self.verdict,
            "clock_note": self.clock_note,
            "runtime_s": self.runtime_s,
        }
        if self.details:
            payload["details"] = _jsonable(self.details)
        return json.dumps(payload, indent=2, sort_keys=True)

    def summary_row(self):
        def scalar(v):
            import numpy as np

            if isinstance(v, (list, tuple, np.ndarray)):
                arr = np.asarray(v, dtype=float)
                return float(arr.min()) if arr.size else float("nan")
            return float(v)

        return (
            f"{self.check},{self.verdict},{scalar(self.lhs):.12g},"
            f"{scalar(self.rhs):.12g},{scalar(self.se):.12g},{self.slack:.12g}"
        )


SUMMARY_HEADER = "check,verdict,lhs,rhs,se,slack"


def write_summary(reports, path):
    lines = [SUMMARY_HEADER] + [r.summary_row() for r in reports]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def exit_code(reports):
    """0 if all PASS, 2 if any INCONCLUSIVE (and none FAIL), 1 if any FAIL."""
    verdicts = {r.verdict for r in reports}
    if "FAIL" in verdicts:
        return 1
    if "INCONCLUSIVE" in verdicts:
        return 2
    return 0
