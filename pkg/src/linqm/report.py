"""Relation reports: the shared result record for all verification suites.

Schema (docs/report-schema.md): every relation check produces one record
{suite, relation, expected, actual, residual, pass}.  A check never raises
on a failing relation; the pass flag is true exactly when the residual is
zero (or within the stated tolerance for float-valued suites).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

_RENDER_CAP = 800


def clip(text: str, cap: int = _RENDER_CAP) -> str:
    if len(text) <= cap:
        return text
    return text[:cap] + f"... [{len(text) - cap} more chars]"


@dataclass(frozen=True)
class RelationReport:
    suite: str
    relation: str
    expected: str
    actual: str
    residual: str
    passed: bool

    def to_json_obj(self) -> dict:
        return {
            "suite": self.suite,
            "relation": self.relation,
            "expected": clip(self.expected),
            "actual": clip(self.actual),
            "residual": clip(self.residual),
            "pass": self.passed,
        }


def sort_reports(reports: Iterable[RelationReport]) -> list[RelationReport]:
    return sorted(reports, key=lambda r: (r.suite, r.relation))


def all_passed(reports: Iterable[RelationReport]) -> bool:
    return all(r.passed for r in reports)


def reports_payload(reports: Iterable[RelationReport], **extra) -> dict:
    ordered = sort_reports(reports)
    payload = {
        "relations": [r.to_json_obj() for r in ordered],
        "pass": all(r.passed for r in ordered),
    }
    payload.update(extra)
    return payload


def render_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def render_text(reports: Iterable[RelationReport]) -> str:
    ordered = sort_reports(reports)
    lines = []
    for r in ordered:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"[{mark}] {r.suite} :: {r.relation}")
        if not r.passed:
            lines.append(f"       expected: {clip(r.expected, 200)}")
            lines.append(f"       actual:   {clip(r.actual, 200)}")
            lines.append(f"       residual: {clip(r.residual, 200)}")
    n_fail = sum(1 for r in ordered if not r.passed)
    lines.append(f"{len(ordered) - n_fail}/{len(ordered)} relations pass")
    return "\n".join(lines) + "\n"


def write_report(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_json(payload))
