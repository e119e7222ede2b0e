"""Abnormal-result suggestions: a small configurable rule table, data not
code. Each rule compares one payload field and carries the text shown to
the health worker."""

from __future__ import annotations

import json

DEFAULT_RULES = [
    {"kind": "temperature", "field": "celsius", "op": ">", "value": 38.0,
     "message": "fever above 38 C: give fluids, recheck in 4 hours, refer if it persists"},
    {"kind": "blood_pressure", "field": "systolic", "op": ">", "value": 140.0,
     "message": "systolic above 140 mmHg: repeat after 10 minutes rest, refer if still high"},
    {"kind": "blood_pressure", "field": "diastolic", "op": ">", "value": 90.0,
     "message": "diastolic above 90 mmHg: repeat after 10 minutes rest, refer if still high"},
]

_OPS = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


def load_rules(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        rules = json.load(fh)
    for rule in rules:
        if rule.get("op") not in _OPS:
            raise ValueError(f"rule has unknown op {rule.get('op')!r}")
    return rules


def advise(kind: str, payload: dict, rules: list[dict] | None = None) -> list[str]:
    """Suggestion texts for one result, in rule order."""
    out = []
    for rule in (DEFAULT_RULES if rules is None else rules):
        if rule["kind"] != kind:
            continue
        value = payload.get(rule["field"])
        if value is None:
            continue
        if _OPS[rule["op"]](value, rule["value"]):
            out.append(rule["message"])
    return out
