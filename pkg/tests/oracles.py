"""Independent reference implementations used to derive expected values.

Everything here works on the raw fixture JSON with plain string handling,
deliberately sharing no code with the package under test: dimensions are
the text before the first dot, tables are dicts of strings, translation is
exhaustive path enumeration, and the decision oracle checks set cover
directly from the table rows.
"""

from __future__ import annotations

import json
from pathlib import Path

DIMENSION_ORDER = ["Target", "Risk", "Function", "Technique"]


def load_raw_kb(directory) -> dict:
    directory = Path(directory)
    tables = {}
    for name in ("target_risk", "risk_function", "function_technique"):
        data = json.loads((directory / f"{name}.json").read_text())
        tables[(data["source"], data["target"])] = {
            row["key"]: list(row["values"]) for row in data["rows"]
        }
    dictionaries = {}
    for name in ("target", "risk", "function", "technique"):
        data = json.loads((directory / f"{name}.json").read_text())
        dictionaries[data["dimension"]] = {
            entry["oid"]: entry["label"] for entry in data["entries"]
        }
    return {"tables": tables, "dictionaries": dictionaries}


def dimension_of(oid_text: str) -> str:
    return oid_text.split(".", 1)[0]


def dimension_index(oid_text: str) -> int:
    return DIMENSION_ORDER.index(dimension_of(oid_text))


def operative(expr_text: str) -> str:
    return expr_text.split(":")[-1]


def forward_step(raw_kb: dict, oid_text: str) -> list[str]:
    index = dimension_index(oid_text)
    pair = (DIMENSION_ORDER[index], DIMENSION_ORDER[index + 1])
    return list(raw_kb["tables"][pair].get(oid_text, []))


def reverse_step(raw_kb: dict, oid_text: str) -> list[str]:
    index = dimension_index(oid_text)
    pair = (DIMENSION_ORDER[index - 1], DIMENSION_ORDER[index])
    return [key for key, values in raw_kb["tables"][pair].items() if oid_text in values]


def oracle_translate(raw_kb: dict, oid_text: str, goal: str) -> list[str]:
    """All reachable OIDs at (or stuck before) the goal, by path enumeration."""
    goal_index = DIMENSION_ORDER.index(goal)
    results: list[str] = []

    def walk(current: str) -> None:
        index = dimension_index(current)
        if index == goal_index:
            _add(results, current)
            return
        nxt = forward_step(raw_kb, current) if index < goal_index else reverse_step(
            raw_kb, current
        )
        if not nxt:
            _add(results, current)  # no row: already concrete enough
            return
        for item in nxt:
            walk(item)

    walk(oid_text)
    return results


def _add(items: list, value) -> None:
    if value not in items:
        items.append(value)


def oracle_decide(raw_kb: dict, req_text: str, caps_texts: list[str]) -> bool:
    """Set-cover check straight from the prose rule.

    Technique requirements need exact membership; anything else is pushed
    to the Function dimension and every entry there must be covered by
    the capabilities pulled back to the Function dimension, or asserted
    directly by a capability.
    """
    cap_ops = [operative(c) for c in caps_texts]
    req_op = operative(req_text)
    if dimension_of(req_op) == "Technique":
        return req_op in cap_ops
    cap_functions: list[str] = []
    for cap in cap_ops:
        for item in oracle_translate(raw_kb, cap, "Function"):
            _add(cap_functions, item)
    for entry in oracle_translate(raw_kb, req_op, "Function"):
        if entry not in cap_functions and entry not in cap_ops:
            return False
    return True
