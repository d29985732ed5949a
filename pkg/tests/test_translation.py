import random

import pytest

from oracles import oracle_translate

from ssla.errors import DimensionMismatchError, FormatError, UnknownOidError
from ssla.expression import Dimension, ExpressionSet, Oid, SetRole, parse_expression
from ssla.translation import (
    TranslationTable,
    load_knowledge_base,
    load_table,
    translate,
    translate_set,
)


def outputs(kb, text, goal):
    return [str(e) for e in translate(kb, parse_expression(text), goal).output]


def test_table_1a_rows(kb):
    assert set(outputs(kb, "Target.1.1.1", Dimension.RISK)) == {"Risk.2.3.4", "Risk.3.2.3"}


def test_table_1b_rows(kb):
    assert set(outputs(kb, "Risk.1.1.1", Dimension.FUNCTION)) == {
        "Function.12.1.3",
        "Function.17",
        "Function.23.3",
    }
    assert set(outputs(kb, "Risk.1.1.2", Dimension.FUNCTION)) == {
        "Function.15",
        "Function.19.12.2",
    }


def test_identity_goal_is_passthrough(kb):
    result = translate(kb, parse_expression("Function.15"), Dimension.FUNCTION)
    assert result.passthrough
    assert [str(e) for e in result.output] == ["Function.15"]


def test_missing_row_passes_through(kb):
    result = translate(kb, parse_expression("Function.15"), Dimension.TECHNIQUE)
    assert result.passthrough
    assert [str(e) for e in result.output] == ["Function.15"]


def test_reverse_lookup_matches_row_scan(kb, raw_kb):
    # reverse translation of Technique.7.2: every function whose row holds it
    expected = oracle_translate(raw_kb, "Technique.7.2", "Function")
    assert set(outputs(kb, "Technique.7.2", Dimension.FUNCTION)) == set(expected)
    assert set(expected) == {"Function.17"}


def test_two_hop_composition_matches_oracle(kb, raw_kb):
    # frozen from the path-enumeration oracle over the seed tables
    expected = oracle_translate(raw_kb, "Target.1.1.2", "Function")
    assert expected == ["Function.12.1.3", "Function.31.2", "Function.17"]
    assert set(outputs(kb, "Target.1.1.2", Dimension.FUNCTION)) == set(expected)


def test_every_single_oid_agrees_with_oracle(kb, raw_kb):
    for dim_label, entries in raw_kb["dictionaries"].items():
        for oid_text in entries:
            for goal in Dimension:
                got = outputs(kb, oid_text, goal)
                want = oracle_translate(raw_kb, oid_text, goal.label)
                assert set(got) == set(want), (oid_text, goal)


def test_forward_reverse_adjoint_on_single_hops(kb):
    # y in forward(x) iff x in reverse(y), exhaustively over fixture rows
    for pair, table in kb.tables.items():
        all_values = {v for values in table.rows.values() for v in values}
        for key, values in table.rows.items():
            for value in values:
                assert key in table.reverse_lookup(value)
        for value in all_values:
            for key in table.reverse_lookup(value):
                assert value in table.rows[key]


def test_composition_consistency(kb):
    # Target -> Function equals the union over its Risk expansion
    for text in ("Target.1.1.1", "Target.1.1.2"):
        direct = set(outputs(kb, text, Dimension.FUNCTION))
        via_risk = set()
        for risk in translate(kb, parse_expression(text), Dimension.RISK).output:
            via_risk.update(str(e) for e in translate(kb, risk, Dimension.FUNCTION).output)
        assert direct == via_risk


def test_no_invented_items(kb, raw_kb):
    table_oids = set()
    for rows in raw_kb["tables"].values():
        table_oids.update(rows)
        for values in rows.values():
            table_oids.update(values)
    for dim_label, entries in raw_kb["dictionaries"].items():
        for oid_text in entries:
            for goal in Dimension:
                result = translate(kb, parse_expression(oid_text), goal)
                if result.passthrough:
                    continue
                for expr in result.output:
                    op = str(expr.operative)
                    assert op == oid_text or op in table_oids


def test_compound_context_preserved(kb):
    got = outputs(kb, "Risk.1.1.2:Function.19.12.2", Dimension.TECHNIQUE)
    assert got == ["Risk.1.1.2:Technique.11.4"]


def test_compound_context_dropped_at_or_beyond_goal(kb):
    got = outputs(kb, "Risk.1.1.2:Function.19.12.2", Dimension.RISK)
    assert got == ["Risk.1.1.2"]


def test_unknown_oid_reported(kb):
    with pytest.raises(UnknownOidError):
        translate(kb, parse_expression("Risk.9.9.9"), Dimension.FUNCTION)
    with pytest.raises(UnknownOidError):
        translate(kb, parse_expression("Risk.1.1.1:Function.99"), Dimension.TECHNIQUE)


def test_translate_set_order_and_partial_errors(kb):
    items = ExpressionSet.from_strings(
        SetRole.REQUIREMENT, ["Risk.1.1.1", "Risk.9.9.9", "Risk.1.1.2"]
    )
    results = translate_set(kb, items, Dimension.FUNCTION)
    assert [str(k) for k in results] == ["Risk.1.1.1", "Risk.9.9.9", "Risk.1.1.2"]
    assert isinstance(results[parse_expression("Risk.9.9.9")], UnknownOidError)
    ok = results[parse_expression("Risk.1.1.1")]
    assert len(ok.output) == 3
    assert len(results[parse_expression("Risk.1.1.2")].output) == 2


def test_translate_set_empty(kb):
    assert translate_set(kb, ExpressionSet(SetRole.REQUIREMENT), Dimension.FUNCTION) == {}


def test_translation_is_deterministic(kb, raw_kb):
    rng = random.Random(4)
    oids = [o for entries in raw_kb["dictionaries"].values() for o in entries]
    for _ in range(100):
        text = rng.choice(oids)
        goal = rng.choice(list(Dimension))
        first = outputs(kb, text, goal)
        assert outputs(kb, text, goal) == first


def test_table_type_restrictions():
    with pytest.raises(DimensionMismatchError):
        TranslationTable(Dimension.TARGET, Dimension.FUNCTION)
    with pytest.raises(DimensionMismatchError):
        TranslationTable(
            Dimension.RISK,
            Dimension.FUNCTION,
            {Oid.parse("Function.1"): (Oid.parse("Function.2"),)},
        )


def test_load_table_rejects_bad_documents():
    with pytest.raises(FormatError):
        load_table({"source": "Risk", "rows": []})
    with pytest.raises(FormatError):
        load_table(
            {
                "source": "Risk",
                "target": "Function",
                "rows": [
                    {"key": "Risk.1", "values": ["Function.1"]},
                    {"key": "Risk.1", "values": ["Function.2"]},
                ],
            }
        )


def test_kb_rejects_table_oids_missing_from_dictionaries(tmp_path, kb):
    import json
    import shutil

    from ssla.translation import seed_kb_directory

    shutil.copytree(seed_kb_directory(), tmp_path / "kb")
    path = tmp_path / "kb" / "risk_function.json"
    data = json.loads(path.read_text())
    data["rows"].append({"key": "Risk.77", "values": ["Function.17"]})
    path.write_text(json.dumps(data))
    with pytest.raises(UnknownOidError):
        load_knowledge_base(tmp_path / "kb")
