import random

import pytest

from ssla.errors import (
    DimensionMismatchError,
    DimensionOrderError,
    DuplicateOidError,
    ExpressionSyntaxError,
    FormatError,
)
from ssla.expression import (
    Dimension,
    ExpressionSet,
    Oid,
    SecurityExpression,
    SetRole,
    effective_dimension,
    load_dictionary,
    parse_expression,
)


def test_parse_single_segment():
    expr = parse_expression("Risk.1.1.2")
    assert len(expr.segments) == 1
    assert expr.segments[0].dimension is Dimension.RISK
    assert expr.segments[0].arcs == (1, 1, 2)


def test_parse_compound():
    expr = parse_expression("Risk.1.1.2:Function.19.12.2")
    assert [s.dimension for s in expr.segments] == [Dimension.RISK, Dimension.FUNCTION]
    assert effective_dimension(expr) is Dimension.FUNCTION


def test_reversed_compound_rejected():
    with pytest.raises(DimensionOrderError):
        parse_expression("Function.1:Risk.1")


def test_repeated_dimension_rejected():
    with pytest.raises(DimensionOrderError):
        parse_expression("Risk.1:Risk.2")


@pytest.mark.parametrize(
    "bad",
    ["", "Risk", "Risk.", "Risk.1.", "Risk.x", "Risk.-1", "Risk.01", "risk.1",
     "Risk.1 :Function.2", "Risk.1:", ":Risk.1", "Risk 1"],
)
def test_malformed_rejected(bad):
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(bad)


def test_effective_dimension_examples():
    assert effective_dimension(parse_expression("Target.1.1.1")) is Dimension.TARGET
    assert effective_dimension(parse_expression("Technique.4.2")) is Dimension.TECHNIQUE


def test_round_trip_on_random_canonical_strings():
    rng = random.Random(7)
    labels = ["Target", "Risk", "Function", "Technique"]
    for _ in range(500):
        dims = sorted(rng.sample(range(4), rng.randint(1, 4)))
        text = ":".join(
            labels[d] + "." + ".".join(str(rng.randint(0, 99)) for _ in range(rng.randint(1, 4)))
            for d in dims
        )
        assert str(parse_expression(text)) == text


def test_compound_order_property():
    # a compound parses iff its dimension sequence is strictly increasing
    rng = random.Random(8)
    labels = ["Target", "Risk", "Function", "Technique"]
    for _ in range(300):
        dims = [rng.randint(0, 3) for _ in range(rng.randint(2, 4))]
        text = ":".join(f"{labels[d]}.{rng.randint(1, 9)}" for d in dims)
        increasing = all(b > a for a, b in zip(dims, dims[1:]))
        if increasing:
            parse_expression(text)
        else:
            with pytest.raises(DimensionOrderError):
                parse_expression(text)


def test_effective_dimension_of_joined_pair():
    rng = random.Random(9)
    labels = ["Target", "Risk", "Function", "Technique"]
    for _ in range(200):
        lo, hi = sorted(rng.sample(range(4), 2))
        a = f"{labels[lo]}.{rng.randint(1, 9)}"
        b = f"{labels[hi]}.{rng.randint(1, 9)}"
        joined = parse_expression(a + ":" + b)
        assert effective_dimension(joined) == effective_dimension(parse_expression(b))


def test_oid_ordering_is_dimension_then_arcs():
    a = Oid.parse("Risk.2")
    b = Oid.parse("Risk.10")
    c = Oid.parse("Function.1")
    assert a < b < c  # numeric arc order, then dimension order


def test_expression_set_round_trip_preserves_order():
    texts = ["Function.17", "Risk.1.1.2:Function.19.12.2", "Technique.3.1"]
    items = ExpressionSet.from_strings(SetRole.REQUIREMENT, texts)
    assert items.to_strings() == texts


def test_expression_set_rejects_duplicates():
    with pytest.raises(FormatError):
        ExpressionSet.from_strings(SetRole.CAPABILITY, ["Risk.1", "Risk.1"])


def test_load_dictionary_seed_fixture(kb):
    risk = kb.dictionaries[Dimension.RISK]
    assert risk.entries[Oid.parse("Risk.1.1.1")] == "network sniffing"
    assert risk.entries[Oid.parse("Risk.1.1.2")] == "data mismanagement"


def test_load_dictionary_empty_is_valid():
    dictionary = load_dictionary({"dimension": "Target", "entries": []})
    assert dictionary.dimension is Dimension.TARGET
    assert not dictionary.entries


def test_load_dictionary_dimension_mismatch():
    doc = {"dimension": "Risk", "entries": [{"oid": "Function.1", "label": "x"}]}
    with pytest.raises(DimensionMismatchError):
        load_dictionary(doc)


def test_load_dictionary_duplicate_oid():
    doc = {
        "dimension": "Risk",
        "entries": [{"oid": "Risk.1", "label": "a"}, {"oid": "Risk.1", "label": "b"}],
    }
    with pytest.raises(DuplicateOidError):
        load_dictionary(doc)


def test_load_dictionary_bad_shape():
    with pytest.raises(FormatError):
        load_dictionary(b"not json")
    with pytest.raises(FormatError):
        load_dictionary({"entries": []})


def test_single_and_extended():
    base = SecurityExpression.single(Oid.parse("Function.17"))
    grown = base.extended(Oid.parse("Technique.7.2"))
    assert str(grown) == "Function.17:Technique.7.2"
    with pytest.raises(DimensionOrderError):
        grown.extended(Oid.parse("Risk.1"))
