"""Knowledge-base translation between expression dimensions.

Three directed tables exist per knowledge base, one for each adjacent
dimension pair: [Target, Risk], [Risk, Function], [Function, Technique].
Translation toward Technique walks the tables forward, expanding each OID
into its row values; translation toward Target walks them in reverse, an
OID mapping back to every key whose row contains it.  An item with no row
at some hop is already concrete enough and is carried through unchanged.

This is a pure table operation: no inference, no fuzzy matching.  Whether
multiple outputs are required jointly or alternatively is decided by the
consumer (see decision.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DimensionMismatchError, FormatError, UnknownOidError
from .expression import (
    Dictionary,
    Dimension,
    ExpressionSet,
    Oid,
    SecurityExpression,
    _load_json,
    load_dictionary,
)

ADJACENT_PAIRS = (
    (Dimension.TARGET, Dimension.RISK),
    (Dimension.RISK, Dimension.FUNCTION),
    (Dimension.FUNCTION, Dimension.TECHNIQUE),
)


@dataclass(frozen=True)
class TranslationTable:
    """Directed multimap between one adjacent dimension pair."""

    source: Dimension
    target: Dimension
    rows: dict[Oid, tuple[Oid, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.source, self.target) not in ADJACENT_PAIRS:
            raise DimensionMismatchError(
                f"no [{self.source.label}, {self.target.label}] table type exists"
            )
        for key, values in self.rows.items():
            if key.dimension is not self.source:
                raise DimensionMismatchError(f"key {key} is not a {self.source.label} OID")
            for value in values:
                if value.dimension is not self.target:
                    raise DimensionMismatchError(
                        f"value {value} is not a {self.target.label} OID"
                    )

    def reverse_lookup(self, value: Oid) -> tuple[Oid, ...]:
        """Every key whose row set contains ``value``, in table row order."""
        return tuple(key for key, values in self.rows.items() if value in values)


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable bundle of four dictionaries and three translation tables.

    Reloading produces a new instance; concurrent readers need no locking.
    """

    dictionaries: dict[Dimension, Dictionary]
    tables: dict[tuple[Dimension, Dimension], TranslationTable]

    def __post_init__(self) -> None:
        for dim in Dimension:
            if dim not in self.dictionaries:
                raise FormatError(f"missing {dim.label} dictionary")
        for pair in ADJACENT_PAIRS:
            if pair not in self.tables:
                raise FormatError(
                    f"missing [{pair[0].label}, {pair[1].label}] translation table"
                )
        for table in self.tables.values():
            for key, values in table.rows.items():
                self.require_known(key)
                for value in values:
                    self.require_known(value)

    def knows(self, oid: Oid) -> bool:
        return oid in self.dictionaries[oid.dimension]

    def require_known(self, oid: Oid) -> None:
        if not self.knows(oid):
            raise UnknownOidError(f"{oid} is not in any dictionary")

    # method sugar so remote KB clients can expose the same surface
    def translate(self, expr: SecurityExpression, goal: Dimension) -> "TranslationResult":
        return translate(self, expr, goal)

    def translate_set(self, exprs, goal: Dimension):
        return translate_set(self, exprs, goal)


@dataclass(frozen=True)
class TranslationResult:
    """Outcome of translating one expression toward a goal dimension.

    ``passthrough`` is True exactly when no table row applied and the
    output is the input unchanged: the expression was already concrete
    enough for the requested goal.
    """

    input: SecurityExpression
    output: tuple[SecurityExpression, ...]
    passthrough: bool


def translate(kb: KnowledgeBase, expr: SecurityExpression, goal: Dimension) -> TranslationResult:
    """Translate ``expr`` toward ``goal``, forward or reverse as needed.

    Operates on the last segment; earlier segments below the goal dimension
    are preserved as compound context on every output.  Raises
    UnknownOidError if any segment is absent from the dictionaries.
    """
    for segment in expr.segments:
        kb.require_known(segment)

    last = expr.operative
    context = tuple(s for s in expr.segments[:-1] if s.dimension < goal)

    if last.dimension == goal:
        return TranslationResult(expr, (expr,), passthrough=True)

    items = [last]
    applied = False
    if last.dimension < goal:
        step = 1
        hops = range(last.dimension, goal)
    else:
        step = -1
        hops = range(last.dimension, goal, -1)

    for hop in hops:
        hop = Dimension(hop)
        nxt: list[Oid] = []
        if step == 1:
            table = kb.tables[(hop, Dimension(hop + 1))]
        else:
            table = kb.tables[(Dimension(hop - 1), hop)]
        for oid in items:
            if oid.dimension != hop:
                nxt.append(oid)  # stuck at an earlier hop, carried unchanged
                continue
            expanded = table.rows.get(oid, ()) if step == 1 else table.reverse_lookup(oid)
            if expanded:
                applied = True
                nxt.extend(expanded)
            else:
                nxt.append(oid)
        items = _dedupe(nxt)

    if not applied:
        return TranslationResult(expr, (expr,), passthrough=True)
    output = tuple(SecurityExpression(context + (oid,)) for oid in items)
    return TranslationResult(expr, output, passthrough=False)


def translate_set(
    kb: KnowledgeBase, exprs: ExpressionSet, goal: Dimension
) -> dict[SecurityExpression, "TranslationResult | UnknownOidError"]:
    """Translate element-wise, preserving input order, never merging results.

    A failing item maps to its UnknownOidError instead of aborting the rest.
    """
    out: dict[SecurityExpression, TranslationResult | UnknownOidError] = {}
    for expr in exprs:
        try:
            out[expr] = translate(kb, expr, goal)
        except UnknownOidError as exc:
            out[expr] = exc
    return out


def _dedupe(oids: list[Oid]) -> list[Oid]:
    seen: set[Oid] = set()
    out = []
    for oid in oids:
        if oid not in seen:
            seen.add(oid)
            out.append(oid)
    return out


# --- loading --------------------------------------------------------------

DICTIONARY_FILES = {
    Dimension.TARGET: "target.json",
    Dimension.RISK: "risk.json",
    Dimension.FUNCTION: "function.json",
    Dimension.TECHNIQUE: "technique.json",
}
TABLE_FILES = {
    (Dimension.TARGET, Dimension.RISK): "target_risk.json",
    (Dimension.RISK, Dimension.FUNCTION): "risk_function.json",
    (Dimension.FUNCTION, Dimension.TECHNIQUE): "function_technique.json",
}


def load_table(document) -> TranslationTable:
    """Load a table from JSON: ``{"source", "target", "rows": [{"key", "values"}]}``."""
    data = _load_json(document)
    if not isinstance(data, dict) or not {"source", "target", "rows"} <= set(data):
        raise FormatError("table document needs 'source', 'target', and 'rows'")
    source = Dimension.from_label(data["source"])
    target = Dimension.from_label(data["target"])
    if not isinstance(data["rows"], list):
        raise FormatError("'rows' must be a list")
    rows: dict[Oid, tuple[Oid, ...]] = {}
    for row in data["rows"]:
        if not isinstance(row, dict) or "key" not in row or "values" not in row:
            raise FormatError(f"bad table row: {row!r}")
        key = Oid.parse(row["key"])
        if key in rows:
            raise FormatError(f"duplicate table key {key}")
        values = tuple(Oid.parse(v) for v in row["values"])
        if len(set(values)) != len(values):
            raise FormatError(f"duplicate value in row for {key}")
        rows[key] = values
    return TranslationTable(source, target, rows)


def load_knowledge_base(directory) -> KnowledgeBase:
    """Load a KB from a directory with the documented fixed file names."""
    directory = Path(directory)
    dictionaries = {}
    for dim, name in DICTIONARY_FILES.items():
        path = directory / name
        if not path.exists():
            raise FormatError(f"missing dictionary file {path}")
        dictionary = load_dictionary(path.read_bytes())
        if dictionary.dimension is not dim:
            raise DimensionMismatchError(f"{name} holds a {dictionary.dimension.label} dictionary")
        dictionaries[dim] = dictionary
    tables = {}
    for pair, name in TABLE_FILES.items():
        path = directory / name
        if not path.exists():
            raise FormatError(f"missing table file {path}")
        table = load_table(path.read_bytes())
        if (table.source, table.target) != pair:
            raise DimensionMismatchError(f"{name} holds a different table type")
        tables[pair] = table
    return KnowledgeBase(dictionaries, tables)


def seed_kb_directory() -> Path:
    """Directory of the fixture KB shipped with the package."""
    return Path(__file__).parent / "fixtures" / "kb"


def load_seed_kb() -> KnowledgeBase:
    return load_knowledge_base(seed_kb_directory())
