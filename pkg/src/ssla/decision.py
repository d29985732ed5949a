"""Requirement-vs-capability decision and counterproposal synthesis.

A requirement already in the Technique dimension is satisfied by exact
membership in the capability list.  Anything less concrete is translated
into the Function dimension and is satisfied only when every translated
entry is covered: either some capability maps back onto it through the
[Function, Technique] table, or the capability list asserts it directly
(the passthrough case, e.g. a function no technique implements).

Multiple functions required for one risk are all required (conjunctive);
the techniques suggested for one function are alternatives, any one of
which the counterproposal may pick (disjunctive).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .expression import (
    Dimension,
    ExpressionSet,
    Oid,
    SecurityExpression,
    SetRole,
    effective_dimension,
)
from .translation import KnowledgeBase


class Outcome(str, Enum):
    ACCEPT = "accept"
    COUNTER = "counter"
    REJECT = "reject"


@dataclass(frozen=True)
class Verdict:
    """Per-requirement satisfaction plus the overall disposition.

    With ``prefer_concrete`` left off, overall is ACCEPT exactly when every
    requirement is satisfied.
    """

    per_requirement: dict[SecurityExpression, bool]
    overall: Outcome


@dataclass(frozen=True)
class CounterProposal:
    """Concretized replacement entries plus whatever could not be resolved.

    Each entry is either the original requirement with a chosen technique
    appended (``original:technique``) or the original echoed verbatim when
    it was already concrete enough and the builder's own capabilities
    assert it.
    """

    entries: ExpressionSet
    unsatisfiable: tuple[SecurityExpression, ...]


def _operatives(caps) -> set[Oid]:
    return {cap.operative for cap in caps}


def decide_one(kb: KnowledgeBase, req: SecurityExpression, caps: ExpressionSet) -> bool:
    """True when the capabilities satisfy this one requirement.

    Follows the all-entries-must-match reading of the decision algorithm:
    the requirement is satisfied only if every entry of its Function-level
    translation is covered by the capabilities.
    """
    cap_ops = _operatives(caps)
    if effective_dimension(req) is Dimension.TECHNIQUE:
        return req.operative in cap_ops

    cover: set[Oid] = set()
    for cap in caps:
        cover.update(e.operative for e in kb.translate(cap, Dimension.FUNCTION).output)
    translated = kb.translate(req, Dimension.FUNCTION).output
    return all(e.operative in cover or e.operative in cap_ops for e in translated)


def is_concrete(kb: KnowledgeBase, req: SecurityExpression) -> bool:
    """True when no further concretization toward Technique is possible."""
    if effective_dimension(req) is Dimension.TECHNIQUE:
        return True
    return kb.translate(req, Dimension.TECHNIQUE).passthrough


def decide_set(
    kb: KnowledgeBase,
    reqs: ExpressionSet,
    caps: ExpressionSet,
    *,
    prefer_concrete: bool = False,
) -> Verdict:
    """Decide every requirement against the responder's own capabilities.

    Overall is ACCEPT when all requirements are satisfied, COUNTER when a
    counterproposal could resolve every requirement from ``caps``, REJECT
    otherwise.  ``prefer_concrete`` makes a fully satisfied but not yet
    fully concrete set come back COUNTER instead of ACCEPT, which is how a
    responder that wants the agreement pinned down to techniques behaves.
    """
    per = {req: decide_one(kb, req, caps) for req in reqs}
    if all(per.values()):
        if prefer_concrete and any(not is_concrete(kb, req) for req in reqs):
            return Verdict(per, Outcome.COUNTER)
        return Verdict(per, Outcome.ACCEPT)
    probe = build_counterproposal(
        kb, reqs, ExpressionSet(SetRole.CAPABILITY), caps
    )
    overall = Outcome.COUNTER if not probe.unsatisfiable else Outcome.REJECT
    return Verdict(per, overall)


def build_counterproposal(
    kb: KnowledgeBase,
    reqs: ExpressionSet,
    peer_caps: ExpressionSet,
    own_caps: ExpressionSet,
) -> CounterProposal:
    """Concretize each requirement into exactly one technique per function.

    Preference order per function: a technique the KB suggests that both
    sides hold, then one the KB suggests that we hold; ties break on the
    smallest OID (dimension, then arc order), so identical inputs always
    produce identical counterproposals.
    """
    own_ops = _operatives(own_caps)
    peer_ops = _operatives(peer_caps)
    entries: list[SecurityExpression] = []
    unsatisfiable: list[SecurityExpression] = []

    for req in reqs:
        if effective_dimension(req) is Dimension.TECHNIQUE:
            # an exact technique demand is echoed or refused, never substituted
            if req.operative in own_ops:
                if req not in entries:
                    entries.append(req)
            else:
                unsatisfiable.append(req)
            continue
        resolved: list[SecurityExpression] = []
        failed = False
        for item in kb.translate(req, Dimension.FUNCTION).output:
            op = item.operative
            suggested: tuple[Oid, ...] = ()
            if op.dimension is Dimension.FUNCTION:
                hop = kb.translate(SecurityExpression.single(op), Dimension.TECHNIQUE)
                if not hop.passthrough:
                    suggested = tuple(e.operative for e in hop.output)
            if not suggested:
                # already concrete enough; echo only what we can assert ourselves
                if op in own_ops:
                    resolved.append(req if op == req.operative else req.extended(op))
                else:
                    failed = True
            else:
                shared = [t for t in suggested if t in peer_ops and t in own_ops]
                mine = [t for t in suggested if t in own_ops]
                pool = shared or mine
                if pool:
                    chosen = min(pool)
                    resolved.append(
                        req if chosen == req.operative else req.extended(chosen)
                    )
                else:
                    failed = True
        if failed:
            unsatisfiable.append(req)
        else:
            for entry in resolved:
                if entry not in entries:
                    entries.append(entry)

    return CounterProposal(
        ExpressionSet(SetRole.SSLA_ENTRY, tuple(entries)), tuple(unsatisfiable)
    )
