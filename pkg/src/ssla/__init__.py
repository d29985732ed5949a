"""Non-repudiable security service level agreement (SSLA) negotiation.

The pieces, bottom up: dimensioned OID security expressions
(:mod:`ssla.expression`), knowledge-base translation between dimensions
(:mod:`ssla.translation`), the requirement-vs-capability decision and
counterproposal logic (:mod:`ssla.decision`), key-bound identities and
signatures (:mod:`ssla.identity`), hashcash proof-of-work stamps
(:mod:`ssla.hashcash`), the signed negotiation state machine
(:mod:`ssla.protocol`), the resource-oriented service and transports
(:mod:`ssla.service`), and offline evidence auditing (:mod:`ssla.audit`).
"""

from .expression import (
    Dictionary,
    Dimension,
    ExpressionSet,
    Oid,
    SecurityExpression,
    SetRole,
    effective_dimension,
    load_dictionary,
    parse_expression,
)
from .translation import (
    KnowledgeBase,
    TranslationResult,
    TranslationTable,
    load_knowledge_base,
    load_seed_kb,
    translate,
    translate_set,
)
from .decision import (
    CounterProposal,
    Outcome,
    Verdict,
    build_counterproposal,
    decide_one,
    decide_set,
)
from .identity import PartyIdentity, Signature, derive_identity, generate_keypair, sign, verify
from .hashcash import (
    ExtensionPayload,
    HashcashStamp,
    PowPolicy,
    ReplaySet,
    mint,
    negotiation_id_from,
    verify_stamp,
)
from .protocol import Hooks, NegotiationParty, Phase, ProtocolPolicy, build_record
from .audit import AuditReport, AuditVerdict, audit_record, compare_evidence

__version__ = "0.1.0"
