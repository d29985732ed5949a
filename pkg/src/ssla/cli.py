"""Command-line entry points: key generation, KB server, negotiation, audit.

Exit codes are stable for scripting: 0 agreed/valid, 1 audit invalid,
2 cancelled, 3 protocol error, 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import wire
from .audit import AuditVerdict, audit_record, compare_evidence
from .errors import ConfigError, ProtocolError, SslaError
from .expression import ExpressionSet, SetRole
from .hashcash import PowPolicy
from .identity import (
    derive_identity,
    generate_keypair,
    load_private_key,
    load_public_key,
    save_private_key,
    save_public_key,
)
from .protocol import (
    CANCEL,
    CONFIRMATION,
    PROPOSAL,
    Hooks,
    NegotiationParty,
    ProtocolPolicy,
)
from .service import (
    HttpTransport,
    KbService,
    LoopbackTransport,
    NegotiationService,
    RemoteKnowledgeBase,
    serve_http,
)
from .translation import load_knowledge_base, load_seed_kb

EXIT_AGREED = 0
EXIT_INVALID = 1
EXIT_CANCELLED = 2
EXIT_PROTOCOL = 3
EXIT_CONFIG = 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ssla", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an RSA keypair and print its identity")
    p.add_argument("--out", required=True, help="path prefix; writes <out>.pem and <out>.pub.pem")
    p.add_argument("--bits", type=int, default=2048)

    p = sub.add_parser("kb-server", help="serve knowledge-base endpoints over HTTP")
    p.add_argument("--config", help="JSON file with kb/host/port/sign_key fields")
    p.add_argument("--kb", help="KB fixture directory (default: packaged seed KB)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--sign-key", help="private key enabling signed replies")

    p = sub.add_parser("negotiate", help="run a full negotiation between two agents")
    p.add_argument("--user-config", required=True)
    p.add_argument("--sp-config", required=True)
    p.add_argument("--out", required=True, help="directory for the evidence records")
    p.add_argument("--kb-url", help="override both agents' KB with this endpoint")
    p.add_argument("--requirements", help="override the user agent's requirements file")
    p.add_argument("--capabilities", help="override the user agent's capabilities file")
    p.add_argument("--bits", type=int, help="override proof-of-work difficulty")
    p.add_argument("--max-rounds", type=int, help="override the round cap")
    p.add_argument(
        "--deterministic-seed",
        type=int,
        help="test hook: seeded nonces/stamps and a frozen clock for reproducible runs",
    )

    p = sub.add_parser("audit", help="verify evidence records offline")
    p.add_argument("--record", action="append", required=True, dest="records")
    p.add_argument("--initiator-key", required=True, help="initiator public key (PEM)")
    p.add_argument("--responder-key", required=True, help="responder public key (PEM)")

    args = parser.parse_args(argv)
    handlers = {
        "keygen": run_keygen,
        "kb-server": run_kb_server,
        "negotiate": run_negotiation,
        "audit": run_audit,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SslaError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


def run_keygen(args) -> int:
    key = generate_keypair(args.bits)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_private_key(key, str(prefix) + ".pem")
    save_public_key(key.public_key(), str(prefix) + ".pub.pem")
    print(f"identity {derive_identity(key.public_key()).hex}")
    return 0


def build_kb_server(args):
    """Validate fixtures and bind the socket; serving is the caller's call."""
    if args.config:
        cfg_path = Path(args.config)
        cfg = _load_json_file(cfg_path)
        if not isinstance(cfg, dict):
            raise ConfigError(f"{cfg_path}: expected a JSON object")
        if args.kb is None and cfg.get("kb"):
            args.kb = str(cfg_path.parent / cfg["kb"])
        args.host = cfg.get("host", args.host)
        args.port = cfg.get("port", args.port)
        if args.sign_key is None and cfg.get("sign_key"):
            args.sign_key = str(cfg_path.parent / cfg["sign_key"])
    # load and validate everything before binding the socket
    try:
        kb = load_knowledge_base(args.kb) if args.kb else load_seed_kb()
        signing_key = load_private_key(args.sign_key) if args.sign_key else None
    except SslaError as exc:
        raise ConfigError(str(exc)) from exc
    return serve_http(KbService(kb, signing_key), args.host, args.port)


def run_kb_server(args) -> int:
    server = build_kb_server(args)
    print(f"kb server listening on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _load_json_file(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def load_agent_config(path_text: str) -> dict:
    path = Path(path_text)
    raw = _load_json_file(path)
    if not isinstance(raw, dict) or raw.get("role") not in ("User", "SP"):
        raise ConfigError(f"{path}: 'role' must be \"User\" or \"SP\"")
    for field in ("key", "requirements", "capabilities"):
        if not isinstance(raw.get(field), str):
            raise ConfigError(f"{path}: missing file path field {field!r}")
    base = path.parent
    cfg = {
        "role": raw["role"],
        "key_path": base / raw["key"],
        "requirements_path": base / raw["requirements"],
        "capabilities_path": base / raw["capabilities"],
        "kb": raw.get("kb"),
        "kb_base": base,
        "kb_uri": raw.get("kb_uri"),
        "pow_bits": raw.get("pow_bits", PowPolicy().required_bits),
        "pow_required": raw.get("pow_required", True),
        "max_rounds": raw.get("max_rounds", ProtocolPolicy().max_rounds),
        "timestamp_window": raw.get("timestamp_window", ProtocolPolicy().timestamp_window),
        "prefer_concrete": raw.get("prefer_concrete"),
    }
    return cfg


def build_party(cfg: dict, hooks: Hooks, *, kb_url=None, bits=None, max_rounds=None):
    try:
        key = load_private_key(cfg["key_path"])
    except SslaError as exc:
        raise ConfigError(str(exc)) from exc
    requirements = _load_expression_file(cfg["requirements_path"], SetRole.REQUIREMENT)
    capabilities = _load_expression_file(cfg["capabilities_path"], SetRole.CAPABILITY)

    kb_source = kb_url or cfg["kb"]
    try:
        if kb_source is None or kb_source == "seed":
            kb = load_seed_kb()
        elif isinstance(kb_source, str) and kb_source.startswith("http://"):
            kb = RemoteKnowledgeBase(HttpTransport(kb_source), hooks)
        else:
            kb = load_knowledge_base(cfg["kb_base"] / kb_source)
    except SslaError as exc:
        raise ConfigError(f"knowledge base: {exc}") from exc

    policy = ProtocolPolicy(
        pow=PowPolicy(required_bits=bits if bits is not None else cfg["pow_bits"]),
        pow_required=cfg["pow_required"],
        max_rounds=max_rounds if max_rounds is not None else cfg["max_rounds"],
        timestamp_window=float(cfg["timestamp_window"]),
    )
    return NegotiationParty(
        private_key=key,
        kb=kb,
        requirements=requirements,
        capabilities=capabilities,
        policy=policy,
        provides_service=cfg["role"] == "SP",
        prefer_concrete=cfg["prefer_concrete"],
        kb_uri=cfg["kb_uri"],
        hooks=hooks,
    )


def _load_expression_file(path: Path, role: SetRole) -> ExpressionSet:
    data = _load_json_file(path)
    if not isinstance(data, list):
        raise ConfigError(f"{path}: expected a JSON list of expression strings")
    try:
        return ExpressionSet.from_strings(role, data)
    except SslaError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def run_negotiation(args) -> int:
    user_cfg = load_agent_config(args.user_config)
    sp_cfg = load_agent_config(args.sp_config)
    if user_cfg["role"] != "User" or sp_cfg["role"] != "SP":
        raise ConfigError("--user-config must have role User and --sp-config role SP")
    if args.requirements:
        user_cfg["requirements_path"] = Path(args.requirements)
    if args.capabilities:
        user_cfg["capabilities_path"] = Path(args.capabilities)

    seed = args.deterministic_seed
    user_hooks = Hooks.deterministic(seed) if seed is not None else Hooks()
    sp_hooks = Hooks.deterministic(seed + 1) if seed is not None else Hooks()
    user = build_party(
        user_cfg, user_hooks, kb_url=args.kb_url, bits=args.bits, max_rounds=args.max_rounds
    )
    sp = build_party(
        sp_cfg, sp_hooks, kb_url=args.kb_url, bits=args.bits, max_rounds=args.max_rounds
    )

    transport = LoopbackTransport(NegotiationService(sp))
    outcome, detail = drive_negotiation(user, sp.identity.hex, transport)

    if outcome == "agreed":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        negotiation_id = next(iter(user.records))
        wire.dump_document(user.records[negotiation_id], out / "user_record.json")
        wire.dump_document(sp.records[negotiation_id], out / "sp_record.json")
        save_public_key(user.public_key, out / "user.pub.pem")
        save_public_key(sp.public_key, out / "sp.pub.pem")
        record = user.records[negotiation_id]
        print(f"agreed negotiation {negotiation_id}")
        for entry in record["body"]["agreed_entries"]:
            print(f"  {entry}")
        print(f"evidence written to {out}")
        return EXIT_AGREED
    if outcome == "cancelled":
        body = detail["body"]
        print(f"cancelled: {body.get('reason', 'unspecified')}")
        for entry in body.get("unsatisfiable", ()):
            print(f"  unsatisfiable: {entry}")
        return EXIT_CANCELLED
    print(f"protocol error: {detail['body']}", file=sys.stderr)
    return EXIT_PROTOCOL


def drive_negotiation(user: NegotiationParty, responder_hex: str, transport):
    """Run the initiator side until the negotiation terminates.

    Returns ("agreed", None), ("cancelled", cancel_doc), or ("error", doc).
    """
    proposal = user.initiate(responder_hex)
    negotiation_id = proposal["body"]["negotiation_id"]
    status, reply, _ = transport.request("POST", "/negotiations", proposal)
    while True:
        if reply["type"] == "error":
            return "error", reply
        if reply["type"] == CANCEL:
            user.receive_cancel(reply)
            return "cancelled", reply
        if reply["type"] == CONFIRMATION:
            user.receive_confirmation(reply)
            return "agreed", None
        if reply["type"] != PROPOSAL:
            return "error", reply
        try:
            response = user.receive_proposal(reply)
        except ProtocolError as exc:
            return "error", wire.make_document(
                "error", {"code": exc.code, "detail": str(exc)}
            )
        status, reply, _ = transport.request(
            "POST", f"/negotiations/{negotiation_id}", response
        )
        if response["type"] == CONFIRMATION:
            if reply["type"] == "error":
                return "error", reply
            return "agreed", None
        if response["type"] == CANCEL:
            return "cancelled", response


def run_audit(args) -> int:
    def load_key(path, which):
        try:
            return load_public_key(path)
        except SslaError as exc:
            print(f"{which} key unreadable ({exc}); its signatures cannot be verified")
            return None

    initiator_key = load_key(args.initiator_key, "initiator")
    responder_key = load_key(args.responder_key, "responder")

    all_valid = True
    reports = []
    records = []
    for path in args.records:
        try:
            record = wire.load_document(path)
        except (OSError, SslaError) as exc:
            print(f"{path}: unreadable record ({exc})")
            all_valid = False
            continue
        report = audit_record(record, initiator_key, responder_key)
        reports.append(report)
        records.append(record)
        print(f"{path}: {report.verdict.value}")
        for check in report.checked:
            mark = "pass" if check.passed else "FAIL"
            print(f"  [{mark}] {check.name}: {check.detail}")
        if report.verdict is AuditVerdict.VALID:
            print(f"  agreed entries: {', '.join(report.agreed_entries) or '(none)'}")
            print(f"  signed last: {report.signed_last}")
        all_valid = all_valid and report.verdict is AuditVerdict.VALID

    if len(records) == 2:
        symmetric = compare_evidence(records[0], records[1])
        print(f"evidence symmetry: {'identical' if symmetric else 'DIFFERENT'}")
        all_valid = all_valid and symmetric
    return EXIT_AGREED if all_valid else EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
