"""Resource-oriented request/response service and transports.

Resources:

    POST /translate                KB lookup (stateless)
    GET  /dictionaries/<Dimension> dictionary download
    POST /negotiations             round-1 proposal, creates the resource
    POST /negotiations/<id>        later rounds, confirmations, cancels

``<id>`` is exactly the hex negotiation ID derived from the round-1 stamp.
Every handler returns ``(status, document, headers)``; protocol rejections
map one-to-one onto error documents carrying the stable machine-readable
code of the exception that produced them.

The loopback transport drives a service in process with the same interface
the HTTP transport exposes, so the entire protocol suite runs without
sockets.
"""

from __future__ import annotations

import json
from typing import Optional

from . import wire
from .errors import (
    MalformedDocument,
    ProtocolError,
    SslaError,
    UnknownOidError,
)
from .expression import (
    Dictionary,
    Dimension,
    ExpressionSet,
    Oid,
    SetRole,
    parse_expression,
)
from .identity import sign
from .protocol import (
    CANCEL,
    CONFIRMATION,
    PROPOSAL,
    TRANSLATION_REQUEST,
    NegotiationParty,
    make_translation_reply,
)
from .translation import KnowledgeBase, TranslationResult

# HTTP status used for each stable error code; anything unlisted is a 400.
ERROR_STATUS = {
    "unknown_negotiation": 404,
    "not_found": 404,
    "state_violation": 409,
    "replayed_nonce": 409,
    "invalid_signature": 403,
    "invalid_pow": 403,
}


def error_document(code: str, detail: str) -> dict:
    return wire.make_document("error", {"code": code, "detail": detail})


def _error_response(exc: SslaError):
    return ERROR_STATUS.get(exc.code, 400), error_document(exc.code, str(exc)), {}


class KbService:
    """Stateless knowledge-base endpoints over one immutable KB.

    ``signing_key`` turns on integrity mode: replies carry a signature.
    Off by default, matching plain unauthenticated KB reads.
    """

    def __init__(self, kb: KnowledgeBase, signing_key=None) -> None:
        self.kb = kb
        self.signing_key = signing_key

    def handle(self, method: str, path: str, document: Optional[dict]):
        try:
            if method == "POST" and path == "/translate":
                return 200, self._translate(document), {}
            if method == "GET" and path.startswith("/dictionaries/"):
                return self._dictionary(path.removeprefix("/dictionaries/"))
            return 404, error_document("not_found", f"no resource {path}"), {}
        except SslaError as exc:
            return _error_response(exc)

    def _translate(self, document: Optional[dict]) -> dict:
        if document is None:
            raise MalformedDocument("translation request needs a body")
        wire.require_envelope(document)
        if document["type"] != TRANSLATION_REQUEST:
            raise MalformedDocument(f"expected {TRANSLATION_REQUEST}")
        body = document["body"]
        if (
            not isinstance(body.get("expressions"), list)
            or not isinstance(body.get("goal"), str)
            or not isinstance(body.get("nonce"), str)
        ):
            raise MalformedDocument("translation request needs expressions, goal, nonce")
        goal = Dimension.from_label(body["goal"])
        results = []
        for text in body["expressions"]:
            if not isinstance(text, str):
                raise MalformedDocument("expressions must be strings")
            item = {"input": text, "output": [], "passthrough": False, "error": None}
            try:
                expr = parse_expression(text)
                outcome = self.kb.translate(expr, goal)
                item["output"] = [str(e) for e in outcome.output]
                item["passthrough"] = outcome.passthrough
            except SslaError as exc:
                item["error"] = exc.code
            results.append(item)
        reply = make_translation_reply(body["nonce"], results)
        if self.signing_key is not None:
            signature = sign(wire.signing_bytes(reply), self.signing_key)
            wire.attach_signature(reply, signature)
        return reply

    def _dictionary(self, label: str):
        try:
            dimension = Dimension.from_label(label)
        except SslaError:
            return 404, error_document("not_found", f"no dictionary {label!r}"), {}
        dictionary = self.kb.dictionaries[dimension]
        body = {
            "dimension": dimension.label,
            "entries": [
                {"oid": str(oid), "label": text}
                for oid, text in dictionary.entries.items()
            ],
        }
        return 200, wire.make_document("dictionary", body), {}


class NegotiationService:
    """Hosts one responder party behind the /negotiations resources."""

    def __init__(self, party: NegotiationParty) -> None:
        self.party = party

    def handle(self, method: str, path: str, document: Optional[dict]):
        try:
            if method != "POST" or not path.startswith("/negotiations"):
                return 404, error_document("not_found", f"no resource {path}"), {}
            if document is None:
                raise MalformedDocument("negotiation messages need a body")
            wire.require_envelope(document)
            if path == "/negotiations":
                return self._create(document)
            return self._existing(path.removeprefix("/negotiations/"), document)
        except SslaError as exc:
            return _error_response(exc)

    def _create(self, document: dict):
        if document["type"] != PROPOSAL or document["body"].get("round") != 1:
            raise MalformedDocument("only a round-1 proposal creates a negotiation")
        reply = self.party.receive_proposal(document)
        negotiation_id = document["body"]["negotiation_id"]
        return 201, reply, {"Location": f"/negotiations/{negotiation_id}"}

    def _existing(self, negotiation_id: str, document: dict):
        if document["type"] not in (PROPOSAL, CONFIRMATION, CANCEL):
            raise MalformedDocument(f"unexpected message type {document['type']!r}")
        if document["body"].get("negotiation_id") != negotiation_id:
            raise MalformedDocument("message does not address this negotiation resource")
        reply = self.party.receive(document)
        if reply is None:
            state = self.party.states[negotiation_id]
            reply = wire.make_document(
                "ssla.ack",
                {"negotiation_id": negotiation_id, "phase": state.phase.value},
            )
        return 200, reply, {}


class CompositeService:
    """KB and negotiation endpoints behind one route table."""

    def __init__(self, *services) -> None:
        self.services = services

    def handle(self, method: str, path: str, document: Optional[dict]):
        for service in self.services:
            status, doc, headers = service.handle(method, path, document)
            if not (status == 404 and doc["body"].get("code") == "not_found"):
                return status, doc, headers
        return 404, error_document("not_found", f"no resource {path}"), {}


class LoopbackTransport:
    """In-process transport with the same surface as the HTTP transport."""

    def __init__(self, service) -> None:
        self.service = service

    def request(self, method: str, path: str, document: Optional[dict] = None):
        status, doc, headers = self.service.handle(method, path, document)
        # round-trip through canonical bytes so loopback exercises encoding
        return status, wire.decode(wire.canonical_bytes(doc)), headers


class HttpTransport:
    def __init__(self, base_url: str, timeout: float = 30.0) -> None:
        from urllib.parse import urlparse

        parsed = urlparse(base_url)
        if parsed.scheme != "http" or not parsed.netloc:
            raise ValueError(f"need an http:// base URL, got {base_url!r}")
        self.host = parsed.hostname
        self.port = parsed.port or 80
        self.prefix = parsed.path.rstrip("/")
        self.timeout = timeout

    def request(self, method: str, path: str, document: Optional[dict] = None):
        import http.client

        conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
        try:
            payload = wire.canonical_bytes(document) if document is not None else None
            headers = {"Content-Type": "application/json"} if payload else {}
            conn.request(method, self.prefix + path, body=payload, headers=headers)
            response = conn.getresponse()
            data = response.read()
            doc = wire.decode(data)
            return response.status, doc, dict(response.getheaders())
        finally:
            conn.close()


def serve_http(service, host: str = "127.0.0.1", port: int = 0):
    """Run a service behind a threading HTTP server; caller owns shutdown."""
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Handler(BaseHTTPRequestHandler):
        def _dispatch(self, method):
            document = None
            length = int(self.headers.get("Content-Length") or 0)
            if length:
                try:
                    document = json.loads(self.rfile.read(length).decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    self._reply(400, error_document("malformed_document", "bad JSON"), {})
                    return
            status, doc, headers = service.handle(method, self.path, document)
            self._reply(status, doc, headers)

        def _reply(self, status, doc, headers):
            payload = wire.canonical_bytes(doc)
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            for name, value in headers.items():
                self.send_header(name, value)
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def log_message(self, *args):
            pass  # keep test and CLI output clean

    return ThreadingHTTPServer((host, port), Handler)


class RemoteKnowledgeBase:
    """KB client speaking the /translate and /dictionaries endpoints.

    Dictionaries are fetched once up front so OID membership checks stay
    local; translation always goes over the wire.
    """

    def __init__(self, transport, hooks=None) -> None:
        from .protocol import Hooks

        self.transport = transport
        self.hooks = hooks or Hooks()
        self.dictionaries: dict[Dimension, Dictionary] = {}
        for dimension in Dimension:
            status, doc, _ = transport.request("GET", f"/dictionaries/{dimension.label}")
            if status != 200:
                raise ProtocolError(f"cannot fetch {dimension.label} dictionary")
            entries = {
                Oid.parse(item["oid"]): item["label"]
                for item in doc["body"]["entries"]
            }
            self.dictionaries[dimension] = Dictionary(dimension, entries)

    def knows(self, oid: Oid) -> bool:
        return oid in self.dictionaries[oid.dimension]

    def require_known(self, oid: Oid) -> None:
        if not self.knows(oid):
            raise UnknownOidError(f"{oid} is not in any dictionary")

    def translate(self, expr, goal: Dimension) -> TranslationResult:
        outcomes = self.translate_set(
            ExpressionSet(SetRole.REQUIREMENT, (expr,)), goal
        )
        outcome = outcomes[expr]
        if isinstance(outcome, UnknownOidError):
            raise outcome
        return outcome

    def translate_set(self, exprs, goal: Dimension):
        from .protocol import make_translation_request

        request = make_translation_request(exprs, goal, self.hooks.nonce_hex())
        status, reply, _ = self.transport.request("POST", "/translate", request)
        if status != 200:
            raise ProtocolError(f"translation failed: {reply['body']}")
        if reply["body"]["nonce"] != request["body"]["nonce"]:
            raise ProtocolError("translation reply does not echo the request nonce")
        out = {}
        by_input = {item["input"]: item for item in reply["body"]["results"]}
        for expr in exprs:
            item = by_input.get(str(expr))
            if item is None:
                raise ProtocolError(f"translation reply is missing {expr}")
            if item["error"] is not None:
                out[expr] = UnknownOidError(f"{expr}: {item['error']}")
            else:
                out[expr] = TranslationResult(
                    expr,
                    tuple(parse_expression(t) for t in item["output"]),
                    item["passthrough"],
                )
        return out
