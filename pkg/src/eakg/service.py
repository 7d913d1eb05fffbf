"""Entropy-authority HTTP service.

Every protocol run is a single-use session: the start request creates it,
the finalize request takes it out of the store whatever the outcome, so a
device can never retry a proof against the same EA randomness.
"""

from __future__ import annotations

import json
import logging
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from . import dsa, rsa
from .attestation import EaIdentity, TrustStore
from .errors import ProtocolRejection
from .group import GroupParams, Rng, default_rng, load_params

log = logging.getLogger("eakg.service")

DEFAULT_TTL = 120
DEFAULT_MAX_SESSIONS = 10_000


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str = ""):
        super().__init__(code)
        self.status = status
        self.code = code
        self.message = message or code


@dataclass
class Session:
    id: str
    kind: str  # "rsa" | "dsa" | "dsa-multi"
    state: object = field(repr=False)
    created_at: float
    expires_at: float


class SessionStore:
    """In-memory session table with atomic insert / take."""

    def __init__(self, max_sessions: int = DEFAULT_MAX_SESSIONS):
        self.max_sessions = max_sessions
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)

    def insert(self, session: Session) -> None:
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise ServiceError(429, "too_many_sessions", "session limit reached")
            if session.id in self._sessions:
                raise ServiceError(500, "internal", "session id collision")
            self._sessions[session.id] = session

    def take(self, session_id: str, kind: str, now: float) -> Session:
        with self._lock:
            s = self._sessions.get(session_id)
            if s is None or s.kind != kind:
                raise ServiceError(404, "unknown_session", "no such session")
            del self._sessions[session_id]
        if s.expires_at <= now:
            raise ServiceError(410, "session_expired", "session expired")
        return s

    def gc(self, now: float) -> int:
        with self._lock:
            dead = [sid for sid, s in self._sessions.items() if s.expires_at <= now]
            for sid in dead:
                del self._sessions[sid]
        return len(dead)


@dataclass
class EaConfig:
    params_paths: list
    signing_key_path: str
    listen: str = "127.0.0.1:8080"
    session_ttl: float = DEFAULT_TTL
    max_sessions: int = DEFAULT_MAX_SESSIONS
    insecure_test: bool = False
    peer_trust_store: Optional[str] = None

    def __post_init__(self):
        if self.session_ttl <= 0:
            raise ValueError("session_ttl must be positive")
        if self.max_sessions <= 0:
            raise ValueError("max_sessions must be positive")

    @classmethod
    def from_file(cls, path) -> "EaConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))

        def rel(p):
            return p if os.path.isabs(p) else os.path.join(base, p)

        return cls(
            params_paths=[rel(p) for p in doc["params"]],
            signing_key_path=rel(doc["signing_key"]),
            listen=doc.get("listen", "127.0.0.1:8080"),
            session_ttl=float(doc.get("session_ttl", DEFAULT_TTL)),
            max_sessions=int(doc.get("max_sessions", DEFAULT_MAX_SESSIONS)),
            insecure_test=bool(doc.get("insecure_test", False)),
            peer_trust_store=rel(doc["peer_trust_store"]) if doc.get("peer_trust_store") else None,
        )

    def load_identity(self) -> EaIdentity:
        return load_identity(self.signing_key_path)

    def load_params(self) -> list:
        out = []
        for path in self.params_paths:
            params = load_params(path)
            params.require_secure(self.insecure_test)
            out.append(params)
        return out

    @property
    def host_port(self) -> tuple:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)


def load_identity(path) -> EaIdentity:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return EaIdentity.from_private_bytes(bytes.fromhex(doc["signing_key"]))


def save_identity(identity: EaIdentity, path) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "signing_key": identity.private_bytes().hex(),
                "verification_key": identity.verification_key.hex(),
                "ea_id": identity.ea_id,
            },
            fh,
            indent=2,
        )


def _error(status: int, code: str, message: str = "") -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message or code})


def create_app(
    identity: EaIdentity,
    params_list: Sequence[GroupParams],
    session_ttl: float = DEFAULT_TTL,
    max_sessions: int = DEFAULT_MAX_SESSIONS,
    insecure: bool = False,
    peers: Optional[TrustStore] = None,
    clock: Callable[[], float] = time.time,
    rng: Rng = default_rng,
) -> FastAPI:
    app = FastAPI(title="eakg entropy authority", docs_url=None, redoc_url=None)
    store = SessionStore(max_sessions)
    by_hash = {p.params_hash.hex(): p for p in params_list}
    app.state.store = store
    app.state.identity = identity

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        log.info("%s %s -> %d %s", request.method, request.url.path, exc.status, exc.code)
        return _error(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", "request body must be a JSON object")

    def params_for(body: dict) -> GroupParams:
        params = by_hash.get(str(body.get("params_hash", "")).lower())
        if params is None:
            raise ServiceError(404, "unknown_params", "params hash not served here")
        return params

    def parse(fn, *args):
        try:
            return fn(*args)
        except (KeyError, ValueError, TypeError) as exc:
            raise ServiceError(400, "bad_request", "malformed message") from exc

    def open_session(kind: str, state) -> str:
        now = clock()
        store.gc(now)
        sid = secrets.token_hex(16)
        store.insert(Session(sid, kind, state, now, now + session_ttl))
        log.info("session %s opened (%s)", sid, kind)
        return sid

    def reject(exc: ProtocolRejection, sid: str):
        status = 400 if exc.code in ("bad_commitment", "bad_request") else 422
        log.info("session %s rejected: %s", sid or "-", exc.code)
        raise ServiceError(status, exc.code, exc.message) from exc

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "ea_id": identity.ea_id,
            "verification_key": identity.verification_key.hex(),
            "params": [
                {"params_hash": h, "k": p.k, "q_bits": p.q.bit_length()} for h, p in by_hash.items()
            ],
        }

    @app.get("/v1/params/{params_hash}")
    def get_params(params_hash: str):
        params = by_hash.get(params_hash.lower())
        if params is None:
            raise ServiceError(404, "unknown_params", "params hash not served here")
        return Response(content=params.to_json(), media_type="application/json")

    # --- RSA ------------------------------------------------------------

    @app.post("/v1/rsa/session")
    def rsa_start(body: dict):
        params = params_for(body)
        msg1 = parse(rsa.RsaMsg1.from_wire, body)
        if params.k is None:
            raise ServiceError(400, "bad_request", "params are not sized for RSA")
        config = parse(lambda: rsa.RsaConfig(k=params.k, e=msg1.e, insecure=insecure))
        try:
            config.check_params(params)
            state, msg2 = rsa.ea_respond(params, config, rng, msg1, now=clock())
        except ProtocolRejection as exc:
            reject(exc, "")
        except ValueError as exc:
            raise ServiceError(400, "bad_request", str(exc)) from exc
        sid = open_session("rsa", state)
        state.session_id = sid
        return {"session_id": sid, **msg2.to_wire()}

    @app.post("/v1/rsa/session/{session_id}/finalize")
    def rsa_finalize(session_id: str, body: dict):
        session = store.take(session_id, "rsa", clock())
        state = session.state
        msg3 = parse(rsa.RsaMsg3.from_wire, state.params, body)
        try:
            msg4 = rsa.ea_verify_and_sign(state, msg3, identity, now=clock())
        except ProtocolRejection as exc:
            reject(exc, session_id)
        log.info("session %s signed", session_id)
        return msg4.to_wire()

    # --- DSA ------------------------------------------------------------

    @app.post("/v1/dsa/session")
    def dsa_start(body: dict):
        params = params_for(body)
        msg1 = parse(dsa.DsaMsg1.from_wire, body)
        try:
            state, msg2 = dsa.ea_respond(params, rng, msg1, now=clock())
        except ProtocolRejection as exc:
            reject(exc, "")
        sid = open_session("dsa", state)
        state.session_id = sid
        return {"session_id": sid, **msg2.to_wire(params)}

    @app.post("/v1/dsa/session/{session_id}/finalize")
    def dsa_finalize(session_id: str, body: dict):
        session = store.take(session_id, "dsa", clock())
        state = session.state
        msg3 = parse(dsa.DsaMsg3.from_wire, state.params, body)
        try:
            msg4 = dsa.ea_verify_and_sign(state, msg3, identity, now=clock())
        except ProtocolRejection as exc:
            reject(exc, session_id)
        log.info("session %s signed", session_id)
        return msg4.to_wire()

    @app.post("/v1/dsa/multi/session")
    def multi_start(body: dict):
        params = params_for(body)
        c = parse(lambda b: int(b["c"], 16), body)
        index = parse(lambda b: int(b["index"]), body)
        try:
            record = dsa.multi_contribute(params, rng, index, c, identity)
        except ProtocolRejection as exc:
            reject(exc, "")
        sid = open_session("dsa-multi", (params, record))
        return {"session_id": sid, "nonce": body.get("nonce"), **record.to_wire(params)}

    @app.post("/v1/dsa/multi/session/{session_id}/finalize")
    def multi_finalize(session_id: str, body: dict):
        session = store.take(session_id, "dsa-multi", clock())
        params, record = session.state
        bundle = parse(dsa.MultiBundle.from_wire, params, body.get("bundle", body))
        try:
            msg = dsa.multi_verify_sign(record, params, bundle, identity, peers=peers, now=clock())
        except ProtocolRejection as exc:
            reject(exc, session_id)
        log.info("session %s signed", session_id)
        return msg.to_wire()

    return app


def app_from_env() -> FastAPI:
    """Build the app from the JSON config named by ``EAKG_CONFIG``."""
    cfg = EaConfig.from_file(os.environ["EAKG_CONFIG"])
    peers = TrustStore.load(cfg.peer_trust_store) if cfg.peer_trust_store else None
    return create_app(
        cfg.load_identity(),
        cfg.load_params(),
        session_ttl=cfg.session_ttl,
        max_sessions=cfg.max_sessions,
        insecure=cfg.insecure_test,
        peers=peers,
    )
