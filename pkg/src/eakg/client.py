"""Device side of the wire protocol: talks to one or more EA services over HTTP."""

from __future__ import annotations

import hashlib
import logging
import secrets
from typing import Optional, Sequence

import httpx

from . import dsa, rsa
from .attestation import AttestationMsg, TrustStore, ea_id_for
from .errors import DeviceAbort, Restart
from .group import GroupParams, Rng, default_rng

log = logging.getLogger(__name__)


class TransportError(Exception):
    def __init__(self, url: str, detail: str = ""):
        super().__init__("connect failed: {}{}".format(url, " ({})".format(detail) if detail else ""))
        self.url = url


class EaError(Exception):
    """The EA answered with an error body ``{error, message}``."""

    def __init__(self, status: int, code: str, message: str = ""):
        super().__init__("{} {}: {}".format(status, code, message))
        self.status = status
        self.code = code
        self.message = message


class EaClient:
    def __init__(self, base_url: str, http: Optional[httpx.Client] = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self._http = http or httpx.Client(timeout=timeout)
        self._info: Optional[dict] = None

    def _request(self, method: str, path: str, body: Optional[dict] = None) -> httpx.Response:
        url = self.base_url + path
        try:
            resp = self._http.request(method, url, json=body)
        except httpx.TransportError as exc:
            raise TransportError(self.base_url, type(exc).__name__) from exc
        if resp.status_code >= 400:
            try:
                doc = resp.json()
                code, msg = doc.get("error", "http_error"), doc.get("message", "")
            except ValueError:
                code, msg = "http_error", resp.text[:200]
            raise EaError(resp.status_code, code, msg)
        return resp

    def _post(self, path: str, body: dict) -> dict:
        return self._request("POST", path, body).json()

    def health(self) -> dict:
        if self._info is None:
            self._info = self._request("GET", "/v1/health").json()
        return self._info

    @property
    def verification_key(self) -> bytes:
        return bytes.fromhex(self.health()["verification_key"])

    def fetch_params(self, params_hash: str) -> GroupParams:
        """Download a params file and check it hashes to what was asked for."""
        body = self._request("GET", "/v1/params/{}".format(params_hash)).text
        params = GroupParams.from_json(body)
        if params.params_hash.hex() != params_hash.lower():
            raise DeviceAbort("params hash mismatch")
        return params

    def find_params(self, k: int) -> str:
        for entry in self.health()["params"]:
            if entry.get("k") == k:
                return entry["params_hash"]
        raise DeviceAbort("EA serves no params for k={}".format(k))

    # --- RSA --------------------------------------------------------------

    def rsa_start(self, params: GroupParams, msg1: rsa.RsaMsg1):
        doc = self._post("/v1/rsa/session", {"params_hash": params.params_hash.hex(), **msg1.to_wire(params)})
        return doc["session_id"], rsa.RsaMsg2.from_wire(doc)

    def rsa_finalize(self, params: GroupParams, session_id: str, msg3: rsa.RsaMsg3) -> AttestationMsg:
        doc = self._post("/v1/rsa/session/{}/finalize".format(session_id), msg3.to_wire(params))
        return AttestationMsg.from_wire(doc)

    # --- DSA --------------------------------------------------------------

    def dsa_start(self, params: GroupParams, msg1: dsa.DsaMsg1):
        doc = self._post("/v1/dsa/session", {"params_hash": params.params_hash.hex(), **msg1.to_wire(params)})
        return doc["session_id"], dsa.DsaMsg2.from_wire(doc)

    def dsa_finalize(self, params: GroupParams, session_id: str, msg3: dsa.DsaMsg3) -> AttestationMsg:
        doc = self._post("/v1/dsa/session/{}/finalize".format(session_id), msg3.to_wire(params))
        return AttestationMsg.from_wire(doc)

    def multi_start(self, params: GroupParams, index: int, c: int, nonce: str):
        doc = self._post(
            "/v1/dsa/multi/session",
            {"params_hash": params.params_hash.hex(), "index": index, "c": params.element_hex(c), "nonce": nonce},
        )
        return doc["session_id"], dsa.Contribution.from_wire(c, doc)

    def multi_finalize(self, params: GroupParams, session_id: str, bundle: dsa.MultiBundle) -> AttestationMsg:
        doc = self._post("/v1/dsa/multi/session/{}/finalize".format(session_id), {"bundle": bundle.to_wire(params)})
        return AttestationMsg.from_wire(doc)


def _ea_key(client: EaClient, trust: Optional[TrustStore]) -> bytes:
    vk = client.verification_key
    if trust is not None and ea_id_for(vk) not in trust:
        raise DeviceAbort("EA {} is not in the trust store".format(client.base_url))
    return vk


def keygen_rsa(
    client: EaClient,
    params: GroupParams,
    config: rsa.RsaConfig,
    rng: Rng = default_rng,
    max_restarts: int = 64,
    trust: Optional[TrustStore] = None,
) -> rsa.RsaRun:
    vk = _ea_key(client, trust)
    for attempt in range(max_restarts + 1):
        state, msg1 = rsa.device_start(params, config, rng)
        sid, msg2 = client.rsa_start(params, msg1)
        try:
            msg3, key = rsa.device_finalize(state, msg2)
        except Restart as exc:
            # The EA session simply expires; nothing about it leaves the device.
            log.debug("restart %d: %s", attempt, exc.reason)
            continue
        msg4 = client.rsa_finalize(params, sid, msg3)
        bundle = rsa.device_complete(state, msg4, vk)
        return rsa.RsaRun(bundle, key, attempt, state)
    raise DeviceAbort("restart limit exhausted after {} restarts".format(max_restarts))


def keygen_dsa(
    clients: Sequence[EaClient],
    params: GroupParams,
    rng: Rng = default_rng,
    trust: Optional[TrustStore] = None,
    insecure: bool = False,
) -> tuple:
    """Single-EA protocol for one client, multi-authority protocol for several.

    Returns ``(AttestedKey, DsaKeyMaterial)``.
    """
    if not clients:
        raise ValueError("at least one EA is required")
    vks = [_ea_key(c, trust) for c in clients]
    state, msg1 = dsa.device_start(params, rng, insecure=insecure)
    if len(clients) == 1:
        sid, msg2 = clients[0].dsa_start(params, msg1)
        msg3, key = dsa.device_finalize(state, msg2)
        msg4 = clients[0].dsa_finalize(params, sid, msg3)
        return dsa.device_complete(state, msg4, vks[0]), key

    nonce = hashlib.sha256(secrets.token_bytes(16) + rng(16)).hexdigest()[:32]
    sessions, contributions = [], []
    for index, (client, vk) in enumerate(zip(clients, vks), start=1):
        sid, con = client.multi_start(params, index, msg1.c_x, nonce)
        if con.verification_key != vk or con.index != index:
            raise DeviceAbort("authority signature invalid")
        sessions.append(sid)
        contributions.append(con)
    bundle, key = dsa.multi_finalize(state, contributions)
    signed = [
        (client.multi_finalize(params, sid, bundle), vk)
        for client, sid, vk in zip(clients, sessions, vks)
    ]
    return dsa.device_complete_multi(state, signed), key
