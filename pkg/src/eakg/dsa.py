"""Jointly generated discrete-log keys, with one or several entropy authorities.

Single EA: the device commits to x, the EA answers with x', and the device
publishes ``A = g^(x + x')`` together with a proof tying A to the commitment.

Several EAs: each authority i hands back an opened commitment ``(x_i, r_i)``
signed together with the device's commitment; the device publishes
``A = g^(x + sum x_i)`` with one proof covering every commitment, and each
authority checks all peer signatures and that proof before signing A.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .attestation import (
    AttestationMsg,
    AttestedKey,
    EaIdentity,
    TrustStore,
    attestation_payload,
    ea_id_for,
    sign_public_key,
    verify_signature,
)
from .encoding import len4, parse_hex_int
from .errors import DeviceAbort, ProtocolRejection, Restart
from .group import GroupParams, Rng, default_rng
from .pedersen import commit, verify_opening
from .sigma import (
    LinkedSumProof,
    NonceSource,
    PedProof,
    linked_sum_prove,
    linked_sum_verify,
    ped_prove,
    ped_verify,
)

MULTI_TAG = b"EAKG1-MA"


@dataclass(frozen=True)
class DsaKeyMaterial:
    a: int
    a_pub: int

    def to_json_dict(self, params: GroupParams) -> dict:
        return {"a": params.scalar_hex(self.a), "A": params.element_hex(self.a_pub)}


@dataclass(frozen=True)
class DsaMsg1:
    c_x: int

    def to_wire(self, params: GroupParams) -> dict:
        return {"c_x": params.element_hex(self.c_x)}

    @classmethod
    def from_wire(cls, doc: dict) -> "DsaMsg1":
        return cls(parse_hex_int(doc["c_x"]))


@dataclass(frozen=True)
class DsaMsg2:
    x_prime: int

    def to_wire(self, params: GroupParams) -> dict:
        return {"x_prime": params.scalar_hex(self.x_prime)}

    @classmethod
    def from_wire(cls, doc: dict) -> "DsaMsg2":
        return cls(parse_hex_int(doc["x_prime"]))


@dataclass(frozen=True)
class DsaMsg3:
    a_pub: int
    proof: PedProof

    def to_wire(self, params: GroupParams) -> dict:
        return {"a_pub": params.element_hex(self.a_pub), "proof": self.proof.to_hex(params)}

    @classmethod
    def from_wire(cls, params: GroupParams, doc: dict) -> "DsaMsg3":
        return cls(parse_hex_int(doc["a_pub"]), PedProof.from_bytes(params, bytes.fromhex(doc["proof"])))


@dataclass
class DsaDeviceState:
    params: GroupParams
    rng: Rng = field(repr=False)
    x: int = field(repr=False)
    r: int = field(repr=False)
    c_x: int
    phase: str = "started"
    key: Optional[DsaKeyMaterial] = field(default=None, repr=False)


def device_start(params: GroupParams, rng: Rng = default_rng, insecure: bool = False):
    params.require_secure(insecure)
    x = params.random_scalar(rng)
    r = params.random_scalar(rng)
    c_x = commit(params, x, r)
    return DsaDeviceState(params, rng, x, r, c_x), DsaMsg1(c_x)


def device_finalize(state: DsaDeviceState, msg2: DsaMsg2):
    if state.phase != "started":
        raise RuntimeError("device_finalize called in phase {!r}".format(state.phase))
    params = state.params
    if not 0 <= msg2.x_prime < params.q:
        state.phase = "aborted"
        raise Restart("ea_value_out_of_range")
    a = (state.x + msg2.x_prime) % params.q
    a_pub = pow(params.g, a, params.p)
    nonces = NonceSource.hedged(params, state.rng(32), (msg2.x_prime,), (state.x, state.r))
    proof = ped_prove(params, state.x, state.r, state.c_x, msg2.x_prime, a_pub, nonces=nonces)
    key = DsaKeyMaterial(a, a_pub)
    state.key, state.phase = key, "responded"
    return DsaMsg3(a_pub, proof), key


def _dsa_bundle(params: GroupParams, a_pub: int, msgs: Sequence[AttestationMsg]) -> AttestedKey:
    first, rest = msgs[0], msgs[1:]
    return AttestedKey(
        scheme="dsa",
        params_hash=params.params_hash,
        public_key={"a_pub": params.element_hex(a_pub)},
        timestamp=first.timestamp,
        ea_id=first.ea_id,
        sig=first.sig,
        cosignatures=[
            {"ea_id": m.ea_id, "timestamp": m.timestamp, "sig": m.sig.hex()} for m in rest
        ],
    )


def _check_attestation(params, a_pub, msg: AttestationMsg, vk: bytes) -> bool:
    payload = attestation_payload("dsa", params.params_hash, params.element_bytes(a_pub), msg.timestamp)
    return ea_id_for(vk) == msg.ea_id and verify_signature(vk, payload, msg.sig)


def device_complete(state: DsaDeviceState, msg4: AttestationMsg, ea_public_key: bytes) -> AttestedKey:
    return device_complete_multi(state, [(msg4, ea_public_key)])


def device_complete_multi(state: DsaDeviceState, signed: Sequence[tuple]) -> AttestedKey:
    """Check every ``(AttestationMsg, verification_key)`` pair and bundle them."""
    if state.phase != "responded" or state.key is None:
        raise RuntimeError("device_complete called in phase {!r}".format(state.phase))
    for msg, vk in signed:
        if not _check_attestation(state.params, state.key.a_pub, msg, vk):
            state.phase = "aborted"
            raise DeviceAbort("ea signature invalid")
    state.phase = "finalized"
    return _dsa_bundle(state.params, state.key.a_pub, [m for m, _ in signed])


@dataclass
class DsaEaState:
    params: GroupParams
    c_x: int
    x_prime: int = field(repr=False)
    session_id: str = ""
    created_at: float = 0.0


def ea_respond(
    params: GroupParams, rng: Rng, msg1: DsaMsg1, session_id: str = "", now: Optional[float] = None
):
    if not params.is_member(msg1.c_x):
        raise ProtocolRejection("bad_commitment", "commitment is not a group element")
    x_prime = params.random_scalar(rng)
    state = DsaEaState(params, msg1.c_x, x_prime, session_id, time.time() if now is None else now)
    return state, DsaMsg2(x_prime)


def _sign_key(params, identity, a_pub, now) -> AttestationMsg:
    ts = int(time.time() if now is None else now)
    sig = sign_public_key(identity, "dsa", params.params_hash, params.element_bytes(a_pub), ts)
    return AttestationMsg(sig, ts, identity.ea_id)


def ea_verify_and_sign(
    state: DsaEaState, msg3: DsaMsg3, identity: EaIdentity, now: Optional[float] = None
) -> AttestationMsg:
    params = state.params
    if not params.is_member(msg3.a_pub):
        raise ProtocolRejection("bad_element", "public key is not a group element")
    if not ped_verify(params, msg3.proof, state.c_x, state.x_prime, msg3.a_pub):
        raise ProtocolRejection("proof_invalid", "commitment proof rejected")
    return _sign_key(params, identity, msg3.a_pub, now)


def run_local(
    params: GroupParams,
    identity: EaIdentity,
    device_rng: Rng = default_rng,
    ea_rng: Rng = default_rng,
    insecure: bool = False,
):
    """One in-process single-EA run; returns ``(AttestedKey, DsaKeyMaterial, device_state)``."""
    state, msg1 = device_start(params, device_rng, insecure=insecure)
    ea_state, msg2 = ea_respond(params, ea_rng, msg1)
    msg3, key = device_finalize(state, msg2)
    msg4 = ea_verify_and_sign(ea_state, msg3, identity)
    return device_complete(state, msg4, identity.verification_key), key, state


# --- multiple authorities ---------------------------------------------------


def contribution_payload(params: GroupParams, index: int, c: int, c_i: int) -> bytes:
    return (
        MULTI_TAG
        + len4(index.to_bytes(4, "big"))
        + len4(params.element_bytes(c))
        + len4(params.element_bytes(c_i))
    )


@dataclass(frozen=True)
class Contribution:
    """What authority ``index`` returns to the device; also its own session record."""

    index: int
    c: int
    x_i: int = field(repr=False)
    r_i: int = field(repr=False)
    c_i: int
    sig: bytes
    ea_id: str
    verification_key: bytes

    def to_wire(self, params: GroupParams) -> dict:
        return {
            "index": self.index,
            "x_i": params.scalar_hex(self.x_i),
            "r_i": params.scalar_hex(self.r_i),
            "c_i": params.element_hex(self.c_i),
            "sig_i": self.sig.hex(),
            "ea_id": self.ea_id,
            "verification_key": self.verification_key.hex(),
        }

    @classmethod
    def from_wire(cls, c: int, doc: dict) -> "Contribution":
        return cls(
            index=int(doc["index"]),
            c=c,
            x_i=parse_hex_int(doc["x_i"]),
            r_i=parse_hex_int(doc["r_i"]),
            c_i=parse_hex_int(doc["c_i"]),
            sig=bytes.fromhex(doc["sig_i"]),
            ea_id=str(doc["ea_id"]),
            verification_key=bytes.fromhex(doc["verification_key"]),
        )


def multi_contribute(
    params: GroupParams, rng: Rng, index: int, c: int, identity: EaIdentity
) -> Contribution:
    if not params.is_member(c):
        raise ProtocolRejection("bad_commitment", "commitment is not a group element")
    if index < 1:
        raise ProtocolRejection("bad_request", "authority index must be positive")
    x_i = params.random_scalar(rng)
    r_i = params.random_scalar(rng)
    c_i = commit(params, x_i, r_i)
    sig = identity.sign(contribution_payload(params, index, c, c_i))
    return Contribution(index, c, x_i, r_i, c_i, sig, identity.ea_id, identity.verification_key)


@dataclass(frozen=True)
class MultiBundle:
    a_pub: int
    proof: LinkedSumProof
    c: int
    c_list: tuple
    sig_list: tuple
    vk_list: tuple

    def to_wire(self, params: GroupParams) -> dict:
        return {
            "a_pub": params.element_hex(self.a_pub),
            "proof": self.proof.to_hex(params),
            "c": params.element_hex(self.c),
            "c_list": [params.element_hex(v) for v in self.c_list],
            "sig_list": [s.hex() for s in self.sig_list],
            "vk_list": [v.hex() for v in self.vk_list],
        }

    @classmethod
    def from_wire(cls, params: GroupParams, doc: dict) -> "MultiBundle":
        return cls(
            a_pub=parse_hex_int(doc["a_pub"]),
            proof=LinkedSumProof.from_bytes(params, bytes.fromhex(doc["proof"])),
            c=parse_hex_int(doc["c"]),
            c_list=tuple(parse_hex_int(v) for v in doc["c_list"]),
            sig_list=tuple(bytes.fromhex(s) for s in doc["sig_list"]),
            vk_list=tuple(bytes.fromhex(v) for v in doc["vk_list"]),
        )


def multi_finalize(state: DsaDeviceState, contributions: Sequence[Contribution]):
    """Combine every authority's share; returns ``(MultiBundle, DsaKeyMaterial)``."""
    if state.phase != "started":
        raise RuntimeError("multi_finalize called in phase {!r}".format(state.phase))
    params = state.params
    ordered = sorted(contributions, key=lambda c: c.index)
    if [c.index for c in ordered] != list(range(1, len(ordered) + 1)) or not ordered:
        state.phase = "aborted"
        raise DeviceAbort("authority indices incomplete")
    for con in ordered:
        payload = contribution_payload(params, con.index, state.c_x, con.c_i)
        if (
            con.c != state.c_x
            or ea_id_for(con.verification_key) != con.ea_id
            or not verify_signature(con.verification_key, payload, con.sig)
        ):
            state.phase = "aborted"
            raise DeviceAbort("authority signature invalid")
        if not verify_opening(params, con.c_i, con.x_i, con.r_i):
            state.phase = "aborted"
            raise DeviceAbort("authority contribution does not open")

    a = (state.x + sum(c.x_i for c in ordered)) % params.q
    a_pub = pow(params.g, a, params.p)
    shares = [(c.x_i, c.r_i) for c in ordered]
    authority_values = [v for pair in shares for v in pair]
    nonces = NonceSource.hedged(params, state.rng(32), authority_values, (state.x, state.r))
    c_list = tuple(c.c_i for c in ordered)
    proof = linked_sum_prove(params, state.x, state.r, shares, state.c_x, c_list, a_pub, nonces=nonces)
    bundle = MultiBundle(
        a_pub, proof, state.c_x, c_list,
        tuple(c.sig for c in ordered), tuple(c.verification_key for c in ordered),
    )
    key = DsaKeyMaterial(a, a_pub)
    state.key, state.phase = key, "responded"
    return bundle, key


def multi_verify_sign(
    record: Contribution,
    params: GroupParams,
    bundle: MultiBundle,
    identity: EaIdentity,
    peers: Optional[TrustStore] = None,
    now: Optional[float] = None,
) -> AttestationMsg:
    """Authority-side check of the combined bundle, then a signature on A.

    ``peers`` optionally restricts which verification keys other authorities
    may sign with; without it any key named in the bundle is accepted.
    """
    n = len(bundle.c_list)
    i = record.index
    if (
        bundle.c != record.c
        or i > n
        or bundle.c_list[i - 1] != record.c_i
        or len(bundle.sig_list) != n
        or len(bundle.vk_list) != n
    ):
        raise ProtocolRejection("own_contribution_missing", "own commitment not found in bundle")
    if bundle.vk_list[i - 1] != identity.verification_key:
        raise ProtocolRejection("own_contribution_missing", "own key not found in bundle")
    for j, (c_j, sig_j, vk_j) in enumerate(zip(bundle.c_list, bundle.sig_list, bundle.vk_list), start=1):
        if peers is not None and j != i and ea_id_for(vk_j) not in peers:
            raise ProtocolRejection("peer_signature_invalid", "authority {} not trusted".format(j))
        if not verify_signature(vk_j, contribution_payload(params, j, bundle.c, c_j), sig_j):
            raise ProtocolRejection("peer_signature_invalid", "signature {} rejected".format(j))
    if not params.is_member(bundle.a_pub):
        raise ProtocolRejection("bad_element", "public key is not a group element")
    if not linked_sum_verify(params, bundle.proof, bundle.c, bundle.c_list, bundle.a_pub):
        raise ProtocolRejection("proof_invalid", "linked-sum proof rejected")
    return _sign_key(params, identity, bundle.a_pub, now)


def run_multi_local(
    params: GroupParams,
    identities: Sequence[EaIdentity],
    device_rng: Rng = default_rng,
    ea_rngs: Optional[Sequence[Rng]] = None,
    insecure: bool = False,
):
    """In-process multi-authority run; returns ``(AttestedKey, DsaKeyMaterial, device_state)``."""
    ea_rngs = ea_rngs or [default_rng] * len(identities)
    state, msg1 = device_start(params, device_rng, insecure=insecure)
    records = [
        multi_contribute(params, rng, i, msg1.c_x, ident)
        for i, (ident, rng) in enumerate(zip(identities, ea_rngs), start=1)
    ]
    bundle, key = multi_finalize(state, records)
    signed = [
        (multi_verify_sign(rec, params, bundle, ident), ident.verification_key)
        for rec, ident in zip(records, identities)
    ]
    return device_complete_multi(state, signed), key, state
