"""EA signing identities, attested-key bundles and client-side verification."""

from __future__ import annotations

import base64
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from .encoding import int_to_min, len4, parse_hex_int

BUNDLE_VERSION = 1
ATTESTATION_TAG = b"EAKG1-ATT"
SCHEMES = {"rsa": b"\x01", "dsa": b"\x02"}
ARMOR_BEGIN = "-----BEGIN EAKG ATTESTED KEY-----"
ARMOR_END = "-----END EAKG ATTESTED KEY-----"

_KNOWN_FIELDS = (
    "version", "scheme", "params_hash", "public_key", "timestamp", "ea_id", "sig", "cosignatures"
)


class MalformedBundle(ValueError):
    pass


def ea_id_for(verification_key: bytes) -> str:
    return hashlib.sha256(verification_key).hexdigest()


@dataclass(frozen=True)
class EaIdentity:
    signing_key: Ed25519PrivateKey = field(repr=False)
    verification_key: bytes
    ea_id: str

    @classmethod
    def from_private_bytes(cls, raw: bytes) -> "EaIdentity":
        sk = Ed25519PrivateKey.from_private_bytes(raw)
        vk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return cls(sk, vk, ea_id_for(vk))

    def private_bytes(self) -> bytes:
        return self.signing_key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())

    def sign(self, payload: bytes) -> bytes:
        return self.signing_key.sign(payload)


def ea_keygen(rng=os.urandom) -> EaIdentity:
    """Fresh Ed25519 identity; ``rng`` must be strong (EAs are assumed to be)."""
    return EaIdentity.from_private_bytes(rng(32))


def verify_signature(verification_key: bytes, payload: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(verification_key).verify(sig, payload)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


def rsa_key_bytes(n: int, e: int) -> bytes:
    return len4(int_to_min(n)) + len4(int_to_min(e))


def attestation_payload(scheme: str, params_hash: bytes, key_bytes: bytes, timestamp: int) -> bytes:
    return (
        ATTESTATION_TAG
        + SCHEMES[scheme]
        + params_hash
        + len4(key_bytes)
        + int(timestamp).to_bytes(8, "big")
    )


def sign_public_key(
    identity: EaIdentity, scheme: str, params_hash: bytes, key_bytes: bytes, timestamp: int
) -> bytes:
    return identity.sign(attestation_payload(scheme, params_hash, key_bytes, timestamp))


@dataclass(frozen=True)
class AttestationMsg:
    """Final EA message for every protocol: the signature and its timestamp."""

    sig: bytes
    timestamp: int
    ea_id: str

    def to_wire(self) -> dict:
        return {"sig": self.sig.hex(), "timestamp": self.timestamp, "ea_id": self.ea_id}

    @classmethod
    def from_wire(cls, doc: dict) -> "AttestationMsg":
        return cls(bytes.fromhex(doc["sig"]), int(doc["timestamp"]), str(doc["ea_id"]))


class TrustStore:
    """``ea_id -> verification key``; the fingerprint of every entry is re-checked on load."""

    def __init__(self, keys: Optional[dict] = None):
        self._keys: dict[str, bytes] = {}
        for ea_id, vk in (keys or {}).items():
            if ea_id_for(vk) != ea_id:
                raise ValueError("fingerprint mismatch for {}".format(ea_id))
            self._keys[ea_id] = vk

    def add(self, verification_key: bytes) -> str:
        ea_id = ea_id_for(verification_key)
        keys = dict(self._keys)
        keys[ea_id] = verification_key
        self._keys = keys  # replaced wholesale so readers never see a partial update
        return ea_id

    def get(self, ea_id: str) -> Optional[bytes]:
        return self._keys.get(ea_id)

    def __contains__(self, ea_id) -> bool:
        return ea_id in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def to_json(self) -> str:
        return json.dumps({k: v.hex() for k, v in sorted(self._keys.items())}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrustStore":
        doc = json.loads(text)
        return cls({k: bytes.fromhex(v) for k, v in doc.items()})

    @classmethod
    def load(cls, path) -> "TrustStore":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


@dataclass
class AttestedKey:
    scheme: str
    params_hash: bytes
    public_key: dict  # hex strings: {"n", "e"} or {"a_pub"}
    timestamp: int
    ea_id: str
    sig: bytes
    version: int = BUNDLE_VERSION
    # Further EA signatures over the same key (multi-authority bundles).
    cosignatures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def key_bytes(self) -> bytes:
        if self.scheme == "rsa":
            return rsa_key_bytes(parse_hex_int(self.public_key["n"]), parse_hex_int(self.public_key["e"]))
        if self.scheme == "dsa":
            return bytes.fromhex(self.public_key["a_pub"])
        raise MalformedBundle("unknown scheme {!r}".format(self.scheme))

    def signatures(self):
        yield self.ea_id, self.timestamp, self.sig
        for co in self.cosignatures:
            yield co["ea_id"], int(co["timestamp"]), bytes.fromhex(co["sig"])

    def to_dict(self) -> dict:
        doc = dict(self.extra)
        doc.update(
            version=self.version,
            scheme=self.scheme,
            params_hash=self.params_hash.hex(),
            public_key=dict(self.public_key),
            timestamp=self.timestamp,
            ea_id=self.ea_id,
            sig=self.sig.hex(),
        )
        if self.cosignatures:
            doc["cosignatures"] = [dict(c) for c in self.cosignatures]
        return doc


def encode_bundle(bundle: AttestedKey) -> bytes:
    return json.dumps(bundle.to_dict(), sort_keys=True).encode("utf-8")


def decode_bundle(data: bytes) -> AttestedKey:
    try:
        doc = json.loads(data)
        if not isinstance(doc, dict):
            raise MalformedBundle("bundle is not a JSON object")
        public_key = doc["public_key"]
        if not isinstance(public_key, dict) or doc["scheme"] not in SCHEMES:
            raise MalformedBundle("bad public key or scheme")
        cosigs = doc.get("cosignatures", [])
        for co in cosigs:
            if set(co) != {"ea_id", "timestamp", "sig"}:
                raise MalformedBundle("bad cosignature entry")
        bundle = AttestedKey(
            version=doc["version"],
            scheme=doc["scheme"],
            params_hash=bytes.fromhex(doc["params_hash"]),
            public_key=public_key,
            timestamp=int(doc["timestamp"]),
            ea_id=str(doc["ea_id"]),
            sig=bytes.fromhex(doc["sig"]),
            cosignatures=list(cosigs),
            extra={k: v for k, v in doc.items() if k not in _KNOWN_FIELDS},
        )
        bundle.key_bytes  # noqa: B018 - parse the key fields eagerly
        return bundle
    except MalformedBundle:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise MalformedBundle(str(exc)) from exc


def armor(data: bytes) -> str:
    body = base64.b64encode(data).decode("ascii")
    lines = [body[i : i + 64] for i in range(0, len(body), 64)]
    return "\n".join([ARMOR_BEGIN, *lines, ARMOR_END]) + "\n"


def dearmor(text: str) -> bytes:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if len(lines) < 2 or lines[0] != ARMOR_BEGIN or lines[-1] != ARMOR_END:
        raise MalformedBundle("missing armor lines")
    try:
        return base64.b64decode("".join(lines[1:-1]), validate=True)
    except ValueError as exc:
        raise MalformedBundle("bad base64 body") from exc


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: Optional[str] = None
    timestamp: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def verify_attested_key(store: TrustStore, bundle) -> Verdict:
    """Check every EA signature on ``bundle`` (an :class:`AttestedKey` or encoded bytes).

    The returned verdict exposes the primary signing timestamp so callers can
    apply freshness policies.
    """
    if isinstance(bundle, (bytes, bytearray)):
        try:
            bundle = decode_bundle(bytes(bundle))
        except MalformedBundle:
            return Verdict(False, "malformed")
    if bundle.version != BUNDLE_VERSION:
        return Verdict(False, "unsupported_version")
    try:
        key_bytes = bundle.key_bytes
        sigs = list(bundle.signatures())
    except (MalformedBundle, ValueError, KeyError, TypeError):
        return Verdict(False, "malformed")
    for ea_id, ts, sig in sigs:
        vk = store.get(ea_id)
        if vk is None:
            return Verdict(False, "unknown_ea")
        payload = attestation_payload(bundle.scheme, bundle.params_hash, key_bytes, ts)
        if not verify_signature(vk, payload, sig):
            return Verdict(False, "bad_signature")
    return Verdict(True, None, bundle.timestamp)
