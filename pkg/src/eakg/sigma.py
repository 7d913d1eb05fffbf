"""Sigma protocols over Pedersen commitments, made non-interactive with Fiat-Shamir.

Three relations are supported:

``MUL``  knowledge of ``(q, r_q, s)`` with ``C_q = g^q h^r_q`` and
         ``C_p^q = g^n h^s``; this shows ``n = p*q mod Q`` for the values
         committed in ``C_p`` and ``C_q``.
``PED``  knowledge of ``(x, r)`` with ``C_x = g^x h^r`` and ``A / g^x' = g^x``.
``SUM``  knowledge of ``(x, r, x_1, r_1, ..., x_N, r_N)`` with
         ``C = g^x h^r``, ``C_i = g^x_i h^r_i`` and ``A = g^(x + sum x_i)``.

Each relation is described by a :class:`Relation` (first-message map, the
verifier's recomputation, transcript items).  The generic machinery on top of
it gives proving, verification, simulation and special-soundness extraction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .encoding import byte_width, expand, int_to_min, len4
from .group import GroupParams, Rng, default_rng

TAG_MUL = "EAKG1-NIZK-MUL"
TAG_PED = "EAKG1-NIZK-PED"
TAG_SUM = "EAKG1-NIZK-SUM"


class RelationError(ValueError):
    """The prover was handed a witness that does not satisfy the statement."""

    def __init__(self, message: str = "relation does not hold"):
        super().__init__(message)


class ExtractionError(ValueError):
    pass


def challenge_bits(q: int) -> int:
    """Challenge length l.

    ``min(256, bitlen(Q) - 2)``, rounded down to whole bytes whenever that
    still leaves at least one byte, so that encoded proofs have the exact
    byte length ``l/8 + m*ceil(bitlen(Q)/8)``.  Toy groups keep the raw value.
    """
    raw = min(256, q.bit_length() - 2)
    if raw >= 8:
        return raw - raw % 8
    return max(raw, 1)


class Transcript:
    """Length-prefixed Fiat-Shamir transcript.

    Serialization: ``tag || 0x00 || params_hash || len4(item) || item ...``.
    """

    def __init__(self, tag: str, params: GroupParams):
        self.params = params
        self._head = tag.encode("ascii") + b"\x00" + params.params_hash
        self._items: list[bytes] = []

    def element(self, v: int) -> "Transcript":
        self._items.append(self.params.element_bytes(v))
        return self

    def scalar(self, s: int) -> "Transcript":
        self._items.append(self.params.scalar_bytes(s % self.params.q))
        return self

    def integer(self, n: int) -> "Transcript":
        self._items.append(int_to_min(n))
        return self

    def raw(self, b: bytes) -> "Transcript":
        self._items.append(bytes(b))
        return self

    def serialize(self) -> bytes:
        return self._head + b"".join(len4(i) for i in self._items)


def challenge(transcript: Transcript) -> int:
    """First l bits of SHA-256 over the serialized transcript."""
    l = challenge_bits(transcript.params.q)
    digest = hashlib.sha256(transcript.serialize()).digest()
    return int.from_bytes(digest, "big") >> (256 - l)


class NonceSource:
    """Deterministic nonce stream.

    The seed hashes the device's own random bytes together with all
    randomness the entropy authorities supplied and the witness, so a broken
    device RNG alone cannot make two proofs share nonces.
    """

    def __init__(self, params: GroupParams, seed: bytes):
        self.params = params
        self._seed = seed
        self._ctr = 0

    @classmethod
    def hedged(
        cls,
        params: GroupParams,
        device_bytes: bytes,
        authority_values: Sequence[int] = (),
        witness: Sequence[int] = (),
        statement: bytes = b"",
    ) -> "NonceSource":
        h = hashlib.sha256(b"EAKG1-NONCE")
        h.update(len4(device_bytes))
        h.update(len(authority_values).to_bytes(4, "big"))
        for v in authority_values:
            h.update(len4(int_to_min(v)))
        h.update(len(witness).to_bytes(4, "big"))
        for w in witness:
            h.update(len4(int_to_min(w)))
        h.update(len4(statement))
        return cls(params, h.digest())

    def scalar(self) -> int:
        width = self.params.scalar_width + 16
        out = expand(self._seed + self._ctr.to_bytes(8, "big"), width, b"EAKG1-NONCE-X")
        self._ctr += 1
        return int.from_bytes(out, "big") % self.params.q

    def take(self, count: int) -> list[int]:
        return [self.scalar() for _ in range(count)]


# --- relations --------------------------------------------------------------


@dataclass(frozen=True)
class MulStatement:
    n: int
    c_p: int
    c_q: int

    def elements(self):
        return (self.c_p, self.c_q)


@dataclass(frozen=True)
class PedStatement:
    c_x: int
    x_prime: int
    a_pub: int

    def elements(self):
        return (self.c_x, self.a_pub)


@dataclass(frozen=True)
class SumStatement:
    c: int
    c_list: tuple
    a_pub: int

    def elements(self):
        return (self.c, *self.c_list, self.a_pub)


def _neg(params: GroupParams, e: int) -> int:
    # h^{-k} is computed as h^{Q-k}; everything stays in [0, Q).
    return (params.q - e % params.q) % params.q


@dataclass(frozen=True)
class Relation:
    tag: str
    witness_size: Callable[[object], int]
    first: Callable[[GroupParams, object, Sequence[int]], tuple]
    recompute: Callable[[GroupParams, object, int, Sequence[int]], tuple]
    statement_items: Callable[[Transcript, object], None]

    def transcript(self, params: GroupParams, stmt, t: Sequence[int]) -> Transcript:
        tr = Transcript(self.tag, params)
        self.statement_items(tr, stmt)
        for e in t:
            tr.element(e)
        return tr


def _mul_first(params, stmt: MulStatement, k):
    p, h = params.p, params.h
    t1 = params.gh(k[0], k[1])
    t2 = pow(stmt.c_p, k[0], p) * pow(h, _neg(params, k[2]), p) % p
    return (t1, t2)


def _mul_recompute(params, stmt: MulStatement, c, z):
    p, g, h = params.p, params.g, params.h
    t1 = params.gh(z[0], z[1]) * pow(stmt.c_q, _neg(params, c), p) % p
    t2 = (
        pow(stmt.c_p, z[0], p)
        * pow(h, _neg(params, z[2]), p)
        * pow(g, _neg(params, c * stmt.n), p)
        % p
    )
    return (t1, t2)


def _mul_items(tr: Transcript, stmt: MulStatement):
    tr.element(stmt.c_p).element(stmt.c_q).integer(stmt.n)


MUL = Relation(TAG_MUL, lambda stmt: 3, _mul_first, _mul_recompute, _mul_items)


def _ped_first(params, stmt: PedStatement, k):
    return (params.gh(k[0], k[1]), pow(params.g, k[0], params.p))


def _ped_recompute(params, stmt: PedStatement, c, z):
    p, g = params.p, params.g
    t1 = params.gh(z[0], z[1]) * pow(stmt.c_x, _neg(params, c), p) % p
    base = stmt.a_pub * pow(g, _neg(params, stmt.x_prime), p) % p
    t2 = pow(g, z[0], p) * pow(base, _neg(params, c), p) % p
    return (t1, t2)


def _ped_items(tr: Transcript, stmt: PedStatement):
    tr.element(stmt.c_x).scalar(stmt.x_prime).element(stmt.a_pub)


PED = Relation(TAG_PED, lambda stmt: 2, _ped_first, _ped_recompute, _ped_items)


def _sum_first(params, stmt: SumStatement, k):
    t = [params.gh(k[0], k[1])]
    total = k[0]
    for i in range(len(stmt.c_list)):
        kx, kr = k[2 + 2 * i], k[3 + 2 * i]
        t.append(params.gh(kx, kr))
        total += kx
    t.append(pow(params.g, total % params.q, params.p))
    return tuple(t)


def _sum_recompute(params, stmt: SumStatement, c, z):
    p = params.p
    negc = _neg(params, c)
    t = [params.gh(z[0], z[1]) * pow(stmt.c, negc, p) % p]
    total = z[0]
    for i, ci in enumerate(stmt.c_list):
        zx, zr = z[2 + 2 * i], z[3 + 2 * i]
        t.append(params.gh(zx, zr) * pow(ci, negc, p) % p)
        total += zx
    t.append(pow(params.g, total % params.q, p) * pow(stmt.a_pub, negc, p) % p)
    return tuple(t)


def _sum_items(tr: Transcript, stmt: SumStatement):
    tr.element(stmt.c)
    tr.integer(len(stmt.c_list))
    for ci in stmt.c_list:
        tr.element(ci)
    tr.element(stmt.a_pub)


SUM = Relation(
    TAG_SUM, lambda stmt: 2 + 2 * len(stmt.c_list), _sum_first, _sum_recompute, _sum_items
)


# --- sigma-level interface --------------------------------------------------


@dataclass(frozen=True)
class SigmaTranscript:
    t: tuple
    c: int
    z: tuple


def sigma_first(relation: Relation, params: GroupParams, stmt, nonces: Sequence[int]) -> tuple:
    return relation.first(params, stmt, [k % params.q for k in nonces])


def sigma_respond(params: GroupParams, nonces: Sequence[int], witness: Sequence[int], c: int) -> tuple:
    q = params.q
    return tuple((k + c * w) % q for k, w in zip(nonces, witness))


def sigma_verify(relation: Relation, params: GroupParams, stmt, tr: SigmaTranscript) -> bool:
    """Interactive verifier: the responses must reproduce the first message."""
    if not all(params.is_member(e) for e in stmt.elements()):
        return False
    if any(not 0 <= zi < params.q for zi in tr.z):
        return False
    return tuple(relation.recompute(params, stmt, tr.c, tr.z)) == tuple(tr.t)


def simulate(
    relation: Relation, params: GroupParams, stmt, forced_challenge: int, rng: Rng = default_rng
) -> SigmaTranscript:
    """Accepting transcript for ``forced_challenge`` built without the witness."""
    z = tuple(params.random_scalar(rng) for _ in range(relation.witness_size(stmt)))
    t = relation.recompute(params, stmt, forced_challenge, z)
    return SigmaTranscript(tuple(t), forced_challenge, z)


def extract(
    relation: Relation, params: GroupParams, stmt, first: SigmaTranscript, second: SigmaTranscript
) -> tuple:
    """Witness from two accepting transcripts sharing a first message."""
    if tuple(first.t) != tuple(second.t):
        raise ExtractionError("transcripts do not share commitments")
    dc = (first.c - second.c) % params.q
    if dc == 0:
        raise ExtractionError("challenges equal")
    inv = pow(dc, -1, params.q)
    return tuple((a - b) * inv % params.q for a, b in zip(first.z, second.z))


# --- proofs -----------------------------------------------------------------


def _take_nonces(params, nonces, count, witness, stmt_bytes) -> list[int]:
    if nonces is None:
        nonces = NonceSource.hedged(params, default_rng(32), (), witness, stmt_bytes)
    if isinstance(nonces, NonceSource):
        return nonces.take(count)
    ks = [k % params.q for k in nonces]
    if len(ks) != count:
        raise ValueError("expected {} nonces, got {}".format(count, len(ks)))
    return ks


def _decode_fields(params: GroupParams, data: bytes, count: Optional[int]):
    l = challenge_bits(params.q)
    cw, zw = byte_width(l), params.scalar_width
    body = len(data) - cw
    if body < 0 or body % zw:
        raise ValueError("bad proof length")
    if count is not None and body // zw != count:
        raise ValueError("bad proof length")
    c = int.from_bytes(data[:cw], "big")
    if c >> l:
        raise ValueError("challenge out of range")
    zs = []
    for i in range(body // zw):
        z = int.from_bytes(data[cw + i * zw : cw + (i + 1) * zw], "big")
        if z >= params.q:
            raise ValueError("response out of range")
        zs.append(z)
    return c, zs


def _encode_fields(params: GroupParams, c: int, zs: Sequence[int]) -> bytes:
    cw = byte_width(challenge_bits(params.q))
    return c.to_bytes(cw, "big") + b"".join(params.scalar_bytes(z) for z in zs)


def proof_size(params: GroupParams, responses: int) -> int:
    """Encoded size in bytes: ``l/8 + responses * ceil(bitlen(Q)/8)``."""
    return byte_width(challenge_bits(params.q)) + responses * params.scalar_width


class _Proof:
    responses: tuple

    def to_bytes(self, params: GroupParams) -> bytes:
        return _encode_fields(params, self.c, self.responses)

    def to_hex(self, params: GroupParams) -> str:
        return self.to_bytes(params).hex()


@dataclass(frozen=True)
class MulProof(_Proof):
    c: int
    z1: int
    z2: int
    z3: int

    @property
    def responses(self):
        return (self.z1, self.z2, self.z3)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "MulProof":
        c, z = _decode_fields(params, data, 3)
        return cls(c, *z)


@dataclass(frozen=True)
class PedProof(_Proof):
    c: int
    z1: int
    z2: int

    @property
    def responses(self):
        return (self.z1, self.z2)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "PedProof":
        c, z = _decode_fields(params, data, 2)
        return cls(c, *z)


@dataclass(frozen=True)
class LinkedSumProof(_Proof):
    c: int
    z_x: int
    z_r: int
    pairs: tuple  # ((z_x1, z_r1), ...)

    @property
    def responses(self):
        out = [self.z_x, self.z_r]
        for a, b in self.pairs:
            out += [a, b]
        return tuple(out)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "LinkedSumProof":
        c, z = _decode_fields(params, data, None)
        if len(z) < 4 or len(z) % 2:
            raise ValueError("bad proof length")
        pairs = tuple((z[i], z[i + 1]) for i in range(2, len(z), 2))
        return cls(c, z[0], z[1], pairs)


def _prove(relation, params, stmt, witness, nonces):
    stmt_bytes = relation.transcript(params, stmt, ()).serialize()
    ks = _take_nonces(params, nonces, len(witness), witness, stmt_bytes)
    t = sigma_first(relation, params, stmt, ks)
    c = challenge(relation.transcript(params, stmt, t))
    return c, sigma_respond(params, ks, witness, c)


def _verify(relation, params, stmt, c, z) -> bool:
    if not all(params.is_member(e) for e in stmt.elements()):
        return False
    if not 0 <= c < (1 << challenge_bits(params.q)):
        return False
    if any(not (isinstance(zi, int) and 0 <= zi < params.q) for zi in z):
        return False
    t = relation.recompute(params, stmt, c, z)
    return challenge(relation.transcript(params, stmt, t)) == c


def mul_prove(
    params: GroupParams,
    n: int,
    c_p: int,
    c_q: int,
    p: int,
    r_p: int,
    q: int,
    r_q: int,
    nonces=None,
    check: bool = True,
) -> MulProof:
    Q = params.q
    if check:
        if (
            params.gh(p, r_p) != c_p
            or params.gh(q, r_q) != c_q
            or (n - p * q) % Q
        ):
            raise RelationError()
    stmt = MulStatement(n, c_p, c_q)
    witness = (q % Q, r_q % Q, r_p * q % Q)
    c, z = _prove(MUL, params, stmt, witness, nonces)
    return MulProof(c, *z)


def mul_verify(params: GroupParams, n: int, c_p: int, c_q: int, proof: MulProof) -> bool:
    try:
        return _verify(MUL, params, MulStatement(n, c_p, c_q), proof.c, proof.responses)
    except (TypeError, ValueError, AttributeError, OverflowError):
        return False


def ped_prove(
    params: GroupParams,
    x: int,
    r: int,
    c_x: int,
    x_prime: int,
    a_pub: int,
    nonces=None,
    check: bool = True,
) -> PedProof:
    if check:
        if params.gh(x, r) != c_x or pow(params.g, (x + x_prime) % params.q, params.p) != a_pub:
            raise RelationError()
    stmt = PedStatement(c_x, x_prime % params.q, a_pub)
    c, z = _prove(PED, params, stmt, (x % params.q, r % params.q), nonces)
    return PedProof(c, *z)


def ped_verify(params: GroupParams, proof: PedProof, c_x: int, x_prime: int, a_pub: int) -> bool:
    try:
        if not 0 <= x_prime < params.q:
            return False
        return _verify(PED, params, PedStatement(c_x, x_prime, a_pub), proof.c, proof.responses)
    except (TypeError, ValueError, AttributeError, OverflowError):
        return False


def linked_sum_prove(
    params: GroupParams,
    x: int,
    r: int,
    contributions: Sequence[tuple],
    c: int,
    c_list: Sequence[int],
    a_pub: int,
    nonces=None,
    check: bool = True,
) -> LinkedSumProof:
    """Proof that ``a_pub`` carries the device's committed x plus every contributed x_i."""
    Q = params.q
    if len(contributions) != len(c_list) or not contributions:
        raise RelationError("contribution count mismatch")
    if check:
        ok = params.gh(x, r) == c and all(
            params.gh(xi, ri) == ci for (xi, ri), ci in zip(contributions, c_list)
        )
        total = (x + sum(xi for xi, _ in contributions)) % Q
        if not ok or pow(params.g, total, params.p) != a_pub:
            raise RelationError()
    stmt = SumStatement(c, tuple(c_list), a_pub)
    witness = [x % Q, r % Q]
    for xi, ri in contributions:
        witness += [xi % Q, ri % Q]
    ch, z = _prove(SUM, params, stmt, tuple(witness), nonces)
    pairs = tuple((z[i], z[i + 1]) for i in range(2, len(z), 2))
    return LinkedSumProof(ch, z[0], z[1], pairs)


def linked_sum_verify(
    params: GroupParams, proof: LinkedSumProof, c: int, c_list: Sequence[int], a_pub: int
) -> bool:
    try:
        if len(proof.pairs) != len(c_list) or not c_list:
            return False
        stmt = SumStatement(c, tuple(c_list), a_pub)
        return _verify(SUM, params, stmt, proof.c, proof.responses)
    except (TypeError, ValueError, AttributeError, OverflowError):
        return False
