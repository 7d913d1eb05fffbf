"""Prime-order subgroups of Z_P^* with hash-derived generators.

Group elements and scalars are plain ints; :class:`GroupParams` carries the
arithmetic.  ``pow``/``mul``/``inv`` validate membership on the way in, the
underscored variants do not and are meant for inputs that were checked once
at a trust boundary.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

from .encoding import byte_width, expand, hex_fixed, len4, parse_hex_int
from .primes import is_probable_prime

Rng = Callable[[int], bytes]

INSECURE_Q_BITS = 128
PARAMS_TAG = b"EAKG1-PARAMS"


class NotGroupElement(ValueError):
    def __init__(self, value=None):
        super().__init__("not a group element")
        self.value = value


class InsecureParameters(ValueError):
    pass


def default_rng(n: int) -> bytes:
    return secrets.token_bytes(n)


def random_below(rng: Rng, bound: int, max_tries: int = 128) -> int:
    """Uniform integer in ``[0, bound)`` by rejection sampling.

    A stuck source (e.g. constant 0xff bytes) would reject forever, so after
    ``max_tries`` rejections the last resort is a 64-bit-wide reduction.
    """
    if bound <= 1:
        return 0
    bits = (bound - 1).bit_length()
    nbytes = byte_width(bits)
    mask = (1 << bits) - 1
    for _ in range(max_tries):
        v = int.from_bytes(rng(nbytes), "big") & mask
        if v < bound:
            return v
    return int.from_bytes(rng(nbytes + 8), "big") % bound


@dataclass(frozen=True)
class GroupParams:
    p: int
    q: int
    g: int
    h: int
    seed: bytes = b""
    k: Optional[int] = None

    # --- sizes -------------------------------------------------------------

    @property
    def element_width(self) -> int:
        return byte_width(self.p.bit_length())

    @property
    def scalar_width(self) -> int:
        return byte_width(self.q.bit_length())

    @property
    def insecure(self) -> bool:
        return self.q.bit_length() < INSECURE_Q_BITS

    def require_secure(self, insecure_ok: bool = False) -> None:
        if self.insecure and not insecure_ok:
            raise InsecureParameters(
                "group order has {} bits; toy groups need the insecure-test flag".format(
                    self.q.bit_length()
                )
            )

    # --- arithmetic --------------------------------------------------------

    def is_member(self, v) -> bool:
        return isinstance(v, int) and 1 <= v < self.p and pow(v, self.q, self.p) == 1

    def check_member(self, v) -> int:
        if not self.is_member(v):
            raise NotGroupElement(v)
        return v

    def pow(self, base: int, exp: int) -> int:
        return pow(self.check_member(base), exp % self.q, self.p)

    def mul(self, a: int, b: int) -> int:
        return self.check_member(a) * self.check_member(b) % self.p

    def inv(self, a: int) -> int:
        return pow(self.check_member(a), -1, self.p)

    def _exp(self, base: int, exp: int) -> int:
        return pow(base, exp % self.q, self.p)

    def gh(self, x: int, r: int) -> int:
        """g^x * h^r without membership checks (g, h are members by construction)."""
        return pow(self.g, x % self.q, self.p) * pow(self.h, r % self.q, self.p) % self.p

    def random_scalar(self, rng: Rng = default_rng) -> int:
        return random_below(rng, self.q)

    # --- encoding ----------------------------------------------------------

    def element_bytes(self, v: int) -> bytes:
        return v.to_bytes(self.element_width, "big")

    def scalar_bytes(self, s: int) -> bytes:
        return s.to_bytes(self.scalar_width, "big")

    def element_hex(self, v: int) -> str:
        return hex_fixed(v, self.element_width)

    def scalar_hex(self, s: int) -> str:
        return hex_fixed(s, self.scalar_width)

    @cached_property
    def params_hash(self) -> bytes:
        ew = self.element_width
        blob = (
            PARAMS_TAG
            + len4(self.p.to_bytes(ew, "big"))
            + len4(self.q.to_bytes(self.scalar_width, "big"))
            + len4(self.g.to_bytes(ew, "big"))
            + len4(self.h.to_bytes(ew, "big"))
        )
        return hashlib.sha256(blob).digest()

    def to_json(self) -> str:
        """Canonical params file text (stable byte-for-byte)."""
        doc = {
            "version": 1,
            "kind": "schnorr",
            "k": self.k,
            "p": self.element_hex(self.p),
            "q": self.scalar_hex(self.q),
            "g": self.element_hex(self.g),
            "h": self.element_hex(self.h),
            "seed": self.seed.hex(),
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text) -> "GroupParams":
        doc = json.loads(text)
        if doc.get("version") != 1 or doc.get("kind") != "schnorr":
            raise ValueError("unsupported params file")
        params = cls(
            p=parse_hex_int(doc["p"]),
            q=parse_hex_int(doc["q"]),
            g=parse_hex_int(doc["g"]),
            h=parse_hex_int(doc["h"]),
            seed=bytes.fromhex(doc.get("seed", "")),
            k=doc.get("k"),
        )
        params.validate()
        return params

    def validate(self) -> None:
        """Check every structural invariant; raises ValueError on the first failure."""
        if not is_probable_prime(self.q):
            raise ValueError("Q is not prime")
        if not is_probable_prime(self.p):
            raise ValueError("P is not prime")
        if (self.p - 1) % self.q:
            raise ValueError("Q does not divide P-1")
        for name, v in (("g", self.g), ("h", self.h)):
            if v == 1 or not self.is_member(v):
                raise ValueError("{} is not a generator of the order-Q subgroup".format(name))
        if self.g == self.h:
            raise ValueError("g and h coincide")


def _derive_q(q_bits: int, seed: bytes) -> int:
    top = 1 << (q_bits - 1)
    nbytes = byte_width(q_bits) + 16
    c = top | (int.from_bytes(expand(seed, nbytes, b"EAKG1-Q"), "big") % top) | 1
    while True:
        if is_probable_prime(c):
            return c
        c += 2
        if c >= 2 * top:
            c = top + 1


def _derive_p(q: int) -> int:
    f = 1
    while not is_probable_prime(2 * q * f + 1):
        f += 1
    return 2 * q * f + 1


def _hash_to_subgroup(p: int, q: int, seed: bytes, tag: bytes, avoid: int = 1) -> int:
    cofactor = (p - 1) // q
    nbytes = byte_width(p.bit_length()) + 16
    ctr = 0
    while True:
        c = int.from_bytes(
            expand(seed + tag + ctr.to_bytes(4, "big"), nbytes, b"EAKG1-GEN"), "big"
        ) % p
        ctr += 1
        if c == 0:
            continue
        e = pow(c, cofactor, p)
        if e != 1 and e != avoid:
            return e


def derive_generators(p: int, q: int, seed: bytes) -> tuple[int, int]:
    """Two order-Q generators from independent hash streams ("gen-g", "gen-h")."""
    if (p - 1) % q:
        raise ValueError("Q does not divide P-1")
    g = _hash_to_subgroup(p, q, seed, b"gen-g")
    h = _hash_to_subgroup(p, q, seed, b"gen-h", avoid=g)
    return g, h


def params_for_order(q: int, seed: bytes, k: Optional[int] = None) -> GroupParams:
    """Group of the given prime order: smallest P = 2Qf+1, hash-derived g and h."""
    if not is_probable_prime(q):
        raise ValueError("Q is not prime")
    p = _derive_p(q)
    g, h = derive_generators(p, q, seed)
    return GroupParams(p=p, q=q, g=g, h=h, seed=seed, k=k)


def generate_group_params(
    q_bits: int, seed: bytes, insecure: bool = False, k: Optional[int] = None
) -> GroupParams:
    """Deterministic group with a ``q_bits``-bit prime order derived from ``seed``."""
    if q_bits < 3:
        raise ValueError("q_bits must be at least 3")
    if q_bits < INSECURE_Q_BITS and not insecure:
        raise InsecureParameters("q_bits < {} requires insecure=True".format(INSECURE_Q_BITS))
    return params_for_order(_derive_q(q_bits, seed), seed, k=k)


def rsa_q_bits(k: int) -> int:
    return 2 * k + 100


def generate_rsa_params(k: int, seed: bytes, insecure: bool = False) -> GroupParams:
    """Commitment group sized for RSA half-width ``k`` (Q of 2k+100 bits)."""
    return generate_group_params(rsa_q_bits(k), seed, insecure=insecure, k=k)


def load_params(path) -> GroupParams:
    with open(path, "r", encoding="utf-8") as fh:
        return GroupParams.from_json(fh.read())
