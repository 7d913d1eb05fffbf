"""Jointly generated RSA moduli.

Device and EA each contribute a k-bit value per prime; the device adds a
bounded offset to reach the next suitable prime and proves, over Pedersen
commitments, that the modulus it reports is the product of those primes.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .attestation import (
    AttestationMsg,
    AttestedKey,
    EaIdentity,
    attestation_payload,
    ea_id_for,
    rsa_key_bytes,
    sign_public_key,
    verify_signature,
)
from .encoding import parse_hex_int
from .errors import DeviceAbort, ProtocolRejection, Restart
from .group import GroupParams, Rng, default_rng, random_below
from .pedersen import commit, shift_by_public
from .primes import is_probable_prime, small_primes
from .sigma import MulProof, NonceSource, mul_prove, mul_verify

log = logging.getLogger(__name__)

DEFAULT_E = 65537
DEFAULT_LAMBDA = 80


def delta_bound(k: int, e: int = DEFAULT_E, lam: float = DEFAULT_LAMBDA) -> int:
    """``ceil(lam * ln(2^(k+1)) * e/(e-1))``: offset window with failure odds ~exp(-lam)."""
    if k < 4:
        raise ValueError("k must be at least 4")
    return math.ceil(lam * (k + 1) * math.log(2) * e / (e - 1))


def _sieve_moduli(total: int, width: int, e: int):
    limit = min(math.isqrt(total + width) + 1, int(small_primes()[-1]) + 1, total)
    base = small_primes()
    base = base[base < limit]
    forbidden = np.zeros(base.shape[0], dtype=np.int64)
    if 2 < e < (1 << 62) and is_probable_prime(e):
        base = np.append(base, np.int64(e))
        forbidden = np.append(forbidden, np.int64(1))
    return base, forbidden


def find_delta(total: int, delta: int, e: int, exclude: Optional[int] = None) -> Optional[int]:
    """Smallest ``d`` in ``[0, delta)`` with ``total + d`` a prime coprime-to-e-minus-one.

    ``total + d`` must also differ from ``exclude``.  Returns None if the
    window holds no such prime.
    """
    if total < 2:
        raise ValueError("sum must be at least 2")
    if delta <= 0:
        return None
    moduli, forbidden = _sieve_moduli(total, delta, e)
    starts = _kernels.window_starts(total, moduli, forbidden)
    mask = _kernels.sieve_window(delta, moduli, starts)
    for d in np.flatnonzero(mask).tolist():
        cand = total + d
        if cand == exclude or math.gcd(cand - 1, e) != 1:
            continue
        if is_probable_prime(cand):
            return d
    return None


# --- key material -----------------------------------------------------------


@dataclass(frozen=True)
class RsaKeyMaterial:
    p: int
    q: int
    n: int
    e: int
    d: int

    def to_json_dict(self) -> dict:
        return {k: format(getattr(self, k), "x") for k in ("p", "q", "n", "e", "d")}


def build_rsa_key(p: int, q: int, e: int) -> RsaKeyMaterial:
    if p == q:
        raise ValueError("p and q must be distinct")
    if math.gcd(p - 1, e) != 1 or math.gcd(q - 1, e) != 1:
        raise ValueError("e shares a factor with p-1 or q-1")
    lam = math.lcm(p - 1, q - 1)
    return RsaKeyMaterial(p=p, q=q, n=p * q, e=e, d=pow(e, -1, lam))


def prime_gen(k: int, p_min: int, e: int = DEFAULT_E, rng: Rng = default_rng, x: Optional[int] = None) -> int:
    """Standalone prime generator used as an oracle: plain upward scan, no sieve.

    ``x`` is drawn from the closed interval ``[2^k, 2^(k+1)]`` unless given.
    """
    if x is None:
        x = (1 << k) + random_below(rng, (1 << k) + 1)
    p = p_min + x
    while not (math.gcd(p - 1, e) == 1 and is_probable_prime(p)):
        p += 1
    return p


def reference_keygen(k: int, p_min: int, q_min: int, e: int = DEFAULT_E, rng: Rng = default_rng) -> int:
    return prime_gen(k, p_min, e, rng) * prime_gen(k, q_min, e, rng)


# --- configuration and messages ---------------------------------------------


@dataclass(frozen=True)
class RsaConfig:
    k: int
    e: int = DEFAULT_E
    delta: Optional[int] = None
    lam: float = DEFAULT_LAMBDA
    zero_leak: bool = False
    insecure: bool = False

    def __post_init__(self):
        if self.k < 4:
            raise ValueError("k must be at least 4")
        if self.e < 3 or self.e % 2 == 0 or not is_probable_prime(self.e):
            raise ValueError("e must be an odd prime")
        if self.delta is None:
            object.__setattr__(self, "delta", delta_bound(self.k, self.e, self.lam))
        if self.delta < 1:
            raise ValueError("delta must be positive")

    def check_params(self, params: GroupParams) -> None:
        params.require_secure(self.insecure)
        qb = params.q.bit_length()
        if qb < 2 * self.k + 100 and not self.insecure:
            raise ValueError(
                "group order has {} bits; k={} needs at least {}".format(qb, self.k, 2 * self.k + 100)
            )
        # Commitment arithmetic must not wrap for any in-range modulus.
        if params.q <= 1 << (2 * self.k + 4):
            raise ValueError("group order too small for k={}".format(self.k))


@dataclass(frozen=True)
class RsaMsg1:
    c_x: int
    c_y: int
    e: int

    def to_wire(self, params: GroupParams) -> dict:
        return {"c_x": params.element_hex(self.c_x), "c_y": params.element_hex(self.c_y), "e": format(self.e, "x")}

    @classmethod
    def from_wire(cls, doc: dict) -> "RsaMsg1":
        return cls(parse_hex_int(doc["c_x"]), parse_hex_int(doc["c_y"]), parse_hex_int(doc.get("e", "10001")))


@dataclass(frozen=True)
class RsaMsg2:
    x_prime: int
    y_prime: int

    def to_wire(self) -> dict:
        return {"x_prime": format(self.x_prime, "x"), "y_prime": format(self.y_prime, "x")}

    @classmethod
    def from_wire(cls, doc: dict) -> "RsaMsg2":
        return cls(parse_hex_int(doc["x_prime"]), parse_hex_int(doc["y_prime"]))


@dataclass(frozen=True)
class RsaMsg3:
    n: int
    delta_x: int
    delta_y: int
    proof: MulProof

    def to_wire(self, params: GroupParams) -> dict:
        return {
            "n": format(self.n, "x"),
            "delta_x": format(self.delta_x, "x"),
            "delta_y": format(self.delta_y, "x"),
            "proof": self.proof.to_hex(params),
        }

    @classmethod
    def from_wire(cls, params: GroupParams, doc: dict) -> "RsaMsg3":
        return cls(
            parse_hex_int(doc["n"]),
            parse_hex_int(doc["delta_x"]),
            parse_hex_int(doc["delta_y"]),
            MulProof.from_bytes(params, bytes.fromhex(doc["proof"])),
        )


RsaMsg4 = AttestationMsg


# --- device -----------------------------------------------------------------


@dataclass
class RsaDeviceState:
    params: GroupParams
    config: RsaConfig
    rng: Rng = field(repr=False)
    x: int
    y: int
    r_x: int = field(repr=False)
    r_y: int = field(repr=False)
    c_x: int
    c_y: int
    phase: str = "started"
    key: Optional[RsaKeyMaterial] = field(default=None, repr=False)
    msg3: Optional[RsaMsg3] = None


def _random_half_width(rng: Rng, k: int) -> int:
    return (1 << k) + random_below(rng, 1 << k)


def device_start(params: GroupParams, config: RsaConfig, rng: Rng = default_rng):
    config.check_params(params)
    k = config.k
    x = _random_half_width(rng, k)
    y = _random_half_width(rng, k)
    r_x = params.random_scalar(rng)
    r_y = params.random_scalar(rng)
    c_x, c_y = commit(params, x, r_x), commit(params, y, r_y)
    state = RsaDeviceState(params, config, rng, x, y, r_x, r_y, c_x, c_y)
    return state, RsaMsg1(c_x, c_y, config.e)


def _in_half_range(v: int, k: int) -> bool:
    return (1 << k) <= v < (1 << (k + 1))


def device_finalize(state: RsaDeviceState, msg2: RsaMsg2):
    """Step three on the device: returns ``(RsaMsg3, RsaKeyMaterial)`` or raises :class:`Restart`."""
    if state.phase != "started":
        raise RuntimeError("device_finalize called in phase {!r}".format(state.phase))
    cfg, params = state.config, state.params
    k, e = cfg.k, cfg.e
    window = 1 if cfg.zero_leak else cfg.delta

    def restart(reason):
        state.phase = "aborted"
        return Restart(reason)

    if not (_in_half_range(msg2.x_prime, k) and _in_half_range(msg2.y_prime, k)):
        raise restart("ea_value_out_of_range")
    sum_x, sum_y = state.x + msg2.x_prime, state.y + msg2.y_prime
    dx = find_delta(sum_x, window, e)
    if dx is None:
        raise restart("zero_leak_miss" if cfg.zero_leak else "no_prime_in_window")
    p = sum_x + dx
    dy = find_delta(sum_y, window, e, exclude=p)
    if dy is None:
        raise restart("zero_leak_miss" if cfg.zero_leak else "no_prime_in_window")
    q = sum_y + dy
    top = 1 << (k + 2)
    if p >= top or q >= top:
        raise restart("prime_out_of_range")
    key = build_rsa_key(p, q, e)

    c_p = shift_by_public(params, state.c_x, msg2.x_prime + dx)
    c_q = shift_by_public(params, state.c_y, msg2.y_prime + dy)
    nonces = NonceSource.hedged(
        params,
        state.rng(32),
        authority_values=(msg2.x_prime, msg2.y_prime),
        witness=(p, state.r_x, q, state.r_y),
    )
    proof = mul_prove(params, key.n, c_p, c_q, p, state.r_x, q, state.r_y, nonces=nonces)
    msg3 = RsaMsg3(key.n, dx, dy, proof)
    state.key, state.msg3, state.phase = key, msg3, "responded"
    return msg3, key


def device_complete(state: RsaDeviceState, msg4: AttestationMsg, ea_public_key: bytes) -> AttestedKey:
    if state.phase != "responded" or state.key is None:
        raise RuntimeError("device_complete called in phase {!r}".format(state.phase))
    key, params = state.key, state.params
    payload = attestation_payload("rsa", params.params_hash, rsa_key_bytes(key.n, key.e), msg4.timestamp)
    if ea_id_for(ea_public_key) != msg4.ea_id or not verify_signature(ea_public_key, payload, msg4.sig):
        state.phase = "aborted"
        raise DeviceAbort("ea signature invalid")
    state.phase = "finalized"
    return AttestedKey(
        scheme="rsa",
        params_hash=params.params_hash,
        public_key={"n": format(key.n, "x"), "e": format(key.e, "x")},
        timestamp=msg4.timestamp,
        ea_id=msg4.ea_id,
        sig=msg4.sig,
    )


# --- entropy authority ------------------------------------------------------


@dataclass
class RsaEaState:
    params: GroupParams
    config: RsaConfig
    c_x: int
    c_y: int
    x_prime: int = field(repr=False)
    y_prime: int = field(repr=False)
    session_id: str = ""
    created_at: float = 0.0


def ea_respond(
    params: GroupParams,
    config: RsaConfig,
    rng: Rng,
    msg1: RsaMsg1,
    session_id: str = "",
    now: Optional[float] = None,
):
    if not (params.is_member(msg1.c_x) and params.is_member(msg1.c_y)):
        raise ProtocolRejection("bad_commitment", "commitment is not a group element")
    k = config.k
    x_prime = _random_half_width(rng, k)
    y_prime = _random_half_width(rng, k)
    state = RsaEaState(
        params, config, msg1.c_x, msg1.c_y, x_prime, y_prime, session_id,
        time.time() if now is None else now,
    )
    return state, RsaMsg2(x_prime, y_prime)


def ea_verify_and_sign(
    state: RsaEaState, msg3: RsaMsg3, identity: EaIdentity, now: Optional[float] = None
) -> AttestationMsg:
    cfg, params, k = state.config, state.params, state.config.k
    if not (0 <= msg3.delta_x < cfg.delta and 0 <= msg3.delta_y < cfg.delta):
        raise ProtocolRejection("delta_out_of_range", "offset outside [0, delta)")
    if not (1 << (2 * k + 2)) <= msg3.n < (1 << (2 * k + 4)):
        raise ProtocolRejection("modulus_out_of_range", "modulus outside [2^(2k+2), 2^(2k+4))")
    c_p = shift_by_public(params, state.c_x, state.x_prime + msg3.delta_x)
    c_q = shift_by_public(params, state.c_y, state.y_prime + msg3.delta_y)
    if not mul_verify(params, msg3.n, c_p, c_q, msg3.proof):
        raise ProtocolRejection("proof_invalid", "multiplication proof rejected")
    ts = int(time.time() if now is None else now)
    sig = sign_public_key(identity, "rsa", params.params_hash, rsa_key_bytes(msg3.n, cfg.e), ts)
    return AttestationMsg(sig, ts, identity.ea_id)


# --- in-process driver ------------------------------------------------------


@dataclass
class RsaRun:
    bundle: AttestedKey
    key: RsaKeyMaterial
    restarts: int
    state: RsaDeviceState = field(repr=False)


def run_local(
    params: GroupParams,
    config: RsaConfig,
    identity: EaIdentity,
    device_rng: Rng = default_rng,
    ea_rng: Rng = default_rng,
    max_restarts: int = 64,
) -> RsaRun:
    """Run device and EA in one process until a key is attested or restarts run out."""
    for attempt in range(max_restarts + 1):
        state, msg1 = device_start(params, config, device_rng)
        ea_state, msg2 = ea_respond(params, config, ea_rng, msg1)
        try:
            msg3, key = device_finalize(state, msg2)
        except Restart as exc:
            log.debug("restart %d: %s", attempt, exc.reason)
            continue
        msg4 = ea_verify_and_sign(ea_state, msg3, identity)
        bundle = device_complete(state, msg4, identity.verification_key)
        return RsaRun(bundle, key, attempt, state)
    raise DeviceAbort("restart limit exhausted after {} restarts".format(max_restarts))
