"""Scripted misbehaving devices and EAs, and weak randomness sources.

Scenarios are plain JSON records::

    {"name": ..., "protocol": "rsa" | "dsa", "actor": "device" | "ea",
     "strategy": {"kind": ..., ...}, "params": {"k": 16, "e": 65537},
     "expected": {"outcome": "reject", "code": ...}
              or {"outcome": "device_abort", "reason": ...}
              or {"outcome": "accept"}}

:func:`run_scenario` plays the full protocol in-process with the scripted
party swapped in and records every wire message.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from . import dsa, rsa
from .attestation import AttestationMsg, EaIdentity, ea_keygen
from .errors import DeviceAbort, ProtocolRejection, Restart
from .group import GroupParams, Rng, default_rng, generate_rsa_params
from .keyfile import save_outputs
from .pedersen import shift_by_public
from .sigma import mul_prove

WEAK_MODES = ("constant", "counter", "low-bits")


class WeakRng:
    """Deterministic byte source emulating a broken device RNG.

    ``constant``  every byte equals ``seed & 0xff``.
    ``counter``   SHA-256 stream keyed by a 16-bit seed (think pid seeding).
    ``low-bits``  only the two low bits of each byte vary, reproducibly from ``seed``.
    """

    def __init__(self, mode: str, seed: int = 0):
        if mode not in WEAK_MODES:
            raise ValueError("unknown weak rng mode {!r}".format(mode))
        self.mode = mode
        self.seed = seed
        self._ctr = 0
        self._buf = b""
        self._prng = random.Random(seed)

    def _counter_block(self) -> bytes:
        block = hashlib.sha256(
            b"EAKG1-WEAK" + (self.seed & 0xFFFF).to_bytes(2, "big") + self._ctr.to_bytes(8, "big")
        ).digest()
        self._ctr += 1
        return block

    def __call__(self, n: int) -> bytes:
        if self.mode == "constant":
            return bytes([self.seed & 0xFF]) * n
        if self.mode == "low-bits":
            return bytes(self._prng.getrandbits(2) for _ in range(n))
        while len(self._buf) < n:
            self._buf += self._counter_block()
        out, self._buf = self._buf[:n], self._buf[n:]
        return out


def make_weak_rng(mode: str, seed: int = 0) -> WeakRng:
    return WeakRng(mode, seed)


@dataclass
class Outcome:
    accepted: bool
    rejection_code: Optional[str] = None
    abort_reason: Optional[str] = None
    transcripts: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        if self.accepted:
            return "accept"
        return "reject" if self.rejection_code else "device_abort"

    def matches(self, expected: dict) -> bool:
        want = expected["outcome"]
        if want != self.kind:
            return False
        if want == "reject":
            return expected.get("code") == self.rejection_code
        if want == "device_abort":
            return expected.get("reason", self.abort_reason) == self.abort_reason
        return True

    def describe(self) -> str:
        if self.accepted:
            return "accept"
        if self.rejection_code:
            return "reject:" + self.rejection_code
        return "device_abort:" + str(self.abort_reason)


def load_scenarios(name: str = "cheat_matrix.json") -> list:
    text = resources.files("eakg").joinpath("data/" + name).read_text(encoding="utf-8")
    return json.loads(text)


def _record(log: list, direction: str, doc: dict) -> None:
    log.append({"dir": direction, "msg": doc})


# --- RSA -------------------------------------------------------------------


def _forge_msg3(strategy: dict, params, config, state, msg3):
    kind = strategy["kind"]
    k = config.k
    if kind == "delta_offset":
        value = config.delta + int(strategy.get("offset", 0))
        field_name = strategy.get("field", "delta_x")
        return rsa.RsaMsg3(
            msg3.n,
            value if field_name == "delta_x" else msg3.delta_x,
            value if field_name == "delta_y" else msg3.delta_y,
            msg3.proof,
        )
    if kind == "modulus_out_of_range":
        n = (1 << (2 * k + 2)) - 1 if strategy["side"] == "low" else 1 << (2 * k + 4)
        return rsa.RsaMsg3(n, msg3.delta_x, msg3.delta_y, msg3.proof)
    if kind == "mismatched_witness":
        # Claim a different modulus and prove it with the real factors anyway.
        key = state.key
        n_forged = key.n + 2 * key.p
        c_p = shift_by_public(params, state.c_x, key.p - state.x)
        c_q = shift_by_public(params, state.c_y, key.q - state.y)
        proof = mul_prove(params, n_forged, c_p, c_q, key.p, state.r_x, key.q, state.r_y, check=False)
        return rsa.RsaMsg3(n_forged, msg3.delta_x, msg3.delta_y, proof)
    return msg3


def _run_rsa(scenario, params, identity, device_rng, ea_rng, out_prefix, max_restarts=64) -> Outcome:
    strategy = scenario.get("strategy", {"kind": "honest"})
    kind = strategy["kind"]
    opts = scenario.get("params", {})
    config = rsa.RsaConfig(k=int(opts.get("k", params.k)), e=int(opts.get("e", rsa.DEFAULT_E)))
    out = Outcome(False)
    log = out.transcripts

    # Honest restarts (no prime in a window) are retried; only scripted faults end the run.
    for _ in range(max_restarts + 1):
        del log[:]
        state, msg1 = rsa.device_start(params, config, device_rng)
        _record(log, "device->ea", msg1.to_wire(params))
        if kind == "tamper_commitment":
            msg1 = rsa.RsaMsg1(shift_by_public(params, msg1.c_x, 1), msg1.c_y, msg1.e)
            _record(log, "wire-tamper", msg1.to_wire(params))
        ea_state, msg2 = rsa.ea_respond(params, config, ea_rng, msg1)
        if kind == "x_prime_out_of_range":
            msg2 = rsa.RsaMsg2(1 << (config.k + 1), msg2.y_prime)
        _record(log, "ea->device", msg2.to_wire())
        try:
            msg3, key = rsa.device_finalize(state, msg2)
            break
        except Restart as exc:
            out.abort_reason = exc.reason
            if exc.reason == "ea_value_out_of_range":
                return out
    else:
        return out
    out.abort_reason = None
    if scenario.get("actor") == "device":
        msg3 = _forge_msg3(strategy, params, config, state, msg3)
    _record(log, "device->ea", msg3.to_wire(params))
    try:
        msg4 = rsa.ea_verify_and_sign(ea_state, msg3, identity)
    except ProtocolRejection as exc:
        out.rejection_code = exc.code
        return out
    if kind == "invalid_signature":
        msg4 = AttestationMsg(bytes([msg4.sig[0] ^ 0x01]) + msg4.sig[1:], msg4.timestamp, msg4.ea_id)
    _record(log, "ea->device", msg4.to_wire())
    try:
        bundle = rsa.device_complete(state, msg4, identity.verification_key)
    except DeviceAbort as exc:
        out.abort_reason = exc.reason
        return out
    out.accepted = True
    if out_prefix is not None:
        out.files = list(save_outputs(out_prefix, key.to_json_dict(), bundle))
    return out


# --- DSA -------------------------------------------------------------------


def _run_dsa(scenario, params, identity, device_rng, ea_rng, out_prefix) -> Outcome:
    strategy = scenario.get("strategy", {"kind": "honest"})
    kind = strategy["kind"]
    out = Outcome(False)
    log = out.transcripts
    insecure = params.insecure

    state, msg1 = dsa.device_start(params, device_rng, insecure=insecure)
    _record(log, "device->ea", msg1.to_wire(params))
    ea_state, msg2 = dsa.ea_respond(params, ea_rng, msg1)
    if kind == "x_prime_out_of_range":
        msg2 = dsa.DsaMsg2(params.q)
    _record(log, "ea->device", {"x_prime": format(msg2.x_prime, "x")})
    try:
        msg3, key = dsa.device_finalize(state, msg2)
    except Restart as exc:
        out.abort_reason = exc.reason
        return out
    if kind == "shift_public_key":
        msg3 = dsa.DsaMsg3(params.mul(msg3.a_pub, params.g), msg3.proof)
    elif kind == "proof_from_other_session":
        other, other_msg1 = dsa.device_start(params, default_rng, insecure=insecure)
        _, other_msg2 = dsa.ea_respond(params, default_rng, other_msg1)
        other_msg3, _ = dsa.device_finalize(other, other_msg2)
        msg3 = dsa.DsaMsg3(msg3.a_pub, other_msg3.proof)
    elif kind == "non_member_key":
        msg3 = dsa.DsaMsg3(params.p - 1, msg3.proof)
    _record(log, "device->ea", msg3.to_wire(params))
    try:
        msg4 = dsa.ea_verify_and_sign(ea_state, msg3, identity)
    except ProtocolRejection as exc:
        out.rejection_code = exc.code
        return out
    if kind == "invalid_signature":
        msg4 = AttestationMsg(bytes([msg4.sig[0] ^ 0x01]) + msg4.sig[1:], msg4.timestamp, msg4.ea_id)
    _record(log, "ea->device", msg4.to_wire())
    try:
        bundle = dsa.device_complete(state, msg4, identity.verification_key)
    except DeviceAbort as exc:
        out.abort_reason = exc.reason
        return out
    out.accepted = True
    if out_prefix is not None:
        out.files = list(save_outputs(out_prefix, key.to_json_dict(params), bundle))
    return out


def scenario_params(scenario: dict) -> GroupParams:
    """Group for a scenario, derived from its ``params`` block."""
    opts = scenario.get("params", {})
    seed = opts.get("seed", "eakg-scenarios").encode()
    return generate_rsa_params(int(opts.get("k", 16)), seed)


def run_scenario(
    scenario: dict,
    params: Optional[GroupParams] = None,
    identity: Optional[EaIdentity] = None,
    device_rng: Rng = default_rng,
    ea_rng: Rng = default_rng,
    out_prefix=None,
) -> Outcome:
    """Execute one scenario; failures are reported in the outcome, never raised.

    With ``out_prefix`` set, a successful run writes key and bundle files there,
    which lets tests check that aborted runs leave nothing behind.
    """
    params = params or scenario_params(scenario)
    identity = identity or ea_keygen()
    runner = {"rsa": _run_rsa, "dsa": _run_dsa}[scenario.get("protocol", "rsa")]
    return runner(scenario, params, identity, device_rng, ea_rng, out_prefix)
