"""Pedersen commitments ``g^x h^r``.

Commitments are bare group elements (ints).  Openings never travel with
them; protocol state keeps ``(x, r)`` on the side that owns the secret.
"""

from __future__ import annotations

from .group import GroupParams


def commit(params: GroupParams, x: int, r: int) -> int:
    return params.gh(x, r)


def combine(params: GroupParams, c1: int, c2: int) -> int:
    """Commitment to ``x1 + x2`` under randomness ``r1 + r2``."""
    return params.mul(c1, c2)


def shift_by_public(params: GroupParams, c: int, delta: int) -> int:
    """``c * g^delta``: adds a public value to the committed one, randomness unchanged."""
    params.check_member(c)
    return c * pow(params.g, delta % params.q, params.p) % params.p


def verify_opening(params: GroupParams, c: int, x: int, r: int) -> bool:
    if not params.is_member(c):
        return False
    return c == params.gh(x, r)
