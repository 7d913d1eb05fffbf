"""Deterministic Miller-Rabin and small-prime tables."""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

MR_ROUNDS = 64
SMALL_PRIME_LIMIT = 1 << 16


@lru_cache(maxsize=None)
def small_primes(limit: int = SMALL_PRIME_LIMIT) -> np.ndarray:
    """All primes below ``limit`` as an int64 array."""
    flags = np.ones(limit, dtype=np.bool_)
    flags[:2] = False
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = False
    return np.nonzero(flags)[0].astype(np.int64)


@lru_cache(maxsize=1)
def _trial_primes() -> tuple[int, ...]:
    return tuple(small_primes(2000).tolist())


def _mr_bases(n: int, rounds: int):
    # Bases come from a hash of the candidate, so the verdict is reproducible.
    width = (n.bit_length() + 7) // 8 + 16
    nb = n.to_bytes((n.bit_length() + 7) // 8, "big")
    span = n - 3
    for i in range(rounds):
        stream = b""
        block = 0
        while len(stream) < width:
            stream += hashlib.sha256(
                b"EAKG1-MR" + nb + i.to_bytes(4, "big") + block.to_bytes(4, "big")
            ).digest()
            block += 1
        yield 2 + int.from_bytes(stream[:width], "big") % span


def is_probable_prime(n: int, rounds: int = MR_ROUNDS) -> bool:
    if n < 2:
        return False
    for p in _trial_primes():
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _mr_bases(n, rounds):
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    if n <= 2:
        return 2
    c = n | 1
    while not is_probable_prime(c):
        c += 2
    return c
