import random

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2

from eakg.group import NotGroupElement
from eakg.pedersen import combine, commit, shift_by_public, verify_opening

from conftest import TOY

scalars = st.integers(min_value=0, max_value=22)


def test_toy_vectors():
    # 4^3 * 16^5 mod 47 and 4^4 * 16^6 mod 47
    assert commit(TOY, 3, 5) == 8
    assert commit(TOY, 4, 6) == 42
    assert commit(TOY, 0, 0) == 1


def test_combine_and_shift():
    c = commit(TOY, 3, 5)
    assert combine(TOY, c, commit(TOY, 4, 6)) == commit(TOY, 7, 11)
    assert combine(TOY, c, commit(TOY, 0, 0)) == c
    assert shift_by_public(TOY, c, 4) == commit(TOY, 7, 5)
    assert shift_by_public(TOY, c, 0) == c
    with pytest.raises(NotGroupElement):
        combine(TOY, 46, c)


def test_verify_opening():
    c = commit(TOY, 3, 5)
    assert verify_opening(TOY, c, 3, 5)
    assert not verify_opening(TOY, c, 3, 6)
    assert verify_opening(TOY, 8, 3, 5)


def _recommit(x, r):
    return pow(4, x, 47) * pow(16, r, 47) % 47


def test_randomized_against_recommit_oracle():
    rnd = random.Random(3)
    for _ in range(1000):
        x1, r1, x2, r2, d = (rnd.randrange(23) for _ in range(5))
        c1, c2 = commit(TOY, x1, r1), commit(TOY, x2, r2)
        assert TOY.is_member(c1)
        assert combine(TOY, c1, c2) == _recommit((x1 + x2) % 23, (r1 + r2) % 23)
        assert shift_by_public(TOY, c1, d) == _recommit((x1 + d) % 23, r1)


@given(scalars, scalars, scalars, scalars)
def test_homomorphism(x1, r1, x2, r2):
    lhs = combine(TOY, commit(TOY, x1, r1), commit(TOY, x2, r2))
    assert lhs == commit(TOY, (x1 + x2) % 23, (r1 + r2) % 23)


def test_hiding_uniform_over_subgroup():
    rnd = random.Random(11)
    counts = {}
    n = 23_000
    for _ in range(n):
        c = commit(TOY, 5, rnd.randrange(23))
        counts[c] = counts.get(c, 0) + 1
    assert len(counts) == 23
    expected = n / 23
    stat = sum((v - expected) ** 2 / expected for v in counts.values())
    assert stat < chi2.ppf(0.999, 22)
