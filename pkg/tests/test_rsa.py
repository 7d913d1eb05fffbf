import math
import random

import pytest
from scipy.stats import chi2

from eakg import rsa
from eakg.attestation import AttestationMsg, TrustStore, verify_attested_key
from eakg.errors import DeviceAbort, ProtocolRejection, Restart
from eakg.group import generate_group_params
from eakg.pedersen import commit, verify_opening
from eakg.primes import is_probable_prime

from conftest import const_rng


def seeded(seed):
    rnd = random.Random(seed)
    return lambda n: rnd.randbytes(n)


@pytest.fixture(scope="module")
def toy4():
    # Q of 16 bits > 2^(2k+4) for k=4; needs the insecure flag.
    return generate_group_params(16, b"rsa-toy-k4", insecure=True, k=4)


def toy4_config(**kw):
    return rsa.RsaConfig(k=4, e=3, insecure=True, **kw)


# --- delta search ------------------------------------------------------------


def test_delta_bound_values():
    assert rsa.delta_bound(16, 3, 80) == 1415
    assert rsa.delta_bound(1024, 3, 80) == 85258
    assert rsa.delta_bound(1024, 65537, 80) == 56839
    # e=3 costs exactly a factor 1.5 over the e -> infinity value
    base = 80 * 1025 * math.log(2)
    assert abs(rsa.delta_bound(1024, 3, 80) - 1.5 * base) < 1
    with pytest.raises(ValueError):
        rsa.delta_bound(3, 3)


def _brute_delta(total, delta, e, exclude=None):
    for d in range(delta):
        c = total + d
        if c != exclude and math.gcd(c - 1, e) == 1 and is_probable_prime(c):
            return d
    return None


def test_find_delta_examples():
    assert rsa.find_delta(45, 100, 3) == 2
    assert rsa.find_delta(47, 100, 3) == 0
    assert rsa.find_delta(24, 4, 3) is None
    assert rsa.find_delta(47, 100, 3, exclude=47) == rsa.find_delta(48, 100, 3) + 1


def test_find_delta_matches_brute_force():
    rnd = random.Random(21)
    for _ in range(300):
        bits = rnd.choice([8, 20, 34, 66, 130])
        total = rnd.getrandbits(bits) | (1 << (bits - 1))
        e = rnd.choice([3, 5, 17, 65537])
        width = rnd.choice([4, 50, 400])
        assert rsa.find_delta(total, width, e) == _brute_delta(total, width, e), (total, width, e)


def test_find_delta_small_sums():
    for total in range(2, 300):
        assert rsa.find_delta(total, 30, 3) == _brute_delta(total, 30, 3), total


# --- key material ----------------------------------------------------------


def test_build_rsa_key():
    key = rsa.build_rsa_key(47, 41, 3)
    assert key.d == 307 and key.n == 1927
    assert pow(pow(5, 3, 1927), 307, 1927) == 5
    with pytest.raises(ValueError):
        rsa.build_rsa_key(43, 41, 3)  # 3 | 42
    with pytest.raises(ValueError):
        rsa.build_rsa_key(47, 47, 3)


def test_reference_oracle():
    assert rsa.prime_gen(4, 25, 3, x=20) == 47
    rnd = seeded(3)
    for _ in range(1000):
        p = rsa.prime_gen(16, 1 << 16, 3, rnd)
        assert is_probable_prime(p) and math.gcd(p - 1, 3) == 1
    n = rsa.reference_keygen(16, 1 << 16, 1 << 16, 3, rnd)
    assert (1 << 32) <= n < (1 << 36)


# --- state machine, toy k=4 ------------------------------------------------


def _toy_state(params, config, x, y, rng=const_rng(1)):
    r_x, r_y = 5, 7
    c_x, c_y = commit(params, x, r_x), commit(params, y, r_y)
    return rsa.RsaDeviceState(params, config, rng, x, y, r_x, r_y, c_x, c_y)


def test_toy_finalize_vector(toy4, identity):
    cfg = toy4_config()
    state = _toy_state(toy4, cfg, 20, 18)
    msg3, key = rsa.device_finalize(state, rsa.RsaMsg2(25, 22))
    assert (key.p, key.q, key.n) == (47, 41, 1927)
    assert (msg3.delta_x, msg3.delta_y) == (2, 1)
    assert (1 << 10) <= key.n < (1 << 12)
    ea = rsa.RsaEaState(toy4, cfg, state.c_x, state.c_y, 25, 22)
    msg4 = rsa.ea_verify_and_sign(ea, msg3, identity)
    bundle = rsa.device_complete(state, msg4, identity.verification_key)
    store = TrustStore()
    store.add(identity.verification_key)
    assert verify_attested_key(store, bundle)
    with pytest.raises(RuntimeError):
        rsa.device_finalize(state, rsa.RsaMsg2(25, 22))


def test_toy_restarts(toy4):
    cfg = toy4_config()
    with pytest.raises(Restart, match="ea_value_out_of_range"):
        rsa.device_finalize(_toy_state(toy4, cfg, 20, 18), rsa.RsaMsg2(32, 22))
    with pytest.raises(Restart, match="ea_value_out_of_range"):
        rsa.device_finalize(_toy_state(toy4, cfg, 20, 18), rsa.RsaMsg2(25, 15))
    # 20 + 25 = 45 is composite
    zl = toy4_config(zero_leak=True)
    state = _toy_state(toy4, zl, 20, 18)
    with pytest.raises(Restart, match="zero_leak_miss"):
        rsa.device_finalize(state, rsa.RsaMsg2(25, 22))
    assert state.phase == "aborted" and state.msg3 is None


def test_zero_leak_accepts_prime_sums(toy4):
    # 20 + 27 = 47 and 18 + 23 = 41 are both prime
    state = _toy_state(toy4, toy4_config(zero_leak=True), 20, 18)
    msg3, key = rsa.device_finalize(state, rsa.RsaMsg2(27, 23))
    assert (msg3.delta_x, msg3.delta_y, key.n) == (0, 0, 1927)


def test_ea_draws_uniform(toy4):
    cfg = toy4_config()
    rng = seeded(8)
    msg1 = rsa.device_start(toy4, cfg, rng)[1]
    counts = [0] * 16
    for _ in range(10_000):
        _, msg2 = rsa.ea_respond(toy4, cfg, rng, msg1)
        assert 16 <= msg2.x_prime < 32 and 16 <= msg2.y_prime < 32
        counts[msg2.x_prime - 16] += 1
    stat = sum((c - 625) ** 2 / 625 for c in counts)
    assert stat < chi2.ppf(0.999, 15)


def test_ea_rejects_non_member(toy4):
    cfg = toy4_config()
    with pytest.raises(ProtocolRejection) as exc:
        rsa.ea_respond(toy4, cfg, seeded(1), rsa.RsaMsg1(0, toy4.g, 3))
    assert exc.value.code == "bad_commitment"


def test_device_start_openings(k16):
    cfg = rsa.RsaConfig(k=16, e=3)
    state, msg1 = rsa.device_start(k16, cfg, seeded(2))
    assert verify_opening(k16, msg1.c_x, state.x, state.r_x)
    assert verify_opening(k16, msg1.c_y, state.y, state.r_y)
    assert (1 << 16) <= state.x < (1 << 17)
    a = rsa.device_start(k16, cfg, const_rng(0))[1]
    b = rsa.device_start(k16, cfg, const_rng(0))[1]
    assert a == b


def test_config_checks(k16):
    with pytest.raises(ValueError):
        rsa.RsaConfig(k=16, e=4)
    with pytest.raises(ValueError):
        rsa.RsaConfig(k=16, e=9)
    with pytest.raises(ValueError):
        rsa.RsaConfig(k=128).check_params(k16)
    assert rsa.RsaConfig(k=16, e=3).delta == 1415


# --- honest runs -----------------------------------------------------------


def _check_key(k, e, key):
    assert key.n == key.p * key.q and key.p != key.q
    assert is_probable_prime(key.p) and is_probable_prime(key.q)
    assert (1 << (2 * k + 2)) <= key.n < (1 << (2 * k + 4))
    assert math.gcd(key.p - 1, e) == 1 and math.gcd(key.q - 1, e) == 1
    assert key.e * key.d % math.lcm(key.p - 1, key.q - 1) == 1


@pytest.mark.parametrize("k,e", [(16, 3), (16, 65537), (128, 65537)])
def test_honest_runs(k, e, k16, k128, identity, trust):
    params = {16: k16, 128: k128}[k]
    cfg = rsa.RsaConfig(k=k, e=e)
    for _ in range(5):
        run = rsa.run_local(params, cfg, identity)
        _check_key(k, e, run.key)
        assert verify_attested_key(trust, run.bundle)
        assert int(run.bundle.public_key["n"], 16) == run.key.n


def test_device_complete_rejects_bad_signatures(k16, identity):
    cfg = rsa.RsaConfig(k=16, e=3)
    rng = seeded(4)
    for mutate in (
        lambda m: AttestationMsg(m.sig[:-1], m.timestamp, m.ea_id),
        lambda m: AttestationMsg(m.sig, m.timestamp + 1, m.ea_id),
        lambda m: AttestationMsg(bytes(64), m.timestamp, m.ea_id),
    ):
        while True:
            state, msg1 = rsa.device_start(k16, cfg, rng)
            ea, msg2 = rsa.ea_respond(k16, cfg, rng, msg1)
            try:
                msg3, _ = rsa.device_finalize(state, msg2)
                break
            except Restart:
                continue
        msg4 = rsa.ea_verify_and_sign(ea, msg3, identity)
        with pytest.raises(DeviceAbort, match="ea signature invalid"):
            rsa.device_complete(state, mutate(msg4), identity.verification_key)


def test_signature_over_other_modulus_aborts(k16, identity):
    cfg = rsa.RsaConfig(k=16, e=3)
    a = rsa.run_local(k16, cfg, identity)
    b = rsa.run_local(k16, cfg, identity)
    forged = AttestationMsg(a.bundle.sig, a.bundle.timestamp, a.bundle.ea_id)
    b.state.phase = "responded"
    with pytest.raises(DeviceAbort):
        rsa.device_complete(b.state, forged, identity.verification_key)


def test_oracle_agreement_random_sums(k16):
    rnd = random.Random(77)
    cfg = rsa.RsaConfig(k=16, e=3)
    for _ in range(50):
        total = (1 << 17) + rnd.getrandbits(17)
        d = rsa.find_delta(total, cfg.delta, 3)
        assert total + d == rsa.prime_gen(16, 0, 3, x=total)
