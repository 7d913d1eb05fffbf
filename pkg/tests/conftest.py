import pytest

from eakg.attestation import TrustStore, ea_keygen
from eakg.group import GroupParams, generate_rsa_params

# The classic textbook group: P = 47, Q = 23, g = 4, h = 16.
TOY = GroupParams(p=47, q=23, g=4, h=16)


@pytest.fixture
def toy():
    return TOY


@pytest.fixture(scope="session")
def k16():
    return generate_rsa_params(16, b"eakg-tests-k16")


@pytest.fixture(scope="session")
def k128():
    return generate_rsa_params(128, b"eakg-tests-k128")


@pytest.fixture(scope="session")
def identity():
    return ea_keygen()


@pytest.fixture
def trust(identity):
    store = TrustStore()
    store.add(identity.verification_key)
    return store


def const_rng(byte=0):
    return lambda n: bytes([byte]) * n
