"""Key generation with an entropy authority.

A device and an entropy authority (EA) jointly produce an RSA modulus or a
discrete-log key. The device keeps the secret, the EA contributes randomness
and signs the public key once a zero-knowledge proof shows its contribution
was used.
"""

from .attestation import AttestedKey, EaIdentity, TrustStore, ea_keygen, verify_attested_key
from .errors import DeviceAbort, ProtocolRejection, Restart
from .group import GroupParams, generate_group_params, generate_rsa_params, load_params

__version__ = "0.1.0"

__all__ = [
    "AttestedKey",
    "DeviceAbort",
    "EaIdentity",
    "GroupParams",
    "ProtocolRejection",
    "Restart",
    "TrustStore",
    "ea_keygen",
    "generate_group_params",
    "generate_rsa_params",
    "load_params",
    "verify_attested_key",
]
