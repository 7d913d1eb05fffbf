"""Key material and bundle files."""

from __future__ import annotations

import json
import os

from .attestation import AttestedKey, armor, dearmor, decode_bundle, encode_bundle


def write_private(path, doc: dict) -> None:
    """Write private key JSON readable by the owner only."""
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.chmod(path, 0o600)


def write_bundle(path, bundle: AttestedKey) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(armor(encode_bundle(bundle)))


def read_bundle(path) -> AttestedKey:
    with open(path, "r", encoding="utf-8") as fh:
        return decode_bundle(dearmor(fh.read()))


def output_paths(prefix) -> tuple:
    prefix = str(prefix)
    return prefix + ".key.json", prefix + ".bundle"


def save_outputs(prefix, private_doc: dict, bundle: AttestedKey) -> tuple:
    """Private key first, then the bundle; only call once the EA signature has been checked."""
    key_path, bundle_path = output_paths(prefix)
    write_private(key_path, private_doc)
    write_bundle(bundle_path, bundle)
    return key_path, bundle_path
