"""Command line entry point (``eakg``).

Exit codes: 0 success, 1 protocol abort or transport failure, 2 usage error,
3 bundle verification failure.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import os
import socket
import statistics
import sys
import threading
import time
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from . import rsa
from .attestation import MalformedBundle, TrustStore, ea_keygen, verify_attested_key
from .client import EaClient, EaError, TransportError, keygen_dsa, keygen_rsa
from .errors import DeviceAbort, ProtocolRejection, Restart
from .group import GroupParams, InsecureParameters, default_rng, generate_rsa_params, load_params
from .keyfile import read_bundle, save_outputs

EXIT_ABORT = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3

ZERO_LEAK_MAX_RESTARTS = 10_000
DEFAULT_MAX_RESTARTS = 64

log = logging.getLogger("eakg.cli")


def _fail(code: int, message: str):
    click.echo("error: " + message, err=True)
    sys.exit(code)


def _protocol_errors(fn):
    """Map protocol and transport failures onto exit code 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TransportError as exc:
            _fail(EXIT_ABORT, str(exc))
        except EaError as exc:
            _fail(EXIT_ABORT, "EA rejected: {} ({})".format(exc.code, exc.message))
        except (DeviceAbort, Restart) as exc:
            _fail(EXIT_ABORT, "device abort: {}".format(exc.reason))
        except ProtocolRejection as exc:
            _fail(EXIT_ABORT, "rejected: {}".format(exc.code))
        except InsecureParameters as exc:
            _fail(EXIT_USAGE, str(exc))

    return wrapper


# --- params pinning ---------------------------------------------------------


def state_dir() -> Path:
    return Path(os.environ.get("EAKG_HOME") or Path.home() / ".eakg")


def _pin_file() -> Path:
    return state_dir() / "params_pins.json"


def pinned_params(client: EaClient, k: int) -> GroupParams:
    """Fetch the EA's params for ``k``; the first hash seen for (EA, k) is pinned."""
    path = _pin_file()
    pins = json.loads(path.read_text()) if path.exists() else {}
    slot = "{} k={}".format(client.base_url, k)
    params_hash = client.find_params(k)
    if slot in pins and pins[slot] != params_hash:
        raise DeviceAbort("EA params changed since first use (pinned {})".format(pins[slot][:16]))
    params = client.fetch_params(params_hash)
    if slot not in pins:
        pins[slot] = params_hash
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(pins, indent=2, sort_keys=True) + "\n")
    return params


def default_params(k: int) -> GroupParams:
    """Shipped params for k=1024, otherwise derived from a fixed seed."""
    if k == 1024:
        text = resources.files("eakg").joinpath("data/params_k1024.json").read_text(encoding="utf-8")
        return GroupParams.from_json(text)
    return generate_rsa_params(k, "eakg-default-k{}".format(k).encode())


def _trust(path: Optional[str]) -> Optional[TrustStore]:
    return TrustStore.load(path) if path else None


# --- commands ---------------------------------------------------------------


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log protocol progress to stderr.")
def main(verbose: bool):
    """Key generation with an entropy authority."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(name)s: %(message)s")


@main.command("keygen-rsa")
@click.option("--ea", "ea_url", required=True, help="Base URL of the entropy authority.")
@click.option("--k", "k", type=int, required=True, help="Half-width of each prime in bits.")
@click.option("--e", "e", type=int, default=rsa.DEFAULT_E, show_default=True)
@click.option("--zero-leak", is_flag=True, help="Force delta=0 and restart until both sums are prime.")
@click.option("--max-restarts", type=int, default=None, help="Default 64, or 10000 with --zero-leak.")
@click.option("--out", "out", required=True, help="Output prefix; writes PREFIX.key.json and PREFIX.bundle.")
@click.option("--insecure-test", is_flag=True, help="Allow toy-sized groups.")
@click.option("--trust-store", default=None, help="Require the EA to be listed here.")
@_protocol_errors
def keygen_rsa_cmd(ea_url, k, e, zero_leak, max_restarts, out, insecure_test, trust_store):
    """Generate an attested RSA key with one EA."""
    if max_restarts is None:
        max_restarts = ZERO_LEAK_MAX_RESTARTS if zero_leak else DEFAULT_MAX_RESTARTS
    try:
        config = rsa.RsaConfig(k=k, e=e, zero_leak=zero_leak, insecure=insecure_test)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    client = EaClient(ea_url)
    params = pinned_params(client, k)
    try:
        config.check_params(params)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    run = keygen_rsa(client, params, config, default_rng, max_restarts, _trust(trust_store))
    key_path, bundle_path = save_outputs(out, run.key.to_json_dict(), run.bundle)
    click.echo("n bits: {}  restarts: {}".format(run.key.n.bit_length(), run.restarts))
    click.echo("wrote {} and {}".format(key_path, bundle_path))


@main.command("keygen-dsa")
@click.option("--ea", "ea_urls", multiple=True, required=True, help="EA base URL; repeat for several EAs.")
@click.option("--params", "params_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, help="Output prefix; writes PREFIX.key.json and PREFIX.bundle.")
@click.option("--insecure-test", is_flag=True, help="Allow toy-sized groups.")
@click.option("--trust-store", default=None, help="Require every EA to be listed here.")
@_protocol_errors
def keygen_dsa_cmd(ea_urls, params_path, out, insecure_test, trust_store):
    """Generate an attested discrete-log key with one or more EAs."""
    normalized = [u.rstrip("/") for u in ea_urls]
    if len(set(normalized)) != len(normalized):
        raise click.UsageError("duplicate --ea URL")
    params = load_params(params_path)
    params.require_secure(insecure_test)
    clients = [EaClient(u) for u in normalized]
    bundle, key = keygen_dsa(clients, params, default_rng, _trust(trust_store), insecure=insecure_test)
    key_path, bundle_path = save_outputs(out, key.to_json_dict(params), bundle)
    click.echo("signatures: {}".format(1 + len(bundle.cosignatures)))
    click.echo("wrote {} and {}".format(key_path, bundle_path))


@main.command("verify")
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--trust-store", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--min-timestamp", type=int, default=None, help="Reject bundles signed before this UNIX time.")
def verify_cmd(bundle_path, trust_store, min_timestamp):
    """Check every EA signature on a bundle."""
    try:
        bundle = read_bundle(bundle_path)
    except (MalformedBundle, ValueError):
        _fail(EXIT_VERIFY, "verification failed: malformed")
    verdict = verify_attested_key(TrustStore.load(trust_store), bundle)
    if not verdict:
        _fail(EXIT_VERIFY, "verification failed: {}".format(verdict.reason))
    if min_timestamp is not None and verdict.timestamp < min_timestamp:
        _fail(EXIT_VERIFY, "verification failed: stale_timestamp")
    click.echo("ok {} signed {}".format(bundle.scheme, verdict.timestamp))


@main.group("params")
def params_group():
    """Create or inspect group parameter files."""


@params_group.command("gen")
@click.option("--k", "k", type=int, required=True)
@click.option("--seed", "seed_hex", required=True, help="Seed as hex.")
@click.option("--out", "out", required=True)
@click.option("--insecure-test", is_flag=True, help="Allow groups below the security floor.")
def params_gen(k, seed_hex, out, insecure_test):
    try:
        seed = bytes.fromhex(seed_hex)
    except ValueError:
        raise click.UsageError("--seed must be hex")
    if k < 4:
        raise click.UsageError("--k must be at least 4")
    try:
        params = generate_rsa_params(k, seed, insecure=insecure_test)
    except InsecureParameters as exc:
        raise click.UsageError(str(exc))
    Path(out).write_text(params.to_json())
    click.echo(params.params_hash.hex())


@params_group.command("show")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def params_show(path):
    try:
        params = load_params(path)
    except (ValueError, KeyError) as exc:
        raise click.UsageError("invalid params file: {}".format(exc))
    click.echo("params_hash: {}".format(params.params_hash.hex()))
    click.echo("k: {}".format(params.k))
    click.echo("p bits: {}".format(params.p.bit_length()))
    click.echo("q bits: {}".format(params.q.bit_length()))


@main.command("ea-keygen")
@click.option("--out", "out", required=True, help="Signing key file (written 0600).")
@click.option("--trust-store", default=None, help="Also add the verification key to this trust store.")
def ea_keygen_cmd(out, trust_store):
    """Create an EA signing identity."""
    from .service import save_identity

    identity = ea_keygen()
    save_identity(identity, out)
    if trust_store:
        store = TrustStore.load(trust_store) if os.path.exists(trust_store) else TrustStore()
        store.add(identity.verification_key)
        store.save(trust_store)
    click.echo(identity.ea_id)


@main.command("serve")
@click.option("--config", "config_path", default=None, help="Config JSON; defaults to $EAKG_CONFIG.")
def serve_cmd(config_path):
    """Run the entropy authority HTTP service."""
    import uvicorn

    from .service import EaConfig, create_app

    config_path = config_path or os.environ.get("EAKG_CONFIG")
    if not config_path:
        raise click.UsageError("pass --config or set EAKG_CONFIG")
    try:
        cfg = EaConfig.from_file(config_path)
        params = cfg.load_params()
        identity = cfg.load_identity()
    except (OSError, ValueError, KeyError, InsecureParameters) as exc:
        raise click.UsageError("bad config: {}".format(exc))
    peers = TrustStore.load(cfg.peer_trust_store) if cfg.peer_trust_store else None
    app = create_app(
        identity, params, session_ttl=cfg.session_ttl, max_sessions=cfg.max_sessions,
        insecure=cfg.insecure_test, peers=peers,
    )
    host, port = cfg.host_port
    uvicorn.run(app, host=host, port=port, log_level="warning")


# --- bench ------------------------------------------------------------------


def local_keygen(k: int, e: int, rng=default_rng) -> int:
    """RSA modulus of the same shape as the protocol's, with no EA involved."""
    window = rsa.delta_bound(k, e)
    primes = []
    while len(primes) < 2:
        start = (1 << (k + 1)) + int.from_bytes(rng((k + 8) // 8), "big") % (1 << (k + 1))
        d = rsa.find_delta(start, window, e, exclude=primes[0] if primes else None)
        if d is not None:
            primes.append(start + d)
    return primes[0] * primes[1]


class LocalServer:
    """uvicorn in a background thread on a free loopback port."""

    def __init__(self, app):
        import uvicorn

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            self.port = s.getsockname()[1]
        self.url = "http://127.0.0.1:{}".format(self.port)
        config = uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 20
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("local EA did not start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


def bench_rows(k: int, trials: int, ea_url: Optional[str], e: int = rsa.DEFAULT_E) -> dict:
    """Mean seconds per keypair for each setting, plus the slowdown ratio."""
    from .service import create_app

    identity = ea_keygen()
    params = default_params(k)
    config = rsa.RsaConfig(k=k, e=e)

    def timed(fn):
        samples = []
        for _ in range(trials):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
        return statistics.fmean(samples)

    # Untimed pass so JIT compilation and sieve tables are not billed to the first column.
    local_keygen(k, e)
    rsa.run_local(params, config, identity)
    no_proto = timed(lambda: local_keygen(k, e))
    proto = timed(lambda: rsa.run_local(params, config, identity))

    def over_network(url):
        client = EaClient(url)
        net_params = client.fetch_params(client.find_params(k))
        return timed(lambda: keygen_rsa(client, net_params, config))

    if ea_url:
        proto_net = over_network(ea_url)
    else:
        with LocalServer(create_app(identity, [params])) as srv:
            proto_net = over_network(srv.url)
    return {
        "k": k,
        "trials": trials,
        "no_proto": no_proto,
        "proto": proto,
        "proto_net": proto_net,
        "slowdown": proto_net / no_proto,
    }


BENCH_COLUMNS = ["k", "trials", "no_proto", "proto", "proto_net", "slowdown"]


@main.command("bench")
@click.option("--k", "ks", type=int, multiple=True, default=(512, 1024), show_default=True)
@click.option("--ea", "ea_url", default=None, help="Remote EA; a loopback EA is started when omitted.")
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--e", "e", type=int, default=rsa.DEFAULT_E, show_default=True)
@_protocol_errors
def bench_cmd(ks, ea_url, trials, e):
    """Time key generation with and without the protocol; CSV on stdout."""
    if trials < 1:
        raise click.UsageError("--trials must be positive")
    writer = csv.DictWriter(sys.stdout, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for k in ks:
        row = bench_rows(k, trials, ea_url, e)
        writer.writerow({c: ("{:.9g}".format(v) if isinstance(v, float) else v) for c, v in row.items()})
        sys.stdout.flush()


if __name__ == "__main__":
    main()
