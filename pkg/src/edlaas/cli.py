"""Command line for the data source (client) and the data processor (serve).

Every option can also be set through an environment variable; the shared
ones are EDLAAS_SERVER, EDLAAS_TOKEN and EDLAAS_KEYSTORE, the rest follow
EDLAAS_<COMMAND>_<OPTION>.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import httpx
import numpy as np

from .ckks.params import HEParams
from .errors import ApiError, EdlaasError

DEFAULT_KEYSTORE = str(Path.home() / ".edlaas" / "keys")

server_opt = click.option("--server", envvar="EDLAAS_SERVER", default="http://127.0.0.1:8000",
                          show_default=True, help="Service base URL.")
token_opt = click.option("--token", envvar="EDLAAS_TOKEN", default=None, help="Bearer token.")
keystore_opt = click.option("--keystore", envvar="EDLAAS_KEYSTORE", default=DEFAULT_KEYSTORE,
                            show_default=True, type=click.Path(file_okay=False),
                            help="Directory holding per-dataset key bundles.")
timeout_opt = click.option("--timeout", default=120.0, show_default=True, help="HTTP timeout in seconds.")
retries_opt = click.option("--retries", default=2, show_default=True, help="Retries on connection errors.")


def _params(n: int, levels: int) -> HEParams:
    return HEParams.desk(n, levels)


def _client(server, token, timeout, retries):
    from .client.api import ServerClient
    return ServerClient(server, token, timeout=timeout, retries=retries)


def _load_windows(path):
    from .client.wrangle import Windows
    with np.load(path, allow_pickle=False) as z:
        targets = z["targets"] if "targets" in z.files else None
        return Windows(z["features"], targets, [str(s) for s in z["feature_names"]])


def _emit(obj):
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


@click.group(context_settings={"auto_envvar_prefix": "EDLAAS", "help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="More logging.")
def cli(verbose):
    """Encrypted deep learning as a service."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")


@cli.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--rows", default=200, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--spec-out", type=click.Path(dir_okay=False), help="Also write a matching wrangle spec.")
@click.option("--window", default=3, show_default=True)
def synth(seed, rows, out, spec_out, window):
    """Write a synthetic yield-like CSV."""
    from .client.synth import synth_spec, write_synth
    write_synth(out, seed, rows)
    if spec_out:
        synth_spec(window).save(spec_out)
    click.echo(out)


@cli.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output .npz of windows.")
@click.option("--stride", default=1, show_default=True)
@click.option("--clamp/--no-clamp", default=None, help="Override the spec's out-of-range policy.")
def wrangle(csv_path, spec_path, out, stride, clamp):
    """Normalize, one-hot encode and window a CSV."""
    from dataclasses import replace

    from .client.wrangle import WrangleSpec, wrangle as run
    spec = WrangleSpec.load(spec_path)
    if clamp is not None:
        spec = replace(spec, clamp=clamp)
    w = run(csv_path, spec, stride=stride)
    arrays = {"features": w.features, "feature_names": np.array(w.feature_names)}
    if w.targets is not None:
        arrays["targets"] = w.targets
    with open(out, "wb") as fh:
        np.savez(fh, **arrays)
    _emit({"windows": len(w), "window_length": int(w.features.shape[1]), "n_features": w.n_features,
           "out": out})


@cli.command()
@click.argument("name")
@keystore_opt
@click.option("--n", "poly_degree", default=8192, show_default=True, help="Polynomial modulus degree.")
@click.option("--levels", default=5, show_default=True, help="Multiplicative levels.")
@click.option("--force", is_flag=True, help="Replace existing keys.")
def keygen(name, keystore, poly_degree, levels, force):
    """Create a key bundle for a dataset in the local keystore."""
    from .client.keystore import KeyStore
    ks = KeyStore(keystore)
    if ks.exists(name) and not force:
        raise click.ClickException(f"keys for {name!r} already exist (use --force to replace)")
    params = _params(poly_degree, levels)
    ks.create(name, params)
    _emit({"dataset": name, "param_id": params.param_id, "path": str(ks.path(name))})


@cli.command()
@click.argument("windows_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", required=True, help="Dataset name (keystore index).")
@click.option("--owner", required=True)
@keystore_opt
@click.option("--n", "poly_degree", default=8192, show_default=True)
@click.option("--levels", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def encrypt(windows_path, name, owner, keystore, poly_degree, levels, out):
    """Encrypt wrangled windows into a record (no secret key inside)."""
    from .client.keystore import KeyStore
    from .client.pipeline import encrypt_dataset
    from .wire import serialize_record
    ks = KeyStore(keystore)
    params = ks.load(name)[0] if ks.exists(name) else _params(poly_degree, levels)
    record = encrypt_dataset(_load_windows(windows_path), name, owner, params, ks)
    Path(out).write_bytes(serialize_record(record, "transmission"))
    _emit({"dataset": name, "ciphertexts": len(record.ciphertexts), "out": out})


@cli.command()
@click.argument("record_path", type=click.Path(exists=True, dir_okay=False))
@server_opt
@token_opt
@timeout_opt
@retries_opt
def submit(record_path, server, token, timeout, retries):
    """Upload an encrypted record; prints the dataset id."""
    client = _client(server, token, timeout, retries)
    try:
        dataset_id = client.submit_bytes(Path(record_path).read_bytes())
    finally:
        client.close()
    _emit({"dataset_id": dataset_id})


@cli.command()
@click.argument("dataset_id")
@click.option("--model", "model_id", required=True)
@server_opt
@token_opt
@timeout_opt
@retries_opt
def infer(dataset_id, model_id, server, token, timeout, retries):
    """Start encrypted inference; prints the job id."""
    client = _client(server, token, timeout, retries)
    try:
        job_id = client.infer(dataset_id, model_id)
    finally:
        client.close()
    _emit({"job_id": job_id})


@cli.command()
@click.argument("job_id")
@click.option("--out", type=click.Path(dir_okay=False), help="Where to write the result record.")
@click.option("--wait", is_flag=True, help="Poll until the job finishes.")
@server_opt
@token_opt
@timeout_opt
@retries_opt
def fetch(job_id, out, wait, server, token, timeout, retries):
    """Show job status; with a finished job, save the encrypted result."""
    import base64
    client = _client(server, token, timeout, retries)
    try:
        info, _ = client.wait(job_id, timeout=timeout) if wait else client.fetch(job_id)
    finally:
        client.close()
    blob = info.pop("result", None)
    if blob and out:
        Path(out).write_bytes(base64.b64decode(blob))
        info["out"] = out
    info["has_result"] = bool(blob)
    _emit(info)


@cli.command()
@click.argument("result_path", type=click.Path(exists=True, dir_okay=False))
@keystore_opt
@click.option("--key-name", help="Keystore entry to use (default: the record's dataset name).")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the predictions report here.")
def decrypt(result_path, keystore, key_name, out):
    """Decrypt a result record into per-window predictions."""
    from .client.keystore import KeyStore
    from .client.pipeline import decrypt_result
    from .wire import deserialize_record
    result = deserialize_record(Path(result_path).read_bytes(), "transmission")
    report = decrypt_result(result, KeyStore(keystore), key_name)
    if out:
        Path(out).write_text(json.dumps(report, indent=2, sort_keys=True))
    _emit(report)


@cli.command()
@click.argument("windows_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model JSON file.")
@click.option("--model-id", default="reference", show_default=True)
@click.option("--epochs", default=50, show_default=True)
@click.option("--lr", "learning_rate", default=0.5, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train(windows_path, out, model_id, epochs, learning_rate, batch_size, seed):
    """Train the reference architecture on plaintext windows."""
    from .nn.graph import init_graph, train as fit
    from .nn.model_io import save_model
    w = _load_windows(windows_path)
    if w.targets is None:
        raise click.ClickException("windows file has no targets")
    graph = init_graph(w.features.shape[1], w.n_features, seed)
    graph, losses = fit(graph, w.features, w.targets, epochs, learning_rate, batch_size=batch_size, seed=seed)
    save_model(graph, out, model_id, meta={"epochs": epochs, "final_mse": losses[-1]})
    _emit({"model_id": model_id, "mse_start": losses[0], "mse_end": losses[-1], "out": out})


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--store", "store_path", default="edlaas-store.sqlite", show_default=True,
              type=click.Path(dir_okay=False))
@click.option("--models", "model_dir", required=True, type=click.Path())
@token_opt
@click.option("--max-body", default=256 * 1024 * 1024, show_default=True, help="Largest accepted upload.")
@click.option("--workers", default=1, show_default=True, help="Inference worker threads.")
def serve(host, port, store_path, model_dir, token, max_body, workers):
    """Run the data-processor service."""
    import uvicorn

    from .service import ModelRegistry, Store, create_app
    if not token:
        raise click.ClickException("a bearer token is required (--token or EDLAAS_TOKEN)")
    logging.getLogger("edlaas.service").setLevel(logging.INFO)
    registry = ModelRegistry.load(model_dir)
    app = create_app(Store(store_path), registry, token, max_body=max_body, workers=workers)
    uvicorn.run(app, host=host, port=port, log_level="info")


@cli.command()
@click.option("--n", "poly_degree", default=8192, show_default=True)
@click.option("--levels", default=5, show_default=True)
@click.option("--trials", default=30, show_default=True)
@click.option("--server", default=None, help="Measure remote rows against this service instead of loopback.")
@token_opt
@click.option("--no-remote", is_flag=True, help="Skip the remote rows.")
@click.option("--sizes", "size_degrees", default="8192,16384", show_default=True,
              help="Comma-separated degrees for the size table.")
@click.option("--json-out", default="bench.json", show_default=True, type=click.Path(dir_okay=False))
@click.option("--text-out", default="bench.txt", show_default=True, type=click.Path(dir_okay=False))
def bench(poly_degree, levels, trials, server, token, no_remote, size_degrees, json_out, text_out):
    """Time operations and measure sizes; writes JSON and text reports."""
    from .bench import run_all
    sizes = [_params(int(d), levels) for d in size_degrees.split(",") if d.strip()]
    report = run_all(_params(poly_degree, levels), sizes_params=sizes, server_url=server, token=token,
                     trials=trials, remote=not no_remote)
    report.write(json_out, text_out)
    click.echo(report.to_text(), nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="edlaas", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ApiError as exc:
        click.echo(f"error: server returned {exc.status}: {exc.body}", err=True)
        return 2
    except httpx.TransportError as exc:
        click.echo(f"error: cannot reach server: {exc}", err=True)
        return 3
    except EdlaasError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
