import json

import numpy as np
import pytest
from click.testing import CliRunner

from edlaas.cli import cli, main
from edlaas.wire import SECRET_MARKER


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("EDLAAS_KEYSTORE", str(tmp_path / "ks"))
    runner = CliRunner()

    def invoke(*args):
        res = runner.invoke(cli, list(args), catch_exceptions=False)
        assert res.exit_code == 0, res.output
        return res.output

    return invoke


def test_help_lists_commands():
    out = CliRunner().invoke(cli, ["--help"]).output
    for cmd in ("synth", "wrangle", "keygen", "encrypt", "submit", "infer", "fetch", "decrypt", "bench",
                "serve", "train"):
        assert cmd in out


def test_local_flow(run, tmp_path):
    run("synth", "--rows", "40", "--out", "d.csv", "--spec-out", "s.json")
    info = json.loads(run("wrangle", "d.csv", "--spec", "s.json", "--out", "w.npz"))
    assert info == {"windows": 38, "window_length": 3, "n_features": 5, "out": "w.npz"}
    trained = json.loads(run("train", "w.npz", "--out", "m.json", "--epochs", "5"))
    assert trained["mse_end"] < trained["mse_start"]
    run("keygen", "herd", "--n", "1024")
    out = json.loads(run("encrypt", "w.npz", "--name", "herd", "--owner", "alice", "--out", "r.edls"))
    assert out["ciphertexts"] == 38 * 3
    assert SECRET_MARKER not in (tmp_path / "r.edls").read_bytes()
    assert SECRET_MARKER in (tmp_path / "ks" / "herd" / "keys.edls").read_bytes()


def test_keygen_refuses_overwrite(run, tmp_path):
    run("keygen", "herd", "--n", "256", "--levels", "2")
    res = CliRunner().invoke(cli, ["keygen", "herd", "--n", "256", "--levels", "2"])
    assert res.exit_code != 0 and "already exist" in res.output
    run("keygen", "herd", "--n", "256", "--levels", "2", "--force")


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("EDLAAS_SYNTH_ROWS", "7")
    res = CliRunner().invoke(cli, ["synth", "--out", "d.csv"])
    assert res.exit_code == 0
    assert len((tmp_path / "d.csv").read_text().strip().splitlines()) == 8


def test_decrypt_missing_keys(tmp_path, monkeypatch, capsys):
    from datetime import datetime, timezone

    from edlaas.ckks import HEParams, encrypt_values, keygen
    from edlaas.wire import EncryptedRecord, serialize_ciphertext, serialize_record

    p = HEParams.insecure_test(256, 2)
    keys = keygen(p, np.random.default_rng(0))
    rec = EncryptedRecord("lost", "o", datetime.now(timezone.utc), p,
                          [serialize_ciphertext(encrypt_values(0.1, keys, p, np.random.default_rng(1)))])
    path = tmp_path / "res.edls"
    path.write_bytes(serialize_record(rec))
    code = main(["decrypt", str(path), "--keystore", str(tmp_path / "empty")])
    assert code == 1
    assert "cannot decrypt" in capsys.readouterr().err


def test_http_error_surfaced(capsys):
    code = main(["infer", "abc", "--model", "m", "--server", "http://127.0.0.1:9", "--retries", "0",
                 "--timeout", "1"])
    assert code == 3
    assert "cannot reach server" in capsys.readouterr().err


def test_serve_needs_token(tmp_path, monkeypatch):
    monkeypatch.delenv("EDLAAS_TOKEN", raising=False)
    res = CliRunner().invoke(cli, ["serve", "--models", str(tmp_path)])
    assert res.exit_code != 0 and "token" in res.output
