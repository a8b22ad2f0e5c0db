import numpy as np
import pytest

from edlaas.client import (
    KeyStore,
    WrangleSpec,
    decrypt_record_slots,
    decrypt_result,
    encrypt_dataset,
    sliding_windows,
    synth_data,
    synth_spec,
    wrangle,
    write_synth,
)
from edlaas.client.pipeline import check_sentinel, monotonic_utcnow
from edlaas.client.synth import synth_rows
from edlaas.errors import DecryptionCheckError, MissingKeyError, WrangleError
from edlaas.nn import SENTINEL_VALUE
from edlaas.wire import contains_secret, serialize_record


def _csv(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestWrangle:
    def test_normalize_and_one_hot(self, tmp_path):
        p = _csv(tmp_path, "a,c\n15,B\n10,A\n20,C\n")
        spec = WrangleSpec({"a": (10, 20)}, {"c": ["A", "B", "C"]}, window_length=1)
        w = wrangle(p, spec)
        assert w.features[:, 0].tolist() == [[0.5, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 1]]
        assert w.feature_names == ["a", "c=A", "c=B", "c=C"]

    def test_sliding_windows_oracle(self, tmp_path):
        rows = np.arange(5, dtype=float).reshape(5, 1)
        out = sliding_windows(rows, 3)
        assert out[:, :, 0].tolist() == [[0, 1, 2], [1, 2, 3], [2, 3, 4]]
        assert sliding_windows(rows, 6).shape[0] == 0
        assert sliding_windows(rows, 2, stride=2).shape[0] == 2

    def test_target_is_last_row(self, tmp_path):
        p = _csv(tmp_path, "x,y\n1,0\n2,10\n3,20\n4,30\n5,40\n")
        spec = WrangleSpec({"x": (0, 10), "y": (0, 40)}, {}, window_length=3, target_column="y")
        w = wrangle(p, spec)
        assert w.feature_names == ["x"]
        assert w.targets.tolist() == [0.5, 0.75, 1.0]

    def test_padding_and_sentinel(self, tmp_path):
        p = _csv(tmp_path, "a\n1\n2\n")
        spec = WrangleSpec({"a": (0, 2)}, {}, window_length=2)
        _, padded = wrangle(p, spec, slot_count=8)
        assert padded.shape == (1, 2, 8)
        assert padded[0, :, 0].tolist() == [0.5, 1.0]
        assert np.all(padded[..., 1:-1] == 0)
        assert np.all(padded[..., -1] == SENTINEL_VALUE)

    @pytest.mark.parametrize("text,match", [
        ("a\nfoo\n", "not numeric"),
        ("b\n1\n", "unknown column"),
        ("a\n50\n", "outside"),
    ])
    def test_errors(self, tmp_path, text, match):
        spec = WrangleSpec({"a": (0, 10)}, {}, window_length=1)
        with pytest.raises(WrangleError, match=match):
            wrangle(_csv(tmp_path, text), spec)

    def test_unknown_category(self, tmp_path):
        spec = WrangleSpec({}, {"c": ["A"]}, window_length=1)
        with pytest.raises(WrangleError):
            wrangle(_csv(tmp_path, "c\nZ\n"), spec)

    def test_clamp(self, tmp_path):
        spec = WrangleSpec({"a": (0, 10)}, {}, window_length=1, clamp=True)
        assert wrangle(_csv(tmp_path, "a\n50\n-3\n"), spec).features[:, 0, 0].tolist() == [1.0, 0.0]

    def test_spec_validation_and_io(self, tmp_path):
        with pytest.raises(ValueError):
            WrangleSpec({"a": (1, 1)}, {}, window_length=1)
        with pytest.raises(ValueError):
            WrangleSpec({"a": (0, 1)}, {}, window_length=0)
        spec = synth_spec()
        spec.save(tmp_path / "s.json")
        assert WrangleSpec.load(tmp_path / "s.json") == spec

    def test_deterministic(self, tmp_path):
        p = write_synth(tmp_path / "d.csv", 3, 50)
        a, b = wrangle(p, synth_spec()), wrangle(p, synth_spec())
        assert np.array_equal(a.features, b.features) and np.array_equal(a.targets, b.targets)
        f = a.features
        assert f.min() >= 0 and f.max() <= 1
        assert np.allclose(f[..., 2:5].sum(axis=-1), 1.0)


class TestSynth:
    def test_deterministic_and_sized(self):
        assert synth_data(5, 40) == synth_data(5, 40)
        assert synth_data(5, 40) != synth_data(6, 40)
        assert len(synth_data(5, 40).strip().splitlines()) == 41

    def test_target_correlates(self):
        rows = synth_rows(0, 500)
        feed = np.array([r["feed_kg"] for r in rows])
        milk = np.array([r["milk_yield"] for r in rows])
        assert abs(np.corrcoef(feed, milk)[0, 1]) > 0.3

    def test_within_spec_bounds(self, tmp_path):
        p = write_synth(tmp_path / "d.csv", 1, 2000)
        wrangle(p, synth_spec())  # raises if any value is out of bounds


class TestKeyStore:
    def test_create_load(self, tmp_path, tiny_params):
        ks = KeyStore(tmp_path / "ks")
        keys = ks.create("herd", tiny_params, np.random.default_rng(0))
        params, back = ks.load("herd")
        assert params == tiny_params
        assert np.array_equal(back.secret_key.data, keys.secret_key.data)
        assert ks.names() == ["herd"]
        assert (ks.path("herd").stat().st_mode & 0o777) == 0o600
        assert ks.get_or_create("herd", tiny_params).param_id == keys.param_id

    def test_missing(self, tmp_path):
        with pytest.raises(MissingKeyError, match="cannot decrypt.*herd"):
            KeyStore(tmp_path).load("herd")

    def test_unsafe_name(self, tmp_path):
        with pytest.raises(ValueError):
            KeyStore(tmp_path).path("../etc")

    def test_other_params_refused(self, tmp_path, tiny_params, small_params):
        ks = KeyStore(tmp_path)
        ks.create("herd", tiny_params)
        with pytest.raises(ValueError):
            ks.get_or_create("herd", small_params)


class TestPipeline:
    @pytest.fixture
    def windows(self, tmp_path):
        return wrangle(write_synth(tmp_path / "d.csv", 0, 8), synth_spec())

    def test_encrypt_roundtrip(self, tmp_path, windows, tiny_params):
        ks = KeyStore(tmp_path / "ks")
        rec = encrypt_dataset(windows, "herd", "alice", tiny_params, ks, np.random.default_rng(0))
        assert len(rec.ciphertexts) == len(windows) * 3
        assert rec.secret_key is None
        assert not contains_secret(serialize_record(rec))
        _, keys = ks.load("herd")
        slots = decrypt_record_slots(rec, keys)
        want = windows.padded(tiny_params.slot_count).reshape(-1, tiny_params.slot_count)
        assert np.max(np.abs(slots - want)) < 1e-3
        assert all(c.level == tiny_params.max_level for c in rec.load_ciphertexts())
        assert rec.extra["window_length"] == 3 and rec.extra["n_features"] == 5

    def test_timestamps_monotone(self):
        stamps = [monotonic_utcnow() for _ in range(50)]
        assert all(a < b for a, b in zip(stamps, stamps[1:]))

    def test_wrong_key_detected(self, tmp_path, windows, tiny_params):
        ks = KeyStore(tmp_path / "ks")
        rec = encrypt_dataset(windows, "herd", "alice", tiny_params, ks, np.random.default_rng(0))
        ks.create("other", tiny_params, np.random.default_rng(99))
        _, wrong = ks.load("other")
        slots = decrypt_record_slots(rec, wrong)
        with pytest.raises(DecryptionCheckError):
            check_sentinel(slots, SENTINEL_VALUE, "herd")
        rec.extra.update(expected_sentinel=SENTINEL_VALUE, n_features=5)
        with pytest.raises(DecryptionCheckError):
            decrypt_result(rec, ks, key_name="other")
        report = decrypt_result(rec, ks)
        assert len(report["predictions"]) == len(rec.ciphertexts)

    def test_decrypt_without_keys(self, tmp_path, windows, tiny_params):
        rec = encrypt_dataset(windows, "herd", "alice", tiny_params, KeyStore(tmp_path / "a"))
        with pytest.raises(MissingKeyError):
            decrypt_result(rec, KeyStore(tmp_path / "b"))
