"""Synthetic milk-yield-like series standing in for proprietary herd data."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .wrangle import WrangleSpec

COLUMNS = ["day", "feed_kg", "temperature_c", "breed", "milk_yield"]
BREEDS = ["A", "B", "C"]
_BREED_OFFSET = {"A": 0.0, "B": 3.0, "C": -2.0}


def synth_rows(seed: int, n_rows: int) -> list[dict]:
    """Daily feed, temperature and breed driving a lagged, noisy yield."""
    rng = np.random.default_rng(seed)
    day = np.arange(n_rows)
    feed = np.clip(22 + 6 * np.sin(day / 9.0) + rng.normal(0, 2.5, n_rows), 1, 39)
    temp = np.clip(14 + 9 * np.sin(day / 29.0 + 1.0) + rng.normal(0, 2.0, n_rows), -9, 39)
    breed = rng.choice(BREEDS, size=n_rows)
    prev_feed = np.concatenate([[feed[0]], feed[:-1]])
    milk = (6 + 0.55 * feed + 0.35 * prev_feed - 0.15 * np.abs(temp - 15)
            + np.array([_BREED_OFFSET[b] for b in breed]) + rng.normal(0, 1.0, n_rows))
    milk = np.clip(milk, 0.5, 49.5)
    return [
        {"day": int(d), "feed_kg": round(float(f), 3), "temperature_c": round(float(t), 3),
         "breed": str(b), "milk_yield": round(float(m), 3)}
        for d, f, t, b, m in zip(day, feed, temp, breed, milk)
    ]


def synth_data(seed: int, n_rows: int) -> str:
    """CSV text; deterministic per seed."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(synth_rows(seed, n_rows))
    return buf.getvalue()


def write_synth(path, seed: int, n_rows: int) -> Path:
    path = Path(path)
    path.write_text(synth_data(seed, n_rows))
    return path


def synth_spec(window_length: int = 3) -> WrangleSpec:
    """Bounds that cover every value ``synth_rows`` can emit."""
    return WrangleSpec(
        numeric_columns={"feed_kg": (0.0, 40.0), "temperature_c": (-10.0, 40.0),
                         "milk_yield": (0.0, 50.0)},
        categorical_columns={"breed": list(BREEDS)},
        window_length=window_length,
        target_column="milk_yield",
    )
