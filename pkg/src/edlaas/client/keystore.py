"""Client-side key storage, indexed by dataset name.

Layout::

    <root>/
      <dataset_name>/keys.edls   # frame: PARM, PKEY, RKEY, SKEY (mode 0600)

This directory is the only place a secret key is ever written.
"""
from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from ..ckks.params import HEParams
from ..ckks.scheme import KeyBundle, keygen
from ..errors import MissingKeyError
from ..wire import deserialize_keys, serialize_keys

_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$")
KEY_FILE = "keys.edls"


class KeyStore:
    def __init__(self, root):
        self.root = Path(root)

    def _dir(self, dataset_name: str) -> Path:
        if not _NAME.match(dataset_name):
            raise ValueError(f"dataset name {dataset_name!r} is not a safe directory name")
        return self.root / dataset_name

    def path(self, dataset_name: str) -> Path:
        return self._dir(dataset_name) / KEY_FILE

    def exists(self, dataset_name: str) -> bool:
        return self.path(dataset_name).is_file()

    def names(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.parent.name for p in self.root.glob(f"*/{KEY_FILE}"))

    def save(self, dataset_name: str, keys: KeyBundle, params: HEParams) -> Path:
        path = self.path(dataset_name)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = serialize_keys(keys, params, include_secret=True)
        tmp = path.with_suffix(".tmp")
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
        return path

    def create(self, dataset_name: str, params: HEParams,
               rng: np.random.Generator | None = None) -> KeyBundle:
        keys = keygen(params, rng if rng is not None else np.random.default_rng())
        self.save(dataset_name, keys, params)
        return keys

    def load(self, dataset_name: str) -> tuple[HEParams, KeyBundle]:
        path = self.path(dataset_name)
        if not path.is_file():
            raise MissingKeyError(f"cannot decrypt: no keys for dataset {dataset_name!r} in {self.root}")
        return deserialize_keys(path.read_bytes())

    def get_or_create(self, dataset_name: str, params: HEParams,
                      rng: np.random.Generator | None = None) -> KeyBundle:
        if self.exists(dataset_name):
            stored, keys = self.load(dataset_name)
            if stored.param_id != params.param_id:
                raise ValueError(f"keys for {dataset_name!r} were made for other parameters")
            return keys
        return self.create(dataset_name, params, rng)
