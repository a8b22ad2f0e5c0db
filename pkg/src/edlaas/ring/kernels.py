"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``EDLAAS_PURE_PYTHON=1`` to force the numpy kernels.
"""
import importlib
import os

from . import _ntt_fallback

_compiled = None
if os.environ.get("EDLAAS_PURE_PYTHON", "") in ("", "0"):
    try:
        _compiled = importlib.import_module("edlaas.ring._ntt_core")
    except ImportError:  # extension not built
        _compiled = None

active = _compiled if _compiled is not None else _ntt_fallback
COMPILED = _compiled is not None
NAME = "cython" if COMPILED else "numpy"


def available():
    """Mapping of kernel name to module for every implementation present."""
    out = {"numpy": _ntt_fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def get(name):
    try:
        return available()[name]
    except KeyError:
        raise ValueError(f"kernel implementation {name!r} is not available") from None
