"""Versioned JSON model files: architecture descriptor plus plaintext weights."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ModelFileError
from .activation import ActivationSpec
from .graph import ComputeGraph, ModelWeights

FORMAT = "edlaas-model"
VERSION = 1


def model_to_dict(graph: ComputeGraph, model_id: str, meta: dict | None = None) -> dict:
    w = graph.weights
    return {
        "format": FORMAT,
        "version": VERSION,
        "model_id": model_id,
        "architecture": {
            "window": graph.window,
            "n_features": graph.n_features,
            "stride": graph.stride,
            "activation": {"kind": graph.activation.kind,
                           "coefficients": list(graph.activation.coefficients)},
            "layers": graph.layers,
            "depth_budget": graph.depth_budget,
        },
        "weights": {
            "conv_kernel": w.conv_kernel.tolist(),
            "conv_bias": w.conv_bias.tolist(),
            "dense_weight": w.dense_weight.tolist(),
            "dense_bias": w.dense_bias,
        },
        "meta": meta or {},
    }


def model_from_dict(d: dict) -> tuple[str, ComputeGraph]:
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise ModelFileError("not an edlaas model file")
    if d.get("version") != VERSION:
        raise ModelFileError(f"unsupported model file version {d.get('version')!r}")
    try:
        arch, w = d["architecture"], d["weights"]
        act = ActivationSpec(arch["activation"]["kind"], tuple(arch["activation"]["coefficients"]))
        weights = ModelWeights(np.array(w["conv_kernel"], dtype=np.float64), w["conv_bias"],
                               w["dense_weight"], w["dense_bias"])
        graph = ComputeGraph(int(arch["window"]), int(arch["n_features"]), weights, act,
                             int(arch.get("stride", 1)))
        model_id = str(d["model_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc
    declared = arch.get("depth_budget")
    if declared is not None and declared != graph.depth_budget:
        raise ModelFileError(f"declared depth {declared} disagrees with architecture ({graph.depth_budget})")
    if not model_id:
        raise ModelFileError("model_id must be non-empty")
    return model_id, graph


def save_model(graph: ComputeGraph, path, model_id: str, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(graph, model_id, meta), indent=2))
    return path


def load_model(path) -> tuple[str, ComputeGraph]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    try:
        return model_from_dict(data)
    except ModelFileError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
