"""Trained models addressable by id."""
from __future__ import annotations

from pathlib import Path

from ..errors import ModelFileError
from ..nn.graph import ComputeGraph
from ..nn.model_io import load_model


class ModelRegistry:
    def __init__(self):
        self._models: dict[str, ComputeGraph] = {}

    def add(self, model_id: str, graph: ComputeGraph) -> None:
        if model_id in self._models:
            raise ModelFileError(f"duplicate model id {model_id!r}")
        self._models[model_id] = graph

    def get(self, model_id: str) -> ComputeGraph | None:
        return self._models.get(model_id)

    def __contains__(self, model_id):
        return model_id in self._models

    def __len__(self):
        return len(self._models)

    def table(self) -> dict[str, dict]:
        return {mid: {"depth_budget": g.depth_budget, "window": g.window, "n_features": g.n_features}
                for mid, g in sorted(self._models.items())}

    @classmethod
    def load(cls, model_dir) -> "ModelRegistry":
        """Every ``*.json`` model under ``model_dir``; a missing directory is fatal."""
        model_dir = Path(model_dir)
        if not model_dir.is_dir():
            raise ModelFileError(f"model directory {model_dir} does not exist")
        reg = cls()
        for path in sorted(model_dir.glob("*.json")):
            model_id, graph = load_model(path)
            reg.add(model_id, graph)
        return reg
