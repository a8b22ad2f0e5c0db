"""Data-processor service: stores encrypted records, runs encrypted inference."""
from .app import audit_store, create_app
from .jobs import InferenceWorker, run_inference
from .registry import ModelRegistry
from .store import Store

__all__ = ["InferenceWorker", "ModelRegistry", "Store", "audit_store", "create_app", "run_inference"]
