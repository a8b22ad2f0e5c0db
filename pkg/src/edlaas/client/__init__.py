"""Data-source side: wrangle, keep keys, encrypt, submit, decrypt."""
from .api import ServerClient
from .keystore import KeyStore
from .pipeline import decrypt_record_slots, decrypt_result, encrypt_dataset
from .synth import synth_data, synth_spec, write_synth
from .wrangle import Windows, WrangleSpec, sliding_windows, wrangle

__all__ = [
    "KeyStore", "ServerClient", "Windows", "WrangleSpec", "decrypt_record_slots",
    "decrypt_result", "encrypt_dataset", "sliding_windows", "synth_data", "synth_spec",
    "wrangle", "write_synth",
]
