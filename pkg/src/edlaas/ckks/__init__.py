"""Leveled approximate-arithmetic homomorphic encryption (CKKS style)."""
from .backend import CKKSBackend, RefCiphertext, ReferenceBackend, RefPlaintext
from .encoding import Plaintext, decode, encode
from .params import HEParams, context
from .scheme import (
    Ciphertext,
    KeyBundle,
    PublicKey,
    RelinKey,
    SecretKey,
    add_ct,
    add_pt,
    decrypt,
    encrypt,
    encrypt_values,
    keygen,
    mod_switch_to,
    mul_ct,
    mul_pt,
    negate_ct,
    relinearize,
    rescale,
    sub_ct,
    tensor,
)


def decrypt_values(ct: Ciphertext, secret_key: SecretKey, params: HEParams):
    """Decrypt and decode to real slot values."""
    return decode(decrypt(ct, secret_key, params), params)


__all__ = [
    "CKKSBackend", "Ciphertext", "HEParams", "KeyBundle", "Plaintext", "PublicKey",
    "RefCiphertext", "RefPlaintext", "ReferenceBackend", "RelinKey", "SecretKey", "add_ct",
    "add_pt", "context", "decode", "decrypt", "decrypt_values", "encode", "encrypt",
    "encrypt_values", "keygen", "mod_switch_to", "mul_ct", "mul_pt", "negate_ct",
    "relinearize", "rescale", "sub_ct", "tensor",
]
