"""Client-side cryptography: AEAD, sealed boxes, compression, chunking.

Everything here runs on the user's machine; nodes only ever see ciphertext,
shares, and public keys. Symmetric encryption is AES-256-GCM; asymmetric
encryption is an X25519 sealed box (fresh ephemeral key per message, shared
secret stretched through HKDF); signatures are Ed25519.
"""

from __future__ import annotations

import zlib

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..errors import BadKeyLength, DecryptFailure
from ..fields import Field
from ..rng import SeedStream

KEY_BYTES = 32  # 256-bit keys throughout
NONCE_BYTES = 12
CHUNK_BYTES = 7  # 56-bit limbs always fit below 2^61 - 1


def random_key(rng: SeedStream) -> bytes:
    return rng.bytes(KEY_BYTES)


def aead_encrypt(key: bytes, plaintext: bytes, rng: SeedStream, aad: bytes = b"") -> bytes:
    if len(key) != KEY_BYTES:
        raise BadKeyLength(f"key must be {KEY_BYTES} bytes, got {len(key)}")
    nonce = rng.bytes(NONCE_BYTES)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def aead_decrypt(key: bytes, blob: bytes, aad: bytes = b"") -> bytes:
    if len(key) != KEY_BYTES:
        raise BadKeyLength(f"key must be {KEY_BYTES} bytes, got {len(key)}")
    try:
        return AESGCM(key).decrypt(blob[:NONCE_BYTES], blob[NONCE_BYTES:], aad)
    except InvalidTag as exc:
        raise DecryptFailure("authenticated decryption failed") from exc


def compress(data: bytes, codec: str = "zlib") -> bytes:
    if codec == "zlib":
        return zlib.compress(data)
    if codec == "identity":
        return data
    raise ValueError(f"codec {codec!r}")


def decompress(data: bytes, codec: str = "zlib") -> bytes:
    if codec == "zlib":
        return zlib.decompress(data)
    if codec == "identity":
        return data
    raise ValueError(f"codec {codec!r}")


def hkdf(secret: bytes, salt: bytes, info: bytes, length: int = KEY_BYTES) -> bytes:
    return HKDF(algorithm=SHA256(), length=length, salt=salt, info=info).derive(secret)


def seal(recipient_pub_raw: bytes, plaintext: bytes, rng: SeedStream) -> bytes:
    """Sealed box: eph_pub || AEAD(plaintext) under HKDF(X25519 shared)."""
    eph = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_pub_raw))
    key = hkdf(shared, salt=eph_pub + recipient_pub_raw, info=b"qv-sealed-v1")
    return eph_pub + aead_encrypt(key, plaintext, rng)


def unseal(recipient_priv: X25519PrivateKey, blob: bytes) -> bytes:
    eph_pub, body = blob[:32], blob[32:]
    recipient_pub = recipient_priv.public_key().public_bytes_raw()
    shared = recipient_priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    key = hkdf(shared, salt=eph_pub + recipient_pub, info=b"qv-sealed-v1")
    return aead_decrypt(key, body)


def bytes_to_elements(data: bytes, field: Field) -> list[int]:
    """Chunk bytes into 7-byte field elements; callers keep the byte length."""
    if field.p <= (1 << (CHUNK_BYTES * 8)):
        raise ValueError("field too small for 7-byte chunks")
    return [int.from_bytes(data[i:i + CHUNK_BYTES], "big")
            for i in range(0, len(data), CHUNK_BYTES)] or [0]


def elements_to_bytes(elements: list[int], length: int) -> bytes:
    out = bytearray()
    for i, e in enumerate(elements):
        remaining = length - i * CHUNK_BYTES
        out += e.to_bytes(min(CHUNK_BYTES, max(remaining, 0)) or CHUNK_BYTES, "big")
    return bytes(out[:length])


# -- key material -------------------------------------------------------------


def gen_sign_keypair(rng: SeedStream) -> tuple[Ed25519PrivateKey, bytes]:
    priv = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))
    return priv, priv.public_key().public_bytes_raw()


def gen_box_keypair(rng: SeedStream) -> tuple[X25519PrivateKey, bytes]:
    priv = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    return priv, priv.public_key().public_bytes_raw()


def load_sign_pub(raw_hex: str) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(bytes.fromhex(raw_hex))
