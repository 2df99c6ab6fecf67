"""Digest and Ed25519 primitives, plus the private key file format."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

KEY_FILE_MAGIC = b"FPSK"
SEED_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64
DIGEST_SIZE = 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def key_id(public_key: bytes) -> str:
    """Lowercase hex SHA-256 of a raw public key."""
    return hashlib.sha256(public_key).hexdigest()


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    if len(public_key) != PUBLIC_KEY_SIZE or len(signature) != SIGNATURE_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyPair:
    """An Ed25519 key pair derived from a 32-byte seed."""

    seed: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.seed) != SEED_SIZE:
            raise ValueError(f"seed must be {SEED_SIZE} bytes, got {len(self.seed)}")

    @classmethod
    def generate(cls, rng=None) -> KeyPair:
        """New random key pair. ``rng`` is any callable ``n -> bytes`` (defaults to os.urandom)."""
        return cls((rng or os.urandom)(SEED_SIZE))

    @property
    def _private(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    @property
    def public_key(self) -> bytes:
        return self._private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    @property
    def key_id(self) -> str:
        return key_id(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


def write_key_file(keypair: KeyPair, path: str | os.PathLike) -> None:
    path = Path(path)
    path.write_bytes(KEY_FILE_MAGIC + keypair.seed)
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass


def read_key_file(path: str | os.PathLike) -> KeyPair:
    data = Path(path).read_bytes()
    if data[:4] != KEY_FILE_MAGIC:
        raise ValueError(f"{path}: not a frameprov private key file")
    if len(data) != 4 + SEED_SIZE:
        raise ValueError(f"{path}: key file must be {4 + SEED_SIZE} bytes, got {len(data)}")
    return KeyPair(data[4:])
