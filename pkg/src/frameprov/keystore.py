"""Append-only public key registry backed by a single JSON file.

The file is a JSON array of records in registration order::

    [
      {"keyId": "...", "publicKey": "...", "role": "device", "owner": "...", "registeredAt": 0}
    ]

``keyId`` is the lowercase hex SHA-256 of the raw public key and is checked on
load. There is no revocation; records are never changed or removed.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .crypto import PUBLIC_KEY_SIZE, key_id
from .errors import DuplicateKeyError, IntegrityError, KeystoreError

ROLES = ("device", "editor")


@dataclass(frozen=True)
class KeyRecord:
    key_id: str
    public_key: bytes
    role: str
    owner: str
    registered_at: int

    def to_dict(self) -> dict:
        return {
            "keyId": self.key_id,
            "publicKey": self.public_key.hex(),
            "role": self.role,
            "owner": self.owner,
            "registeredAt": self.registered_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> KeyRecord:
        expected = {"keyId", "publicKey", "role", "owner", "registeredAt"}
        if not isinstance(obj, dict) or set(obj) != expected:
            raise KeystoreError(f"record must have exactly the fields {sorted(expected)}")
        try:
            public_key = bytes.fromhex(obj["publicKey"])
        except (TypeError, ValueError):
            raise KeystoreError(f"record {obj.get('keyId')!r}: publicKey is not hex") from None
        if len(public_key) != PUBLIC_KEY_SIZE:
            raise KeystoreError(f"record {obj['keyId']!r}: public key must be 32 bytes")
        if obj["role"] not in ROLES:
            raise KeystoreError(f"record {obj['keyId']!r}: unknown role {obj['role']!r}")
        if not isinstance(obj["registeredAt"], int) or isinstance(obj["registeredAt"], bool):
            raise KeystoreError(f"record {obj['keyId']!r}: registeredAt must be an integer")
        if obj["keyId"] != key_id(public_key):
            raise IntegrityError(f"keyId {obj['keyId']!r} does not match its public key")
        return cls(obj["keyId"], public_key, obj["role"], str(obj["owner"]), obj["registeredAt"])


class KeyStore:
    """Registry snapshot. ``register`` replaces the internal snapshot and, when
    the store is bound to a path, persists it atomically. Single writer assumed."""

    def __init__(self, records: tuple[KeyRecord, ...] = (), path: str | os.PathLike | None = None) -> None:
        self._records = tuple(records)
        self._by_id = {r.key_id: r for r in self._records}
        if len(self._by_id) != len(self._records):
            raise DuplicateKeyError("duplicate keyId in registry")
        self.path = None if path is None else Path(path)

    @property
    def records(self) -> tuple[KeyRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[KeyRecord]:
        return iter(self._records)

    def __contains__(self, kid: str) -> bool:
        return kid in self._by_id

    def register(self, public_key: bytes, role: str, owner: str, registered_at: int) -> KeyRecord:
        if len(public_key) != PUBLIC_KEY_SIZE:
            raise KeystoreError(f"public key must be {PUBLIC_KEY_SIZE} bytes, got {len(public_key)}")
        if role not in ROLES:
            raise KeystoreError(f"role must be one of {ROLES}, got {role!r}")
        record = KeyRecord(key_id(public_key), bytes(public_key), role, owner, int(registered_at))
        if record.key_id in self._by_id:
            raise DuplicateKeyError(f"key {record.key_id} is already registered")
        snapshot = self._records + (record,)
        if self.path is not None:
            _write_atomic(self.path, dumps_records(snapshot))
        self._records = snapshot
        self._by_id[record.key_id] = record
        return record

    def lookup(self, kid: str) -> KeyRecord | None:
        return self._by_id.get(kid)

    def list(self, role: str | None = None) -> list[KeyRecord]:
        return [r for r in self._records if role is None or r.role == role]


def register_key(store: KeyStore, public_key: bytes, role: str, owner: str, registered_at: int) -> KeyRecord:
    return store.register(public_key, role, owner, registered_at)


def lookup_key(store: KeyStore, kid: str) -> KeyRecord | None:
    return store.lookup(kid)


def list_keys(store: KeyStore, role: str | None = None) -> list[KeyRecord]:
    return store.list(role)


def dumps_records(records) -> bytes:
    body = json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=False)
    return (body + "\n").encode("utf-8")


def loads_records(data: bytes) -> tuple[KeyRecord, ...]:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise KeystoreError(f"registry is not valid JSON: {exc}") from None
    if not isinstance(obj, list):
        raise KeystoreError("registry must be a JSON array")
    return tuple(KeyRecord.from_dict(item) for item in obj)


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def load_store(path: str | os.PathLike, *, missing_ok: bool = False) -> KeyStore:
    """Load a registry file; with ``missing_ok`` an absent file yields an empty store bound to ``path``."""
    path = Path(path)
    if missing_ok and not path.exists():
        return KeyStore(path=path)
    return KeyStore(loads_records(path.read_bytes()), path=path)


def save_store(store: KeyStore, path: str | os.PathLike) -> None:
    _write_atomic(Path(path), dumps_records(store.records))
