"""Canonical test-report serialization, lab signing and password sealing.

A report is canonicalized to sorted `key=value` lines so equal fields give
identical bytes. The lab signs those bytes with Ed25519 (deterministic,
verifiable off-chain with standard test vectors). Sealing derives an
AES-256 key from the password with PBKDF2-HMAC-SHA256 and encrypts
`len(signature) || signature || report` with AES-256-GCM, producing the
versioned envelope:

    magic "HLN1" | 16-byte salt | 12-byte nonce | ciphertext | 16-byte tag

A wrong password and a tampered body are indistinguishable: both fail GCM
authentication. Envelopes travel through the oracle as standard padded
base64 text.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from typing import Mapping

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .ledger import AccountId

MAGIC = b"HLN1"
SALT_SIZE = 16
NONCE_SIZE = 12
TAG_SIZE = 16
KEY_SIZE = 32
PBKDF2_ITERATIONS = 100_000
SIGNATURE_SIZE = 64

REQUIRED_KEYS = ("antibody_gmfi", "diagnostic", "lab_id", "test_id", "timestamp_ms")


class SealingError(Exception):
    pass


class EnvelopeFormatError(SealingError):
    """The envelope is structurally invalid (bad magic, truncated, ...)."""


class AuthenticationError(SealingError):
    """Wrong password or tampered envelope body."""


# -- canonical report ---------------------------------------------------------


def canonicalize(fields: Mapping[str, object]) -> bytes:
    """Serialize report fields to sorted `key=value` lines (LF-terminated)."""
    text_fields = {str(k): str(v) for k, v in fields.items()}
    missing = [k for k in REQUIRED_KEYS if k not in text_fields]
    if missing:
        raise SealingError(f"missing required keys: {', '.join(missing)}")
    for key, value in text_fields.items():
        if "\n" in key or "\n" in value:
            raise SealingError(f"LF not allowed in field {key!r}")
        if "=" in key:
            raise SealingError(f"'=' not allowed in key {key!r}")
    lines = [f"{k}={text_fields[k]}" for k in sorted(text_fields)]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_report(data: bytes) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in data.decode("utf-8").splitlines():
        if not line:
            raise SealingError("blank line in canonical report")
        key, sep, value = line.partition("=")
        if not sep:
            raise SealingError(f"malformed report line: {line!r}")
        fields[key] = value
    return fields


# -- signing ---------------------------------------------------------------------


@dataclass(frozen=True)
class SigningKeyPair:
    secret_bytes: bytes
    public_bytes: bytes

    @classmethod
    def from_secret_bytes(cls, secret: bytes) -> "SigningKeyPair":
        key = Ed25519PrivateKey.from_private_bytes(secret)
        return cls(secret_bytes=secret, public_bytes=key.public_key().public_bytes_raw())

    @property
    def account(self) -> AccountId:
        return AccountId.from_public_key(self.public_bytes)


def sign_report(keypair: SigningKeyPair, data: bytes) -> bytes:
    key = Ed25519PrivateKey.from_private_bytes(keypair.secret_bytes)
    return key.sign(data)


def verify_report(public_bytes: bytes, data: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_bytes).verify(signature, data)
    except InvalidSignature:
        return False
    return True


# -- sealed envelope ------------------------------------------------------------


def derive_key(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), salt, PBKDF2_ITERATIONS, dklen=KEY_SIZE
    )


def build_envelope(
    password: str, salt: bytes, nonce: bytes, report: bytes, signature: bytes
) -> bytes:
    """Deterministic envelope for fixed key material (the core of `seal`)."""
    if not password:
        raise SealingError("password must be non-empty")
    if len(salt) != SALT_SIZE or len(nonce) != NONCE_SIZE:
        raise SealingError("salt must be 16 bytes and nonce 12 bytes")
    if len(signature) >= 1 << 16:
        raise SealingError("signature too long")
    plaintext = len(signature).to_bytes(2, "big") + signature + report
    key = derive_key(password, salt)
    body = AESGCM(key).encrypt(nonce, plaintext, None)
    return MAGIC + salt + nonce + body


def seal(password: str, report: bytes, signature: bytes, rng) -> bytes:
    """Seal a signed report; salt and nonce are drawn from the given CSPRNG.

    `rng` is anything with a `pseudo_random_data(n) -> bytes` method,
    normally a seeded Fortuna instance.
    """
    salt = rng.pseudo_random_data(SALT_SIZE)
    nonce = rng.pseudo_random_data(NONCE_SIZE)
    return build_envelope(password, salt, nonce, report, signature)


def unseal(password: str, envelope: bytes) -> tuple[bytes, bytes]:
    """Authenticate and open an envelope, returning (report, signature)."""
    header = len(MAGIC) + SALT_SIZE + NONCE_SIZE
    if len(envelope) < header + TAG_SIZE + 2:
        raise EnvelopeFormatError("envelope truncated")
    if envelope[: len(MAGIC)] != MAGIC:
        raise EnvelopeFormatError("bad envelope magic")
    salt = envelope[len(MAGIC) : len(MAGIC) + SALT_SIZE]
    nonce = envelope[len(MAGIC) + SALT_SIZE : header]
    body = envelope[header:]
    key = derive_key(password, salt)
    try:
        plaintext = AESGCM(key).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise AuthenticationError("wrong password or tampered envelope") from exc
    sig_len = int.from_bytes(plaintext[:2], "big")
    if len(plaintext) < 2 + sig_len:
        raise EnvelopeFormatError("signature overruns plaintext")
    signature = plaintext[2 : 2 + sig_len]
    report = plaintext[2 + sig_len :]
    return report, signature


def envelope_to_text(envelope: bytes) -> str:
    return base64.b64encode(envelope).decode("ascii")


def envelope_from_text(text: str) -> bytes:
    return base64.b64decode(text, validate=True)
