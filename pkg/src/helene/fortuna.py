"""Fortuna CSPRNG: counter-mode AES-256 generator plus a 32-pool accumulator.

The generator keeps a 32-byte key and a 128-bit little-endian counter.
Reseeding folds new seed material in with a double SHA-256 and bumps the
counter; a counter of zero means "never seeded" and the generator refuses
to produce output. Every output request is followed by generating 256
extra bits that become the new key, so compromising the key later never
reveals earlier requests.

The accumulator spreads entropy events over 32 SHA-256 pools. A reseed is
allowed once pool 0 has absorbed 64 bytes and at least 100 ms have passed
since the previous one; reseed number r drains every pool whose index i
satisfies 2^i | r, which makes higher pools contribute exponentially
rarely and defeats attackers who can predict frequent small events.

No seed file is kept: a long-running process seeds once from the host
entropy source at startup (`Fortuna.from_os_entropy`).

The module also carries the password tooling used around the generator:
the 70-character set, rejection-sampled character draws, the 16-character
password policy, 32-character challenges and the exact n^l combination
count.
"""

from __future__ import annotations

import hashlib
import os
import string
from typing import Optional

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

BLOCK_SIZE = 16
KEY_SIZE = 32
MAX_REQUEST_BYTES = 1 << 20
COUNTER_BITS = 128

POOL_COUNT = 32
MIN_POOL_BYTES = 64
RESEED_INTERVAL_MS = 100
MAX_EVENT_BYTES = 32

SPECIAL_CHARACTERS = "!?&@*%$#"
CHARSET = string.ascii_lowercase + string.ascii_uppercase + string.digits + SPECIAL_CHARACTERS
CHARACTER_CLASSES = (
    string.ascii_lowercase,
    string.ascii_uppercase,
    string.digits,
    SPECIAL_CHARACTERS,
)
PASSWORD_LENGTH = 16
CHALLENGE_LENGTH = 32

# Largest multiple of len(CHARSET) below 256; bytes at or above it are
# rejected so the modulo maps the rest uniformly onto the character set.
_REJECTION_BOUND = 256 - 256 % len(CHARSET)  # 210

_CHARSET_SET = frozenset(CHARSET)


class FortunaError(Exception):
    pass


class NotSeededError(FortunaError):
    """Output was requested before the first reseed."""


def _sha256d(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


class Generator:
    """Block-cipher counter-mode generator with rekey-after-request."""

    def __init__(self):
        self.key = bytes(KEY_SIZE)
        self.counter = 0

    @property
    def seeded(self) -> bool:
        return self.counter != 0

    def reseed(self, seed: bytes) -> None:
        if not seed:
            raise FortunaError("seed must be non-empty")
        self.key = _sha256d(self.key + seed)
        self.counter = (self.counter + 1) % (1 << COUNTER_BITS)

    def generate_blocks(self, count: int) -> bytes:
        if not self.seeded:
            raise NotSeededError("generator has never been seeded")
        if count < 0:
            raise FortunaError("count must be non-negative")
        encryptor = Cipher(algorithms.AES(self.key), modes.ECB()).encryptor()
        out = bytearray()
        for _ in range(count):
            out += encryptor.update(self.counter.to_bytes(BLOCK_SIZE, "little"))
            self.counter = (self.counter + 1) % (1 << COUNTER_BITS)
        return bytes(out)

    def pseudo_random_data(self, n: int) -> bytes:
        """Return n random bytes, then rekey with two further blocks."""
        if not 0 < n <= MAX_REQUEST_BYTES:
            raise FortunaError(f"request size out of range: {n}")
        blocks = -(-n // BLOCK_SIZE)
        out = self.generate_blocks(blocks)[:n]
        self.key = self.generate_blocks(2)
        return out


class Fortuna:
    """Accumulator-fed generator with password/challenge helpers."""

    def __init__(self):
        self.generator = Generator()
        self._pools = [hashlib.sha256() for _ in range(POOL_COUNT)]
        self._pool_bytes = [0] * POOL_COUNT
        self.reseed_count = 0
        self.last_reseed_ms: Optional[int] = None
        self._char_buffer = bytearray()

    @classmethod
    def from_seed(cls, seed: bytes) -> "Fortuna":
        fortuna = cls()
        fortuna.seed(seed)
        return fortuna

    @classmethod
    def from_os_entropy(cls) -> "Fortuna":
        return cls.from_seed(os.urandom(KEY_SIZE))

    @property
    def seeded(self) -> bool:
        return self.generator.seeded

    def seed(self, data: bytes) -> None:
        """Directly reseed the generator (startup entropy injection)."""
        self.generator.reseed(data)

    def pool_bytes(self, index: int) -> int:
        return self._pool_bytes[index]

    def add_random_event(self, source_id: int, pool_index: int, data: bytes) -> None:
        if not 0 <= source_id <= 255:
            raise FortunaError("source_id must fit one byte")
        if not 0 <= pool_index < POOL_COUNT:
            raise FortunaError(f"pool index out of range: {pool_index}")
        if not 1 <= len(data) <= MAX_EVENT_BYTES:
            raise FortunaError("event data must be 1..32 bytes")
        self._pools[pool_index].update(bytes([source_id, len(data)]) + data)
        self._pool_bytes[pool_index] += len(data)

    def maybe_reseed(self, now_ms: int) -> bool:
        """Reseed from the accumulator if pool 0 is full and spacing allows."""
        if self._pool_bytes[0] < MIN_POOL_BYTES:
            return False
        if self.last_reseed_ms is not None and now_ms - self.last_reseed_ms < RESEED_INTERVAL_MS:
            return False
        self.reseed_count += 1
        seed = bytearray()
        for i in range(POOL_COUNT):
            if self.reseed_count % (1 << i) != 0:
                break
            seed += self._pools[i].digest()
            self._pools[i] = hashlib.sha256()
            self._pool_bytes[i] = 0
        self.generator.reseed(bytes(seed))
        self.last_reseed_ms = now_ms
        return True

    def pseudo_random_data(self, n: int) -> bytes:
        return self.generator.pseudo_random_data(n)

    # -- character generation -------------------------------------------------

    def _next_characters(self, count: int) -> str:
        chars: list[str] = []
        while len(chars) < count:
            if not self._char_buffer:
                self._char_buffer = bytearray(self.pseudo_random_data(32))
            byte = self._char_buffer.pop(0)
            if byte < _REJECTION_BOUND:
                chars.append(CHARSET[byte % len(CHARSET)])
        return "".join(chars)

    def random_password(self) -> str:
        """16 characters from the 70-set, regenerated until policy-valid."""
        while True:
            candidate = self._next_characters(PASSWORD_LENGTH)
            if validate_policy(candidate):
                return candidate

    def random_challenge(self) -> str:
        """32 characters from the 70-set; no class requirement."""
        return self._next_characters(CHALLENGE_LENGTH)


def validate_policy(candidate: str) -> bool:
    """Password policy: 16 chars, all four classes, no predictable patterns.

    Predictable patterns are read as three identical consecutive characters
    or three consecutive characters ascending or descending by character
    code (e.g. "abc", "321").
    """
    if len(candidate) != PASSWORD_LENGTH:
        return False
    if any(c not in _CHARSET_SET for c in candidate):
        return False
    for char_class in CHARACTER_CLASSES:
        if not any(c in char_class for c in candidate):
            return False
    codes = [ord(c) for c in candidate]
    for a, b, c in zip(codes, codes[1:], codes[2:]):
        if a == b == c:
            return False
        if b - a == 1 and c - b == 1:
            return False
        if b - a == -1 and c - b == -1:
            return False
    return True


def combinations(n: int, l: int) -> int:
    """Exact count of length-l strings over an n-character set (n^l)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if l < 0:
        raise ValueError("l must be non-negative")
    return n**l
