"""Simulated content-addressed, replicated store with a parametric network.

Content ids are `cid:` + lowercase hex SHA-256 of the bytes. Every node
fully replicates: an add schedules a push of the new item to every peer
that does not already hold it. All transfers (uploads, fetches, pushes)
cross one shared medium whose capacity is divided equally among the
transfers in flight, so an uncontended transfer of S bytes is delivered
after exactly `latency_ms + ceil(S / bandwidth)` virtual ms, while K
simultaneous same-size transfers all finish after roughly K times the
size-dependent term. The contention is what makes response times grow
with replica count in the oracle studies.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .clock import Scheduler, VirtualClock


class StorageError(Exception):
    pass


CID_PREFIX = "cid:"


def content_id(content: bytes) -> str:
    return CID_PREFIX + hashlib.sha256(content).hexdigest()


def is_content_id(value: str) -> bool:
    if not value.startswith(CID_PREFIX) or len(value) != len(CID_PREFIX) + 64:
        return False
    body = value[len(CID_PREFIX):]
    return all(c in "0123456789abcdef" for c in body)


@dataclass(frozen=True)
class NetworkModel:
    """Deterministic delivery model: latency plus a bandwidth term."""

    latency_ms: int = 40
    bandwidth_bytes_per_ms: int = 8

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        if self.bandwidth_bytes_per_ms <= 0:
            raise ValueError("bandwidth_bytes_per_ms must be positive")

    def delivery_time(self, size_bytes: int) -> int:
        """Virtual ms to deliver `size_bytes` on an otherwise idle medium."""
        return self.latency_ms + -(-size_bytes // self.bandwidth_bytes_per_ms)


class _Transfer:
    __slots__ = ("remaining", "on_complete")

    def __init__(self, size: int, on_complete: Callable[[], None]):
        self.remaining = Fraction(size)
        self.on_complete = on_complete


class SharedLink:
    """Shared medium with fair bandwidth sharing among active transfers.

    Byte progress is tracked with exact rationals; completion callbacks
    fire at the first integer millisecond at or after the exact completion
    moment, keeping the whole simulation on an integer clock.
    """

    def __init__(self, clock: VirtualClock, scheduler: Scheduler, model: NetworkModel):
        self._clock = clock
        self._scheduler = scheduler
        self._model = model
        self._active: list[_Transfer] = []
        self._accounted_at = Fraction(clock.now_ms)

    @property
    def active_transfers(self) -> int:
        return len(self._active)

    def submit(self, size_bytes: int, on_complete: Callable[[], None]) -> None:
        if size_bytes <= 0:
            raise StorageError("transfer size must be positive")
        self._scheduler.after(
            self._model.latency_ms, lambda: self._activate(size_bytes, on_complete)
        )

    def _activate(self, size: int, on_complete: Callable[[], None]) -> None:
        self._settle_to(Fraction(self._clock.now_ms))
        self._active.append(_Transfer(size, on_complete))
        self._schedule_drain()

    def _settle_to(self, moment: Fraction) -> None:
        elapsed = moment - self._accounted_at
        if elapsed > 0 and self._active:
            rate = Fraction(self._model.bandwidth_bytes_per_ms, len(self._active))
            for t in self._active:
                t.remaining -= rate * elapsed
        self._accounted_at = max(self._accounted_at, moment)

    def _next_completion(self) -> Optional[Fraction]:
        if not self._active:
            return None
        shortest = min(t.remaining for t in self._active)
        share = Fraction(self._model.bandwidth_bytes_per_ms, len(self._active))
        return self._accounted_at + shortest / share

    def _schedule_drain(self) -> None:
        moment = self._next_completion()
        if moment is not None:
            self._scheduler.at(math.ceil(moment), self._drain)

    def _drain(self) -> None:
        now = Fraction(self._clock.now_ms)
        while self._active:
            moment = self._next_completion()
            if moment is None or moment > now:
                break
            self._settle_to(moment)
            finished = [t for t in self._active if t.remaining <= 0]
            self._active = [t for t in self._active if t.remaining > 0]
            for t in finished:
                t.on_complete()
        self._schedule_drain()


class StorageNetwork:
    """Fixed set of replicated storage nodes over one shared link."""

    def __init__(
        self,
        clock: VirtualClock,
        scheduler: Scheduler,
        model: NetworkModel,
        node_ids: list[str],
    ):
        if len(set(node_ids)) != len(node_ids):
            raise StorageError("duplicate storage node ids")
        self._clock = clock
        self._scheduler = scheduler
        self.model = model
        self.link = SharedLink(clock, scheduler, model)
        self._stores: dict[str, dict[str, bytes]] = {nid: {} for nid in node_ids}
        self._inflight: set[tuple[str, str]] = set()

    @property
    def node_ids(self) -> list[str]:
        return list(self._stores)

    def store_of(self, node_id: str) -> dict[str, bytes]:
        if node_id not in self._stores:
            raise StorageError(f"unknown storage node: {node_id}")
        return self._stores[node_id]

    # -- local operations -------------------------------------------------------

    def add(self, node_id: str, content: bytes) -> str:
        """Store locally, schedule replication to peers, return the cid."""
        if not content:
            raise StorageError("content must be non-empty")
        store = self.store_of(node_id)
        cid = content_id(content)
        store[cid] = content
        for peer in self._stores:
            if peer != node_id:
                self._schedule_push(peer, cid, content)
        return cid

    def has(self, node_id: str, cid: str) -> bool:
        return cid in self.store_of(node_id)

    def cat(self, node_id: str, cid: str) -> bytes:
        """Return the bytes for `cid` from this node or any peer holding it."""
        store = self.store_of(node_id)
        if cid in store:
            return store[cid]
        for peer in self._stores:
            if cid in self._stores[peer]:
                return self._stores[peer][cid]
        raise StorageError(f"cid unknown network-wide: {cid}")

    def sync(self, node_id: str) -> int:
        """Push every local item each peer is missing; return the push count."""
        store = self.store_of(node_id)
        pushed = 0
        for cid, content in store.items():
            for peer in self._stores:
                if peer == node_id:
                    continue
                if self._schedule_push(peer, cid, content):
                    pushed += 1
        return pushed

    # -- timed operations ---------------------------------------------------------

    def upload(
        self, node_id: str, content: bytes, on_stored: Callable[[str], None]
    ) -> None:
        """Stream `content` into a node over the network, then add it."""
        if not content:
            raise StorageError("content must be non-empty")
        self.store_of(node_id)

        def complete():
            on_stored(self.add(node_id, content))

        self.link.submit(len(content), complete)

    def fetch(
        self, node_id: str, cid: str, on_bytes: Callable[[bytes], None]
    ) -> None:
        """Deliver the bytes for `cid` to the caller.

        Local content is delivered on the next scheduler tick; remote
        content crosses the shared link first.
        """
        store = self.store_of(node_id)
        if cid in store:
            content = store[cid]
            self._scheduler.at(self._clock.now_ms, lambda: on_bytes(content))
            return
        for peer in self._stores:
            if cid in self._stores[peer]:
                content = self._stores[peer][cid]

                def complete():
                    store[cid] = content
                    on_bytes(content)

                self.link.submit(len(content), complete)
                return
        raise StorageError(f"cid unknown network-wide: {cid}")

    # -- replication -------------------------------------------------------------

    def _schedule_push(self, peer: str, cid: str, content: bytes) -> bool:
        key = (peer, cid)
        if cid in self._stores[peer] or key in self._inflight:
            return False
        self._inflight.add(key)
        self._scheduler.at(self._clock.now_ms, lambda: self._push_if_missing(peer, cid, content))
        return True

    def _push_if_missing(self, peer: str, cid: str, content: bytes) -> None:
        if cid in self._stores[peer]:
            self._inflight.discard((peer, cid))
            return

        def deliver():
            self._stores[peer][cid] = content
            self._inflight.discard((peer, cid))

        self.link.submit(len(content), deliver)

    def stores_equal(self) -> bool:
        stores = list(self._stores.values())
        return all(s == stores[0] for s in stores[1:])
