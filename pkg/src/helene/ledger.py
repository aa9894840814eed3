"""Deterministic simulated blockchain.

Accounts, a serialized transaction queue, block production on a virtual
clock and an append-only event log. Contracts are plain Python objects
registered under a target id; they receive `(ctx, operation, args)` and
mutate their own state. There is no gas model and no transaction
signatures: actors are trusted in-process, the interesting properties are
ordering, determinism and exactly-once inclusion.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .clock import Scheduler, VirtualClock
from .codec import enc_u64, encode_fields


class LedgerError(Exception):
    """Submission-time failure: the transaction never enters the queue."""


class MalformedKeyError(LedgerError):
    pass


class NonceError(LedgerError):
    pass


class UnknownContractError(LedgerError):
    pass


class ContractError(Exception):
    """Operation-level failure inside a block.

    The transaction is included with a failed receipt and must leave all
    contract state unchanged, so operations validate before mutating.
    """


@dataclass(frozen=True, order=True)
class AccountId:
    """20-byte account identifier derived from a public key."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != 20:
            raise ValueError(f"AccountId must be 20 bytes, got {len(self.value)}")

    @classmethod
    def from_public_key(cls, public_key: bytes) -> "AccountId":
        return cls(hashlib.sha256(public_key).digest()[:20])

    @property
    def hex(self) -> str:
        return self.value.hex()

    def __str__(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class Transaction:
    sender: AccountId
    nonce: int
    target: str
    operation: str
    args: bytes
    submitted_at: int
    tx_hash: bytes

    @staticmethod
    def build(
        sender: AccountId,
        nonce: int,
        target: str,
        operation: str,
        args: bytes,
        submitted_at: int,
    ) -> "Transaction":
        if nonce < 0:
            raise ValueError("nonce must be non-negative")
        canonical = encode_fields(
            sender.value,
            enc_u64(nonce),
            target.encode("utf-8"),
            operation.encode("utf-8"),
            args,
            enc_u64(submitted_at),
        )
        return Transaction(
            sender=sender,
            nonce=nonce,
            target=target,
            operation=operation,
            args=args,
            submitted_at=submitted_at,
            tx_hash=hashlib.sha256(canonical).digest(),
        )


@dataclass(frozen=True)
class EventRecord:
    block_height: int
    index_in_block: int
    topic: str
    payload: bytes


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    txs: tuple[Transaction, ...]
    events: tuple[EventRecord, ...]


@dataclass
class TxReceipt:
    tx_hash: bytes
    block_height: int
    ok: bool
    result: object = None
    error: Optional[str] = None


class TxContext:
    """Execution context handed to contract operations.

    Events emitted through the context are buffered and only appended to
    the log if the whole transaction succeeds.
    """

    def __init__(
        self,
        sender: AccountId,
        now_ms: int = 0,
        tx_hash: bytes = b"\x00" * 32,
        chain: Optional["Chain"] = None,
    ):
        self.sender = sender
        self.now_ms = now_ms
        self.tx_hash = tx_hash
        self.chain = chain
        self.events: list[tuple[str, bytes]] = []

    def emit(self, topic: str, payload: bytes) -> None:
        self.events.append((topic, payload))


def direct_context(sender: AccountId, now_ms: int = 0) -> TxContext:
    """Context for driving a contract without a chain (unit tests, tooling)."""
    return TxContext(sender=sender, now_ms=now_ms)


def _tx_order_key(tx: Transaction):
    return (tx.submitted_at, tx.sender.value, tx.nonce, tx.tx_hash)


class Chain:
    """Single-writer event-sourced ledger on a virtual clock.

    Blocks are produced at fixed boundaries of `block_interval_ms`. Queued
    transactions are executed in `(submitted_at, sender, nonce, tx_hash)`
    order inside the next produced block. If a scheduler is attached, its
    callbacks due up to each boundary run before the block is produced, so
    work scheduled by off-chain actors lands in the correct block.
    """

    def __init__(
        self,
        clock: Optional[VirtualClock] = None,
        scheduler: Optional[Scheduler] = None,
        block_interval_ms: int = 1000,
    ):
        if block_interval_ms <= 0:
            raise ValueError("block_interval_ms must be positive")
        self.clock = clock if clock is not None else VirtualClock()
        self.scheduler = scheduler
        self.block_interval_ms = block_interval_ms
        self._accounts: dict[AccountId, bytes] = {}
        self._next_nonce: dict[AccountId, int] = {}
        self._contracts: dict[str, object] = {}
        self._queue: list[Transaction] = []
        self._blocks: list[Block] = []
        self._events: list[EventRecord] = []
        self._receipts: dict[bytes, TxReceipt] = {}
        self._subscribers: list[Callable[[Block], None]] = []
        self._last_block_time = self.clock.now_ms

    # -- accounts ----------------------------------------------------------

    def create_account(self, public_key: bytes) -> AccountId:
        """Derive (and remember) the account for an Ed25519 public key."""
        if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != 32:
            raise MalformedKeyError("public key must be 32 bytes")
        account = AccountId.from_public_key(bytes(public_key))
        self._accounts[account] = bytes(public_key)
        return account

    def public_key_of(self, account: AccountId) -> bytes:
        return self._accounts[account]

    # -- contracts ---------------------------------------------------------

    def register_contract(self, contract) -> None:
        cid = contract.contract_id
        if cid in self._contracts:
            raise LedgerError(f"contract already registered: {cid}")
        self._contracts[cid] = contract

    def contract(self, contract_id: str):
        return self._contracts[contract_id]

    # -- submission --------------------------------------------------------

    def next_nonce(self, sender: AccountId) -> int:
        return self._next_nonce.get(sender, 0)

    def submit_tx(self, tx: Transaction) -> bytes:
        expected = self.next_nonce(tx.sender)
        if tx.nonce != expected:
            raise NonceError(
                f"nonce {tx.nonce} from {tx.sender} (expected {expected})"
            )
        if tx.target not in self._contracts:
            raise UnknownContractError(f"unknown target contract: {tx.target}")
        self._next_nonce[tx.sender] = expected + 1
        self._queue.append(tx)
        return tx.tx_hash

    def submit(
        self, sender: AccountId, target: str, operation: str, args: bytes = b""
    ) -> bytes:
        """Build and queue a transaction with the sender's next nonce."""
        tx = Transaction.build(
            sender=sender,
            nonce=self.next_nonce(sender),
            target=target,
            operation=operation,
            args=args,
            submitted_at=self.clock.now_ms,
        )
        return self.submit_tx(tx)

    # -- block production ----------------------------------------------------

    @property
    def now_ms(self) -> int:
        return self.clock.now_ms

    @property
    def height(self) -> int:
        return len(self._blocks)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def pending_txs(self) -> int:
        return len(self._queue)

    def advance(self, duration_ms: int) -> list[Block]:
        """Advance virtual time, producing one block per elapsed interval."""
        if duration_ms < 0:
            raise ValueError("duration_ms must be non-negative")
        target = self.clock.now_ms + duration_ms
        produced = []
        while self._last_block_time + self.block_interval_ms <= target:
            boundary = self._last_block_time + self.block_interval_ms
            if self.scheduler is not None:
                self.scheduler.run_due(boundary)
            self.clock.advance_to(boundary)
            produced.append(self._produce_block(boundary))
            self._last_block_time = boundary
        if self.scheduler is not None:
            self.scheduler.run_due(target)
        self.clock.advance_to(target)
        return produced

    def run_block(self) -> Block:
        """Advance exactly to the next block boundary and return its block."""
        gap = self._last_block_time + self.block_interval_ms - self.clock.now_ms
        return self.advance(gap)[0]

    def _produce_block(self, timestamp: int) -> Block:
        height = len(self._blocks)
        txs = sorted(self._queue, key=_tx_order_key)
        self._queue.clear()
        events: list[EventRecord] = []
        for tx in txs:
            ctx = TxContext(
                sender=tx.sender, now_ms=timestamp, tx_hash=tx.tx_hash, chain=self
            )
            contract = self._contracts[tx.target]
            try:
                result = contract.execute(ctx, tx.operation, tx.args)
            except ContractError as exc:
                self._receipts[tx.tx_hash] = TxReceipt(
                    tx_hash=tx.tx_hash, block_height=height, ok=False, error=str(exc)
                )
            else:
                for topic, payload in ctx.events:
                    events.append(
                        EventRecord(
                            block_height=height,
                            index_in_block=len(events),
                            topic=topic,
                            payload=payload,
                        )
                    )
                self._receipts[tx.tx_hash] = TxReceipt(
                    tx_hash=tx.tx_hash, block_height=height, ok=True, result=result
                )
        block = Block(
            height=height, timestamp=timestamp, txs=tuple(txs), events=tuple(events)
        )
        self._blocks.append(block)
        self._events.extend(block.events)
        for subscriber in list(self._subscribers):
            subscriber(block)
        return block

    # -- reads ---------------------------------------------------------------

    def receipt(self, tx_hash: bytes) -> Optional[TxReceipt]:
        return self._receipts.get(tx_hash)

    def subscribe(self, callback: Callable[[Block], None]) -> None:
        self._subscribers.append(callback)

    def get_events(
        self,
        topic: Optional[str] = None,
        start_height: Optional[int] = None,
        end_height: Optional[int] = None,
    ) -> list[EventRecord]:
        """Matching events in total (block, index) order; inclusive bounds."""
        out = []
        for ev in self._events:
            if topic is not None and ev.topic != topic:
                continue
            if start_height is not None and ev.block_height < start_height:
                continue
            if end_height is not None and ev.block_height > end_height:
                continue
            out.append(ev)
        return out

    def dump_event_log(self) -> str:
        """Line-delimited `height,index,topic,hex(payload)` dump of the log."""
        lines = [
            f"{ev.block_height},{ev.index_in_block},{ev.topic},{ev.payload.hex()}"
            for ev in self._events
        ]
        return "\n".join(lines) + ("\n" if lines else "")
