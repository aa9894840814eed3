"""Platform token: a security-token state machine with batch operations.

Keeps plain integer balances (no decimals, no partitions). The deployer
initializes the contract holding the whole supply, may delegate or revoke
the controller and minter roles, and acts as the treasury that `acquire`
draws from. Controllers can force transfers without holder consent;
minters change the total supply. A document registry stores name -> (uri,
32-byte content hash) records on-chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .codec import dec_u64, dec_text, decode_exact, decode_fields, enc_u64, enc_text, encode_fields
from .ledger import AccountId, ContractError, TxContext

ROLE_CONTROLLER = "controller"
ROLE_MINTER = "minter"


@dataclass(frozen=True)
class DocumentRecord:
    name: str
    uri: str
    content_hash: bytes
    set_at: int

    def __post_init__(self):
        if len(self.content_hash) != 32:
            raise ValueError("content_hash must be exactly 32 bytes")


class TokenContract:
    contract_id = "token"

    def __init__(self):
        self._initialized = False
        self.deployer: Optional[AccountId] = None
        self.total_supply = 0
        self._balances: dict[AccountId, int] = {}
        self.controllers: set[AccountId] = set()
        self.minters: set[AccountId] = set()
        self.documents: dict[str, DocumentRecord] = {}

    # -- reads ---------------------------------------------------------------

    def balance_of(self, account: AccountId) -> int:
        return self._balances.get(account, 0)

    def balances(self) -> dict[AccountId, int]:
        """Snapshot of all non-zero balances."""
        return {a: b for a, b in self._balances.items() if b != 0}

    def get_document(self, name: str) -> DocumentRecord:
        if name not in self.documents:
            raise ContractError(f"no document named {name!r}")
        return self.documents[name]

    # -- operations ------------------------------------------------------------

    def initialize(self, ctx: TxContext, initial_supply: int) -> None:
        if self._initialized:
            raise ContractError("token already initialized")
        if initial_supply < 0:
            raise ContractError("initial_supply must be non-negative")
        self._initialized = True
        self.deployer = ctx.sender
        self.total_supply = initial_supply
        self._balances = {ctx.sender: initial_supply}
        self.minters = {ctx.sender}
        ctx.emit("Initialized", encode_fields(ctx.sender.value, enc_u64(initial_supply)))

    def _require_initialized(self):
        if not self._initialized:
            raise ContractError("token not initialized")

    def _debit(self, account: AccountId, amount: int) -> None:
        self._balances[account] = self._balances.get(account, 0) - amount

    def _credit(self, account: AccountId, amount: int) -> None:
        self._balances[account] = self._balances.get(account, 0) + amount

    def transfer(self, ctx: TxContext, src: AccountId, dst: AccountId, amount: int) -> None:
        self._require_initialized()
        if ctx.sender != src:
            raise ContractError("transfer caller must be the source account")
        if amount < 0:
            raise ContractError("amount must be non-negative")
        if self.balance_of(src) < amount:
            raise ContractError(
                f"insufficient balance: {self.balance_of(src)} < {amount}"
            )
        self._debit(src, amount)
        self._credit(dst, amount)
        ctx.emit("Transfer", encode_fields(src.value, dst.value, enc_u64(amount)))

    def transfer_batch(
        self, ctx: TxContext, src: AccountId, legs: Iterable[tuple[AccountId, int]]
    ) -> None:
        """Apply every (recipient, amount) leg atomically in one event."""
        self._require_initialized()
        legs = list(legs)
        if ctx.sender != src:
            raise ContractError("batch caller must be the source account")
        if not legs:
            raise ContractError("batch must contain at least one leg")
        if any(amount < 0 for _, amount in legs):
            raise ContractError("amounts must be non-negative")
        total = sum(amount for _, amount in legs)
        if self.balance_of(src) < total:
            raise ContractError(
                f"insufficient balance for batch: {self.balance_of(src)} < {total}"
            )
        for dst, amount in legs:
            self._debit(src, amount)
            self._credit(dst, amount)
        payload = [src.value, enc_u64(len(legs)), enc_u64(total)]
        for dst, amount in legs:
            payload += [dst.value, enc_u64(amount)]
        ctx.emit("BatchTransfer", encode_fields(*payload))

    def controller_transfer(
        self, ctx: TxContext, src: AccountId, dst: AccountId, amount: int
    ) -> None:
        self._require_initialized()
        if ctx.sender not in self.controllers:
            raise ContractError("caller is not a controller")
        if amount < 0:
            raise ContractError("amount must be non-negative")
        if self.balance_of(src) < amount:
            raise ContractError("insufficient balance for forced transfer")
        self._debit(src, amount)
        self._credit(dst, amount)
        ctx.emit(
            "ControllerTransfer",
            encode_fields(ctx.sender.value, src.value, dst.value, enc_u64(amount)),
        )

    def mint(self, ctx: TxContext, dst: AccountId, amount: int) -> None:
        self._require_initialized()
        if ctx.sender not in self.minters:
            raise ContractError("caller is not a minter")
        if amount < 0:
            raise ContractError("amount must be non-negative")
        self.total_supply += amount
        self._credit(dst, amount)
        ctx.emit("Mint", encode_fields(dst.value, enc_u64(amount)))

    def burn(self, ctx: TxContext, src: AccountId, amount: int) -> None:
        self._require_initialized()
        if ctx.sender not in self.minters:
            raise ContractError("caller is not a minter")
        if amount < 0:
            raise ContractError("amount must be non-negative")
        if self.balance_of(src) < amount:
            raise ContractError("burn exceeds balance")
        self.total_supply -= amount
        self._debit(src, amount)
        ctx.emit("Burn", encode_fields(src.value, enc_u64(amount)))

    def grant_privilege(self, ctx: TxContext, account: AccountId, role: str) -> None:
        self._role_set(ctx, role).add(account)
        ctx.emit("PrivilegeGranted", encode_fields(account.value, enc_text(role)))

    def revoke_privilege(self, ctx: TxContext, account: AccountId, role: str) -> None:
        self._role_set(ctx, role).discard(account)
        ctx.emit("PrivilegeRevoked", encode_fields(account.value, enc_text(role)))

    def _role_set(self, ctx: TxContext, role: str) -> set:
        self._require_initialized()
        if ctx.sender != self.deployer:
            raise ContractError("only the deployer manages privileges")
        if role == ROLE_CONTROLLER:
            return self.controllers
        if role == ROLE_MINTER:
            return self.minters
        raise ContractError(f"unknown role: {role!r}")

    def acquire(self, ctx: TxContext, amount: int) -> None:
        """Move `amount` from the deployer treasury to the caller."""
        self._require_initialized()
        if amount < 0:
            raise ContractError("amount must be non-negative")
        if self.balance_of(self.deployer) < amount:
            raise ContractError("treasury depleted")
        self._debit(self.deployer, amount)
        self._credit(ctx.sender, amount)
        ctx.emit("Transfer", encode_fields(self.deployer.value, ctx.sender.value, enc_u64(amount)))

    def set_document(self, ctx: TxContext, name: str, uri: str, content_hash: bytes) -> None:
        self._require_initialized()
        if ctx.sender != self.deployer and ctx.sender not in self.controllers:
            raise ContractError("only deployer or controllers set documents")
        if len(content_hash) != 32:
            raise ContractError("content_hash must be 32 bytes")
        self.documents[name] = DocumentRecord(
            name=name, uri=uri, content_hash=content_hash, set_at=ctx.now_ms
        )
        ctx.emit(
            "DocumentSet", encode_fields(enc_text(name), enc_text(uri), content_hash)
        )

    # -- wire dispatch ---------------------------------------------------------

    def execute(self, ctx: TxContext, operation: str, args: bytes):
        if operation == "initialize":
            (supply,) = decode_exact(args, 1)
            return self.initialize(ctx, dec_u64(supply))
        if operation == "transfer":
            src, dst, amount = decode_exact(args, 3)
            return self.transfer(ctx, AccountId(src), AccountId(dst), dec_u64(amount))
        if operation == "transfer_batch":
            parts = decode_fields(args)
            if len(parts) < 2 or len(parts) % 2 != 0:
                raise ContractError("malformed batch args")
            src = AccountId(parts[0])
            count = dec_u64(parts[1])
            if len(parts) != 2 + 2 * count:
                raise ContractError("batch leg count mismatch")
            legs = [
                (AccountId(parts[2 + 2 * i]), dec_u64(parts[3 + 2 * i]))
                for i in range(count)
            ]
            return self.transfer_batch(ctx, src, legs)
        if operation == "controller_transfer":
            src, dst, amount = decode_exact(args, 3)
            return self.controller_transfer(
                ctx, AccountId(src), AccountId(dst), dec_u64(amount)
            )
        if operation == "mint":
            dst, amount = decode_exact(args, 2)
            return self.mint(ctx, AccountId(dst), dec_u64(amount))
        if operation == "burn":
            src, amount = decode_exact(args, 2)
            return self.burn(ctx, AccountId(src), dec_u64(amount))
        if operation == "grant_privilege":
            account, role = decode_exact(args, 2)
            return self.grant_privilege(ctx, AccountId(account), dec_text(role))
        if operation == "revoke_privilege":
            account, role = decode_exact(args, 2)
            return self.revoke_privilege(ctx, AccountId(account), dec_text(role))
        if operation == "acquire":
            (amount,) = decode_exact(args, 1)
            return self.acquire(ctx, dec_u64(amount))
        if operation == "set_document":
            name, uri, content_hash = decode_exact(args, 3)
            return self.set_document(ctx, dec_text(name), dec_text(uri), content_hash)
        raise ContractError(f"unknown token operation: {operation}")


def encode_transfer(src: AccountId, dst: AccountId, amount: int) -> bytes:
    return encode_fields(src.value, dst.value, enc_u64(amount))


def encode_batch(src: AccountId, legs: Iterable[tuple[AccountId, int]]) -> bytes:
    legs = list(legs)
    parts = [src.value, enc_u64(len(legs))]
    for dst, amount in legs:
        parts += [dst.value, enc_u64(amount)]
    return encode_fields(*parts)
