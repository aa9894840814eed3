"""Storage oracle: on-chain request contract plus off-chain node actors.

The contract emits `IPFS_Add_Event` / `IPFS_Cat_Event` events; registered
nodes react by uploading to (or fetching from) their attached storage node
and acknowledging the result on-chain. A request finalizes once a strict
majority of the node set registered at request time reports the same
value; a tie (e.g. a 2-node split) never finalizes and the request fails
at its deadline.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .codec import dec_text, dec_u64, decode_exact, enc_text, enc_u64, encode_fields
from .ledger import AccountId, Block, Chain, ContractError, EventRecord, TxContext
from .storage import StorageNetwork

TOPIC_ADD = "IPFS_Add_Event"
TOPIC_CAT = "IPFS_Cat_Event"
TOPIC_FINALIZED = "Oracle_Finalized"
TOPIC_FAILED = "Oracle_Failed"


class RequestKind(Enum):
    ADD = "add"
    CAT = "cat"


class RequestStatus(Enum):
    PENDING = "pending"
    FINALIZED = "finalized"
    FAILED = "failed"


class FaultMode(Enum):
    HONEST = "honest"
    WRONG_VALUE = "wrong_value"
    SILENT = "silent"


@dataclass(frozen=True)
class OracleNodeConfig:
    node_id: str
    account: AccountId
    storage_node_id: str
    fault_mode: FaultMode = FaultMode.HONEST


@dataclass
class OracleRequest:
    request_id: int
    kind: RequestKind
    authorized_retriever: AccountId
    sender: AccountId
    quorum: int
    deadline: int
    ciphertext: Optional[str] = None
    add_request_id: Optional[int] = None
    acks: dict[str, str] = field(default_factory=dict)
    finalized_value: Optional[str] = None
    status: RequestStatus = RequestStatus.PENDING


def _validate_base64(text: str) -> None:
    try:
        base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ContractError(f"invalid base64 ciphertext: {exc}") from exc


class OracleContract:
    contract_id = "oracle"

    def __init__(self, admin: AccountId, deadline_ms: int = 30_000):
        self.admin = admin
        self.deadline_ms = deadline_ms
        self.nodes: dict[str, OracleNodeConfig] = {}
        self._node_by_account: dict[AccountId, str] = {}
        self.requests: dict[int, OracleRequest] = {}
        self._next_request_id = 1

    # -- reads -------------------------------------------------------------------

    @property
    def quorum(self) -> int:
        """Strict majority of the current node set."""
        return len(self.nodes) // 2 + 1

    def request(self, request_id: int) -> OracleRequest:
        if request_id not in self.requests:
            raise ContractError(f"unknown oracle request: {request_id}")
        return self.requests[request_id]

    def get_values(self, caller: AccountId, request_id: int) -> str:
        """Read the finalized value of a cat request (retriever only)."""
        req = self.request(request_id)
        if req.kind is not RequestKind.CAT:
            raise ContractError("get_values reads cat requests only")
        if req.status is not RequestStatus.FINALIZED:
            raise ContractError("request not finalized")
        if caller != req.authorized_retriever:
            raise ContractError("caller is not the authorized retriever")
        assert req.finalized_value is not None
        return req.finalized_value

    # -- operations -----------------------------------------------------------------

    def register_node(self, ctx: TxContext, config: OracleNodeConfig) -> None:
        if ctx.sender != self.admin:
            raise ContractError("only the admin registers oracle nodes")
        if config.node_id in self.nodes:
            raise ContractError(f"duplicate node id: {config.node_id}")
        if config.account in self._node_by_account:
            raise ContractError(f"account already bound to a node: {config.account}")
        self.nodes[config.node_id] = config
        self._node_by_account[config.account] = config.node_id

    def trigger_add(
        self, ctx: TxContext, ciphertext: str, authorized_retriever: AccountId
    ) -> int:
        if not ciphertext:
            raise ContractError("ciphertext must be non-empty")
        _validate_base64(ciphertext)
        req = OracleRequest(
            request_id=self._next_request_id,
            kind=RequestKind.ADD,
            authorized_retriever=authorized_retriever,
            sender=ctx.sender,
            quorum=self.quorum,
            deadline=ctx.now_ms + self.deadline_ms,
            ciphertext=ciphertext,
        )
        self._next_request_id += 1
        self.requests[req.request_id] = req
        ctx.emit(
            TOPIC_ADD,
            encode_fields(
                enc_u64(req.request_id),
                enc_text(ciphertext),
                authorized_retriever.value,
            ),
        )
        return req.request_id

    def trigger_cat(self, ctx: TxContext, add_request_id: int) -> int:
        add_req = self.request(add_request_id)
        if add_req.kind is not RequestKind.ADD:
            raise ContractError("trigger_cat references an add request")
        if add_req.status is not RequestStatus.FINALIZED:
            raise ContractError("referenced add request is not finalized")
        if ctx.sender != add_req.authorized_retriever:
            raise ContractError("caller is not the authorized retriever")
        req = OracleRequest(
            request_id=self._next_request_id,
            kind=RequestKind.CAT,
            authorized_retriever=add_req.authorized_retriever,
            sender=ctx.sender,
            quorum=self.quorum,
            deadline=ctx.now_ms + self.deadline_ms,
            add_request_id=add_request_id,
        )
        self._next_request_id += 1
        self.requests[req.request_id] = req
        assert add_req.finalized_value is not None
        ctx.emit(
            TOPIC_CAT,
            encode_fields(
                enc_u64(req.request_id),
                enc_text(add_req.finalized_value),
                req.authorized_retriever.value,
            ),
        )
        return req.request_id

    def submit_response(self, ctx: TxContext, request_id: int, value: str) -> None:
        node_id = self._node_by_account.get(ctx.sender)
        if node_id is None:
            raise ContractError("sender is not a registered oracle node")
        req = self.request(request_id)
        if req.status is not RequestStatus.PENDING:
            raise ContractError("request is not pending")
        if node_id in req.acks:
            raise ContractError(f"duplicate ack from node {node_id}")
        req.acks[node_id] = value
        tally = sum(1 for v in req.acks.values() if v == value)
        if tally >= req.quorum:
            req.finalized_value = value
            req.status = RequestStatus.FINALIZED
            ctx.emit(
                TOPIC_FINALIZED,
                encode_fields(enc_u64(req.request_id), enc_text(req.kind.value)),
            )

    def expire_request(self, ctx: TxContext, request_id: int) -> None:
        req = self.request(request_id)
        if req.status is not RequestStatus.PENDING:
            raise ContractError("request already resolved")
        if ctx.now_ms < req.deadline:
            raise ContractError("deadline not reached")
        req.status = RequestStatus.FAILED
        ctx.emit(
            TOPIC_FAILED,
            encode_fields(enc_u64(req.request_id), enc_text(req.kind.value)),
        )

    # -- wire dispatch -----------------------------------------------------------------

    def execute(self, ctx: TxContext, operation: str, args: bytes):
        if operation == "register_node":
            node_id, account, storage_node_id, fault = decode_exact(args, 4)
            return self.register_node(
                ctx,
                OracleNodeConfig(
                    node_id=dec_text(node_id),
                    account=AccountId(account),
                    storage_node_id=dec_text(storage_node_id),
                    fault_mode=FaultMode(dec_text(fault)),
                ),
            )
        if operation == "trigger_add":
            ciphertext, retriever = decode_exact(args, 2)
            return self.trigger_add(ctx, dec_text(ciphertext), AccountId(retriever))
        if operation == "trigger_cat":
            (add_request_id,) = decode_exact(args, 1)
            return self.trigger_cat(ctx, dec_u64(add_request_id))
        if operation == "submit_response":
            request_id, value = decode_exact(args, 2)
            return self.submit_response(ctx, dec_u64(request_id), dec_text(value))
        if operation == "expire_request":
            (request_id,) = decode_exact(args, 1)
            return self.expire_request(ctx, dec_u64(request_id))
        raise ContractError(f"unknown oracle operation: {operation}")


def encode_trigger_add(ciphertext: str, retriever: AccountId) -> bytes:
    return encode_fields(enc_text(ciphertext), retriever.value)


def encode_submit_response(request_id: int, value: str) -> bytes:
    return encode_fields(enc_u64(request_id), enc_text(value))


def wrong_value_for(request_id: int) -> str:
    """Colluding corrupt value wrong-value nodes report for a request."""
    return f"bogus:request-{request_id}"


class OracleNode:
    """Off-chain actor: reacts to oracle events via storage and responses.

    Subscribes to the chain's block stream. On an add event it streams the
    ciphertext into its attached storage node and acknowledges the cid; on
    a cat event it fetches the ciphertext for the announced cid and
    acknowledges it. Response transactions are submitted when the storage
    work completes, so their inclusion time reflects the network model plus
    block quantization.
    """

    def __init__(
        self,
        config: OracleNodeConfig,
        chain: Chain,
        network: StorageNetwork,
        oracle_id: str = "oracle",
    ):
        self.config = config
        self._chain = chain
        self._network = network
        self._oracle_id = oracle_id
        chain.subscribe(self._on_block)

    def _on_block(self, block: Block) -> None:
        for event in block.events:
            if event.topic == TOPIC_ADD:
                self._handle_add(event)
            elif event.topic == TOPIC_CAT:
                self._handle_cat(event)

    def _handle_add(self, event: EventRecord) -> None:
        if self.config.fault_mode is FaultMode.SILENT:
            return
        request_id, ciphertext, _ = decode_exact(event.payload, 3)
        rid = dec_u64(request_id)
        data = base64.b64decode(dec_text(ciphertext), validate=True)
        self._network.upload(
            self.config.storage_node_id,
            data,
            lambda cid: self._respond(rid, cid),
        )

    def _handle_cat(self, event: EventRecord) -> None:
        if self.config.fault_mode is FaultMode.SILENT:
            return
        request_id, cid, _ = decode_exact(event.payload, 3)
        rid = dec_u64(request_id)
        self._network.fetch(
            self.config.storage_node_id,
            dec_text(cid),
            lambda data: self._respond(rid, base64.b64encode(data).decode("ascii")),
        )

    def _respond(self, request_id: int, value: str) -> None:
        if self.config.fault_mode is FaultMode.WRONG_VALUE:
            value = wrong_value_for(request_id)
        self._chain.submit(
            sender=self.config.account,
            target=self._oracle_id,
            operation="submit_response",
            args=encode_submit_response(request_id, value),
        )
