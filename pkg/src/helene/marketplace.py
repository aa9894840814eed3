"""Test-request auctions and the incentivized data-offer flow.

One auction per test request. The patient opens it (bidding starts
immediately), labs append bids, the patient picks one, the winning lab
confirms, the patient pays with the platform token, and fulfillment
milestones advance the state machine until the sealed result is attached
through a finalized oracle add request.

Data offers let a company reward patients with qualifying results: the
patients accept, the company settles everyone unpaid in one atomic batch
transfer, and each settled patient grants access by re-sealing their
report for the company through a new oracle add request.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .codec import dec_text, dec_u64, decode_exact, enc_text, enc_u64, encode_fields
from .ledger import AccountId, ContractError, TxContext
from .oracle import OracleContract, RequestKind, RequestStatus
from .token import TokenContract


class TestType(Enum):
    PCR = "PCR"
    ANTIGEN = "Antigen"
    ANTIBODY = "Antibody"


class AuctionState(Enum):
    CREATED = "created"
    BIDDING = "bidding"
    SELECTED = "selected"
    CONFIRMED = "confirmed"
    PAID = "paid"
    KIT_SENT = "kit_sent"
    SAMPLE_RECEIVED = "sample_received"
    RESULT_UPLOADED = "result_uploaded"
    CLOSED = "closed"
    EXPIRED = "expired"
    CANCELLED = "cancelled"


_TRANSITIONS: set[tuple[AuctionState, AuctionState]] = {
    (AuctionState.CREATED, AuctionState.BIDDING),
    (AuctionState.BIDDING, AuctionState.SELECTED),
    (AuctionState.SELECTED, AuctionState.CONFIRMED),
    (AuctionState.CONFIRMED, AuctionState.PAID),
    (AuctionState.PAID, AuctionState.KIT_SENT),
    (AuctionState.KIT_SENT, AuctionState.SAMPLE_RECEIVED),
    (AuctionState.SAMPLE_RECEIVED, AuctionState.RESULT_UPLOADED),
    (AuctionState.RESULT_UPLOADED, AuctionState.CLOSED),
    (AuctionState.CREATED, AuctionState.EXPIRED),
    (AuctionState.BIDDING, AuctionState.EXPIRED),
}


def _check_terms(accuracy_pct: int, delivery_days: int, price: int) -> None:
    if not 0 <= accuracy_pct <= 100:
        raise ContractError("accuracy_pct must be in [0, 100]")
    if delivery_days < 1:
        raise ContractError("delivery_days must be at least 1")
    if price < 0:
        raise ContractError("price must be non-negative")


@dataclass(frozen=True)
class Preferences:
    accuracy_pct: int
    delivery_days: int
    price: int

    def __post_init__(self):
        _check_terms(self.accuracy_pct, self.delivery_days, self.price)


@dataclass(frozen=True)
class Bid:
    lab: AccountId
    accuracy_pct: int
    delivery_days: int
    price: int

    def __post_init__(self):
        _check_terms(self.accuracy_pct, self.delivery_days, self.price)


@dataclass
class Auction:
    auction_id: int
    patient: AccountId
    test_type: TestType
    prefs: Preferences
    expiry: int
    state: AuctionState = AuctionState.CREATED
    bids: list[Bid] = field(default_factory=list)
    winner: Optional[Bid] = None
    payment_tx: Optional[bytes] = None
    result_request_id: Optional[int] = None
    diagnostic: Optional[str] = None


@dataclass(frozen=True)
class OfferCriteria:
    test_type: TestType
    diagnostic: Optional[str] = None


@dataclass
class DataOffer:
    offer_id: int
    company: AccountId
    criteria: OfferCriteria
    reward_per_patient: int
    acceptances: list[AccountId] = field(default_factory=list)
    settlements: dict[AccountId, bytes] = field(default_factory=dict)
    grants: dict[AccountId, int] = field(default_factory=dict)


class MarketplaceContract:
    contract_id = "marketplace"

    def __init__(self, token: TokenContract, oracle: OracleContract):
        self._token = token
        self._oracle = oracle
        self.auctions: dict[int, Auction] = {}
        self.offers: dict[int, DataOffer] = {}
        self._next_auction_id = 1
        self._next_offer_id = 1

    # -- reads -------------------------------------------------------------

    def auction(self, auction_id: int) -> Auction:
        if auction_id not in self.auctions:
            raise ContractError(f"unknown auction: {auction_id}")
        return self.auctions[auction_id]

    def offer(self, offer_id: int) -> DataOffer:
        if offer_id not in self.offers:
            raise ContractError(f"unknown offer: {offer_id}")
        return self.offers[offer_id]

    def open_auctions(self) -> list[Auction]:
        return [a for a in self.auctions.values() if a.state is AuctionState.BIDDING]

    # -- state machine -----------------------------------------------------

    def _transition(self, auction: Auction, new_state: AuctionState) -> None:
        if (auction.state, new_state) not in _TRANSITIONS:
            raise ContractError(
                f"illegal transition {auction.state.value} -> {new_state.value}"
            )
        auction.state = new_state

    # -- auction operations -----------------------------------------------------

    def create_auction(
        self, ctx: TxContext, test_type: TestType, prefs: Preferences, expiry: int
    ) -> int:
        if expiry <= ctx.now_ms:
            raise ContractError("expiry must be in the future")
        auction = Auction(
            auction_id=self._next_auction_id,
            patient=ctx.sender,
            test_type=test_type,
            prefs=prefs,
            expiry=expiry,
        )
        self._next_auction_id += 1
        self.auctions[auction.auction_id] = auction
        self._transition(auction, AuctionState.BIDDING)
        ctx.emit(
            "AuctionCreated",
            encode_fields(
                enc_u64(auction.auction_id),
                ctx.sender.value,
                enc_text(test_type.value),
                enc_u64(expiry),
            ),
        )
        return auction.auction_id

    def place_bid(self, ctx: TxContext, auction_id: int, bid: Bid) -> None:
        auction = self.auction(auction_id)
        if ctx.sender != bid.lab:
            raise ContractError("bid lab must be the caller")
        if auction.state is not AuctionState.BIDDING:
            raise ContractError("auction is not accepting bids")
        if ctx.now_ms >= auction.expiry:
            raise ContractError("auction expired")
        auction.bids.append(bid)
        ctx.emit(
            "BidPlaced",
            encode_fields(
                enc_u64(auction_id),
                bid.lab.value,
                enc_u64(bid.price),
                enc_u64(bid.delivery_days),
                enc_u64(bid.accuracy_pct),
            ),
        )

    def select_bid(self, ctx: TxContext, auction_id: int, bid_index: int) -> None:
        auction = self.auction(auction_id)
        if ctx.sender != auction.patient:
            raise ContractError("only the patient selects a bid")
        if auction.state is not AuctionState.BIDDING:
            raise ContractError("auction is not in bidding state")
        if not 0 <= bid_index < len(auction.bids):
            raise ContractError(f"bid index out of range: {bid_index}")
        self._transition(auction, AuctionState.SELECTED)
        auction.winner = auction.bids[bid_index]
        ctx.emit(
            "BidSelected",
            encode_fields(
                enc_u64(auction_id), auction.winner.lab.value, enc_u64(bid_index)
            ),
        )

    def _require_winner(self, ctx: TxContext, auction: Auction) -> Bid:
        if auction.winner is None or ctx.sender != auction.winner.lab:
            raise ContractError("caller is not the winning lab")
        return auction.winner

    def confirm_request(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        self._require_winner(ctx, auction)
        if auction.state is not AuctionState.SELECTED:
            raise ContractError("auction is not awaiting confirmation")
        self._transition(auction, AuctionState.CONFIRMED)
        ctx.emit(
            "RequestConfirmed",
            encode_fields(enc_u64(auction_id), auction.patient.value),
        )

    def pay(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        if ctx.sender != auction.patient:
            raise ContractError("only the patient pays")
        if auction.state is not AuctionState.CONFIRMED:
            raise ContractError("auction is not awaiting payment")
        assert auction.winner is not None
        self._token.transfer(ctx, auction.patient, auction.winner.lab, auction.winner.price)
        self._transition(auction, AuctionState.PAID)
        auction.payment_tx = ctx.tx_hash
        ctx.emit(
            "Paid",
            encode_fields(
                enc_u64(auction_id),
                auction.winner.lab.value,
                enc_u64(auction.winner.price),
            ),
        )

    def mark_kit_sent(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        self._require_winner(ctx, auction)
        self._transition(auction, AuctionState.KIT_SENT)
        ctx.emit("KitSent", encode_fields(enc_u64(auction_id), auction.patient.value))

    def mark_sample_received(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        self._require_winner(ctx, auction)
        self._transition(auction, AuctionState.SAMPLE_RECEIVED)
        ctx.emit(
            "SampleReceived", encode_fields(enc_u64(auction_id), auction.patient.value)
        )

    def attach_result(
        self,
        ctx: TxContext,
        auction_id: int,
        oracle_request_id: int,
        diagnostic: Optional[str] = None,
    ) -> None:
        auction = self.auction(auction_id)
        self._require_winner(ctx, auction)
        if auction.state is not AuctionState.SAMPLE_RECEIVED:
            raise ContractError("auction is not awaiting a result")
        request = self._oracle.request(oracle_request_id)
        if request.kind is not RequestKind.ADD:
            raise ContractError("result must reference an add request")
        if request.status is not RequestStatus.FINALIZED:
            raise ContractError("oracle request not finalized")
        if request.authorized_retriever != auction.patient:
            raise ContractError("oracle request retriever is not the patient")
        self._transition(auction, AuctionState.RESULT_UPLOADED)
        auction.result_request_id = oracle_request_id
        auction.diagnostic = diagnostic
        ctx.emit(
            "ResultAvailable",
            encode_fields(
                enc_u64(auction_id), auction.patient.value, enc_u64(oracle_request_id)
            ),
        )

    def close_auction(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        if ctx.sender != auction.patient:
            raise ContractError("only the patient closes the auction")
        self._transition(auction, AuctionState.CLOSED)
        ctx.emit("AuctionClosed", encode_fields(enc_u64(auction_id)))

    def expire(self, ctx: TxContext, auction_id: int) -> None:
        auction = self.auction(auction_id)
        if ctx.now_ms < auction.expiry:
            raise ContractError("auction has not reached its expiry")
        self._transition(auction, AuctionState.EXPIRED)
        ctx.emit("AuctionExpired", encode_fields(enc_u64(auction_id)))

    # -- data offers ----------------------------------------------------------

    def post_data_offer(
        self, ctx: TxContext, criteria: OfferCriteria, reward_per_patient: int
    ) -> int:
        if reward_per_patient < 0:
            raise ContractError("reward must be non-negative")
        offer = DataOffer(
            offer_id=self._next_offer_id,
            company=ctx.sender,
            criteria=criteria,
            reward_per_patient=reward_per_patient,
        )
        self._next_offer_id += 1
        self.offers[offer.offer_id] = offer
        ctx.emit(
            "OfferPosted",
            encode_fields(
                enc_u64(offer.offer_id),
                ctx.sender.value,
                enc_text(criteria.test_type.value),
                enc_text(criteria.diagnostic or ""),
                enc_u64(reward_per_patient),
            ),
        )
        return offer.offer_id

    def _qualifies(self, patient: AccountId, criteria: OfferCriteria) -> bool:
        for auction in self.auctions.values():
            if auction.patient != patient:
                continue
            if auction.state not in (AuctionState.RESULT_UPLOADED, AuctionState.CLOSED):
                continue
            if auction.test_type is not criteria.test_type:
                continue
            if criteria.diagnostic is not None and auction.diagnostic != criteria.diagnostic:
                continue
            return True
        return False

    def accept_offer(self, ctx: TxContext, offer_id: int) -> None:
        offer = self.offer(offer_id)
        if not self._qualifies(ctx.sender, offer.criteria):
            raise ContractError("patient has no qualifying result")
        if ctx.sender not in offer.acceptances:
            offer.acceptances.append(ctx.sender)
            ctx.emit(
                "OfferAccepted", encode_fields(enc_u64(offer_id), ctx.sender.value)
            )

    def settle_offer(self, ctx: TxContext, offer_id: int) -> None:
        """Pay every accepted-but-unsettled patient in one batch transfer."""
        offer = self.offer(offer_id)
        if ctx.sender != offer.company:
            raise ContractError("only the posting company settles")
        unsettled = [p for p in offer.acceptances if p not in offer.settlements]
        if unsettled:
            legs = [(p, offer.reward_per_patient) for p in unsettled]
            self._token.transfer_batch(ctx, offer.company, legs)
            for patient in unsettled:
                offer.settlements[patient] = ctx.tx_hash
        ctx.emit(
            "OfferSettled",
            encode_fields(
                enc_u64(offer_id),
                enc_u64(len(unsettled)),
                enc_u64(len(unsettled) * offer.reward_per_patient),
            ),
        )

    def grant_access(self, ctx: TxContext, offer_id: int, ciphertext: str) -> int:
        """Record a grant backed by a fresh oracle add request for the company.

        `ciphertext` is the patient's report re-sealed under a password the
        patient shares with the company off-chain.
        """
        offer = self.offer(offer_id)
        if ctx.sender not in offer.settlements:
            raise ContractError("patient is not settled")
        request_id = self._oracle.trigger_add(ctx, ciphertext, offer.company)
        offer.grants[ctx.sender] = request_id
        ctx.emit(
            "AccessGranted",
            encode_fields(enc_u64(offer_id), ctx.sender.value, enc_u64(request_id)),
        )
        return request_id

    # -- wire dispatch ------------------------------------------------------------

    def execute(self, ctx: TxContext, operation: str, args: bytes):
        if operation == "create_auction":
            test_type, accuracy, days, price, expiry = decode_exact(args, 5)
            prefs = Preferences(
                accuracy_pct=dec_u64(accuracy),
                delivery_days=dec_u64(days),
                price=dec_u64(price),
            )
            return self.create_auction(
                ctx, TestType(dec_text(test_type)), prefs, dec_u64(expiry)
            )
        if operation == "place_bid":
            auction_id, accuracy, days, price = decode_exact(args, 4)
            bid = Bid(
                lab=ctx.sender,
                accuracy_pct=dec_u64(accuracy),
                delivery_days=dec_u64(days),
                price=dec_u64(price),
            )
            return self.place_bid(ctx, dec_u64(auction_id), bid)
        if operation == "select_bid":
            auction_id, index = decode_exact(args, 2)
            return self.select_bid(ctx, dec_u64(auction_id), dec_u64(index))
        if operation == "confirm_request":
            (auction_id,) = decode_exact(args, 1)
            return self.confirm_request(ctx, dec_u64(auction_id))
        if operation == "pay":
            (auction_id,) = decode_exact(args, 1)
            return self.pay(ctx, dec_u64(auction_id))
        if operation == "mark_kit_sent":
            (auction_id,) = decode_exact(args, 1)
            return self.mark_kit_sent(ctx, dec_u64(auction_id))
        if operation == "mark_sample_received":
            (auction_id,) = decode_exact(args, 1)
            return self.mark_sample_received(ctx, dec_u64(auction_id))
        if operation == "attach_result":
            auction_id, request_id, diagnostic = decode_exact(args, 3)
            return self.attach_result(
                ctx,
                dec_u64(auction_id),
                dec_u64(request_id),
                dec_text(diagnostic) or None,
            )
        if operation == "close_auction":
            (auction_id,) = decode_exact(args, 1)
            return self.close_auction(ctx, dec_u64(auction_id))
        if operation == "expire":
            (auction_id,) = decode_exact(args, 1)
            return self.expire(ctx, dec_u64(auction_id))
        if operation == "post_data_offer":
            test_type, diagnostic, reward = decode_exact(args, 3)
            criteria = OfferCriteria(
                test_type=TestType(dec_text(test_type)),
                diagnostic=dec_text(diagnostic) or None,
            )
            return self.post_data_offer(ctx, criteria, dec_u64(reward))
        if operation == "accept_offer":
            (offer_id,) = decode_exact(args, 1)
            return self.accept_offer(ctx, dec_u64(offer_id))
        if operation == "settle_offer":
            (offer_id,) = decode_exact(args, 1)
            return self.settle_offer(ctx, dec_u64(offer_id))
        if operation == "grant_access":
            offer_id, ciphertext = decode_exact(args, 2)
            return self.grant_access(ctx, dec_u64(offer_id), dec_text(ciphertext))
        raise ContractError(f"unknown marketplace operation: {operation}")
