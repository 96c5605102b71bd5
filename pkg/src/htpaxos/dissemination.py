"""Client (proposer) and disseminator agents."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .actions import DISS, DL, SEQ, CancelTimer, Multicast, Note, Send, SetTimer
from .learner import DecidedLog
from .messages import (
    Batch, BatchAck, BatchId, ClientReply, ClientReplyAck, ClientRequest,
    ForwardBatch, IdVote, Request, RequestId, Resend, ResendReply,
    mint_request_id,
)


def request_value(rid: RequestId, size: int) -> bytes:
    stem = f"{rid.client_id}:{rid.client_seq};".encode()
    return (stem * (size // len(stem) + 1))[:size]


class Client:
    """Sequential closed-loop client: one outstanding request at a time."""

    def __init__(self, node: str, client_id: int, cfg, total: int, request_size: int,
                 disseminators: list[str], rng: random.Random, pinned: str | None = None):
        self.node = node
        self.client_id = client_id
        self.cfg = cfg
        self.total = total
        self.request_size = request_size
        self.disseminators = disseminators
        self.rng = rng
        self.pinned = pinned
        self.next_seq = 0
        self.outstanding: Request | None = None
        self.target: str | None = None
        self.retries_used = 0
        self.completed: list[RequestId] = []

    @property
    def done(self) -> bool:
        return self.outstanding is None and self.next_seq >= self.total

    def start(self):
        return self._next_request()

    def step(self, event, src=None):
        """Drive the client with ``"tick"`` or a ClientReply."""
        if event == "tick":
            return self.on_timer(("retry",))
        return self.on_reply(event.request_id, src)

    def _choose(self, first: bool) -> str:
        if first and self.pinned is not None:
            return self.pinned
        return self.rng.choice(self.disseminators)

    def _next_request(self):
        if self.next_seq >= self.total:
            return []
        rid = mint_request_id(self.client_id, self.next_seq)
        self.next_seq += 1
        self.outstanding = Request(rid, request_value(rid, self.request_size))
        self.retries_used = 0
        return [Note("submit", rid)] + self._transmit(first=True)

    def _transmit(self, first: bool):
        self.target = self._choose(first)
        return [Send(self.target, ClientRequest(self.outstanding)),
                SetTimer(("retry",), self.cfg.delta_t)]

    def on_timer(self, key):
        if self.outstanding is None:
            if self.next_seq == 0:
                return self._next_request()
            return []
        self.retries_used += 1
        return self._transmit(first=False)

    def on_reply(self, rid: RequestId, src: str):
        if self.outstanding is not None and rid == self.outstanding.id:
            self.completed.append(rid)
            self.outstanding = None
            acts = [Send(src, ClientReplyAck(rid)), CancelTimer(("retry",)), Note("complete", rid)]
            return acts + self._next_request()
        if rid.client_id == self.client_id and rid.client_seq < self.next_seq:
            # late reply for a finished request; ack so the sender stops
            return [Send(src, ClientReplyAck(rid))]
        return []

    def idle(self) -> bool:
        return self.done


@dataclass
class DisseminatorDisk:
    requests_set: dict = field(default_factory=dict)
    batch_seq: int = 0


class Disseminator:
    def __init__(self, node: str, index: int, cfg, disk: DisseminatorDisk,
                 log: DecidedLog, disseminators: list[str]):
        self.node = node
        self.index = index
        self.cfg = cfg
        self.disk = disk
        self.log = log
        self.disseminators = disseminators
        self.peers = [d for d in disseminators if d != node]
        self.quorum = cfg.disseminator_quorum
        self.pending: list[tuple[Request, str]] = []
        self.pending_ids: set[RequestId] = set()
        self.ack_tally: dict[BatchId, set[int]] = {}
        self.client_origin: dict[BatchId, list[tuple[str, RequestId]]] = {}
        self.replying: dict[RequestId, list] = {}   # rid -> [client, retransmissions]
        self.replied: set[RequestId] = set()        # acknowledged by the client
        self.pulls: dict[BatchId, str] = {}
        self.fetching: set[BatchId] = set()
        self.vote_buf: list[BatchId] = []
        self.req_index: dict[RequestId, BatchId] = {}
        for bid, batch in disk.requests_set.items():
            self._index(batch)
            self.ack_tally[bid] = {index}
        self._rr = index

    @property
    def requests_set(self):
        return self.disk.requests_set

    def _index(self, batch: Batch):
        for r in batch.requests:
            self.req_index.setdefault(r.id, batch.id)

    def minter(self, bid: BatchId) -> str:
        return self.disseminators[bid.disseminator_id]

    def start(self):
        acts = [SetTimer(("batch",), self.cfg.batch_timeout, background=True)]
        for bid in self.requests_set:
            if bid not in self.log:
                acts.append(SetTimer(("vote", bid), self.cfg.delta2))
        return acts

    # -- client requests and batching -------------------------------------

    def on_client_request(self, req: Request, src: str):
        rid = req.id
        if rid in self.pending_ids:
            return []
        bid = self.req_index.get(rid)
        if bid is not None:
            if bid in self.log or len(self.ack_tally.get(bid, ())) >= self.quorum:
                path = "decided" if bid in self.log else "majority"
                return self._start_reply(src, rid, bid, path, force=True)
            self.client_origin.setdefault(bid, []).append((src, rid))
            return []
        self.pending.append((req, src))
        self.pending_ids.add(rid)
        if len(self.pending) >= self.cfg.batch_size:
            return self.flush_batch()
        return []

    def flush_batch(self):
        if not self.pending:
            return []
        bid = BatchId(self.index, self.disk.batch_seq)
        self.disk.batch_seq += 1
        batch = Batch(bid, tuple(r for r, _ in self.pending))
        self.client_origin[bid] = [(c, r.id) for r, c in self.pending]
        self.pending = []
        self.pending_ids = set()
        return [Multicast(DL, ForwardBatch(batch))]

    # -- batches, acks, votes ----------------------------------------------

    def on_forward_batch(self, batch: Batch, src: str):
        bid = batch.id
        acts = []
        new = bid not in self.requests_set
        if new:
            self.requests_set[bid] = batch
            self._index(batch)
            acts.append(Note("store", bid))
        self.ack_tally.setdefault(bid, set()).add(self.index)
        if bid in self.fetching:
            self.fetching.discard(bid)
            acts.append(CancelTimer(("fetch", bid)))
        if bid not in self.log:
            acts.append(Send(self.minter(bid), BatchAck(bid)))
            if new:
                acts += self._vote(bid)
                acts.append(SetTimer(("vote", bid), self.cfg.delta2))
        return acts + self._check_reply(bid)

    def _vote(self, bid):
        if not self.cfg.vote_delay:
            return [Multicast(SEQ, IdVote((bid,)))]
        self.vote_buf.append(bid)
        if len(self.vote_buf) == 1:
            return [SetTimer(("voteflush",), self.cfg.vote_delay)]
        return []

    def on_batch_ack(self, bid: BatchId, src: str):
        if bid in self.requests_set:
            self.ack_tally.setdefault(bid, set()).add(self.disseminators.index(src))
            return self._check_reply(bid)
        if bid in self.pulls:
            return []
        self.pulls[bid] = src
        return [SetTimer(("pull", bid), self.cfg.delta4)]

    def _check_reply(self, bid):
        waiting = self.client_origin.get(bid)
        if not waiting:
            return []
        decided = bid in self.log
        majority = len(self.ack_tally.get(bid, ())) >= self.quorum
        if not (decided or majority):
            return []
        del self.client_origin[bid]
        path = "majority" if majority else "decided"
        acts = []
        for client, rid in waiting:
            acts += self._start_reply(client, rid, bid, path)
        return acts

    def _start_reply(self, client, rid, bid, path, force=False):
        if rid in self.replying and not force:
            return []
        self.replying[rid] = [client, 0]
        self.replied.discard(rid)
        return [Send(client, ClientReply(rid)),
                SetTimer(("reply", rid), self.cfg.delta3),
                Note("reply", (rid, bid, path))]

    def on_reply_ack(self, rid: RequestId, src: str):
        self.replied.add(rid)
        if self.replying.pop(rid, None) is not None:
            return [CancelTimer(("reply", rid))]
        return []

    # -- pulling missing batches ---------------------------------------------

    def on_resend(self, bid: BatchId, src: str):
        batch = self.requests_set.get(bid)
        if batch is not None:
            return [Send(src, ResendReply(batch))]
        if bid in self.log:
            return self._fetch(bid)
        return []

    def _next_peer(self):
        peer = self.peers[self._rr % len(self.peers)]
        self._rr += 1
        return peer

    def _fetch(self, bid):
        if bid in self.fetching:
            return []
        self.fetching.add(bid)
        return [Send(self._next_peer(), Resend(bid)), SetTimer(("fetch", bid), self.cfg.delta5)]

    def on_decided(self, new):
        acts = []
        for _, bid in new:
            if bid in self.ack_tally:
                acts.append(CancelTimer(("vote", bid)))
                acts += self._check_reply(bid)
        return acts

    # -- timers ------------------------------------------------------------

    def on_timer(self, key):
        kind = key[0]
        if kind == "batch":
            return self.flush_batch() + [SetTimer(("batch",), self.cfg.batch_timeout, background=True)]
        if kind == "voteflush":
            bids = tuple(b for b in self.vote_buf if b not in self.log)
            self.vote_buf = []
            return [Multicast(SEQ, IdVote(bids))] if bids else []
        bid = key[1]
        if kind == "vote":
            if bid in self.log:
                return []
            acts = [Multicast(SEQ, IdVote((bid,)))]
            if len(self.ack_tally.get(bid, ())) < len(self.disseminators):
                acts.append(Multicast(DISS, BatchAck(bid), include_self=False))
            acts.append(SetTimer(("vote", bid), self.cfg.delta2))
            return acts
        if kind == "pull":
            src = self.pulls.pop(bid, None)
            if src is None or bid in self.requests_set:
                return []
            return [Send(src, Resend(bid))]
        if kind == "fetch":
            if bid in self.requests_set or bid not in self.fetching:
                self.fetching.discard(bid)
                return []
            return [Send(self._next_peer(), Resend(bid)), SetTimer(("fetch", bid), self.cfg.delta5)]
        if kind == "reply":
            st = self.replying.get(bid)
            if st is None:
                return []
            st[1] += 1
            if st[1] > self.cfg.client_retry_limit:
                del self.replying[bid]
                return [Note("client-failed", (bid, st[0]))]
            return [Send(st[0], ClientReply(bid)), SetTimer(("reply", bid), self.cfg.delta3)]
        raise KeyError(key)

    def idle(self) -> bool:
        return not (self.pending or self.replying or self.pulls or self.fetching or self.vote_buf)
