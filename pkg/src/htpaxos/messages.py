"""Identifiers, requests, batches and wire messages.

Every message variant exchanged by clients, disseminators, sequencers and
learners lives here, together with the byte-size accounting rule shared by the
simulator counters and the cost model, the default variant -> LAN mapping, and
a versioned binary layout (used for round-trip tests and trace tooling only;
the simulator passes in-memory values).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

OVERHEAD = 64
ID_SIZE = 4

WIRE_VERSION = 1


class Lan(IntEnum):
    FIRST = 0
    SECOND = 1


@dataclass(frozen=True, slots=True, order=True)
class RequestId:
    client_id: int
    client_seq: int

    def __str__(self) -> str:
        return f"r{self.client_id}.{self.client_seq}"


@dataclass(frozen=True, slots=True, order=True)
class BatchId:
    disseminator_id: int
    batch_seq: int

    def __str__(self) -> str:
        if self == NOOP:
            return "noop"
        return f"b{self.disseminator_id}.{self.batch_seq}"


# Filler value decided for gap instances after a leader change.
NOOP = BatchId(-1, -1)


def mint_request_id(client_id: int, next_seq: int) -> RequestId:
    """Return the id for a client's next request; the caller bumps its counter."""
    return RequestId(client_id, next_seq)


@dataclass(frozen=True, slots=True)
class Request:
    id: RequestId
    value: bytes

    def __post_init__(self):
        if not self.value:
            raise ValueError("request value must be non-empty")

    @property
    def value_size(self) -> int:
        return len(self.value)


@dataclass(frozen=True, slots=True)
class Batch:
    id: BatchId
    requests: tuple[Request, ...]

    def __post_init__(self):
        if not self.requests:
            raise ValueError("a batch holds at least one request")


# --- message payloads -------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ClientRequest:
    request: Request


@dataclass(frozen=True, slots=True)
class ForwardBatch:
    batch: Batch
    # acks riding on the batch multicast (piggyback optimization); each
    # receiver picks out the ones for batches it minted
    acks: tuple[BatchId, ...] = ()


@dataclass(frozen=True, slots=True)
class BatchAck:
    batch_id: BatchId


@dataclass(frozen=True, slots=True)
class IdVote:
    batch_ids: tuple[BatchId, ...]


@dataclass(frozen=True, slots=True)
class ClientReply:
    request_id: RequestId


@dataclass(frozen=True, slots=True)
class ClientReplyAck:
    request_id: RequestId


@dataclass(frozen=True, slots=True)
class Resend:
    batch_id: BatchId


@dataclass(frozen=True, slots=True)
class ResendReply:
    batch: Batch


@dataclass(frozen=True, slots=True)
class Phase1a:
    ballot: int
    from_instance: int


@dataclass(frozen=True, slots=True)
class Phase1b:
    ballot: int
    promised: int
    # (instance, accepted ballot, value); decided slots carry DECIDED_BALLOT
    entries: tuple[tuple[int, int, BatchId], ...] = ()

    @property
    def ok(self) -> bool:
        return self.promised == self.ballot


@dataclass(frozen=True, slots=True)
class Phase2a:
    ballot: int
    entries: tuple[tuple[int, BatchId], ...]


@dataclass(frozen=True, slots=True)
class Phase2b:
    ballot: int
    entries: tuple[tuple[int, BatchId], ...]


@dataclass(frozen=True, slots=True)
class Decision:
    ballot: int
    entries: tuple[tuple[int, BatchId], ...]
    # length of the sender's gap-free decided prefix; lets receivers notice
    # a lost trailing decision (an entry-less Decision is the leader heartbeat)
    frontier: int = 0


@dataclass(frozen=True, slots=True)
class CatchUp:
    from_instance: int


Payload = Union[
    ClientRequest, ForwardBatch, BatchAck, IdVote, ClientReply, ClientReplyAck,
    Resend, ResendReply, Phase1a, Phase1b, Phase2a, Phase2b, Decision, CatchUp,
]

VARIANTS: tuple[type, ...] = (
    ClientRequest, ForwardBatch, BatchAck, IdVote, ClientReply, ClientReplyAck,
    Resend, ResendReply, Phase1a, Phase1b, Phase2a, Phase2b, Decision, CatchUp,
)

# A ballot larger than any real one; marks slots an acceptor knows are decided.
DECIDED_BALLOT = 2**31 - 1

DEFAULT_LANS: dict[str, int] = {
    "ClientRequest": Lan.FIRST,
    "ForwardBatch": Lan.FIRST,
    "ResendReply": Lan.FIRST,
    "BatchAck": Lan.SECOND,
    "IdVote": Lan.SECOND,
    "ClientReply": Lan.SECOND,
    "ClientReplyAck": Lan.SECOND,
    "Resend": Lan.SECOND,
    "Phase1a": Lan.SECOND,
    "Phase1b": Lan.SECOND,
    "Phase2a": Lan.SECOND,
    "Phase2b": Lan.SECOND,
    "Decision": Lan.SECOND,
    "CatchUp": Lan.SECOND,
}


def lan_of(payload, table: dict[str, int] | None = None) -> int:
    return (table or DEFAULT_LANS)[type(payload).__name__]


def _batch_bytes(batch: Batch) -> int:
    return ID_SIZE + sum(ID_SIZE + r.value_size for r in batch.requests)


def size_of(payload) -> int:
    """Accounted size in bytes: fixed overhead plus 4 bytes per id-like field.

    Composite ids (client, seq) and (disseminator, seq) count as one 4-byte
    field each.
    """
    t = type(payload)
    if t is ClientRequest:
        body = ID_SIZE + payload.request.value_size
    elif t is ForwardBatch:
        body = _batch_bytes(payload.batch) + ID_SIZE * len(payload.acks)
    elif t is ResendReply:
        body = _batch_bytes(payload.batch)
    elif t is IdVote:
        body = ID_SIZE * len(payload.batch_ids)
    elif t in (BatchAck, ClientReply, ClientReplyAck, Resend, CatchUp):
        body = ID_SIZE
    elif t is Phase1a:
        body = ID_SIZE
    elif t is Phase1b:
        body = ID_SIZE + 2 * ID_SIZE * len(payload.entries)
    elif t is Phase2a or t is Phase2b:
        body = ID_SIZE + 2 * ID_SIZE * len(payload.entries)
    elif t is Decision:
        body = 2 * ID_SIZE * len(payload.entries)
    else:
        raise TypeError(f"not a message payload: {payload!r}")
    return OVERHEAD + body


@dataclass(frozen=True, slots=True)
class Message:
    """A payload with its routing envelope."""

    src: str
    dst: str
    lan: int
    payload: Payload

    @property
    def variant(self) -> str:
        return type(self.payload).__name__

    @property
    def size(self) -> int:
        return size_of(self.payload)


# --- binary layout ----------------------------------------------------------
#
# version 1, big-endian:
#   header   u8 version | u8 variant index | u8 lan | str src | str dst
#   str      u16 length | utf-8 bytes
#   rid      i32 client_id | i32 client_seq
#   bid      i32 disseminator_id | i32 batch_seq
#   request  rid | u32 length | value bytes
#   batch    bid | u32 count | request*
#   list     u32 count | item*
# Variant bodies follow field declaration order.

class DecodeError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u8(self, v):
        self.parts.append(struct.pack(">B", v))

    def u32(self, v):
        self.parts.append(struct.pack(">I", v))

    def i32(self, v):
        self.parts.append(struct.pack(">i", v))

    def i64(self, v):
        self.parts.append(struct.pack(">q", v))

    def text(self, s: str):
        raw = s.encode()
        self.parts.append(struct.pack(">H", len(raw)) + raw)

    def rid(self, r: RequestId):
        self.parts.append(struct.pack(">ii", r.client_id, r.client_seq))

    def bid(self, b: BatchId):
        self.parts.append(struct.pack(">ii", b.disseminator_id, b.batch_seq))

    def request(self, r: Request):
        self.rid(r.id)
        self.u32(len(r.value))
        self.parts.append(r.value)

    def batch(self, b: Batch):
        self.bid(b.id)
        self.u32(len(b.requests))
        for r in b.requests:
            self.request(r)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise DecodeError("truncated message")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def u8(self):
        return self._take(">B")[0]

    def u32(self):
        return self._take(">I")[0]

    def i32(self):
        return self._take(">i")[0]

    def i64(self):
        return self._take(">q")[0]

    def raw(self, n):
        if self.pos + n > len(self.data):
            raise DecodeError("truncated message")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def text(self):
        (n,) = self._take(">H")
        return self.raw(n).decode()

    def rid(self):
        return RequestId(*self._take(">ii"))

    def bid(self):
        return BatchId(*self._take(">ii"))

    def request(self):
        rid = self.rid()
        return Request(rid, self.raw(self.u32()))

    def batch(self):
        bid = self.bid()
        return Batch(bid, tuple(self.request() for _ in range(self.u32())))


def _write_slots(w: _Writer, entries):
    w.u32(len(entries))
    for inst, bid in entries:
        w.i64(inst)
        w.bid(bid)


def _read_slots(r: _Reader):
    return tuple((r.i64(), r.bid()) for _ in range(r.u32()))


def _write_bids(w: _Writer, bids):
    w.u32(len(bids))
    for b in bids:
        w.bid(b)


def _read_bids(r: _Reader):
    return tuple(r.bid() for _ in range(r.u32()))


def encode(msg: Message) -> bytes:
    w = _Writer()
    p = msg.payload
    w.u8(WIRE_VERSION)
    w.u8(VARIANTS.index(type(p)))
    w.u8(msg.lan)
    w.text(msg.src)
    w.text(msg.dst)
    t = type(p)
    if t is ClientRequest:
        w.request(p.request)
    elif t is ForwardBatch:
        w.batch(p.batch)
        _write_bids(w, p.acks)
    elif t is ResendReply:
        w.batch(p.batch)
    elif t in (BatchAck, Resend):
        w.bid(p.batch_id)
    elif t is IdVote:
        _write_bids(w, p.batch_ids)
    elif t in (ClientReply, ClientReplyAck):
        w.rid(p.request_id)
    elif t is Phase1a:
        w.i64(p.ballot)
        w.i64(p.from_instance)
    elif t is Phase1b:
        w.i64(p.ballot)
        w.i64(p.promised)
        w.u32(len(p.entries))
        for inst, bal, bid in p.entries:
            w.i64(inst)
            w.i64(bal)
            w.bid(bid)
    elif t in (Phase2a, Phase2b):
        w.i64(p.ballot)
        _write_slots(w, p.entries)
    elif t is Decision:
        w.i64(p.ballot)
        _write_slots(w, p.entries)
        w.i64(p.frontier)
    elif t is CatchUp:
        w.i64(p.from_instance)
    return b"".join(w.parts)


def decode(data: bytes) -> Message:
    r = _Reader(data)
    version = r.u8()
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version}")
    idx = r.u8()
    if idx >= len(VARIANTS):
        raise DecodeError(f"unknown variant {idx}")
    t = VARIANTS[idx]
    lan = r.u8()
    src = r.text()
    dst = r.text()
    if t is ClientRequest:
        p = ClientRequest(r.request())
    elif t is ForwardBatch:
        batch = r.batch()
        p = ForwardBatch(batch, _read_bids(r))
    elif t is ResendReply:
        p = ResendReply(r.batch())
    elif t in (BatchAck, Resend):
        p = t(r.bid())
    elif t is IdVote:
        p = IdVote(_read_bids(r))
    elif t in (ClientReply, ClientReplyAck):
        p = t(r.rid())
    elif t is Phase1a:
        p = Phase1a(r.i64(), r.i64())
    elif t is Phase1b:
        ballot, promised = r.i64(), r.i64()
        entries = tuple((r.i64(), r.i64(), r.bid()) for _ in range(r.u32()))
        p = Phase1b(ballot, promised, entries)
    elif t in (Phase2a, Phase2b):
        ballot = r.i64()
        p = t(ballot, _read_slots(r))
    elif t is Decision:
        ballot = r.i64()
        entries = _read_slots(r)
        p = Decision(ballot, entries, r.i64())
    else:
        p = CatchUp(r.i64())
    if r.pos != len(data):
        raise DecodeError("trailing bytes after message")
    return Message(src, dst, lan, p)
