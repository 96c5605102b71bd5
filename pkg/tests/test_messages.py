import pytest
from hypothesis import given, strategies as st

from htpaxos.messages import (
    DEFAULT_LANS, NOOP, VARIANTS, Batch, BatchAck, BatchId, CatchUp, ClientReply,
    ClientReplyAck, ClientRequest, Decision, DecodeError, ForwardBatch, IdVote, Lan,
    Message, Phase1a, Phase1b, Phase2a, Phase2b, Request, RequestId, Resend,
    ResendReply, decode, encode, lan_of, mint_request_id, size_of,
)


def test_mint_request_id_examples():
    assert mint_request_id(3, 0) == RequestId(3, 0)
    assert mint_request_id(3, 1) == RequestId(3, 1)
    assert mint_request_id(3, 5) != mint_request_id(4, 5)


def test_request_and_batch_invariants():
    with pytest.raises(ValueError):
        Request(RequestId(0, 0), b"")
    with pytest.raises(ValueError):
        Batch(BatchId(0, 0), ())
    assert Request(RequestId(0, 0), b"abc").value_size == 3


def _req(i, size):
    return Request(RequestId(0, i), b"x" * size)


def test_size_examples():
    assert size_of(BatchAck(BatchId(0, 7))) == 68
    batch = Batch(BatchId(0, 7), tuple(_req(i, 1024) for i in range(10)))
    assert size_of(ForwardBatch(batch)) == 10348
    entries = tuple((i, BatchId(i % 7, i)) for i in range(1000))
    assert size_of(Decision(3, entries)) == 8064


def test_size_of_small_variants():
    rid, bid = RequestId(1, 2), BatchId(3, 4)
    assert size_of(ClientRequest(_req(0, 16))) == 64 + 4 + 16
    for p in (IdVote((bid,)), ClientReply(rid), ClientReplyAck(rid), Resend(bid), CatchUp(4)):
        assert size_of(p) == 68
    assert size_of(Phase2a(1, ((0, bid),))) == 76
    assert size_of(Phase2b(1, ((0, bid),))) == 76
    assert size_of(Phase1a(2, 0)) == 68
    assert size_of(Phase1b(2, 2, ((0, 1, bid), (1, 1, bid)))) == 64 + 4 + 16
    # piggybacked acks cost one id each
    b = Batch(bid, (_req(0, 10),))
    assert size_of(ForwardBatch(b, (bid, bid))) == size_of(ForwardBatch(b)) + 8
    assert size_of(ResendReply(b)) == size_of(ForwardBatch(b))


@given(st.lists(st.integers(1, 2000), min_size=1, max_size=20))
def test_size_is_additive_over_batch_contents(sizes):
    reqs = tuple(_req(i, s) for i, s in enumerate(sizes))
    whole = size_of(ForwardBatch(Batch(BatchId(0, 0), reqs)))
    assert whole == 64 + 4 + sum(4 + s for s in sizes)


def test_lan_assignment_is_total():
    assert set(DEFAULT_LANS) == {v.__name__ for v in VARIANTS}
    assert lan_of(ForwardBatch(Batch(BatchId(0, 0), (_req(0, 1),)))) == Lan.FIRST
    assert lan_of(ResendReply(Batch(BatchId(0, 0), (_req(0, 1),)))) == Lan.FIRST
    for p in (BatchAck(NOOP), IdVote(()), Phase2a(0, ()), Decision(0, ())):
        assert lan_of(p) == Lan.SECOND


# --- encoding round trip ---------------------------------------------------------

ints = st.integers(0, 2**31 - 1)
rids = st.builds(RequestId, ints, ints)
bids = st.builds(BatchId, ints, ints)
requests = st.builds(Request, rids, st.binary(min_size=1, max_size=40))
batches = st.builds(Batch, bids, st.lists(requests, min_size=1, max_size=4).map(tuple))
slots = st.lists(st.tuples(ints, bids), max_size=5).map(tuple)

payloads = st.one_of(
    st.builds(ClientRequest, requests),
    st.builds(ForwardBatch, batches, st.lists(bids, max_size=3).map(tuple)),
    st.builds(BatchAck, bids),
    st.builds(IdVote, st.lists(bids, max_size=5).map(tuple)),
    st.builds(ClientReply, rids),
    st.builds(ClientReplyAck, rids),
    st.builds(Resend, bids),
    st.builds(ResendReply, batches),
    st.builds(Phase1a, ints, ints),
    st.builds(Phase1b, ints, ints, st.lists(st.tuples(ints, ints, bids), max_size=4).map(tuple)),
    st.builds(Phase2a, ints, slots),
    st.builds(Phase2b, ints, slots),
    st.builds(Decision, ints, slots, ints),
    st.builds(CatchUp, ints),
)
names = st.text(st.characters(min_codepoint=48, max_codepoint=122), min_size=1, max_size=6)


@given(names, names, st.sampled_from([0, 1]), payloads)
def test_encode_decode_round_trip(src, dst, lan, payload):
    msg = Message(src, dst, lan, payload)
    assert decode(encode(msg)) == msg


def test_decode_rejects_garbage():
    data = encode(Message("a", "b", 1, BatchAck(BatchId(1, 2))))
    with pytest.raises(DecodeError):
        decode(data[:-1])
    with pytest.raises(DecodeError):
        decode(data + b"\0")
    with pytest.raises(DecodeError):
        decode(b"\x09" + data[1:])
