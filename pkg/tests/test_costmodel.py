from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from htpaxos.costmodel import (
    FIGURES, PROTOCOLS, ROLES, SERIES, CostDomainError, CostParams, bytes_at, delay_count,
    figure_csv, figure_table, gap_ratio, inventory, messages_at, total_bytes,
)
from htpaxos.messages import (
    Batch, BatchAck, BatchId, ClientReply, ClientRequest, Decision, ForwardBatch, IdVote,
    Request, RequestId, size_of,
)

N = 1_000_000


@pytest.mark.parametrize("proto,role,expected", [
    ("HT", "disseminator", 4003),
    ("HT", "leader", 1012),
    ("HT", "sequencer", 1003),
    ("HT", "learner", 1001),
    ("Ring", "leader", 2_002_001),
    ("SPaxos", "leader", 1_004_504),
    ("Classical", "leader", 2_502_000),
])
def test_message_counts_at_a_million(proto, role, expected):
    assert messages_at(proto, role, CostParams(N)) == expected


def test_fault_tolerant_leader_adds_disseminator_load():
    p = CostParams(N)
    assert messages_at("HT_FT", "leader", p) == 4003 + 1012


def test_counts_stay_exact_for_fractional_batches():
    assert messages_at("HT", "disseminator", CostParams(1500)) == Fraction(6009, 2)
    assert type(messages_at("HT", "disseminator", CostParams(2000))) is int


def test_zero_rate():
    p = CostParams(0)
    assert messages_at("HT", "disseminator", p) == 3003
    assert messages_at("Ring", "leader", p) == 2001
    b_in, b_out = bytes_at("HT", "disseminator", p)
    # empty batches still carry a header and an id
    assert b_in + b_out == 212268


# --- bytes: brute-force route through real message sizes -------------------------

def _wire_ht_disseminator(n, m, q):
    k = n // m
    req = ClientRequest(Request(RequestId(0, 0), b"x" * q))
    batch = ForwardBatch(Batch(BatchId(0, 0), tuple(Request(RequestId(0, i), b"x" * q) for i in range(k)))
                         if k else Batch(BatchId(0, 0), (Request(RequestId(0, 0), b"x"),)))
    batch_size = size_of(batch) if k else 64 + 4
    ack, vote, reply = BatchAck(BatchId(0, 0)), IdVote((BatchId(0, 0),)), ClientReply(RequestId(0, 0))
    dec = Decision(0, tuple((i, BatchId(i, 0)) for i in range(m)))
    b_in = k * size_of(req) + m * batch_size + m * size_of(ack) + size_of(dec)
    b_out = batch_size + m * size_of(ack) + size_of(vote) + size_of(reply)
    return b_in, b_out


@pytest.mark.parametrize("n,m,q", [(100_000, 1000, 1024), (40, 20, 512), (0, 5, 16), (600, 3, 100)])
def test_ht_disseminator_bytes_match_wire_sizes(n, m, q):
    assert bytes_at("HT", "disseminator", CostParams(n, m, 20, q)) == _wire_ht_disseminator(n, m, q)


def test_frozen_byte_totals_at_1e5():
    p = CostParams(100_000)
    assert total_bytes("HT", "disseminator", p) == 103_224_268
    assert total_bytes("HT", "leader", p) == 80_896
    assert total_bytes("SPaxos", "leader", p) == 171_213_068
    # collected polynomials: n(2o+4w+2q) + m(2o+4w+8) + o and the classical analogue
    assert total_bytes("Ring", "leader", p) == 100_000 * 2192 + 1000 * 152 + 64
    assert bytes_at("Classical", "leader", p) == (
        100_000 * 1092 + 1000 * 500 * 76,
        100_000 * 68 + 1000 * (72 + 100 * 1028) + 1000 * 72,
    )


@given(st.integers(0, 10**6), st.integers(1, 2000), st.integers(3, 50), st.integers(1, 4096))
def test_inventory_sums_to_byte_totals(n, m, s, q):
    p = CostParams(n, m, s, q)
    for proto in PROTOCOLS:
        for role in ROLES[proto]:
            items = inventory(proto, role, p)
            b_in, b_out = bytes_at(proto, role, p)
            assert Fraction(b_in) == sum(Fraction(i.total) for i in items if i.direction == "in")
            assert Fraction(b_out) == sum(Fraction(i.total) for i in items if i.direction == "out")
            assert all(i.count >= 0 and i.size > 0 for i in items)


def test_id_only_decisions_switch():
    a = bytes_at("HT", "learner", CostParams(N))[0]
    b = bytes_at("HT", "learner", CostParams(N, id_only_decisions=True))[0]
    assert a - b == 4 * 1000


# --- delays ----------------------------------------------------------------------

def test_delay_counts():
    assert delay_count("HT") == {"learning_delays": 6, "response_delays": 4}
    assert delay_count("SPaxos") == {"learning_delays": 6, "response_delays": 6}
    assert delay_count("Classical") == {"learning_delays": 4, "response_delays": 4}
    for m in (3, 5, 1000):
        assert delay_count("Ring", m) == {"learning_delays": m + 2, "response_delays": m + 2}


def test_domain_errors():
    with pytest.raises(CostDomainError):
        CostParams(-1)
    with pytest.raises(CostDomainError):
        CostParams(10, m=0)
    with pytest.raises(CostDomainError):
        messages_at("Ring", "disseminator", CostParams(10))
    with pytest.raises(CostDomainError):
        messages_at("Raft", "leader", CostParams(10))
    with pytest.raises(CostDomainError):
        delay_count("Ring")
    with pytest.raises(CostDomainError):
        figure_table(8)


# --- figures ---------------------------------------------------------------------

def test_figure_tables_have_every_series():
    for f, (_, _, series, _) in FIGURES.items():
        header, rows = figure_table(f)
        assert header == ["n", *series]
        assert len(rows) == 10 and rows[0][0] == 100_000 and rows[-1][0] == N
        assert all(name in SERIES for name in series)


def test_figure_one_first_row():
    _, rows = figure_table(1, sweep=(100_000,))
    assert rows == [[100_000, 702_000, 202_001, 1_002_704, 3103]]


def test_fault_tolerant_figures_use_m_sequencers():
    _, rows = figure_table(3, sweep=(N,))
    p = CostParams(N, 1000, 1000)
    assert rows[0][-1] == messages_at("HT_FT", "leader", p) == 4003 + 1000 + 500 + 2


def test_figure_csv_shape():
    assert figure_csv(2, sweep=(100, 2000)).splitlines() == [
        "n,ht_disseminator,ht_leader",
        "100,3003.1000,1012",
        "2000,3005,1012",
    ]


def test_gap_ratio_halves_when_payload_doubles():
    for n in (100_000, 500_000, N):
        assert gap_ratio(n, 512) == 2 * gap_ratio(n, 1024)
