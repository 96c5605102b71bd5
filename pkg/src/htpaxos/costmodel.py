"""Closed-form per-node message, byte and delay counts for four Paxos variants.

All arithmetic is exact: batch sizes n/m are ``Fraction`` values, and counts
are returned as ``int`` whenever they are integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

PROTOCOLS = ("HT", "HT_FT", "SPaxos", "Ring", "Classical")
ROLES = {
    "HT": ("disseminator", "leader", "sequencer", "learner"),
    "HT_FT": ("leader", "sequencer"),
    "SPaxos": ("leader",),
    "Ring": ("leader",),
    "Classical": ("leader",),
}


class CostDomainError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    n: int                      # requests per unit time
    m: int = 1000               # disseminators / replicas / acceptors
    s: int = 20                 # sequencers
    request_size: int = 1024
    overhead: int = 64
    id_size: int = 4
    # size decisions at 4 bytes per id, leaving out instance numbers
    id_only_decisions: bool = False

    def __post_init__(self):
        if self.n < 0 or self.m < 1 or self.s < 1:
            raise CostDomainError("need n >= 0, m >= 1, s >= 1")

    @property
    def k(self) -> Fraction:
        return Fraction(self.n, self.m)


def _exact(x):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else x


def _check(protocol, role):
    if protocol not in ROLES:
        raise CostDomainError(f"unknown protocol {protocol!r}")
    if role not in ROLES[protocol]:
        raise CostDomainError(f"{protocol} has no {role!r} role in the model")


def messages_at(protocol: str, role: str, p: CostParams):
    """Total (incoming + outgoing) messages per unit time at one node."""
    _check(protocol, role)
    n, m, s, k = p.n, p.m, p.s, p.k
    if protocol == "HT":
        if role == "disseminator":
            return _exact(3 * m + k + 3)
        if role == "leader":
            return _exact(m + s // 2 + 2)
        if role == "sequencer":
            return _exact(m + 3)
        return _exact(m + 1)
    if protocol == "HT_FT":
        diss = messages_at("HT", "disseminator", p)
        return _exact(diss + messages_at("HT", role, p))
    if protocol == "Ring":
        return _exact(2 * (n + m) + 1)
    if protocol == "SPaxos":
        return _exact(m * m + 2 * k + 2 * m + m // 2 + 4)
    return _exact(2 * (n + m) + m * (m // 2))


@dataclass(frozen=True)
class Item:
    direction: str      # "in" or "out"
    name: str
    count: Fraction
    size: Fraction

    @property
    def total(self):
        return _exact(self.count * self.size)


def _sizes(p: CostParams):
    o, w, q, k, m = p.overhead, p.id_size, p.request_size, p.k, p.m
    per_entry = w if p.id_only_decisions else 2 * w
    return {
        "request": o + w + q,                   # ClientRequest
        "batch": o + w + k * (w + q),           # ForwardBatch of n/m requests
        "id": o + w,                            # BatchAck / IdVote / reply
        "p2a_ids": o + 2 * w + m * w,           # Phase2a carrying m batch ids
        "p2b": o + 3 * w,                       # Phase2b (round, instance, id)
        "decision_ids": o + per_entry * m,      # Decision carrying m batch ids
        "ring_msg": o + 2 * w + k * w,          # ring message with the batch's ids
        "batch_ballot": o + 2 * w + k * (w + q),  # batch inside a ballot message
        "decision_one": o + 2 * w,              # decision for one instance
    }


def inventory(protocol: str, role: str, p: CostParams) -> list[Item]:
    """Itemized per-unit-time traffic at one node, by message category."""
    _check(protocol, role)
    z = _sizes(p)
    n, m, s, k = p.n, p.m, p.s, p.k
    F = Fraction
    if protocol == "HT_FT":
        return inventory("HT", "disseminator", p) + inventory("HT", role, p)
    if protocol == "HT":
        if role == "disseminator":
            return [
                Item("in", "client requests", k, z["request"]),
                Item("in", "batches", F(m), z["batch"]),
                Item("in", "batch acks", F(m), z["id"]),
                Item("in", "decision", F(1), z["decision_ids"]),
                Item("out", "own batch multicast", F(1), z["batch"]),
                Item("out", "batch acks", F(m), z["id"]),
                Item("out", "id vote multicast", F(1), z["id"]),
                Item("out", "client reply", F(1), z["id"]),
            ]
        if role == "leader":
            return [
                Item("in", "id votes", F(m), z["id"]),
                Item("in", "phase 2b", F(s // 2), z["p2b"]),
                Item("out", "phase 2a multicast", F(1), z["p2a_ids"]),
                Item("out", "decision multicast", F(1), z["decision_ids"]),
            ]
        if role == "sequencer":
            return [
                Item("in", "id votes", F(m), z["id"]),
                Item("in", "phase 2a", F(1), z["p2a_ids"]),
                Item("in", "decision", F(1), z["decision_ids"]),
                Item("out", "phase 2b", F(1), z["p2b"]),
            ]
        return [
            Item("in", "batches", F(m), z["batch"]),
            Item("in", "decision", F(1), z["decision_ids"]),
        ]
    if protocol == "Ring":
        return [
            Item("in", "client requests", F(n), z["request"]),
            Item("in", "ring messages", F(m), z["ring_msg"]),
            Item("out", "client replies", F(n), z["id"]),
            Item("out", "batch multicasts", F(m), z["batch_ballot"]),
            Item("out", "decision multicast", F(1), z["decision_ids"]),
        ]
    if protocol == "SPaxos":
        return [
            Item("in", "client requests", k, z["request"]),
            Item("in", "batches", F(m), z["batch"]),
            Item("in", "batch acks", F(m * m), z["id"]),
            Item("in", "phase 2b", F(m // 2), z["p2b"]),
            Item("in", "decision from self", F(1), z["decision_ids"]),
            Item("out", "client replies", k, z["id"]),
            Item("out", "ack multicasts", F(m), z["id"]),
            Item("out", "own batch multicast", F(1), z["batch"]),
            Item("out", "phase 2a multicast", F(1), z["p2a_ids"]),
            Item("out", "decision multicast", F(1), z["decision_ids"]),
        ]
    return [
        Item("in", "client requests", F(n), z["request"]),
        Item("in", "phase 2b", F(m * (m // 2)), z["p2b"]),
        Item("out", "client replies", F(n), z["id"]),
        Item("out", "phase 2a multicasts", F(m), z["batch_ballot"]),
        Item("out", "decision multicasts", F(m), z["decision_one"]),
    ]


def bytes_at(protocol: str, role: str, p: CostParams):
    """``(bytes_in, bytes_out)`` per unit time at one node."""
    items = inventory(protocol, role, p)
    b_in = sum((Fraction(i.total) for i in items if i.direction == "in"), Fraction(0))
    b_out = sum((Fraction(i.total) for i in items if i.direction == "out"), Fraction(0))
    return _exact(b_in), _exact(b_out)


def total_bytes(protocol: str, role: str, p: CostParams):
    b_in, b_out = bytes_at(protocol, role, p)
    return _exact(Fraction(b_in) + Fraction(b_out))


def delay_count(protocol: str, m: int | None = None) -> dict:
    """Best-case message delays for learning and for answering the client."""
    if protocol in ("HT", "HT_FT"):
        return {"learning_delays": 6, "response_delays": 4}
    if protocol == "SPaxos":
        return {"learning_delays": 6, "response_delays": 6}
    if protocol == "Classical":
        return {"learning_delays": 4, "response_delays": 4}
    if protocol == "Ring":
        if m is None or m < 1:
            raise CostDomainError("Ring delays need m >= 1")
        return {"learning_delays": m + 2, "response_delays": m + 2}
    raise CostDomainError(f"unknown protocol {protocol!r}")


# --- figure tables ---------------------------------------------------------------

SERIES = {
    "classical_leader": ("Classical", "leader"),
    "ring_leader": ("Ring", "leader"),
    "spaxos_leader": ("SPaxos", "leader"),
    "ht_disseminator": ("HT", "disseminator"),
    "ht_leader": ("HT", "leader"),
    "ht_ft_leader": ("HT_FT", "leader"),
}

# figure -> (measure, request size or None, series, sequencers equal m)
FIGURES = {
    1: ("messages", None, ("classical_leader", "ring_leader", "spaxos_leader", "ht_disseminator"), False),
    2: ("messages", None, ("ht_disseminator", "ht_leader"), False),
    3: ("messages", None, ("classical_leader", "ring_leader", "spaxos_leader", "ht_ft_leader"), True),
    4: ("bytes", 1024, ("classical_leader", "ring_leader", "spaxos_leader", "ht_disseminator", "ht_leader"), False),
    5: ("bytes", 1024, ("ring_leader", "spaxos_leader", "ht_disseminator", "ht_leader"), False),
    6: ("bytes", 512, ("ring_leader", "spaxos_leader", "ht_disseminator", "ht_leader"), False),
    7: ("bytes", 512, ("ring_leader", "spaxos_leader", "ht_ft_leader"), True),
}

DEFAULT_SWEEP = tuple(range(100_000, 1_000_001, 100_000))


def figure_table(figure: int, sweep=DEFAULT_SWEEP, p: CostParams | None = None):
    """Header and rows for one figure; bytes columns are in+out totals."""
    if figure not in FIGURES:
        raise CostDomainError(f"no figure {figure}; choose 1..7")
    measure, req, series, fault_tolerant = FIGURES[figure]
    base = p or CostParams(n=0)
    header = ["n"] + list(series)
    rows = []
    for n in sweep:
        q = CostParams(n, base.m, base.m if fault_tolerant else base.s,
                       req if req is not None else base.request_size,
                       base.overhead, base.id_size, base.id_only_decisions)
        row = [n]
        for name in series:
            proto, role = SERIES[name]
            row.append(messages_at(proto, role, q) if measure == "messages" else total_bytes(proto, role, q))
        rows.append(row)
    return header, rows


def _cell(v) -> str:
    # non-integral counts only arise when m does not divide n
    return str(v) if isinstance(v, int) else f"{float(v):.4f}"


def figure_csv(figure: int, sweep=DEFAULT_SWEEP, p: CostParams | None = None) -> str:
    header, rows = figure_table(figure, sweep, p)
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def gap_ratio(n: int, request_size: int, m: int = 1000, s: int = 20) -> Fraction:
    """(S-Paxos leader bytes - HT disseminator bytes) relative to request payload."""
    p = CostParams(n, m, s, request_size)
    gap = Fraction(total_bytes("SPaxos", "leader", p)) - Fraction(total_bytes("HT", "disseminator", p))
    return gap / (n * request_size)
