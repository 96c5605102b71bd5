"""Outputs of agent handlers, consumed by the simulation kernel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable

from .messages import BatchAck, Decision, ForwardBatch, IdVote, Phase2a, Phase2b

# Multicast groups.  Membership is resolved by the kernel from the topology.
DL = "@dl"        # disseminators and standalone learners (first LAN)
DISS = "@diss"    # disseminators only
SEQ = "@seq"      # sequencers
ALL = "@all"      # sequencers, disseminators and learners


@dataclass(slots=True)
class Send:
    dst: str
    payload: Any


@dataclass(slots=True)
class Multicast:
    group: str
    payload: Any
    include_self: bool = True


@dataclass(slots=True)
class SetTimer:
    key: Hashable
    delay: int
    background: bool = False


@dataclass(slots=True)
class CancelTimer:
    key: Hashable


@dataclass(slots=True)
class Note:
    """A state-transition summary recorded in the trace (never sent)."""

    kind: str
    data: Any = None


def _merge_ids(a, b):
    seen = set(a)
    return a + tuple(x for x in b if x not in seen)


def coalesce(actions: list, piggyback: bool = False) -> list:
    """Merge same-instant messages of one kind bound for the same destination.

    IdVotes to a group become one IdVote, Phase2a/Phase2b/Decision messages
    under the same ballot merge their entries.  With ``piggyback`` the node's
    outgoing BatchAcks ride on its own ForwardBatch multicast, when there is
    one.
    """
    out: list = []
    index: dict = {}
    batch_at = None
    acks: list = []
    for act in actions:
        if type(act) is Send and piggyback and type(act.payload) is BatchAck:
            acks.append(act)
            continue
        p = getattr(act, "payload", None)
        t = type(p)
        key = None
        if type(act) is Multicast:
            if t is IdVote:
                key = ("vote", act.group, act.include_self)
            elif t is Phase2a:
                key = ("p2a", act.group, act.include_self, p.ballot)
            elif t is Decision:
                key = ("dec", act.group, act.include_self, p.ballot)
            elif t is ForwardBatch and batch_at is None:
                batch_at = len(out)
        elif type(act) is Send:
            if t is Phase2b:
                key = ("p2b", act.dst, p.ballot)
            elif t is Decision:
                key = ("dec1", act.dst, p.ballot)
        if key is None:
            out.append(act)
            continue
        at = index.get(key)
        if at is None:
            index[key] = len(out)
            out.append(act)
            continue
        prev = out[at]
        q = prev.payload
        if t is IdVote:
            merged = IdVote(_merge_ids(q.batch_ids, p.batch_ids))
        elif t is Decision:
            merged = Decision(q.ballot, _merge_ids(q.entries, p.entries), max(q.frontier, p.frontier))
        else:
            merged = t(q.ballot, _merge_ids(q.entries, p.entries))
        if type(prev) is Multicast:
            out[at] = Multicast(prev.group, merged, prev.include_self)
        else:
            out[at] = Send(prev.dst, merged)
    if acks:
        if batch_at is None:
            out.extend(acks)
        else:
            fb = out[batch_at]
            ids = fb.payload.acks + tuple(a.payload.batch_id for a in acks)
            out[batch_at] = Multicast(fb.group, ForwardBatch(fb.payload.batch, ids), fb.include_self)
    return out
