"""Decided log and the learner agent."""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import Note, Send, SetTimer, CancelTimer
from .messages import NOOP, Batch, BatchId, Resend


class DecidedLog:
    """Instance-indexed log of decided batch ids (kept on stable storage).

    Co-located agents on one site share a single instance.
    """

    def __init__(self):
        self.slots: dict[int, BatchId] = {}
        self.where: dict[BatchId, int] = {}
        self.prefix = 0
        self.top = 0

    @property
    def ids(self):
        return self.where.keys()

    def __contains__(self, bid) -> bool:
        return bid in self.where

    def apply(self, entries):
        """Record decided (instance, id) pairs.

        Returns ``(new, conflicts)`` where conflicts are
        ``(instance, held, offered)`` triples; a conflicting entry never
        overwrites the held value.
        """
        new, conflicts = [], []
        slots = self.slots
        for inst, bid in entries:
            held = slots.get(inst)
            if held is not None:
                if held != bid:
                    conflicts.append((inst, held, bid))
                continue
            slots[inst] = bid
            if bid != NOOP:
                self.where.setdefault(bid, inst)
            if inst >= self.top:
                self.top = inst + 1
            new.append((inst, bid))
        while self.prefix in slots:
            self.prefix += 1
        return new, conflicts

    def behind(self, frontier: int) -> bool:
        return self.prefix < max(frontier, self.top)

    def entries_from(self, start: int, limit: int = 64):
        out = []
        for inst in range(start, self.top):
            bid = self.slots.get(inst)
            if bid is not None:
                out.append((inst, bid))
                if len(out) >= limit:
                    break
        return tuple(out)


def decision_notes(new, conflicts) -> list:
    acts = [Note("decide", (inst, bid)) for inst, bid in new]
    acts += [Note("violation", (inst, held, offered)) for inst, held, offered in conflicts]
    return acts


@dataclass
class LearnerDisk:
    executed: list = field(default_factory=list)
    seen: set = field(default_factory=set)
    frontier: int = 0
    # only used by a standalone learner; a co-located one reads its
    # disseminator's set
    requests_set: dict = field(default_factory=dict)


class Learner:
    """Executes decided batches in instance order, each request at most once."""

    def __init__(self, node: str, cfg, disk: LearnerDisk, log: DecidedLog,
                 requests_set: dict | None, disseminators: list[str]):
        self.node = node
        self.cfg = cfg
        self.disk = disk
        self.log = log
        self.standalone = requests_set is None
        self.requests_set = disk.requests_set if self.standalone else requests_set
        self.peers = [d for d in disseminators if d != node]
        self.fetching: set[BatchId] = set()
        self._rr = 0

    @property
    def executed(self):
        return self.disk.executed

    @property
    def exec_frontier(self):
        return self.disk.frontier

    def start(self):
        acts = []
        for inst in range(self.disk.frontier, self.log.top):
            bid = self.log.slots.get(inst)
            if bid is not None and bid != NOOP and bid not in self.requests_set:
                acts += self._fetch(bid)
        return acts + self.execute_ready()

    def on_batch(self, batch: Batch):
        if self.standalone:
            self.requests_set.setdefault(batch.id, batch)
        acts = []
        if batch.id in self.fetching:
            self.fetching.discard(batch.id)
            acts.append(CancelTimer(("lfetch", batch.id)))
        return acts + self.execute_ready()

    def on_order(self, instance: int, batch_id: BatchId):
        """Record one decided slot; used when the learner owns its log."""
        new, conflicts = self.log.apply(((instance, batch_id),))
        return decision_notes(new, conflicts) + self.on_decided(new)

    def on_decided(self, new):
        acts = []
        for _, bid in new:
            if bid != NOOP and bid not in self.requests_set:
                acts += self._fetch(bid)
        return acts + self.execute_ready()

    def _next_peer(self):
        peer = self.peers[self._rr % len(self.peers)]
        self._rr += 1
        return peer

    def _fetch(self, bid):
        if bid in self.fetching:
            return []
        self.fetching.add(bid)
        return [Send(self._next_peer(), Resend(bid)),
                SetTimer(("lfetch", bid), self.cfg.delta6)]

    def on_timer(self, key):
        bid = key[1]
        if bid in self.requests_set or bid not in self.fetching:
            self.fetching.discard(bid)
            return []
        return [Send(self._next_peer(), Resend(bid)),
                SetTimer(("lfetch", bid), self.cfg.delta6)]

    def execute_ready(self):
        disk = self.disk
        slots = self.log.slots
        ran = []
        while True:
            bid = slots.get(disk.frontier)
            if bid is None:
                break
            if bid != NOOP:
                batch = self.requests_set.get(bid)
                if batch is None:
                    break
                for req in batch.requests:
                    if req.id not in disk.seen:
                        disk.seen.add(req.id)
                        disk.executed.append(req.id)
                        ran.append(req.id)
            disk.frontier += 1
        if ran:
            return [Note("execute", tuple(ran))]
        return []

    def idle(self) -> bool:
        return not self.fetching and self.disk.frontier == self.log.prefix
