"""Sequencer: id stabilization plus multi-instance Paxos over batch ids."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .actions import ALL, SEQ, CancelTimer, Multicast, Note, Send, SetTimer
from .learner import DecidedLog
from .messages import (
    DECIDED_BALLOT, NOOP, BatchId, Decision, Phase1a, Phase1b, Phase2a, Phase2b,
)


@dataclass(slots=True)
class LocalDecide:
    """Ask the hosting site to record decided entries in its shared log."""

    entries: tuple


@dataclass
class SequencerDisk:
    promised: int = 0
    max_ballot: int = -1          # highest ballot this sequencer ever started
    accepted: dict = field(default_factory=dict)   # inst -> (ballot, bid)
    stable: dict = field(default_factory=dict)     # insertion-ordered set of ids


class Sequencer:
    def __init__(self, node: str, index: int, cfg, disk: SequencerDisk,
                 log: DecidedLog, sequencers: list[str]):
        self.node = node
        self.index = index
        self.cfg = cfg
        self.disk = disk
        self.log = log
        self.sequencers = sequencers
        self.S = len(sequencers)
        self.quorum = len(sequencers) // 2 + 1
        self.vote_quorum = cfg.disseminator_quorum
        self.votes: dict[BatchId, set[str]] = {}
        self.leader = disk.promised % self.S
        self.missed = 0
        self.is_leader = False
        self.electing = False
        self.ballot = -1
        self.low = 0
        self.promises: dict[int, tuple] = {}
        self.proposals: dict[int, BatchId] = {}
        self.p2b: dict[int, set[int]] = {}
        self.proposed_ids: set[BatchId] = set()
        self.recovery: deque = deque()
        self.recovery_insts: set[int] = set()
        self.next_instance = 0
        self.retrying = False
        self.sent_decision = False

    @property
    def stable(self):
        return self.disk.stable

    def start(self):
        acts = [SetTimer(("tick",), self.cfg.heartbeat, background=True)]
        disk = self.disk
        if self.index == 0 and disk.max_ballot < 0 and disk.promised == 0:
            # stable initial leader: ballot 0 is implicitly promised by all
            disk.max_ballot = 0
            self.ballot = 0
            self.is_leader = True
            self.leader = 0
            self.next_instance = self.log.top
        return acts

    # -- stabilization -------------------------------------------------------

    def on_id_vote(self, bids, src: str):
        decided = []
        for bid in bids:
            inst = self.log.where.get(bid)
            if inst is not None:
                decided.append((inst, bid))
                continue
            if bid in self.stable:
                continue
            tally = self.votes.setdefault(bid, set())
            tally.add(src)
            if len(tally) >= self.vote_quorum:
                self.stable[bid] = None
                del self.votes[bid]
        acts = []
        if decided and self.is_leader:
            # the voter missed the decision; answer it directly
            acts.append(Send(src, Decision(self.ballot, tuple(decided), self.log.top)))
        return acts + self.propose()

    # -- leader: phase 2 -----------------------------------------------------

    def propose(self):
        if not self.is_leader:
            return []
        acts, entries = [], []
        alpha = self.cfg.alpha
        props = self.proposals
        if self.next_instance < self.log.top:
            self.next_instance = self.log.top
        while len(props) < alpha and self.recovery:
            inst, bid = self.recovery.popleft()
            if inst in self.log.slots:
                self.recovery_insts.discard(inst)
                continue
            entries.append((inst, bid))
        if not self.recovery_insts and len(props) + len(entries) < alpha:
            for bid in self.stable:
                if len(props) + len(entries) >= alpha:
                    break
                if bid in self.proposed_ids or bid in self.log:
                    continue
                while self.next_instance in self.log.slots:
                    self.next_instance += 1
                entries.append((self.next_instance, bid))
                self.next_instance += 1
        if not entries:
            return acts
        for inst, bid in entries:
            self.disk.accepted[inst] = (self.ballot, bid)
            props[inst] = bid
            self.p2b[inst] = {self.index}
            if bid != NOOP:
                self.proposed_ids.add(bid)
        acts.append(Multicast(SEQ, Phase2a(self.ballot, tuple(entries)), include_self=False))
        acts.append(Note("inflight", len(props)))
        if not self.retrying:
            self.retrying = True
            acts.append(SetTimer(("p2retry",), self.cfg.paxos_retry))
        return acts

    def on_phase2a(self, msg: Phase2a, src: str):
        if msg.ballot < self.disk.promised:
            return []
        acts = self._observe_ballot(msg.ballot)
        self.disk.promised = msg.ballot
        acc = self.disk.accepted
        for inst, bid in msg.entries:
            acc[inst] = (msg.ballot, bid)
        return acts + [Send(src, Phase2b(msg.ballot, msg.entries))]

    def on_phase2b(self, msg: Phase2b, src: str):
        if not self.is_leader or msg.ballot != self.ballot:
            return []
        who = self.sequencers.index(src)
        chosen = []
        for inst, bid in msg.entries:
            if self.proposals.get(inst) != bid:
                continue
            tally = self.p2b[inst]
            if who in tally:
                continue
            tally.add(who)
            if len(tally) == self.quorum:
                chosen.append((inst, bid))
        if not chosen:
            return []
        chosen = tuple(chosen)
        frontier = max(self.log.top, chosen[-1][0] + 1)
        self.sent_decision = True
        return [LocalDecide(chosen),
                Multicast(ALL, Decision(self.ballot, chosen, frontier), include_self=False)]

    def on_decided(self, new):
        """Hook run by the site after entries enter the shared log."""
        stable, votes = self.stable, self.votes
        for inst, bid in new:
            stable.pop(bid, None)
            votes.pop(bid, None)
            self.recovery_insts.discard(inst)
            prop = self.proposals.pop(inst, None)
            if prop is not None:
                self.p2b.pop(inst, None)
                self.proposed_ids.discard(prop)
                if prop != bid and prop != NOOP and prop not in self.log:
                    stable[prop] = None
            self.proposed_ids.discard(bid)
        acts = self.propose()
        if self.retrying and not self.proposals:
            self.retrying = False
            acts.append(CancelTimer(("p2retry",)))
        return acts

    def on_decision(self, msg: Decision, src: str):
        """Leader liveness bookkeeping; the site records the entries."""
        if msg.ballot < self.disk.promised and msg.ballot != DECIDED_BALLOT:
            return []
        return self._observe_ballot(msg.ballot)

    def _observe_ballot(self, ballot: int):
        if ballot == DECIDED_BALLOT:
            return []
        acts = []
        if ballot > self.ballot and (self.is_leader or self.electing):
            acts = self.step_down()
        if ballot >= self.disk.promised:
            self.leader = ballot % self.S
            if self.leader != self.index or self.is_leader:
                self.missed = 0
        return acts

    def step_down(self):
        for inst, bid in self.proposals.items():
            if bid != NOOP and bid not in self.log:
                self.stable.setdefault(bid, None)
        self.is_leader = False
        self.electing = False
        self.proposals.clear()
        self.p2b.clear()
        self.proposed_ids.clear()
        self.recovery.clear()
        self.recovery_insts.clear()
        self.promises.clear()
        self.missed = 0
        acts = []
        if self.retrying:
            self.retrying = False
            acts.append(CancelTimer(("p2retry",)))
        return acts + [CancelTimer(("p1retry",)), Note("step-down", self.ballot)]

    # -- election: phase 1 -------------------------------------------------

    def start_election(self):
        disk = self.disk
        top = max(disk.promised, disk.max_ballot, 0)
        ballot = (top // self.S + 1) * self.S + self.index
        disk.max_ballot = ballot
        disk.promised = ballot
        self.ballot = ballot
        self.electing = True
        self.is_leader = False
        self.missed = 0
        self.low = self.log.prefix
        self.promises = {self.index: self._report(self.low)}
        return [Multicast(SEQ, Phase1a(ballot, self.low), include_self=False),
                SetTimer(("p1retry",), self.cfg.paxos_retry),
                Note("elect", ballot)]

    def _report(self, start: int):
        log = self.log
        out = []
        for inst, (b, bid) in self.disk.accepted.items():
            if inst >= start and inst not in log.slots:
                out.append((inst, b, bid))
        for inst in range(start, log.top):
            bid = log.slots.get(inst)
            if bid is not None:
                out.append((inst, DECIDED_BALLOT, bid))
        out.sort()
        return tuple(out)

    def on_phase1a(self, msg: Phase1a, src: str):
        disk = self.disk
        if msg.ballot < disk.promised or (msg.ballot == disk.promised and self.is_leader):
            return [Send(src, Phase1b(msg.ballot, disk.promised))]
        acts = []
        if self.is_leader or self.electing:
            acts = self.step_down()
        disk.promised = msg.ballot
        self.leader = msg.ballot % self.S
        self.missed = 0
        return acts + [Send(src, Phase1b(msg.ballot, msg.ballot, self._report(msg.from_instance)))]

    def on_phase1b(self, msg: Phase1b, src: str):
        if not self.electing or msg.ballot != self.ballot:
            return []
        if not msg.ok:
            # someone promised a higher ballot; let that candidate proceed
            self.electing = False
            self.disk.promised = max(self.disk.promised, msg.promised)
            self.leader = msg.promised % self.S
            self.missed = 0
            return [CancelTimer(("p1retry",))]
        self.promises[self.sequencers.index(src)] = msg.entries
        if len(self.promises) >= self.quorum:
            return self.become_leader()
        return []

    def become_leader(self):
        best: dict[int, tuple[int, BatchId]] = {}
        for entries in self.promises.values():
            for inst, b, bid in entries:
                held = best.get(inst)
                if held is None or b > held[0]:
                    best[inst] = (b, bid)
        log = self.log
        top = max(best, default=self.low - 1)
        chosen: set[BatchId] = set()
        self.recovery = deque()
        self.recovery_insts = set()
        for inst in range(self.low, top + 1):
            if inst in log.slots:
                continue
            # the highest-ballot report must be re-proposed as is; only true
            # gaps get a no-op
            bid = best.get(inst, (-1, NOOP))[1]
            chosen.add(bid)
            self.recovery.append((inst, bid))
            self.recovery_insts.add(inst)
        for bid in chosen:
            self.stable.pop(bid, None)
        self.electing = False
        self.is_leader = True
        self.leader = self.index
        self.promises = {}
        self.proposals.clear()
        self.p2b.clear()
        self.proposed_ids = set(chosen) - {NOOP}
        self.next_instance = max(top + 1, log.top)
        self.sent_decision = True
        acts = [CancelTimer(("p1retry",)), Note("leader", (self.ballot, len(self.recovery))),
                Multicast(ALL, Decision(self.ballot, (), log.top), include_self=False)]
        return acts + self.propose()

    # -- timers ------------------------------------------------------------

    def on_timer(self, key):
        kind = key[0]
        if kind == "tick":
            acts = [SetTimer(("tick",), self.cfg.heartbeat, background=True)]
            if self.is_leader:
                if not self.sent_decision:
                    acts.append(Multicast(ALL, Decision(self.ballot, (), self.log.top),
                                          include_self=False))
                self.sent_decision = False
                return acts
            if self.electing:
                return acts
            self.missed += 1
            rank = (self.index - self.leader - 1) % self.S
            if self.leader == self.index:
                rank = 0
            if self.missed >= self.cfg.suspect_after + 2 * rank:
                acts += self.start_election()
            return acts
        if kind == "p2retry":
            if not self.is_leader or not self.proposals:
                self.retrying = False
                return []
            entries = tuple(sorted(self.proposals.items()))
            return [Multicast(SEQ, Phase2a(self.ballot, entries), include_self=False),
                    SetTimer(("p2retry",), self.cfg.paxos_retry)]
        if kind == "p1retry":
            if not self.electing:
                return []
            return self.start_election()
        raise KeyError(key)

    def idle(self) -> bool:
        return not (self.proposals or self.stable or self.electing or self.recovery)
