"""Deterministic discrete-event kernel: two simulated LANs, timers, crashes.

Agents are plain state machines returning action lists; the kernel turns
those into scheduled deliveries and timer firings.  Everything random is
drawn from seeded ``random.Random`` streams, so a (scenario, seed) pair
always yields the same trace.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import random
from dataclasses import dataclass, field

from .actions import ALL, DISS, DL, SEQ, CancelTimer, Multicast, Note, Send, SetTimer, coalesce
from .config import Scenario, scenario_to_dict
from .dissemination import Client, Disseminator, DisseminatorDisk
from .learner import DecidedLog, Learner, LearnerDisk, decision_notes
from .messages import (
    DECIDED_BALLOT, NOOP, BatchAck, BatchId, CatchUp, ClientReply, ClientReplyAck,
    ClientRequest, Decision, ForwardBatch, IdVote, Phase1a, Phase1b, Phase2a,
    Phase2b, RequestId, Resend, ResendReply, lan_of, size_of, DEFAULT_LANS,
)
from .ordering import LocalDecide, Sequencer, SequencerDisk

# event kinds, ordered so ties at one instant are broken by scheduling order
_DELIVER, _TIMER, _CRASH, _RESTART, _START = range(5)


class Site:
    """Every agent hosted on one node, sharing a single decided log."""

    def __init__(self, node: str, sc: Scenario, topo: "Topology", disks: dict):
        cfg = sc.config
        self.node = node
        self.cfg = cfg
        self.disks = disks
        self.log: DecidedLog = disks.setdefault("log", DecidedLog())
        self.diss = self.learner = self.seq = None
        if node in topo.disseminators:
            d = disks.setdefault("diss", DisseminatorDisk())
            self.diss = Disseminator(node, topo.disseminators.index(node), cfg, d,
                                     self.log, topo.disseminators)
            if cfg.colocate_learners:
                ld = disks.setdefault("learner", LearnerDisk())
                self.learner = Learner(node, cfg, ld, self.log, d.requests_set, topo.disseminators)
        elif node in topo.learners:
            ld = disks.setdefault("learner", LearnerDisk())
            self.learner = Learner(node, cfg, ld, self.log, None, topo.disseminators)
        if node in topo.sequencers:
            sd = disks.setdefault("seq", SequencerDisk())
            self.seq = Sequencer(node, topo.sequencers.index(node), cfg, sd, self.log,
                                 topo.sequencers)
        self.sequencers = topo.sequencers
        self.leader_hint = topo.sequencers[0]
        self.frontier_seen = 0
        self.catching_up = False

    def start(self):
        acts = []
        for agent in (self.diss, self.learner, self.seq):
            if agent is not None:
                acts += agent.start()
        return self._expand(acts)

    def _expand(self, acts):
        if not any(type(a) is LocalDecide for a in acts):
            return acts
        out = []
        for a in acts:
            if type(a) is LocalDecide:
                out += self.apply_decided(a.entries)
            else:
                out.append(a)
        return out

    def apply_decided(self, entries):
        new, conflicts = self.log.apply(entries)
        acts = decision_notes(new, conflicts)
        if new:
            if self.diss is not None:
                acts += self.diss.on_decided(new)
            if self.seq is not None:
                acts += self.seq.on_decided(new)
            if self.learner is not None:
                acts += self.learner.on_decided(new)
        return self._expand(acts)

    def handle(self, p, src: str):
        t = type(p)
        if t is ForwardBatch or t is ResendReply:
            acts = []
            if self.diss is not None:
                acts += self.diss.on_forward_batch(p.batch, src)
                if t is ForwardBatch:
                    me = self.diss.index
                    for bid in p.acks:
                        if bid.disseminator_id == me:
                            acts += self.diss.on_batch_ack(bid, src)
            if self.learner is not None:
                acts += self.learner.on_batch(p.batch)
            return acts
        if t is Decision:
            return self.on_decision(p, src)
        if t is IdVote:
            return self._expand(self.seq.on_id_vote(p.batch_ids, src)) if self.seq else []
        if t is BatchAck:
            return self.diss.on_batch_ack(p.batch_id, src) if self.diss else []
        if t is ClientRequest:
            return self.diss.on_client_request(p.request, src) if self.diss else []
        if t is ClientReplyAck:
            return self.diss.on_reply_ack(p.request_id, src) if self.diss else []
        if t is Resend:
            return self.diss.on_resend(p.batch_id, src) if self.diss else []
        if t is CatchUp:
            return [Send(src, Decision(DECIDED_BALLOT, self.log.entries_from(p.from_instance),
                                       self.log.top))]
        if self.seq is None:
            return []
        if t is Phase2a:
            return self._expand(self.seq.on_phase2a(p, src))
        if t is Phase2b:
            return self._expand(self.seq.on_phase2b(p, src))
        if t is Phase1a:
            return self._expand(self.seq.on_phase1a(p, src))
        if t is Phase1b:
            return self._expand(self.seq.on_phase1b(p, src))
        return []

    def on_decision(self, p: Decision, src: str):
        acts = []
        if p.ballot != DECIDED_BALLOT and src in self.sequencers:
            self.leader_hint = src
        if self.seq is not None:
            acts += self.seq.on_decision(p, src)
        if p.entries:
            acts += self.apply_decided(p.entries)
        if p.frontier > self.frontier_seen:
            self.frontier_seen = p.frontier
        if not self.catching_up and self.log.behind(self.frontier_seen):
            self.catching_up = True
            acts.append(SetTimer(("catchup",), self.cfg.delta6))
        return acts

    def on_timer(self, key):
        kind = key[0]
        if kind == "catchup":
            if not self.log.behind(self.frontier_seen):
                self.catching_up = False
                return []
            target = self.leader_hint
            if target == self.node:
                target = next(s for s in self.sequencers if s != self.node)
            return [Send(target, CatchUp(self.log.prefix)),
                    SetTimer(("catchup",), self.cfg.delta6)]
        if kind == "lfetch":
            return self.learner.on_timer(key)
        if kind in ("tick", "p1retry", "p2retry"):
            return self._expand(self.seq.on_timer(key))
        return self.diss.on_timer(key)

    def idle(self) -> bool:
        return all(a.idle() for a in (self.diss, self.learner, self.seq) if a is not None)


class ClientNode:
    def __init__(self, client: Client):
        self.client = client

    def start(self):
        return self.client.start()

    def handle(self, p, src):
        if type(p) is ClientReply:
            return self.client.on_reply(p.request_id, src)
        return []

    def on_timer(self, key):
        return self.client.on_timer(key)


@dataclass
class Topology:
    disseminators: list
    sequencers: list
    learners: list          # every node hosting a learner
    clients: list
    groups: dict

    @classmethod
    def of(cls, sc: Scenario) -> "Topology":
        c = sc.config
        diss = [f"d{i}" for i in range(c.D)]
        seqs = diss[:] if c.colocate_sequencers else [f"s{i}" for i in range(c.S)]
        standalone = [f"l{i}" for i in range(c.L)]
        learners = (diss[:] if c.colocate_learners else []) + standalone
        clients = [f"c{i}" for i in range(sc.workload.clients)]
        everyone = list(dict.fromkeys(seqs + diss + standalone))
        groups = {DL: diss + standalone, DISS: diss, SEQ: seqs, ALL: everyone}
        return cls(diss, seqs, learners, clients, groups)


# --- trace -------------------------------------------------------------------

def _summary(p):
    """Compact id-level digest of a payload, kept in send records."""
    t = type(p)
    if t is ClientRequest:
        return p.request.id
    if t is ForwardBatch or t is ResendReply:
        return p.batch.id
    if t is IdVote:
        return p.batch_ids
    if t in (BatchAck, Resend):
        return p.batch_id
    if t in (ClientReply, ClientReplyAck):
        return p.request_id
    if t in (Phase2a, Phase2b, Decision):
        return (p.ballot, p.entries)
    if t is Phase1a:
        return (p.ballot, p.from_instance)
    if t is Phase1b:
        return (p.ballot, p.promised, p.entries)
    if t is CatchUp:
        return p.from_instance
    return None


def _to_json(x):
    if isinstance(x, RequestId):
        return {"r": [x.client_id, x.client_seq]}
    if isinstance(x, BatchId):
        return {"b": [x.disseminator_id, x.batch_seq]}
    if isinstance(x, (tuple, list)):
        return [_to_json(v) for v in x]
    return x


def _from_json(x):
    if isinstance(x, dict):
        if "r" in x:
            return RequestId(*x["r"])
        if "b" in x:
            return BatchId(*x["b"])
        return {k: _from_json(v) for k, v in x.items()}
    if isinstance(x, list):
        return tuple(_from_json(v) for v in x)
    return x


@dataclass
class Trace:
    """Everything that happened in one run.

    ``records`` holds ``(time, kind, src, dst, variant, size, data)`` tuples
    where kind is one of send, deliver, drop, crash, restart or note.
    For notes, ``src`` is the node and ``variant`` the note kind.
    """

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)   # (node, dir, lan, variant) -> [msgs, bytes]
    quiescent: bool = False
    end_time: int = 0

    def notes(self, kind: str | None = None):
        for r in self.records:
            if r[1] == "note" and (kind is None or r[4] == kind):
                yield r

    def executed(self) -> dict:
        out = {n: [] for n in self.meta.get("learners", ())}
        for r in self.notes("execute"):
            out.setdefault(r[2], []).extend(r[6])
        return out

    def to_jsonl(self) -> str:
        buf = io.StringIO()
        head = {"meta": self.meta, "quiescent": self.quiescent, "end_time": self.end_time}
        buf.write(json.dumps(head, sort_keys=True) + "\n")
        for r in self.records:
            t, kind, src, dst, variant, size, data = r
            buf.write(json.dumps([t, kind, src, dst, variant, size, _to_json(data)]) + "\n")
        return buf.getvalue()

    def counters_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "direction", "lan", "variant", "messages", "bytes"])
        for key in sorted(self.counters):
            w.writerow([*key, *self.counters[key]])
        return buf.getvalue()

    def totals(self, node: str, direction: str | None = None) -> int:
        return sum(v[0] for k, v in self.counters.items()
                   if k[0] == node and (direction is None or k[1] == direction))

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty trace")
        head = json.loads(lines[0])
        tr = cls(meta=head["meta"], quiescent=head["quiescent"], end_time=head["end_time"])
        for line in lines[1:]:
            t, kind, src, dst, variant, size, data = json.loads(line)
            tr.records.append((t, kind, src, dst, variant, size, _from_json(data)))
            if kind == "send":
                _count(tr.counters, src, "out", _lan_name(data, variant, tr.meta), variant, size)
            elif kind == "deliver":
                _count(tr.counters, dst, "in", _lan_name(data, variant, tr.meta), variant, size)
        return tr


def _lan_name(_data, variant, meta):
    table = meta.get("lan_map") or DEFAULT_LANS
    return min(int(table.get(variant, DEFAULT_LANS[variant])), meta.get("lans", 2) - 1)


def _count(counters, node, direction, lan, variant, size):
    key = (node, direction, lan, variant)
    c = counters.get(key)
    if c is None:
        counters[key] = [1, size]
    else:
        c[0] += 1
        c[1] += size


# --- kernel --------------------------------------------------------------------

class Simulator:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.cfg = sc.config
        self.topo = Topology.of(sc)
        self.net = sc.net
        self.lan_table = {k: int(v) for k, v in DEFAULT_LANS.items()}
        if sc.net.lan_map:
            self.lan_table.update(sc.net.lan_map)
        self.n_lans = len(sc.net.lans)
        self.rng = random.Random(f"{sc.seed}/net")
        self.now = 0
        self.seq = 0
        self.heap: list = []
        self.disks: dict[str, dict] = {}
        self.nodes: dict = {}
        self.alive: dict[str, bool] = {}
        self.timers: dict[str, dict] = {}
        self.foreground = 0
        self.in_flight = 0
        self.pending_other = 0
        self.trace = Trace()
        self.trace.meta = {
            "scenario": scenario_to_dict(sc),
            "disseminators": self.topo.disseminators,
            "sequencers": self.topo.sequencers,
            "learners": self.topo.learners,
            "clients": self.topo.clients,
            "lans": self.n_lans,
            "lan_map": sc.net.lan_map or {},
        }
        self.ever_crashed: set[str] = set()
        wl = sc.workload
        for name in self.topo.disseminators + self.topo.sequencers + self.topo.learners:
            if name not in self.nodes:
                self.disks[name] = {}
                self.nodes[name] = Site(name, sc, self.topo, self.disks[name])
                self.alive[name] = True
                self.timers[name] = {}
        for i, name in enumerate(self.topo.clients):
            pinned = self.topo.disseminators[i % self.cfg.D] if wl.target == "pinned" else None
            client = Client(name, i, self.cfg, wl.requests_per_client, wl.request_size,
                            self.topo.disseminators, random.Random(f"{sc.seed}/{name}"), pinned)
            self.nodes[name] = ClientNode(client)
            self.alive[name] = True
            self.timers[name] = {}
        for name in self.nodes:
            if not name.startswith("c"):
                self._push(0, _START, name, None, None)
        for i, name in enumerate(self.topo.clients):
            self._push(i * wl.start_spread, _START, name, None, None)
        for f in sc.faults:
            self._push(f.crash_at, _CRASH, f.node, None, None)
            if f.restart_at is not None:
                self._push(f.restart_at, _RESTART, f.node, None, None)

    # -- scheduling --------------------------------------------------------

    def _push(self, t, kind, node, a, b):
        self.seq += 1
        if kind == _DELIVER:
            self.in_flight += 1
        elif kind != _TIMER:
            self.pending_other += 1
        heapq.heappush(self.heap, (t, self.seq, kind, node, a, b))

    def _lan(self, p) -> int:
        lan = self.lan_table[type(p).__name__]
        return lan if lan < self.n_lans else self.n_lans - 1

    def _transmit(self, src, dst, p, lan, size, variant):
        if self.net.drops:
            for v, who, start, end in self.net.drops:
                if v == variant and who == src and start <= self.now < end:
                    self.trace.records.append((self.now, "drop", src, dst, variant, size, "scripted"))
                    return
        model = self.net.lans[lan]
        gst = self.net.gst
        calm = gst is not None and self.now >= gst
        if not calm and model.loss and self.rng.random() < model.loss:
            self.trace.records.append((self.now, "drop", src, dst, type(p).__name__, size, "loss"))
            return
        copies = 2 if (not calm and model.dup and self.rng.random() < model.dup) else 1
        lo, hi = model.delay_min, model.delay_max
        for _ in range(copies):
            delay = lo if lo == hi else lo + int(self.rng.random() * (hi - lo + 1))
            self._push(self.now + delay, _DELIVER, dst, src, (p, lan, size, variant))

    def _deliver(self, node, src, msg, out):
        rec = self.trace.records
        p, lan, size, variant = msg
        if not self.alive[node]:
            rec.append((self.now, "drop", src, node, variant, size, "down"))
            return
        rec.append((self.now, "deliver", src, node, variant, size, None))
        _count(self.trace.counters, node, "in", lan, variant, size)
        acts = self.nodes[node].handle(p, src)
        if acts:
            out.setdefault(node, []).extend(acts)

    def _flush(self, out):
        """Dispatch queued actions; self-deliveries feed the next sub-round."""
        rec = self.trace.records
        counters = self.trace.counters
        groups = self.topo.groups
        merge = self.cfg.coalesce
        piggy = self.cfg.piggyback
        while out:
            nxt: dict = {}
            for node, acts in out.items():
                if not self.alive[node]:
                    continue
                if merge:
                    acts = coalesce(acts, piggy)
                for a in acts:
                    t = type(a)
                    if t is Send:
                        p = a.payload
                        variant = type(p).__name__
                        size = size_of(p)
                        lan = self._lan(p)
                        rec.append((self.now, "send", node, a.dst, variant, size, _summary(p)))
                        _count(counters, node, "out", lan, variant, size)
                        if a.dst == node:
                            self._deliver(node, node, (p, lan, size, variant), nxt)
                        else:
                            self._transmit(node, a.dst, p, lan, size, variant)
                    elif t is Multicast:
                        p = a.payload
                        variant = type(p).__name__
                        size = size_of(p)
                        lan = self._lan(p)
                        rec.append((self.now, "send", node, a.group, variant, size, _summary(p)))
                        _count(counters, node, "out", lan, variant, size)
                        msg = (p, lan, size, variant)
                        for member in groups[a.group]:
                            if member == node:
                                if a.include_self:
                                    self._deliver(node, node, msg, nxt)
                            else:
                                self._transmit(node, member, p, lan, size, variant)
                    elif t is SetTimer:
                        self._set_timer(node, a)
                    elif t is CancelTimer:
                        self._cancel_timer(node, a.key)
                    elif t is Note:
                        rec.append((self.now, "note", node, "", a.kind, 0, a.data))
                    else:
                        raise TypeError(f"unknown action {a!r}")
            out = nxt

    def _set_timer(self, node, a: SetTimer):
        timers = self.timers[node]
        old = timers.get(a.key)
        if old is not None and not old[1]:
            self.foreground -= 1
        self.seq += 1
        timers[a.key] = (self.seq, a.background)
        if not a.background:
            self.foreground += 1
        heapq.heappush(self.heap, (self.now + a.delay, self.seq, _TIMER, node, a.key, self.seq))

    def _cancel_timer(self, node, key):
        old = self.timers[node].pop(key, None)
        if old is not None and not old[1]:
            self.foreground -= 1

    def _clear_timers(self, node):
        for token, bg in self.timers[node].values():
            if not bg:
                self.foreground -= 1
        self.timers[node] = {}

    # -- event handling -------------------------------------------------------

    def _handle(self, ev, out):
        t, _, kind, node, a, b = ev
        if kind == _DELIVER:
            self.in_flight -= 1
            self._deliver(node, a, b, out)
            return
        if kind == _TIMER:
            timers = self.timers[node]
            cur = timers.get(a)
            if cur is None or cur[0] != b or not self.alive[node]:
                return
            del timers[a]
            if not cur[1]:
                self.foreground -= 1
            acts = self.nodes[node].on_timer(a)
            if acts:
                out.setdefault(node, []).extend(acts)
            return
        self.pending_other -= 1
        if kind == _START:
            if self.alive[node]:
                acts = self.nodes[node].start()
                if acts:
                    out.setdefault(node, []).extend(acts)
        elif kind == _CRASH:
            if self.alive[node]:
                self.alive[node] = False
                self.ever_crashed.add(node)
                self._clear_timers(node)
                out.pop(node, None)
                self.trace.records.append((t, "crash", node, "", "", 0, None))
        elif kind == _RESTART:
            if not self.alive[node]:
                self.alive[node] = True
                self.trace.records.append((t, "restart", node, "", "", 0, None))
                agent = self.nodes[node]
                if isinstance(agent, ClientNode):
                    acts = agent.on_timer(("retry",))
                else:
                    self.nodes[node] = Site(node, self.sc, self.topo, self.disks[node])
                    acts = self.nodes[node].start()
                if acts:
                    out.setdefault(node, []).extend(acts)

    def settled(self) -> bool:
        if self.in_flight or self.foreground or self.pending_other:
            return False
        for name in self.topo.clients:
            if self.alive[name] and not self.nodes[name].client.done:
                return False
        sites = [self.nodes[n] for n in self.nodes if self.alive[n] and isinstance(self.nodes[n], Site)]
        top = max((s.log.top for s in sites), default=0)
        for s in sites:
            if not s.idle():
                return False
            if s.learner is not None and s.log.prefix < top:
                return False
        return True

    def run(self) -> Trace:
        horizon = self.sc.horizon
        heap = self.heap
        quiet = False
        while heap:
            t = heap[0][0]
            if t > horizon:
                break
            self.now = t
            out: dict = {}
            while heap and heap[0][0] == t:
                self._handle(heapq.heappop(heap), out)
            self._flush(out)
            if not self.in_flight and not self.foreground and self.settled():
                quiet = True
                break
        self.trace.quiescent = quiet
        self.trace.end_time = self.now
        self.trace.meta["crashed_at_end"] = sorted(n for n, up in self.alive.items() if not up)
        self.trace.meta["ever_crashed"] = sorted(self.ever_crashed)
        return self.trace


def run(sc: Scenario) -> Trace:
    return Simulator(sc).run()
