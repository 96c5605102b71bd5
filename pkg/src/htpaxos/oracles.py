"""Trace checks: safety, liveness and best-case delay counts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .messages import NOOP

PASS, FAIL, NA = "pass", "fail", "not-applicable"


@dataclass
class Verdict:
    check: str
    status: str
    witness: object = None
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == FAIL and self.witness is None:
            raise ValueError("a failing verdict needs a witness")

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        w = f" witness={self.witness!r}" if self.witness is not None else ""
        return f"{self.check}: {self.status}{w}"


def _scenario(trace) -> dict:
    return trace.meta.get("scenario", {})


def executed_sequences(trace) -> dict:
    return trace.executed()


def decided_by_instance(trace) -> dict:
    """instance -> {batch id: first node that recorded it}."""
    out: dict = {}
    for r in trace.notes("decide"):
        inst, bid = r[6]
        out.setdefault(inst, {}).setdefault(bid, r[2])
    return out


def duplicate_decisions(trace) -> list:
    """Batch ids (no-ops aside) that were decided in more than one instance."""
    where: dict = {}
    for inst, vals in decided_by_instance(trace).items():
        for bid in vals:
            if bid != NOOP:
                where.setdefault(bid, set()).add(inst)
    return sorted((bid, tuple(sorted(insts))) for bid, insts in where.items() if len(insts) > 1)


def check_safety(trace) -> Verdict:
    execs = executed_sequences(trace)
    # (a) prefix consistency; executed logs only grow, so final logs suffice
    longest = max(execs.values(), key=len, default=[])
    for node, seq in sorted(execs.items()):
        if seq != longest[:len(seq)]:
            i = next(i for i, (a, b) in enumerate(zip(seq, longest)) if a != b)
            return Verdict("safety", FAIL, {"diverge": node, "index": i,
                                            "got": seq[i], "expected": longest[i]})
    # (b) nontriviality: every executed id was sent by a client first
    first_sent: dict = {}
    for r in trace.records:
        if r[1] == "send" and r[4] == "ClientRequest":
            first_sent.setdefault(r[6], r[0])
    for r in trace.notes("execute"):
        for rid in r[6]:
            t = first_sent.get(rid)
            if t is None or t > r[0]:
                return Verdict("safety", FAIL, {"never proposed": rid, "node": r[2], "time": r[0]})
    # (c) one value per instance
    for r in trace.notes("violation"):
        return Verdict("safety", FAIL, {"conflict": r[6], "node": r[2], "time": r[0]})
    for inst, vals in sorted(decided_by_instance(trace).items()):
        if len(vals) > 1:
            return Verdict("safety", FAIL, {"instance": inst, "values": sorted(vals)})
    # (d) at most once
    for node, seq in sorted(execs.items()):
        if len(set(seq)) != len(seq):
            seen = set()
            dup = next(x for x in seq if x in seen or seen.add(x))
            return Verdict("safety", FAIL, {"duplicate": dup, "node": node})
    return Verdict("safety", PASS, metrics={"executed": len(longest), "learners": len(execs)})


def liveness_applicable(trace) -> str | None:
    """Reason the progress assumptions do not hold, or None when they do."""
    sc = _scenario(trace)
    if sc.get("gst") is None:
        return "no global stabilization time"
    crashed = set(trace.meta.get("ever_crashed", ()))
    diss = trace.meta["disseminators"]
    seqs = trace.meta["sequencers"]
    if sum(d in crashed for d in diss) > len(diss) // 2:
        return "more than a minority of disseminators failed"
    if sum(s in crashed for s in seqs) > len(seqs) // 2:
        return "more than a minority of sequencers failed"
    down = set(trace.meta.get("crashed_at_end", ()))
    if all(n in down for n in trace.meta["learners"]):
        return "no learner survives"
    return None


def check_liveness(trace) -> Verdict:
    why = liveness_applicable(trace)
    if why is not None:
        return Verdict("liveness", NA, metrics={"reason": why})
    sc = _scenario(trace)
    down = set(trace.meta.get("crashed_at_end", ()))
    submitted = [r[6] for r in trace.notes("submit")]
    completed = {r[6] for r in trace.notes("complete")}
    execs = executed_sequences(trace)
    missing = []
    per_client = sc.get("requests_per_client", 0)
    for i, c in enumerate(trace.meta["clients"]):
        if c in down:
            continue
        mine = [rid for rid in submitted if rid.client_id == i]
        if len(mine) < per_client:
            missing.append(("unsubmitted", c, per_client - len(mine)))
        for rid in mine:
            if rid not in completed:
                missing.append(("no reply", c, rid))
    wanted = set(submitted)
    for node in trace.meta["learners"]:
        if node in down:
            continue
        lacking = wanted - set(execs.get(node, ()))
        if lacking:
            missing.append(("not executed", node, min(lacking)))
    metrics = {"submitted": len(submitted), "quiescent": trace.quiescent, "end_time": trace.end_time}
    if missing:
        return Verdict("liveness", FAIL, missing[:5], metrics)
    return Verdict("liveness", PASS, metrics=metrics)


def delays_applicable(trace) -> str | None:
    sc = _scenario(trace)
    if sc.get("faults"):
        return "fault schedule present"
    for side in ("first", "second"):
        if sc.get(f"loss_{side}", 0) or sc.get(f"dup_{side}", 0):
            return "lossy network"
        if sc.get(f"delay_min_{side}", 1) != sc.get(f"delay_max_{side}", 1):
            return "variable delay"
    if sc.get("delay_min_first", 1) != sc.get("delay_min_second", 1):
        return "LANs differ in delay"
    if sc.get("batch_size", 1) != 1 or sc.get("vote_delay", 0):
        return "batching adds queueing delay"
    return None


def check_delays(trace) -> Verdict:
    why = delays_applicable(trace)
    if why is not None:
        return Verdict("delays", NA, metrics={"reason": why})
    hop = _scenario(trace).get("delay_min_first", 1)
    submits = list(trace.notes("submit"))
    if not submits:
        return Verdict("delays", FAIL, "no request submitted")
    t0, rid = submits[0][0], submits[0][6]
    reply = next((r[0] for r in trace.notes("complete") if r[6] == rid), None)
    learners = set(trace.meta["learners"])
    execute = next((r[0] for r in trace.notes("execute") if r[2] in learners and rid in r[6]), None)
    metrics = {"reply_hops": None if reply is None else (reply - t0) / hop,
               "execute_hops": None if execute is None else (execute - t0) / hop}
    if reply != t0 + 4 * hop or execute != t0 + 6 * hop:
        return Verdict("delays", FAIL, {"request": rid, "submitted": t0, "reply": reply,
                                         "execute": execute}, metrics)
    return Verdict("delays", PASS, metrics=metrics)


def window_respected(trace, alpha: int) -> bool:
    return all(r[6] <= alpha for r in trace.notes("inflight"))


def reply_witness_ok(trace) -> list:
    """Majority-path replies whose batch was not yet held by a majority.

    Returns the offending (time, node, batch) triples; empty means the
    stabilization witness holds.
    """
    quorum = len(trace.meta["disseminators"]) // 2 + 1
    holders: dict = {}
    bad = []
    for r in trace.records:
        if r[1] != "note":
            continue
        if r[4] == "store":
            holders.setdefault(r[6], set()).add(r[2])
        elif r[4] == "reply" and r[6][2] == "majority":
            bid = r[6][1]
            if len(holders.get(bid, ())) < quorum:
                bad.append((r[0], r[2], bid))
    return bad
