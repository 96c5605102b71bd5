"""Scenario configuration: protocol knobs, network model, workload and faults.

Scenario files are flat YAML mappings; every key is listed in ``SCENARIO_KEYS``
and documented in the README.  Unknown keys are an error.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    D: int = 3                       # disseminators
    S: int = 3                       # sequencers
    L: int = 0                       # standalone learners (besides co-located ones)
    colocate_learners: bool = True   # a learner on every disseminator site
    colocate_sequencers: bool = False  # fault-tolerant variant: S == D, one per site
    alpha: int = 8                   # pipeline window
    batch_size: int = 1              # flush when this many requests are pending
    batch_timeout: int = 5           # periodic flush of a partial batch
    vote_delay: int = 0              # hold IdVotes this long to coalesce them
    piggyback: bool = False          # ride BatchAcks on the node's own ForwardBatch
    coalesce: bool = True            # merge same-instant messages of one kind per destination
    delta_t: int = 50                # client retry
    delta2: int = 20                 # IdVote / solicitation retransmit
    delta3: int = 20                 # ClientReply retransmit
    delta4: int = 20                 # wait before pulling an unknown batch
    delta5: int = 20                 # relay pull retry
    delta6: int = 20                 # learner pull / catch-up retry
    client_retry_limit: int = 10     # K: ClientReply retransmissions before giving up
    heartbeat: int = 5               # leader heartbeat period
    suspect_after: int = 4           # missed heartbeats before suspecting the leader
    paxos_retry: int = 20            # Phase2a / Phase1a retransmit

    def __post_init__(self):
        if self.colocate_sequencers and self.S != self.D:
            object.__setattr__(self, "S", self.D)
        if self.D < 3:
            raise ConfigError("D must be at least 3")
        if self.S < 3:
            raise ConfigError("S must be at least 3")
        if self.L < 0:
            raise ConfigError("L must be non-negative")
        if not self.colocate_learners and self.L < 1:
            raise ConfigError("need at least one learner")
        if self.alpha < 1:
            raise ConfigError("alpha (pipeline window) must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.vote_delay < 0:
            raise ConfigError("vote_delay must be non-negative")
        for name in ("batch_timeout", "delta_t", "delta2", "delta3", "delta4",
                     "delta5", "delta6", "heartbeat", "suspect_after", "paxos_retry",
                     "client_retry_limit"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def disseminator_quorum(self) -> int:
        return self.D // 2 + 1

    @property
    def sequencer_quorum(self) -> int:
        return self.S // 2 + 1


@dataclass(frozen=True)
class LanModel:
    loss: float = 0.0
    dup: float = 0.0
    delay_min: int = 1
    delay_max: int = 1

    def __post_init__(self):
        if not (0.0 <= self.loss <= 1.0 and 0.0 <= self.dup <= 1.0):
            raise ConfigError("loss/dup probabilities must lie in [0, 1]")
        if self.delay_min < 1 or self.delay_max < self.delay_min:
            raise ConfigError("delays must satisfy 1 <= delay_min <= delay_max")


@dataclass(frozen=True)
class NetConfig:
    lans: tuple[LanModel, ...] = (LanModel(), LanModel())
    gst: Optional[int] = 0           # after this time loss = dup = 0; None = never
    lan_map: Optional[dict] = None   # variant name -> lan index override
    # scripted losses: (variant, src, start, end) drops every copy of that
    # variant sent by src during [start, end), except self-delivery
    drops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "drops", tuple(tuple(d) for d in self.drops))
        for d in self.drops:
            if len(d) != 4 or d[2] >= d[3]:
                raise ConfigError(f"bad drop rule {d!r}: want [variant, src, start, end]")
        if not self.lans:
            raise ConfigError("need at least one LAN")
        if self.lan_map:
            for variant, idx in self.lan_map.items():
                if not 0 <= idx < len(self.lans):
                    raise ConfigError(f"{variant} mapped to missing LAN {idx}")

    @classmethod
    def uniform(cls, loss=0.0, dup=0.0, delay_min=1, delay_max=1, gst=0, lans=2):
        lan = LanModel(loss, dup, delay_min, delay_max)
        return cls(tuple(lan for _ in range(lans)), gst)


@dataclass(frozen=True)
class Fault:
    node: str
    crash_at: int
    restart_at: Optional[int] = None

    def __post_init__(self):
        if self.restart_at is not None and self.restart_at <= self.crash_at:
            raise ConfigError(f"{self.node}: restart must come after crash")


@dataclass(frozen=True)
class Workload:
    clients: int = 1
    requests_per_client: int = 1
    request_size: int = 16
    target: str = "random"           # "random" or "pinned" (client i -> d[i mod D])
    start_spread: int = 0            # client i starts at i * start_spread

    def __post_init__(self):
        if self.target not in ("random", "pinned"):
            raise ConfigError(f"unknown target policy {self.target!r}")
        if self.request_size < 1:
            raise ConfigError("request_size must be positive")


@dataclass(frozen=True)
class Scenario:
    config: Config = field(default_factory=Config)
    net: NetConfig = field(default_factory=NetConfig)
    workload: Workload = field(default_factory=Workload)
    faults: tuple[Fault, ...] = ()
    horizon: int = 5000
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        known = set(self.node_names())
        for f in self.faults:
            if f.node not in known:
                raise ConfigError(f"fault names unknown node {f.node!r}")

    def node_names(self) -> list[str]:
        c = self.config
        names = [f"d{i}" for i in range(c.D)]
        if not c.colocate_sequencers:
            names += [f"s{i}" for i in range(c.S)]
        names += [f"l{i}" for i in range(c.L)]
        names += [f"c{i}" for i in range(self.workload.clients)]
        return names

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


# --- flat file format --------------------------------------------------------

_CONFIG_KEYS = {f.name for f in fields(Config)}
_WORKLOAD_KEYS = {f.name for f in fields(Workload)}
_LAN_KEYS = {"loss", "dup", "delay_min", "delay_max"}

SCENARIO_KEYS = (
    _CONFIG_KEYS | _WORKLOAD_KEYS | _LAN_KEYS
    | {f"{k}_first" for k in _LAN_KEYS} | {f"{k}_second" for k in _LAN_KEYS}
    | {"gst", "faults", "horizon", "seed", "name", "lans", "drops", "lan_map"}
)


def scenario_from_dict(raw: dict) -> Scenario:
    unknown = set(raw) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    cfg = Config(**{k: raw[k] for k in _CONFIG_KEYS if k in raw})
    wl = Workload(**{k: raw[k] for k in _WORKLOAD_KEYS if k in raw})
    n_lans = int(raw.get("lans", 2))
    lans = []
    suffixes = ("_first", "_second")
    for i in range(n_lans):
        kw = {k: raw[k] for k in _LAN_KEYS if k in raw}
        if i < 2:
            kw.update({k: raw[k + suffixes[i]] for k in _LAN_KEYS if k + suffixes[i] in raw})
        lans.append(LanModel(**kw))
    net = NetConfig(tuple(lans), raw.get("gst", 0), raw.get("lan_map"),
                    tuple(tuple(d) for d in raw.get("drops") or ()))
    faults = []
    for item in raw.get("faults") or ():
        if isinstance(item, dict):
            faults.append(Fault(item["node"], int(item["crash_at"]), item.get("restart_at")))
        else:
            node, crash, *rest = item
            faults.append(Fault(node, int(crash), rest[0] if rest else None))
    return Scenario(cfg, net, wl, tuple(faults), int(raw.get("horizon", 5000)),
                    int(raw.get("seed", 0)), str(raw.get("name", "scenario")))


def scenario_to_dict(sc: Scenario) -> dict:
    out = {"name": sc.name, "seed": sc.seed, "horizon": sc.horizon}
    out.update(asdict(sc.config))
    out.update(asdict(sc.workload))
    out["lans"] = len(sc.net.lans)
    for lan, suffix in zip(sc.net.lans, ("_first", "_second")):
        for k in _LAN_KEYS:
            out[k + suffix] = getattr(lan, k)
    out["gst"] = sc.net.gst
    out["lan_map"] = dict(sc.net.lan_map) if sc.net.lan_map else None
    out["drops"] = [list(d) for d in sc.net.drops]
    out["faults"] = [[f.node, f.crash_at, f.restart_at] for f in sc.faults]
    return out


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping of scenario keys")
    try:
        return scenario_from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
