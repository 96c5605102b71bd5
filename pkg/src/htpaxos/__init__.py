"""HT-Paxos agents on a deterministic two-LAN simulator, plus a closed-form cost model."""

from .config import Config, NetConfig, Scenario, Workload, Fault, load_scenario
from .sim import Trace, run

__all__ = ["Config", "NetConfig", "Scenario", "Workload", "Fault", "load_scenario", "Trace", "run"]
