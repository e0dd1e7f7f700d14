"""Traffic abstraction for multi-VPN cores: flow solvers, capacity
partitioning, fairness post-processing and a call-level simulator."""

from .network import CoreNetwork, VpnRegistry, build_network, derive_commodities
from .mcf import FlowBounds, FlowSolution, path_decompose, solve_bounded_mmcf, solve_mconf, solve_mmcf
from .partition import PartitionSet, build_partitions, verify_partition
from .simulator import SimConfig, run_replication, run_replications

__version__ = "0.1.0"
