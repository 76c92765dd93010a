"""Locally optimum detection of a weak radioactive source over a sensor
network, with ADMM consensus and a trimmed Byzantine-resilient variant."""

__version__ = "0.1.0"

from calod.radiation_model import (  # noqa: E402
    Hypothesis, NodePosition, Observation, ScenarioParams, centralized_lod,
    clairvoyant_llr, clairvoyant_lrt, local_lod_statistic, sample_observation,
    sample_observations, source_rate)
from calod.topology import (  # noqa: E402
    Topology, TopologyConfig, TopologyError, TrimReport, generate, is_connected,
    validate_for_trim)
from calod.consensus import (  # noqa: E402
    AttackConfig, ConsensusConfig, ConsensusError, ConvergenceTrace, NodeStates,
    broadcast_round, consensus_oracle, gamma_p, init_states, robust_step,
    run_consensus, vanilla_step)
from calod.metrics import (  # noqa: E402
    RocCurve, calibrate_threshold, empirical_roc, iterations_to_within,
    relative_convergence_rate)
