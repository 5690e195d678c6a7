"""Symmetric key management for wireless sensor networks: a four-tier
key hierarchy with authenticated neighbor discovery, timed bootstrap
erasure, compromise detection and revocation, plus a deterministic
discrete-event radio simulator and experiment harness."""

from .adversary import (
    Adversary,
    Alter,
    Clone,
    Compromise,
    HelloFlood,
    Replay,
    active_links,
    attacker_pairwise_key,
    derivable_pairwise,
    evaluate_detection,
)
from .basestation import BaseStation
from .checks import run_invariant_checks
from .crypto import (
    KEY_SIZE,
    MAC_SIZE,
    KeyChain,
    decrypt,
    derive_individual,
    derive_master,
    derive_pairwise,
    encrypt,
    generate_key_chain,
    mac,
    pairwise_key_from_kin,
    prf,
    verify,
)
from .keystore import BlockedPeerError, KeyStore, StorageReport, preload
from .metrics import EnergyCosts, ExperimentResult, MetricsRecorder, summarize
from .packets import BROADCAST, Packet, PacketType, decode
from .protocol import Node, NodePhase, ProtocolConfig, neighbor_digest
from .scenario import (
    Deployment,
    Scenario,
    ScenarioError,
    deploy,
    load_deployment,
    parse_scenario,
    regular_topology,
    synthetic_deployment,
)
from .sim import (
    LinkGain,
    NoiseTrace,
    NoSuchNodeError,
    ParseError,
    PastTimeError,
    SimConfig,
    Simulator,
    TooShortError,
    load_noise,
    load_topology,
    parse_trace,
)

__version__ = "0.1.0"
