"""Scenario files and deployment assembly.

A scenario is line-oriented text with ``[section]`` headers::

    [topology]
    file = topo.txt
    [noise]
    file = noise.txt
    [nodes]
    1 boot=100001
    2 boot=800008
    [protocol]
    t_min = 10000000
    t_p = 1000000
    [sim]
    seed = 42
    until = 30000000
    [adversary]
    compromise node=2 at=12000000

Node ids listed under ``[nodes]`` but absent from the topology are
explicitly isolated. The seed is mandatory. ``adversary: <kind> ...``
is accepted anywhere as a one-line alternative to the section.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

from .adversary import (
    Adversary,
    AdversaryAction,
    Alter,
    Clone,
    Compromise,
    HelloFlood,
    Replay,
)
from .basestation import BaseStation, registry_from_links
from .crypto import KEY_SIZE, ZERO_KEY
from .keystore import BASE_STATION_ID, DEFAULT_CHAIN_LENGTH, preload
from .metrics import EnergyCosts, ExperimentResult, summarize
from .packets import PacketType
from .protocol import Node, ProtocolConfig
from .sim import LinkGain, NoiseTrace, ParseError, SimConfig, Simulator, load_noise, load_topology


class ScenarioError(ValueError):
    """Config problem, reported with source path and line number."""

    def __init__(self, source: str, lineno: int | None, message: str) -> None:
        where = f"{source}:{lineno}" if lineno is not None else source
        super().__init__(f"{where}: {message}")
        self.source = source
        self.lineno = lineno


@dataclass
class Scenario:
    seed: int
    topology_path: str | None = None
    noise_path: str | None = None
    boots: dict[int, int] = field(default_factory=dict)
    protocol: ProtocolConfig = ProtocolConfig()
    until: int | None = None
    snr_threshold: float | None = None
    propagation: int | None = None
    serialization: int | None = None
    chain_length: int = DEFAULT_CHAIN_LENGTH
    adversary: list[AdversaryAction] = field(default_factory=list)

    def sim_config(self) -> SimConfig:
        base = SimConfig()
        return SimConfig(
            snr_threshold_db=self.snr_threshold if self.snr_threshold is not None else base.snr_threshold_db,
            propagation_ticks=self.propagation if self.propagation is not None else base.propagation_ticks,
            serialization_ticks_per_octet=self.serialization if self.serialization is not None else base.serialization_ticks_per_octet,
        )


# -- parsing -------------------------------------------------------------------

_PROTOCOL_KEYS = {"t_min", "t_p", "hello_jitter", "p_detect", "block_duration"}
_SIM_KEYS = {"seed", "until", "snr_threshold", "propagation", "serialization", "chain_length"}


def _kv_tokens(tokens: list[str], source: str, lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(source, lineno, f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _parse_int(value: str, source: str, lineno: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(source, lineno, f"bad {what}: {value!r}") from None


def _parse_float(value: str, source: str, lineno: int, what: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(source, lineno, f"bad {what}: {value!r}") from None


def _parse_adversary_line(line: str, source: str, lineno: int) -> AdversaryAction:
    tokens = line.split()
    kind, params = tokens[0], _kv_tokens(tokens[1:], source, lineno)
    if "at" not in params:
        raise ScenarioError(source, lineno, f"adversary action needs at=<ticks>")
    at = _parse_int(params["at"], source, lineno, "at")
    if kind == "compromise":
        return Compromise(at=at, node=_parse_int(params.get("node", ""), source, lineno, "node"))
    if kind == "hello_flood":
        return HelloFlood(
            at=at,
            fake_id=_parse_int(params.get("id", ""), source, lineno, "id"),
            power_boost=_parse_float(params.get("boost", "0"), source, lineno, "boost"),
        )
    if kind == "alter":
        try:
            mask = bytes.fromhex(params.get("mask", ""))
        except ValueError:
            raise ScenarioError(source, lineno, f"bad mask: {params.get('mask')!r}") from None
        if not mask:
            raise ScenarioError(source, lineno, "alter needs a nonempty hex mask")
        return Alter(
            at=at,
            src=_parse_int(params.get("src", ""), source, lineno, "src"),
            dst=_parse_int(params.get("dst", ""), source, lineno, "dst"),
            mask=mask,
        )
    if kind == "replay":
        ptype = None
        if "type" in params:
            try:
                ptype = PacketType[params["type"]]
            except KeyError:
                raise ScenarioError(source, lineno, f"unknown packet type {params['type']!r}") from None
        return Replay(
            at=at,
            ptype=ptype,
            src=_parse_int(params["src"], source, lineno, "src") if "src" in params else None,
            dst=_parse_int(params["dst"], source, lineno, "dst") if "dst" in params else None,
            nth=_parse_int(params.get("nth", "0"), source, lineno, "nth"),
        )
    if kind == "clone":
        node = _parse_int(params.get("node", ""), source, lineno, "node")
        links = []
        for item in params.get("links", "").split(","):
            if not item:
                continue
            if ":" in item:
                host, gain = item.split(":", 1)
                links.append((_parse_int(host, source, lineno, "link host"),
                              _parse_float(gain, source, lineno, "link gain")))
            else:
                links.append((_parse_int(item, source, lineno, "link host"), -60.0))
        if not links:
            raise ScenarioError(source, lineno, "clone needs links=<host[:gain],...>")
        return Clone(at=at, node=node, links=tuple(links))
    raise ScenarioError(source, lineno, f"unknown adversary action {kind!r}")


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Strict parse; every complaint carries the source and line number."""
    section = None
    seed: int | None = None
    sc = Scenario(seed=0)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in {"topology", "noise", "nodes", "protocol", "sim", "adversary"}:
                raise ScenarioError(source, lineno, f"unknown section [{section}]")
            continue
        if line.startswith("adversary:"):
            sc.adversary.append(_parse_adversary_line(line[len("adversary:"):].strip(), source, lineno))
            continue
        if section in ("topology", "noise"):
            kv = _kv_tokens(line.replace(" = ", "=").split(), source, lineno)
            if "file" not in kv:
                raise ScenarioError(source, lineno, f"[{section}] expects file=<path>")
            if section == "topology":
                sc.topology_path = kv["file"]
            else:
                sc.noise_path = kv["file"]
        elif section == "nodes":
            tokens = line.split()
            nid = _parse_int(tokens[0], source, lineno, "node id")
            if not 1 <= nid <= 0xFFFF:
                raise ScenarioError(source, lineno, f"node id must be 1..65535, got {nid}")
            if nid in sc.boots:
                raise ScenarioError(source, lineno, f"duplicate node id {nid}")
            kv = _kv_tokens(tokens[1:], source, lineno)
            boot = _parse_int(kv.get("boot", "0"), source, lineno, "boot time")
            if boot < 0:
                raise ScenarioError(source, lineno, "boot time must be >= 0")
            sc.boots[nid] = boot
        elif section == "protocol":
            kv = _kv_tokens(line.replace(" = ", "=").split(), source, lineno)
            for k, v in kv.items():
                if k not in _PROTOCOL_KEYS:
                    raise ScenarioError(source, lineno, f"unknown protocol key {k!r}")
                updates = {}
                if k == "p_detect":
                    updates[k] = _parse_float(v, source, lineno, k)
                else:
                    updates[k] = _parse_int(v, source, lineno, k)
                try:
                    sc.protocol = dataclasses.replace(sc.protocol, **updates)
                except ValueError as exc:
                    raise ScenarioError(source, lineno, str(exc)) from None
        elif section == "sim":
            kv = _kv_tokens(line.replace(" = ", "=").split(), source, lineno)
            for k, v in kv.items():
                if k not in _SIM_KEYS:
                    raise ScenarioError(source, lineno, f"unknown sim key {k!r}")
                if k == "seed":
                    seed = _parse_int(v, source, lineno, k)
                elif k == "until":
                    sc.until = _parse_int(v, source, lineno, k)
                elif k == "snr_threshold":
                    sc.snr_threshold = _parse_float(v, source, lineno, k)
                elif k == "propagation":
                    sc.propagation = _parse_int(v, source, lineno, k)
                elif k == "serialization":
                    sc.serialization = _parse_int(v, source, lineno, k)
                elif k == "chain_length":
                    sc.chain_length = _parse_int(v, source, lineno, k)
        elif section == "adversary":
            sc.adversary.append(_parse_adversary_line(line, source, lineno))
        else:
            raise ScenarioError(source, lineno, f"content outside any section: {raw.strip()!r}")
    if seed is None:
        raise ScenarioError(source, None, "seed is mandatory ([sim] seed=<int>)")
    sc.seed = seed
    if not sc.boots:
        raise ScenarioError(source, None, "no nodes declared ([nodes] section)")
    _validate_actions(sc, source)
    return sc


def _validate_actions(sc: Scenario, source: str) -> None:
    known = set(sc.boots) | {BASE_STATION_ID}
    compromised_at: dict[int, int] = {}
    for a in sc.adversary:
        if isinstance(a, Compromise):
            if a.node not in sc.boots:
                raise ScenarioError(source, None, f"compromise references unknown node {a.node}")
            compromised_at.setdefault(a.node, a.at)
        elif isinstance(a, Alter):
            if a.src not in known or a.dst not in known:
                raise ScenarioError(source, None, f"alter references unknown link {a.src}->{a.dst}")
        elif isinstance(a, Clone):
            if a.node not in sc.boots:
                raise ScenarioError(source, None, f"clone references unknown node {a.node}")
            if a.node not in compromised_at or compromised_at[a.node] > a.at:
                raise ScenarioError(
                    source, None, f"clone of node {a.node} needs an earlier compromise"
                )
            for host, _ in a.links:
                if host not in known:
                    raise ScenarioError(source, None, f"clone links unknown node {host}")


# -- deployment ------------------------------------------------------------------

class Deployment:
    """A built, runnable simulation: entities wired, boots scheduled."""

    def __init__(
        self,
        scenario: Scenario,
        sim: Simulator,
        nodes: dict[int, Node],
        bs: BaseStation,
        adversary: Adversary,
        links: list[LinkGain],
    ) -> None:
        self.scenario = scenario
        self.sim = sim
        self.nodes = nodes
        self.bs = bs
        self.adversary = adversary
        self.links = links
        self.mutual_neighbors = mutual_adjacency(links, set(nodes))
        self.expected_pairs = {
            (u, v) for u in self.mutual_neighbors for v in self.mutual_neighbors[u] if u < v
        }

    def run(self, until: int | None = None) -> list[str]:
        return self.sim.run(until if until is not None else self.scenario.until)

    @property
    def stores(self):
        return {nid: node.store for nid, node in self.nodes.items()}

    def summarize(self, costs: EnergyCosts = EnergyCosts()) -> ExperimentResult:
        boot_ticks = {
            nid: n.boot_time for nid, n in self.nodes.items() if n.boot_time is not None
        }
        installs = {
            nid: n.last_pairwise_install
            for nid, n in self.nodes.items()
            if n.last_pairwise_install is not None
        }
        return summarize(
            n=len(self.nodes),
            seed=self.scenario.seed,
            expected_pairs=self.expected_pairs,
            stores=self.stores,
            boot_ticks=boot_ticks,
            last_install_ticks=installs,
            recorder=self.sim.metrics,
            costs=costs,
        )

    def evaluate_detection(self):
        from .adversary import evaluate_detection

        return evaluate_detection(
            self.sim,
            self.adversary,
            self.mutual_neighbors,
            self.stores,
            self.bs.global_key,
        )


def mutual_adjacency(links: list[LinkGain], node_ids: set[int]) -> dict[int, set[int]]:
    """Bidirectionally linked node pairs (the base station not included):
    these are the pairs discovery is expected to key."""
    directed = {(l.src, l.dst) for l in links}
    adj: dict[int, set[int]] = {u: set() for u in node_ids}
    for u, v in directed:
        if u in node_ids and v in node_ids and (v, u) in directed:
            adj[u].add(v)
            adj[v].add(u)
    return adj


def _fresh_key(sim: Simulator) -> bytes:
    key = sim.rng.randbytes(KEY_SIZE)
    while key == ZERO_KEY:
        key = sim.rng.randbytes(KEY_SIZE)
    return key


def deploy(
    scenario: Scenario,
    links: list[LinkGain],
    noise: NoiseTrace,
) -> Deployment:
    """Wire a simulator from parsed inputs: provision every node from the
    same bootstrap secret, register the controller, schedule boots and
    adversary actions."""
    node_ids = set(scenario.boots)
    for link in links:
        for end in (link.src, link.dst):
            if end != BASE_STATION_ID and end not in node_ids:
                raise ScenarioError(
                    "<topology>", None, f"topology references undeclared node {end}"
                )
    sim = Simulator(scenario.seed, scenario.sim_config())
    sim.attach_topology(links)
    sim.attach_noise(noise)
    kin = _fresh_key(sim)
    controller_master = _fresh_key(sim)
    global_key = _fresh_key(sim)
    registry = registry_from_links(node_ids, mutual_adjacency(links, node_ids))
    bs = BaseStation(sim, controller_master, global_key, registry, node_ids)
    sim.add_entity(BASE_STATION_ID, bs)
    nodes: dict[int, Node] = {}
    for nid in sorted(scenario.boots):
        store = preload(kin, nid, controller_master, global_key, scenario.chain_length)
        node = Node(sim, store, scenario.protocol)
        sim.add_entity(nid, node)
        sim.schedule_boot(nid, scenario.boots[nid])
        nodes[nid] = node
    adversary = Adversary(sim, scenario.protocol)
    for action in scenario.adversary:
        adversary.schedule(action)
    return Deployment(scenario, sim, nodes, bs, adversary, links)


def load_deployment(scenario: Scenario, base_dir: Path | str = ".") -> Deployment:
    """Read the scenario's topology and noise files and build the run."""
    base = Path(base_dir)
    if scenario.topology_path is None:
        raise ScenarioError("<scenario>", None, "missing [topology] file")
    if scenario.noise_path is None:
        raise ScenarioError("<scenario>", None, "missing [noise] file")
    topo_file = base / scenario.topology_path
    noise_file = base / scenario.noise_path
    try:
        topo_text = topo_file.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(str(topo_file), None, f"cannot read topology: {exc}") from exc
    try:
        noise_text = noise_file.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(str(noise_file), None, f"cannot read noise trace: {exc}") from exc
    try:
        links = load_topology(topo_text)
    except ParseError as exc:
        raise ScenarioError(str(topo_file), exc.lineno, str(exc)) from exc
    try:
        noise = load_noise(noise_text)
    except ParseError as exc:
        raise ScenarioError(str(noise_file), exc.lineno, str(exc)) from exc
    return deploy(scenario, links, noise)


# -- synthetic scenarios for sweeps and tests ------------------------------------

QUIET_NOISE = NoiseTrace(samples=tuple([-98] * 100))
LOSSLESS = float("-inf")


def regular_topology(
    n: int,
    degree: int,
    seed: int,
    gain: float = -54.0,
    bs_gain: float = -60.0,
    bs_star: bool = True,
) -> list[LinkGain]:
    """Connected fixed-degree random topology over ids 1..n, symmetric
    gains, with the controller starred to every node (its broadcasts are
    assumed to reach the whole deployment)."""
    if n < 1:
        raise ValueError("need at least one node")
    if degree >= n:
        graph = nx.complete_graph(n)
    else:
        attempt = 0
        while True:
            graph = nx.random_regular_graph(degree, n, seed=seed + 1000 * attempt)
            if nx.is_connected(graph):
                break
            attempt += 1
            if attempt > 50:
                raise RuntimeError("could not draw a connected regular graph")
    links = []
    for a, b in graph.edges():
        u, v = a + 1, b + 1
        links.append(LinkGain(u, v, gain))
        links.append(LinkGain(v, u, gain))
    if bs_star:
        for u in range(1, n + 1):
            links.append(LinkGain(BASE_STATION_ID, u, bs_gain))
            links.append(LinkGain(u, BASE_STATION_ID, bs_gain))
    return links


def synthetic_deployment(
    n: int,
    degree: int,
    seed: int,
    protocol: ProtocolConfig = ProtocolConfig(),
    lossless: bool = True,
    adversary: list[AdversaryAction] | None = None,
    boot_base: int = 1000,
    boot_spread: int = 0,
    until: int | None = None,
    noise: NoiseTrace = QUIET_NOISE,
) -> Deployment:
    """In-memory deployment on a random regular topology; boots start at
    ``boot_base`` and step by ``boot_spread`` per node id."""
    boots = {i: boot_base + boot_spread * (i - 1) for i in range(1, n + 1)}
    max_boot = max(boots.values())
    sc = Scenario(
        seed=seed,
        boots=boots,
        protocol=protocol,
        until=until if until is not None else max_boot + protocol.t_min + 2_000_000,
        snr_threshold=LOSSLESS if lossless else None,
        adversary=list(adversary or []),
    )
    links = regular_topology(n, degree, seed)
    return deploy(sc, links, noise)
