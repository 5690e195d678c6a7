"""Scripted attacker actions against a running simulation, plus the
brute-force key-closure oracles used to check damage-localization and
revocation claims."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from itertools import combinations
from typing import TYPE_CHECKING

from . import crypto
from .keystore import KeyStore
from .packets import BROADCAST, FrameError, Packet, PacketType, decode
from .protocol import Node, NodePhase, ProtocolConfig
from .sim import EventKind

if TYPE_CHECKING:
    from .sim import Simulator


# -- scripted actions ---------------------------------------------------------

@dataclass(frozen=True)
class Compromise:
    at: int
    node: int


@dataclass(frozen=True)
class HelloFlood:
    at: int
    fake_id: int
    power_boost: float = 0.0  # flood is injected; boost kept for the record


@dataclass(frozen=True)
class Alter:
    at: int
    src: int
    dst: int
    mask: bytes


@dataclass(frozen=True)
class Replay:
    at: int
    ptype: PacketType | None = None
    src: int | None = None
    dst: int | None = None
    nth: int = 0


@dataclass(frozen=True)
class Clone:
    at: int
    node: int
    links: tuple[tuple[int, float], ...]  # (host id, gain both ways)


AdversaryAction = Compromise | HelloFlood | Alter | Replay | Clone


@dataclass(frozen=True)
class Snapshot:
    node: int
    time: int
    store: KeyStore


class _Bound:
    def __init__(self, adversary: "Adversary", action: AdversaryAction) -> None:
        self.adversary = adversary
        self.action = action

    def execute(self, sim) -> None:
        self.adversary.perform(self.action)


class Adversary:
    """Executes scripted actions as ordinary events in the single loop."""

    def __init__(self, sim: "Simulator", config: ProtocolConfig) -> None:
        self.sim = sim
        self.config = config
        self.snapshots: list[Snapshot] = []
        self.latest: dict[int, Snapshot] = {}
        self.clones: list[Node] = []

    def schedule(self, action: AdversaryAction) -> None:
        self.sim.schedule(action.at, EventKind.ADVERSARY, (_Bound(self, action),))

    def perform(self, action: AdversaryAction) -> None:
        if isinstance(action, Compromise):
            self.compromise(action.node)
        elif isinstance(action, HelloFlood):
            self.hello_flood(action.fake_id)
        elif isinstance(action, Alter):
            self.alter(action.src, action.dst, action.mask)
        elif isinstance(action, Replay):
            self.replay(action)
        elif isinstance(action, Clone):
            self.clone(action.node, action.links)
        else:
            raise TypeError(f"unknown adversary action: {action!r}")

    # -- individual actions ---------------------------------------------------

    def compromise(self, node_id: int) -> None:
        """Copy the victim's entire key inventory and mark it tampered."""
        node = self.sim.entities.get(node_id)
        if node is None or not isinstance(node, Node):
            self.sim.trace_event(node_id, "compromise_noop", {"reason": "no_such_node"})
            return
        if node.phase is NodePhase.REVOKED:
            self.sim.trace_event(node_id, "compromise_noop", {"reason": "revoked"})
            return
        snap = Snapshot(node=node_id, time=self.sim.now, store=copy.deepcopy(node.store))
        self.snapshots.append(snap)
        self.latest[node_id] = snap
        node.compromised = True
        self.sim.trace_event(
            node_id,
            "compromise",
            {"has_kin": int(snap.store.initial_key is not None)},
        )

    def hello_flood(self, fake_id: int) -> None:
        """High-power HELLO under a fabricated id, heard by every node."""
        pkt = Packet(PacketType.HELLO, fake_id, BROADCAST, crypto.encode_id(fake_id))
        targets = sorted(
            uid for uid, ent in self.sim.entities.items() if isinstance(ent, Node)
        )
        for uid in targets:
            self.sim.schedule(self.sim.now, EventKind.INJECT, (uid, pkt.encode()))
        self.sim.trace_event(fake_id, "hello_flood", {"targets": len(targets)})

    def alter(self, src: int, dst: int, mask: bytes) -> None:
        """Flip bits on every subsequent frame crossing one link."""
        self.sim.tamper[(src, dst)] = mask
        self.sim.trace_event(src, "alter_armed", {"dst": dst, "mask": mask.hex()})

    def replay(self, action: Replay) -> None:
        """Re-inject a previously overheard frame, unmodified."""
        matches = []
        for t, _src_uid, frame in self.sim.frame_log:
            if t >= self.sim.now:
                break
            try:
                pkt = decode(frame)
            except FrameError:
                continue
            if action.ptype is not None and pkt.ptype is not action.ptype:
                continue
            if action.src is not None and pkt.src != action.src:
                continue
            if action.dst is not None and pkt.dst != action.dst:
                continue
            matches.append((frame, pkt))
        if action.nth >= len(matches):
            self.sim.trace_event(0, "replay_noop", {"matches": len(matches)})
            return
        frame, pkt = matches[action.nth]
        if pkt.is_broadcast:
            targets = sorted(
                uid for uid, ent in self.sim.entities.items() if isinstance(ent, Node)
            )
        else:
            targets = [
                uid
                for uid, ent in self.sim.entities.items()
                if getattr(ent, "node_id", None) == pkt.dst
            ]
        for uid in targets:
            self.sim.schedule(self.sim.now, EventKind.INJECT, (uid, frame))
        self.sim.trace_event(
            pkt.src, "replay", {"type": pkt.ptype.name, "dst": pkt.dst, "targets": len(targets)}
        )

    def clone(self, victim: int, links: tuple[tuple[int, float], ...]) -> None:
        """Deploy a puppet running the real protocol under the victim's id
        and captured keys, at a new radio position."""
        snap = self.latest.get(victim)
        if snap is None:
            self.sim.trace_event(victim, "clone_noop", {"reason": "no_snapshot"})
            return
        uid = self.sim.allocate_clone_uid()
        puppet = Node(self.sim, copy.deepcopy(snap.store), self.config, uid=uid)
        self.sim.add_entity(uid, puppet)
        for host, gain in links:
            self.sim.add_link(uid, host, gain)
            self.sim.add_link(host, uid, gain)
        self.sim.schedule_boot(uid, self.sim.now)
        self.clones.append(puppet)
        self.sim.trace_event(
            victim, "clone", {"uid": uid, "links": len(links), "has_kin": int(snap.store.initial_key is not None)}
        )


# -- closure oracles -----------------------------------------------------------

def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _known_masters(snapshot: KeyStore, node_ids) -> dict[int, bytes]:
    masters: dict[int, bytes] = {}
    if snapshot.initial_key is not None:
        for i in node_ids:
            masters[i] = crypto.derive_master(snapshot.initial_key, i)
    else:
        masters[snapshot.node_id] = snapshot.own_master
        for peer, key in (snapshot.neighbor_masters or {}).items():
            masters[peer] = key
    return masters


def derivable_pairwise(
    snapshot: KeyStore,
    node_ids,
    links: set[tuple[int, int]] | None = None,
) -> set[tuple[int, int]]:
    """Every (lo, hi) pair whose pairwise key the snapshot holder can
    compute: the exact closure of the captured keys under the key
    hierarchy (a pair's key needs the higher endpoint's master key),
    plus the pairwise keys held outright.

    With ``links`` given, the closure is restricted to pairs that
    actually share a radio link, i.e. keys the network ever establishes
    and uses.
    """
    ids = sorted(set(node_ids))
    masters = _known_masters(snapshot, ids)
    pairs: set[tuple[int, int]] = set()
    for a, b in combinations(ids, 2):  # a < b, so b is the key-owning side
        if b in masters:
            pairs.add((a, b))
    for peer in snapshot.pairwise:
        pairs.add(_pair(snapshot.node_id, peer))
    if links is not None:
        normalized = {_pair(a, b) for a, b in links}
        pairs &= normalized
    return pairs


def attacker_pairwise_key(snapshot: KeyStore, a: int, b: int) -> bytes | None:
    """The concrete key bytes for pair (a, b) if derivable, else None."""
    lo, hi = _pair(a, b)
    masters = _known_masters(snapshot, [lo, hi])
    if hi in masters:
        return crypto.derive_pairwise(masters[hi], lo)
    if snapshot.node_id in (lo, hi):
        peer = hi if snapshot.node_id == lo else lo
        return snapshot.pairwise.get(peer)
    return None


def active_links(stores: dict[int, KeyStore]) -> set[tuple[int, int]]:
    """Pairs whose two stores currently hold octet-identical keys for
    each other; only these keys protect any live traffic."""
    out = set()
    for u, store in stores.items():
        for peer, key in store.pairwise.items():
            other = stores.get(peer)
            if other is not None and other.pairwise.get(u) == key:
                out.add(_pair(u, peer))
    return out


# -- detection evaluation ---------------------------------------------------

@dataclass(frozen=True)
class VictimReport:
    victim: int
    t_compromise: int
    t_help: int | None
    t_full_revocation: int | None
    neighbor_count: int
    neighbors_revoked: int
    residual_active_pairs: frozenset
    global_rotated: bool


def evaluate_detection(
    sim: "Simulator",
    adversary: Adversary,
    mutual_neighbors: dict[int, set[int]],
    stores: dict[int, KeyStore],
    bs_global_key: bytes,
) -> list[VictimReport]:
    """Per compromised node: detection latency, revocation coverage, and
    what the captured keys are still worth afterwards."""
    from .sim import parse_trace

    events = parse_trace(sim.trace)
    reports = []
    for snap in adversary.snapshots:
        victim = snap.node
        helps = [
            e for e in events
            if e.get("ev") == "help_tx" and e["node"] == victim and e["t"] >= snap.time
        ]
        t_help = helps[0]["t"] if helps else None
        neighbors = mutual_neighbors.get(victim, set())
        revoke_times = {}
        for e in events:
            if (
                e.get("ev") == "revoke"
                and e.get("victim") == str(victim)
                and e["node"] in neighbors
            ):
                revoke_times.setdefault(e["node"], e["t"])
        t_full = max(revoke_times.values()) if len(revoke_times) == len(neighbors) and neighbors else None
        residual = derivable_pairwise(
            snap.store, list(stores), links=active_links(stores)
        )
        rotated = all(
            stores[u].global_key != snap.store.global_key
            for u in stores
            if u != victim and stores[u].global_key is not None
        ) and bs_global_key != snap.store.global_key
        reports.append(
            VictimReport(
                victim=victim,
                t_compromise=snap.time,
                t_help=t_help,
                t_full_revocation=t_full,
                neighbor_count=len(neighbors),
                neighbors_revoked=len(revoke_times),
                residual_active_pairs=frozenset(residual),
                global_rotated=rotated,
            )
        )
    return reports
