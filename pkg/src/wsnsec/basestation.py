"""Controller node: individual keys on demand, HELP-to-ALERT handling,
sequence-number report validation, and network-wide rekeying."""

from __future__ import annotations

from typing import TYPE_CHECKING

from . import crypto
from .crypto import KEY_SIZE, NONCE_SIZE, ZERO_KEY, encode_id
from .keystore import BASE_STATION_ID
from .packets import BROADCAST, FrameError, Packet, PacketType, decode
from .protocol import EMPTY_DIGEST, neighbor_digest

if TYPE_CHECKING:
    from .sim import Simulator


class BaseStation:
    """Single controller instance, event-loop-owned.

    Individual keys are never stored; they are recomputed from the
    controller master secret whenever needed.
    """

    def __init__(
        self,
        sim: "Simulator",
        master_key: bytes,
        global_key: bytes,
        expected_registry: dict[int, tuple[bytes, int]],
        deployed: set[int],
        uid: int = BASE_STATION_ID,
    ) -> None:
        self.sim = sim
        self.master_key = master_key
        self.global_key = global_key
        self.expected_registry = dict(expected_registry)
        self.deployed = set(deployed)
        self.uid = uid
        self.node_id = BASE_STATION_ID
        self.revoked: set[int] = set()
        self.report_log: dict[int, tuple[int, bytes, int]] = {}
        self.bad_mac = 0
        self.rekey_epoch = 0
        self._alert_seq = 0
        self._nonce_counter = 0
        self._seen: set[bytes] = set()

    # -- event-loop protocol ------------------------------------------------

    def on_boot(self) -> None:
        pass  # always powered; nothing to start

    def on_timer(self, name: str) -> None:
        pass

    def handle_frame(self, frame: bytes) -> None:
        if frame in self._seen:
            return  # relayed copy of something already handled
        self._seen.add(frame)
        try:
            pkt = decode(frame)
        except FrameError:
            self.sim.trace_event(self.node_id, "drop", {"reason": "malformed"})
            return
        if pkt.ptype is PacketType.HELP:
            self.on_help(pkt)
        elif pkt.ptype is PacketType.REPORT:
            self.on_report(pkt)

    # -- key derivation -------------------------------------------------------

    def individual_key(self, u: int) -> bytes:
        """Stateless: a pure function of the controller master and u."""
        if u == BASE_STATION_ID:
            raise ValueError("the base station has no individual key")
        self.sim.metrics.record("prf", self.uid)
        return crypto.derive_individual(self.master_key, u)

    # -- compromise handling ---------------------------------------------------

    def on_help(self, pkt: Packet) -> None:
        victim = pkt.src
        if victim not in self.deployed:
            self.sim.trace_event(self.node_id, "drop", {"reason": "unknown_node", "peer": victim})
            return
        key = self.individual_key(victim)
        self.sim.metrics.record("mac", self.uid)
        if not crypto.verify(key, pkt.header_and_payload(), pkt.mac):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self.sim.trace_event(self.node_id, "drop", {"reason": "bad_mac", "peer": victim})
            return
        self.sim.trace_event(self.node_id, "help_rx", {"victim": victim})
        self._revoke_and_alert(victim)

    def _revoke_and_alert(self, victim: int) -> None:
        first = victim not in self.revoked
        self.revoked.add(victim)
        self._broadcast_alert(victim)
        if first:
            self.global_rekey()

    def _broadcast_alert(self, victim: int) -> None:
        self._alert_seq += 1
        payload = self._alert_seq.to_bytes(4, "big") + encode_id(victim)
        pkt = Packet(PacketType.ALERT, self.node_id, BROADCAST, payload)
        self.sim.metrics.record("mac", self.uid)
        pkt = pkt.with_mac(crypto.mac(self.global_key, pkt.header_and_payload()))
        self._seen.add(pkt.encode())
        self.sim.transmit(self.uid, pkt)
        self.sim.trace_event(self.node_id, "alert_tx", {"danger": victim, "seq": self._alert_seq})

    def global_rekey(self) -> None:
        """Rotate the network-wide key; revoked nodes receive nothing."""
        if not self.revoked:
            raise ValueError("global rekey requires at least one revoked node")
        self.rekey_epoch += 1
        key = self.sim.rng.randbytes(KEY_SIZE)
        while key == ZERO_KEY:
            key = self.sim.rng.randbytes(KEY_SIZE)
        self.global_key = key
        targets = sorted(self.deployed - self.revoked)
        plain = self.rekey_epoch.to_bytes(4, "big") + key
        for u in targets:
            iku = self.individual_key(u)
            self._nonce_counter += 1
            nonce = encode_id(self.node_id) + self._nonce_counter.to_bytes(6, "big")
            self.sim.metrics.record("enc", self.uid)
            body = crypto.encrypt(iku, plain, nonce)
            pkt = Packet(PacketType.GLOBAL_REKEY, self.node_id, u, nonce + body)
            self.sim.metrics.record("mac", self.uid)
            pkt = pkt.with_mac(crypto.mac(iku, pkt.header_and_payload()))
            self._seen.add(pkt.encode())
            self.sim.transmit(self.uid, pkt)
        self.sim.trace_event(
            self.node_id, "rekey", {"epoch": self.rekey_epoch, "targets": len(targets)}
        )

    # -- report validation -----------------------------------------------------

    def on_report(self, pkt: Packet) -> None:
        src = pkt.src
        if src not in self.deployed:
            self.sim.trace_event(self.node_id, "drop", {"reason": "unknown_node", "peer": src})
            return
        key = self.individual_key(src)
        self.sim.metrics.record("mac", self.uid)
        if not crypto.verify(key, pkt.header_and_payload(), pkt.mac):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self.sim.trace_event(self.node_id, "drop", {"reason": "bad_mac", "peer": src})
            return
        if len(pkt.payload) != NONCE_SIZE + 4 + 8:
            self.sim.trace_event(self.node_id, "drop", {"reason": "malformed_report", "peer": src})
            return
        nonce = pkt.payload[:NONCE_SIZE]
        self.sim.metrics.record("enc", self.uid)
        plain = crypto.decrypt(key, pkt.payload[NONCE_SIZE:], nonce)
        counter = int.from_bytes(plain[:4], "big")
        digest = plain[4:]
        self.report_log[src] = (counter, digest, self.sim.now)
        expected_digest, expected_count = self.expected_registry.get(
            src, (EMPTY_DIGEST, 0)
        )
        slack = expected_count  # each neighbor may add one cluster install
        if digest != expected_digest:
            verdict, reason = "SUSPICIOUS", "digest_mismatch"
        elif not expected_count <= counter <= expected_count + slack:
            verdict, reason = "SUSPICIOUS", "counter_range"
        else:
            verdict, reason = "CONSISTENT", "ok"
        self.sim.trace_raw(
            f"t={self.sim.now} bs verdict node={src} {verdict} reason={reason}"
        )
        if verdict == "SUSPICIOUS":
            self._revoke_and_alert(src)


def registry_from_links(
    node_ids: set[int], mutual_neighbors: dict[int, set[int]]
) -> dict[int, tuple[bytes, int]]:
    """Expected-report registry from deployment adjacency: digest of each
    node's mutual neighbor set plus its size."""
    registry = {}
    for u in sorted(node_ids):
        neigh = sorted(mutual_neighbors.get(u, set()))
        registry[u] = (neighbor_digest(neigh), len(neigh))
    return registry
