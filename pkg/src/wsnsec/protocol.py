"""Per-node protocol state machine.

Lifecycle: a preloaded node boots, broadcasts a HELLO, answers neighbor
HELLOs with authenticated ACKs, installs pairwise keys from verified
ACKs, and at the erasure deadline drops its bootstrap material,
distributes a fresh cluster key, and reports its neighborhood to the
controller. A periodic self-check turns a compromise into a HELP
broadcast; ALERT messages from the controller revoke the named node.

Every key install happens strictly after MAC verification; the
``installs_without_verify`` counter on the simulator exists to prove it.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import TYPE_CHECKING

from . import crypto
from .crypto import KEY_SIZE, NONCE_SIZE, ZERO_KEY, encode_id
from .keystore import BASE_STATION_ID, BlockedPeerError, KeyStore
from .packets import BROADCAST, FrameError, Packet, PacketType, decode

if TYPE_CHECKING:
    from .sim import Simulator

# Broadcast control frames are flooded hop by hop (with per-node
# duplicate suppression) so they cross multi-hop topologies. Unicast
# traffic, including node<->controller exchanges, is strictly one-hop:
# the controller is assumed radio-reachable (powered, starred into the
# deployment).
RELAYED_TYPES = frozenset({PacketType.HELP, PacketType.ALERT})

DIGEST_SIZE = 8
EMPTY_DIGEST = b"\x00" * DIGEST_SIZE


class NodePhase(enum.Enum):
    PRELOADED = "PRELOADED"
    DISCOVERING = "DISCOVERING"
    ESTABLISHED = "ESTABLISHED"
    REVOKED = "REVOKED"


@dataclass(frozen=True)
class ProtocolConfig:
    """Timing and detection parameters, in microsecond ticks."""

    t_min: int = 10_000_000          # bootstrap erasure deadline after boot
    t_p: int = 1_000_000             # periodic self-check interval
    hello_jitter: int | None = None  # HELLO delay bound; default t_min // 10
    p_detect: float = 1.0            # tamper-sentinel success per check
    block_duration: int | None = None  # revocation block; default 10 * t_p

    def __post_init__(self) -> None:
        if self.t_min <= 0:
            raise ValueError("t_min must be positive")
        if self.t_p <= 0:
            raise ValueError("t_p must be positive")
        if not 0.0 <= self.p_detect <= 1.0:
            raise ValueError("p_detect must be in [0, 1]")
        if self.hello_jitter is None:
            object.__setattr__(self, "hello_jitter", self.t_min // 10)
        if self.block_duration is None:
            object.__setattr__(self, "block_duration", 10 * self.t_p)
        if self.hello_jitter < 0 or self.block_duration < 0:
            raise ValueError("durations must be non-negative")


def neighbor_digest(ids) -> bytes:
    """Order-independent 8-octet digest of a neighbor id set; all-zero
    for an empty set."""
    ids = sorted(ids)
    if not ids:
        return EMPTY_DIGEST
    blob = b"".join(encode_id(i) for i in ids)
    return hashlib.sha256(blob).digest()[:DIGEST_SIZE]


class Node:
    """One sensor node; mutated only by the event loop."""

    def __init__(
        self,
        sim: "Simulator",
        store: KeyStore,
        config: ProtocolConfig,
        uid: int | None = None,
    ) -> None:
        self.sim = sim
        self.store = store
        self.config = config
        self.node_id = store.node_id
        self.uid = uid if uid is not None else store.node_id
        self.phase = NodePhase.PRELOADED
        self.seq = 0  # key-establishment counter
        self.boot_time: int | None = None
        self.last_pairwise_install: int | None = None
        self.bad_mac = 0
        self.compromised = False
        self._help_fired = False
        self._help_attempts = 0
        self._acked: set[int] = set()  # peers already answered with an ACK
        self._seen_relay: set[bytes] = set()
        self._global_epoch = 0
        self._nonce_counter = 0

    # -- helpers -------------------------------------------------------

    def _trace(self, ev: str, **detail) -> None:
        self.sim.trace_event(self.node_id, ev, detail)

    def _next_nonce(self) -> bytes:
        self._nonce_counter += 1
        return encode_id(self.node_id) + self._nonce_counter.to_bytes(6, "big")

    def _fresh_key(self) -> bytes:
        key = self.sim.rng.randbytes(KEY_SIZE)
        while key == ZERO_KEY:
            key = self.sim.rng.randbytes(KEY_SIZE)
        return key

    def _mac(self, key: bytes, pkt: Packet) -> Packet:
        self.sim.metrics.record("mac", self.uid)
        return pkt.with_mac(crypto.mac(key, pkt.header_and_payload()))

    def _verify(self, key: bytes, pkt: Packet) -> bool:
        self.sim.metrics.record("mac", self.uid)
        return crypto.verify(key, pkt.header_and_payload(), pkt.mac)

    def _prf_master(self, peer: int) -> bytes:
        """Peer master key from the bootstrap key, cached until erasure."""
        cache = self.store.neighbor_masters
        if cache is not None and peer in cache:
            return cache[peer]
        self.sim.metrics.record("prf", self.uid)
        key = crypto.derive_master(self.store.initial_key, peer)
        if cache is not None:
            cache[peer] = key
        return key

    def _pairwise_with(self, peer: int, peer_master: bytes) -> bytes:
        self.sim.metrics.record("prf", self.uid)
        if peer > self.node_id:
            return crypto.derive_pairwise(peer_master, self.node_id)
        return crypto.derive_pairwise(self.store.own_master, peer)

    def _record_install(self, verified: bool) -> None:
        if not verified:
            self.sim.counters["installs_without_verify"] += 1

    # -- boot and timers --------------------------------------------------

    def on_boot(self) -> None:
        if self.phase is not NodePhase.PRELOADED:
            self._trace("boot_ignored", phase=self.phase.value)
            return
        now = self.sim.now
        self.boot_time = now
        self.phase = NodePhase.DISCOVERING
        self._trace("boot", phase=self.phase.value)
        jitter = (
            self.sim.rng.randint(0, self.config.hello_jitter)
            if self.config.hello_jitter > 0
            else 0
        )
        self.sim.schedule_timer(self.uid, "hello", now + jitter)
        self.sim.schedule_timer(self.uid, "tmin", now + self.config.t_min)
        self.sim.schedule_timer(self.uid, "check", now + self.config.t_p)

    def on_timer(self, name: str) -> None:
        if name == "tmin":
            self._on_tmin_expired()
            return
        if self.phase is NodePhase.REVOKED:
            return
        if name == "hello":
            self._send_hello()
        elif name == "check":
            self._periodic_check()

    # -- discovery ---------------------------------------------------------

    def _send_hello(self) -> None:
        pkt = Packet(PacketType.HELLO, self.node_id, BROADCAST, encode_id(self.node_id))
        self.sim.transmit(self.uid, pkt)

    def _send_ack(self, dst: int) -> None:
        pkt = Packet(PacketType.ACK, self.node_id, dst, encode_id(self.node_id))
        self.sim.transmit(self.uid, self._mac(self.store.own_master, pkt))
        self._acked.add(dst)
        self._trace("ack_tx", peer=dst)

    def on_hello(self, pkt: Packet) -> None:
        s = pkt.src
        now = self.sim.now
        if s == self.node_id:
            self._trace("drop", reason="own_id", peer=s)
            return
        if self.store.is_blocked(s, now):
            self._trace("drop", reason="blocked", peer=s)
            return
        if s in self._acked:
            self._trace("drop", reason="dup_hello", peer=s)
            return
        if self.store.initial_key is None and s not in self.store.pairwise:
            self._trace("drop", reason="stranger", peer=s)
            return
        self._send_ack(s)

    def on_ack(self, pkt: Packet) -> None:
        v = pkt.src
        now = self.sim.now
        if v == self.node_id:
            return
        if self.store.initial_key is None:
            self._trace("drop", reason="stranger_ack", peer=v)
            return
        if self.store.is_blocked(v, now):
            self._trace("drop", reason="blocked", peer=v)
            return
        kv = self._prf_master(v)
        if not self._verify(kv, pkt):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self._trace("drop", reason="bad_mac", peer=v)
            return
        if v not in self.store.pairwise:
            key = self._pairwise_with(v, kv)
            self._record_install(verified=True)
            try:
                self.store.install_pairwise(v, key, now)
            except BlockedPeerError:
                self._trace("drop", reason="blocked", peer=v)
                return
            self.seq += 1
            self.last_pairwise_install = now
            self._trace("pairwise_install", peer=v, seq=self.seq)
        # First contact through the peer's ACK (staggered boots): answer
        # with our own ACK so the peer can complete the handshake too.
        if v not in self._acked:
            self._send_ack(v)

    # -- erasure deadline -----------------------------------------------

    def _on_tmin_expired(self) -> None:
        if self.phase is NodePhase.REVOKED:
            # The deadline is absolute: even an excluded node sheds its
            # bootstrap material, it just takes no further part.
            self.store.erase_bootstrap()
            self._trace("erase", neighbors=len(self.store.pairwise))
            return
        if self.phase is not NodePhase.DISCOVERING:
            return
        self.store.erase_bootstrap()
        self._trace("erase", neighbors=len(self.store.pairwise))
        self.phase = NodePhase.ESTABLISHED
        self._trace("phase", phase=self.phase.value)
        self._distribute_cluster_key()
        self._send_report()

    def _distribute_cluster_key(self) -> None:
        key = self._fresh_key()
        self.store.cluster_sent = key
        self._trace("cluster_gen", neighbors=len(self.store.pairwise))
        for peer in sorted(self.store.pairwise):
            pair_key = self.store.pairwise[peer]
            nonce = self._next_nonce()
            self.sim.metrics.record("enc", self.uid)
            wrapped = crypto.encrypt(pair_key, key, nonce)
            pkt = Packet(PacketType.CLUSTER_KEY, self.node_id, peer, nonce + wrapped)
            self.sim.transmit(self.uid, self._mac(pair_key, pkt))

    def _send_report(self) -> None:
        ids = sorted(self.store.pairwise)
        digest = neighbor_digest(ids)
        counter = self.seq & 0xFFFFFFFF
        plain = counter.to_bytes(4, "big") + digest
        nonce = self._next_nonce()
        self.sim.metrics.record("enc", self.uid)
        body = crypto.encrypt(self.store.individual, plain, nonce)
        pkt = Packet(PacketType.REPORT, self.node_id, BASE_STATION_ID, nonce + body)
        pkt = self._mac(self.store.individual, pkt)
        self.sim.transmit(self.uid, pkt)
        self._trace("report_tx", counter=counter, digest=digest.hex())

    # -- compromise detection ---------------------------------------------

    def _periodic_check(self) -> None:
        fired = False
        if self.compromised and not self._help_fired:
            if self.sim.rng.random() < self.config.p_detect:
                self._help_fired = True
                fired = True
        self._trace("check", fired=int(fired))
        if self._help_fired:
            # Keep shouting until the controller's ALERT takes us out.
            self._send_help()
        self.sim.schedule_timer(self.uid, "check", self.sim.now + self.config.t_p)

    def _send_help(self) -> None:
        self._help_attempts += 1
        payload = encode_id(self.node_id) + self._help_attempts.to_bytes(2, "big")
        pkt = Packet(PacketType.HELP, self.node_id, BROADCAST, payload)
        pkt = self._mac(self.store.individual, pkt)
        self._seen_relay.add(pkt.encode())
        self.sim.transmit(self.uid, pkt)
        self._trace("help_tx", attempt=self._help_attempts)

    def on_alert(self, pkt: Packet) -> None:
        if self.store.global_key is None:
            self._trace("drop", reason="no_global_key")
            return
        if not self._verify(self.store.global_key, pkt):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self._trace("drop", reason="bad_mac", peer=pkt.src)
            return
        if len(pkt.payload) != 6:
            self._trace("drop", reason="malformed_alert")
            return
        danger = int.from_bytes(pkt.payload[4:6], "big")
        self._trace("alert_rx", danger=danger)
        if danger == self.node_id:
            self.phase = NodePhase.REVOKED
            self._trace("phase", phase=self.phase.value)
            return
        was_neighbor = danger in self.store.pairwise
        self.store.revoke_peer(danger, self.sim.now, self.config.block_duration)
        self._acked.discard(danger)
        self._trace("revoke", victim=danger, was_neighbor=int(was_neighbor))
        if was_neighbor and self.phase is NodePhase.ESTABLISHED:
            self._trace("cluster_regen", reason="revocation")
            self._distribute_cluster_key()

    # -- key installs from the network ------------------------------------

    def on_cluster_key(self, pkt: Packet) -> None:
        s = pkt.src
        pair_key = self.store.pairwise.get(s)
        if pair_key is None:
            self._trace("drop", reason="no_pairwise", peer=s)
            return
        if not self._verify(pair_key, pkt):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self._trace("drop", reason="bad_mac", peer=s)
            return
        if len(pkt.payload) != NONCE_SIZE + KEY_SIZE:
            self._trace("drop", reason="malformed_cluster_key", peer=s)
            return
        nonce, wrapped = pkt.payload[:NONCE_SIZE], pkt.payload[NONCE_SIZE:]
        self.sim.metrics.record("enc", self.uid)
        key = crypto.decrypt(pair_key, wrapped, nonce)
        self._record_install(verified=True)
        self.store.cluster_received[s] = key
        self.seq += 1
        self._trace("cluster_install", peer=s, seq=self.seq)

    def on_global_rekey(self, pkt: Packet) -> None:
        if not self._verify(self.store.individual, pkt):
            self.bad_mac += 1
            self.sim.counters["bad_mac"] += 1
            self._trace("drop", reason="bad_mac", peer=pkt.src)
            return
        if len(pkt.payload) != NONCE_SIZE + 4 + KEY_SIZE:
            self._trace("drop", reason="malformed_rekey")
            return
        nonce = pkt.payload[:NONCE_SIZE]
        self.sim.metrics.record("enc", self.uid)
        plain = crypto.decrypt(self.store.individual, pkt.payload[NONCE_SIZE:], nonce)
        epoch = int.from_bytes(plain[:4], "big")
        if epoch <= self._global_epoch:
            self._trace("drop", reason="stale_rekey", epoch=epoch)
            return
        self._record_install(verified=True)
        self.store.global_key = plain[4:]
        self._global_epoch = epoch
        self.seq += 1
        self._trace("global_install", epoch=epoch, seq=self.seq)

    def on_data(self, pkt: Packet) -> None:
        self._trace("data_rx", peer=pkt.src, octets=len(pkt.payload))

    # -- frame entry point --------------------------------------------------

    def handle_frame(self, frame: bytes) -> None:
        if self.phase in (NodePhase.PRELOADED, NodePhase.REVOKED):
            return  # radio off / excluded from the network
        try:
            pkt = decode(frame)
        except FrameError:
            self._trace("drop", reason="malformed")
            return
        if pkt.ptype in RELAYED_TYPES:
            if frame in self._seen_relay:
                return
            self._seen_relay.add(frame)
            self.sim.transmit(self.uid, pkt)  # flood one hop onward
        elif not pkt.is_broadcast and pkt.dst != self.node_id:
            return  # overheard unicast for someone else
        handler = {
            PacketType.HELLO: self.on_hello,
            PacketType.ACK: self.on_ack,
            PacketType.CLUSTER_KEY: self.on_cluster_key,
            PacketType.ALERT: self.on_alert,
            PacketType.GLOBAL_REKEY: self.on_global_rekey,
            PacketType.DATA: self.on_data,
        }.get(pkt.ptype)
        if handler is not None:
            handler(pkt)
