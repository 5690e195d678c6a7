"""Per-node key inventory: preload, derivation, erasure, revocation,
and the storage-accounting view.

A store belongs to exactly one simulated node and is only ever mutated
from the event loop. Key bytes live here; protocol logic lives in
:mod:`wsnsec.protocol`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import (
    DOM_CHAIN,
    KeyChain,
    ZERO_KEY,
    derive_individual,
    derive_master,
    encode_id,
    generate_key_chain,
    prf,
)

BASE_STATION_ID = 0
DEFAULT_CHAIN_LENGTH = 20
DEFAULT_ACCOUNTING_KEY_SIZE = 8  # octets per key in storage arithmetic


class BlockedPeerError(Exception):
    """Install attempted for a peer whose revocation block is active."""


@dataclass(frozen=True)
class StorageReport:
    """Key-count view of a store: chain + received-cluster + pairwise
    bookkeeping (2 per neighbor) + individual + network-wide key."""

    neighbor_count: int
    chain_length: int
    total_keys: int
    total_octets: int


@dataclass
class KeyStore:
    node_id: int
    initial_key: bytes | None
    own_master: bytes
    individual: bytes
    global_key: bytes | None
    chain: KeyChain
    pairwise: dict[int, bytes] = field(default_factory=dict)
    cluster_sent: bytes | None = None
    cluster_received: dict[int, bytes] = field(default_factory=dict)
    # Transient cache of neighbor master keys, discovery phase only.
    neighbor_masters: dict[int, bytes] | None = field(default_factory=dict)
    blocklist: dict[int, int] = field(default_factory=dict)  # id -> expiry tick

    # -- lifecycle ---------------------------------------------------

    def is_blocked(self, peer: int, now: int) -> bool:
        return self.blocklist.get(peer, -1) > now

    def install_pairwise(self, peer: int, key: bytes, now: int) -> None:
        """Record the shared key for ``peer``; refuses blocklisted peers."""
        if self.is_blocked(peer, now):
            raise BlockedPeerError(f"peer {peer} is blocklisted")
        self.pairwise[peer] = key

    def erase_bootstrap(self) -> None:
        """Drop the bootstrap key and every cached neighbor master.

        Idempotent; pairwise, cluster, individual and network-wide keys
        survive, as does this node's own master key (late deployers
        holding the bootstrap key can still authenticate us).
        """
        self.initial_key = None
        self.neighbor_masters = None

    def revoke_peer(self, victim: int, now: int, block_duration: int) -> None:
        """Delete any keys shared with ``victim`` and block it."""
        self.pairwise.pop(victim, None)
        self.cluster_received.pop(victim, None)
        if self.neighbor_masters is not None:
            self.neighbor_masters.pop(victim, None)
        self.blocklist[victim] = now + block_duration

    # -- accounting ---------------------------------------------------

    def storage_report(
        self, accounting_key_size: int = DEFAULT_ACCOUNTING_KEY_SIZE
    ) -> StorageReport:
        d = len(self.pairwise)
        l = len(self.chain)
        total_keys = l + d + 2 * d + 1 + 1
        return StorageReport(
            neighbor_count=d,
            chain_length=l,
            total_keys=total_keys,
            total_octets=total_keys * accounting_key_size,
        )

    # -- debug serialization -------------------------------------------

    def dump(self) -> str:
        """Key-value text dump, keys hex-encoded; absent keys render as
        the all-zero sentinel. Stable ordering for golden-file tests."""
        zero = ZERO_KEY.hex()

        def hx(k: bytes | None) -> str:
            return k.hex() if k is not None else zero

        lines = [
            f"node={self.node_id}",
            f"initial_key={hx(self.initial_key)}",
            f"own_master={hx(self.own_master)}",
            f"individual={hx(self.individual)}",
            f"global={hx(self.global_key)}",
            f"cluster_sent={hx(self.cluster_sent)}",
        ]
        for peer in sorted(self.pairwise):
            lines.append(f"pairwise[{peer}]={self.pairwise[peer].hex()}")
        for peer in sorted(self.cluster_received):
            lines.append(f"cluster_received[{peer}]={self.cluster_received[peer].hex()}")
        masters = self.neighbor_masters or {}
        for peer in sorted(masters):
            lines.append(f"neighbor_master[{peer}]={masters[peer].hex()}")
        for i, link in enumerate(self.chain.links):
            lines.append(f"chain[{i}]={link.hex()}")
        for peer in sorted(self.blocklist):
            lines.append(f"blocklist[{peer}]={self.blocklist[peer]}")
        return "\n".join(lines)


def preload(
    initial_key: bytes,
    node_id: int,
    controller_master: bytes,
    global_key: bytes,
    chain_length: int = DEFAULT_CHAIN_LENGTH,
) -> KeyStore:
    """Provision one node before simulated deployment.

    The controller derives the node's individual key and chain seed from
    its own master secret; the node's master key is derivable from the
    shared bootstrap key by every legitimate deployer.
    """
    if node_id == BASE_STATION_ID:
        raise ValueError("node id 0 is reserved for the base station")
    chain_seed = prf(controller_master, DOM_CHAIN + encode_id(node_id))
    return KeyStore(
        node_id=node_id,
        initial_key=initial_key,
        own_master=derive_master(initial_key, node_id),
        individual=derive_individual(controller_master, node_id),
        global_key=global_key,
        chain=generate_key_chain(chain_seed, chain_length),
    )
