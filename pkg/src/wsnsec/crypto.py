"""Cryptographic substrate: keyed PRF, message authentication, a
length-preserving stream cipher, and one-way key chains.

All keys are fixed-width byte strings (``KEY_SIZE`` octets). The PRF is
HMAC-SHA256 truncated to the key width; every derivation context gets its
own domain prefix so the individual / master / pairwise / wrapping
derivation trees can never collide.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

KEY_SIZE = 16  # octets per symmetric key
MAC_SIZE = 8   # octets per authentication tag
NONCE_SIZE = 8

# Domain-separation prefixes, one per derivation context.
DOM_INDIVIDUAL = b"\x01"    # node <-> controller keys
DOM_MASTER = b"\x02"        # per-node master keys from the bootstrap key
DOM_PAIRWISE = b"\x03"      # neighbor pairwise keys
DOM_CLUSTER_WRAP = b"\x04"  # stream-cipher keystream blocks
DOM_CHAIN = b"\x05"         # per-node one-way chain seeds

ZERO_KEY = b"\x00" * KEY_SIZE  # reserved "absent" sentinel in dumps


def encode_id(node_id: int) -> bytes:
    """Encode a node id as 2 big-endian octets (the wire framing width)."""
    if not 0 <= node_id <= 0xFFFF:
        raise ValueError(f"node id out of range: {node_id}")
    return node_id.to_bytes(2, "big")


def _check_key(key: bytes) -> None:
    if len(key) != KEY_SIZE:
        raise ValueError(f"key must be {KEY_SIZE} octets, got {len(key)}")


def prf(key: bytes, data: bytes) -> bytes:
    """Keyed pseudo-random function producing a fresh key.

    Deterministic; output is ``KEY_SIZE`` octets of HMAC-SHA256(key, data).
    The all-zero output is reserved as the "absent" sentinel and is
    rejected (probability ~2^-128, defensive only).
    """
    _check_key(key)
    if not data:
        raise ValueError("prf input must be non-empty")
    out = hmac.new(key, data, hashlib.sha256).digest()[:KEY_SIZE]
    if out == ZERO_KEY:
        raise ValueError("prf produced the reserved all-zero key")
    return out


def mac(key: bytes, message: bytes) -> bytes:
    """Authentication tag of ``MAC_SIZE`` octets over ``message``."""
    _check_key(key)
    return hmac.new(key, message, hashlib.sha256).digest()[:MAC_SIZE]


def verify(key: bytes, message: bytes, tag: bytes) -> bool:
    """Check ``tag`` against ``mac(key, message)`` in constant time."""
    if len(tag) != MAC_SIZE:
        raise ValueError(f"tag must be {MAC_SIZE} octets, got {len(tag)}")
    return hmac.compare_digest(mac(key, message), tag)


def _nonce_bytes(nonce: int | bytes) -> bytes:
    if isinstance(nonce, int):
        return nonce.to_bytes(NONCE_SIZE, "big")
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} octets, got {len(nonce)}")
    return bytes(nonce)


def encrypt(key: bytes, plaintext: bytes, nonce: int | bytes) -> bytes:
    """Length-preserving stream encryption.

    Keystream blocks are prf(key, wrap-prefix || nonce || block counter)
    XORed into the plaintext. The nonce must be unique per (key,
    direction); callers use a monotonic per-sender counter.
    """
    _check_key(key)
    n = _nonce_bytes(nonce)
    out = bytearray()
    block = 0
    while len(out) < len(plaintext):
        ks = prf(key, DOM_CLUSTER_WRAP + n + block.to_bytes(4, "big"))
        out.extend(ks)
        block += 1
    return bytes(a ^ b for a, b in zip(plaintext, out))


def decrypt(key: bytes, ciphertext: bytes, nonce: int | bytes) -> bytes:
    """Inverse of :func:`encrypt` (the stream construction is symmetric)."""
    return encrypt(key, ciphertext, nonce)


# --- key hierarchy derivations ------------------------------------------

def derive_individual(controller_master: bytes, node_id: int) -> bytes:
    """Node <-> controller key; the controller recomputes it on demand."""
    return prf(controller_master, DOM_INDIVIDUAL + encode_id(node_id))


def derive_master(initial_key: bytes, node_id: int) -> bytes:
    """Per-node master key, derivable by any holder of the bootstrap key."""
    return prf(initial_key, DOM_MASTER + encode_id(node_id))


def derive_pairwise(master_of_high: bytes, low_id: int) -> bytes:
    """Canonical pairwise key for a neighbor pair.

    Keyed by the master key of the higher-id endpoint over the lower id,
    so both endpoints compute the identical key regardless of who
    initiated discovery.
    """
    return prf(master_of_high, DOM_PAIRWISE + encode_id(low_id))


def pairwise_key_from_kin(initial_key: bytes, a: int, b: int) -> bytes:
    """Pairwise key of nodes ``a`` and ``b`` for a bootstrap-key holder."""
    if a == b:
        raise ValueError("pairwise key requires two distinct nodes")
    hi, lo = max(a, b), min(a, b)
    return derive_pairwise(derive_master(initial_key, hi), lo)


# --- one-way key chains --------------------------------------------------

def oneway(key: bytes) -> bytes:
    """The chain hash: a one-way image of a key, same width."""
    _check_key(key)
    return hashlib.sha256(key).digest()[:KEY_SIZE]


@dataclass(frozen=True)
class KeyChain:
    """Ordered one-way chain; ``links[0]`` is the anchor.

    Invariant: ``links[i-1] == oneway(links[i])`` for every i >= 1, so a
    holder of the anchor can authenticate later links as they are
    disclosed in reverse.
    """

    links: tuple[bytes, ...]

    def __len__(self) -> int:
        return len(self.links)

    def is_valid(self) -> bool:
        return all(
            self.links[i - 1] == oneway(self.links[i])
            for i in range(1, len(self.links))
        )


def generate_key_chain(seed: bytes, length: int) -> KeyChain:
    """Build a chain of ``length`` links by hashing forward from ``seed``.

    The seed itself is not part of the chain; the last link is its
    one-way image and the anchor is the most-hashed value.
    """
    _check_key(seed)
    if length < 1:
        raise ValueError("chain length must be >= 1")
    links = [oneway(seed)]
    for _ in range(length - 1):
        links.append(oneway(links[-1]))
    links.reverse()
    return KeyChain(links=tuple(links))
