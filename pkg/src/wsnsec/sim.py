"""Deterministic discrete-event radio simulator.

Time is counted in integer ticks (1 tick = 1 microsecond). Events pop
in (time, insertion sequence) order, so identical seeds and inputs
yield octet-identical traces. Radio delivery uses a threshold model:
a frame on a directed link is delivered iff link gain minus the noise
sample at transmit time clears the configured SNR threshold.
"""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass

from .metrics import MetricsRecorder
from .packets import Packet

CLONE_UID_BASE = 0x10000  # entity uids above the 16-bit protocol id space


class ParseError(ValueError):
    """Malformed topology/noise input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TooShortError(ValueError):
    """Noise trace shorter than the 100-sample minimum."""


class PastTimeError(ValueError):
    """Injection requested earlier than the current simulated time."""


class NoSuchNodeError(KeyError):
    """Injection target does not exist in the deployment."""


# --- input file formats ---------------------------------------------------

@dataclass(frozen=True)
class LinkGain:
    """Directed radio link; absence of a line means no link."""

    src: int
    dst: int
    gain_dbm: float


MIN_NOISE_SAMPLES = 100


@dataclass(frozen=True)
class NoiseTrace:
    samples: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.samples)


def _parse_gain(token: str, lineno: int) -> float:
    # Decimal commas appear in the wild; normalize before parsing.
    try:
        return float(token.replace(",", "."))
    except ValueError:
        raise ParseError(lineno, f"bad gain value {token!r}") from None


def load_topology(text: str) -> list[LinkGain]:
    """Parse ``src dst gain`` lines (or the ``gain src dst g`` variant).

    Duplicate (src, dst) lines: last wins. Blank lines and ``#``
    comments are skipped.
    """
    by_pair: dict[tuple[int, int], LinkGain] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "gain":
            parts = parts[1:]
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 'src dst gain', got {raw.strip()!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"bad node id in {raw.strip()!r}") from None
        gain = _parse_gain(parts[2], lineno)
        by_pair[(src, dst)] = LinkGain(src, dst, gain)
    return list(by_pair.values())


def load_noise(text: str) -> NoiseTrace:
    """Parse one integer dBm reading per nonempty line; requires at
    least 100 samples."""
    samples = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            samples.append(int(line))
        except ValueError:
            raise ParseError(lineno, f"bad noise sample {line!r}") from None
    if len(samples) < MIN_NOISE_SAMPLES:
        raise TooShortError(
            f"noise trace has {len(samples)} samples, need >= {MIN_NOISE_SAMPLES}"
        )
    return NoiseTrace(samples=tuple(samples))


# --- events ----------------------------------------------------------------

class EventKind(enum.Enum):
    BOOT = "boot"
    DELIVER = "deliver"
    TIMER = "timer"
    ADVERSARY = "adversary"
    INJECT = "inject"


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    kind: EventKind
    payload: tuple


@dataclass(frozen=True)
class SimConfig:
    snr_threshold_db: float = 4.0
    propagation_ticks: int = 10
    serialization_ticks_per_octet: int = 32

    def airtime(self, frame_octets: int) -> int:
        return self.propagation_ticks + self.serialization_ticks_per_octet * frame_octets


class Simulator:
    """Single-threaded event loop owning every entity in one run.

    Entities (protocol nodes, the base station, adversary puppets) are
    registered under an integer uid; honest nodes use their protocol id
    as uid, puppets get uids above the 16-bit id space so they can spoof
    protocol ids without colliding.
    """

    def __init__(self, seed: int, config: SimConfig = SimConfig()) -> None:
        self.seed = seed
        self.config = config
        self.rng = random.Random(seed)
        self.now = 0
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.entities: dict[int, object] = {}
        self.out_links: dict[int, list[tuple[int, float]]] = {}
        self.noise: NoiseTrace | None = None
        self._noise_offset = 0
        self.metrics = MetricsRecorder()
        self.trace: list[str] = []
        self.counters: dict[str, int] = {
            "installs_without_verify": 0,
            "bad_mac": 0,
            "delivered": 0,
            "lost": 0,
        }
        # (src uid, dst uid) -> xor mask applied to in-flight frames
        self.tamper: dict[tuple[int, int], bytes] = {}
        # every transmission, for adversary recording/replay
        self.frame_log: list[tuple[int, int, bytes]] = []
        self._next_clone_uid = CLONE_UID_BASE

    # -- construction -------------------------------------------------

    def add_entity(self, uid: int, entity: object) -> None:
        if uid in self.entities:
            raise ValueError(f"duplicate entity uid {uid}")
        self.entities[uid] = entity
        self.out_links.setdefault(uid, [])

    def allocate_clone_uid(self) -> int:
        uid = self._next_clone_uid
        self._next_clone_uid += 1
        return uid

    def add_link(self, src: int, dst: int, gain_dbm: float) -> None:
        links = self.out_links.setdefault(src, [])
        for i, (d, _) in enumerate(links):
            if d == dst:  # last wins, mirroring the file format
                links[i] = (dst, gain_dbm)
                return
        links.append((dst, gain_dbm))

    def attach_topology(self, links: list[LinkGain]) -> None:
        for link in links:
            self.add_link(link.src, link.dst, link.gain_dbm)

    def attach_noise(self, trace: NoiseTrace) -> None:
        self.noise = trace
        self._noise_offset = self.rng.randrange(len(trace.samples))

    # -- scheduling ----------------------------------------------------

    def schedule(self, at: int, kind: EventKind, payload: tuple) -> SimEvent:
        if at < self.now:
            raise PastTimeError(f"cannot schedule at {at}, now is {self.now}")
        ev = SimEvent(time=at, seq=self._seq, kind=kind, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, (at, ev.seq, ev))
        return ev

    def schedule_boot(self, uid: int, at: int) -> None:
        self.schedule(at, EventKind.BOOT, (uid,))

    def schedule_timer(self, uid: int, name: str, at: int) -> None:
        self.schedule(at, EventKind.TIMER, (uid, name))

    def inject(self, pkt: Packet | bytes, target: int, at: int) -> None:
        """Hand a frame to ``target``'s handler at tick ``at`` exactly as
        if it had been radio-delivered."""
        if at < self.now:
            raise PastTimeError(f"inject at {at} is before now ({self.now})")
        frame = pkt.encode() if isinstance(pkt, Packet) else bytes(pkt)
        uids = [
            uid
            for uid, ent in self.entities.items()
            if getattr(ent, "node_id", None) == target
        ]
        if not uids:
            raise NoSuchNodeError(target)
        for uid in uids:
            self.schedule(at, EventKind.INJECT, (uid, frame))

    # -- radio ----------------------------------------------------------

    def noise_sample(self, at: int) -> int:
        if self.noise is None:
            raise RuntimeError("no noise trace attached")
        samples = self.noise.samples
        return samples[(self._noise_offset + at) % len(samples)]

    def transmit(self, src_uid: int, pkt: Packet) -> None:
        """Put one frame on the air from ``src_uid``; rolls delivery per
        out-link (address-filtered for unicast)."""
        frame = pkt.encode()
        self.metrics.record("tx", src_uid, len(frame))
        self.frame_log.append((self.now, src_uid, frame))
        self.trace_event(
            self._display_id(src_uid),
            "tx",
            {"type": pkt.ptype.name, "dst": pkt.dst, "octets": len(frame)},
        )
        for dst_uid, gain in self.out_links.get(src_uid, []):
            target = self.entities.get(dst_uid)
            if target is None:
                continue
            if not pkt.is_broadcast and getattr(target, "node_id", None) != pkt.dst:
                continue
            self._roll_delivery(src_uid, dst_uid, gain, frame, pkt)

    def _roll_delivery(
        self, src_uid: int, dst_uid: int, gain: float, frame: bytes, pkt: Packet
    ) -> None:
        snr = gain - self.noise_sample(self.now)
        if snr >= self.config.snr_threshold_db:
            mask = self.tamper.get((src_uid, dst_uid))
            if mask:
                frame = self._apply_mask(frame, mask)
            at = self.now + self.config.airtime(len(frame))
            self.schedule(at, EventKind.DELIVER, (dst_uid, frame, src_uid))
            self.counters["delivered"] += 1
        else:
            self.counters["lost"] += 1
            self.trace_event(
                self._display_id(src_uid),
                "loss",
                {"type": pkt.ptype.name, "dst": self._display_id(dst_uid), "snr": f"{snr:g}"},
            )

    @staticmethod
    def _apply_mask(frame: bytes, mask: bytes) -> bytes:
        out = bytearray(frame)
        for i in range(len(out)):
            out[i] ^= mask[i % len(mask)]
        return bytes(out)

    # -- event loop ------------------------------------------------------

    def run(self, until: int | None = None, max_events: int | None = None) -> list[str]:
        """Process events in deterministic order; returns the trace."""
        processed = 0
        while self._heap:
            if max_events is not None and processed >= max_events:
                break
            t, _, ev = self._heap[0]
            if until is not None and t > until:
                break
            heapq.heappop(self._heap)
            assert t >= self.now, "causality violation"
            self.now = t
            self._dispatch(ev)
            processed += 1
        if until is not None and self.now < until:
            self.now = until
        return self.trace

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind is EventKind.BOOT:
            (uid,) = ev.payload
            self.entities[uid].on_boot()
        elif ev.kind is EventKind.TIMER:
            uid, name = ev.payload
            self.entities[uid].on_timer(name)
        elif ev.kind in (EventKind.DELIVER, EventKind.INJECT):
            uid, frame = ev.payload[0], ev.payload[1]
            entity = self.entities.get(uid)
            if entity is None:
                return
            self.metrics.record("rx", uid, len(frame))
            entity.handle_frame(frame)
        elif ev.kind is EventKind.ADVERSARY:
            (action,) = ev.payload
            action.execute(self)

    # -- tracing -----------------------------------------------------------

    def _display_id(self, uid: int) -> int:
        ent = self.entities.get(uid)
        return getattr(ent, "node_id", uid) if ent is not None else uid

    def trace_event(self, node_id: int, ev: str, detail: dict | None = None) -> None:
        kv = ",".join(f"{k}={v}" for k, v in (detail or {}).items())
        self.trace.append(f"t={self.now} node={node_id} ev={ev} detail={kv}")

    def trace_raw(self, line: str) -> None:
        self.trace.append(line)

    def trace_text(self) -> str:
        return "\n".join(self.trace) + ("\n" if self.trace else "")


def deliver_decision(gain_dbm: float, noise_dbm: int, snr_threshold_db: float) -> bool:
    """The bare delivery predicate: gain minus noise must clear the
    threshold. Exposed for direct arithmetic checks."""
    return gain_dbm - noise_dbm >= snr_threshold_db


def parse_trace(lines) -> list[dict]:
    """Structured view of trace lines.

    Node lines become ``{"t", "node", "ev", **detail}`` with detail
    values kept as strings; controller verdict lines become
    ``{"t", "bs": True, "ev": "verdict", "node", "verdict", "reason"}``.
    """
    out = []
    for line in lines:
        parts = line.split()
        if not parts or not parts[0].startswith("t="):
            continue
        t = int(parts[0][2:])
        if len(parts) >= 2 and parts[1] == "bs":
            # t=<ticks> bs verdict node=<id> <VERDICT> reason=<code>
            rec = {"t": t, "bs": True, "ev": parts[2]}
            for tok in parts[3:]:
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    rec[k] = int(v) if k == "node" else v
                else:
                    rec["verdict"] = tok
            out.append(rec)
            continue
        rec = {"t": t}
        for tok in parts[1:]:
            if not "=" in tok:
                continue
            k, v = tok.split("=", 1)
            if k == "node":
                rec["node"] = int(v)
            elif k == "ev":
                rec["ev"] = v
            elif k == "detail":
                for kv in v.split(","):
                    if "=" in kv:
                        dk, dv = kv.split("=", 1)
                        rec[dk] = dv
        out.append(rec)
    return out
