"""Energy ledger, per-node counters, and experiment result rows.

Energy is an abstract linear model over radio octets and crypto
operations; the default constants keep radio costs dominant over
compute, the usual ordering on sensor motes. They are model parameters,
not measurements.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class EnergyCosts:
    """Energy units per operation; tx/rx are per octet."""

    c_tx: float = 2.0
    c_rx: float = 1.0
    c_mac: float = 5.0
    c_prf: float = 5.0
    c_enc: float = 3.0


@dataclass
class Counters:
    tx_octets: int = 0
    rx_octets: int = 0
    rx_frames: int = 0
    mac_ops: int = 0
    prf_ops: int = 0
    enc_ops: int = 0

    def energy(self, costs: EnergyCosts) -> float:
        return (
            self.tx_octets * costs.c_tx
            + self.rx_octets * costs.c_rx
            + self.mac_ops * costs.c_mac
            + self.prf_ops * costs.c_prf
            + self.enc_ops * costs.c_enc
        )


class MetricsRecorder:
    """Per-node monotonic counters fed by the event loop."""

    KINDS = ("tx", "rx", "mac", "prf", "enc")

    def __init__(self) -> None:
        self.per_node: dict[int, Counters] = {}
        self.warnings = 0

    def _counters(self, node: int) -> Counters:
        if node not in self.per_node:
            self.per_node[node] = Counters()
        return self.per_node[node]

    def record(self, kind: str, node: int, octets: int = 0) -> None:
        """Fold one event into the ledger; unknown kinds only bump the
        warning counter."""
        c = self._counters(node)
        if kind == "tx":
            c.tx_octets += octets
        elif kind == "rx":
            c.rx_octets += octets
            c.rx_frames += 1
        elif kind == "mac":
            c.mac_ops += 1
        elif kind == "prf":
            c.prf_ops += 1
        elif kind == "enc":
            c.enc_ops += 1
        else:
            self.warnings += 1

    def energy(self, node: int, costs: EnergyCosts) -> float:
        return self._counters(node).energy(costs)

    def total_energy(self, costs: EnergyCosts, nodes=None) -> float:
        ids = self.per_node.keys() if nodes is None else nodes
        return sum(self.per_node[i].energy(costs) for i in ids if i in self.per_node)


CSV_COLUMNS = ("n", "seed", "success_rate", "mean_pairwise_us", "max_msgs", "energy_units")


@dataclass(frozen=True)
class ExperimentResult:
    """One run's row. ``mean_pairwise_us`` is the run's timing metric:
    pairwise completion time for establishment runs, derivation or
    detection latency for the timing experiments."""

    n: int
    seed: int
    success_rate: float
    mean_pairwise_us: float
    max_msgs: int
    energy_units: float

    def as_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def summarize(
    *,
    n: int,
    seed: int,
    expected_pairs: set[tuple[int, int]],
    stores: dict[int, "object"],
    boot_ticks: dict[int, int],
    last_install_ticks: dict[int, int],
    recorder: MetricsRecorder,
    costs: EnergyCosts = EnergyCosts(),
) -> ExperimentResult:
    """Fold a completed run into one result row.

    ``expected_pairs`` are the mutually-linked (lo, hi) node pairs that a
    lossless run must key; success counts pairs whose two stores hold
    octet-identical keys for each other. Completion time is per node:
    last pairwise install tick minus boot tick.
    """
    ok = 0
    for lo, hi in expected_pairs:
        a, b = stores.get(lo), stores.get(hi)
        if a is None or b is None:
            continue
        ka = a.pairwise.get(hi)
        kb = b.pairwise.get(lo)
        if ka is not None and ka == kb:
            ok += 1
    rate = ok / len(expected_pairs) if expected_pairs else 1.0

    completions = [
        last_install_ticks[u] - boot_ticks[u]
        for u in last_install_ticks
        if u in boot_ticks
    ]
    mean_us = sum(completions) / len(completions) if completions else 0.0

    node_ids = list(stores)
    max_msgs = max(
        (recorder.per_node[u].rx_frames for u in node_ids if u in recorder.per_node),
        default=0,
    )
    energy = recorder.total_energy(costs, nodes=node_ids)
    return ExperimentResult(
        n=n,
        seed=seed,
        success_rate=rate,
        mean_pairwise_us=mean_us,
        max_msgs=max_msgs,
        energy_units=energy,
    )


def to_csv(results: list[ExperimentResult]) -> str:
    if not results:
        raise ValueError("no results to export")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow(r.as_row())
    return buf.getvalue()


def to_json(results: list[ExperimentResult]) -> str:
    if not results:
        raise ValueError("no results to export")
    return json.dumps([asdict(r) for r in results], indent=2) + "\n"


def from_csv(text: str) -> list[ExperimentResult]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(
            ExperimentResult(
                n=int(row["n"]),
                seed=int(row["seed"]),
                success_rate=float(row["success_rate"]),
                mean_pairwise_us=float(row["mean_pairwise_us"]),
                max_msgs=int(row["max_msgs"]),
                energy_units=float(row["energy_units"]),
            )
        )
    return out


def from_json(text: str) -> list[ExperimentResult]:
    return [ExperimentResult(**row) for row in json.loads(text)]


def export(results: list[ExperimentResult], fmt: str, path) -> None:
    """Write results as ``csv`` or ``json``; refuses an empty list."""
    if fmt == "csv":
        data = to_csv(results)
    elif fmt == "json":
        data = to_json(results)
    else:
        raise ValueError(f"unknown format: {fmt}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
