"""Experiment recipes: desk-scale sweeps over network size, seeds, and
detection parameters, each producing result rows with the standard
column schema.

Column semantics vary by experiment and are echoed by the report
command: ``mean_pairwise_us`` holds pairwise completion time for the
establishment sweeps, per-key derivation wall time for the
individual-key sweep, and detection latency for the detection sweep
(which also stores its p_detect in ``success_rate`` and its check
period in ``max_msgs``, the schema having no dedicated columns).
"""

from __future__ import annotations

import time

from .adversary import Compromise
from .crypto import derive_individual
from .metrics import EnergyCosts, ExperimentResult
from .protocol import ProtocolConfig
from .scenario import synthetic_deployment
from .sim import Simulator

EXPERIMENTS = ("pairwise_time", "individual_time", "scalability", "energy", "detection")

# Short establishment window keeps sweep runs snappy without touching
# any protocol behavior.
SWEEP_PROTOCOL = ProtocolConfig(t_min=2_000_000, t_p=500_000)


def _run_seed(base: int, n: int, rep: int) -> int:
    return base * 1_000_000 + n * 100 + rep


def run_establishment(
    n: int,
    degree: int,
    seed: int,
    protocol: ProtocolConfig = SWEEP_PROTOCOL,
    lossless: bool = True,
) -> ExperimentResult:
    dep = synthetic_deployment(n, degree, seed, protocol=protocol, lossless=lossless)
    dep.run()
    return dep.summarize()


def sweep_pairwise_time(
    step: int = 2, reps: int = 10, points: int = 10, seed: int = 1, degree: int = 4
) -> list[ExperimentResult]:
    """Establishment runs over network sizes stepped by ``step``,
    repeated ``reps`` times each."""
    results = []
    for i in range(1, points + 1):
        n = step * i
        d = min(degree, n - 1)
        for rep in range(reps):
            results.append(run_establishment(n, d, _run_seed(seed, n, rep)))
    return results


def sweep_individual_time(
    ns: tuple[int, ...] = (10, 20), reps: int = 10, seed: int = 1
) -> list[ExperimentResult]:
    """Wall-clock time for the controller to derive each node's
    individual key, averaged per key (microseconds)."""
    costs = EnergyCosts()
    results = []
    for n in ns:
        for rep in range(reps):
            run_seed = _run_seed(seed, n, rep)
            sim = Simulator(run_seed)
            master = sim.rng.randbytes(16)
            t0 = time.perf_counter()
            for u in range(1, n + 1):
                derive_individual(master, u)
            elapsed_us = (time.perf_counter() - t0) * 1e6
            results.append(
                ExperimentResult(
                    n=n,
                    seed=run_seed,
                    success_rate=1.0,
                    mean_pairwise_us=elapsed_us / n,
                    max_msgs=0,
                    energy_units=n * costs.c_prf,
                )
            )
    return results


def sweep_scalability(
    ns: tuple[int, ...] = tuple(range(10, 101, 10)),
    degree: int = 6,
    reps: int = 1,
    seed: int = 1,
) -> list[ExperimentResult]:
    """Fixed-degree establishment runs over growing network sizes; the
    per-node message load should stay flat while total energy grows."""
    results = []
    for n in ns:
        for rep in range(reps):
            results.append(run_establishment(n, degree, _run_seed(seed, n, rep)))
    return results


def sweep_energy(
    ns: tuple[int, ...] = tuple(range(10, 101, 10)),
    degree: int = 6,
    reps: int = 1,
    seed: int = 1,
) -> list[ExperimentResult]:
    return sweep_scalability(ns=ns, degree=degree, reps=reps, seed=seed)


def sweep_detection(
    p_detects: tuple[float, ...] = (0.25, 0.5, 1.0),
    t_ps: tuple[int, ...] = (500_000, 1_000_000),
    reps: int = 5,
    seed: int = 1,
    n: int = 6,
    degree: int = 3,
) -> list[ExperimentResult]:
    """Compromise-to-HELP latency under varying sentinel strength and
    check period. Rows carry p_detect in success_rate and the check
    period in max_msgs."""
    results = []
    rep_index = 0
    for p in p_detects:
        for t_p in t_ps:
            protocol = ProtocolConfig(t_min=1_000_000, t_p=t_p, p_detect=p)
            for rep in range(reps):
                rep_index += 1
                run_seed = _run_seed(seed, rep_index, rep)
                compromise_at = 2_500_000  # after establishment
                dep = synthetic_deployment(
                    n,
                    degree,
                    run_seed,
                    protocol=protocol,
                    adversary=[Compromise(at=compromise_at, node=1)],
                    until=compromise_at + 200 * t_p,
                )
                dep.run()
                reports = dep.evaluate_detection()
                latency = 0.0
                if reports and reports[0].t_help is not None:
                    latency = float(reports[0].t_help - reports[0].t_compromise)
                results.append(
                    ExperimentResult(
                        n=n,
                        seed=run_seed,
                        success_rate=p,
                        mean_pairwise_us=latency,
                        max_msgs=t_p,
                        energy_units=dep.summarize().energy_units,
                    )
                )
    return results


def run_experiment(name: str, **params) -> list[ExperimentResult]:
    if name == "pairwise_time":
        return sweep_pairwise_time(
            step=params.get("step", 2),
            reps=params.get("reps", 10),
            points=params.get("points", 10),
            seed=params.get("seed", 1),
            degree=params.get("degree", 4),
        )
    if name == "individual_time":
        return sweep_individual_time(
            reps=params.get("reps", 10), seed=params.get("seed", 1)
        )
    if name == "scalability":
        return sweep_scalability(
            degree=params.get("degree", 6),
            reps=params.get("reps", 1),
            seed=params.get("seed", 1),
        )
    if name == "energy":
        return sweep_energy(
            degree=params.get("degree", 6),
            reps=params.get("reps", 1),
            seed=params.get("seed", 1),
        )
    if name == "detection":
        return sweep_detection(reps=params.get("reps", 5), seed=params.get("seed", 1))
    raise ValueError(f"unknown experiment {name!r}")
