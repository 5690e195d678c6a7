"""Post-run invariant checks: the properties every run must satisfy
regardless of topology, noise, or adversary script."""

from __future__ import annotations

from .protocol import NodePhase


def run_invariant_checks(deployment) -> list[str]:
    """Return one violation string per broken invariant (empty = clean)."""
    violations: list[str] = []
    sim = deployment.sim
    nodes = deployment.nodes

    if sim.counters.get("installs_without_verify", 0):
        violations.append(
            f"{sim.counters['installs_without_verify']} key installs skipped MAC verification"
        )

    for nid, node in nodes.items():
        if node.boot_time is None:
            if node.phase is not NodePhase.PRELOADED:
                violations.append(f"node {nid} left PRELOADED without booting")
            continue
        deadline = node.boot_time + node.config.t_min
        if sim.now >= deadline:
            if node.store.initial_key is not None:
                violations.append(
                    f"node {nid} still holds the bootstrap key at t={sim.now}, deadline {deadline}"
                )
            if node.store.neighbor_masters:
                violations.append(
                    f"node {nid} still caches neighbor master keys after erasure deadline"
                )
        for blocked in node.store.blocklist:
            if node.store.is_blocked(blocked, sim.now) and blocked in node.store.pairwise:
                violations.append(
                    f"node {nid} holds a pairwise key for actively blocked peer {blocked}"
                )

    # Installed-pair agreement: whenever both endpoints hold keys for each
    # other, the octets must match.
    for u, node in nodes.items():
        for peer, key in node.store.pairwise.items():
            other = nodes.get(peer)
            if other is None:
                continue
            mirrored = other.store.pairwise.get(u)
            if mirrored is not None and mirrored != key:
                violations.append(f"pairwise keys of {u} and {peer} disagree")
    return violations
