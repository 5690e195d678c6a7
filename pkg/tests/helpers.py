"""Shared builders for protocol-level tests."""

from wsnsec.keystore import BASE_STATION_ID
from wsnsec.protocol import ProtocolConfig
from wsnsec.scenario import LOSSLESS, QUIET_NOISE, Scenario, deploy
from wsnsec.sim import LinkGain

# Short establishment window so runs finish in a few simulated seconds.
FAST = ProtocolConfig(t_min=1_000_000, t_p=200_000)
# Same timing with the tamper sentinel off: compromises stay silent, so
# tests can capture key snapshots without triggering revocation.
SILENT = ProtocolConfig(t_min=1_000_000, t_p=200_000, p_detect=0.0)

GAIN = -54.0
BS_GAIN = -60.0


def line_links(n, bs_star=True):
    links = []
    for i in range(1, n):
        links.append(LinkGain(i, i + 1, GAIN))
        links.append(LinkGain(i + 1, i, GAIN))
    if bs_star:
        for u in range(1, n + 1):
            links.append(LinkGain(BASE_STATION_ID, u, BS_GAIN))
            links.append(LinkGain(u, BASE_STATION_ID, BS_GAIN))
    return links


def line_deploy(
    n,
    seed=1,
    protocol=FAST,
    boots=None,
    lossless=True,
    adversary=(),
    until=None,
    bs_star=True,
    noise=QUIET_NOISE,
):
    """Nodes 1..n on a line topology, all booting at t=1000 unless given."""
    boots = boots or {i: 1000 for i in range(1, n + 1)}
    max_boot = max(boots.values())
    sc = Scenario(
        seed=seed,
        boots=dict(boots),
        protocol=protocol,
        until=until if until is not None else max_boot + protocol.t_min + 1_000_000,
        snr_threshold=LOSSLESS if lossless else None,
        adversary=list(adversary),
    )
    return deploy(sc, line_links(n, bs_star=bs_star), noise)


def trace_events(dep, ev, node=None):
    from wsnsec.sim import parse_trace

    out = []
    for rec in parse_trace(dep.sim.trace):
        if rec.get("ev") != ev:
            continue
        if node is not None and rec.get("node") != node:
            continue
        out.append(rec)
    return out


def tx_count(dep, ptype_name, node=None):
    return len(
        [e for e in trace_events(dep, "tx", node) if e.get("type") == ptype_name]
    )
