import random

import pytest

from wsnsec.crypto import KEY_SIZE, ZERO_KEY, derive_individual, derive_master
from wsnsec.keystore import BlockedPeerError, KeyStore, preload

rng = random.Random(0xBEEF)


def make_store(node_id=5, chain_length=20):
    kin = rng.randbytes(KEY_SIZE)
    km = rng.randbytes(KEY_SIZE)
    gk = rng.randbytes(KEY_SIZE)
    return preload(kin, node_id, km, gk, chain_length), kin, km


def test_preload_distinct_masters_for_distinct_nodes():
    kin, km, gk = (rng.randbytes(KEY_SIZE) for _ in range(3))
    a = preload(kin, 1, km, gk)
    b = preload(kin, 2, km, gk)
    assert a.own_master != b.own_master


def test_preload_master_recomputable_by_kin_holder():
    store, kin, _ = make_store(node_id=9)
    assert store.own_master == derive_master(kin, 9)


def test_preload_individual_matches_controller_derivation():
    # The controller recomputes on demand; it must land on the preloaded key.
    store, _, km = make_store(node_id=9)
    assert store.individual == derive_individual(km, 9)


def test_preload_rejects_reserved_id():
    with pytest.raises(ValueError):
        preload(rng.randbytes(KEY_SIZE), 0, rng.randbytes(KEY_SIZE), rng.randbytes(KEY_SIZE))


def test_install_then_lookup():
    store, _, _ = make_store()
    key = rng.randbytes(KEY_SIZE)
    store.install_pairwise(7, key, now=100)
    assert store.pairwise[7] == key


def test_install_blocked_peer_raises():
    store, _, _ = make_store()
    store.revoke_peer(7, now=100, block_duration=1000)
    with pytest.raises(BlockedPeerError):
        store.install_pairwise(7, rng.randbytes(KEY_SIZE), now=500)


def test_install_after_block_expiry_succeeds():
    store, _, _ = make_store()
    store.revoke_peer(7, now=100, block_duration=1000)
    store.install_pairwise(7, rng.randbytes(KEY_SIZE), now=1101)
    assert 7 in store.pairwise


def test_erase_drops_bootstrap_material_only():
    store, _, _ = make_store()
    store.neighbor_masters[3] = rng.randbytes(KEY_SIZE)
    key = rng.randbytes(KEY_SIZE)
    store.install_pairwise(3, key, now=0)
    store.erase_bootstrap()
    assert store.initial_key is None
    assert store.neighbor_masters is None
    assert store.pairwise[3] == key
    assert store.individual is not None and store.global_key is not None


def test_erase_idempotent():
    store, _, _ = make_store()
    store.erase_bootstrap()
    first = store.dump()
    store.erase_bootstrap()
    assert store.dump() == first


def test_revoke_removes_keys_and_blocks():
    store, _, _ = make_store()
    store.install_pairwise(7, rng.randbytes(KEY_SIZE), now=0)
    store.cluster_received[7] = rng.randbytes(KEY_SIZE)
    store.revoke_peer(7, now=50, block_duration=1000)
    assert 7 not in store.pairwise
    assert 7 not in store.cluster_received
    assert store.is_blocked(7, 51)
    assert not store.is_blocked(7, 2000)


def test_revoke_unknown_id_still_blocklists():
    store, _, _ = make_store()
    store.revoke_peer(42, now=0, block_duration=100)
    assert 42 not in store.pairwise
    assert store.is_blocked(42, 10)


def test_storage_report_matches_worked_example():
    # D=20 neighbors and a 20-link chain: 20 + 20 + 2*20 + 1 + 1 = 82
    # keys, 656 octets at the 8-octet accounting size.
    store, _, _ = make_store(chain_length=20)
    for peer in range(1, 21):
        store.install_pairwise(peer if peer != store.node_id else 99, rng.randbytes(KEY_SIZE), now=0)
    assert len(store.pairwise) == 20
    report = store.storage_report(accounting_key_size=8)
    assert report.total_keys == 82
    assert report.total_octets == 656


def test_storage_report_no_neighbors():
    store, _, _ = make_store(chain_length=1)
    report = store.storage_report()
    assert report.total_keys == 3


def test_dump_renders_absent_keys_as_zero_sentinel():
    store, kin, _ = make_store()
    assert kin.hex() in store.dump()
    store.erase_bootstrap()
    dump = store.dump()
    assert kin.hex() not in dump
    assert f"initial_key={ZERO_KEY.hex()}" in dump


def test_dump_stable_ordering():
    store, _, _ = make_store()
    store.install_pairwise(9, rng.randbytes(KEY_SIZE), now=0)
    store.install_pairwise(2, rng.randbytes(KEY_SIZE), now=0)
    lines = store.dump().splitlines()
    pair_lines = [l for l in lines if l.startswith("pairwise[")]
    assert pair_lines == sorted(pair_lines)
