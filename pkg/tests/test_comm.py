"""Aggregation weights, Top-k sparsification, the gate, and cost accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamsgd.comm import (
    CompressionState,
    LinkModel,
    SparseGradient,
    VolumeStats,
    account_volume,
    cnc_ratio,
    comm_time,
    compression_gate,
    densify,
    payload_bytes,
    topk_count,
    topk_sparsify,
    weighted_aggregate,
    weights_from_rates,
)

from oracles import replay_gate, topk_by_full_sort, topk_keep_count


# -- weights -----------------------------------------------------------------


def test_equal_rates_give_uniform_weights():
    w = weights_from_rates([50, 50, 50, 50])
    assert np.allclose(w, 0.25, atol=1e-15)


def test_weights_follow_rate_shares():
    assert np.allclose(weights_from_rates([100, 300]), [0.25, 0.75], atol=1e-15)


def test_weights_example_set():
    w = weights_from_rates([64, 40, 88, 64])
    assert np.allclose(w, [0.25, 0.15625, 0.34375, 0.25], atol=1e-15)


def test_empty_rate_list_rejected():
    with pytest.raises(ValueError):
        weights_from_rates([])


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=64))
@settings(max_examples=200)
def test_weights_always_sum_to_one(rates):
    w = weights_from_rates(rates)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-12


# -- aggregation -------------------------------------------------------------


def test_uniform_weights_give_the_plain_mean():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=32) for _ in range(5)]
    agg = weighted_aggregate(grads, np.full(5, 0.2))
    assert np.allclose(agg, np.mean(grads, axis=0), atol=1e-12)


def test_degenerate_weights_select_one_gradient():
    g1, g2 = np.arange(4.0), np.ones(4)
    assert np.array_equal(weighted_aggregate([g1, g2], [1.0, 0.0]), g1)


def test_mixed_sparse_dense_equals_densify_first():
    rng = np.random.default_rng(1)
    dense = rng.normal(size=50)
    sparse = topk_sparsify(rng.normal(size=50), 0.2)
    weights = [0.6, 0.4]
    agg = weighted_aggregate([dense, sparse], weights)
    oracle = weights[0] * densify(dense) + weights[1] * densify(sparse)
    assert np.array_equal(agg, oracle)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        weighted_aggregate([np.zeros(3), np.zeros(4)], [0.5, 0.5])


# -- top-k -------------------------------------------------------------------


def test_full_ratio_is_the_identity():
    g = np.array([0.0, -1.0, 2.0, 0.0])
    assert np.array_equal(densify(topk_sparsify(g, 1.0)), g)


def test_magnitude_order_with_signs():
    sparse = topk_sparsify(np.array([3.0, -4.0, 1.0, 0.5]), 0.5)
    assert sparse.indices.tolist() == [0, 1]
    assert sparse.values.tolist() == [3.0, -4.0]


def test_ties_go_to_the_lower_index():
    sparse = topk_sparsify(np.array([1.0, -1.0, 1.0, 1.0]), 0.5)
    assert sparse.indices.tolist() == [0, 1]


def test_sparse_invariants_enforced():
    with pytest.raises(ValueError):
        SparseGradient(4, np.array([2, 1]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        SparseGradient(4, np.array([0, 4]), np.array([1.0, 2.0]))


@given(
    dim=st.integers(1, 2000),
    cr=st.sampled_from(["0.001", "0.01", "0.1", "0.25", "0.5", "0.9", "1.0"]),
    seed=st.integers(0, 10_000),
)
@settings(max_examples=150)
def test_topk_matches_the_full_sort_oracle(dim, cr, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=dim)
    if dim > 3:  # force duplicate magnitudes so ties actually occur
        g[dim // 2] = g[0]
        g[dim // 3] = -g[0]
    sparse = topk_sparsify(g, float(cr))
    assert topk_count(dim, float(cr)) == topk_keep_count(dim, cr)
    assert sparse.indices.tolist() == topk_by_full_sort(g, cr)
    assert np.array_equal(sparse.values, g[sparse.indices])
    assert np.count_nonzero(densify(sparse)) <= sparse.nnz


# -- the gate ----------------------------------------------------------------


def test_topk_capturing_full_norm_compresses():
    state = CompressionState(cr=0.5, delta=0.0)
    decision = compression_gate(np.array([3.0, 4.0, 0.0, 0.0]), state)
    assert decision.compressed and decision.ratio == 0.0
    assert state.n_compressed == 1


def test_flat_gradient_fails_a_tight_gate():
    state = CompressionState(cr=0.25, delta=0.3)
    decision = compression_gate(np.array([1.0, 1.0, 1.0, 1.0]), state)
    assert not decision.compressed
    assert decision.ratio == pytest.approx(0.75)
    assert state.n_uncompressed == 1


def test_loose_gate_always_compresses():
    state = CompressionState(cr=0.1, delta=1.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert compression_gate(rng.normal(size=40), state).compressed
    assert cnc_ratio(state) == 1.0


def test_zero_gradient_counts_as_compressed():
    state = CompressionState(cr=0.5, delta=0.0)
    decision = compression_gate(np.zeros(8), state)
    assert decision.compressed and decision.ratio == 0.0


def test_gate_ratio_stays_in_unit_interval_and_ewma_ordered():
    state = CompressionState(cr=0.2, delta=0.3, ewma_factor=0.8)
    rng = np.random.default_rng(4)
    for _ in range(200):
        decision = compression_gate(rng.normal(size=25), state)
        assert 0.0 <= decision.ratio <= 1.0
        assert state.ewma_topk <= state.ewma_full + 1e-15


def test_gate_decisions_match_the_replay_oracle():
    rng = np.random.default_rng(5)
    stream = [rng.normal(size=30) for _ in range(100)]
    for i in (0, 7, 20):  # sprinkle exactly-sparse vectors
        v = np.zeros(30)
        v[:3] = rng.normal(size=3)
        stream[i] = v
    state = CompressionState(cr=0.1, delta=0.25, ewma_factor=0.9)
    got = [compression_gate(g, state).compressed for g in stream]
    assert got == replay_gate(stream, "0.1", 0.25, 0.9)


def test_raw_gate_uses_per_iteration_norms():
    # Smoothed gate remembers the dense history; the raw gate reacts only to
    # the current vector.
    dense = np.ones(10)
    sparse_vec = np.zeros(10)
    sparse_vec[0] = 5.0

    smoothed = CompressionState(cr=0.1, delta=0.05, ewma_factor=0.9)
    raw = CompressionState(cr=0.1, delta=0.05, ewma_factor=0.9, raw_gate=True)
    for state in (smoothed, raw):
        compression_gate(dense, state)
    assert not compression_gate(sparse_vec, smoothed).compressed
    assert compression_gate(sparse_vec, raw).compressed


def test_cnc_requires_decisions():
    with pytest.raises(ValueError):
        cnc_ratio(CompressionState(cr=0.1, delta=0.1))


def test_cnc_counts_fractions():
    state = CompressionState(cr=0.1, delta=0.1)
    state.n_compressed, state.n_uncompressed = 7, 3
    assert cnc_ratio(state) == pytest.approx(0.7)
    state.n_compressed, state.n_uncompressed = 0, 10
    assert cnc_ratio(state) == 0.0
    state.n_compressed, state.n_uncompressed = 10, 0
    assert cnc_ratio(state) == 1.0


def test_cnc_monotone_in_delta_on_a_frozen_stream():
    rng = np.random.default_rng(6)
    stream = [rng.normal(size=64) * rng.uniform(0.1, 2.0) for _ in range(200)]
    cncs = []
    for delta in (0.0, 0.1, 0.2, 0.3, 0.4, 1.0):
        state = CompressionState(cr=0.1, delta=delta, ewma_factor=0.9)
        for g in stream:
            compression_gate(g, state)
        cncs.append(cnc_ratio(state))
    assert cncs == sorted(cncs)
    assert cncs[-1] == 1.0


# -- volume accounting and link cost ------------------------------------------


def test_uncompressed_volume_counts_every_float():
    stats = account_volume(False, 10**6, 0.1, VolumeStats())
    assert stats.floats_sent == 10**6
    assert stats.bytes_sent == 4 * 10**6


def test_compressed_volume_counts_values_and_indices():
    stats = account_volume(True, 10**6, 0.1, VolumeStats())
    assert stats.floats_sent == 10**5
    assert stats.bytes_sent == 8 * 10**5


def test_payload_bytes_matches_accounting():
    assert payload_bytes(False, 1000, 0.1) == 4000
    assert payload_bytes(True, 1000, 0.1) == 800


def test_zero_bytes_costs_latency_only():
    assert comm_time(0, LinkModel(0.01, 1e9), 8) == 0.01


def test_ring_term_approaches_twice_bytes_over_bandwidth():
    link = LinkModel(0.0, 1e6)
    big_n = comm_time(1e6, link, 10_000)
    assert big_n == pytest.approx(2.0, rel=1e-3)


def test_payload_term_scales_linearly():
    link = LinkModel(0.0, 5e8)
    t_full = comm_time(548e6, link, 8)
    t_tenth = comm_time(54.8e6, link, 8)
    assert t_full == pytest.approx(10 * t_tenth)
