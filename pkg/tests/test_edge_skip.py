import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clgen.degree_model import WeightSequence, synth_powerlaw
from clgen.edge_skip import (
    ArraySink,
    CountSink,
    create_edges,
    naive_pair_frequencies,
    naive_pair_sampler,
    pair_probabilities,
    serial_cl,
    skip_length,
    skip_pair_frequencies,
    trace_source,
)
from clgen.rng import RngStream, node_rng_key, node_rng_keys

from conftest import random_weights
from oracles import skip_length_hp


# -- skip length ------------------------------------------------------------

@pytest.mark.parametrize("p, r, want", [(1.0, 0.3, 0), (1.0, 0.999, 0), (0.5, 0.25, 2), (0.5, 0.6, 0)])
def test_skip_length_examples(p, r, want):
    assert skip_length(p, r) == want


@given(st.floats(1e-6, 0.999), st.floats(1e-9, 1.0, exclude_max=True))
def test_skip_length_matches_high_precision(p, r):
    got = skip_length(p, r)
    ref = skip_length_hp(p, r)
    # a float quotient within a few ulps of an integer may round either way
    q = math.log(r) / math.log1p(-p)
    if abs(q - round(q)) > 1e-9 * max(1.0, q):
        assert got == ref


@pytest.mark.parametrize("p, r", [(0.0, 0.5), (-0.1, 0.5), (1.1, 0.5), (0.5, 0.0), (0.5, 1.0)])
def test_skip_length_rejects(p, r):
    with pytest.raises(ValueError):
        skip_length(p, r)


# -- rng keys ---------------------------------------------------------------

def test_node_keys_deterministic_and_distinct():
    assert node_rng_key(42, 7) == node_rng_key(42, 7)
    assert node_rng_key(42, 7) != node_rng_key(42, 8)
    assert node_rng_key(42, 7) != node_rng_key(43, 7)


def test_million_keys_no_collision():
    keys = node_rng_keys(2024, np.arange(10**6))
    assert np.unique(keys).size == 10**6
    assert int(keys[12345]) == node_rng_key(2024, 12345)


def test_stream_in_open_interval():
    s = RngStream(1, 0)
    xs = [s.random() for _ in range(20000)]
    assert min(xs) > 0.0 and max(xs) < 1.0
    assert abs(np.mean(xs) - 0.5) < 5 * math.sqrt(1 / 12 / len(xs))


# -- generator --------------------------------------------------------------

def _edges(ws, nodes, seed):
    sink = ArraySink()
    create_edges(ws, ws.sum_S, nodes, seed, sink)
    return sink.edges()


def test_last_node_has_no_edges(flat4):
    assert create_edges(flat4, 8.0, [3], 0, ArraySink()) == 0


def test_single_node_graph():
    assert serial_cl(WeightSequence.from_sorted([5.0]), 1, ArraySink()) == 0


def test_edges_canonical_and_unique():
    ws = synth_powerlaw(3000, 2.1, 1.0, 50.0, seed=2)
    u, v = _edges(ws, range(ws.n), 9)
    assert np.all(u < v) and v.max() < ws.n
    assert np.unique(u * ws.n + v).size == u.size


def test_zero_weight_tail_gets_no_edges():
    w = np.concatenate([np.linspace(9, 1, 200), np.zeros(50)])
    ws = WeightSequence.from_sorted(w)
    for seed in range(5):
        u, v = _edges(ws, range(ws.n), seed)
        assert u.size > 0
        assert np.all(ws.weights[u] > 0) and np.all(ws.weights[v] > 0)


def test_clamped_hub_pair_always_present():
    ws = WeightSequence.from_sorted([6.0, 5.0, 1.0])  # w0 w1 / S = 30/12 > 1
    for seed in range(50):
        u, v = _edges(ws, range(3), seed)
        assert (0, 1) in set(zip(u.tolist(), v.tolist()))


@pytest.mark.parametrize("seed", [0, 1, 77])
def test_kernel_matches_python_transcription(rng, seed):
    ws = random_weights(rng, 300, "powerlaw")
    S = ws.sum_S
    for u in range(0, ws.n, 7):
        want = [v for v, _, acc in trace_source(ws, S, u, seed) if acc]
        su, sv = _edges(ws, [u], seed)
        assert np.all(su == u)
        assert sv.tolist() == want


def test_candidate_probability_non_increasing(rng):
    ws = random_weights(rng, 500, "uniform")
    for u in range(0, 200, 5):
        qs = [q for _, q, _ in trace_source(ws, ws.sum_S, u, 3)]
        assert all(a >= b for a, b in zip(qs, qs[1:]))


@given(st.integers(1, 6), st.integers(0, 2**32))
def test_partition_invariance(parts, seed):
    ws = synth_powerlaw(400, 2.4, 1.0, 15.0, seed=seed % 97)
    full = ArraySink()
    serial_cl(ws, seed, full)
    ref = set(zip(*(a.tolist() for a in full.edges())))
    rng = np.random.default_rng(seed)
    owner = rng.integers(0, parts, ws.n)
    got = set()
    for i in range(parts):
        got |= set(zip(*(a.tolist() for a in _edges(ws, np.nonzero(owner == i)[0], seed))))
    assert got == ref


def test_small_buffer_resumes_correctly(rng):
    ws = random_weights(rng, 400, "uniform")
    a, b = ArraySink(), ArraySink()
    create_edges(ws, ws.sum_S, range(ws.n), 5, a)
    create_edges(ws, ws.sum_S, range(ws.n), 5, b, capacity=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.edges(), b.edges()))


def test_count_sink_agrees(rng):
    ws = random_weights(rng, 800, "powerlaw")
    a, c = ArraySink(), CountSink()
    n1 = create_edges(ws, ws.sum_S, range(ws.n), 1, a)
    n2 = create_edges(ws, ws.sum_S, range(ws.n), 1, c)
    assert n1 == n2 == a.edges()[0].size == c.count


def test_out_of_range_node_rejected(flat4):
    with pytest.raises(IndexError):
        create_edges(flat4, 8.0, [4], 0, ArraySink())


def test_serial_repeatable(flat4):
    a, b = ArraySink(), ArraySink()
    serial_cl(flat4, 123, a)
    serial_cl(flat4, 123, b)
    assert all(np.array_equal(x, y) for x, y in zip(a.edges(), b.edges()))


# -- statistics on tiny graphs ---------------------------------------------

T = 100_000


def test_source_zero_frequencies(flat4):
    freq, _ = skip_pair_frequencies(flat4, T, seed=10)
    for j in (1, 2, 3):
        assert abs(freq[0, j] - 0.5) <= 5 * math.sqrt(0.25 / T)


def test_serial_mean_edge_count(flat4):
    _, totals = skip_pair_frequencies(flat4, T, seed=20)
    sigma = math.sqrt(6 * 0.25)
    assert abs(totals.mean() - 3.0) <= 5 * sigma / math.sqrt(T)


def test_two_node_frequency():
    ws = WeightSequence.from_sorted([1.0, 1.0])
    freq, _ = skip_pair_frequencies(ws, T, seed=30)
    assert abs(freq[0, 1] - 0.5) <= 5 * math.sqrt(0.25 / T)
    nf, _ = naive_pair_frequencies(ws, T, seed=31)
    assert abs(nf[0, 1] - 0.5) <= 5 * math.sqrt(0.25 / T)


def test_naive_sampler_frequencies(flat4):
    freq, _ = naive_pair_frequencies(flat4, T, seed=40)
    iu, iv, p = pair_probabilities(flat4)
    assert np.all(np.abs(freq[iu, iv] - 0.5) <= 5 * math.sqrt(0.25 / T))


def test_naive_sampler_cap():
    ws = WeightSequence.from_sorted(np.ones(10))
    with pytest.raises(ValueError):
        naive_pair_sampler(ws, 0, ArraySink(), cap=5)
    sink = ArraySink()
    naive_pair_sampler(ws, 0, sink)
    u, v = sink.edges()
    assert np.all(u < v)
