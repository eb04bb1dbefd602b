from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clgen import exactsum
from clgen.cost_model import (
    all_block_bounds,
    block_bounds,
    block_cumulative,
    finalize_offsets,
    global_cost,
    node_cost,
    node_costs,
    partition_indices,
    partition_of,
    sequential_profile,
)
from clgen.degree_model import WeightSequence, expected_total_edges

from conftest import random_weights
from oracles import exact_costs

finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


# -- exact summation --------------------------------------------------------

@given(st.lists(finite, max_size=80))
def test_exact_sum_is_correctly_rounded(xs):
    assert exactsum.exact_sum(np.array(xs)) == float(sum(map(Fraction, xs), Fraction(0)))


@given(st.lists(finite, min_size=1, max_size=50), finite)
def test_exact_prefix(xs, start):
    out, parts = exactsum.exact_prefix(np.array(xs), start=(start,))
    acc = Fraction(start)
    for x, got in zip(xs, out):
        acc += Fraction(x)
        assert got == float(acc)
    assert exactsum.value(parts) == float(acc)


@given(st.lists(finite, max_size=30), st.lists(finite, max_size=30))
def test_merge_and_negate(a, b):
    pa, pb = exactsum.partials_of(np.array(a)), exactsum.partials_of(np.array(b))
    want = sum(map(Fraction, a + b), Fraction(0))
    assert exactsum.value(exactsum.merge(pa, pb)) == float(want)
    assert exactsum.value(exactsum.merge(pa, exactsum.negate(pa))) == 0.0


def test_exact_sum_cancellation():
    assert exactsum.exact_sum(np.array([1e100, 1.0, -1e100])) == 1.0


# -- node costs -------------------------------------------------------------

def test_node_cost_examples():
    assert node_cost(4.0, 0.0, 10.0) == pytest.approx(3.4, abs=1e-15)
    assert node_cost(1.0, 9.0, 10.0) == 1.0
    assert node_cost(2.0, 2.0, 8.0) == 2.0
    # float dust past the end of the sequence is clamped
    assert node_cost(1.0, 9.000000000000002, 10.0) == 1.0
    with pytest.raises(ValueError):
        node_cost(1.0, 0.0, 0.0)


def test_toy_profile(toy):
    prof = sequential_profile(toy)
    np.testing.assert_allclose(prof.costs, [3.4, 1.9, 1.2, 1.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(prof.cum_costs, [3.4, 5.3, 6.5, 7.5], rtol=0, atol=1e-14)


def test_toy_blocked_rank1(toy):
    local = block_cumulative(toy, 1, 2, sigma_start=7.0)
    assert (local.block_lo, local.block_hi) == (2, 4)
    np.testing.assert_allclose(local.cum_costs, [1.2, 2.2], atol=1e-15)
    assert local.block_cost == pytest.approx(2.2, abs=1e-15)
    rank0 = block_cumulative(toy, 0, 2, sigma_start=0.0)
    fin = finalize_offsets(local, rank0.block_partials)
    assert fin.global_offset == pytest.approx(5.3, abs=1e-15)
    assert np.array_equal(fin.cum_costs, sequential_profile(toy).cum_costs[2:])


def test_finalize_with_zero_is_identity(toy):
    prof = block_cumulative(toy, 0, 1, sigma_start=0.0)
    fin = finalize_offsets(prof, 0.0)
    assert np.array_equal(fin.cum_costs, prof.cum_costs) and fin.global_offset == 0.0
    with pytest.raises(ValueError):
        finalize_offsets(fin, 0.0)


def test_zero_weight_block_is_a_ramp():
    ws = WeightSequence.from_sorted([5.0, 3.0, 0.0, 0.0, 0.0, 0.0])
    prof = block_cumulative(ws, 1, 2)
    assert prof.costs.tolist() == [1.0, 1.0, 1.0]
    assert prof.cum_costs.tolist() == [1.0, 2.0, 3.0]


def test_costs_match_rational_oracle(rng):
    for _ in range(30):
        ws = random_weights(rng, int(rng.integers(1, 300)))
        ref = exact_costs(ws.weights)
        np.testing.assert_allclose(node_costs(ws), [float(x) for x in ref], rtol=4e-16, atol=0)


def test_total_cost_is_n_plus_m(rng):
    for _ in range(20):
        ws = random_weights(rng, int(rng.integers(2, 2000)))
        Z = global_cost(ws).Z
        assert Z == pytest.approx(ws.n + expected_total_edges(ws), rel=1e-12)


def test_costs_non_increasing(rng):
    for _ in range(50):
        c = node_costs(random_weights(rng, int(rng.integers(1, 500))))
        assert np.all(np.diff(c) <= 0)
        assert np.all(c >= 1.0)


@pytest.mark.parametrize("P", [1, 2, 3, 7, 16, 64])
def test_blocked_profiles_concatenate_to_sequential(rng, P):
    for _ in range(5):
        ws = random_weights(rng, int(rng.integers(1, 400)))
        seq = sequential_profile(ws)
        offset = ()
        pieces = []
        for r in range(P):
            prof = block_cumulative(ws, r, P)
            fin = finalize_offsets(prof, offset)
            assert fin.block_cost == exactsum.value(prof.block_partials)
            offset = exactsum.merge(offset, prof.block_partials)
            pieces.append(fin.cum_costs)
        assert np.array_equal(np.concatenate(pieces), seq.cum_costs)
        assert np.all(np.diff(seq.cum_costs) > 0)


def test_block_bounds():
    assert block_bounds(10, 3, 0) == (0, 4)
    assert block_bounds(10, 3, 1) == (4, 7)
    assert block_bounds(10, 3, 2) == (7, 10)
    assert all_block_bounds(10, 3).tolist() == [0, 4, 7, 10]
    assert all_block_bounds(2, 4).tolist() == [0, 1, 2, 2, 2]
    with pytest.raises(ValueError):
        block_bounds(10, 3, 3)


def test_partition_of():
    assert partition_of(3.4, 3.75) == 0
    assert partition_of(5.3, 3.75) == 1
    assert partition_of(7.5, 3.75, P=2) == 1
    assert partition_of(7.5, 3.75) == 2
    with pytest.raises(ValueError):
        partition_of(1.0, 0.0)
    assert partition_indices(np.array([3.4, 5.3, 6.5, 7.5]), 3.75, 2).tolist() == [0, 1, 1, 1]
