import math

import numpy as np
import pytest

from clgen.analysis import (
    boundary_census,
    compare_distributions,
    degree_histogram,
    exact_expected_degrees,
    expected_binned_degrees,
    imbalance,
    load_report,
    log_bin_edges,
    powerlaw_for,
    scaling_table,
    strong_scaling,
    ucp_slack,
    verify_inequalities,
    write_rows_csv,
)
from clgen.degree_model import WeightSequence, expected_degrees, synth_constant, synth_powerlaw
from clgen.edge_skip import skip_pair_frequencies
from clgen.partitioner import plan_ucp
from clgen.runtime import GenConfig, run_generate

from conftest import random_weights


def test_histogram_empty_and_triangle():
    h = degree_histogram([], [], 4)
    assert h.counts.tolist() == [4] and h.total_edges == 0
    t = degree_histogram([0, 0, 1], [1, 2, 2], 3)
    assert t.counts.tolist() == [0, 0, 3]
    with pytest.raises(ValueError):
        degree_histogram([0], [5], 3)


def test_handshake(rng):
    ws = random_weights(rng, 1000, "powerlaw")
    rep = run_generate(GenConfig(ws, procs=2, seed=1))
    h = degree_histogram(*rep.edges, ws.n)
    assert h.counts.sum() == ws.n
    assert (np.arange(h.counts.size) * h.counts).sum() == 2 * h.total_edges
    edges, mass = h.log_binned()
    assert mass.sum() == ws.n and edges[0] == 0 and edges[1] == 1


def test_log_bins():
    assert log_bin_edges(0).tolist() == [0, 1]
    assert log_bin_edges(5).tolist() == [0, 1, 2, 4, 8]


def test_expected_degrees_with_and_without_clamp():
    ws = synth_powerlaw(500, 2.5, 1.0, 10.0, seed=0)
    assert np.array_equal(exact_expected_degrees(ws), expected_degrees(ws))
    hub = WeightSequence.from_sorted([6.0, 5.0, 1.0])
    lam = exact_expected_degrees(hub)
    assert lam[0] == pytest.approx(1.0 + 0.5)
    assert lam.sum() == pytest.approx(2 * (1.0 + 0.5 + 5 / 12))


def test_expectation_vs_itself_is_zero():
    lam = np.full(1000, 3.0)
    edges = log_bin_edges(40)
    exp = expected_binned_degrees(lam, edges)
    assert exp.sum() == pytest.approx(1000.0)
    assert np.all(np.abs(exp - expected_binned_degrees(lam, edges)) == 0)


def test_constant_mean_degree():
    ws = synth_constant(100_000, 50)
    rep = run_generate(GenConfig(ws, procs=4, seed=6))
    fid = compare_distributions(ws, degree_histogram(*rep.edges, ws.n))
    assert fid.expected_mean_degree == pytest.approx(50 - 2500 / ws.sum_S)
    assert fid.mean_rel_error < 0.02


def test_two_node_expected_degree():
    ws = WeightSequence.from_sorted([1.0, 1.0])
    assert exact_expected_degrees(ws).tolist() == [0.5, 0.5]
    T = 100_000
    _, totals = skip_pair_frequencies(ws, T, seed=3)
    assert abs(totals.mean() - 0.5) <= 5 * 0.5 / math.sqrt(T)


def test_inequality_hand_examples(flat4, toy):
    led = verify_inequalities(flat4, 2)
    assert led.passed
    (_, _, gap, bound), = led["naive_gap"].gaps
    assert gap == 2.0 and bound == 2.0
    led = verify_inequalities(toy, 2)
    (_, _, gap, cap), = led["rrp_gap"].gaps
    assert gap == pytest.approx(1.7) and cap == 4.0
    assert any("monotone_cost: PASS" in line for line in led.lines())


def test_inequalities_random(rng):
    for _ in range(150):
        n = int(rng.integers(1, 400))
        led = verify_inequalities(random_weights(rng, n), int(rng.integers(1, 65)))
        assert led.passed, led.lines()


def test_inequality_checks_can_fail():
    ws = WeightSequence.from_sorted([1.0, 3.0, 2.0])  # unsorted input breaks monotonicity
    assert not verify_inequalities(ws, 2)["monotone_cost"].passed


def test_imbalance_and_load_report():
    assert imbalance([1, 1, 1]) == 1.0 and imbalance([3, 1]) == 1.5 and imbalance([0, 0]) == 1.0
    ws = synth_powerlaw(5000, 2.3, 1.0, 50.0, seed=3)
    lr = load_report(run_generate(GenConfig(ws, scheme="naive", procs=4, seed=1, keep_edges=False)))
    assert lr.cost_ratio > 1.5 and lr.realized_ratio >= 1.0 and lr.cpu_ratio >= 1.0


def test_ucp_slack_non_negative(rng):
    for _ in range(20):
        ws = random_weights(rng, int(rng.integers(1, 1000)))
        P = int(rng.integers(1, 30))
        assert ucp_slack(ws, plan_ucp(ws, P)) >= -1e-9


def test_census_constant_weights():
    ws = synth_constant(100_000, 50)
    rows = {r.P: r for r in boundary_census(ws, [1, 2, 4, 8, 64])}
    assert rows[1].max_interior == 0
    assert all(r.max_held == 2 for P, r in rows.items() if P > 1)
    fast = boundary_census(ws, [2, 4, 8, 64], use_search=False)
    assert [r.max_interior for r in fast] == [rows[P].max_interior for P in (2, 4, 8, 64)]


def test_powerlaw_for_hits_mean():
    ws = powerlaw_for(50_000, 20.0, seed=2)
    assert ws.weights.mean() == pytest.approx(20.0, rel=0.05)


def test_strong_scaling_single_worker(tmp_path):
    ws = synth_powerlaw(20_000, 2.5, 2.0, 100.0, seed=1)
    rows = strong_scaling(ws, workers=(1, 2), repeats=1)
    assert rows[0].ratio == 1.0 and rows[0].edges == rows[1].edges
    write_rows_csv(rows, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("mode,workers")
    assert "strong" in scaling_table(rows)


def test_rrp_gap_unequal_sizes_use_node_cost_bound():
    ws = WeightSequence.from_sorted(np.full(5, 0.2))
    led = verify_inequalities(ws, 2)  # sizes 3 and 2
    (_, _, gap, cap), = led["rrp_gap"].gaps
    assert gap > 0.2  # exceeds w_0: the extra node costs at least 1
    assert cap == pytest.approx(1.0 + 0.2 * 0.8 / 1.0) and led.passed
