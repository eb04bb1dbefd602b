"""Measurements over generated graphs and partition plans.

Degree-distribution fidelity, load balance, exact checks of the cost
inequalities behind the partitioning schemes, boundary counts per rank
block and strong/weak scaling sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from clgen.cost_model import all_block_bounds, sequential_profile
from clgen.degree_model import WeightSequence, expected_degrees, powerlaw_mean, synth_powerlaw
from clgen.partitioner import (
    PartitionPlan,
    _block_boundaries,
    _scaled_ints,
    boundaries_per_block,
    plan_naive,
    plan_rrp,
)


# -- degree distributions ---------------------------------------------------

def log_bin_edges(max_degree: int) -> np.ndarray:
    """Bin edges 0, 1, 2, 4, 8, ... covering ``[0, max_degree]``."""
    edges = [0, 1]
    while edges[-1] <= max_degree:
        edges.append(edges[-1] * 2)
    return np.array(edges, dtype=np.int64)


@dataclass
class DegreeHistogram:
    counts: np.ndarray  # counts[d] = number of nodes of degree d
    n: int
    total_edges: int
    degrees: np.ndarray = field(repr=False)

    @property
    def max_degree(self) -> int:
        return int(self.counts.shape[0] - 1)

    def log_binned(self, edges: np.ndarray | None = None):
        """``(edges, mass)``; bin k is ``[edges[k], edges[k+1])``."""
        if edges is None:
            edges = log_bin_edges(self.max_degree)
        return edges, np.histogram(self.degrees, bins=edges)[0]


def degree_histogram(u, v, n: int) -> DegreeHistogram:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.size and (max(u.max(), v.max()) >= n or min(u.min(), v.min()) < 0):
        raise ValueError("edge endpoint outside [0, n)")
    deg = np.bincount(u, minlength=n) + np.bincount(v, minlength=n)
    return DegreeHistogram(np.bincount(deg, minlength=1), n, int(u.shape[0]), deg)


def exact_expected_degrees(ws: WeightSequence) -> np.ndarray:
    """sum_{j != i} min(w_i w_j / S, 1); equals w_i - w_i^2/S without clamping."""
    w, S = ws.weights, ws.sum_S
    if S == 0:
        return np.zeros(ws.n)
    base = expected_degrees(ws)
    if w[0] * w[0] < S:
        return base
    # hubs with clamped probabilities: sum explicitly where w_i w_0 >= S
    out = base.copy()
    for i in np.nonzero(w * w[0] >= S)[0]:
        p = np.minimum(w[i] * w / S, 1.0)
        out[i] = p.sum() - p[i]
    return out


@dataclass
class FidelityReport:
    mean_degree: float
    expected_mean_degree: float
    mean_rel_error: float
    bin_edges: np.ndarray
    observed: np.ndarray
    expected: np.ndarray  # model expectation of the binned degree counts
    expected_degree_hist: np.ndarray  # histogram of the expected degrees themselves
    rel_error: np.ndarray
    flagged: np.ndarray  # bins with expected mass >= min_mass
    total_edges: int
    expected_edges: float

    @property
    def max_flagged_error(self) -> float:
        return float(self.rel_error[self.flagged].max()) if self.flagged.any() else 0.0

    def rows(self):
        for k in range(len(self.observed)):
            yield (int(self.bin_edges[k]), int(self.bin_edges[k + 1]), float(self.observed[k]),
                   float(self.expected[k]), float(self.expected_degree_hist[k]),
                   float(self.rel_error[k]), bool(self.flagged[k]))


def expected_binned_degrees(lam: np.ndarray, edges: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """Expected number of nodes per degree bin when node i has Poisson(lam_i) degree."""
    out = np.zeros(len(edges) - 1)
    for lo in range(0, lam.shape[0], chunk):
        lc = lam[lo:lo + chunk, None]
        cdf = stats.poisson.cdf(edges[None, :] - 1, lc)
        out += (cdf[:, 1:] - cdf[:, :-1]).sum(axis=0)
    return out


def compare_distributions(ws: WeightSequence, hist: DegreeHistogram, min_mass: float = 100.0) -> FidelityReport:
    """Generated degrees against the model's expectations.

    Reports the relative error of the mean degree, and per log bin the
    relative error between the observed node counts and their expectation
    (degrees of node i are sums of independent Bernoullis with mean
    lam_i; binned here through a Poisson(lam_i) approximation).  Only bins
    whose expected mass is at least ``min_mass`` are flagged for checking.
    """
    if hist.n != ws.n:
        raise ValueError("histogram and weights disagree on n")
    lam = exact_expected_degrees(ws)
    top = max(hist.max_degree, int(np.ceil(lam.max() + 10 * math.sqrt(lam.max() + 1))))
    edges = log_bin_edges(top)
    _, observed = hist.log_binned(edges)
    expected = expected_binned_degrees(lam, edges)
    lit = np.histogram(lam, bins=edges.astype(float))[0].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(expected > 0, np.abs(observed - expected) / expected, np.where(observed > 0, np.inf, 0.0))
    mean_deg = 2.0 * hist.total_edges / ws.n
    exp_mean = float(lam.mean())
    return FidelityReport(
        mean_degree=mean_deg,
        expected_mean_degree=exp_mean,
        mean_rel_error=abs(mean_deg - exp_mean) / exp_mean if exp_mean > 0 else abs(mean_deg),
        bin_edges=edges,
        observed=observed.astype(float),
        expected=expected,
        expected_degree_hist=lit,
        rel_error=rel,
        flagged=expected >= min_mass,
        total_edges=hist.total_edges,
        expected_edges=float(lam.sum() / 2.0),
    )


# -- load balance -----------------------------------------------------------

def imbalance(values) -> float:
    """max / mean; 1.0 for a perfectly even split."""
    values = np.asarray(values, dtype=float)
    m = values.mean()
    return float(values.max() / m) if m > 0 else 1.0


@dataclass
class LoadReport:
    scheme: str
    expected_cost: np.ndarray
    realized_edges: np.ndarray
    realized_cost: np.ndarray
    wall_time: np.ndarray
    cpu_time: np.ndarray

    @property
    def cost_ratio(self):
        return imbalance(self.expected_cost)

    @property
    def realized_ratio(self):
        return imbalance(self.realized_cost)

    @property
    def wall_ratio(self):
        return imbalance(self.wall_time)

    @property
    def cpu_ratio(self):
        return imbalance(self.cpu_time)


def load_report(report) -> LoadReport:
    """Per-rank balance figures from a :class:`clgen.runtime.GenReport`."""
    r = report.ranks
    edges = np.array([x.edges for x in r], dtype=float)
    return LoadReport(
        scheme=report.scheme,
        expected_cost=np.array([x.expected_cost for x in r]),
        realized_edges=edges,
        realized_cost=edges + np.array([x.nodes for x in r]),
        wall_time=np.array([x.wall_time for x in r]),
        cpu_time=np.array([x.cpu_time for x in r]),
    )


def ucp_slack(ws: WeightSequence, plan: PartitionPlan) -> float:
    """Zbar + max c_u - max_i c(V_i); non-negative when the balance bound holds."""
    prof = sequential_profile(ws)
    Z_bar = prof.cum_costs[-1] / plan.P
    per = plan.per_partition_cost
    if per is None:
        from clgen.partitioner import partition_costs

        per = partition_costs(plan, prof.costs)
    return float(Z_bar + prof.costs.max() - per.max())


# -- cost inequalities ------------------------------------------------------

@dataclass
class InequalityCheck:
    name: str
    passed: bool
    checked: int
    detail: str = ""
    gaps: list = field(default_factory=list)  # (i, j, gap, bound) as floats


@dataclass
class InequalityLedger:
    checks: list[InequalityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> InequalityCheck:
        return next(c for c in self.checks if c.name == name)

    def lines(self):
        return [f"{c.name}: {'PASS' if c.passed else 'FAIL'} ({c.checked} checked) {c.detail}".rstrip()
                for c in self.checks]


def _scaled_costs(ws: WeightSequence):
    """Integers ``K c_u`` with ``K = D T``, where w = W / D and T = sum W.

    c_u = 1 + w_u (sum_{v>u} w_v) / S becomes ``D T + W_u R_u`` exactly.
    """
    W, D = _scaled_ints(ws.weights)
    T = sum(W)
    if T == 0:
        return W, D, T, 1, [1] * len(W)
    K = D * T
    out = []
    rest = T
    for Wu in W:
        rest -= Wu
        out.append(K + Wu * rest)
    return W, D, T, K, out


def verify_inequalities(ws: WeightSequence, P: int) -> InequalityLedger:
    """Evaluate the three cost inequalities exactly (rational arithmetic).

    * ``monotone_cost``: c_u >= c_v for u < v.
    * ``naive_gap``: for adjacent naive blocks of equal size x,
      c(V_i) - c(V_{i+1}) >= x^2 Wbar_i Wbar_{i+1} / S  (x = n/P when P | n).
    * ``rrp_gap``: for round-robin partitions i < j of equal size,
      0 <= c(V_i) - c(V_j) <= w_i; when V_j is one node short the
      same telescoping argument gives the bound c_i = e_i + 1 instead.
    """
    W, D, T, K, cK = _scaled_costs(ws)
    n = ws.n
    checks = []

    bad = [u for u in range(n - 1) if cK[u] < cK[u + 1]]
    checks.append(InequalityCheck("monotone_cost", not bad, max(n - 1, 0),
                             f"first violation at u={bad[0]}" if bad else ""))

    bounds = all_block_bounds(n, P)
    sums_c = [sum(cK[bounds[i]:bounds[i + 1]]) for i in range(P)]
    sums_w = [sum(W[bounds[i]:bounds[i + 1]]) for i in range(P)]
    ok, count, gaps = True, 0, []
    for i in range(P - 1):
        x0, x1 = bounds[i + 1] - bounds[i], bounds[i + 2] - bounds[i + 1]
        if x0 != x1 or x0 == 0:
            continue  # ragged block: outside the inequality's assumptions
        count += 1
        gap = sums_c[i] - sums_c[i + 1]
        bound = sums_w[i] * sums_w[i + 1] if T else 0  # scaled by K = D T
        gaps.append((i, i + 1, gap / K, bound / K))
        ok &= gap >= bound
    checks.append(InequalityCheck("naive_gap", ok, count, gaps=gaps))

    rr = [sum(cK[i::P]) for i in range(P)]
    size = [len(range(i, n, P)) for i in range(P)]
    ok, count, gaps = True, 0, []
    for i in range(min(P, n)):
        for j in range(i + 1, P):
            count += 1
            gap = rr[i] - rr[j]
            if size[i] == size[j]:
                cap = W[i] * T if T else 0  # w_i scaled by K
            else:
                # V_j lacks a last node; the telescoping bound is then c_i
                cap = cK[i]
            gaps.append((i, j, gap / K, cap / K))
            ok &= 0 <= gap <= cap
    checks.append(InequalityCheck("rrp_gap", ok, count, gaps=gaps))
    return InequalityLedger(checks)


# -- boundary census --------------------------------------------------------

@dataclass
class CensusRow:
    P: int
    max_interior: int  # most of n_1..n_{P-1} found inside one rank block
    max_held: int  # most lower boundaries n_0..n_{P-1} lying inside one block
    per_rank: np.ndarray = field(repr=False)


def boundary_census(ws: WeightSequence, P_values, use_search: bool = True) -> list[CensusRow]:
    """Boundaries found per rank block by the UCP search, for each P.

    Cumulative costs do not depend on P, so they are computed once.  With
    ``use_search`` every block runs the same divide-and-conquer routine as
    a UCP rank; otherwise a vectorised count is used.
    """
    prof = sequential_profile(ws)
    C, Z = prof.cum_costs, prof.cum_costs[-1]
    rows = []
    for P in P_values:
        Z_bar = Z / P
        b = all_block_bounds(ws.n, P)
        if use_search:
            per = np.zeros(P, dtype=np.int64)
            for i in range(P):
                lo, hi = int(b[i]), int(b[i + 1])
                entry = C[lo - 1] if lo > 0 else 0.0
                bset = _block_boundaries(i, lo, hi, C[lo:hi], entry, Z_bar, P)
                per[i] = sum(1 for _, nk in bset.entries if lo <= nk < hi)
        else:
            per = boundaries_per_block(C, Z_bar, P)
        held = per.copy()
        if ws.n and P:
            held[0] += 1  # n_0 = 0 always lies in block 0
        rows.append(CensusRow(P, int(per.max()), int(held.max()), per))
    return rows


# -- scaling ----------------------------------------------------------------

def powerlaw_w_min_for_mean(gamma: float, w_max: float, mean: float) -> float:
    """Lower cutoff giving a truncated power law the requested mean."""
    return optimize.brentq(lambda a: powerlaw_mean(gamma, a, w_max) - mean, 1e-9, mean)


def powerlaw_for(n: int, avg_degree: float, seed: int, gamma: float = 2.5, w_max: float | None = None):
    """Power-law weights whose mean weight is ``avg_degree``.

    ``w_max`` defaults to half the admissibility limit sqrt(S).
    """
    if w_max is None:
        w_max = 0.5 * math.sqrt(n * avg_degree)
    return synth_powerlaw(n, gamma, powerlaw_w_min_for_mean(gamma, w_max, avg_degree), w_max, seed)


@dataclass
class ScalingRow:
    mode: str
    workers: int
    n: int
    expected_edges: float
    edges: int
    seconds: float
    ratio: float  # strong: speedup T_1 / T_P; weak: T_P / T_1


def _timed_run(ws, P, scheme, seed, repeats):
    from clgen.runtime import GenConfig, run_generate

    best = None
    for _ in range(repeats):
        rep = run_generate(GenConfig(ws, scheme=scheme, procs=P, seed=seed, keep_edges=False))
        if best is None or rep.gen_time < best.gen_time:
            best = rep
    return best


def strong_scaling(ws: WeightSequence, workers=(1, 2, 4, 8), scheme: str = "ucp", seed: int = 1,
                   repeats: int = 3) -> list[ScalingRow]:
    rows = []
    base = None
    for P in workers:
        rep = _timed_run(ws, P, scheme, seed, repeats)
        base = rep.gen_time if base is None else base
        rows.append(ScalingRow("strong", P, ws.n, rep.expected_edges, rep.total_edges, rep.gen_time,
                               base / rep.gen_time if rep.gen_time > 0 else float("inf")))
    return rows


def weak_scaling(nodes_per_worker: int = 100_000, edges_per_worker: float = 1e6, workers=(1, 2, 4, 8),
                 scheme: str = "ucp", seed: int = 1, repeats: int = 3, gamma: float = 2.5) -> list[ScalingRow]:
    rows = []
    base = None
    avg = 2.0 * edges_per_worker / nodes_per_worker
    for P in workers:
        ws = powerlaw_for(nodes_per_worker * P, avg, seed, gamma=gamma)
        rep = _timed_run(ws, P, scheme, seed, repeats)
        base = rep.gen_time if base is None else base
        rows.append(ScalingRow("weak", P, ws.n, rep.expected_edges, rep.total_edges, rep.gen_time,
                               rep.gen_time / base if base > 0 else float("inf")))
    return rows


def bench_scaling(strong_ws: WeightSequence | None = None, workers=(1, 2, 4, 8), scheme: str = "ucp",
                  seed: int = 1, repeats: int = 3, nodes_per_worker: int = 100_000,
                  edges_per_worker: float = 1e6, csv_path=None) -> list[ScalingRow]:
    """Strong sweep on ``strong_ws`` (if given) followed by a weak sweep."""
    rows = []
    if strong_ws is not None:
        rows += strong_scaling(strong_ws, workers, scheme, seed, repeats)
    if nodes_per_worker:
        rows += weak_scaling(nodes_per_worker, edges_per_worker, workers, scheme, seed, repeats)
    if csv_path is not None:
        write_rows_csv(rows, csv_path)
    return rows


def write_rows_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["mode", "workers", "n", "expected_edges", "edges", "seconds", "ratio"])
        for r in rows:
            wr.writerow([r.mode, r.workers, r.n, f"{r.expected_edges:.1f}", r.edges, f"{r.seconds:.6f}",
                         f"{r.ratio:.4f}"])


def scaling_table(rows) -> str:
    out = [f"{'mode':<7}{'workers':>8}{'n':>10}{'edges':>12}{'seconds':>10}{'ratio':>8}"]
    for r in rows:
        out.append(f"{r.mode:<7}{r.workers:>8}{r.n:>10}{r.edges:>12}{r.seconds:>10.4f}{r.ratio:>8.2f}")
    return "\n".join(out) + "\n"


def scheme_costs(ws: WeightSequence, P: int) -> dict[str, np.ndarray]:
    """Expected per-partition cost under each scheme (no generation)."""
    from clgen.partitioner import plan_ucp

    costs = sequential_profile(ws).costs
    return {
        "naive": plan_naive(ws.n, P, costs).per_partition_cost,
        "ucp": plan_ucp(ws, P).per_partition_cost,
        "rrp": plan_rrp(ws.n, P, costs).per_partition_cost,
    }


__all__ = [
    "DegreeHistogram",
    "FidelityReport",
    "InequalityLedger",
    "LoadReport",
    "ScalingRow",
    "bench_scaling",
    "boundary_census",
    "compare_distributions",
    "degree_histogram",
    "imbalance",
    "load_report",
    "verify_inequalities",
]
