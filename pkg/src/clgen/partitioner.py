"""Partitioning source nodes across P workers.

Three schemes:

``naive``  consecutive blocks with equal node counts;
``rrp``    round robin, node u goes to partition u mod P;
``ucp``    consecutive blocks of (nearly) equal expected cost, found in
           parallel from blocked cumulative costs.

A UCP boundary sits between nodes u and u+1 whenever floor(C_u / Zbar)
changes; node u+1 is then the lower boundary of partition
floor(C_{u+1} / Zbar).  When a single node's cost spans several multiples
of Zbar, every skipped partition index gets the same lower boundary and the
corresponding partitions are empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from clgen import exactsum
from clgen.comm import Communicator, run_spmd
from clgen.cost_model import (
    GlobalCost,
    all_block_bounds,
    block_cumulative,
    finalize_offsets,
    partition_indices,
    partition_of,
    sequential_profile,
)
from clgen.degree_model import WeightSequence

SCHEMES = ("naive", "ucp", "rrp")


@dataclass(frozen=True)
class BoundarySet:
    owner_rank: int
    entries: tuple  # sorted (k, n_k) pairs


@dataclass(frozen=True)
class PartitionPlan:
    scheme: str
    P: int
    n: int
    boundaries: np.ndarray | None  # n_0..n_P for consecutive schemes
    per_partition_cost: np.ndarray = field(default=None, repr=False)
    boundaries_per_rank: tuple | None = None  # |B_i| found by each rank (ucp only)

    @property
    def rrp_modulus(self) -> int | None:
        return self.P if self.scheme == "rrp" else None

    def nodes(self, i: int) -> np.ndarray:
        """Source nodes of partition ``i`` in ascending order."""
        if not 0 <= i < self.P:
            raise IndexError(i)
        if self.scheme == "rrp":
            return np.arange(i, self.n, self.P, dtype=np.int64)
        return np.arange(self.boundaries[i], self.boundaries[i + 1], dtype=np.int64)

    def sizes(self) -> np.ndarray:
        if self.scheme == "rrp":
            q, r = divmod(self.n, self.P)
            return q + (np.arange(self.P) < r).astype(np.int64)
        return np.diff(self.boundaries)

    def assignment(self) -> np.ndarray:
        """Partition index of every node."""
        if self.scheme == "rrp":
            return np.arange(self.n, dtype=np.int64) % self.P
        return np.repeat(np.arange(self.P, dtype=np.int64), self.sizes())

    def same_partition(self, other: "PartitionPlan") -> bool:
        if (self.scheme == "rrp") != (other.scheme == "rrp") or self.P != other.P or self.n != other.n:
            return False
        if self.scheme == "rrp":
            return True
        return bool(np.array_equal(self.boundaries, other.boundaries))


def _with_costs(plan: PartitionPlan, costs: np.ndarray | None) -> PartitionPlan:
    if costs is None:
        return plan
    per = partition_costs(plan, costs)
    return PartitionPlan(plan.scheme, plan.P, plan.n, plan.boundaries, per, plan.boundaries_per_rank)


def partition_costs(plan: PartitionPlan, costs: np.ndarray) -> np.ndarray:
    """c(V_i) for every partition, each summed exactly."""
    return np.array([exactsum.exact_sum(costs[plan.nodes(i)]) for i in range(plan.P)])


def plan_naive(n: int, P: int, costs: np.ndarray | None = None) -> PartitionPlan:
    if P < 1:
        raise ValueError("P must be >= 1")
    return _with_costs(PartitionPlan("naive", P, n, all_block_bounds(n, P).astype(np.int64)), costs)


def plan_rrp(n: int, P: int, costs: np.ndarray | None = None) -> PartitionPlan:
    if P < 1:
        raise ValueError("P must be >= 1")
    return _with_costs(PartitionPlan("rrp", P, n, None), costs)


def _record(found: dict, k_lo: int, k_hi: int, node: int, P: int):
    # partitions k_lo+1 .. k_hi all start at `node`; k = 0 is the implicit n_0
    for k in range(max(k_lo + 1, 1), min(k_hi, P - 1) + 1):
        found[k] = node


def find_boundaries(s: int, e: int, C: np.ndarray, Z_bar: float, P: int | None = None,
                    offset: int = 0) -> BoundarySet:
    """Divide-and-conquer search for lower boundaries in ``(s, e]``.

    ``C`` is indexed by ``u - offset``.  A boundary is recorded at node m+1
    whenever ``floor(C_m / Zbar) != floor(C_{m+1} / Zbar)``; ranges whose end
    points fall in the same partition are skipped without inspection.
    """
    found: dict[int, int] = {}
    big = P if P is not None else np.iinfo(np.int64).max

    def part(u):
        return partition_of(C[u - offset], Z_bar, P)

    def rec(lo, hi):
        if part(lo) == part(hi):
            return
        m = (lo + hi) // 2
        a, b = part(m), part(m + 1)
        if a != b:
            _record(found, a, b, m + 1, big)
        rec(lo, m)
        rec(m + 1, hi)

    if s <= e:
        rec(s, e)
    return BoundarySet(owner_rank=-1, entries=tuple(sorted(found.items())))


def _block_boundaries(rank: int, lo: int, hi: int, C_local: np.ndarray, Z_entry: float,
                      Z_bar: float, P: int) -> BoundarySet:
    """All boundaries owned by a block, including one sitting on its first node.

    The cumulative cost just before the block equals the block's scanned
    offset, so the pair (lo-1, lo) is checked against ``Z_entry``.
    """
    found: dict[int, int] = {}
    if hi > lo:
        k_prev = partition_of(Z_entry, Z_bar, P)
        k_first = partition_of(C_local[0], Z_bar, P)
        if k_prev != k_first:
            _record(found, k_prev, k_first, lo, P)
        inner = find_boundaries(lo, hi - 1, C_local, Z_bar, P, offset=lo)
        found.update(inner.entries)
    return BoundarySet(owner_rank=rank, entries=tuple(sorted(found.items())))


def _ucp_rank(comm: Communicator, ws: WeightSequence):
    """One rank of the parallel UCP procedure; returns ``(plan, profile, bset)``."""
    P, i = comm.size, comm.rank
    bounds = all_block_bounds(ws.n, P)
    lo, hi = int(bounds[i]), int(bounds[i + 1])
    # Step 1-2: block weight sums, exclusive scan -> weight prefix entering block
    s_i = exactsum.partials_of(ws.weights[lo:hi])
    S_i = comm.exclusive_scan(s_i, exactsum.merge, ())
    S_parts = comm.all_reduce(s_i, exactsum.merge)
    # Step 3: block-local cumulative costs
    prof = block_cumulative(ws, i, P, sigma_start=S_i, S_partials=S_parts)
    # Step 4-5: exclusive scan of block costs, shift to global values
    Z_i = comm.exclusive_scan(prof.block_partials, exactsum.merge, ())
    prof = finalize_offsets(prof, Z_i)
    gc = GlobalCost.from_partials(comm.all_reduce(prof.block_partials, exactsum.merge), P)
    bset = _block_boundaries(i, lo, hi, prof.cum_costs, prof.global_offset, gc.Z_bar, P)
    if lo < hi == ws.n:
        # partitions past the last node's index (rounding of Zbar) start at n
        k_last = partition_of(prof.cum_costs[-1], gc.Z_bar, P)
        if k_last < P - 1:
            bset = BoundarySet(i, bset.entries + tuple((k, ws.n) for k in range(k_last + 1, P)))
    # boundary exchange: n_k is the upper end of V_{k-1} and the start of V_k
    for k, n_k in bset.entries:
        comm.send_boundary(k, n_k, k - 1)
        comm.send_boundary(k, n_k, k)
    expected = (1 if i > 0 else 0) + (1 if i < P - 1 else 0)
    got = dict(comm.recv_boundaries(expected))
    my_lo = 0 if i == 0 else got[i]
    my_hi = ws.n if i == P - 1 else got[i + 1]
    # every rank assembles the full plan
    spans = comm.allgather((my_lo, my_hi))
    boundaries = np.array([sp[0] for sp in spans] + [ws.n], dtype=np.int64)
    if any(spans[r][1] != boundaries[r + 1] for r in range(P)):
        raise RuntimeError("inconsistent boundary exchange")
    counts = tuple(comm.allgather(len(bset.entries)))
    plan = PartitionPlan("ucp", P, ws.n, boundaries, None, counts)
    return plan, prof, BoundarySet(i, bset.entries)


def plan_ucp(ws: WeightSequence, P: int | None = None, comm: Communicator | None = None,
             with_costs: bool = True) -> PartitionPlan:
    """Uniform cost partition computed by P SPMD ranks.

    With ``comm`` given, this must be called collectively by every rank of
    that communicator and returns the same plan on each.  Without it, an
    in-process group of ``P`` ranks is started.
    """
    if comm is None:
        if P is None or P < 1:
            raise ValueError("need P >= 1 or a communicator")
        plan = run_spmd(P, _ucp_rank, ws)[0][0]
    else:
        if P is not None and P != comm.size:
            raise ValueError(f"P={P} does not match communicator size {comm.size}")
        plan = _ucp_rank(comm, ws)[0]
    if with_costs:
        plan = _with_costs(plan, sequential_profile(ws).costs)
    return plan


# -- sequential reference ---------------------------------------------------

def _scaled_ints(values):
    """Integers N_k and a common denominator D with values[k] == N_k / D exactly."""
    ratios = [float(x).as_integer_ratio() for x in values]
    D = max((d for _, d in ratios), default=1)
    return [num * (D // d) for num, d in ratios], D


def reference_cumulative_costs(ws: WeightSequence) -> tuple[np.ndarray, np.ndarray, float]:
    """Costs and cumulative costs via exact integer arithmetic.

    Independent of :mod:`clgen.exactsum`: weights and costs are scaled to
    integers, prefixes are exact integer sums, and each rounding is Python's
    correctly rounded integer division.  Returns ``(c, C, Z)``.
    """
    W, D = _scaled_ints(ws.weights)
    T = sum(W)
    S = T / D
    c = np.empty(ws.n)
    pre = 0
    for u, Wu in enumerate(W):
        pre += Wu
        rem = (T - pre) / D
        e = (float(ws.weights[u]) / S) * rem if S > 0 else 0.0
        c[u] = max(e, 0.0) + 1.0
    Cn, D2 = _scaled_ints(c)
    C = np.empty(ws.n)
    acc = 0
    for u, x in enumerate(Cn):
        acc += x
        C[u] = acc / D2
    return c, C, (acc / D2 if ws.n else 0.0)


def plan_ucp_oracle(ws: WeightSequence, P: int, with_costs: bool = True) -> PartitionPlan:
    """UCP boundaries by one left-to-right scan over exactly summed costs."""
    if P < 1:
        raise ValueError("P must be >= 1")
    c, C, Z = reference_cumulative_costs(ws)
    Z_bar = Z / P
    bounds = all_block_bounds(ws.n, P)
    boundaries = np.zeros(P + 1, dtype=np.int64)
    boundaries[P] = ws.n
    per_rank = [0] * P
    prev = 0  # partition of the virtual node -1 (C = 0)
    block = 0
    for u in range(ws.n):
        while u >= bounds[block + 1]:
            block += 1
        k = min(max(int(np.floor(C[u] / Z_bar)), 0), P - 1)
        for j in range(prev + 1, k + 1):
            boundaries[j] = u
            per_rank[block] += 1
        prev = max(prev, k)
    # partitions never reached start at n
    for j in range(prev + 1, P):
        boundaries[j] = ws.n
    plan = PartitionPlan("ucp", P, ws.n, boundaries, None, tuple(per_rank))
    if with_costs:
        plan = _with_costs(plan, c)
    return plan


def boundaries_per_block(C: np.ndarray, Z_bar: float, P: int) -> np.ndarray:
    """Number of boundaries owned by each rank block (vectorised bookkeeping)."""
    n = C.shape[0]
    k = partition_indices(C, Z_bar, P)
    prev = np.concatenate(([0], k[:-1]))
    jumps = np.maximum(k - prev, 0)
    bounds = all_block_bounds(n, P)
    owner = np.searchsorted(bounds, np.arange(n), side="right") - 1
    return np.bincount(owner, weights=jumps, minlength=P).astype(np.int64)


# -- plan files -------------------------------------------------------------

def write_plan(plan: PartitionPlan, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(f"{plan.scheme} {plan.P} {plan.n}\n")
        if plan.scheme == "rrp":
            fh.write(f"rrp {plan.P}\n")
        else:
            for b in plan.boundaries:
                fh.write(f"{int(b)}\n")


def read_plan(path) -> PartitionPlan:
    with open(Path(path), encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty plan file {path}")
    head = lines[0].split()
    if len(head) != 3 or head[0] not in SCHEMES:
        raise ValueError(f"bad plan header {lines[0]!r}")
    scheme, P, n = head[0], int(head[1]), int(head[2])
    if scheme == "rrp":
        if lines[1:] != [f"rrp {P}"]:
            raise ValueError("rrp plan must contain the marker line 'rrp P'")
        return PartitionPlan("rrp", P, n, None)
    b = np.array([int(x) for x in lines[1:]], dtype=np.int64)
    if b.shape[0] != P + 1 or b[0] != 0 or b[-1] != n or np.any(np.diff(b) < 0):
        raise ValueError("plan boundaries must be P+1 non-decreasing values from 0 to n")
    return PartitionPlan(scheme, P, n, b)


def make_plan(ws: WeightSequence, scheme: str, P: int, comm: Communicator | None = None) -> PartitionPlan:
    if scheme == "naive":
        return plan_naive(ws.n, P)
    if scheme == "rrp":
        return plan_rrp(ws.n, P)
    if scheme == "ucp":
        return plan_ucp(ws, P, comm, with_costs=False)
    raise ValueError(f"unknown scheme {scheme!r}")
