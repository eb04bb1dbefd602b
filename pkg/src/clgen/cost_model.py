"""Expected per-node work and cumulative costs for load balancing.

Generating the edges of source u costs c_u = e_u + 1: one unit for the node
plus its expected number of emitted edges e_u = (w_u / S) * sum_{v>u} w_v.
Prefix sums (sigma_u and C_u) are carried exactly and rounded once, so a
rank computing its block from a scanned offset reproduces the sequential
values bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from clgen import exactsum
from clgen.degree_model import WeightSequence
from clgen.exactsum import CAPACITY, grow, round_parts


@dataclass(frozen=True)
class CostProfile:
    """Costs of one rank's block ``[block_lo, block_hi)``.

    ``cum_costs`` holds C_u; before :func:`finalize_offsets` it is local to the
    block (starts from zero), afterwards it is global.
    """

    rank: int
    block_lo: int
    block_hi: int
    sigma_start: float
    costs: np.ndarray
    cum_costs: np.ndarray
    block_cost: float
    global_offset: float = 0.0
    finalized: bool = False
    sigma_partials: tuple = field(default=(), repr=False)
    block_partials: tuple = field(default=(), repr=False)
    offset_partials: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class GlobalCost:
    Z: float
    Z_bar: float
    partials: tuple = field(default=(), repr=False)

    @classmethod
    def from_partials(cls, partials, P):
        Z = exactsum.value(partials)
        return cls(Z, Z / P, tuple(partials))


def node_cost(w_u: float, sigma_u: float, S: float) -> float:
    """c_u = (w_u / S)(S - sigma_u - w_u) + 1, with e_u clamped at zero."""
    if not S > 0:
        raise ValueError("S must be positive")
    e = (w_u / S) * (S - sigma_u - w_u)
    return max(e, 0.0) + 1.0


def block_bounds(n: int, P: int, rank: int) -> tuple[int, int]:
    """Block of ``rank``: ceil(n/P) nodes for the first n mod P ranks, floor after."""
    if P < 1:
        raise ValueError("P must be >= 1")
    if not 0 <= rank < P:
        raise ValueError(f"rank {rank} outside [0, {P})")
    q, r = divmod(n, P)
    lo = rank * q + min(rank, r)
    return lo, lo + q + (1 if rank < r else 0)


def all_block_bounds(n: int, P: int) -> np.ndarray:
    """Array of P+1 block edges."""
    q, r = divmod(n, P)
    ranks = np.arange(P + 1)
    return ranks * q + np.minimum(ranks, r)


@njit(cache=True, nogil=True)
def _block_kernel(w, lo, hi, S, s_parts, s_k, pre, pre_k, costs, local_c, loc):
    tmp = np.empty(CAPACITY)
    loc_k = 0
    for u in range(lo, hi):
        wu = w[u]
        pre_k = grow(pre, pre_k, wu)
        # suffix after u, rounded once: S - sigma_u - w_u
        for t in range(s_k):
            tmp[t] = s_parts[t]
        tk = s_k
        for t in range(pre_k):
            tk = grow(tmp, tk, -pre[t])
        rem = round_parts(tmp, tk)
        e = 0.0
        if S > 0.0:
            e = (wu / S) * rem
            if e < 0.0:
                e = 0.0
        c = e + 1.0
        costs[u - lo] = c
        loc_k = grow(loc, loc_k, c)
        local_c[u - lo] = round_parts(loc, loc_k)
    return loc_k


def block_cumulative(ws: WeightSequence, rank: int, P: int, sigma_start=None, S_partials=None) -> CostProfile:
    """Costs and block-local cumulative costs for one rank.

    ``sigma_start`` is the exclusive weight prefix entering the block, as a
    float or an exact expansion (tuple of partials).  When omitted it is
    computed directly from the weights.
    """
    lo, hi = block_bounds(ws.n, P, rank)
    if sigma_start is None:
        sigma_parts = exactsum.partials_of(ws.weights[:lo])
    elif isinstance(sigma_start, tuple):
        sigma_parts = sigma_start
    else:
        sigma_parts = (float(sigma_start),)
    if S_partials is None:
        S_partials = ws.partials
    S = exactsum.value(S_partials)
    s_buf, s_k = exactsum.new_buffer(S_partials)
    pre, pre_k = exactsum.new_buffer(sigma_parts)
    loc = np.zeros(CAPACITY)
    costs = np.empty(hi - lo)
    local_c = np.empty(hi - lo)
    loc_k = _block_kernel(ws.weights, lo, hi, S, s_buf, s_k, pre, pre_k, costs, local_c, loc)
    block_parts = tuple(loc[:loc_k].tolist())
    return CostProfile(
        rank=rank,
        block_lo=lo,
        block_hi=hi,
        sigma_start=exactsum.value(sigma_parts),
        costs=costs,
        cum_costs=local_c,
        block_cost=exactsum.value(block_parts),
        sigma_partials=tuple(sigma_parts),
        block_partials=block_parts,
    )


def finalize_offsets(profile: CostProfile, Z_i) -> CostProfile:
    """Shift block-local cumulative costs by the exclusive scan ``Z_i`` of block costs."""
    if profile.finalized:
        raise ValueError("profile already finalized")
    offset = Z_i if isinstance(Z_i, tuple) else (float(Z_i),)
    cum, _ = exactsum.exact_prefix(profile.costs, start=offset)
    return replace(
        profile,
        cum_costs=cum,
        global_offset=exactsum.value(offset),
        finalized=True,
        offset_partials=tuple(offset),
    )


def partition_of(C_u: float, Z_bar: float, P: int | None = None) -> int:
    """Partition index floor(C_u / Z_bar), clamped to [0, P-1] when P is given."""
    if not Z_bar > 0:
        raise ValueError("Z_bar must be positive")
    k = math.floor(C_u / Z_bar)
    if P is not None:
        k = min(max(k, 0), P - 1)
    return max(k, 0)


def partition_indices(C: np.ndarray, Z_bar: float, P: int) -> np.ndarray:
    """Vectorised :func:`partition_of`."""
    return np.clip(np.floor(np.asarray(C) / Z_bar), 0, P - 1).astype(np.int64)


def sequential_profile(ws: WeightSequence) -> CostProfile:
    """Whole-sequence profile (P = 1), finalized."""
    return finalize_offsets(block_cumulative(ws, 0, 1, sigma_start=()), ())


def node_costs(ws: WeightSequence) -> np.ndarray:
    return sequential_profile(ws).costs


def global_cost(ws: WeightSequence, P: int = 1) -> GlobalCost:
    prof = block_cumulative(ws, 0, 1, sigma_start=())
    return GlobalCost.from_partials(prof.block_partials, P)
