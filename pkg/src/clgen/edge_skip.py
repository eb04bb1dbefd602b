"""Edge-skipping Chung-Lu generation and the brute-force pair sampler.

For a source u the destinations j > u are visited by geometric skips: with
current candidate probability p the gap to the next candidate is
``floor(ln r / ln(1 - p))``, and the candidate v is kept with probability
q / p where q = min(w_u w_v / S, 1).  Weights are sorted non-increasing,
so q <= p and every pair (u, v) ends up present with probability exactly
min(w_u w_v / S, 1), independently of all other pairs.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from clgen import exactsum
from clgen.degree_model import WeightSequence
from clgen.rng import RngStream, key_from_base, next_open01, seed_base

ORACLE_CAP = 2048


class EdgeSink:
    """Receives generated edges in chunks of parallel ``(u, v)`` arrays."""

    counts_only = False

    def put(self, u: np.ndarray, v: np.ndarray) -> None:
        raise NotImplementedError

    def put_count(self, k: int) -> None:
        """Record ``k`` edges that were counted but not materialised."""
        raise NotImplementedError


class ArraySink(EdgeSink):
    """Keeps every chunk in memory."""

    def __init__(self):
        self._u = []
        self._v = []
        self.count = 0

    def put(self, u, v):
        self._u.append(u)
        self._v.append(v)
        self.count += int(u.shape[0])

    def edges(self):
        if not self._u:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy()
        if len(self._u) > 1:
            self._u = [np.concatenate(self._u)]
            self._v = [np.concatenate(self._v)]
        return self._u[0], self._v[0]


class CountSink(EdgeSink):
    """Counts edges without materialising them."""

    counts_only = True

    def __init__(self):
        self.count = 0

    def put(self, u, v):
        self.count += int(u.shape[0])

    def put_count(self, k):
        self.count += int(k)


def skip_length(p: float, r: float) -> int:
    """Number of destinations skipped before the next candidate."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r!r}")
    if p >= 1.0:
        return 0
    return math.floor(math.log(r) / math.log1p(-p))


@njit(cache=True, nogil=True)
def _source_edges(w, S, u, base, out_u, out_v, pos, store):
    """Run the skip-and-accept loop for one source.

    Returns the new write position, or -1 when the output buffers are full.
    """
    n = w.shape[0]
    j = u + 1
    if j >= n:
        return pos
    cap = out_u.shape[0]
    wu = w[u]
    state = key_from_base(base, u)
    p = min(wu * w[j] / S, 1.0)
    while j < n and p > 0.0:
        if p < 1.0:
            state, r = next_open01(state)
            skip = math.log(r) / math.log1p(-p)
            if skip >= n - j:
                break
            v = j + np.int64(skip)
        else:
            v = j
        q = min(wu * w[v] / S, 1.0)
        state, r = next_open01(state)
        if r < q / p:
            if store:
                if pos >= cap:
                    return -1
                out_u[pos] = u
                out_v[pos] = v
            pos += 1
        p = q
        j = v + 1
    return pos


@njit(cache=True, nogil=True)
def _create_edges_kernel(w, S, nodes, start, seed, out_u, out_v, store):
    """Generate edges for ``nodes[start:]`` until done or out of room.

    Returns ``(count, next_index)``; a ``next_index`` short of
    ``len(nodes)`` means the buffers filled up and that node must be redone.
    """
    base = seed_base(np.uint64(seed))
    pos = 0
    for idx in range(start, nodes.shape[0]):
        new = _source_edges(w, S, nodes[idx], base, out_u, out_v, pos, store)
        if new < 0:
            return pos, idx
        pos = new
    return pos, nodes.shape[0]


def _as_nodes(nodes, n):
    if isinstance(nodes, range):
        arr = np.arange(nodes.start, nodes.stop, nodes.step, dtype=np.int64)
    else:
        arr = np.ascontiguousarray(nodes, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError("node index out of range")
    return arr


def _capacity_hint(ws, S, nodes):
    if S <= 0 or nodes.size == 0:
        return 16
    w = ws.weights
    # expected edges from these sources: w_u * (S - sigma_u - w_u) / S
    suffix = S - np.cumsum(w)
    e = np.clip(w[nodes] * suffix[nodes] / S, 0.0, None).sum()
    return int(e + 6.0 * math.sqrt(e) + 64)


def create_edges(ws: WeightSequence, S: float, nodes, seed: int, sink: EdgeSink,
                 capacity: int | None = None) -> int:
    """Generate all edges whose smaller endpoint is in ``nodes``.

    Edges are pushed to ``sink`` in generation order (by position in
    ``nodes``, then by increasing destination).  Returns the edge count.
    """
    w = ws.weights
    nodes = _as_nodes(nodes, ws.n)
    seed = int(seed) & ((1 << 64) - 1)
    if S <= 0 or nodes.size == 0:
        return 0
    store = not sink.counts_only
    if capacity is None:
        capacity = _capacity_hint(ws, S, nodes) if store else 1
    capacity = max(int(capacity), 1)
    total = 0
    start = 0
    while start < nodes.size:
        out_u = np.empty(capacity, dtype=np.int64)
        out_v = np.empty(capacity, dtype=np.int64)
        count, nxt = _create_edges_kernel(w, float(S), nodes, start, np.uint64(seed), out_u, out_v, store)
        if not store:
            sink.put_count(count)
        elif count:
            sink.put(out_u[:count], out_v[:count])
        total += count
        if nxt == start:
            # one source alone overflows the buffer
            capacity *= 2
        start = nxt
    return total


def serial_cl(ws: WeightSequence, seed: int, sink: EdgeSink) -> int:
    """Sequential generator over all nodes, S summed exactly."""
    S = exactsum.exact_sum(ws.weights)
    return create_edges(ws, S, range(ws.n), seed, sink)


def trace_source(ws: WeightSequence, S: float, u: int, seed: int):
    """Pure-Python transcription of the per-source loop.

    Yields ``(v, q, accepted)`` for every candidate; used to instrument and
    cross-check the compiled kernel.
    """
    w = ws.weights
    n = ws.n
    j = u + 1
    if j >= n:
        return
    rng = RngStream(seed, u)
    p = min(w[u] * w[j] / S, 1.0)
    while j < n and p > 0.0:
        if p < 1.0:
            skip = math.log(rng.random()) / math.log1p(-p)
            if skip >= n - j:
                break
            v = j + int(skip)
        else:
            v = j
        q = min(w[u] * w[v] / S, 1.0)
        accepted = rng.random() < q / p
        yield v, q, accepted
        p = q
        j = v + 1


def pair_probabilities(ws: WeightSequence):
    """Upper-triangle pair list ``(iu, iv, p)`` with p = min(w_u w_v / S, 1)."""
    iu, iv = np.triu_indices(ws.n, k=1)
    S = ws.sum_S
    if S <= 0:
        return iu, iv, np.zeros(iu.shape[0])
    w = ws.weights
    return iu, iv, np.minimum(w[iu] * w[iv] / S, 1.0)


def naive_pair_sampler(ws: WeightSequence, seed: int, sink: EdgeSink, cap: int = ORACLE_CAP) -> int:
    """Flip every pair independently; O(n^2) reference sampler."""
    if ws.n > cap:
        raise ValueError(f"n={ws.n} exceeds the pair-sampler cap of {cap}")
    iu, iv, p = pair_probabilities(ws)
    rng = np.random.default_rng(seed)
    keep = rng.random(p.shape[0]) < p
    u, v = iu[keep].astype(np.int64), iv[keep].astype(np.int64)
    sink.put(u, v)
    return int(u.shape[0])


@njit(cache=True)
def _skip_pair_counts(w, S, seed0, trials, counts, totals):
    n = w.shape[0]
    nodes = np.arange(n)
    cap = n * (n - 1) // 2 + 1
    out_u = np.empty(cap, dtype=np.int64)
    out_v = np.empty(cap, dtype=np.int64)
    for t in range(trials):
        c, _ = _create_edges_kernel(w, S, nodes, 0, np.uint64(seed0 + t), out_u, out_v, True)
        totals[t] = c
        for k in range(c):
            counts[out_u[k], out_v[k]] += 1


def skip_pair_frequencies(ws: WeightSequence, trials: int, seed: int = 0):
    """Empirical per-pair frequencies of the skipping generator.

    Trial t uses global seed ``seed + t``.  Returns ``(freq, edge_counts)``
    where ``freq`` is an n x n upper-triangular matrix.
    """
    if ws.n > ORACLE_CAP:
        raise ValueError("too many nodes for pair frequencies")
    counts = np.zeros((ws.n, ws.n), dtype=np.int64)
    totals = np.zeros(trials, dtype=np.int64)
    _skip_pair_counts(ws.weights, float(ws.sum_S), int(seed), int(trials), counts, totals)
    return counts / trials, totals


def naive_pair_frequencies(ws: WeightSequence, trials: int, seed: int = 0, batch: int = 4096):
    """Per-pair frequencies of the brute-force sampler (numpy PCG64 stream)."""
    iu, iv, p = pair_probabilities(ws)
    rng = np.random.default_rng(seed)
    hits = np.zeros(p.shape[0], dtype=np.int64)
    totals = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        flips = rng.random((b, p.shape[0])) < p
        hits += flips.sum(axis=0)
        totals[done:done + b] = flips.sum(axis=1)
        done += b
    freq = np.zeros((ws.n, ws.n))
    freq[iu, iv] = hits / trials
    return freq, totals
