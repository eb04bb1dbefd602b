"""SPMD orchestration of parallel generation.

Each rank holds the full weight array.  The ranks compute S collectively,
agree on a partition plan, generate the edges of their own sources and
report back to rank 0.  Edge files are written after the timed section.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from clgen import exactsum
from clgen.comm import Communicator, run_on_backend
from clgen.cost_model import all_block_bounds, sequential_profile
from clgen.degree_model import WeightSequence, expected_total_edges, warn_if_inadmissible
from clgen.edge_skip import ArraySink, CountSink, create_edges
from clgen.edgeio import FORMATS, relabel, suffix, write_edges
from clgen.partitioner import SCHEMES, PartitionPlan, make_plan, partition_costs
from clgen.rng import node_rng_key, node_rng_keys  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


@dataclass
class GenConfig:
    """What to generate and where to put it."""

    weights: WeightSequence
    scheme: str = "ucp"
    procs: int = 1
    seed: int = 0
    out_dir: Path | None = None
    fmt: str = "text"
    merge: bool = False
    relabel: bool = False
    plan: PartitionPlan | None = None
    keep_edges: bool = True
    store_edges: bool = True
    backend: str = "inproc"

    def __post_init__(self):
        if self.procs < 1:
            raise ValueError("procs must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.fmt not in FORMATS:
            raise ValueError(f"unknown format {self.fmt!r}")
        if self.plan is not None:
            if self.plan.P != self.procs:
                raise ValueError(f"plan is for P={self.plan.P}, not {self.procs}")
            if self.plan.n != self.weights.n:
                raise ValueError(f"plan is for n={self.plan.n}, weights have n={self.weights.n}")
            self.scheme = self.plan.scheme
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
        if (self.merge or self.out_dir is not None) and not self.store_edges:
            raise ValueError("writing edges requires store_edges")


@dataclass
class RankStats:
    rank: int
    nodes: int
    edges: int
    wall_time: float
    cpu_time: float
    expected_cost: float = float("nan")
    expected_edges: float = float("nan")


@dataclass
class GenReport:
    scheme: str
    P: int
    n: int
    seed: int
    S: float
    expected_edges: float
    plan: PartitionPlan
    ranks: list[RankStats]
    edges: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    files: list[Path] = field(default_factory=list)

    @property
    def total_edges(self) -> int:
        return sum(r.edges for r in self.ranks)

    @property
    def gen_time(self) -> float:
        """Wall time of the generation phase (slowest rank)."""
        return max(r.wall_time for r in self.ranks)

    def key_values(self) -> list[tuple[str, object]]:
        kv: list[tuple[str, object]] = [
            ("scheme", self.scheme),
            ("procs", self.P),
            ("n", self.n),
            ("seed", self.seed),
            ("S", repr(self.S)),
            ("expected_edges", f"{self.expected_edges:.6f}"),
            ("total_edges", self.total_edges),
            ("gen_time", f"{self.gen_time:.6f}"),
        ]
        for r in self.ranks:
            kv += [
                (f"rank{r.rank}.nodes", r.nodes),
                (f"rank{r.rank}.expected_cost", f"{r.expected_cost:.6f}"),
                (f"rank{r.rank}.expected_edges", f"{r.expected_edges:.6f}"),
                (f"rank{r.rank}.edges", r.edges),
                (f"rank{r.rank}.wall_time", f"{r.wall_time:.6f}"),
                (f"rank{r.rank}.cpu_time", f"{r.cpu_time:.6f}"),
            ]
        return kv

    def machine_lines(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.key_values())

    def table(self) -> str:
        head = f"{'rank':>5} {'nodes':>10} {'exp_cost':>14} {'exp_edges':>14} {'edges':>12} {'wall_s':>9} {'cpu_s':>9}"
        rows = [head, "-" * len(head)]
        for r in self.ranks:
            rows.append(
                f"{r.rank:>5} {r.nodes:>10} {r.expected_cost:>14.1f} {r.expected_edges:>14.1f} "
                f"{r.edges:>12} {r.wall_time:>9.4f} {r.cpu_time:>9.4f}"
            )
        rows.append(
            f"{'all':>5} {self.n:>10} {self.n + self.expected_edges:>14.1f} {self.expected_edges:>14.1f} "
            f"{self.total_edges:>12} {self.gen_time:>9.4f}"
        )
        return "\n".join(rows) + "\n"


def parallel_weight_sum(comm: Communicator, ws: WeightSequence) -> float:
    """S from per-block exact partial sums combined by an all-reduce."""
    b = all_block_bounds(ws.n, comm.size)
    parts = exactsum.partials_of(ws.weights[b[comm.rank]:b[comm.rank + 1]])
    return exactsum.value(comm.all_reduce(parts, exactsum.merge))


def _rank_file(out_dir: Path, rank: int, fmt: str) -> Path:
    return out_dir / f"edges_{rank}{suffix(fmt)}"


def merge_edges(plan: PartitionPlan, parts) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate per-rank edges in rank order.

    Consecutive schemes are then already ordered by source; round-robin
    output is stably re-sorted by source so every scheme yields the same
    sequence.
    """
    if not parts:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()
    u = np.concatenate([p[0] for p in parts])
    v = np.concatenate([p[1] for p in parts])
    if plan.scheme == "rrp" and plan.P > 1:
        order = np.argsort(u, kind="stable")
        u, v = u[order], v[order]
    return u, v


def generate(config: GenConfig, comm: Communicator):
    """Rank body of parallel generation; returns a :class:`GenReport` on rank 0."""
    ws = config.weights
    P, rank = comm.size, comm.rank
    if P != config.procs:
        raise ValueError(f"communicator has {P} ranks, config asks for {config.procs}")
    S = parallel_weight_sum(comm, ws)
    plan = config.plan if config.plan is not None else make_plan(ws, config.scheme, P, comm)
    mine = plan.nodes(rank)
    sink = ArraySink() if config.store_edges else CountSink()

    comm.barrier()
    t0, c0 = time.perf_counter(), time.thread_time()
    count = create_edges(ws, S, mine, config.seed, sink)
    wall, cpu = time.perf_counter() - t0, time.thread_time() - c0

    edges = sink.edges() if config.store_edges else None
    files = []
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        path = _rank_file(config.out_dir, rank, config.fmt)
        eu, ev = relabel(*edges, ws.orig_labels) if config.relabel else edges
        write_edges(eu, ev, config.fmt, path)
        files.append(path)

    stats = RankStats(rank, int(mine.shape[0]), count, wall, cpu)
    want_edges = config.keep_edges or config.merge
    gathered = comm.gather((stats, edges if want_edges else None, files), root=0)
    if rank != 0:
        return None

    costs = sequential_profile(ws).costs
    per = partition_costs(plan, costs)
    ranks = []
    for i, (st, _, _) in enumerate(gathered):
        st.expected_cost = float(per[i])
        st.expected_edges = float(per[i] - st.nodes)
        ranks.append(st)
    all_files = [f for _, _, fs in gathered for f in fs]
    merged = None
    if want_edges:
        merged = merge_edges(plan, [g[1] for g in gathered])
        if config.merge and config.out_dir is not None:
            path = config.out_dir / f"edges{suffix(config.fmt)}"
            mu, mv = relabel(*merged, ws.orig_labels) if config.relabel else merged
            write_edges(mu, mv, config.fmt, path)
            all_files.append(path)
    plan = PartitionPlan(plan.scheme, plan.P, plan.n, plan.boundaries, per, plan.boundaries_per_rank)
    return GenReport(
        scheme=plan.scheme,
        P=P,
        n=ws.n,
        seed=config.seed,
        S=S,
        expected_edges=expected_total_edges(ws),
        plan=plan,
        ranks=ranks,
        edges=merged if config.keep_edges else None,
        files=all_files,
    )


def _rank_main(comm, config):
    return generate(config, comm)


def run_generate(config: GenConfig) -> GenReport | None:
    """Run :func:`generate` on ``config.procs`` ranks of the configured backend."""
    warn_if_inadmissible(config.weights)
    results = run_on_backend(config.backend, config.procs, _rank_main, config)
    return None if results is None else results[0]
