"""SPMD communicators.

:class:`InProcComm` runs P logical ranks as threads of one process.  Every
collective gathers the contributions of all ranks at a rendezvous and
combines them in ascending rank order, so results are bit-identical to a
sequential left-to-right computation regardless of thread scheduling.
Collectives carry an operation tag; ranks that call different collectives
at the same step raise :class:`CollectiveMismatch` instead of mixing data.

:class:`MPIComm` adapts an ``mpi4py`` communicator to the same interface.
"""

from __future__ import annotations

import os
import queue
import threading
from typing import Any, Callable, Sequence

DEFAULT_TIMEOUT = float(os.environ.get("CLGEN_COMM_TIMEOUT", "120"))
BACKENDS = ("inproc", "mpi")


class CommError(RuntimeError):
    """A collective or message could not complete."""


class CommTimeout(CommError):
    pass


class CollectiveMismatch(CommError):
    pass


class Communicator:
    """Interface shared by all backends."""

    rank: int
    size: int

    def allgather(self, value: Any) -> list:
        raise NotImplementedError

    def send(self, dest: int, payload: Any) -> None:
        raise NotImplementedError

    def recv(self) -> Any:
        raise NotImplementedError

    def barrier(self) -> None:
        self.allgather(None)

    def gather(self, value, root: int = 0):
        vals = self.allgather(value)
        return vals if self.rank == root else None

    def bcast(self, value, root: int = 0):
        return self.allgather(value if self.rank == root else None)[root]

    def all_reduce(self, value, op: Callable[[Any, Any], Any]):
        vals = self.allgather(value)
        acc = vals[0]
        for v in vals[1:]:
            acc = op(acc, v)
        return acc

    def exclusive_scan(self, value, op: Callable[[Any, Any], Any], identity):
        vals = self.allgather(value)
        acc = identity
        for v in vals[: self.rank]:
            acc = op(acc, v)
        return acc

    def all_reduce_sum(self, x: float) -> float:
        return self.all_reduce(float(x), lambda a, b: a + b)

    def exclusive_scan_sum(self, x: float) -> float:
        return self.exclusive_scan(float(x), lambda a, b: a + b, 0.0)

    def send_boundary(self, k: int, n_k: int, to_rank: int) -> None:
        if not 0 <= to_rank < self.size:
            raise CommError(f"invalid destination rank {to_rank}")
        self.send(to_rank, ("boundary", int(k), int(n_k)))

    def recv_boundaries(self, expected: int) -> list[tuple[int, int]]:
        """Block until ``expected`` boundary messages arrived; return ``(k, n_k)`` pairs."""
        out = []
        for _ in range(expected):
            msg = self.recv()
            if not (isinstance(msg, tuple) and msg and msg[0] == "boundary"):
                raise CommError(f"rank {self.rank}: unexpected message {msg!r}")
            out.append((msg[1], msg[2]))
        return sorted(out)


class _Aborted:
    pass


class InProcWorld:
    """Shared state of an in-process group of ``size`` ranks."""

    def __init__(self, size: int, timeout: float = DEFAULT_TIMEOUT):
        if size < 1:
            raise ValueError("size must be >= 1")
        self.size = size
        self.timeout = timeout
        self._barrier = threading.Barrier(size)
        self._slots: list = [None] * size
        self._queues = [queue.Queue() for _ in range(size)]
        self.messages_sent = 0
        self._lock = threading.Lock()

    def comms(self) -> list["InProcComm"]:
        return [InProcComm(self, r) for r in range(self.size)]

    def abort(self):
        self._barrier.abort()
        for q in self._queues:
            q.put(_Aborted)


class InProcComm(Communicator):
    def __init__(self, world: InProcWorld, rank: int):
        self.world = world
        self.rank = rank
        self.size = world.size
        self._step = 0

    def _wait(self):
        try:
            self.world._barrier.wait(self.world.timeout)
        except threading.BrokenBarrierError:
            raise CommTimeout(f"rank {self.rank}: collective aborted or timed out") from None

    def _exchange(self, tag: str, value):
        w = self.world
        self._step += 1
        w._slots[self.rank] = (self._step, tag, value)
        self._wait()
        entries = list(w._slots)
        self._wait()
        if {(s, t) for s, t, _ in entries} != {(self._step, tag)}:
            raise CollectiveMismatch(
                f"rank {self.rank}: step {self._step} {tag!r} does not match "
                + ", ".join(f"{t}@{s}" for s, t, _ in entries)
            )
        return [v for _, _, v in entries]

    def allgather(self, value):
        return self._exchange("allgather", value)

    def all_reduce(self, value, op):
        vals = self._exchange("all_reduce", value)
        acc = vals[0]
        for v in vals[1:]:
            acc = op(acc, v)
        return acc

    def exclusive_scan(self, value, op, identity):
        vals = self._exchange("exclusive_scan", value)
        acc = identity
        for v in vals[: self.rank]:
            acc = op(acc, v)
        return acc

    def barrier(self):
        self._exchange("barrier", None)

    def send(self, dest, payload):
        if not 0 <= dest < self.size:
            raise CommError(f"invalid destination rank {dest}")
        with self.world._lock:
            self.world.messages_sent += 1
        self.world._queues[dest].put(payload)

    def recv(self):
        try:
            msg = self.world._queues[self.rank].get(timeout=self.world.timeout)
        except queue.Empty:
            raise CommTimeout(f"rank {self.rank}: receive timed out") from None
        if msg is _Aborted:
            raise CommError(f"rank {self.rank}: group aborted")
        return msg


class SpmdError(CommError):
    def __init__(self, rank: int, exc: BaseException):
        super().__init__(f"rank {rank} failed: {exc!r}")
        self.rank = rank
        self.original = exc


def run_spmd(size: int, fn: Callable[..., Any], *args, timeout: float = DEFAULT_TIMEOUT, **kwargs) -> list:
    """Run ``fn(comm, *args, **kwargs)`` on ``size`` in-process ranks.

    Returns the per-rank results in rank order.  The first failing rank
    aborts the group and its exception is re-raised wrapped in
    :class:`SpmdError`.
    """
    world = InProcWorld(size, timeout=timeout)
    if size == 1:
        return [fn(world.comms()[0], *args, **kwargs)]
    results: list = [None] * size
    errors: list = []

    def target(comm):
        try:
            results[comm.rank] = fn(comm, *args, **kwargs)
        except BaseException as exc:  # noqa: BLE001 - propagated to caller
            errors.append((comm.rank, exc))
            world.abort()

    threads = [threading.Thread(target=target, args=(c,), name=f"rank-{c.rank}") for c in world.comms()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        # the root cause is the first non-abort failure
        primary = next(((r, e) for r, e in errors if not isinstance(e, CommError)), errors[0])
        raise SpmdError(*primary) from primary[1]
    return results


class MPIComm(Communicator):
    """Adapter for an ``mpi4py`` communicator (``mpirun -n P clgen ...``)."""

    def __init__(self, mpi_comm=None):
        if mpi_comm is None:
            from mpi4py import MPI

            mpi_comm = MPI.COMM_WORLD
        self._comm = mpi_comm
        self.rank = mpi_comm.Get_rank()
        self.size = mpi_comm.Get_size()

    def allgather(self, value):
        return self._comm.allgather(value)

    def send(self, dest, payload):
        self._comm.send(payload, dest=dest, tag=7)

    def recv(self):
        return self._comm.recv(tag=7)

    def barrier(self):
        self._comm.Barrier()


def resolve_backend(name: str | None) -> str:
    name = name or os.environ.get("CLGEN_BACKEND") or "inproc"
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {', '.join(BACKENDS)}")
    return name


def run_on_backend(backend: str, size: int, fn, *args, **kwargs) -> list | None:
    """Run an SPMD function on the selected backend.

    For ``mpi`` the world size comes from the launcher and must equal
    ``size``; the result list is only returned on rank 0.
    """
    backend = resolve_backend(backend)
    if backend == "inproc":
        return run_spmd(size, fn, *args, **kwargs)
    comm = MPIComm()
    if comm.size != size:
        raise CommError(f"--procs {size} does not match MPI world size {comm.size}")
    res = fn(comm, *args, **kwargs)
    gathered = comm.gather(res, root=0)
    return gathered


def sequential_sum(values: Sequence[float]) -> float:
    """Left-to-right float sum; the reference order of :meth:`all_reduce_sum`."""
    acc = values[0]
    for v in values[1:]:
        acc = acc + v
    return acc
