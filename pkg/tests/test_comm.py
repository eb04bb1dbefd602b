import threading

import numpy as np
import pytest

from clgen.comm import (
    CollectiveMismatch,
    CommError,
    InProcWorld,
    SpmdError,
    resolve_backend,
    run_spmd,
    sequential_sum,
)
from clgen.degree_model import synth_powerlaw
from clgen.partitioner import _ucp_rank, plan_ucp_oracle

from oracles import exclusive_prefix, left_to_right


def _run_world(world, fn):
    results = [None] * world.size
    errors = []

    def body(c):
        try:
            results[c.rank] = fn(c)
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)
            world.abort()

    ts = [threading.Thread(target=body, args=(c,)) for c in world.comms()]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    return results, errors


def test_reduce_and_scan_examples():
    vals = [3.0, 1.0, 4.0]
    out = run_spmd(3, lambda c: (c.all_reduce_sum(vals[c.rank]), c.exclusive_scan_sum(vals[c.rank])))
    assert [o[0] for o in out] == [8.0] * 3
    assert [o[1] for o in out] == [0.0, 3.0, 4.0]


def test_single_rank_identity():
    assert run_spmd(1, lambda c: (c.all_reduce_sum(2.5), c.exclusive_scan_sum(2.5))) == [(2.5, 0.0)]


@pytest.mark.parametrize("P", [2, 5, 16])
def test_collectives_bit_exact(rng, P):
    for _ in range(100 // P + 1):
        vals = (rng.standard_normal(P) * 10.0 ** rng.integers(-8, 8, P)).tolist()
        out = run_spmd(P, lambda c: (c.all_reduce_sum(vals[c.rank]), c.exclusive_scan_sum(vals[c.rank])))
        assert all(o[0] == left_to_right(vals) == sequential_sum(vals) for o in out)
        assert [o[1] for o in out] == exclusive_prefix(vals)


def test_mismatched_collectives_detected():
    world = InProcWorld(2, timeout=5)

    def fn(c):
        return c.all_reduce_sum(1.0) if c.rank == 0 else c.exclusive_scan_sum(1.0)

    _, errors = _run_world(world, fn)
    assert errors and all(isinstance(e, CommError) for e in errors)
    assert any(isinstance(e, CollectiveMismatch) for e in errors)


def test_missing_rank_times_out():
    world = InProcWorld(2, timeout=0.3)
    _, errors = _run_world(world, lambda c: c.barrier() if c.rank == 0 else None)
    assert len(errors) == 1 and isinstance(errors[0], CommError)


def test_recv_times_out():
    world = InProcWorld(1, timeout=0.2)
    with pytest.raises(CommError):
        world.comms()[0].recv_boundaries(1)


def test_spmd_propagates_failure():
    def fn(c):
        if c.rank == 1:
            raise KeyError("boom")
        c.barrier()

    with pytest.raises(SpmdError) as info:
        run_spmd(3, fn, timeout=5)
    assert info.value.rank == 1 and isinstance(info.value.original, KeyError)


def test_boundary_messages_two_ranks():
    def fn(c):
        if c.rank == 0:
            c.send_boundary(1, 7, 0)
            c.send_boundary(1, 7, 1)
        return c.recv_boundaries(1)

    assert run_spmd(2, fn) == [[(1, 7)], [(1, 7)]]
    with pytest.raises(SpmdError):
        run_spmd(2, lambda c: c.send_boundary(1, 1, 5))


@pytest.mark.parametrize("P", [1, 2, 3, 8, 33, 64])
def test_boundary_message_count(P):
    ws = synth_powerlaw(3000, 2.2, 1.0, 40.0, seed=P)
    world = InProcWorld(P, timeout=30)
    results, errors = _run_world(world, lambda c: _ucp_rank(c, ws)[0])
    assert not errors
    assert world.messages_sent == 2 * (P - 1)
    ref = plan_ucp_oracle(ws, P)
    assert all(np.array_equal(r.boundaries, ref.boundaries) for r in results)


def test_results_independent_of_scheduling():
    vals = [0.1 * k for k in range(8)]

    def fn(c):
        if c.rank % 2:
            threading.Event().wait(0.01 * c.rank)
        return c.all_reduce_sum(vals[c.rank])

    assert len(set(run_spmd(8, fn))) == 1


def test_backend_resolution(monkeypatch):
    monkeypatch.delenv("CLGEN_BACKEND", raising=False)
    assert resolve_backend(None) == "inproc"
    monkeypatch.setenv("CLGEN_BACKEND", "mpi")
    assert resolve_backend(None) == "mpi"
    assert resolve_backend("inproc") == "inproc"
    with pytest.raises(ValueError):
        resolve_backend("tcp")
