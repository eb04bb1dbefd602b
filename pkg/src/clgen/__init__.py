"""Parallel Chung-Lu random graph generation with edge skipping.

The generator assigns source nodes to workers with one of three schemes
(equal node counts, round robin, or uniform expected cost) and produces the
same graph for a given seed whatever the scheme or worker count.
"""

from clgen.degree_model import (
    WeightError,
    WeightSequence,
    expected_total_edges,
    load_weights,
    synth_constant,
    synth_powerlaw,
    validate,
)
from clgen.edge_skip import ArraySink, CountSink, create_edges, naive_pair_sampler, serial_cl
from clgen.partitioner import PartitionPlan, plan_naive, plan_rrp, plan_ucp, plan_ucp_oracle
from clgen.runtime import GenConfig, GenReport, run_generate

__version__ = "0.1.0"

__all__ = [
    "ArraySink",
    "CountSink",
    "GenConfig",
    "GenReport",
    "PartitionPlan",
    "WeightError",
    "WeightSequence",
    "create_edges",
    "expected_total_edges",
    "load_weights",
    "naive_pair_sampler",
    "plan_naive",
    "plan_rrp",
    "plan_ucp",
    "plan_ucp_oracle",
    "run_generate",
    "serial_cl",
    "synth_constant",
    "synth_powerlaw",
    "validate",
]
