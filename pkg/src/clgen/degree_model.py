"""Expected-degree weight sequences: loading, synthesis and validation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from clgen import exactsum

log = logging.getLogger(__name__)


class WeightError(ValueError):
    """Invalid weight input or synthesizer parameters."""


@dataclass(frozen=True)
class WeightSequence:
    """Weights sorted non-increasing, their sum and the sort permutation.

    ``orig_labels[k]`` is the input label of the node at sorted position k.
    """

    weights: np.ndarray
    sum_S: float
    orig_labels: np.ndarray
    _partials: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def from_sorted(cls, weights, orig_labels=None):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        w.setflags(write=False)
        if orig_labels is None:
            orig_labels = np.arange(w.shape[0], dtype=np.int64)
        labels = np.ascontiguousarray(orig_labels, dtype=np.int64)
        labels.setflags(write=False)
        parts = exactsum.partials_of(w)
        return cls(w, exactsum.value(parts), labels, parts)

    @classmethod
    def from_values(cls, values):
        """Sort arbitrary non-negative values descending (stable) and wrap them."""
        w = np.asarray(values, dtype=np.float64)
        _check_values(w)
        order = np.argsort(-w, kind="stable")
        return cls.from_sorted(w[order], order)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def partials(self) -> tuple:
        """Exact expansion of S (see :mod:`clgen.exactsum`)."""
        return self._partials

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ValidationReport:
    is_sorted: bool
    admissible: bool
    n: int
    sum_S: float
    max_weight: float
    zero_weight_count: int


def _check_values(w):
    if w.ndim != 1:
        raise WeightError("weights must be one-dimensional")
    if w.size == 0:
        raise WeightError("empty weight sequence")
    if not np.all(np.isfinite(w)):
        raise WeightError("weights must be finite")
    if np.any(w < 0):
        raise WeightError(f"negative weight at position {int(np.argmax(w < 0))}")


def load_weights(path, sort_policy: str = "sort-desc") -> WeightSequence:
    """Read one non-negative weight per line.

    Blank lines and lines starting with ``#`` are ignored.  With
    ``sort_policy="require-sorted"`` an increase between consecutive weights
    is an error naming the offending line; ``"sort-desc"`` sorts stably and
    records the permutation in ``orig_labels``.
    """
    if sort_policy not in ("require-sorted", "sort-desc"):
        raise WeightError(f"unknown sort policy {sort_policy!r}")
    values = []
    prev = math.inf
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                x = float(line)
            except ValueError:
                raise WeightError(f"cannot parse weight at line {lineno}: {line!r}") from None
            if not math.isfinite(x):
                raise WeightError(f"non-finite weight at line {lineno}")
            if x < 0:
                raise WeightError(f"negative weight at line {lineno}")
            if sort_policy == "require-sorted" and x > prev:
                raise WeightError(f"unsorted at line {lineno}")
            prev = x
            values.append(x)
    if not values:
        raise WeightError(f"empty weight file: {path}")
    if sort_policy == "require-sorted":
        return WeightSequence.from_sorted(values)
    return WeightSequence.from_values(values)


def save_weights(ws: WeightSequence, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(f"# n={ws.n} S={ws.sum_S!r}\n")
        for x in ws.weights:
            fh.write(f"{float(x)!r}\n")


def powerlaw_inverse_cdf(u, gamma, w_min, w_max):
    """Map uniforms in [0, 1) to a power law with density ~ x^-gamma on [w_min, w_max]."""
    u = np.asarray(u, dtype=np.float64)
    if w_min == w_max:
        return np.full(u.shape, float(w_min))
    if gamma == 1.0:
        return w_min * np.exp(u * math.log(w_max / w_min))
    a = 1.0 - gamma
    lo, hi = w_min**a, w_max**a
    return (lo + u * (hi - lo)) ** (1.0 / a)


def powerlaw_mean(gamma: float, w_min: float, w_max: float) -> float:
    """Mean of the truncated power law on [w_min, w_max] (closed form)."""
    a, b = float(w_min), float(w_max)
    if a == b:
        return a
    if gamma == 1.0:
        return (b - a) / math.log(b / a)
    if gamma == 2.0:
        return math.log(b / a) / (1.0 / a - 1.0 / b)
    g1, g2 = 1.0 - gamma, 2.0 - gamma
    return (g1 / g2) * (b**g2 - a**g2) / (b**g1 - a**g1)


def synth_powerlaw(n: int, gamma: float, w_min: float, w_max: float, seed: int) -> WeightSequence:
    """Draw ``n`` i.i.d. truncated power-law weights and sort them descending."""
    if n < 1:
        raise WeightError("n must be >= 1")
    if not gamma > 1:
        raise WeightError("gamma must be > 1")
    if not (w_min > 0 and w_max >= w_min and math.isfinite(w_max)):
        raise WeightError("need 0 < w_min <= w_max < inf")
    rng = np.random.default_rng(seed)
    w = powerlaw_inverse_cdf(rng.random(n), gamma, w_min, w_max)
    np.clip(w, w_min, w_max, out=w)
    w = -np.sort(-w)
    return WeightSequence.from_sorted(w)


def synth_constant(n: int, d: float) -> WeightSequence:
    if n < 1:
        raise WeightError("n must be >= 1")
    if not (d >= 0 and math.isfinite(d)):
        raise WeightError("d must be a finite non-negative number")
    # max w^2 < S  <=>  d^2 < n d  <=>  d < n
    if d > 0 and not d < n:
        raise WeightError(f"inadmissible constant sequence: d={d} >= n={n}")
    return WeightSequence.from_sorted(np.full(n, float(d)))


def validate(ws: WeightSequence) -> ValidationReport:
    w = ws.weights
    max_w = float(w.max()) if w.size else 0.0
    is_sorted = bool(np.all(w[:-1] >= w[1:])) if w.size > 1 else True
    S = exactsum.exact_sum(w)
    return ValidationReport(
        is_sorted=is_sorted,
        admissible=bool(S > 0 and max_w * max_w < S),
        n=int(w.size),
        sum_S=S,
        max_weight=max_w,
        zero_weight_count=int(np.count_nonzero(w == 0)),
    )


def warn_if_inadmissible(ws: WeightSequence) -> ValidationReport:
    rep = validate(ws)
    if not rep.admissible:
        log.warning(
            "weight sequence is inadmissible (max w^2=%g >= S=%g); edge probabilities will be clamped to 1",
            rep.max_weight**2,
            rep.sum_S,
        )
    return rep


def expected_total_edges(ws: WeightSequence) -> float:
    """(S^2 - sum w^2) / (2S); zero when S == 0."""
    S = ws.sum_S
    if S == 0:
        return 0.0
    sq = exactsum.exact_sum(ws.weights * ws.weights)
    return (S * S - sq) / (2.0 * S)


def expected_degrees(ws: WeightSequence) -> np.ndarray:
    """w_i - w_i^2 / S for every node (no self loops)."""
    S = ws.sum_S
    if S == 0:
        return np.zeros(ws.n)
    return ws.weights - ws.weights**2 / S
