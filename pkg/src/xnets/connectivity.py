"""Connectivity checks for stacks of bipartite layers.

Covers layered reachability (which outputs can be influenced by which
inputs), the edge-count discrepancy between vertex subsets, and the exact
distribution of a random walk on a single graph.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidSpecError, InvalidSubsetError
from .graphs import BipartiteGraph
from .spectral import spectral_gap


@dataclass(frozen=True)
class LayeredNetworkSpec:
    """Graphs ``G_1 .. G_t`` where layer ``i`` feeds layer ``i + 1``."""

    graphs: tuple

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        if not graphs:
            raise InvalidSpecError("a layered network needs at least one graph")
        for i, (a, b) in enumerate(zip(graphs, graphs[1:])):
            if a.n_out != b.n_in:
                raise InvalidSpecError(
                    f"layer {i} has {a.n_out} outputs but layer {i + 1} expects {b.n_in} inputs"
                )

    @property
    def depth(self) -> int:
        return len(self.graphs)

    @property
    def n_in(self) -> int:
        return self.graphs[0].n_in

    @property
    def n_out(self) -> int:
        return self.graphs[-1].n_out


@dataclass(frozen=True)
class SensitivityMap:
    reachable: np.ndarray  # bool, [n_out_final, n_in_first]

    @property
    def fraction(self) -> float:
        return float(self.reachable.mean())


def _propagate(reach: np.ndarray, g: BipartiteGraph) -> np.ndarray:
    # reach[u, w] -> new[u, v] = any(reach[u, N(v)])
    return reach[:, g.neighbors].any(axis=2)


def sensitivity_map(net: LayeredNetworkSpec | Sequence[BipartiteGraph]) -> SensitivityMap:
    """Which (output, input) pairs are joined by a path taking one edge per layer."""
    if not isinstance(net, LayeredNetworkSpec):
        net = LayeredNetworkSpec(tuple(net))
    reach = np.eye(net.n_in, dtype=bool)
    for g in net.graphs:
        reach = _propagate(reach, g)
    return SensitivityMap(np.ascontiguousarray(reach.T))


def sensitivity_profile(net: LayeredNetworkSpec | Sequence[BipartiteGraph]) -> list[float]:
    """Sensitivity fraction after each prefix ``G_1 .. G_i`` of the stack."""
    if not isinstance(net, LayeredNetworkSpec):
        net = LayeredNetworkSpec(tuple(net))
    reach = np.eye(net.n_in, dtype=bool)
    out = []
    for g in net.graphs:
        reach = _propagate(reach, g)
        out.append(float(reach.mean()))
    return out


def min_sensitive_depth(
    graph_family: Callable[[int], BipartiteGraph] | Iterable[BipartiteGraph],
    n: int,
    max_depth: int,
) -> Optional[int]:
    """Smallest depth at which every output sees every input, or ``None``.

    ``graph_family`` is either a callable ``layer_index -> graph`` or an
    iterable of graphs; each graph must be ``n x n``.
    """
    if callable(graph_family):
        source = (graph_family(i) for i in itertools.count())
    else:
        source = iter(graph_family)
    reach = np.eye(n, dtype=bool)
    for depth in range(1, max_depth + 1):
        try:
            g = next(source)
        except StopIteration:
            break
        if g.n_in != n or g.n_out != n:
            raise InvalidSpecError(f"layer {depth - 1} is {g.n_out}x{g.n_in}, expected {n}x{n}")
        reach = _propagate(reach, g)
        if reach.all():
            return depth
    return None


@dataclass(frozen=True)
class MixingRecord:
    edges: int
    expected: float
    discrepancy: float
    bound: float
    passed: bool
    printed_bound: float
    printed_passed: bool


def _subset(idx, size, what) -> np.ndarray:
    arr = np.unique(np.asarray(list(idx), dtype=np.int64))
    if arr.size == 0:
        raise InvalidSubsetError(f"{what} subset is empty")
    if arr[0] < 0 or arr[-1] >= size:
        raise InvalidSubsetError(f"{what} subset has indices outside [0, {size})")
    return arr


def mixing_discrepancy(
    g: BipartiteGraph,
    S: Iterable[int],
    T: Iterable[int],
    gamma: Optional[float] = None,
) -> MixingRecord:
    """Edge count between output subset ``S`` and input subset ``T`` against its expectation.

    ``bound`` is the standard ``lam * sqrt(|S||T|)`` with ``lam = (1 - gamma) D``.
    ``printed_bound`` drops the factor ``D`` and is reported for comparison only.
    """
    if g.n_in != g.n_out:
        raise InvalidSpecError("mixing discrepancy needs n_in == n_out")
    S = _subset(S, g.n_out, "output")
    T = _subset(T, g.n_in, "input")
    if gamma is None:
        gamma = spectral_gap(g).gap
    in_t = np.zeros(g.n_in, dtype=bool)
    in_t[T] = True
    edges = int(in_t[g.neighbors[S]].sum())
    n, d = g.n_in, g.degree
    expected = d * len(S) * len(T) / n
    disc = abs(edges - expected)
    root = math.sqrt(len(S) * len(T))
    bound = (1.0 - gamma) * d * root
    printed = (1.0 - gamma) * root
    return MixingRecord(edges, expected, disc, bound, disc <= bound, printed, disc <= printed)


def _all_subsets(n: int, max_size: int) -> list[tuple]:
    return [c for k in range(1, max_size + 1) for c in itertools.combinations(range(n), k)]


def exhaustive_mixing_check(
    g: BipartiteGraph,
    max_size: int = 5,
    gamma: Optional[float] = None,
) -> dict:
    """Check every ``S, T`` with ``1 <= |S|, |T| <= max_size`` against the mixing bound.

    Counts come from indicator-matrix products, independently of
    :func:`mixing_discrepancy`.
    """
    if g.n_in != g.n_out:
        raise InvalidSpecError("mixing check needs n_in == n_out")
    if gamma is None:
        gamma = spectral_gap(g).gap
    n, d = g.n_in, g.degree
    subsets = _all_subsets(n, min(max_size, n))
    ind = np.zeros((len(subsets), n))
    for i, s in enumerate(subsets):
        ind[i, list(s)] = 1.0
    sizes = ind.sum(axis=1)
    edges = ind @ g.biadjacency() @ ind.T  # [S-subset, T-subset]
    expected = d * np.outer(sizes, sizes) / n
    disc = np.abs(edges - expected)
    root = np.sqrt(np.outer(sizes, sizes))
    bound = (1.0 - gamma) * d * root
    fail = disc > bound
    printed_fail = disc > (1.0 - gamma) * root
    witnesses = [
        {"S": list(subsets[i]), "T": list(subsets[j]), "edges": int(edges[i, j]),
         "discrepancy": float(disc[i, j]), "bound": float(bound[i, j])}
        for i, j in zip(*np.nonzero(fail))
    ][:20]
    return {
        "pairs": int(fail.size),
        "pass_count": int(fail.size - fail.sum()),
        "printed_bound_pass_count": int(printed_fail.size - printed_fail.sum()),
        "max_ratio": float(np.max(disc / bound)) if np.all(bound > 0) else float("inf"),
        "fail_witnesses": witnesses,
    }


def walk_distribution(g: BipartiteGraph, start_vertex: int, steps: int) -> np.ndarray:
    """Exact distribution of a simple random walk started at output ``start_vertex``.

    Edges are treated as undirected, so the walk alternates sides: after an
    even number of steps it is on the outputs, after an odd number on the
    inputs. Each step moves to a uniformly chosen neighbour.
    """
    if not 0 <= start_vertex < g.n_out:
        raise InvalidSubsetError(f"start vertex {start_vertex} outside [0, {g.n_out})")
    B = g.biadjacency()
    out_deg = B.sum(axis=1)
    in_deg = B.sum(axis=0)
    to_inputs = B / out_deg[:, None]  # row v: P(v -> u)
    with np.errstate(invalid="ignore", divide="ignore"):
        to_outputs = np.where(in_deg[:, None] > 0, B.T / in_deg[:, None], 0.0)
    p = np.zeros(g.n_out)
    p[start_vertex] = 1.0
    on_outputs = True
    for _ in range(steps):
        p = p @ (to_inputs if on_outputs else to_outputs)
        on_outputs = not on_outputs
    return p


def random_walk_mixing(g: BipartiteGraph, start_vertex: int, steps: int) -> float:
    """Total-variation distance between the walk and the uniform law on its current side."""
    p = walk_distribution(g, start_vertex, steps)
    return float(0.5 * np.abs(p - 1.0 / p.size).sum())


@dataclass
class VerificationResult:
    check: str
    params: dict
    seeds: list
    pass_count: int
    fail_witnesses: list = field(default_factory=list)
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.pass_count == len(self.seeds)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "seeds": list(self.seeds),
            "pass_count": self.pass_count,
            "passed": self.passed,
            "fail_witnesses": self.fail_witnesses,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
