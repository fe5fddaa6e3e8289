"""Bipartite connectivity graphs for sparse layers.

A graph connects ``n_in`` input vertices (channels or neurons) to ``n_out``
output vertices. Every output vertex has exactly ``degree`` distinct input
neighbours, so the graph has ``degree * n_out`` edges. The adjacency is kept
as one sorted neighbour tuple per output vertex.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    GraphError,
    InvalidDegreeError,
    InvalidGeneratorError,
    InvalidGroupingError,
    InvalidSizeError,
)

KINDS = ("random", "cayley", "grouped", "dense", "identity")

_MAX_REPAIR_TRIES = 1_000_000
_MAX_RESTARTS = 20


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Seeded PCG64 generator; the stream does not depend on the platform."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    n_in: int
    n_out: int
    degree: int
    adjacency: tuple
    kind: str = "random"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def num_edges(self) -> int:
        return sum(len(row) for row in self.adjacency)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``(n_out, degree)`` integer array; only defined for valid graphs."""
        if len(self.adjacency) != self.n_out or any(len(r) != self.degree for r in self.adjacency):
            raise GraphError("adjacency is ragged; run validate() for details")
        arr = np.asarray(self.adjacency, dtype=np.int64).reshape(self.n_out, self.degree)
        if arr.shape != (self.n_out, self.degree):
            raise GraphError("adjacency is ragged; run validate() for details")
        arr.setflags(write=False)
        return arr

    def biadjacency(self, dtype=np.float64) -> np.ndarray:
        """The ``n_out x n_in`` 0/1 matrix of the graph."""
        mat = np.zeros((self.n_out, self.n_in), dtype=dtype)
        rows = np.repeat(np.arange(self.n_out), self.degree)
        mat[rows, self.neighbors.ravel()] = 1
        return mat

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.neighbors.ravel(), minlength=self.n_in)

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            (self.n_in, self.n_out, self.degree, self.kind, self.seed)
            == (other.n_in, other.n_out, other.degree, other.kind, other.seed)
            and self.adjacency == other.adjacency
        )

    def __hash__(self):
        return hash((self.n_in, self.n_out, self.degree, self.adjacency))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "degree": self.degree,
            "seed": self.seed,
            "adjacency": [sorted(int(i) for i in row) for row in self.adjacency],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BipartiteGraph":
        try:
            adjacency = tuple(tuple(int(i) for i in row) for row in data["adjacency"])
            return cls(
                n_in=int(data["n_in"]),
                n_out=int(data["n_out"]),
                degree=int(data["degree"]),
                adjacency=adjacency,
                kind=str(data.get("kind", "random")),
                seed=data.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph record: {exc}") from exc


def _check_sizes(n_in: int, n_out: int) -> None:
    if n_in < 1 or n_out < 1:
        raise InvalidSizeError(f"vertex counts must be >= 1 (got n_in={n_in}, n_out={n_out})")


def _from_rows(rows, n_in, n_out, degree, kind, seed=None, **meta) -> BipartiteGraph:
    adjacency = tuple(tuple(sorted(int(i) for i in row)) for row in rows)
    return BipartiteGraph(n_in, n_out, degree, adjacency, kind=kind, seed=seed, meta=meta)


def _balanced_in_degrees(n_in, n_out, degree, rng) -> np.ndarray:
    total = degree * n_out
    base, extra = divmod(total, n_in)
    deg = np.full(n_in, base, dtype=np.int64)
    if extra:
        deg[rng.choice(n_in, size=extra, replace=False)] += 1
    return deg


def _sample_biregular(n_in, n_out, degree, in_deg, rng) -> np.ndarray:
    """Configuration model with switch repair for repeated neighbours.

    Stubs are shuffled and dealt ``degree`` at a time to the outputs. A row
    holding a repeated input swaps one copy with a random stub of another row
    whenever the swap leaves neither row with a new repeat.
    """
    for _ in range(_MAX_RESTARTS):
        stubs = np.repeat(np.arange(n_in), in_deg)
        rng.shuffle(stubs)
        rows = stubs.reshape(n_out, degree)
        counts = [Counter(row.tolist()) for row in rows]
        bad = {r for r in range(n_out) if len(counts[r]) < degree}
        tries = 0
        while bad and tries < _MAX_REPAIR_TRIES:
            tries += 1
            r = min(bad)
            j = next(j for j in range(degree) if counts[r][int(rows[r, j])] > 1)
            u = int(rows[r, j])
            r2 = int(rng.integers(n_out))
            j2 = int(rng.integers(degree))
            w = int(rows[r2, j2])
            if r2 == r or counts[r][w] or counts[r2][u]:
                continue
            rows[r, j], rows[r2, j2] = w, u
            counts[r][u] -= 1
            counts[r][w] += 1
            counts[r2][w] -= 1
            if not counts[r2][w]:
                del counts[r2][w]
            counts[r2][u] += 1
            for q in (r, r2):
                if sum(1 for c in counts[q].values() if c > 0) == degree:
                    bad.discard(q)
        if not bad:
            return rows
    raise GraphError("could not repair repeated neighbours; try another seed")


def random_expander(
    n_in: int,
    n_out: int,
    degree: int,
    seed: int = 0,
    balanced: bool = True,
) -> BipartiteGraph:
    """Random bipartite expander with ``degree`` distinct neighbours per output.

    With ``balanced=True`` (the default) input degrees differ by at most one,
    so a square graph is ``degree``-regular on both sides and its top singular
    value is exactly ``degree``. With ``balanced=False`` every output draws its
    neighbour set independently and uniformly without replacement.
    """
    _check_sizes(n_in, n_out)
    if degree < 1 or degree > n_in:
        raise InvalidDegreeError(f"degree must lie in [1, n_in={n_in}] (got {degree})")
    rng = make_rng(seed)

    if degree == n_in:
        rows = np.tile(np.arange(n_in), (n_out, 1))
    elif not balanced:
        rows = np.stack([rng.choice(n_in, size=degree, replace=False) for _ in range(n_out)])
    else:
        in_deg = _balanced_in_degrees(n_in, n_out, degree, rng)
        if 2 * degree > n_in:
            # sample the sparser complement, then invert each row
            comp = _sample_biregular(n_in, n_out, n_in - degree, n_out - in_deg, rng)
            mask = np.ones((n_out, n_in), dtype=bool)
            mask[np.arange(n_out)[:, None], comp] = False
            rows = np.nonzero(mask)[1].reshape(n_out, degree)
        else:
            rows = _sample_biregular(n_in, n_out, degree, in_deg, rng)
    return _from_rows(rows, n_in, n_out, degree, "random", seed=seed, balanced=balanced)


@dataclass(frozen=True)
class CayleyParams:
    """Generators ``H`` of a Cayley graph on ``{0,1}^n_bits`` under XOR."""

    n_bits: int
    generators: tuple

    def __post_init__(self):
        gens = tuple(int(h) for h in self.generators)
        object.__setattr__(self, "generators", gens)
        if self.n_bits < 1:
            raise InvalidGeneratorError("n_bits must be >= 1")
        if not gens:
            raise InvalidGeneratorError("at least one generator is required")
        if any(h == 0 for h in gens):
            raise InvalidGeneratorError("generators must be nonzero")
        if any(h < 0 or h >= 1 << self.n_bits for h in gens):
            raise InvalidGeneratorError(f"generators must fit in {self.n_bits} bits")
        if len(set(gens)) != len(gens):
            raise InvalidGeneratorError("generators must be distinct")

    @classmethod
    def from_strings(cls, generators: Sequence[str]) -> "CayleyParams":
        """Build from bit strings such as ``["01", "10", "11"]``."""
        if not generators:
            raise InvalidGeneratorError("at least one generator is required")
        widths = {len(s) for s in generators}
        if len(widths) != 1:
            raise InvalidGeneratorError("generator strings must share one width")
        return cls(widths.pop(), tuple(int(s, 2) for s in generators))


def cayley_expander(params: CayleyParams) -> BipartiteGraph:
    """Double cover of the XOR Cayley graph: output ``x`` sees inputs ``x ^ h``."""
    n = 1 << params.n_bits
    gens = np.asarray(params.generators, dtype=np.int64)
    rows = np.arange(n)[:, None] ^ gens[None, :]
    return _from_rows(
        rows, n, n, len(gens), "cayley",
        n_bits=params.n_bits, generators=list(params.generators),
    )


def sample_cayley_generators(n_bits: int, size: int, seed: int = 0) -> CayleyParams:
    """Draw ``size`` distinct nonzero ``n_bits``-bit generators uniformly."""
    if size < 1 or size > (1 << n_bits) - 1:
        raise InvalidGeneratorError(f"need 1 <= size <= {(1 << n_bits) - 1}")
    rng = make_rng(seed)
    gens = rng.choice((1 << n_bits) - 1, size=size, replace=False) + 1
    return CayleyParams(n_bits, tuple(int(h) for h in gens))


def grouped_graph(n_in: int, n_out: int, groups: int) -> BipartiteGraph:
    """Block-diagonal graph of a grouped convolution."""
    _check_sizes(n_in, n_out)
    if groups < 1 or n_in % groups or n_out % groups:
        raise InvalidGroupingError(
            f"groups={groups} must divide n_in={n_in} and n_out={n_out}"
        )
    gin, gout = n_in // groups, n_out // groups
    rows = [range((v // gout) * gin, (v // gout + 1) * gin) for v in range(n_out)]
    return _from_rows(rows, n_in, n_out, gin, "grouped", groups=groups)


def dense_graph(n_in: int, n_out: int) -> BipartiteGraph:
    _check_sizes(n_in, n_out)
    return _from_rows([range(n_in)] * n_out, n_in, n_out, n_in, "dense")


def identity_graph(n: int) -> BipartiteGraph:
    """Perfect matching ``v <- v``; degree 1."""
    _check_sizes(n, n)
    return _from_rows([[v] for v in range(n)], n, n, 1, "identity")


def validate(g: BipartiteGraph) -> list[str]:
    """Return one message per violated invariant; empty for a valid graph."""
    problems = []
    if g.n_in < 1 or g.n_out < 1:
        problems.append(f"size: vertex counts must be >= 1 (n_in={g.n_in}, n_out={g.n_out})")
    if g.degree < 1:
        problems.append(f"degree: must be >= 1 (got {g.degree})")
    if len(g.adjacency) != g.n_out:
        problems.append(f"size: {len(g.adjacency)} adjacency rows for n_out={g.n_out}")
    for v, row in enumerate(g.adjacency):
        if len(row) != g.degree:
            problems.append(f"degree: output {v} has {len(row)} neighbours, expected {g.degree}")
        for u in row:
            if not 0 <= u < g.n_in:
                problems.append(f"range: output {v} lists input {u} outside [0, {g.n_in})")
        if len(set(row)) != len(row):
            problems.append(f"duplicate: output {v} lists a neighbour more than once")
    if not problems and g.num_edges != g.degree * g.n_out:
        problems.append(f"edges: {g.num_edges} != degree * n_out")
    return problems


def save_graph(g: BipartiteGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict()) + "\n")


def load_graph(path) -> BipartiteGraph:
    return BipartiteGraph.from_dict(json.loads(Path(path).read_text()))
