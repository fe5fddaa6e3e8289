"""Spectrum and vertex expansion of bipartite graphs.

The spectral gap is taken from the singular values of the ``n_out x n_in``
biadjacency matrix: ``gap = 1 - s2 / D`` where ``s2`` is the second largest
singular value. (The full bipartite adjacency always has ``-D`` in its
spectrum, so its second largest absolute eigenvalue carries no information.)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import TooLargeError
from .graphs import BipartiteGraph, make_rng

MAX_DENSE_ENTRIES = 10**6
MAX_EXHAUSTIVE_SUBSETS = 10**7
_CHUNK = 50_000


def _fmt(x: float) -> float:
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class SpectralReport:
    singular_values: tuple
    lam: float
    degree: int
    gap: float

    def to_dict(self) -> dict:
        return {
            "singular_values": [_fmt(s) for s in self.singular_values],
            "lambda": _fmt(self.lam),
            "degree": self.degree,
            "gap": _fmt(self.gap),
        }


@dataclass(frozen=True)
class ExpansionReport:
    alpha: float
    max_subset_size: int
    worst_ratio: float
    worst_neighbors: int
    witness: tuple
    mode: str
    subsets_examined: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = _fmt(self.alpha)
        d["worst_ratio"] = _fmt(self.worst_ratio)
        d["witness"] = list(self.witness)
        return d


def singular_values(g: BipartiteGraph) -> np.ndarray:
    """All ``min(n_in, n_out)`` singular values of the biadjacency, descending."""
    if g.n_in * g.n_out > MAX_DENSE_ENTRIES:
        raise TooLargeError(
            f"{g.n_out}x{g.n_in} biadjacency exceeds {MAX_DENSE_ENTRIES} entries; "
            "use an iterative (power-iteration) solver for graphs this size"
        )
    s = np.linalg.svd(g.biadjacency(), compute_uv=False)
    return np.sort(s)[::-1]


def spectral_gap(g: BipartiteGraph) -> SpectralReport:
    s = singular_values(g)
    if len(s) < 2:
        return SpectralReport(tuple(s.tolist()), 0.0, g.degree, 1.0)
    lam = float(s[1])
    gap = min(1.0, max(0.0, 1.0 - lam / g.degree))
    return SpectralReport(tuple(s.tolist()), lam, g.degree, gap)


def _neighbor_counts(mask: np.ndarray, combos: np.ndarray) -> np.ndarray:
    return mask[combos].any(axis=1).sum(axis=1)


def _better(n_new, k_new, s_new, n_old, k_old, s_old) -> bool:
    # exact comparison of n/k ratios, ties go to the lexicographically smaller subset
    lhs, rhs = n_new * k_old, n_old * k_new
    return lhs < rhs or (lhs == rhs and s_new < s_old)


def vertex_expansion(
    g: BipartiteGraph,
    max_subset_size: Optional[int] = None,
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
) -> ExpansionReport:
    """Smallest ``|N(S)| / |S|`` over output subsets with ``1 <= |S| <= max_subset_size``.

    ``mode="exhaustive"`` enumerates every subset (guarded at 10^7 subsets of
    the largest size); ``mode="sampled"`` draws ``samples`` random subsets and
    can only overestimate the exhaustive minimum.
    """
    if max_subset_size is None:
        max_subset_size = max(1, g.n_out // 2)
    max_subset_size = min(max_subset_size, g.n_out)
    mask = g.biadjacency(dtype=bool)
    best = None  # (neighbors, size, subset)
    examined = 0

    def consider(combos):
        nonlocal best
        counts = _neighbor_counts(mask, combos)
        k = combos.shape[1]
        # within one size: smallest count, earliest (lexicographic) row wins
        i = int(np.argmin(counts))
        cand = (int(counts[i]), k, tuple(int(x) for x in combos[i]))
        if best is None or _better(*cand, *best):
            best = cand

    if mode == "exhaustive":
        if math.comb(g.n_out, max_subset_size) > MAX_EXHAUSTIVE_SUBSETS:
            raise TooLargeError(
                f"C({g.n_out}, {max_subset_size}) subsets exceeds {MAX_EXHAUSTIVE_SUBSETS}; "
                "use mode='sampled'"
            )
        for k in range(1, max_subset_size + 1):
            it = itertools.combinations(range(g.n_out), k)
            while True:
                chunk = list(itertools.islice(it, _CHUNK))
                if not chunk:
                    break
                consider(np.asarray(chunk, dtype=np.int64))
                examined += len(chunk)
    elif mode == "sampled":
        rng = make_rng(seed)
        sizes = rng.integers(1, max_subset_size + 1, size=samples)
        for k in np.unique(sizes):
            m = int((sizes == k).sum())
            keys = rng.random((m, g.n_out))
            combos = np.sort(np.argsort(keys, axis=1)[:, :k], axis=1)
            # lexicographic order among sampled subsets of this size
            order = np.lexsort(combos.T[::-1])
            consider(combos[order])
            examined += m
    else:
        raise ValueError(f"unknown mode {mode!r}")

    n, k, subset = best
    return ExpansionReport(max_subset_size / g.n_out, max_subset_size, n / k, n, subset, mode, examined)


def expansion_violations(
    g: BipartiteGraph,
    gap: Optional[float] = None,
    max_subset_size: Optional[int] = None,
) -> list:
    """Subsets breaking ``|N(S)| >= min(n_in, (1 + gap) |S|)``.

    Exhaustive over output subsets with ``|S| <= n_out / 2`` by default. The
    bound is a consequence of the spectral gap for graphs that are regular on
    both sides, so any violation there signals a bug. Each violation is a
    ``(subset, |N(S)|, bound)`` tuple.
    """
    if gap is None:
        gap = spectral_gap(g).gap
    if max_subset_size is None:
        max_subset_size = max(1, g.n_out // 2)
    if math.comb(g.n_out, max_subset_size) > MAX_EXHAUSTIVE_SUBSETS:
        raise TooLargeError("exhaustive expansion check is too large for this graph")
    mask = g.biadjacency(dtype=bool)
    violations = []
    for k in range(1, max_subset_size + 1):
        bound = min(g.n_in, (1.0 + gap) * k)
        it = itertools.combinations(range(g.n_out), k)
        while True:
            chunk = list(itertools.islice(it, _CHUNK))
            if not chunk:
                break
            combos = np.asarray(chunk, dtype=np.int64)
            counts = _neighbor_counts(mask, combos)
            # 1e-9 absorbs rounding in the measured gap
            for i in np.flatnonzero(counts < bound - 1e-9):
                violations.append((tuple(int(x) for x in combos[i]), int(counts[i]), bound))
    return violations
