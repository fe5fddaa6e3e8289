import itertools
import json
import math
from collections import deque

import numpy as np
import pytest

from xnets.connectivity import (
    LayeredNetworkSpec,
    exhaustive_mixing_check,
    min_sensitive_depth,
    mixing_discrepancy,
    random_walk_mixing,
    sensitivity_map,
    sensitivity_profile,
    walk_distribution,
)
from xnets.errors import InvalidSpecError, InvalidSubsetError
from xnets.graphs import dense_graph, grouped_graph, identity_graph, random_expander
from xnets.verify import verify_grouped_sensitivity, verify_mixing, verify_walk


def bfs_reachable(graphs):
    """Per-input BFS over the layered graph; returns [n_out_final, n_in_first]."""
    n_in = graphs[0].n_in
    out = np.zeros((graphs[-1].n_out, n_in), dtype=bool)
    children = []
    for g in graphs:
        ch = [[] for _ in range(g.n_in)]
        for v, row in enumerate(g.adjacency):
            for u in row:
                ch[u].append(v)
        children.append(ch)
    for u0 in range(n_in):
        queue, seen = deque([(0, u0)]), {(0, u0)}
        while queue:
            layer, u = queue.popleft()
            if layer == len(graphs):
                out[u, u0] = True
                continue
            for v in children[layer][u]:
                if (layer + 1, v) not in seen:
                    seen.add((layer + 1, v))
                    queue.append((layer + 1, v))
    return out


def test_dense_layer_fully_sensitive():
    assert sensitivity_map([dense_graph(5, 7)]).fraction == 1.0


def test_grouped_stack_stays_block_diagonal():
    g = grouped_graph(64, 64, 4)
    assert sensitivity_map([g, g, g]).fraction == 0.25
    assert sensitivity_profile([g, g, g]) == [0.25, 0.25, 0.25]


@pytest.mark.parametrize("seed", range(4))
def test_sensitivity_matches_bfs(seed):
    graphs = [random_expander(12, 10, 2, seed=seed), random_expander(10, 14, 2, seed=seed + 50),
              random_expander(14, 9, 1, seed=seed + 99)]
    smap = sensitivity_map(graphs)
    assert smap.reachable.shape == (9, 12)
    assert np.array_equal(smap.reachable, bfs_reachable(graphs))


def test_profile_is_monotone():
    graphs = [random_expander(32, 32, 2, seed=i) for i in range(8)]
    prof = sensitivity_profile(graphs)
    assert all(a <= b for a, b in zip(prof, prof[1:]))
    assert prof[-1] == sensitivity_map(graphs).fraction


def test_dimension_mismatch():
    with pytest.raises(InvalidSpecError):
        LayeredNetworkSpec((dense_graph(4, 5), dense_graph(4, 4)))
    with pytest.raises(InvalidSpecError):
        LayeredNetworkSpec(())


def test_min_depth_dense_and_identity():
    assert min_sensitive_depth(lambda i: dense_graph(6, 6), 6, 5) == 1
    assert min_sensitive_depth(lambda i: identity_graph(6), 6, 50) is None


def test_min_depth_random_expanders():
    n = 256
    for seed in range(10):
        d = min_sensitive_depth(lambda i: random_expander(n, n, 4, seed=seed * 10_000 + i), n, 40)
        assert d is not None and d <= 2 * math.ceil(math.log2(n))


def test_min_depth_rejects_wrong_size():
    with pytest.raises(InvalidSpecError):
        min_sensitive_depth([dense_graph(4, 4)], 5, 3)


def test_mixing_trivial_cases():
    g = random_expander(10, 10, 3, seed=0)
    full = mixing_discrepancy(g, range(10), range(10))
    assert full.edges == 30 and full.expected == 30 and full.discrepancy == 0
    one = mixing_discrepancy(g, [4], g.adjacency[4])
    assert one.edges == 3


def test_mixing_subset_errors():
    g = random_expander(10, 10, 3, seed=0)
    with pytest.raises(InvalidSubsetError):
        mixing_discrepancy(g, [10], [0])
    with pytest.raises(InvalidSubsetError):
        mixing_discrepancy(g, [], [0])


def test_exhaustive_matches_pairwise():
    g = random_expander(8, 8, 3, seed=2)
    rep = exhaustive_mixing_check(g, max_size=3)
    subsets = [c for k in range(1, 4) for c in itertools.combinations(range(8), k)]
    passes = sum(mixing_discrepancy(g, S, T).passed for S in subsets for T in subsets)
    assert rep["pairs"] == len(subsets) ** 2
    assert rep["pass_count"] == passes


def test_mixing_bound_small_expanders():
    res = verify_mixing(10, 3, 5, seeds=range(5))
    assert res.passed, res.fail_witnesses[:3]


def test_walk_point_mass_and_complete_graph():
    g = random_expander(16, 16, 4, seed=0)
    assert random_walk_mixing(g, 3, 0) == pytest.approx(1 - 1 / 16)
    assert random_walk_mixing(dense_graph(9, 9), 0, 1) == pytest.approx(0.0, abs=1e-15)


def test_walk_distribution_sums_to_one():
    g = random_expander(20, 20, 3, seed=1)
    for steps in range(6):
        assert walk_distribution(g, 0, steps).sum() == pytest.approx(1.0)


def test_walk_monotone_at_even_steps():
    g = random_expander(64, 64, 8, seed=3)
    tv = [random_walk_mixing(g, 0, s) for s in range(0, 20, 2)]
    assert all(b <= a + 1e-15 for a, b in zip(tv, tv[1:]))


def test_walk_converges_on_expanders():
    res = verify_walk(64, 8, seeds=range(10))
    assert res.passed
    assert max(d["worst_tv"] for d in res.details) <= 0.01


def test_disconnected_walk_stays_away_from_uniform():
    assert random_walk_mixing(grouped_graph(16, 16, 2), 0, 10) >= 0.5 - 1e-12


def test_verification_json_schema():
    res = verify_grouped_sensitivity(32, 4)
    data = json.loads(res.to_json())
    assert {"check", "params", "seeds", "pass_count", "fail_witnesses"} <= set(data)
    assert res.passed
