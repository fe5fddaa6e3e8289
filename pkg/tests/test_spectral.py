import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xnets.errors import TooLargeError
from xnets.graphs import (
    CayleyParams,
    cayley_expander,
    dense_graph,
    grouped_graph,
    identity_graph,
    random_expander,
    sample_cayley_generators,
)
from xnets.spectral import expansion_violations, singular_values, spectral_gap, vertex_expansion


def character_spectrum(n_bits, gens):
    """|sum_h (-1)^<chi, h>| over all characters chi of the XOR group."""
    vals = [abs(sum((-1) ** bin(chi & h).count("1") for h in gens)) for chi in range(1 << n_bits)]
    return np.sort(vals)[::-1].astype(float)


def eig_singular_values(g):
    """Singular values via eigenvalues of B B^T, independent of the SVD path."""
    B = g.biadjacency()
    ev = np.linalg.eigvalsh(B @ B.T if g.n_out <= g.n_in else B.T @ B)
    return np.sort(np.sqrt(np.clip(ev, 0, None)))[::-1]


def test_complete_graph_spectrum():
    assert np.allclose(singular_values(dense_graph(4, 4)), [4, 0, 0, 0], atol=1e-12)
    assert spectral_gap(dense_graph(5, 5)).gap == pytest.approx(1.0)


def test_identity_spectrum():
    assert np.allclose(singular_values(identity_graph(4)), [1, 1, 1, 1])
    assert spectral_gap(identity_graph(4)).gap == pytest.approx(0.0)


def test_cayley_two_bits_spectrum():
    g = cayley_expander(CayleyParams.from_strings(["01", "10", "11"]))
    assert np.allclose(singular_values(g), [3, 1, 1, 1], atol=1e-12)
    assert spectral_gap(g).gap == pytest.approx(2 / 3, abs=1e-12)


def test_non_generating_set_has_no_gap():
    g = cayley_expander(CayleyParams.from_strings(["01"]))
    assert spectral_gap(g).lam == pytest.approx(1.0)
    assert spectral_gap(g).gap == pytest.approx(0.0)


@pytest.mark.parametrize("n_bits, size, seed", [(3, 3, 0), (4, 5, 1), (5, 8, 2), (6, 10, 3)])
def test_cayley_matches_character_oracle(n_bits, size, seed):
    p = sample_cayley_generators(n_bits, size, seed)
    assert np.allclose(singular_values(cayley_expander(p)),
                       character_spectrum(n_bits, p.generators), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(n_in=st.integers(2, 30), n_out=st.integers(2, 30), data=st.data())
def test_svd_matches_eigen_oracle(n_in, n_out, data):
    d = data.draw(st.integers(1, n_in))
    g = random_expander(n_in, n_out, d, seed=data.draw(st.integers(0, 10_000)))
    assert np.allclose(singular_values(g), eig_singular_values(g), atol=1e-6)


def test_top_singular_value_is_degree_for_square_biregular():
    for seed in range(5):
        g = random_expander(64, 64, 8, seed=seed)
        s = singular_values(g)
        assert abs(s[0] - 8) <= 1e-9
        assert spectral_gap(g).gap >= 0.2


def test_report_serializes():
    d = spectral_gap(random_expander(16, 16, 4, seed=0)).to_dict()
    assert set(d) == {"singular_values", "lambda", "degree", "gap"}
    assert len(d["singular_values"]) == 16


def test_size_guard():
    with pytest.raises(TooLargeError):
        singular_values(random_expander(2000, 1000, 2, seed=0))


def test_expansion_complete_graph():
    rep = vertex_expansion(dense_graph(8, 8), max_subset_size=1)
    assert rep.worst_neighbors == 8 and rep.worst_ratio == 8


def test_expansion_grouped_worst_subset():
    rep = vertex_expansion(grouped_graph(8, 8, 2), max_subset_size=4)
    assert rep.worst_ratio == 1.0
    assert rep.witness == (0, 1, 2, 3)
    assert rep.alpha == 0.5


def test_singletons_have_ratio_degree():
    rep = vertex_expansion(random_expander(20, 20, 5, seed=1), max_subset_size=1)
    assert rep.worst_ratio == 5


def brute_force_expansion(g, k_max):
    best = None
    for k in range(1, k_max + 1):
        for S in itertools.combinations(range(g.n_out), k):
            n = len(set().union(*(g.adjacency[v] for v in S)))
            if best is None or n / k < best:
                best = n / k
    return best


@pytest.mark.parametrize("seed", range(3))
def test_expansion_matches_brute_force(seed):
    g = random_expander(10, 10, 3, seed=seed)
    assert vertex_expansion(g, max_subset_size=5).worst_ratio == pytest.approx(
        brute_force_expansion(g, 5))


def test_sampled_never_beats_exhaustive():
    g = random_expander(12, 12, 3, seed=4)
    ex = vertex_expansion(g, max_subset_size=6)
    sm = vertex_expansion(g, max_subset_size=6, mode="sampled", samples=500, seed=1)
    assert sm.worst_ratio >= ex.worst_ratio
    assert sm.mode == "sampled" and sm.subsets_examined == 500


def test_exhaustive_guard():
    with pytest.raises(TooLargeError):
        vertex_expansion(random_expander(64, 64, 4, seed=0))


@pytest.mark.parametrize("seed", range(5))
def test_expansion_bound_holds_on_small_expanders(seed):
    assert expansion_violations(random_expander(16, 16, 4, seed=seed)) == []


def test_expansion_bound_flags_fake_gap():
    # grouped graphs have no gap; pretending they do must surface violations
    assert expansion_violations(grouped_graph(8, 8, 2), gap=0.5)
