import numpy as np
import pytest

from qprecond.errors import CapacityError, InvalidParameterError
from qprecond.lightcone import (
    CorrelationCache,
    build_correlation_matrix,
    canonical_graph_key,
    canonical_tree_key,
    expectation_lightcone,
    is_tree,
    lightcone_subgraph,
    pair_correlation,
    pairs_within_2p,
    subgraph_size_bound,
)
from qprecond.problems import Problem, gen_random_regular
from qprecond.qaoa import (
    AngleSchedule,
    apply_qaoa,
    correlation,
    expectation_objective,
)

ANGLES = AngleSchedule(gammas=[0.4], betas=[0.3])
ANGLES2 = AngleSchedule(gammas=[0.4, -0.2], betas=[0.3, 0.5])


def _path(n, w=1.0):
    return Problem(n, {(i, i + 1): w for i in range(n - 1)})


def _cycle(n, w=1.0):
    entries = {(i, (i + 1) % n): w for i in range(n)}
    return Problem(n, {(min(a, b), max(a, b)): w for (a, b), w in entries.items()})


class TestSubgraphs:
    def test_path_lightcone_vertices(self):
        prob = _path(9)
        sub = lightcone_subgraph(prob, 4, 5, 1)
        # 1-balls around 4 and 5 cover 3..6
        assert sub.vertices == [3, 4, 5, 6]
        assert sub.vertices[sub.i_local] == 4
        assert sub.vertices[sub.j_local] == 5

    def test_disjoint_balls_return_none(self):
        prob = _path(9)
        assert lightcone_subgraph(prob, 0, 8, 1) is None

    def test_size_bound_values(self):
        # exact closed forms: degree 2 -> 1+4p; degree 3 -> 1+6(2^p - 1)
        assert subgraph_size_bound(2, 1, 1000) == 5
        assert subgraph_size_bound(3, 1, 1000) == 7
        assert subgraph_size_bound(3, 2, 1000) == 19
        assert subgraph_size_bound(3, 3, 1000) == 43
        assert subgraph_size_bound(3, 3, 10) == 10   # capped at n

    def test_bound_is_attained_on_a_cycle(self):
        # a pair at distance 2p on a long cycle: balls share exactly one
        # vertex, so the union has the maximal 1+4p vertices
        prob = _cycle(30)
        for p in (1, 2, 3):
            sub = lightcone_subgraph(prob, 0, 2 * p, p)
            assert sub.n_vertices == subgraph_size_bound(2, p, 30)

    def test_bound_holds_on_regular_graphs(self):
        prob = gen_random_regular(60, 3, 4)
        bound = subgraph_size_bound(3, 2, 60)
        for i, j in list(prob.entries)[:20]:
            sub = lightcone_subgraph(prob, i, j, 2)
            assert sub.n_vertices <= bound

    def test_is_tree(self):
        assert is_tree(lightcone_subgraph(_path(9), 4, 5, 1))
        assert not is_tree(lightcone_subgraph(_cycle(4), 0, 1, 1))


class TestCanonicalKeys:
    def test_tree_key_invariant_under_relabeling(self):
        # same marked path under two different vertex labelings
        prob = _path(5)
        sub1 = lightcone_subgraph(prob, 1, 2, 1)
        shifted = lightcone_subgraph(prob, 2, 3, 1)
        assert canonical_tree_key(sub1) == canonical_tree_key(shifted)

    def test_tree_key_sensitive_to_weights(self):
        a = lightcone_subgraph(_path(5, 1.0), 1, 2, 1)
        b = lightcone_subgraph(_path(5, 2.0), 1, 2, 1)
        assert canonical_tree_key(a) != canonical_tree_key(b)

    def test_tree_key_sensitive_to_marks(self):
        prob = _path(7)
        adjacent = lightcone_subgraph(prob, 2, 3, 1)
        skip = lightcone_subgraph(prob, 2, 4, 1)
        assert canonical_tree_key(adjacent) != canonical_tree_key(skip)

    def test_graph_key_invariant_under_relabeling(self):
        # 2-balls on a 6-cycle cover the whole (cyclic) graph
        prob = _cycle(6)
        a = lightcone_subgraph(prob, 0, 1, 2)
        b = lightcone_subgraph(prob, 3, 4, 2)
        assert canonical_graph_key(a) is not None
        assert canonical_graph_key(a) == canonical_graph_key(b)

    def test_graph_key_distinguishes_weights(self):
        a = lightcone_subgraph(_cycle(6, 1.0), 0, 1, 2)
        b = lightcone_subgraph(_cycle(6, 2.0), 0, 1, 2)
        assert canonical_graph_key(a) != canonical_graph_key(b)

    def test_graph_key_none_for_trees(self):
        assert canonical_graph_key(lightcone_subgraph(_path(5), 1, 2, 1)) is None


class TestPairCorrelation:
    def test_matches_full_emulation_small(self):
        prob = gen_random_regular(10, 3, 7)
        state = apply_qaoa(prob, ANGLES)
        for i, j in list(prob.entries)[:8]:
            exact = correlation(state, i, j)
            lc = pair_correlation(prob, i, j, 1, ANGLES)
            assert lc == pytest.approx(exact, abs=1e-10)

    def test_matches_full_emulation_p2(self):
        prob = gen_random_regular(12, 3, 3)
        state = apply_qaoa(prob, ANGLES2)
        cache = CorrelationCache(cache_nontrees=True)
        for i, j in list(prob.entries)[:6]:
            exact = correlation(state, i, j)
            lc = pair_correlation(prob, i, j, 2, ANGLES2, cache=cache)
            assert lc == pytest.approx(exact, abs=1e-10)

    def test_far_pair_is_exactly_zero(self):
        prob = _path(12)
        assert pair_correlation(prob, 0, 11, 1, ANGLES) == 0.0

    def test_cap_raises_with_pair_named(self):
        prob = gen_random_regular(40, 3, 0)
        i, j = next(iter(prob.entries))
        with pytest.raises(CapacityError, match=rf"\({i}, {j}\)"):
            pair_correlation(prob, i, j, 2, ANGLES2, qubit_cap=4)


class TestMatrixAssembly:
    def test_pairs_within_2p_on_a_path(self):
        prob = _path(6)
        pairs = set(pairs_within_2p(prob, 1))
        expected = {(i, j) for i in range(6) for j in range(i + 1, 6) if j - i <= 2}
        assert pairs == expected

    def test_matches_full_statevector(self):
        prob = gen_random_regular(12, 3, 5)
        state = apply_qaoa(prob, ANGLES)
        out = build_correlation_matrix(prob, 1, ANGLES)
        assert out.n_vars == 12
        for (i, j), z in out.entries.items():
            assert z == pytest.approx(-correlation(state, i, j), abs=1e-10)

    def test_cache_reuse_across_instances(self):
        # unit-weight 3-regular graphs at p=1 share a handful of local
        # shapes; a second instance should be answered almost entirely
        # from cache
        cache = CorrelationCache()
        stats1 = {}
        build_correlation_matrix(gen_random_regular(40, 3, 1), 1, ANGLES,
                                 cache=cache, stats=stats1)
        misses_before = cache.misses
        stats2 = {}
        build_correlation_matrix(gen_random_regular(40, 3, 2), 1, ANGLES,
                                 cache=cache, stats=stats2)
        assert cache.misses - misses_before <= 3
        assert cache.hits > 0

    def test_cache_angle_fingerprint_guard(self):
        cache = CorrelationCache()
        build_correlation_matrix(_path(8), 1, ANGLES, cache=cache)
        with pytest.raises(InvalidParameterError):
            build_correlation_matrix(_path(8), 1,
                                     AngleSchedule(gammas=[0.5], betas=[0.3]),
                                     cache=cache)

    def test_threshold_drops_dust(self):
        prob = _path(8)
        dense = build_correlation_matrix(prob, 1, ANGLES, threshold=0.0)
        sparse = build_correlation_matrix(prob, 1, ANGLES, threshold=1e-2)
        assert set(sparse.entries) <= set(dense.entries)
        assert all(abs(z) >= 1e-2 for z in sparse.entries.values())

    def test_sampled_mode_deterministic_and_consistent(self):
        prob = _path(8)
        a = build_correlation_matrix(prob, 1, ANGLES, sampling=(500, 42))
        b = build_correlation_matrix(prob, 1, ANGLES, sampling=(500, 42))
        assert a.entries == b.entries
        assert a.provenance["K"] == 500
        exact = build_correlation_matrix(prob, 1, ANGLES)
        for pair, z in exact.entries.items():
            assert a.entries.get(pair, 0.0) == pytest.approx(z, abs=0.2)

    def test_angle_depth_mismatch(self):
        with pytest.raises(InvalidParameterError):
            build_correlation_matrix(_path(6), 2, ANGLES)


def test_expectation_lightcone_matches_statevector():
    prob = gen_random_regular(12, 3, 9)
    lc = expectation_lightcone(prob, 1, ANGLES)
    full = expectation_objective(apply_qaoa(prob, ANGLES), prob)
    assert lc == pytest.approx(full, abs=1e-10)
