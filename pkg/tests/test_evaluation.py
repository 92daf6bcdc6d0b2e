import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biplink.errors import InfeasibleSplitError, PreconditionError
from biplink.evaluation import (
    AucResult,
    Evaluation,
    compute_auc,
    constant_scorer,
    evaluate_measure,
    make_split,
    random_scorer,
    repeat_seed,
    run_repeat,
)
from biplink.graph import BipartiteGraph
from biplink.similarity import CN, COMMUNITY, PA, make_combined
from biplink.synthetic import collaboration_graph, planted_partition, random_bipartite

import oracles


def _keys(pairs, g):
    return set((np.asarray(pairs)[:, 0] * g.repo_count + np.asarray(pairs)[:, 1]).tolist())


def _check_split(g, split):
    k = g.edge_count // 10
    e = set(g.edge_keys().tolist())
    pos, neg = _keys(split.positives, g), _keys(split.negatives, g)
    assert len(split.positives) == len(split.negatives) == k
    assert len(pos) == k and len(neg) == k
    assert pos <= e and not (neg & e) and not (pos & neg)
    assert split.reduced_graph.edge_count == g.edge_count - k
    assert not (pos & set(split.reduced_graph.edge_keys().tolist()))


def test_split_invariants_over_many_seeds():
    graphs = [random_bipartite(8, 6, p, s) for s, p in enumerate((0.3, 0.4, 0.6, 0.8))]
    assert min(g.edge_count for g in graphs) >= 10
    for g in graphs:
        for seed in range(250):
            _check_split(g, make_split(g, seed))


def test_split_deterministic():
    g = random_bipartite(30, 20, 0.2, 0)
    a, b = make_split(g, 5), make_split(g, 5)
    assert np.array_equal(a.positives, b.positives) and np.array_equal(a.negatives, b.negatives)
    assert a.reduced_graph == b.reduced_graph
    assert not np.array_equal(make_split(g, 6).positives, a.positives)


def test_ten_links_removes_one():
    g = BipartiteGraph(5, 4, [(u, r) for u in range(5) for r in range(2)])
    s = make_split(g, 0)
    assert s.size == 1 and s.reduced_graph.edge_count == 9


def test_large_graph_split_size():
    g = collaboration_graph(71088, 1000, 91385, seed=0)
    assert make_split(g, 0).size == 9138


def test_split_preconditions():
    with pytest.raises(PreconditionError):
        make_split(BipartiteGraph(3, 3, [(0, 0)] + [(1, r) for r in range(3)]), 0)
    full = BipartiteGraph(4, 3, [(u, r) for u in range(4) for r in range(3)])
    with pytest.raises(InfeasibleSplitError):
        make_split(full, 0)
    # exactly enough room: 11 links of 12 pairs, one negative needed
    nearly = full.without_edges([(0, 0)])
    s = make_split(nearly, 0)
    assert s.negatives.tolist() == [[0, 0]]


def test_dense_graph_negatives():
    g = random_bipartite(40, 30, 0.7, 1)
    _check_split(g, make_split(g, 3))


def test_auc_examples():
    assert compute_auc([1.0] * 5, [0.0] * 5, 0).auc == 1.0
    r = compute_auc([0.3] * 4, [0.3] * 4, 0)
    assert (r.m1, r.m2, r.auc) == (0, r.comparisons, 0.5)
    ex = compute_auc([0.9, 0.4], [0.5, 0.1], 0, exact=True)
    assert (ex.m1, ex.m2, ex.comparisons, ex.auc) == (3, 0, 4, 0.75)
    # the sampled estimator converges to the exhaustive value
    big = compute_auc([0.9, 0.4], [0.5, 0.1], 0, comparisons=200_000)
    assert big.auc == pytest.approx(0.75, abs=0.005)


@given(
    st.lists(st.integers(-3, 3), min_size=1, max_size=25),
    st.lists(st.integers(-3, 3), min_size=1, max_size=25),
    st.integers(0, 2**32),
)
def test_auc_identities(pos, neg, seed):
    pos = np.array(pos, dtype=float)
    neg = np.array(neg, dtype=float)
    a = compute_auc(pos, neg, seed)
    b = compute_auc(-pos, -neg, seed)
    assert 0.0 <= a.auc <= 1.0
    assert a.auc == (a.m1 + a.m2 / 2) / a.comparisons
    assert a.m1 + a.m2 <= a.comparisons
    assert b.fraction == 1 - a.fraction
    assert b.auc == pytest.approx(1.0 - a.auc, abs=1e-15)
    ex = compute_auc(pos, neg, seed, exact=True)
    assert ex.auc == pytest.approx(oracles.auc_exact(pos.tolist(), neg.tolist()), abs=1e-12)
    assert compute_auc(-pos, -neg, seed, exact=True).auc == pytest.approx(1.0 - ex.auc, abs=1e-12)


def test_epsilon_ties():
    assert compute_auc([1.0 + 1e-12], [1.0], 0).auc == 1.0
    assert compute_auc([1.0 + 1e-12], [1.0], 0, epsilon=1e-9).auc == 0.5
    assert compute_auc([1.0 + 1e-12], [1.0], 0, epsilon=1e-9, exact=True).auc == 0.5


def test_auc_errors():
    with pytest.raises(ValueError):
        compute_auc([], [1.0], 0)
    with pytest.raises(ValueError):
        compute_auc([np.nan], [1.0], 0)
    with pytest.raises(ValueError):
        compute_auc([1.0], [1.0], 0, comparisons=0)
    g = random_bipartite(10, 10, 0.3, 0)
    s = make_split(g, 0)
    with pytest.raises(ValueError):
        compute_auc([1.0], [1.0] * s.size, 0, split=s)


def test_repeat_seed_rule():
    assert [repeat_seed(42, i) for i in range(4)] == [42, 43, 40, 41]


def test_evaluate_measure_structure():
    g = random_bipartite(60, 30, 0.1, 2)
    ev = evaluate_measure(g, CN, seed=7, repeats=4)
    assert [r.seed for r in ev.results] == [7, 6, 5, 4]
    assert ev.mean == pytest.approx(np.mean([r.auc for r in ev.results]))
    assert ev.std == pytest.approx(np.std([r.auc for r in ev.results], ddof=1))
    d = ev.to_dict()
    assert set(d) == {"repeats", "summary"} and "wall_time" not in d["repeats"][0]
    assert "wall_time" in ev.to_dict(timing=True)["repeats"][0]
    assert ev.results[0] == run_repeat(g, CN, 7) or ev.results[0].auc == run_repeat(g, CN, 7).auc
    with pytest.raises(ValueError):
        evaluate_measure(g, CN, repeats=0)


def test_evaluation_deterministic_and_thread_independent():
    g = random_bipartite(60, 30, 0.1, 3)
    a = evaluate_measure(g, PA.invert(), seed=11, repeats=3)
    b = evaluate_measure(g, PA.invert(), seed=11, repeats=3, threads=3)
    assert a.to_dict() == b.to_dict()


def test_inversion_identity_end_to_end():
    g = random_bipartite(50, 25, 0.15, 4)
    for m in (CN, PA, make_combined([(PA, 0.7), (CN, 0.3)])):
        a = evaluate_measure(g, m, seed=3, repeats=3)
        b = evaluate_measure(g, m.invert(), seed=3, repeats=3)
        for x, y in zip(a.results, b.results):
            assert y.fraction == 1 - x.fraction
            assert (x.m2, x.comparisons) == (y.m2, y.comparisons)


def test_constant_and_random_scorers():
    g = random_bipartite(60, 40, 0.1, 5)
    ev = evaluate_measure(g, constant_scorer(0.3), seed=1, repeats=3)
    assert all(r.auc == 0.5 for r in ev.results)
    assert ev.results[0].measure == "constant(0.3)"
    rnd = evaluate_measure(g, random_scorer, seed=1, repeats=5)
    assert abs(rnd.mean - 0.5) < 0.1


def test_gold_labels_give_one():
    g = random_bipartite(40, 20, 0.2, 6)
    s = make_split(g, 0)
    gold = _keys(s.positives, g)

    class Gold:
        def score_pairs(self, pairs):
            return np.array([1.0 if k in gold else 0.0 for k in _keys_list(pairs, g)])

    def _keys_list(pairs, g):
        return (pairs[:, 0] * g.repo_count + pairs[:, 1]).tolist()

    sc = Gold()
    assert compute_auc(sc.score_pairs(s.positives), sc.score_pairs(s.negatives), 0, split=s).auc == 1.0


def test_scores_use_reduced_graph():
    # a held-out link between two otherwise linked nodes must not help its own score
    g = random_bipartite(30, 15, 0.3, 7)
    split = make_split(g, 0)
    seen = []

    def factory(reduced, seed):
        seen.append(reduced)
        from biplink.scoring import prepare

        return prepare(CN, reduced)

    evaluate_measure(g, factory, seed=0, repeats=1)
    assert seen[0] == split.reduced_graph


def test_partition_source():
    g, _, _ = planted_partition(4, 80, 16, 0.5, 0.01, seed=0)
    red = evaluate_measure(g, COMMUNITY, seed=2, repeats=2)
    full = evaluate_measure(g, COMMUNITY, seed=2, repeats=2, partition_source="full")
    assert red.to_dict() == evaluate_measure(g, COMMUNITY, seed=2, repeats=2).to_dict()
    assert full.mean >= red.mean - 0.05
    with pytest.raises(ValueError):
        evaluate_measure(g, COMMUNITY, partition_source="other")


def test_aucresult_dict():
    r = AucResult("cn", 0.5, 1, 2, 4, 9, wall_time=1.5)
    assert r.to_dict() == {"measure": "cn", "auc": 0.5, "m1": 1, "m2": 2, "comparisons": 4, "seed": 9, "exact": False}
    assert Evaluation([r]).std == 0.0
