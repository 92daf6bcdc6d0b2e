"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line (visible under
``pytest -v`` or ``pytest -s``) before asserting, so a run doubles as a
report.  Run just these with ``pytest tests/test_acceptance.py -v``.
"""

import math
import random
import time

import numpy as np
import pytest

from biplink.cli import main as cli_main
from biplink.communities import detect_communities
from biplink.evaluation import (
    compute_auc,
    constant_scorer,
    evaluate_measure,
    make_split,
    random_scorer,
    repeat_seed,
)
from biplink.graph import (
    BipartiteGraph,
    NodeRef,
    average_clustering,
    connected_components,
    extended_neighborhood,
    largest_connected_component,
)
from biplink.io import load_graph
from biplink.projection import FLOOR, InternalScorer, project_bottom
from biplink.similarity import CN, COMMUNITY, LOCAL_KINDS, PA, LocalScorer, parse_measure, score
from biplink.synthetic import collaboration_graph, planted_partition, random_bipartite, toy_graph, two_bicliques

import oracles


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


def test_oracle_equivalence(report):
    """Local indices, projection and extended neighborhoods versus brute force."""
    t0 = time.perf_counter()
    rng = random.Random(2024)
    worst = 0.0
    mismatches = []
    for i in range(100):
        nu = rng.randint(2, 30)
        nr = rng.randint(2, 50 - nu)
        p = rng.uniform(0.1, 0.5)
        g = random_bipartite(nu, nr, p, seed=i)
        ur, ru = oracles.adjacency_sets(g)
        pairs = np.array([(u, r) for u in range(nu) for r in range(nr)])
        for u in range(nu):
            want = {NodeRef.user(v) for v in oracles.extended(g, u)}
            if extended_neighborhood(g, NodeRef.user(u)) != want:
                mismatches.append(("extended", i, u))
        for kind in LOCAL_KINDS:
            got = LocalScorer(g, kind).score_pairs(pairs)
            want = np.array([oracles.local_index_sets(ur, ru, kind.value, u, r) for u, r in pairs.tolist()])
            err = float(np.max(np.abs(got - want))) if len(want) else 0.0
            worst = max(worst, err)
            if err > 1e-12:
                mismatches.append((kind.value, i))
            b = project_bottom(g, kind)
            ref = oracles.projection(g, kind.value)
            if b.links() != set(ref):
                mismatches.append(("projection-links", kind.value, i))
            for (a, c), w in ref.items():
                e = abs(b.weight(a, c) - w)
                worst = max(worst, e)
                if e > 1e-12:
                    mismatches.append(("projection-weight", kind.value, i))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 10.0
    report(
        "oracle equivalence",
        ok,
        f"100 graphs, max abs error {worst:.2e} (tol 1e-12), {len(mismatches)} mismatches, {elapsed:.2f}s (limit 10s)",
    )


def test_toy_golden_values(report):
    g = toy_graph()
    expected = {
        "cn": 1.0,
        "jaccard": 0.5,
        "hpi": 1.0,
        "hdi": 0.5,
        "pa": 2.0,
        "ra": 0.5,
        "aa": 1 / math.log(2),
        "salton": 1 / math.sqrt(2),
    }
    got = {k: score(g, parse_measure(k), NodeRef.user(0), NodeRef.repo(1)) for k in expected}
    bad = {k: got[k] for k in expected if got[k] != expected[k]}
    report("toy golden values", not bad, f"(u1, r2) scores {got}" + (f"; mismatched {bad}" if bad else ""))


def test_auc_protocol_identities(report):
    g = collaboration_graph(4000, 300, 10_000, seed=1)
    assert g.edge_count == 10_000
    const = evaluate_measure(g, constant_scorer(0.42), seed=42, repeats=3)
    const_ok = all(r.auc == 0.5 for r in const.results)

    gold_ok = True
    for i in range(3):
        split = make_split(g, repeat_seed(42, i))
        res = compute_auc(np.ones(split.size), np.zeros(split.size), split.seed, split=split)
        gold_ok &= res.auc == 1.0

    inv_ok = True
    for m in (CN, PA):
        a = evaluate_measure(g, m, seed=42, repeats=3)
        b = evaluate_measure(g, m.invert(), seed=42, repeats=3)
        inv_ok &= all(y.fraction == 1 - x.fraction for x, y in zip(a.results, b.results))

    rnd = evaluate_measure(g, random_scorer, seed=42, repeats=20)
    rnd_ok = abs(rnd.mean - 0.5) <= 0.05
    report(
        "AUC protocol identities",
        const_ok and gold_ok and inv_ok and rnd_ok,
        f"constant=0.5 {const_ok}, gold=1.0 {gold_ok}, auc(-s)=1-auc(s) {inv_ok}, "
        f"random mean {rnd.mean:.4f} over 20 repeats on m=10000 (0.5 +/- 0.05)",
    )


def test_ordering_community_over_common_neighbors(report):
    # 20 planted groups of 250 users / 10 repos.  Half of the users are one-off
    # contributors with a single in-group link, as in real contribution data.
    t0 = time.perf_counter()
    g, _, _ = planted_partition(20, 5000, 200, 0.5, 0.003, seed=0, casual_fraction=0.5)
    comm = evaluate_measure(g, COMMUNITY, seed=42, repeats=10)
    cn = evaluate_measure(g, CN, seed=42, repeats=10)
    elapsed = time.perf_counter() - t0
    ok = comm.mean > cn.mean and comm.mean > 0.80 and elapsed < 60.0
    report(
        "ordering community > CN",
        ok,
        f"community {comm.mean:.4f} (std {comm.std:.4f}) vs CN {cn.mean:.4f} (std {cn.std:.4f}), "
        f"m={g.edge_count}, {elapsed:.1f}s (limit 60s)",
    )


def test_internal_link_degeneracy(report):
    g = collaboration_graph(20_000, 1000, 56_000, seed=0)
    avg = g.edge_count / g.user_count
    non_floor = total = 0
    aucs = []
    for i in range(3):
        split = make_split(g, repeat_seed(42, i))
        scorer = InternalScorer(split.reduced_graph, degree_cap=None)
        pos = scorer.score_pairs(split.positives)
        neg = scorer.score_pairs(split.negatives)
        non_floor += int(np.sum(pos != FLOOR))
        total += pos.size
        aucs.append(compute_auc(pos, neg, split.seed, split=split).auc)
        del scorer
    frac = non_floor / total
    mean_auc = float(np.mean(aucs))
    ok = abs(avg - 2.8) < 0.05 and frac < 0.02 and abs(mean_auc - 0.5) <= 0.03
    report(
        "internal-link degeneracy",
        ok,
        f"avg user degree {avg:.2f}, non-floor positives {non_floor}/{total} ({frac:.4%}, limit 2%), "
        f"mean AUC {mean_auc:.4f} (0.5 +/- 0.03)",
    )


def _events_csv(seed):
    rng = random.Random(seed)
    lines = ["user_id,repo_id,kind,timestamp"]
    for _ in range(4000):
        u = f"user{rng.randint(0, 900)}"
        r = f"org/repo{min(int(rng.expovariate(0.05)), 149)}"
        kind = rng.choice(["commit", "commit", "pull_request"])
        lines.append(f"{u},{r},{kind},2014-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}T00:00:00Z")
    lines.append("broken,row")
    return "\n".join(lines) + "\n"


def _repos_csv():
    lines = ["repo_id,is_fork,is_deleted"]
    for j in range(150):
        lines.append(f"org/repo{j},{'true' if j % 17 == 3 else 'false'},{'true' if j % 23 == 5 else 'false'}")
    return "\n".join(lines) + "\n"


def test_structural_invariants(report, tmp_path):
    (tmp_path / "events.csv").write_text(_events_csv(7))
    (tmp_path / "repos.csv").write_text(_repos_csv())
    outs = []
    for name in ("run1", "run2"):
        argv = ["ingest", "--events", str(tmp_path / "events.csv"), "--repos", str(tmp_path / "repos.csv")]
        assert cli_main(argv + ["--top-k", "100", "--out", str(tmp_path / name)]) == 0
        outs.append({f: (tmp_path / name / f).read_bytes() for f in ("graph.tsv", "ids.tsv", "report.json")})
    identical = outs[0] == outs[1]
    ingested, _ = load_graph(tmp_path / "run1")

    graphs = [toy_graph(), two_bicliques(), ingested, collaboration_graph(3000, 200, 8000, seed=3)]
    graphs += [random_bipartite(40, 30, p, seed=s) for s, p in enumerate((0.05, 0.2, 0.6))]
    graphs += [planted_partition(5, 300, 30, 0.3, 0.01, seed=1)[0]]
    clustering_ok = all(average_clustering(g) == 0.0 for g in graphs)
    lcc_ok = all(connected_components(largest_connected_component(g))[0] == 1 for g in graphs if g.edge_count)
    ingested_connected = connected_components(ingested)[0] == 1
    report(
        "structural invariants",
        clustering_ok and lcc_ok and ingested_connected and identical,
        f"clustering == 0 on {len(graphs)} graphs {clustering_ok}, LCC connected {lcc_ok and ingested_connected}, "
        f"ingestion byte-identical {identical}",
    )


def test_detector_correctness(report):
    small = two_bicliques(3, 2)
    best, labels = oracles.exhaustive_optimum(small, oracles.set_partitions(small.node_count))
    p_small = detect_communities(small, seed=42)
    small_ok = oracles.same_partition(p_small.labels, labels) and abs(p_small.codelength - best) < 1e-12

    big = two_bicliques()
    best2, labels2 = oracles.exhaustive_optimum(big, oracles.bipartitions(big.node_count))
    p_big = detect_communities(big, seed=42)
    planted = [0] * 5 + [1] * 5 + [0, 0, 1, 1]
    big_ok = (
        oracles.same_partition(p_big.labels, labels2)
        and oracles.same_partition(p_big.labels, planted)
        and p_big.codelength <= best2 + 1e-12
    )

    g, _, _ = planted_partition(6, 300, 30, 0.3, 0.01, seed=4)
    runs = [detect_communities(g, seed=9, warn_disconnected=False) for _ in range(3)]
    repro = all(np.array_equal(r.labels, runs[0].labels) and r.codelength == runs[0].codelength for r in runs)
    report(
        "community detector correctness",
        small_ok and big_ok and repro,
        f"10-node optimum over all set partitions matched {small_ok} (L={best:.6f}), "
        f"14-node split at bridge, optimal over bipartitions {big_ok} (L={p_big.codelength:.6f}), "
        f"bit-reproducible {repro}",
    )


def test_performance_envelope(report):
    g = collaboration_graph(71_088, 1000, 91_385, seed=0)
    split = make_split(g, 42)
    assert split.size == 9138
    times = {}
    for kind in LOCAL_KINDS:
        reduced = BipartiteGraph(g.user_count, g.repo_count, split.reduced_graph.edges())
        t0 = time.perf_counter()
        s = LocalScorer(reduced, kind)
        s.score_pairs(split.positives)
        s.score_pairs(split.negatives)
        times[kind.value] = time.perf_counter() - t0
    slowest = max(times, key=times.get)
    report(
        "performance envelope",
        times[slowest] < 60.0,
        f"2 x 9138 pairs, slowest {slowest} {times[slowest]:.2f}s (limit 60s); "
        + ", ".join(f"{k} {v:.2f}s" for k, v in times.items()),
    )
