import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provgraph.core import MREdge, ProvenanceGraph
from provgraph.descriptor import GlobalDescriptor
from provgraph.eval import (
    graph_overlap,
    journal_store,
    pad_index,
    pick_query,
    recall_at_k,
    recall_truth,
    reference_graph,
    report_csv,
    run_benchmark,
    write_report,
)
from provgraph.index import DescriptorIndex

from conftest import random_dag


def naive_overlap(pv, pe, rv, re_):
    """Scores from plain lists, counting matches one by one."""

    def f1(a, b):
        if not a and not b:
            return 1.0
        return 2 * sum(1 for x in a if x in b) / (len(a) + len(b))

    pu = list({frozenset(e) for e in pe})
    ru = list({frozenset(e) for e in re_})
    vo = f1(list(pv), list(rv))
    eo = f1(pu, ru)
    eod = f1(list(pe), list(re_))
    inter_v = sum(1 for x in pv if x in rv)
    tot = len(pv) + len(rv)
    veo = 1.0 if tot + len(pu) + len(ru) == 0 else 2 * (inter_v + sum(1 for x in pu if x in ru)) / (tot + len(pu) + len(ru))
    veod = 1.0 if tot + len(pe) + len(re_) == 0 else 2 * (inter_v + sum(1 for x in pe if x in re_)) / (tot + len(pe) + len(re_))
    return vo, eo, veo, eod, veod


def test_recall_examples():
    assert recall_at_k([1, 2, 3], {1, 9}, 3) == 0.5
    assert recall_at_k([9, 1], {1, 9}, 2) == 1.0
    assert recall_at_k([9, 1], {1, 9}, 1) == 0.5
    assert recall_at_k([], set(), 5) == 1.0
    with pytest.raises(ValueError):
        recall_at_k([1], {1}, 0)


def test_overlap_examples():
    s = graph_overlap(ProvenanceGraph([1]), ProvenanceGraph([1, 2]))
    assert s.vo == pytest.approx(2 / 3)
    s = graph_overlap(ProvenanceGraph(edges=[(1, 2), (2, 3)]), ProvenanceGraph(edges=[(2, 1), (2, 3)]))
    assert s.eo == 1.0 and s.eo_directed == 0.5
    assert s.veo == 1.0 and s.veo_directed == pytest.approx(2 * (3 + 1) / 10)


def test_empty_graphs_flagged():
    s = graph_overlap(ProvenanceGraph(), ProvenanceGraph())
    assert (s.vo, s.eo, s.veo) == (1.0, 1.0, 1.0)
    assert "vo:empty" in s.flags and "eo:empty" in s.flags
    s = graph_overlap(ProvenanceGraph([1]), ProvenanceGraph([1]))
    assert s.eo == 1.0 and s.flags == ["eo:empty", "eo_directed:empty"]


def test_matches_naive_on_1000_pairs(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        a = random_dag(rng, n, float(rng.uniform(0, 0.3)))
        b = random_dag(rng, n, float(rng.uniform(0, 0.3)))
        # drop and flip some things so the graphs actually differ
        keep = {int(x) for x in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)}
        pred = ProvenanceGraph(keep, [e for e in a.edges if e.src in keep and e.dst in keep])
        ref = ProvenanceGraph(b.nodes, [MREdge(e.dst, e.src) if rng.random() < 0.3 else e for e in b.edges])
        s = graph_overlap(pred, ref)
        want = naive_overlap(pred.nodes, [tuple(e) for e in pred.edges], ref.nodes, [tuple(e) for e in ref.edges])
        got = (s.vo, s.eo, s.veo, s.eo_directed, s.veo_directed)
        assert np.allclose(got, want, rtol=0, atol=1e-12)


edges_st = st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9)).filter(lambda t: t[0] != t[1]), max_size=20)


@settings(max_examples=80, deadline=None)
@given(edges_st, edges_st, st.permutations(range(10)))
def test_overlap_symmetric_and_relabel_invariant(e1, e2, perm):
    a, b = ProvenanceGraph(edges=e1), ProvenanceGraph(edges=e2)
    s, t = graph_overlap(a, b), graph_overlap(b, a)
    assert (s.vo, s.eo, s.veo, s.eo_directed, s.veo_directed) == (t.vo, t.eo, t.veo, t.eo_directed, t.veo_directed)
    ra = ProvenanceGraph(edges=[(perm[x], perm[y]) for x, y in e1])
    rb = ProvenanceGraph(edges=[(perm[x], perm[y]) for x, y in e2])
    r = graph_overlap(ra, rb)
    assert (r.vo, r.eo, r.veo_directed) == pytest.approx((s.vo, s.eo, s.veo_directed))
    for v in (s.vo, s.eo, s.veo, s.eo_directed, s.veo_directed):
        assert 0.0 <= v <= 1.0
    if e1 == e2:
        assert s.veo_directed == 1.0


def test_references(small_dataset):
    j = small_dataset.journals[0]
    q = pick_query(j)
    assert j.graph.degree(q) == max(j.graph.degree(n) for n in j.graph.nodes)
    ref = reference_graph(j, q)
    assert q in ref.nodes and ref.nodes <= j.graph.nodes
    truth = recall_truth(j, q)
    assert q not in truth and truth <= ref.nodes
    assert len(journal_store(small_dataset.journals)) == sum(len(x.graph.edges) for x in small_dataset.journals)


def test_oracle_mode_is_perfect(small_dataset):
    rep = run_benchmark(small_dataset, "oracle")
    assert rep["aggregate"]["veo_directed"]["mean"] == 1.0
    assert rep["graphs"] == 4 and len(rep["rows"]) == 4


def test_disturb_mode(small_dataset):
    rep = run_benchmark(small_dataset, "disturb", models="oracle")
    assert rep["distractor_exclusion"] == 1.0
    assert rep["mst_distractor_exclusion"] == 0.0


def test_end_to_end_oracle(small_dataset, tmp_path):
    rep = run_benchmark(small_dataset, "end_to_end", ks=(1, 5), k=5, db_sizes=(0, 500))
    assert len(rep["rows"]) == 8
    for r in rep["rows"]:
        assert r["R@5_traced"] >= r["R@5"]
        assert r["relationship_calls"] <= 5
    sizes = {r["db_size"] for r in rep["rows"]}
    assert 500 in sizes
    p, c = write_report(rep, tmp_path / "r" / "rep.json")
    assert p.exists() and c.read_text() == report_csv(rep)
    assert "filter_time" not in c.read_text()
    with pytest.raises(ValueError):
        run_benchmark(small_dataset, "nope")


def test_pad_index_filler_orthogonal(rng):
    idx = DescriptorIndex()
    v = rng.standard_normal((5, idx.dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    idx.insert_many(range(5), v)
    before = [i for i, s in idx.top_k(GlobalDescriptor(v[0]), 5) if s > 1e-5]
    pad_index(idx, 3000, seed=1)
    assert len(idx) == 3000
    fill = idx.vectors[5:].astype(np.float64)
    assert np.abs(fill @ v.T).max() < 1e-5
    assert np.allclose(np.linalg.norm(fill, axis=1), 1.0, atol=1e-5)
    assert int(idx.ids[5:].min()) == 5
    # fillers score 0, so everything scoring above 0 keeps its rank
    assert [i for i, _ in idx.top_k(GlobalDescriptor(v[0]), len(before))] == before
