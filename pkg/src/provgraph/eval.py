"""Metrics and the benchmark harness.

Graph metrics are F1-style overlaps:

    VO  = 2|V & V'| / (|V| + |V'|)
    EO  = 2|E & E'| / (|E| + |E'|)
    VEO = 2(|V & V'| + |E & E'|) / (|V| + |V'| + |E| + |E'|)

EO and VEO come in an undirected flavour (edges as unordered pairs) and a
directed one (``eo_directed``, ``veo_directed``). A 0/0 ratio is 1.0 and is
recorded in ``GraphScore.flags``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .construct import PipelineStats, build_graph_full, build_graph_mst_baseline, run_pipeline
from .core import ImageId, ImageRecord, Journal, ProvenanceGraph
from .descriptor import DIM, GlobalDescriptor, extract_global
from .graphstore import MRStore
from .imaging import load_image
from .index import DescriptorIndex
from .pairwise.config import ModelConfig
from .pairwise.models import BaselineModels, OracleModels, PairwiseModels
from .synth import Dataset, load_dataset

log = logging.getLogger(__name__)

MODES = ("oracle", "disturb", "end_to_end")
DEFAULT_KS = (1, 5, 10)


def recall_at_k(returned: Sequence[ImageId], truth: Iterable[ImageId], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = set(truth)
    if not truth:
        return 1.0
    return len(set(list(returned)[:k]) & truth) / len(truth)


@dataclass
class GraphScore:
    vo: float
    eo: float
    veo: float
    eo_directed: float
    veo_directed: float
    flags: List[str] = field(default_factory=list)


def _f1(inter: int, total: int, name: str, flags: List[str]) -> float:
    if total == 0:
        flags.append(f"{name}:empty")
        return 1.0
    return 2.0 * inter / total


def graph_overlap(predicted: ProvenanceGraph, reference: ProvenanceGraph) -> GraphScore:
    v, v2 = predicted.nodes, reference.nodes
    e, e2 = {tuple(x) for x in predicted.edges}, {tuple(x) for x in reference.edges}
    u = {frozenset(x) for x in e}
    u2 = {frozenset(x) for x in e2}
    flags: List[str] = []
    nv = len(v & v2)
    ne_d = len(e & e2)
    ne_u = len(u & u2)
    vo = _f1(nv, len(v) + len(v2), "vo", flags)
    eo = _f1(ne_u, len(u) + len(u2), "eo", flags)
    eo_d = _f1(ne_d, len(e) + len(e2), "eo_directed", flags)
    veo = _f1(nv + ne_u, len(v) + len(v2) + len(u) + len(u2), "veo", flags)
    veo_d = _f1(nv + ne_d, len(v) + len(v2) + len(e) + len(e2), "veo_directed", flags)
    return GraphScore(vo, eo, veo, eo_d, veo_d, flags)


# ---------------------------------------------------------------------------
# references from journals


def journal_store(journals: Iterable[Journal]) -> MRStore:
    s = MRStore()
    for j in journals:
        s.add_edges(j.graph.sorted_edges())
    return s


def journal_neighbors(j: Journal, q: ImageId) -> Set[ImageId]:
    return {e.dst for e in j.graph.edges if e.src == q} | {e.src for e in j.graph.edges if e.dst == q}


def reference_graph(j: Journal, q: ImageId) -> ProvenanceGraph:
    """What a perfect pipeline reaches from q: the MR closure seeded at q and
    its direct MR partners."""
    g = journal_store([j]).trace([q, *sorted(journal_neighbors(j, q))])
    g.add_node(q)
    return g


def recall_truth(j: Journal, q: ImageId) -> Set[ImageId]:
    """Images sharing an MR with q, direct or indirect, q excluded."""
    return journal_store([j]).trace([q]).nodes - {q}


def pick_query(j: Journal) -> ImageId:
    """Node with the most direct MRs; smallest id on ties."""
    nodes = j.graph.sorted_nodes()
    return max(nodes, key=lambda n: (j.graph.degree(n), -n))


# ---------------------------------------------------------------------------
# image access


class ImageDB:
    """id -> ImageRecord loader over a dataset manifest, with a small LRU cache."""

    def __init__(self, root, manifest: Sequence[dict], cache_size: int = 512):
        self.root = Path(root)
        self.paths = {int(m["id"]): self.root / m["file"] for m in manifest}
        self.graph_of = {int(m["id"]): m["graph_id"] for m in manifest}
        self.cache_size = cache_size
        self._cache: "OrderedDict[ImageId, ImageRecord]" = OrderedDict()
        self.loads = 0

    def ids(self) -> List[ImageId]:
        return sorted(self.paths)

    def __call__(self, image_id: ImageId) -> ImageRecord:
        hit = self._cache.get(image_id)
        if hit is not None:
            self._cache.move_to_end(image_id)
            return hit
        if image_id not in self.paths:
            raise KeyError(f"image {image_id} not in manifest")
        rec = load_image(self.paths[image_id], image_id)
        self.loads += 1
        self._cache[image_id] = rec
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return rec


def build_index(db: ImageDB, ids: Optional[Sequence[ImageId]] = None) -> DescriptorIndex:
    ids = db.ids() if ids is None else list(ids)
    idx = DescriptorIndex(DIM, capacity=max(len(ids), 16))
    vecs = np.stack([extract_global(db(i)).vector for i in ids]) if ids else np.zeros((0, DIM))
    idx.insert_many(ids, vecs)
    return idx


def filler_vectors(n: int, real: np.ndarray, seed: int, dim: int = DIM, chunk: int = 65536):
    """Random unit vectors orthogonal to the span of ``real``.

    They score 0 against every real descriptor, so padding an index with
    them grows the filter scan without changing which images are retrieved.
    Yields float32 chunks.
    """
    rng = np.random.default_rng(seed)
    basis = np.linalg.svd(np.asarray(real, dtype=np.float64), full_matrices=False)[2] if len(real) else np.zeros((0, dim))
    done = 0
    while done < n:
        m = min(chunk, n - done)
        v = rng.standard_normal((m, dim))
        if basis.shape[0]:
            v -= (v @ basis.T) @ basis
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        yield v.astype(np.float32)
        done += m


def pad_index(idx: DescriptorIndex, size: int, seed: int) -> None:
    """Grow ``idx`` to ``size`` entries with filler descriptors (ids above all real ids)."""
    need = size - len(idx)
    if need <= 0:
        return
    real = idx.vectors.astype(np.float64)
    next_id = int(idx.ids.max()) + 1 if len(idx) else 0
    for chunk in filler_vectors(need, real, seed):
        idx.insert_many(np.arange(next_id, next_id + len(chunk), dtype=np.uint64), chunk)
        next_id += len(chunk)


# ---------------------------------------------------------------------------
# benchmark


def make_models(kind: Union[str, PairwiseModels], journals: Sequence[Journal],
                cfg: ModelConfig = ModelConfig(), extra_ids: Sequence[ImageId] = ()) -> PairwiseModels:
    if isinstance(kind, PairwiseModels):
        return kind
    if kind == "oracle":
        return OracleModels(journals, extra_ids)
    if kind == "baseline":
        return BaselineModels(cfg)
    raise ValueError(f"unknown models {kind!r}")


def _score_row(score: GraphScore) -> dict:
    d = asdict(score)
    d["flags"] = ";".join(score.flags)
    return d


def _aggregate(rows: List[dict], keys: Sequence[str]) -> dict:
    out = {}
    for k in keys:
        vals = [r[k] for r in rows if isinstance(r.get(k), (int, float))]
        if vals:
            out[k] = {"mean": float(np.mean(vals)), "median": float(np.median(vals))}
    return out


def _oracle_rows(ds: Dataset, db: ImageDB, models: PairwiseModels, store: MRStore, timings: bool):
    """Perfect filtering: the candidates are exactly the other images of q's graph."""
    rows = []
    for j in ds.journals:
        q = pick_query(j)
        cands = [n for n in j.graph.sorted_nodes() if n != q]
        idx = DescriptorIndex(DIM, capacity=max(len(cands), 1))
        # rank the true candidates by descriptor similarity to keep the pipeline path unchanged
        if cands:
            idx.insert_many(cands, np.stack([extract_global(db(n)).vector for n in cands]))
        g, st = run_pipeline(idx, store, db, db(q), max(len(cands), 1), models)
        score = graph_overlap(g, reference_graph(j, q))
        rows.append({"graph_id": j.graph_id, "query": q, **_score_row(score), **st.to_json(timings)})
    return rows


def _disturb_rows(ds: Dataset, db: ImageDB, models: PairwiseModels, seed: int, fraction: float, timings: bool):
    """Each graph's images plus ~10% distractors, built with the all-pairs
    algorithm and with the spanning-tree baseline."""
    rows = []
    pool = list(ds.distractors)
    for gi, j in enumerate(ds.journals):
        nodes = j.graph.sorted_nodes()
        n_d = min(len(pool), max(1, int(math.ceil(fraction * len(nodes)))))
        rng = np.random.default_rng([seed, gi, 0xD157])
        picked = sorted(int(x) for x in rng.choice(pool, size=n_d, replace=False)) if n_d else []
        cand_ids = nodes + picked
        cands = [db(i) for i in cand_ids]
        g, st = build_graph_full(cands, models)
        mst = build_graph_mst_baseline(cands)
        ref = j.graph.copy()
        excluded = sum(1 for d in picked if d not in g.nodes)
        mst_excluded = sum(1 for d in picked if mst.degree(d) == 0)
        s = graph_overlap(g, ref)
        sm = graph_overlap(mst, ref)
        rows.append({
            "graph_id": j.graph_id, "candidates": len(cand_ids), "distractors": len(picked),
            "distractors_excluded": excluded, "mst_distractors_excluded": mst_excluded,
            **_score_row(s), "mst_vo": sm.vo, "mst_eo": sm.eo, "mst_veo": sm.veo,
            **st.to_json(timings),
        })
    return rows


def _end_to_end_rows(ds: Dataset, db: ImageDB, models: PairwiseModels, store: MRStore, ks: Sequence[int],
                     k: int, db_size: Optional[int], seed: int, timings: bool):
    real_ids = db.ids()
    idx = build_index(db, real_ids)
    if db_size:
        pad_index(idx, db_size, seed)
    rows = []
    for j in ds.journals:
        q = pick_query(j)
        qimg = db(q)
        qd = extract_global(qimg)
        truth = recall_truth(j, q)
        kk = max(max(ks), k)
        hits = [i for i, _ in idx.top_k(qd, kk + 1) if i != q][:kk]
        row = {"graph_id": j.graph_id, "query": q, "truth": len(truth)}
        for K in ks:
            top = hits[:K]
            traced = store.trace(top).nodes - set(top) - {q}
            row[f"R@{K}"] = recall_at_k(top, truth, K)
            expanded = top + sorted(traced)
            row[f"R@{K}_traced"] = recall_at_k(expanded, truth, len(expanded)) if expanded else recall_at_k([], truth, 1)
        g, st = run_pipeline(idx, store, db, qimg, k, models, query_descriptor=qd)
        g0, _ = run_pipeline(idx, store, db, qimg, k, models, query_descriptor=qd, trace=False)
        ref = reference_graph(j, q)
        row.update(_score_row(graph_overlap(g, ref)))
        s0 = graph_overlap(g0, ref)
        row["veo_directed_no_trace"] = s0.veo_directed
        row.update(st.to_json(timings))
        rows.append(row)
    return rows


def run_benchmark(dataset: Union[str, Path, Dataset], mode: str, ks: Sequence[int] = DEFAULT_KS, k: int = 10,
                  models: Union[str, PairwiseModels] = "oracle", db_sizes: Sequence[int] = (),
                  seed: int = 42, cfg: ModelConfig = ModelConfig(), timings: bool = False,
                  distractor_fraction: float = 0.1) -> dict:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    ds = dataset if isinstance(dataset, Dataset) else load_dataset(dataset)
    db = ImageDB(ds.root, ds.manifest)
    m = make_models(models, ds.journals, cfg, ds.distractors)
    store = journal_store(ds.journals)
    report = {"mode": mode, "models": m.name, "k": k, "ks": list(ks), "seed": seed,
              "graphs": len(ds.journals), "skipped": 0}
    if mode == "oracle":
        rows = _oracle_rows(ds, db, m, store, timings)
        keys = ["vo", "eo", "veo", "eo_directed", "veo_directed", "relationship_calls", "direction_calls"]
    elif mode == "disturb":
        rows = _disturb_rows(ds, db, m, seed, distractor_fraction, timings)
        keys = ["vo", "eo", "veo", "eo_directed", "veo_directed", "mst_vo", "mst_eo", "mst_veo",
                "relationship_calls", "direction_calls"]
        nd = sum(r["distractors"] for r in rows)
        report["distractor_exclusion"] = sum(r["distractors_excluded"] for r in rows) / nd if nd else 1.0
        report["mst_distractor_exclusion"] = sum(r["mst_distractors_excluded"] for r in rows) / nd if nd else 1.0
    else:
        rows = []
        sizes = list(db_sizes) or [None]
        for size in sizes:
            for r in _end_to_end_rows(ds, db, m, store, ks, k, size, seed, timings):
                r["db_size"] = size if size else len(db.paths)
                rows.append(r)
        keys = [f"R@{K}" for K in ks] + [f"R@{K}_traced" for K in ks] + [
            "vo", "eo", "veo", "eo_directed", "veo_directed", "veo_directed_no_trace",
            "relationship_calls", "direction_calls", "similarity_evals"]
    if timings:
        keys += ["filter_time", "trace_time", "construct_time"]
    report["rows"] = rows
    report["aggregate"] = _aggregate(rows, keys)
    report["flagged_rows"] = sum(1 for r in rows if r.get("flags"))
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv(report: dict) -> str:
    rows = report["rows"]
    cols: List[str] = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in cols})
    return buf.getvalue()


def write_report(report: dict, path) -> Tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(report), encoding="utf-8")
    csv_path = path.with_suffix(".csv")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    return path, csv_path
