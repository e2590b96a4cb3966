"""Provenance graph construction.

``build_graph_full`` is the quadratic all-pairs builder; ``run_pipeline`` is the
linear query pipeline (filter, query-only pairwise analysis, MR tracing);
``build_graph_mst_baseline`` is the classic spanning-tree comparison that
cannot drop unrelated images.
"""

from __future__ import annotations

import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import ImageId, ImageRecord, MREdge, ProvenanceGraph
from .descriptor import GlobalDescriptor, extract_global
from .graphstore import MRStore
from .index import DescriptorIndex
from .pairwise.direction import Direction, DirectionVerdict
from .pairwise.models import PairwiseModels
from .pairwise.relationship import PairVerdict

Loader = Callable[[ImageId], ImageRecord]


@dataclass
class PipelineStats:
    relationship_calls: int = 0
    direction_calls: int = 0
    similarity_evals: int = 0
    filter_time: float = 0.0
    trace_time: float = 0.0
    construct_time: float = 0.0
    direction_ties: int = 0

    def to_json(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            for k in ("filter_time", "trace_time", "construct_time"):
                d.pop(k)
        return d


class CountingModels(PairwiseModels):
    """Wraps a model pair and counts every call; the counters are the
    complexity contract's ground truth."""

    def __init__(self, inner: PairwiseModels, stats: PipelineStats):
        self.inner = inner
        self.stats = stats
        self.pairs: List[Tuple[str, ImageId, ImageId]] = []
        self._lock = threading.Lock()

    @property
    def name(self):
        return self.inner.name

    def relationship(self, a: ImageRecord, b: ImageRecord) -> PairVerdict:
        with self._lock:
            self.stats.relationship_calls += 1
            self.pairs.append(("relationship", a.id, b.id))
        return self.inner.relationship(a, b)

    def direction(self, a: ImageRecord, b: ImageRecord) -> DirectionVerdict:
        with self._lock:
            self.stats.direction_calls += 1
            self.pairs.append(("direction", a.id, b.id))
        v = self.inner.direction(a, b)
        if v.tie:
            with self._lock:
                self.stats.direction_ties += 1
        return v


def _oriented(a: ImageId, b: ImageId, v: DirectionVerdict) -> MREdge:
    return MREdge(a, b) if v.direction is Direction.AtoB else MREdge(b, a)


def build_graph_full(candidates: Sequence[ImageRecord], models: PairwiseModels,
                     stats: Optional[PipelineStats] = None) -> Tuple[ProvenanceGraph, PipelineStats]:
    """All-pairs construction.

    Each image links to its most confident related partner (ties go to the
    later partner in scan order); an unordered pair is analysed once and
    directed once, first decision kept. Images with no related partner are
    left out.
    """
    if len(candidates) < 2:
        raise ValueError("build_graph_full needs at least two candidates")
    stats = stats if stats is not None else PipelineStats()
    m = CountingModels(models, stats)
    t0 = time.perf_counter()
    n = len(candidates)
    cache: Dict[Tuple[int, int], PairVerdict] = {}
    g = ProvenanceGraph()
    decided = set()
    for i in range(n):
        best_j, best_p = -1, 0.0
        for j in range(n):
            if j == i:
                continue
            key = (i, j) if i < j else (j, i)
            v = cache.get(key)
            if v is None:
                v = m.relationship(candidates[key[0]], candidates[key[1]])
                cache[key] = v
            if v.related and v.confidence >= best_p:
                best_j, best_p = j, v.confidence
        if best_j < 0:
            continue
        key = (i, best_j) if i < best_j else (best_j, i)
        if key in decided:
            continue
        decided.add(key)
        a, b = candidates[i], candidates[best_j]
        g.add_edge(_oriented(a.id, b.id, m.direction(a, b)))
    stats.construct_time += time.perf_counter() - t0
    return g, stats


def run_pipeline(index: DescriptorIndex, store: MRStore, db: Loader, q: ImageRecord, k: int,
                 models: PairwiseModels, query_descriptor: Optional[GlobalDescriptor] = None,
                 trace: bool = True) -> Tuple[ProvenanceGraph, PipelineStats]:
    """Linear pipeline around one query image.

    1. top-k filtering by global descriptor (the query's own id is skipped);
    2. relationship and direction between q and each candidate only;
    3. MR tracing from q and the accepted candidates, merging whatever the
       store knows about them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    stats = PipelineStats()
    m = CountingModels(models, stats)
    g = ProvenanceGraph([q.id])

    t0 = time.perf_counter()
    qd = query_descriptor if query_descriptor is not None else extract_global(q)
    evals0 = index.similarity_evals
    hits = index.top_k(qd, k + 1) if len(index) else []
    cand = [i for i, _ in hits if i != q.id][:k]
    stats.similarity_evals = index.similarity_evals - evals0
    stats.filter_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    accepted = [q.id]
    for cid in cand:
        img = db(cid)
        if not m.relationship(q, img).related:
            continue
        g.add_edge(_oriented(q.id, cid, m.direction(q, img)))
        accepted.append(cid)
    stats.construct_time = time.perf_counter() - t0

    if trace:
        t0 = time.perf_counter()
        traced = store.trace(accepted)
        for n in traced.nodes:
            g.add_node(n)
        for e in traced.edges:
            g.add_edge(e)
        stats.trace_time = time.perf_counter() - t0
    return g, stats


def build_graph_mst_baseline(candidates: Sequence[ImageRecord],
                             descriptors: Optional[Sequence[GlobalDescriptor]] = None) -> ProvenanceGraph:
    """Kruskal spanning tree over 1 - cosine similarity; undirected edges are
    stored as (min id, max id). Every candidate ends up connected."""
    if len(candidates) < 2:
        raise ValueError("MST baseline needs at least two candidates")
    if descriptors is None:
        descriptors = [extract_global(c) for c in candidates]
    ids = [c.id for c in candidates]
    return mst_from_vectors(ids, np.stack([d.vector for d in descriptors]))


def mst_from_vectors(ids: Sequence[ImageId], vectors: np.ndarray) -> ProvenanceGraph:
    n = len(ids)
    dis = 1.0 - np.clip(vectors @ vectors.T, -1.0, 1.0)
    iu, ju = np.triu_indices(n, 1)
    w = dis[iu, ju]
    # Kruskal: stable sort by (weight, i, j) so identical descriptors go first and ties are reproducible
    order = np.lexsort((ju, iu, w))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    g = ProvenanceGraph(ids)
    for e in order:
        a, b = find(iu[e]), find(ju[e])
        if a == b:
            continue
        parent[a] = b
        x, y = ids[iu[e]], ids[ju[e]]
        g.add_edge(MREdge(min(x, y), max(x, y)))
        if len(g.edges) == n - 1:
            break
    return g
