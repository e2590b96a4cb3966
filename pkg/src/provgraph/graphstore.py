"""Persistent store of known modification-relationship edges.

The on-disk edge log is append-only::

    b"IPMR" | version u32 LE | (src u64 LE, dst u64 LE) * n

Tracing from a set of seeds returns the seeds, all of their ancestors and
all of their descendants, plus the stored edges inside each ancestor and
descendant closure. Siblings reached only through a shared parent are not
returned.
"""

from __future__ import annotations

import os
import struct
import threading
from collections import deque
from pathlib import Path
from typing import Dict, Iterable, Optional, Set

import numpy as np

from .core import ImageId, MREdge, ProvenanceGraph, ProvGraphError, SelfLoop

MAGIC = b"IPMR"
VERSION = 1
_HEADER = struct.Struct("<4sI")
_RECORD = np.dtype([("src", "<u8"), ("dst", "<u8")])


class EdgeLogError(ProvGraphError):
    kind = "EdgeLogError"

    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at byte offset {offset}")
        self.offset = offset


class MRStore:
    def __init__(self, path=None):
        self.forward: Dict[ImageId, Set[ImageId]] = {}
        self.backward: Dict[ImageId, Set[ImageId]] = {}
        self.path: Optional[Path] = Path(path) if path is not None else None
        self._pending: list = []
        self._lock = threading.RLock()
        # Touch counters for the last trace: nodes dequeued and edges examined.
        self.last_trace_nodes = 0
        self.last_trace_edges = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self.forward.values())

    def edges(self):
        for s in sorted(self.forward):
            for d in sorted(self.forward[s]):
                yield MREdge(s, d)

    def successors(self, n: ImageId) -> Set[ImageId]:
        return self.forward.get(n, set())

    def predecessors(self, n: ImageId) -> Set[ImageId]:
        return self.backward.get(n, set())

    def _insert(self, s: int, d: int) -> bool:
        fw = self.forward.setdefault(s, set())
        if d in fw:
            return False
        # backward first so a concurrent forward walk never sees an edge without its transpose
        self.backward.setdefault(d, set()).add(s)
        fw.add(d)
        return True

    def add_edge(self, e: MREdge) -> bool:
        """Insert ``e``; returns False when it was already present."""
        s, d = int(e[0]), int(e[1])
        if s == d:
            raise SelfLoop(f"self-loop on {s}")
        with self._lock:
            added = self._insert(s, d)
            if added:
                self._pending.append((s, d))
            return added

    def add_edges(self, edges: Iterable[MREdge]) -> int:
        return sum(self.add_edge(e) for e in edges)

    def trace(self, seeds: Iterable[ImageId]) -> ProvenanceGraph:
        g = ProvenanceGraph()
        touched_nodes = 0
        touched_edges = 0
        seeds = sorted({int(s) for s in seeds})
        for s in seeds:
            g.add_node(s)
        for adj, forward in ((self.backward, False), (self.forward, True)):
            # one visited set per direction, shared across seeds: a node's
            # up-set (down-set) is fully contained in that of any descendant (ancestor)
            visited: Set[ImageId] = set(seeds)
            queue = deque(seeds)
            while queue:
                n = queue.popleft()
                touched_nodes += 1
                for m in sorted(adj.get(n, ())):
                    touched_edges += 1
                    g.add_edge(MREdge(n, m) if forward else MREdge(m, n))
                    if m not in visited:
                        visited.add(m)
                        queue.append(m)
        self.last_trace_nodes = touched_nodes
        self.last_trace_edges = touched_edges
        return g

    # persistence

    def save(self, path=None) -> None:
        """Append edges added since the last save; writes a full log for a new file."""
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ValueError("no path given for store")
        with self._lock:
            fresh = self.path is None or target != self.path or not target.exists()
            if fresh:
                rec = np.array([tuple(e) for e in self.edges()], dtype=_RECORD)
                tmp = Path(str(target) + ".tmp")
                with open(tmp, "wb") as f:
                    f.write(_HEADER.pack(MAGIC, VERSION))
                    f.write(rec.tobytes())
                os.replace(tmp, target)
            elif self._pending:
                rec = np.array(self._pending, dtype=_RECORD)
                with open(target, "ab") as f:
                    f.write(rec.tobytes())
            self._pending = []
            self.path = target

    @classmethod
    def load(cls, path) -> "MRStore":
        data = Path(path).read_bytes()
        if len(data) < 4 or data[:4] != MAGIC:
            raise EdgeLogError(f"bad magic {data[:4]!r}", 0)
        if len(data) < _HEADER.size:
            raise EdgeLogError("truncated header", len(data))
        _, version = _HEADER.unpack_from(data, 0)
        if version != VERSION:
            raise EdgeLogError(f"unsupported version {version}", 4)
        body = len(data) - _HEADER.size
        if body % _RECORD.itemsize:
            full = body // _RECORD.itemsize
            raise EdgeLogError("truncated record", _HEADER.size + full * _RECORD.itemsize)
        rec = np.frombuffer(data, dtype=_RECORD, offset=_HEADER.size)
        store = cls()
        for i, (s, d) in enumerate(zip(rec["src"].tolist(), rec["dst"].tolist())):
            if s == d:
                raise EdgeLogError(f"self-loop record {s}->{d}", _HEADER.size + i * _RECORD.itemsize)
            store._insert(s, d)
        store.path = Path(path)
        return store


def store_add_edge(s: MRStore, e: MREdge) -> None:
    s.add_edge(e)


def store_trace(s: MRStore, seeds) -> ProvenanceGraph:
    return s.trace(seeds)


def store_save(s: MRStore, path) -> None:
    s.save(path)


def store_load(path) -> MRStore:
    return MRStore.load(path)
