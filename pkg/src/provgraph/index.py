"""Exact top-k cosine search over global descriptors, with ``IPDX`` persistence.

File layout (little-endian)::

    b"IPDX" | version u32 | dim u16 | count u64 | count x (id u64, dim x f32)
"""

from __future__ import annotations

import os
import struct
import threading
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .core import ImageId, ProvGraphError
from .descriptor import DIM, GlobalDescriptor

MAGIC = b"IPDX"
VERSION = 1
_HEADER = struct.Struct("<4sIHQ")
NORM_TOL = 1e-6


class DuplicateId(ProvGraphError):
    kind = "DuplicateId"


class BadMagic(ProvGraphError):
    kind = "BadMagic"


class IndexFormatError(ProvGraphError):
    kind = "IndexFormatError"

    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at byte offset {offset}")
        self.offset = offset


class DescriptorIndex:
    """Append-only flat index. Queries scan every entry once.

    Storage is a pair of growable arrays; ``len`` is published only after an
    entry is fully written so concurrent readers never see a partial row.
    """

    def __init__(self, dim: int = DIM, capacity: int = 1024):
        self.dim = int(dim)
        self._ids = np.zeros(capacity, dtype=np.uint64)
        self._vecs = np.zeros((capacity, self.dim), dtype=np.float32)
        self._n = 0
        self._known: set = set()
        self._lock = threading.Lock()
        self.similarity_evals = 0

    def __len__(self) -> int:
        return self._n

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs[: self._n]

    def _grow(self, need: int) -> None:
        cap = self._ids.shape[0]
        if need <= cap:
            return
        new_cap = max(need, cap * 2)
        ids = np.zeros(new_cap, dtype=np.uint64)
        vecs = np.zeros((new_cap, self.dim), dtype=np.float32)
        ids[: self._n] = self._ids[: self._n]
        vecs[: self._n] = self._vecs[: self._n]
        self._ids, self._vecs = ids, vecs

    def _check_vec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.dim:
            raise ValueError(f"descriptor dimension {v.shape} does not match index dim {self.dim}")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValueError("descriptor is not unit-norm")
        return v

    def insert(self, image_id: ImageId, d: GlobalDescriptor) -> None:
        v = self._check_vec(d.vector)
        with self._lock:
            if image_id in self._known:
                raise DuplicateId(f"id {image_id} already indexed")
            self._grow(self._n + 1)
            self._ids[self._n] = image_id
            self._vecs[self._n] = v
            self._known.add(int(image_id))
            self._n += 1

    def insert_many(self, ids, vectors) -> None:
        """Bulk append of unit rows; same checks as :meth:`insert`."""
        ids = np.asarray(ids, dtype=np.uint64)
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim or vectors.shape[0] != ids.shape[0]:
            raise ValueError("ids/vectors shape mismatch")
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL * 10):
            raise ValueError("descriptors are not unit-norm")
        with self._lock:
            new = set(ids.tolist())
            if len(new) != ids.shape[0] or new & self._known:
                raise DuplicateId("duplicate ids in bulk insert")
            self._grow(self._n + ids.shape[0])
            self._ids[self._n : self._n + ids.shape[0]] = ids
            self._vecs[self._n : self._n + ids.shape[0]] = vectors
            self._known |= new
            self._n += ids.shape[0]

    def __contains__(self, image_id) -> bool:
        return int(image_id) in self._known

    def get(self, image_id: ImageId) -> GlobalDescriptor:
        pos = np.nonzero(self.ids == np.uint64(image_id))[0]
        if pos.size == 0:
            raise KeyError(image_id)
        return GlobalDescriptor(self._vecs[pos[0]].astype(np.float64))

    def scores(self, q: GlobalDescriptor) -> np.ndarray:
        """Cosine of ``q`` with every entry: one pass, ``dim`` multiply-adds each."""
        qv = np.asarray(q.vector, dtype=np.float32)
        if qv.shape[0] != self.dim:
            raise ValueError(f"query dimension {qv.shape[0]} does not match index dim {self.dim}")
        n = self._n
        self.similarity_evals += n
        return self._vecs[:n] @ qv

    def top_k(self, q: GlobalDescriptor, k: int) -> List[Tuple[ImageId, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        n = self._n
        if n == 0:
            return []
        s = self.scores(q)
        ids = self._ids[:n]
        kk = min(k, n)
        if kk < n:
            # Candidates: everything scoring at least the kk-th best, so ties at the
            # cut-off are resolved by id below rather than by partition order.
            cut = np.partition(s, n - kk)[n - kk]
            cand = np.nonzero(s >= cut)[0]
        else:
            cand = np.arange(n)
        order = np.lexsort((ids[cand], -s[cand]))[:kk]
        sel = cand[order]
        return [(int(ids[i]), float(s[i])) for i in sel]

    def save(self, path) -> None:
        n = self._n
        rec = np.zeros(n, dtype=np.dtype([("id", "<u8"), ("v", "<f4", (self.dim,))]))
        rec["id"] = self._ids[:n]
        rec["v"] = self._vecs[:n]
        tmp = Path(str(path) + ".tmp")
        with open(tmp, "wb") as f:
            f.write(_HEADER.pack(MAGIC, VERSION, self.dim, n))
            f.write(rec.tobytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "DescriptorIndex":
        data = Path(path).read_bytes()
        if len(data) < 4 or data[:4] != MAGIC:
            raise BadMagic(f"bad magic {data[:4]!r} at byte offset 0")
        if len(data) < _HEADER.size:
            raise IndexFormatError("truncated header", len(data))
        _, version, dim, count = _HEADER.unpack_from(data, 0)
        if version != VERSION:
            raise IndexFormatError(f"unsupported version {version}", 4)
        rec_t = np.dtype([("id", "<u8"), ("v", "<f4", (dim,))])
        need = _HEADER.size + count * rec_t.itemsize
        if len(data) < need:
            full = (len(data) - _HEADER.size) // rec_t.itemsize
            raise IndexFormatError(
                f"truncated: expected {count} records, found {full} complete", _HEADER.size + full * rec_t.itemsize
            )
        if len(data) > need:
            raise IndexFormatError("trailing bytes after last record", need)
        rec = np.frombuffer(data, dtype=rec_t, count=count, offset=_HEADER.size)
        idx = cls(dim, capacity=max(count, 1))
        if count:
            idx._ids[:count] = rec["id"]
            idx._vecs[:count] = rec["v"]
            idx._known = set(rec["id"].tolist())
            if len(idx._known) != count:
                raise DuplicateId("duplicate ids in index file")
        idx._n = count
        return idx


def index_insert(idx: DescriptorIndex, image_id: ImageId, d: GlobalDescriptor) -> None:
    idx.insert(image_id, d)


def index_top_k(idx: DescriptorIndex, q: GlobalDescriptor, k: int):
    return idx.top_k(q, k)


def index_save(idx: DescriptorIndex, path) -> None:
    idx.save(path)


def index_load(path) -> DescriptorIndex:
    return DescriptorIndex.load(path)
