"""Domain types and the small amount of directed-graph machinery the pipeline needs."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

import numpy as np

ImageId = int

DEFAULT_CYCLE_CAP = 16


class ProvGraphError(Exception):
    """Base class; ``kind`` is the machine-readable error name."""

    kind = "Error"


class SelfLoop(ProvGraphError):
    kind = "SelfLoop"


class InconsistentJournal(ProvGraphError):
    kind = "InconsistentJournal"


class JournalParseError(ProvGraphError):
    kind = "JournalParseError"

    def __init__(self, msg: str, line: int, column: int, offset: int):
        super().__init__(f"{msg} (line {line}, column {column}, offset {offset})")
        self.line = line
        self.column = column
        self.offset = offset


class ImageFormat(str, enum.Enum):
    JPEG = "JPEG"
    PNG = "PNG"
    OTHER = "OTHER"


@dataclass
class ImageRecord:
    id: ImageId
    pixels: np.ndarray  # (height, width, 3) uint8
    format: ImageFormat = ImageFormat.OTHER
    source_path: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be HxWx3 uint8, got {px.dtype} {px.shape}")
        if px.shape[0] < 8 or px.shape[1] < 8:
            raise ValueError(f"image must be at least 8x8, got {px.shape[1]}x{px.shape[0]}")
        self.pixels = np.ascontiguousarray(px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray, fmt: Optional[ImageFormat] = None) -> "ImageRecord":
        return ImageRecord(self.id, pixels, self.format if fmt is None else fmt, self.source_path)


class MREdge(NamedTuple):
    """``dst`` was modified from ``src``."""

    src: ImageId
    dst: ImageId


@dataclass
class ValidationReport:
    cycles: List[List[ImageId]]
    orphan_nodes: Set[ImageId]
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return not self.cycles


class ProvenanceGraph:
    """Node set plus directed edge set. Cycles are allowed; see :func:`graph_validate`."""

    __slots__ = ("_nodes", "_edges")

    def __init__(self, nodes: Iterable[ImageId] = (), edges: Iterable[Tuple[int, int]] = ()):
        self._nodes: Set[ImageId] = set()
        self._edges: Set[MREdge] = set()
        for n in nodes:
            self.add_node(n)
        for e in edges:
            self.add_edge(MREdge(*e))

    @property
    def nodes(self) -> Set[ImageId]:
        return self._nodes

    @property
    def edges(self) -> Set[MREdge]:
        return self._edges

    def add_node(self, n: ImageId) -> "ProvenanceGraph":
        self._nodes.add(int(n))
        return self

    def add_edge(self, e: MREdge) -> "ProvenanceGraph":
        e = MREdge(int(e[0]), int(e[1]))
        if e.src == e.dst:
            raise SelfLoop(f"self-loop on {e.src}")
        self._nodes.add(e.src)
        self._nodes.add(e.dst)
        self._edges.add(e)
        return self

    def sorted_nodes(self) -> List[ImageId]:
        return sorted(self._nodes)

    def sorted_edges(self) -> List[MREdge]:
        return sorted(self._edges)

    def copy(self) -> "ProvenanceGraph":
        g = ProvenanceGraph()
        g._nodes = set(self._nodes)
        g._edges = set(self._edges)
        return g

    def successors(self) -> Dict[ImageId, List[ImageId]]:
        out: Dict[ImageId, List[ImageId]] = {n: [] for n in self._nodes}
        for s, d in self.sorted_edges():
            out[s].append(d)
        return out

    def degree(self, n: ImageId) -> int:
        return sum(1 for e in self._edges if n in e)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProvenanceGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __repr__(self) -> str:
        return f"ProvenanceGraph(nodes={self.sorted_nodes()}, edges={[tuple(e) for e in self.sorted_edges()]})"


def graph_add_edge(g: ProvenanceGraph, e: MREdge) -> ProvenanceGraph:
    return g.add_edge(e)


def graph_validate(g: ProvenanceGraph, cycle_cap: int = DEFAULT_CYCLE_CAP) -> ValidationReport:
    """Report elementary cycles (at most ``cycle_cap``) and degree-0 nodes.

    Cycles are enumerated with Johnson-style search rooted at each node in
    ascending order, only visiting nodes greater than the root, so each
    elementary cycle is reported once, starting from its smallest node.
    """
    touched = {n for e in g.edges for n in e}
    orphans = set(g.nodes) - touched
    succ = g.successors()
    cycles: List[List[ImageId]] = []
    truncated = False
    for root in sorted(succ):
        if truncated:
            break
        stack = [(root, iter(succ[root]))]
        path = [root]
        on_path = {root}
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if nxt == root:
                if len(cycles) >= cycle_cap:
                    truncated = True
                    break
                cycles.append(list(path))
            elif nxt > root and nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                stack.append((nxt, iter(succ[nxt])))
    return ValidationReport(cycles=cycles, orphan_nodes=orphans, truncated=truncated)


def graph_to_dot(g: ProvenanceGraph, name: str = "provenance", labels: Optional[Dict[ImageId, str]] = None) -> str:
    lines = [f'digraph "{name}" {{']
    for n in g.sorted_nodes():
        if labels and n in labels:
            lab = labels[n].replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  {n} [label="{lab}"];')
        else:
            lines.append(f"  {n};")
    for e in g.sorted_edges():
        lines.append(f"  {e.src} -> {e.dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ModificationOp:
    name: str
    params: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "params": {k: self.params[k] for k in sorted(self.params)}}


@dataclass
class Journal:
    graph_id: str
    graph: ProvenanceGraph
    node_files: Dict[ImageId, str]
    edge_ops: Dict[MREdge, List[ModificationOp]]
    save_quality: Dict[ImageId, int] = field(default_factory=dict)

    def check(self) -> None:
        if set(self.edge_ops) != set(self.graph.edges):
            extra = set(self.edge_ops) - set(self.graph.edges)
            missing = set(self.graph.edges) - set(self.edge_ops)
            raise InconsistentJournal(
                f"edge_ops keys differ from edges: extra={sorted(extra)} missing={sorted(missing)}"
            )
        if set(self.node_files) != set(self.graph.nodes):
            raise InconsistentJournal("node_files keys differ from graph nodes")
        for n, q in self.save_quality.items():
            if n not in self.graph.nodes:
                raise InconsistentJournal(f"save_quality for unknown node {n}")
            if not 1 <= q <= 100:
                raise InconsistentJournal(f"save_quality {q} out of range for node {n}")
        report = graph_validate(self.graph)
        if report.cycles:
            raise InconsistentJournal(f"journal graph has cycles: {report.cycles}")

    def to_json(self) -> dict:
        nodes = []
        for n in self.graph.sorted_nodes():
            entry = {"id": n, "file": self.node_files[n]}
            if n in self.save_quality:
                entry["save_quality"] = int(self.save_quality[n])
            nodes.append(entry)
        edges = [
            {"src": e.src, "dst": e.dst, "ops": [op.to_json() for op in self.edge_ops[e]]}
            for e in self.graph.sorted_edges()
        ]
        return {"graph_id": self.graph_id, "nodes": nodes, "edges": edges}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "Journal":
        try:
            graph_id = str(obj["graph_id"])
            g = ProvenanceGraph()
            files: Dict[ImageId, str] = {}
            quality: Dict[ImageId, int] = {}
            for nd in obj["nodes"]:
                nid = int(nd["id"])
                g.add_node(nid)
                files[nid] = str(nd["file"])
                if nd.get("save_quality") is not None:
                    quality[nid] = int(nd["save_quality"])
            ops: Dict[MREdge, List[ModificationOp]] = {}
            for ed in obj["edges"]:
                e = MREdge(int(ed["src"]), int(ed["dst"]))
                for n in e:
                    if n not in g.nodes:
                        raise InconsistentJournal(f"edge {tuple(e)} references unknown node {n}")
                g.add_edge(e)
                ops[e] = [
                    ModificationOp(str(o["name"]), {str(k): v for k, v in o.get("params", {}).items()})
                    for o in ed.get("ops", [])
                ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InconsistentJournal(f"malformed journal object: {exc!r}") from exc
        j = cls(graph_id, g, files, ops, quality)
        j.check()
        return j

    @classmethod
    def loads(cls, text: str) -> "Journal":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise JournalParseError(exc.msg, exc.lineno, exc.colno, exc.pos) from exc
        if not isinstance(obj, dict):
            raise JournalParseError("top-level value must be an object", 1, 1, 0)
        return cls.from_json(obj)


def journal_write(journal: Journal, path) -> None:
    journal.check()
    Path(path).write_text(journal.dumps(), encoding="utf-8")


def journal_read(path) -> Journal:
    return Journal.loads(Path(path).read_text(encoding="utf-8"))
