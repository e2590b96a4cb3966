"""Synthetic provenance datasets.

Every randomised choice is written into the operation parameters, so a
journal alone is enough to replay an edge. Per-graph RNGs are derived from
``(master_seed, graph_index)`` which makes generation order-independent.

Operation parameter ranges
--------------------------

=================  ==========================================================
op                 params (sampled range)
=================  ==========================================================
color_jitter       r, g, b channel gains in [0.85, 1.15]
contrast           factor in [0.7, 1.3]
brightness         delta in [-0.3, 0.3] (fraction of full scale)
saturation         factor in [0.5, 1.5]
grayscale          (none)
perspective_warp   strength in [0.02, 0.10], seed
aspect_ratio       ratio in [0.75, 1.33] (width multiplier)
pad                fraction in [0.05, 0.20], value in [0, 255]
scale              factor in [0.6, 1.4]
hflip, vflip       (none)
rotate             degrees in [-30, 30]
pixelize           ratio in [0.2, 0.5]
quality_encode     quality in [30, 90]
gaussian_noise     sigma in [2, 12], seed
sharpen            amount in [0.3, 1.5]
opacity            alpha in [0.5, 0.9], value in [0, 255]
shuffle            tiles in {2, 3, 4}, seed
crop               area in [0.6, 0.95], x, y in [0, 1]
tamper_splice      frac in [0.15, 0.35], sx, sy, dx, dy in [0, 1], donor_seed
meme_text          height in [0.1, 0.25], value in [0, 255], top in {0, 1}, seed
=================  ==========================================================
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFilter
from scipy import ndimage

from .core import (
    ImageFormat,
    ImageId,
    ImageRecord,
    Journal,
    MREdge,
    ModificationOp,
    ProvenanceGraph,
    ProvGraphError,
    journal_read,
    journal_write,
)
from .imaging import decode_bytes, encode_jpeg, jpeg_roundtrip, luminance

MIN_SIDE = 96
SEED_SIZE = 192


class UnknownOperation(ProvGraphError):
    kind = "UnknownOperation"


# name -> {param: (low, high, integer?)}
CATALOG: Dict[str, Dict[str, Tuple[float, float, bool]]] = {
    "color_jitter": {"r": (0.85, 1.15, False), "g": (0.85, 1.15, False), "b": (0.85, 1.15, False)},
    "contrast": {"factor": (0.7, 1.3, False)},
    "brightness": {"delta": (-0.3, 0.3, False)},
    "saturation": {"factor": (0.5, 1.5, False)},
    "grayscale": {},
    "perspective_warp": {"strength": (0.02, 0.10, False), "seed": (0, 2**31 - 1, True)},
    "aspect_ratio": {"ratio": (0.75, 1.33, False)},
    "pad": {"fraction": (0.05, 0.20, False), "value": (0, 255, True)},
    "scale": {"factor": (0.6, 1.4, False)},
    "hflip": {},
    "vflip": {},
    "rotate": {"degrees": (-30.0, 30.0, False)},
    "pixelize": {"ratio": (0.2, 0.5, False)},
    "quality_encode": {"quality": (30, 90, True)},
    "gaussian_noise": {"sigma": (2.0, 12.0, False), "seed": (0, 2**31 - 1, True)},
    "sharpen": {"amount": (0.3, 1.5, False)},
    "opacity": {"alpha": (0.5, 0.9, False), "value": (0, 255, True)},
    "shuffle": {"tiles": (2, 4, True), "seed": (0, 2**31 - 1, True)},
    "crop": {"area": (0.6, 0.95, False), "x": (0.0, 1.0, False), "y": (0.0, 1.0, False)},
    "tamper_splice": {
        "frac": (0.15, 0.35, False),
        "sx": (0.0, 1.0, False),
        "sy": (0.0, 1.0, False),
        "dx": (0.0, 1.0, False),
        "dy": (0.0, 1.0, False),
        "donor_seed": (0, 2**31 - 1, True),
    },
    "meme_text": {
        "height": (0.1, 0.25, False),
        "value": (0, 255, True),
        "top": (0, 1, True),
        "seed": (0, 2**31 - 1, True),
    },
}
UNRELATED = "unrelated"
SCENARIOS = tuple(CATALOG) + (UNRELATED,)

PHOTOMETRIC_OPS = ("color_jitter", "contrast", "brightness", "saturation")
BENIGN_OPS = PHOTOMETRIC_OPS + ("sharpen",)
DEFAULT_OP_POOL = tuple(op for op in CATALOG if op != "tamper_splice")


def sample_op(name: str, rng: np.random.Generator, **fixed) -> ModificationOp:
    if name not in CATALOG:
        raise UnknownOperation(f"unknown operation {name!r}")
    params = {}
    for key, (lo, hi, integer) in CATALOG[name].items():
        if key in fixed:
            params[key] = fixed[key]
        elif integer:
            params[key] = int(rng.integers(int(lo), int(hi) + 1))
        else:
            params[key] = round(float(rng.uniform(lo, hi)), 6)
    return ModificationOp(name, params)


def check_op(op: ModificationOp) -> None:
    if op.name not in CATALOG:
        raise UnknownOperation(f"unknown operation {op.name!r}")
    expected = set(CATALOG[op.name])
    if set(op.params) != expected:
        raise ValueError(f"{op.name} expects params {sorted(expected)}, got {sorted(op.params)}")


# procedural seed images


def _value_noise(rng: np.random.Generator, h: int, w: int, octaves: int = 5) -> np.ndarray:
    out = np.zeros((h, w))
    amp = 1.0
    for o in range(octaves):
        cells = 3 * 2**o
        grid = rng.standard_normal((cells + 3, cells + 3))
        up = ndimage.zoom(grid, (h / cells, w / cells), order=3, mode="nearest")
        out += amp * up[:h, :w]
        amp *= 0.5
    return out / (np.abs(out).max() + 1e-12)


def procedural_seed(seed: int, size: int = SEED_SIZE) -> np.ndarray:
    """Gradient background, value-noise texture and random filled shapes."""
    rng = np.random.default_rng([seed, 0x5EED])
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w] / float(size)
    theta = rng.uniform(0, 2 * np.pi)
    t = (np.cos(theta) * xx + np.sin(theta) * yy + 1.5) / 3.0
    c0, c1 = rng.uniform(20, 235, (2, 3))
    bg = c0[None, None, :] * (1 - t[..., None]) + c1[None, None, :] * t[..., None]
    tex = _value_noise(rng, h, w)
    tint = rng.uniform(0.5, 1.0, 3)
    bg = bg + 50.0 * tex[..., None] * tint[None, None, :]
    im = Image.fromarray(np.clip(bg, 0, 255).astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(im)
    for _ in range(int(rng.integers(24, 40))):
        kind = int(rng.integers(0, 3))
        color = tuple(int(c) for c in rng.integers(0, 256, 3))
        cx, cy = rng.uniform(0, size, 2)
        rx, ry = rng.uniform(size * 0.02, size * 0.12, 2)
        if kind == 0:
            draw.rectangle([cx - rx, cy - ry, cx + rx, cy + ry], fill=color)
        elif kind == 1:
            draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=color)
        else:
            k = int(rng.integers(3, 7))
            ang = np.sort(rng.uniform(0, 2 * np.pi, k))
            rad = rng.uniform(0.5, 1.0, k)
            pts = [(float(cx + rx * r * np.cos(a)), float(cy + ry * r * np.sin(a))) for a, r in zip(ang, rad)]
            draw.polygon(pts, fill=color)
    px = np.asarray(im).astype(np.float64)
    grain = np.random.default_rng([seed, 0x6A11]).normal(0, 2.0, px.shape)
    return np.clip(np.round(px + grain), 0, 255).astype(np.uint8)


# operations


def _to_pil(px: np.ndarray) -> Image.Image:
    return Image.fromarray(px, "RGB")


def _from_pil(im: Image.Image) -> np.ndarray:
    return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def _clip8(a: np.ndarray) -> np.ndarray:
    return np.clip(np.round(a), 0, 255).astype(np.uint8)


def _ensure_min_side(px: np.ndarray) -> np.ndarray:
    h, w = px.shape[:2]
    s = min(h, w)
    if s >= MIN_SIDE:
        return px
    f = MIN_SIDE / s
    return _from_pil(_to_pil(px).resize((max(MIN_SIDE, round(w * f)), max(MIN_SIDE, round(h * f))), Image.BILINEAR))


def _perspective_coeffs(src, dst):
    a = []
    b = []
    for (x, y), (u, v) in zip(dst, src):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b.extend([u, v])
    return np.linalg.solve(np.asarray(a, float), np.asarray(b, float)).tolist()


def _splice(px: np.ndarray, donor: np.ndarray, p: Dict[str, float]) -> np.ndarray:
    h, w = px.shape[:2]
    dh, dw = donor.shape[:2]
    side = max(8, int(round(math.sqrt(p["frac"]) * min(h, w, dh, dw))))
    sx = int(round(p["sx"] * (dw - side)))
    sy = int(round(p["sy"] * (dh - side)))
    dx = int(round(p["dx"] * (w - side)))
    dy = int(round(p["dy"] * (h - side)))
    out = px.copy()
    out[dy : dy + side, dx : dx + side] = donor[sy : sy + side, sx : sx + side]
    return out


def apply_modification(img: ImageRecord, op: ModificationOp, donor: Optional[np.ndarray] = None) -> ImageRecord:
    """Apply one catalog operation. Output is fully determined by ``op.params``
    (and ``donor`` for splices; without one the donor is a procedural seed)."""
    check_op(op)
    p = op.params
    px = img.pixels
    f = px.astype(np.float64)
    name = op.name
    if name == "color_jitter":
        out = _clip8(f * np.array([p["r"], p["g"], p["b"]])[None, None, :])
    elif name == "contrast":
        m = luminance(px).mean()
        out = _clip8((f - m) * p["factor"] + m)
    elif name == "brightness":
        out = _clip8(f + 255.0 * p["delta"])
    elif name == "saturation":
        g = luminance(px)[..., None]
        out = _clip8(g + (f - g) * p["factor"])
    elif name == "grayscale":
        out = _clip8(np.repeat(luminance(px)[..., None], 3, axis=2))
    elif name == "perspective_warp":
        h, w = px.shape[:2]
        r = np.random.default_rng(int(p["seed"]))
        jit = r.uniform(-1, 1, (4, 2)) * p["strength"] * np.array([w, h])
        src = np.array([[0, 0], [w, 0], [w, h], [0, h]], float)
        dst = src + jit
        coeffs = _perspective_coeffs(src, dst)
        out = _from_pil(_to_pil(px).transform((w, h), Image.PERSPECTIVE, coeffs, Image.BILINEAR))
    elif name == "aspect_ratio":
        h, w = px.shape[:2]
        out = _from_pil(_to_pil(px).resize((max(8, round(w * p["ratio"])), h), Image.BILINEAR))
    elif name == "pad":
        h, w = px.shape[:2]
        ph, pw = round(h * p["fraction"]), round(w * p["fraction"])
        out = np.full((h + 2 * ph, w + 2 * pw, 3), int(p["value"]), np.uint8)
        out[ph : ph + h, pw : pw + w] = px
    elif name == "scale":
        h, w = px.shape[:2]
        out = _from_pil(_to_pil(px).resize((max(8, round(w * p["factor"])), max(8, round(h * p["factor"]))), Image.BILINEAR))
    elif name == "hflip":
        out = px[:, ::-1].copy()
    elif name == "vflip":
        out = px[::-1].copy()
    elif name == "rotate":
        out = _from_pil(_to_pil(px).rotate(p["degrees"], resample=Image.BILINEAR, expand=False))
    elif name == "pixelize":
        h, w = px.shape[:2]
        small = _to_pil(px).resize((max(1, round(w * p["ratio"])), max(1, round(h * p["ratio"]))), Image.BILINEAR)
        out = _from_pil(small.resize((w, h), Image.NEAREST))
    elif name == "quality_encode":
        out = jpeg_roundtrip(px, int(p["quality"]))
    elif name == "gaussian_noise":
        r = np.random.default_rng(int(p["seed"]))
        out = _clip8(f + r.normal(0, p["sigma"], f.shape))
    elif name == "sharpen":
        out = _from_pil(_to_pil(px).filter(ImageFilter.UnsharpMask(radius=2, percent=int(p["amount"] * 100), threshold=0)))
    elif name == "opacity":
        out = _clip8(p["alpha"] * f + (1 - p["alpha"]) * p["value"])
    elif name == "shuffle":
        n = int(p["tiles"])
        h, w = px.shape[:2]
        th, tw = h // n, w // n
        base = px[: th * n, : tw * n]
        tiles = [base[i * th : (i + 1) * th, j * tw : (j + 1) * tw] for i in range(n) for j in range(n)]
        perm = np.random.default_rng(int(p["seed"])).permutation(len(tiles))
        rows = [np.concatenate([tiles[perm[i * n + j]] for j in range(n)], axis=1) for i in range(n)]
        out = np.concatenate(rows, axis=0)
    elif name == "crop":
        h, w = px.shape[:2]
        side = math.sqrt(p["area"])
        ch, cw = max(8, round(h * side)), max(8, round(w * side))
        y0 = int(round(p["y"] * (h - ch)))
        x0 = int(round(p["x"] * (w - cw)))
        out = px[y0 : y0 + ch, x0 : x0 + cw].copy()
    elif name == "tamper_splice":
        d = donor if donor is not None else procedural_seed(int(p["donor_seed"]))
        out = _splice(px, d, p)
    elif name == "meme_text":
        h, w = px.shape[:2]
        bh = max(4, round(h * p["height"]))
        out = px.copy()
        y0 = 0 if int(p["top"]) == 0 else h - bh
        out[y0 : y0 + bh] = int(p["value"])
        r = np.random.default_rng(int(p["seed"]))
        ink = 255 - int(p["value"])
        x = 4
        while x < w - 8:
            cw = int(r.integers(3, 8))
            gh = int(r.integers(bh // 3, max(bh // 3 + 1, bh - 2)))
            top = y0 + (bh - gh) // 2
            out[top : top + gh, x : x + cw] = ink
            x += cw + int(r.integers(2, 6))
    else:  # pragma: no cover - guarded by check_op
        raise UnknownOperation(name)
    return img.with_pixels(_ensure_min_side(np.ascontiguousarray(out, dtype=np.uint8)), ImageFormat.OTHER)


# graph / dataset generation


@dataclass
class GenSpec:
    n_graphs: int = 10
    nodes_min: int = 6
    nodes_max: int = 14
    root_children_mean: float = 4.7
    max_children: int = 4
    ops_min: int = 1
    ops_max: int = 3
    op_pool: Tuple[str, ...] = DEFAULT_OP_POOL
    quality_pool: Tuple[int, ...] = (65, 70, 75, 80, 85, 90, 95)
    distractor_fraction: float = 0.1
    distractors: Optional[int] = None
    splice_prob: float = 0.5
    image_size: int = SEED_SIZE
    seed: int = 42

    def n_distractors(self, n_images: int) -> int:
        if self.distractors is not None:
            return int(self.distractors)
        return int(math.ceil(self.distractor_fraction * n_images))

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["op_pool"] = list(self.op_pool)
        d["quality_pool"] = list(self.quality_pool)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "GenSpec":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown GenSpec fields: {sorted(unknown)}")
        for key in ("op_pool", "quality_pool"):
            if key in obj:
                obj[key] = tuple(obj[key])
        spec = cls(**obj)
        for op in spec.op_pool:
            if op not in CATALOG:
                raise UnknownOperation(f"unknown operation {op!r} in op_pool")
        if not spec.quality_pool or any(not 1 <= q <= 100 for q in spec.quality_pool):
            raise ValueError("quality_pool must hold integers in 1..100")
        if not 1 <= spec.nodes_min <= spec.nodes_max:
            raise ValueError("need 1 <= nodes_min <= nodes_max")
        return spec


@dataclass
class GeneratedGraph:
    journal: Journal
    files: Dict[ImageId, bytes]  # encoded JPEG per node
    records: Dict[ImageId, ImageRecord] = field(default_factory=dict)


def graph_rng(master_seed: int, graph_index: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), int(graph_index), 0x9A9])


def _tree_parents(n: int, spec: GenSpec, rng: np.random.Generator) -> List[int]:
    """Parent index for nodes 1..n-1 (node 0 is the root)."""
    if n <= 1:
        return []
    root_deg = int(np.clip(rng.poisson(max(spec.root_children_mean - 1.0, 0.0)) + 1, 1, n - 1))
    parents = [0] * root_deg
    children = {0: root_deg}
    for v in range(root_deg + 1, n):
        options = [u for u in range(1, v) if children.get(u, 0) < spec.max_children]
        if not options:
            options = list(range(1, v))
        u = int(options[int(rng.integers(0, len(options)))])
        parents.append(u)
        children[u] = children.get(u, 0) + 1
    return parents


def _encode(px: np.ndarray, quality: int) -> Tuple[bytes, np.ndarray]:
    data = encode_jpeg(px, quality)
    return data, decode_bytes(data)


def generate_graph(
    seed_pixels: np.ndarray,
    spec: GenSpec,
    rng: np.random.Generator,
    graph_id: str = "g0",
    first_id: ImageId = 0,
    n_nodes: Optional[int] = None,
    file_prefix: str = "",
) -> GeneratedGraph:
    """Random modification tree rooted at ``seed_pixels`` (optionally one
    extra splice parent). Every node is stored as JPEG; the root's save is
    the first compression, each edge ends with a re-save."""
    if min(seed_pixels.shape[:2]) < 128:
        raise ValueError("seed image must be at least 128x128")
    n = int(n_nodes) if n_nodes is not None else int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
    parents = _tree_parents(n, spec, rng)
    splice: Optional[Tuple[int, int]] = None
    if n >= 4 and rng.random() < spec.splice_prob:
        v = int(rng.integers(2, n))
        donors = [u for u in range(v) if u != parents[v - 1]]
        if donors:
            splice = (int(donors[int(rng.integers(0, len(donors)))]), v)

    ids = [first_id + i for i in range(n)]
    g = ProvenanceGraph(ids)
    node_files: Dict[ImageId, str] = {}
    quality: Dict[ImageId, int] = {}
    edge_ops: Dict[MREdge, List[ModificationOp]] = {}
    files: Dict[ImageId, bytes] = {}
    records: Dict[ImageId, ImageRecord] = {}

    for i in range(n):
        q = int(spec.quality_pool[int(rng.integers(0, len(spec.quality_pool)))])
        if i == 0:
            px = seed_pixels
        else:
            par = parents[i - 1]
            rec = records[ids[par]]
            ops = [
                sample_op(spec.op_pool[int(rng.integers(0, len(spec.op_pool)))], rng)
                for _ in range(int(rng.integers(spec.ops_min, spec.ops_max + 1)))
            ]
            for op in ops:
                rec = apply_modification(rec, op)
            edge_ops[MREdge(ids[par], ids[i])] = ops
            g.add_edge(MREdge(ids[par], ids[i]))
            if splice is not None and splice[1] == i:
                donor_id = ids[splice[0]]
                sop = sample_op("tamper_splice", rng)
                rec = apply_modification(rec, sop, donor=records[donor_id].pixels)
                edge_ops[MREdge(donor_id, ids[i])] = [sop]
                edge_ops[MREdge(ids[par], ids[i])] = ops + [sop]
                g.add_edge(MREdge(donor_id, ids[i]))
            px = rec.pixels
        data, decoded = _encode(px, q)
        name = f"{file_prefix}{graph_id}_n{i:02d}.jpg"
        files[ids[i]] = data
        records[ids[i]] = ImageRecord(ids[i], decoded, ImageFormat.JPEG, name)
        node_files[ids[i]] = name
        quality[ids[i]] = q

    journal = Journal(graph_id, g, node_files, edge_ops, quality)
    journal.check()
    return GeneratedGraph(journal, files, records)


@dataclass
class Dataset:
    root: Path
    journals: List[Journal]
    distractors: List[ImageId]
    manifest: List[dict]

    def id_to_path(self) -> Dict[ImageId, Path]:
        return {int(m["id"]): self.root / m["file"] for m in self.manifest}


def generate_dataset(spec: GenSpec, out_dir) -> Dataset:
    """Write ``images/``, ``journals/`` and ``manifest.json`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "journals").mkdir(parents=True, exist_ok=True)
    manifest: List[dict] = []
    journals: List[Journal] = []
    next_id = 0
    for gi in range(spec.n_graphs):
        rng = graph_rng(spec.seed, gi)
        seed_px = procedural_seed(int(rng.integers(0, 2**31 - 1)), spec.image_size)
        gid = f"g{gi:04d}"
        gen = generate_graph(seed_px, spec, rng, gid, next_id, file_prefix="images/")
        for nid in gen.journal.graph.sorted_nodes():
            (out / gen.journal.node_files[nid]).write_bytes(gen.files[nid])
            manifest.append({"file": gen.journal.node_files[nid], "id": nid, "graph_id": gid})
        journal_write(gen.journal, out / "journals" / f"{gid}.json")
        journals.append(gen.journal)
        next_id += len(gen.journal.graph.nodes)

    n_distr = spec.n_distractors(next_id)
    drng = np.random.default_rng([int(spec.seed), 0xD15])
    distractors: List[ImageId] = []
    for di in range(n_distr):
        px = procedural_seed(int(drng.integers(0, 2**31 - 1)), spec.image_size)
        q = int(spec.quality_pool[int(drng.integers(0, len(spec.quality_pool)))])
        name = f"images/d{di:05d}.jpg"
        (out / name).write_bytes(encode_jpeg(px, q))
        manifest.append({"file": name, "id": next_id, "graph_id": None})
        distractors.append(next_id)
        next_id += 1

    doc = {"spec": spec.to_json(), "images": manifest}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return Dataset(out, journals, distractors, manifest)


def read_manifest(path) -> List[dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return list(doc["images"])


def sha256_tree(root) -> Dict[str, str]:
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def load_dataset(root) -> Dataset:
    """Read back a directory written by ``generate_dataset``."""
    root = Path(root)
    manifest = read_manifest(root / "manifest.json")
    journals = [journal_read(p) for p in sorted((root / "journals").glob("*.json"))]
    distractors = [int(m["id"]) for m in manifest if m["graph_id"] is None]
    return Dataset(root, journals, distractors, manifest)
