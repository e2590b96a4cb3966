"""Command-line front end.

    provgraph synth [SPEC.json] --out DIR
    provgraph ingest DIR [--preload-store]
    provgraph query IMG -k 10
    provgraph trace ID [ID ...]
    provgraph construct DIR
    provgraph pipeline IMG -k 10 --out-dir OUT
    provgraph eval DATASET --mode oracle|disturb|end_to_end --report R.json
    provgraph bench DATASET --db-sizes 10000,100000 --report R.json

Failures print one line ``error: <Kind>: <message>`` on stderr and exit 1;
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .construct import build_graph_full, run_pipeline
from .core import Journal, ProvGraphError, graph_to_dot, graph_validate
from .descriptor import DIM, LAYOUT_VERSION, extract_global
from .eval import ImageDB, build_index, journal_store, make_models, run_benchmark, write_report
from .graphstore import MRStore
from .imaging import load_image
from .index import DescriptorIndex
from .pairwise.config import ModelConfig
from .synth import GenSpec, generate_dataset, load_dataset

log = logging.getLogger("provgraph")

DEFAULT_SEED = 42
DEFAULT_K = 10
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff", ".webp")


@dataclass
class Config:
    descriptor_dim: int = DIM
    descriptor_layout: int = LAYOUT_VERSION
    k: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    index: str = "index.ipdx"
    store: str = "store.ipmr"
    manifest: str = "manifest.json"
    models: ModelConfig = field(default_factory=ModelConfig)

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "models"}
        d["models"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.models).items()}
        return d


_RUN_KEYS = {"k": int, "seed": int}
_PATH_KEYS = ("index", "store", "manifest")


class UsageError(Exception):
    pass


def load_config(path: Optional[str]) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    if "models" in cp:
        cfg.models = ModelConfig.from_mapping(dict(cp["models"]))
    if "run" in cp:
        for key, raw in cp["run"].items():
            if key not in _RUN_KEYS:
                raise UsageError(f"unknown [run] key {key!r}")
            setattr(cfg, key, _RUN_KEYS[key](raw))
    if "paths" in cp:
        for key, raw in cp["paths"].items():
            if key not in _PATH_KEYS:
                raise UsageError(f"unknown [paths] key {key!r}")
            setattr(cfg, key, raw)
    return cfg


def effective_config(args) -> Config:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.models = replace(cfg.models, ransac_seed=args.seed)
    for key in _PATH_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "tau_rel", None) is not None:
        cfg.models = replace(cfg.models, tau_rel=args.tau_rel)
    if cfg.k < 1:
        raise UsageError("k must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _ids(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _dataset_images(root: Path):
    """(id, path) for a dataset directory (manifest) or a plain image folder (sorted names)."""
    man = root / "manifest.json"
    if man.exists():
        ds = load_dataset(root)
        return [(int(m["id"]), root / m["file"]) for m in ds.manifest], ds
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return list(enumerate(files)), None


def _query_id(path: Path, manifest_path: Path) -> int:
    """The manifest id when the image is part of the dataset, else one past the largest id."""
    entries = json.loads(manifest_path.read_text(encoding="utf-8"))["images"] if manifest_path.exists() else []
    root = manifest_path.parent
    target = path.resolve()
    for m in entries:
        if (root / m["file"]).resolve() == target:
            return int(m["id"])
    return 1 + max((int(m["id"]) for m in entries), default=-1)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: Config) -> int:
    spec = GenSpec()
    if args.spec:
        spec = GenSpec.from_json(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    if args.seed is not None or not args.spec:
        spec = replace(spec, seed=cfg.seed)
    if args.graphs is not None:
        spec = replace(spec, n_graphs=args.graphs)
    ds = generate_dataset(spec, args.out)
    nodes = sum(len(j.graph.nodes) for j in ds.journals)
    print(f"graphs {len(ds.journals)} images {nodes} distractors {len(ds.distractors)} -> {args.out}")
    return 0


def cmd_ingest(args, cfg: Config) -> int:
    root = Path(args.dir)
    ds = load_dataset(root)
    db = ImageDB(root, ds.manifest)
    idx = build_index(db)
    idx.save(cfg.index)
    msg = f"indexed {len(idx)} -> {cfg.index}"
    if args.preload_store:
        store = journal_store(ds.journals)
        store.save(cfg.store)
        msg += f"; store {len(store)} edges -> {cfg.store}"
    print(msg)
    return 0


def cmd_query(args, cfg: Config) -> int:
    idx = DescriptorIndex.load(cfg.index)
    q = load_image(args.image)
    for image_id, score in idx.top_k(extract_global(q), cfg.k) if len(idx) else []:
        print(f"{image_id}\t{score:.6f}")
    return 0


def cmd_trace(args, cfg: Config) -> int:
    store = MRStore.load(cfg.store) if Path(cfg.store).exists() else MRStore()
    g = store.trace(args.ids)
    _emit(graph_to_dot(g, "trace"), args.out)
    return 0


def cmd_construct(args, cfg: Config) -> int:
    root = Path(args.dir)
    items, ds = _dataset_images(root)
    if len(items) < 2:
        raise UsageError("construct needs at least two images")
    if args.models == "oracle" and ds is None:
        raise UsageError("--models oracle needs a dataset directory with journals")
    models = make_models(args.models, ds.journals if ds else [], cfg.models, ds.distractors if ds else ())
    cands = [load_image(p, i) for i, p in items]
    g, stats = build_graph_full(cands, models)
    _emit(graph_to_dot(g, "construct"), args.out)
    if args.stats:
        doc = {"stats": stats.to_json(args.timings), "validation": _validation(g)}
        Path(args.stats).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _validation(g) -> dict:
    rep = graph_validate(g)
    return {"cycles": [list(c) for c in rep.cycles], "orphan_nodes": sorted(rep.orphan_nodes),
            "truncated": rep.truncated}


def cmd_pipeline(args, cfg: Config) -> int:
    manifest_path = Path(cfg.manifest)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    ds = load_dataset(manifest_path.parent)
    db = ImageDB(manifest_path.parent, ds.manifest)
    idx = DescriptorIndex.load(cfg.index)
    store = MRStore.load(cfg.store) if Path(cfg.store).exists() else MRStore()
    qpath = Path(args.image)
    qid = _query_id(qpath, manifest_path)
    q = load_image(qpath, qid)
    models = make_models(args.models, ds.journals, cfg.models, ds.distractors)
    g, stats = run_pipeline(idx, store, db, q, cfg.k, models, trace=not args.no_trace)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {int(m["id"]): m["file"] for m in ds.manifest}
    files.setdefault(qid, str(qpath))
    (out / "graph.dot").write_text(graph_to_dot(g, "provenance"), encoding="utf-8")
    validation = _validation(g)
    journal = Journal(f"query-{qid}", g, {n: files.get(n, "") for n in g.nodes}, {e: [] for e in g.edges})
    if not validation["cycles"]:
        (out / "journal.json").write_text(journal.dumps(), encoding="utf-8")
    doc = {
        "query": qid, "k": cfg.k, "models": models.name, "nodes": len(g.nodes), "edges": len(g.edges),
        "stats": stats.to_json(args.timings), "validation": validation,
        "journal_written": not validation["cycles"], "config": cfg.to_json(),
    }
    (out / "stats.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"query {qid}: {len(g.nodes)} nodes, {len(g.edges)} edges -> {out}")
    return 0


def _eval_common(args, cfg: Config, mode: str, db_sizes: Sequence[int], timings: bool) -> int:
    report = run_benchmark(args.dataset, mode, ks=args.ks, k=cfg.k, models=args.models, db_sizes=db_sizes,
                           seed=cfg.seed, cfg=cfg.models, timings=timings)
    report["config"] = cfg.to_json()
    if args.report:
        write_report(report, args.report)
    agg = report["aggregate"]
    for key in sorted(agg):
        print(f"{key}\tmean={agg[key]['mean']:.6f}\tmedian={agg[key]['median']:.6f}")
    for key in ("distractor_exclusion", "mst_distractor_exclusion"):
        if key in report:
            print(f"{key}\t{report[key]:.6f}")
    return 0


def cmd_eval(args, cfg: Config) -> int:
    return _eval_common(args, cfg, args.mode, (), args.timings)


def cmd_bench(args, cfg: Config) -> int:
    return _eval_common(args, cfg, "end_to_end", args.db_sizes, not args.no_timings)


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI file with [models], [run] and [paths] sections")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--verbose", "-v", action="store_true", help="echo the effective config on stderr")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap; the current implementation runs single-threaded")
    return p


def _paths(p: argparse.ArgumentParser, *which: str) -> None:
    for key in which:
        p.add_argument(f"--{key}", default=None, help=f"{key} path")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="provgraph", description="image provenance graph toolkit", parents=[common])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("spec", nargs="?", help="GenSpec JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--graphs", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="index a dataset (and optionally preload the MR store)")
    p.add_argument("dir")
    p.add_argument("--preload-store", action="store_true", help="persist all journal edges into the store")
    _paths(p, "index", "store")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", parents=[common], help="top-k candidates for an image")
    p.add_argument("image")
    p.add_argument("-k", type=int, default=None)
    _paths(p, "index")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("trace", parents=[common], help="MR closure of the given ids, as DOT")
    p.add_argument("ids", nargs="+", type=int)
    p.add_argument("--out", default=None)
    _paths(p, "store")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("construct", parents=[common], help="all-pairs graph construction over a directory")
    p.add_argument("dir")
    p.add_argument("--models", choices=("baseline", "oracle"), default="baseline")
    p.add_argument("--tau-rel", type=float, default=None)
    p.add_argument("--out", default=None, help="DOT output (stdout if omitted)")
    p.add_argument("--stats", default=None, help="stats JSON output")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in stats")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("pipeline", parents=[common], help="query pipeline: filter, pairwise, trace")
    p.add_argument("image")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("--models", choices=("baseline", "oracle"), default="baseline")
    p.add_argument("--tau-rel", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-trace", action="store_true")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in stats")
    _paths(p, "index", "store", "manifest")
    p.set_defaults(func=cmd_pipeline)

    for name, helptext in (("eval", "benchmark one evaluation mode"), ("bench", "end-to-end scaling over DB sizes")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("dataset")
        p.add_argument("--models", choices=("baseline", "oracle"), default="oracle")
        p.add_argument("-k", type=int, default=None)
        p.add_argument("--ks", type=_ids, default=[1, 5, 10], help="comma-separated K values for R@K")
        p.add_argument("--tau-rel", type=float, default=None)
        p.add_argument("--report", default=None, help="report JSON path (CSV written alongside)")
        if name == "eval":
            p.add_argument("--mode", choices=("oracle", "disturb", "end_to_end"), required=True)
            p.add_argument("--timings", action="store_true")
            p.set_defaults(func=cmd_eval)
        else:
            p.add_argument("--db-sizes", type=_ids, default=[10_000, 100_000])
            p.add_argument("--no-timings", action="store_true")
            p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "ks", None) is not None and (not args.ks or min(args.ks) < 1):
        parser.error("--ks values must be >= 1")
    try:
        cfg = effective_config(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, configparser.Error) as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 1
    log.info("effective config: %s", json.dumps(cfg.to_json(), sort_keys=True))
    try:
        return int(args.func(args, cfg) or 0)
    except UsageError as exc:
        parser.error(str(exc))
    except ProvGraphError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
