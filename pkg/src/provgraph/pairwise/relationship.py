"""Local-feature matching with a RANSAC similarity check."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core import ImageRecord
from ..descriptor import LocalFeatureSet, extract_local
from .config import ModelConfig


@dataclass(frozen=True)
class PairVerdict:
    related: bool
    confidence: float


@dataclass(frozen=True)
class MatchResult:
    matched: int
    inliers: int
    confidence: float
    model: np.ndarray


def content_key(img: ImageRecord) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(img.pixels.shape, dtype=np.int64).tobytes())
    h.update(img.pixels.tobytes())
    return h.digest()


def ransac_samples(n: int, iterations: int, seed: int) -> np.ndarray:
    """``iterations`` index pairs (i, j) with i != j, drawn from a seeded generator."""
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, iterations)
    j = (i + 1 + rng.integers(0, n - 1, iterations)) % n
    return np.stack([i, j], axis=1).astype(np.int64)


def one_to_one(ia: np.ndarray, ib: np.ndarray, dist: np.ndarray):
    """Keep the closest match per target feature; many-to-one matches would
    otherwise stack up as spurious inliers of any transform through that point."""
    if ia.size == 0:
        return ia, ib
    order = np.lexsort((ia, dist, ib))
    first = np.ones(order.size, dtype=bool)
    first[1:] = ib[order][1:] != ib[order][:-1]
    keep = np.sort(order[first])
    return ia[keep], ib[keep]


def mirror_features(fs: LocalFeatureSet) -> LocalFeatureSet:
    """Features of the horizontally mirrored image, derived without re-extraction.

    Reflection maps the dominant direction theta to pi - theta, which turns the
    oriented patch upside down and negates the across-direction gradient sum.
    """
    d = fs.descriptors.reshape(-1, 4, 4, 2)[:, ::-1, :, :].copy()
    d[..., 1] *= -1.0
    xy = fs.xy.copy()
    xy[:, 0] = 1.0 - xy[:, 0]
    return LocalFeatureSet(xy, fs.scale, d.reshape(len(fs), fs.descriptors.shape[1]), fs.response)


def match_features(fa: LocalFeatureSet, fb: LocalFeatureSet, cfg: ModelConfig) -> MatchResult:
    if len(fa) < cfg.min_features or len(fb) < cfg.min_features:
        return MatchResult(0, 0, 0.0, np.zeros(4))
    ia, ib, dist = kernels.ratio_match(fa.descriptors, fb.descriptors, cfg.ratio)
    ia, ib = one_to_one(ia, ib, dist)
    matched = int(ia.shape[0])
    if matched < 2:
        return MatchResult(matched, 0, 0.0, np.zeros(4))
    src = fa.xy[ia]
    dst = fb.xy[ib]
    samples = ransac_samples(matched, cfg.ransac_iterations, cfg.ransac_seed)
    inliers, model = kernels.ransac_similarity(src, dst, samples, cfg.inlier_tol, cfg.min_scale, cfg.max_scale)
    conf = float(np.clip(inliers / max(8, matched), 0.0, 1.0))
    return MatchResult(matched, int(inliers), conf, np.asarray(model))


def analyze_features(fa: LocalFeatureSet, fb: LocalFeatureSet, cfg: ModelConfig) -> PairVerdict:
    """Best of the direct and the mirrored match; a similarity transform cannot express a flip."""
    conf = match_features(fa, fb, cfg).confidence
    if cfg.match_mirrored and conf < 1.0:
        conf = max(conf, match_features(fa, mirror_features(fb), cfg).confidence)
    return PairVerdict(conf >= cfg.tau_rel, conf)


def analyze_relationship(a: ImageRecord, b: ImageRecord, cfg: ModelConfig = ModelConfig()) -> PairVerdict:
    """Symmetric: the pair is put in canonical (content-hash) order first."""
    for img in (a, b):
        if img.width < 32 or img.height < 32:
            raise ValueError("relationship analysis needs images of at least 32x32")
    if content_key(b) < content_key(a):
        a, b = b, a
    fa = extract_local(a, cfg.max_features)
    fb = extract_local(b, cfg.max_features)
    return analyze_features(fa, fb, cfg)
