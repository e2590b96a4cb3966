"""Pairwise model implementations behind one interface.

Pipeline code calls ``models.relationship(a, b)`` and ``models.direction(a, b)``
and nothing else, so baseline and oracle models are interchangeable.
"""

from __future__ import annotations

import threading
from typing import Dict, Iterable, Set, Tuple

from ..core import ImageId, ImageRecord, Journal, ProvGraphError
from ..descriptor import LocalFeatureSet, extract_local
from .compression import CompressionProfile, compression_profile
from .config import ModelConfig
from .direction import Direction, DirectionVerdict, IdenticalInputs, determine_direction
from .relationship import PairVerdict, analyze_features, content_key


class UnknownImage(ProvGraphError):
    kind = "UnknownImage"


class PairwiseModels:
    """Interface. Subclasses answer for ImageRecord pairs."""

    name = "abstract"

    def relationship(self, a: ImageRecord, b: ImageRecord) -> PairVerdict:
        raise NotImplementedError

    def direction(self, a: ImageRecord, b: ImageRecord) -> DirectionVerdict:
        raise NotImplementedError


class BaselineModels(PairwiseModels):
    """Local-feature matching and compression-evidence direction, with
    per-image caches keyed by pixel content."""

    name = "baseline"

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        self.cfg = cfg
        self._features: Dict[bytes, LocalFeatureSet] = {}
        self._profiles: Dict[bytes, CompressionProfile] = {}
        self._lock = threading.Lock()

    def features(self, img: ImageRecord, key: bytes = None) -> LocalFeatureSet:
        key = key or content_key(img)
        with self._lock:
            hit = self._features.get(key)
        if hit is None:
            hit = extract_local(img, self.cfg.max_features)
            with self._lock:
                self._features[key] = hit
        return hit

    def profile(self, img: ImageRecord) -> CompressionProfile:
        key = content_key(img)
        with self._lock:
            hit = self._profiles.get(key)
        if hit is None:
            hit = compression_profile(img, self.cfg)
            with self._lock:
                self._profiles[key] = hit
        return hit

    def relationship(self, a: ImageRecord, b: ImageRecord) -> PairVerdict:
        for img in (a, b):
            if img.width < 32 or img.height < 32:
                raise ValueError("relationship analysis needs images of at least 32x32")
        ka, kb = content_key(a), content_key(b)
        if kb < ka:
            a, b, ka, kb = b, a, kb, ka
        return analyze_features(self.features(a, ka), self.features(b, kb), self.cfg)

    def direction(self, a: ImageRecord, b: ImageRecord) -> DirectionVerdict:
        return determine_direction(a, b, self.cfg, profile=self.profile)


class OracleModels(PairwiseModels):
    """Answers from ground-truth journal edges."""

    name = "oracle"

    def __init__(self, journals: Iterable[Journal], extra_ids: Iterable[ImageId] = ()):
        self.edges: Set[Tuple[ImageId, ImageId]] = set()
        # extra ids (distractors) are known images with no MR to anything
        self.known: Set[ImageId] = set(extra_ids)
        for j in journals:
            self.known |= j.graph.nodes
            self.edges |= {(e.src, e.dst) for e in j.graph.edges}

    def _check(self, *ids: ImageId) -> None:
        for i in ids:
            if i not in self.known:
                raise UnknownImage(f"image {i} is not covered by the loaded journals")

    def relationship(self, a: ImageRecord, b: ImageRecord) -> PairVerdict:
        self._check(a.id, b.id)
        rel = (a.id, b.id) in self.edges or (b.id, a.id) in self.edges
        return PairVerdict(rel, 1.0 if rel else 0.0)

    def direction(self, a: ImageRecord, b: ImageRecord) -> DirectionVerdict:
        self._check(a.id, b.id)
        if a.id == b.id:
            raise IdenticalInputs("direction is undefined for an image and itself")
        if (a.id, b.id) in self.edges:
            return DirectionVerdict(Direction.AtoB, 1.0)
        if (b.id, a.id) in self.edges:
            return DirectionVerdict(Direction.BtoA, 1.0)
        # not related: the pipeline never asks, but stay total
        return DirectionVerdict(Direction.AtoB, 0.0, True)
