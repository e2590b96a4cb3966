"""Modification direction from double-compression evidence."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..core import ImageRecord, ProvGraphError
from .compression import CompressionProfile, compression_profile
from .config import ModelConfig


class IdenticalInputs(ProvGraphError):
    kind = "IdenticalInputs"


class Direction(enum.Enum):
    AtoB = "AtoB"
    BtoA = "BtoA"

    def flipped(self) -> "Direction":
        return Direction.BtoA if self is Direction.AtoB else Direction.AtoB


@dataclass(frozen=True)
class DirectionVerdict:
    direction: Direction
    margin: float
    tie: bool = False


def verdict_from_evidence(ea: float, eb: float) -> DirectionVerdict:
    """The edited image carries two saves, so the edge points toward the larger evidence."""
    if ea == eb:
        return DirectionVerdict(Direction.AtoB, 0.0, True)
    return DirectionVerdict(Direction.AtoB if eb > ea else Direction.BtoA, abs(ea - eb))


def determine_direction(a: ImageRecord, b: ImageRecord, cfg: ModelConfig = ModelConfig(),
                        profile: Optional[Callable[[ImageRecord], CompressionProfile]] = None) -> DirectionVerdict:
    if a.pixels.shape == b.pixels.shape and np.array_equal(a.pixels, b.pixels):
        raise IdenticalInputs("direction is undefined for identical images")
    if profile is None:
        profile = lambda img: compression_profile(img, cfg)  # noqa: E731
    return verdict_from_evidence(profile(a).double_evidence, profile(b).double_evidence)
