"""Pluggable pairwise models: relationship analysis and modification direction."""

from .compression import CompressionProfile, Residual, TooSmall, blockiness, compression_profile, reduce_artifacts, residual
from .config import ModelConfig
from .direction import Direction, DirectionVerdict, IdenticalInputs, determine_direction
from .models import BaselineModels, OracleModels, PairwiseModels, UnknownImage
from .relationship import PairVerdict, analyze_relationship

__all__ = [
    "BaselineModels",
    "CompressionProfile",
    "Direction",
    "DirectionVerdict",
    "IdenticalInputs",
    "ModelConfig",
    "OracleModels",
    "PairVerdict",
    "PairwiseModels",
    "Residual",
    "TooSmall",
    "UnknownImage",
    "analyze_relationship",
    "blockiness",
    "compression_profile",
    "determine_direction",
    "reduce_artifacts",
    "residual",
]
