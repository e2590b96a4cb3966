"""Image provenance filtering, MR tracing and directed graph construction."""

__version__ = "0.1.0"

from .core import (
    ImageFormat,
    ImageRecord,
    Journal,
    MREdge,
    ModificationOp,
    ProvenanceGraph,
    ProvGraphError,
    ValidationReport,
    graph_to_dot,
    graph_validate,
    journal_read,
    journal_write,
)
from .descriptor import GlobalDescriptor, LocalFeatureSet, extract_global, extract_local, similarity
from .index import DescriptorIndex
from .graphstore import MRStore
from .construct import PipelineStats, build_graph_full, build_graph_mst_baseline, run_pipeline

__all__ = [
    "DescriptorIndex", "GlobalDescriptor", "ImageFormat", "ImageRecord", "Journal", "LocalFeatureSet",
    "MREdge", "MRStore", "ModificationOp", "PipelineStats", "ProvGraphError", "ProvenanceGraph",
    "ValidationReport", "build_graph_full", "build_graph_mst_baseline", "extract_global", "extract_local",
    "graph_to_dot", "graph_validate", "journal_read", "journal_write", "run_pipeline", "similarity",
]
