"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``PROVGRAPH_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PROVGRAPH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

ratio_match = _impl.ratio_match
ransac_similarity = _impl.ransac_similarity
deblock_median = _impl.deblock_median
quant_steps = _impl.quant_steps

__all__ = ["BACKEND", "ratio_match", "ransac_similarity", "deblock_median", "quant_steps"]
