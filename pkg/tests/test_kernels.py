"""Compiled and numpy kernels must agree."""

import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provgraph import _pykernels, kernels

_ck = pytest.importorskip("provgraph._ckernels")


def test_dispatch():
    forced = os.environ.get("PROVGRAPH_PURE_PYTHON", "") in ("1", "true", "yes")
    assert kernels.BACKEND == ("python" if forced else "cython")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 60), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_ratio_match_parity(n, m, seed):
    r = np.random.default_rng(seed)
    da, db = r.standard_normal((n, 32)), r.standard_normal((m, 32))
    if n and m:
        db[: min(n, m) // 2] = da[: min(n, m) // 2] + 0.01 * r.standard_normal((min(n, m) // 2, 32))
    a = _pykernels.ratio_match(da, db, 0.8)
    b = _ck.ratio_match(da, db, 0.8)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.allclose(a[2], b[2], rtol=0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 80), st.integers(0, 200), st.integers(0, 2**32 - 1))
def test_ransac_parity(n, h, seed):
    r = np.random.default_rng(seed)
    src = r.uniform(0, 1, (n, 2))
    z = (src[:, 0] + 1j * src[:, 1]) * (0.9 * np.exp(0.3j)) + (0.05 + 0.02j)
    dst = np.stack([z.real, z.imag], 1) + 0.002 * r.standard_normal((n, 2))
    dst[: n // 3] = r.uniform(0, 1, (n // 3, 2))
    samples = r.integers(0, n, (h, 2))
    ca, ma = _pykernels.ransac_similarity(src, dst, samples, 0.01, 0.25, 4.0)
    cb, mb = _ck.ransac_similarity(src, dst, samples, 0.01, 0.25, 4.0)
    assert ca == cb
    assert np.allclose(ma, mb, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_deblock_parity(h, w, seed):
    p = np.random.default_rng(seed).integers(0, 256, (h, w)).astype(np.float64)
    assert np.array_equal(_pykernels.deblock_median(p), _ck.deblock_median(p))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_quant_steps_parity(n, m, seed):
    r = np.random.default_rng(seed)
    q = r.integers(1, 20, m)
    c = np.round(r.normal(0, 30, (n, m)) / q) * q + (r.random((n, m)) < 0.1) * r.normal(0, 1, (n, m))
    a = _pykernels.quant_steps(c, 30, 0.9, 4)
    b = _ck.quant_steps(c, 30, 0.9, 4)
    assert np.array_equal(a, b)


def test_quant_steps_recovers_step():
    c = np.arange(-40, 41, 1.0)[:, None] * np.array([[3.0, 7.0]])
    assert list(_pykernels.quant_steps(c, 20, 0.95, 4)) == [3, 7]
    assert list(_pykernels.quant_steps(np.random.default_rng(0).normal(0, 20, (200, 1)), 20, 0.95, 4)) == [1]


def test_deblock_leaves_interior_alone():
    p = np.random.default_rng(1).integers(0, 256, (16, 16)).astype(np.float64)
    out = _pykernels.deblock_median(p)
    interior = [1, 2, 3, 4, 5, 6, 9, 10, 11, 12, 13, 14]
    assert np.array_equal(out[np.ix_(interior, interior)], p[np.ix_(interior, interior)])
