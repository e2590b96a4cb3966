import numpy as np
import pytest

from provgraph.core import ImageFormat, ImageRecord, ProvenanceGraph
from provgraph.imaging import jpeg_roundtrip
from provgraph.synth import GenSpec, generate_dataset, procedural_seed


def jpeg_record(image_id, seed, quality=85, size=192):
    return ImageRecord(image_id, jpeg_roundtrip(procedural_seed(seed, size), quality), ImageFormat.JPEG)


def random_dag(rng, n, p):
    """Edges only from lower to higher index, so the result is acyclic."""
    g = ProvenanceGraph(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                g.add_edge((i, j))
    return g


def assert_graph_ok(g):
    for e in g.edges:
        assert e.src != e.dst
        assert e.src in g.nodes and e.dst in g.nodes
    assert len(set(g.edges)) == len(g.edges)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds_small")
    return generate_dataset(GenSpec(n_graphs=4, seed=3), root)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance results, printed once at the end of the run
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
