import numpy as np
import pytest

from meyers_lab import Polygon, WeightedGraph, from_triangulation, triangulate


@pytest.fixture(scope="session")
def unit_square():
    return Polygon.unit_square()


@pytest.fixture(scope="session")
def coarse_square_mesh(unit_square):
    """The 8-triangle criss-cross mesh of the unit square."""
    return triangulate(unit_square, 0.5)


@pytest.fixture(scope="session")
def coarse_square_graph(coarse_square_mesh):
    return from_triangulation(coarse_square_mesh)


def path_graph(weights, mus=None):
    w = np.asarray(weights, dtype=float)
    mus = np.ones_like(w) if mus is None else np.asarray(mus, dtype=float)
    n = len(w) + 1
    return WeightedGraph(n, np.arange(n - 1), np.arange(1, n), w, mus)


@pytest.fixture
def small_path():
    return path_graph([1.0, 2.0, 3.0])


def random_graph(rng, n=None):
    """Connected random weighted graph on up to 8 vertices."""
    n = n or int(rng.integers(2, 9))
    edges = {(i - 1, i) for i in range(1, n)}  # spanning path
    extra = rng.integers(0, n * (n - 1) // 2 + 1)
    for _ in range(int(extra)):
        i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.add((i, j))
    e = sorted(edges)
    u = np.array([a for a, _ in e])
    v = np.array([b for _, b in e])
    h = rng.uniform(0.5, 2.0, len(e))
    mu = rng.uniform(0.5, 2.0, len(e))
    return WeightedGraph(n, u, v, h, mu)
