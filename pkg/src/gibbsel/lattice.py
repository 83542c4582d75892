"""Lattice geometry, neighborhood graphs and induced-graph components.

Sites are indexed row-major from the top-left corner; boundaries are free
(no wrap-around). Fields are 2D integer arrays of shape ``(height, width)``
holding colors in ``{0, ..., K-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from gibbsel import _kernels

GRAPH_KINDS = ("G4", "G8")


@dataclass(frozen=True)
class LatticeShape:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise ValueError(f"lattice dimensions must be positive, got {self.height}x{self.width}")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))

    @property
    def n_sites(self) -> int:
        return self.height * self.width

    def as_tuple(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class NeighborhoodGraph:
    """Edges of G4 or G8 over a lattice, each pair ``(i, j)`` with ``i < j`` once."""

    shape: LatticeShape
    kind: str
    edges: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_sites(self) -> int:
        return self.shape.n_sites


def _as_shape(shape) -> LatticeShape:
    if isinstance(shape, LatticeShape):
        return shape
    height, width = shape
    return LatticeShape(height, width)


def expected_edge_count(shape, kind: str) -> int:
    shape = _as_shape(shape)
    h, w = shape.height, shape.width
    n4 = h * (w - 1) + w * (h - 1)
    if kind == "G4":
        return n4
    if kind == "G8":
        return n4 + 2 * (h - 1) * (w - 1)
    raise ValueError(f"unknown graph kind {kind!r}")


@lru_cache(maxsize=64)
def _build_graph_cached(height: int, width: int, kind: str) -> NeighborhoodGraph:
    idx = np.arange(height * width).reshape(height, width)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),  # horizontal
        (idx[:-1, :], idx[1:, :]),  # vertical
    ]
    if kind == "G8":
        pairs.append((idx[:-1, :-1], idx[1:, 1:]))  # down-right diagonal
        pairs.append((idx[:-1, 1:], idx[1:, :-1]))  # down-left diagonal
    a = np.concatenate([p[0].ravel() for p in pairs])
    b = np.concatenate([p[1].ravel() for p in pairs])
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    order = np.lexsort((hi, lo))
    edges = np.stack([lo[order], hi[order]], axis=1).astype(np.int64)
    edges.setflags(write=False)
    return NeighborhoodGraph(LatticeShape(height, width), kind, edges)


def build_graph(shape, kind: str) -> NeighborhoodGraph:
    """Build the G4 (rook) or G8 (king) graph on a free-boundary lattice.

    Edges are sorted lexicographically by ``(min site, max site)``.

    >>> build_graph((5, 5), "G8").n_edges
    72
    """
    if kind not in GRAPH_KINDS:
        raise ValueError(f"graph kind must be one of {GRAPH_KINDS}, got {kind!r}")
    if isinstance(shape, LatticeShape):
        h, w = shape.height, shape.width
    else:
        h, w = shape
    if int(h) < 1 or int(w) < 1:
        raise ValueError(f"lattice dimensions must be positive, got {h}x{w}")
    return _build_graph_cached(int(h), int(w), kind)


@dataclass(frozen=True, eq=False)
class ComponentPartition:
    labels: np.ndarray
    sizes: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.sizes.shape[0])

    @property
    def largest(self) -> int:
        return int(self.sizes.max())


def _check_field(graph: NeighborhoodGraph, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field)
    if field.shape != graph.shape.as_tuple():
        raise ValueError(
            f"field shape {field.shape} does not match graph shape {graph.shape.as_tuple()}"
        )
    if not np.issubdtype(field.dtype, np.integer):
        raise ValueError("induced graphs require an integer-colored field")
    return np.ascontiguousarray(field.ravel(), dtype=np.int64)


def induced_components(graph: NeighborhoodGraph, field) -> ComponentPartition:
    """Connected components of the graph induced by ``graph`` on ``field``.

    Two sites are joined when they share an edge of ``graph`` and a color.
    Labels are numbered in first-visit order of a row-major scan.
    """
    colors = _check_field(graph, field)
    labels, sizes = _kernels.label_components(colors, graph.edges[:, 0], graph.edges[:, 1])
    return ComponentPartition(labels.reshape(graph.shape.as_tuple()), sizes)


def monochrome_edge_count(graph: NeighborhoodGraph, field) -> int:
    colors = _check_field(graph, field)
    return int(np.count_nonzero(colors[graph.edges[:, 0]] == colors[graph.edges[:, 1]]))


def component_stats(graph: NeighborhoodGraph, field) -> tuple[int, int, int]:
    """``(R, T, U)``: monochrome edges, component count, largest component size."""
    colors = _check_field(graph, field)
    r, t, u = _kernels.component_stats(colors, graph.edges[:, 0], graph.edges[:, 1])
    return int(r), int(t), int(u)


def checkerboard(height: int, width: int) -> np.ndarray:
    ii, jj = np.indices((height, width))
    return ((ii + jj) % 2).astype(np.int64)


# -- plain-text PGM ---------------------------------------------------------


def write_pgm(path, field, n_colors: int | None = None) -> None:
    """Write a discrete field as ASCII PGM with ``maxval = K - 1``."""
    field = np.asarray(field)
    if n_colors is None:
        n_colors = max(int(field.max()) + 1, 2)
    if field.min() < 0 or field.max() > n_colors - 1:
        raise ValueError("field colors out of range for the given number of colors")
    h, w = field.shape
    lines = ["P2", f"{w} {h}", str(n_colors - 1)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in field)
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read an ASCII PGM written by :func:`write_pgm`; returns ``(field, K)``."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain-text PGM (magic P2)")
    w, h, maxval = (int(t) for t in tokens[1:4])
    values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if values.size != w * h:
        raise ValueError(f"{path}: expected {w * h} values, found {values.size}")
    if values.min() < 0 or values.max() > maxval:
        raise ValueError(f"{path}: values outside [0, {maxval}]")
    return values.reshape(h, w), maxval + 1
