"""Point clouds, distance matrices, and Vietoris-Rips filtrations.

A filtration here is a finite sequence of simplices (dimension at most 2)
ordered by (value, dimension, lexicographic vertex tuple).  Edges whose
distance entry is the ``BLOCKED`` sentinel are excluded from the complex
together with every triangle containing them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._kernels import enum_edges, enum_triangles

# Sentinel marking an excluded edge.  +inf compares greater than any finite
# entry, so a blocked edge can never be the max of a triangle that survives.
BLOCKED = float(np.inf)


def _frozen_f64(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PointCloud:
    """N points in R^D.  The row index is the identity of a point."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be non-empty, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", _frozen_f64(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal.

    Entries equal to ``BLOCKED`` (+inf) mark excluded edges.  Finite entries
    need not satisfy the triangle inequality; any symmetric dissimilarity is
    accepted.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"entries must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise ValueError("entries must be non-empty")
        if np.any(np.isnan(m)):
            raise ValueError("entries must not contain NaN")
        if np.any(m < 0):
            raise ValueError("entries must be nonnegative")
        if np.any(np.diagonal(m) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        if not np.array_equal(m, m.T):
            raise ValueError("entries must be exactly symmetric")
        object.__setattr__(self, "entries", _frozen_f64(m))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, order=True)
class Simplex:
    """A simplex given by its strictly increasing vertex tuple."""

    vertices: tuple[int, ...]

    def __post_init__(self) -> None:
        v = tuple(int(x) for x in self.vertices)
        if len(v) < 1 or len(v) > 3:
            raise ValueError(f"only dimensions 0..2 supported, got {len(v)} vertices")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"vertices must be strictly increasing, got {v}")
        if v[0] < 0:
            raise ValueError(f"vertex ids must be nonnegative, got {v}")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def faces(self) -> list["Simplex"]:
        """Codimension-1 faces, empty for a vertex."""
        if self.dim == 0:
            return []
        v = self.vertices
        return [Simplex(v[:i] + v[i + 1 :]) for i in range(len(v))]


class FilteredComplex:
    """Simplices of dimension at most 2 sorted in filtration order.

    Storage is array-based: ``verts`` is (m, 3) int64 padded with -1,
    ``dims`` is (m,) int8 and ``values`` is (m,) float64.  The order is
    ascending (value, dim, vertex tuple), which places every face before
    its cofaces.
    """

    __slots__ = ("verts", "dims", "values", "n_vertices", "max_dim")

    def __init__(
        self,
        verts: np.ndarray,
        dims: np.ndarray,
        values: np.ndarray,
        n_vertices: int,
        max_dim: int,
    ) -> None:
        order = np.lexsort((verts[:, 2], verts[:, 1], verts[:, 0], dims, values))
        self.verts = np.ascontiguousarray(verts[order], dtype=np.int64)
        self.dims = np.ascontiguousarray(dims[order], dtype=np.int8)
        self.values = np.ascontiguousarray(values[order], dtype=np.float64)
        self.n_vertices = int(n_vertices)
        self.max_dim = int(max_dim)
        for a in (self.verts, self.dims, self.values):
            a.flags.writeable = False

    @classmethod
    def from_simplices(cls, items: Iterable[tuple[Simplex, float]]) -> "FilteredComplex":
        """Build a filtration from explicit (simplex, value) pairs.

        Validates that values are finite and nonnegative, that no simplex is
        repeated, that every face is present with a value no larger than its
        coface, and that the vertex ids form a contiguous range 0..V-1.
        """
        pairs = [(s, float(v)) for s, v in items]
        if not pairs:
            raise ValueError("filtration must contain at least one simplex")
        seen: dict[tuple[int, ...], float] = {}
        for s, v in pairs:
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"filtration value for {s.vertices} must be finite and >= 0, got {v}")
            if s.vertices in seen:
                raise ValueError(f"duplicate simplex {s.vertices}")
            seen[s.vertices] = v
        vertex_ids = sorted(k[0] for k in seen if len(k) == 1)
        if vertex_ids != list(range(len(vertex_ids))):
            raise ValueError("vertex ids must form a contiguous range 0..V-1")
        for s, v in pairs:
            for f in s.faces():
                if f.vertices not in seen:
                    raise ValueError(f"face {f.vertices} of {s.vertices} is missing")
                if seen[f.vertices] > v:
                    raise ValueError(
                        f"face {f.vertices} enters at {seen[f.vertices]} after its coface {s.vertices} at {v}"
                    )
        m = len(pairs)
        verts = np.full((m, 3), -1, dtype=np.int64)
        dims = np.empty(m, dtype=np.int8)
        values = np.empty(m, dtype=np.float64)
        for i, (s, v) in enumerate(pairs):
            verts[i, : len(s.vertices)] = s.vertices
            dims[i] = s.dim
            values[i] = v
        return cls(verts, dims, values, len(vertex_ids), int(dims.max()))

    @property
    def n_simplices(self) -> int:
        return self.values.shape[0]

    def simplex_at(self, idx: int) -> Simplex:
        row = self.verts[idx]
        return Simplex(tuple(int(x) for x in row[row >= 0]))

    def simplices(self) -> Iterator[tuple[Simplex, float]]:
        """Yield (simplex, value) in filtration order."""
        for i in range(self.n_simplices):
            yield self.simplex_at(i), float(self.values[i])


def pairwise_distances(cloud: PointCloud) -> DistanceMatrix:
    """Euclidean distance matrix of a point cloud."""
    if cloud.n == 1:
        return DistanceMatrix(np.zeros((1, 1)))
    d = squareform(pdist(cloud.points, metric="euclidean"))
    # pdist can produce tiny asymmetries only through squareform bugs, not
    # expected; enforce the exact-symmetry invariant structurally.
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


def build_vr_filtration(dist: DistanceMatrix, max_dim: int) -> FilteredComplex:
    """Vietoris-Rips filtration of a distance matrix.

    Vertices enter at 0, every higher simplex at the max pairwise distance
    among its vertices.  ``max_dim`` must be 1 or 2.  Edges with a BLOCKED
    entry are omitted along with all triangles containing them.
    """
    if max_dim not in (1, 2):
        raise ValueError(f"max_dim must be 1 or 2, got {max_dim}")
    n = dist.n
    eu, ev, eval_ = enum_edges(dist.entries)
    parts_verts = [np.stack(
        [np.arange(n, dtype=np.int64),
         np.full(n, -1, dtype=np.int64),
         np.full(n, -1, dtype=np.int64)], axis=1)]
    parts_dims = [np.zeros(n, dtype=np.int8)]
    parts_vals = [np.zeros(n, dtype=np.float64)]
    parts_verts.append(np.stack([eu, ev, np.full(eu.shape[0], -1, dtype=np.int64)], axis=1))
    parts_dims.append(np.ones(eu.shape[0], dtype=np.int8))
    parts_vals.append(eval_)
    if max_dim == 2:
        ta, tb, tc, tval = enum_triangles(dist.entries)
        parts_verts.append(np.stack([ta, tb, tc], axis=1))
        parts_dims.append(np.full(ta.shape[0], 2, dtype=np.int8))
        parts_vals.append(tval)
    verts = np.concatenate(parts_verts, axis=0)
    dims = np.concatenate(parts_dims)
    values = np.concatenate(parts_vals)
    return FilteredComplex(verts, dims, values, n, max_dim)


def complex_at_threshold(fc: FilteredComplex, eps: float) -> list[Simplex]:
    """All simplices with filtration value <= eps, in filtration order."""
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"eps must be finite and >= 0, got {eps}")
    idx = np.flatnonzero(fc.values <= eps)
    return [fc.simplex_at(int(i)) for i in idx]
