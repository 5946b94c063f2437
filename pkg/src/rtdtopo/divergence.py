"""Topology divergence between two point clouds with a shared row order.

The comparison embeds both clouds into one doubled vertex set: vertices
0..N-1 are the rows as measured by the first cloud, vertices N..2N-1 the
same rows as measured by the second.  The doubled distance matrix is

    m = [[0,    w+^T     ],
         [w+,   min(w, w~)]]

where w+ equals w above the diagonal and is BLOCKED strictly below it.
Both off-diagonal blocks are transposes of each other, so m is exactly
symmetric by construction.  Within the first copy every distance is 0, so
all H0 classes of the doubled complex die instantly; the H1 intervals
measure cycles that exist at small scales under min(w, w~) but only close
up once the corresponding w distances are reached.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    BLOCKED,
    DistanceMatrix,
    PointCloud,
    Simplex,
    build_vr_filtration,
    pairwise_distances,
)
from .persistence import Barcode, PersistencePair, compute_persistence

# provenance codes for entries of the doubled matrix
SRC_ZERO = 0  # intra-first-copy entry, constant 0
SRC_WPLUS = 1  # upper-triangular w entry linking the two copies
SRC_MIN_W = 2  # second-copy entry realised by w
SRC_MIN_WT = 3  # second-copy entry realised by w~
SRC_BLOCKED = 4  # excluded edge

_SRC_NAMES = {
    SRC_ZERO: "zero",
    SRC_WPLUS: "w_plus",
    SRC_MIN_W: "min_w",
    SRC_MIN_WT: "min_wt",
    SRC_BLOCKED: "blocked",
}


class DivergenceError(RuntimeError):
    """Raised when a divergence computation is numerically invalid."""


@dataclass(frozen=True)
class CrossMatrix:
    """Doubled (2N x 2N) matrix with per-entry provenance.

    ``source[a, b]`` records which input produced ``entries[a, b]`` using
    the SRC_* codes, and ``n`` is the size of each copy.
    """

    entries: np.ndarray
    source: np.ndarray
    n: int

    def provenance(self, a: int, b: int) -> tuple[str, int, int]:
        """Name of the originating input and the (i, j) index within it."""
        code = int(self.source[a, b])
        n = self.n
        i = a - n if a >= n else a
        j = b - n if b >= n else b
        return _SRC_NAMES[code], min(i, j), max(i, j)


def build_rtd_matrix(w: DistanceMatrix, wt: DistanceMatrix) -> CrossMatrix:
    """Assemble the doubled matrix for one comparison direction.

    ``w`` is the distance matrix of the cloud whose scale defines the
    closing times, ``wt`` the matrix of the other cloud.  Sizes must match
    and be at least 2.
    """
    if w.n != wt.n:
        raise ValueError(f"size mismatch: {w.n} vs {wt.n}")
    n = w.n
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if not (np.all(np.isfinite(w.entries)) and np.all(np.isfinite(wt.entries))):
        raise ValueError("input matrices must be finite")
    wp = w.entries.copy()
    wp[np.tril_indices(n, k=-1)] = BLOCKED
    mn = np.minimum(w.entries, wt.entries)
    m = np.empty((2 * n, 2 * n), dtype=np.float64)
    m[:n, :n] = 0.0
    m[:n, n:] = wp.T
    m[n:, :n] = wp
    m[n:, n:] = mn
    np.fill_diagonal(m, 0.0)
    assert np.array_equal(m, m.T), "doubled matrix must be symmetric by construction"

    src = np.empty((2 * n, 2 * n), dtype=np.int8)
    src[:n, :n] = SRC_ZERO
    cross = np.where(np.isfinite(wp), SRC_WPLUS, SRC_BLOCKED).astype(np.int8)
    src[n:, :n] = cross
    src[:n, n:] = cross.T
    src[n:, n:] = np.where(w.entries <= wt.entries, SRC_MIN_W, SRC_MIN_WT).astype(np.int8)
    src[np.arange(2 * n), np.arange(2 * n)] = SRC_ZERO
    src.flags.writeable = False
    return CrossMatrix(entries=m, source=src, n=n)


def _restrict(bc: Barcode, dim: int) -> Barcode:
    return Barcode(
        pairs=tuple(p for p in bc.pairs if p.dim == dim),
        max_dim_computed=bc.max_dim_computed,
        zero_length_pairs=tuple(p for p in bc.zero_length_pairs if p.dim == dim),
    )


def _directed_barcode(
    p: PointCloud, pt: PointCloud
) -> tuple[Barcode, CrossMatrix, DistanceMatrix, DistanceMatrix]:
    """H1 barcode of the doubled complex for one direction, plus inputs."""
    if p.n != pt.n:
        raise ValueError(f"clouds must have the same number of points: {p.n} vs {pt.n}")
    w = pairwise_distances(p)
    wt = pairwise_distances(pt)
    cm = build_rtd_matrix(w, wt)
    fc = build_vr_filtration(DistanceMatrix(cm.entries), max_dim=2)
    bc = _restrict(compute_persistence(fc), dim=1)
    for pair in bc.pairs:
        if pair.is_infinite:
            raise DivergenceError(
                "doubled complex produced an infinite 1-dimensional interval; "
                "the comparison matrix is malformed"
            )
    return bc, cm, w, wt


def r_cross_barcode(p: PointCloud, pt: PointCloud, dim: int = 1) -> Barcode:
    """Directed comparison barcode of two clouds with matched rows.

    Only dimension 1 carries signal: dimension 0 of the doubled complex is
    entirely zero-length because the first copy is mutually at distance 0.
    """
    if dim != 1:
        raise ValueError(f"only dim=1 is supported, got {dim}")
    bc, _, _, _ = _directed_barcode(p, pt)
    return bc


@dataclass(frozen=True)
class RtdReport:
    """Score plus the two directed barcodes behind it."""

    score: float
    barcode_fwd: Barcode
    barcode_bwd: Barcode

    @property
    def critical_maps(self) -> dict[str, tuple]:
        """Per-direction ((birth, simplex), (death, simplex)) endpoints."""
        def endpoints(bc: Barcode) -> tuple:
            items = []
            for p in (*bc.pairs, *bc.zero_length_pairs):
                items.append(((p.birth, p.birth_simplex), (p.death, p.death_simplex)))
            return tuple(items)

        return {
            "forward": endpoints(self.barcode_fwd),
            "backward": endpoints(self.barcode_bwd),
        }


def _half_sum(bc: Barcode) -> float:
    return sum(p.length for p in bc.pairs)


def rtd_score(p: PointCloud, pt: PointCloud) -> RtdReport:
    """Symmetrised topology divergence between two matched clouds.

    Half the sum of H1 interval lengths over both comparison directions.
    Identical clouds give exactly 0.0: every interval of the doubled
    complex is then zero-length and dropped.
    """
    fwd, _, _, _ = _directed_barcode(p, pt)
    bwd, _, _, _ = _directed_barcode(pt, p)
    return RtdReport(
        score=0.5 * (_half_sum(fwd) + _half_sum(bwd)),
        barcode_fwd=fwd,
        barcode_bwd=bwd,
    )


def cross_barcode(p: PointCloud, q: PointCloud) -> Barcode:
    """H1 barcode of P relative to Q in a shared ambient space.

    Vietoris-Rips on the union of both clouds with all intra-Q distances
    forced to 0; Q acts as an already-connected reference against which the
    cycles of P are measured.  Sizes may differ; ambient dimension must
    match.
    """
    if p.dim != q.dim:
        raise ValueError(f"ambient dimensions differ: {p.dim} vs {q.dim}")
    pts = np.concatenate([p.points, q.points], axis=0)
    d = pairwise_distances(PointCloud(pts)).entries.copy()
    d[p.n :, p.n :] = 0.0
    fc = build_vr_filtration(DistanceMatrix(d), max_dim=2)
    return _restrict(compute_persistence(fc), dim=1)


def mtop_div(p: PointCloud, q: PointCloud) -> float:
    """Sum of H1 interval lengths of the cross barcode."""
    bc = cross_barcode(p, q)
    for pair in bc.pairs:
        if pair.is_infinite:
            raise DivergenceError("cross barcode has an infinite interval")
    return _half_sum(bc)
