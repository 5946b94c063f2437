"""Subgradients of the topology divergence with respect to point coordinates.

Each positive-length H1 interval contributes +1 at its death simplex and -1
at its birth simplex.  A simplex value is the max of its edge values, so the
contribution flows to the largest edge (ties resolved to the
lexicographically smallest edge); the edge's provenance in the doubled
matrix then routes it to an entry of w or w~, and finally to the two points
of the corresponding cloud through the Euclidean distance.  Zero-length
intervals contribute nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergence import (
    SRC_MIN_W,
    SRC_MIN_WT,
    SRC_WPLUS,
    SRC_ZERO,
    CrossMatrix,
    RtdReport,
    _directed_barcode,
    _half_sum,
)
from .geometry import PointCloud, Simplex
from .persistence import Barcode


@dataclass(frozen=True)
class RtdGradient:
    """Coordinate subgradients for both clouds of one comparison."""

    grad_p: np.ndarray
    grad_pt: np.ndarray


def _argmax_edge(simplex: Simplex, entries: np.ndarray) -> tuple[int, int]:
    """Edge of the simplex realising its filtration value.

    Edges are scanned in lexicographic order and only a strictly larger
    value replaces the current best, so ties pick the smallest edge.
    """
    v = simplex.vertices
    if len(v) == 2:
        return v[0], v[1]
    best = None
    best_val = -np.inf
    for a, b in ((v[0], v[1]), (v[0], v[2]), (v[1], v[2])):
        val = entries[a, b]
        if val > best_val:
            best_val = val
            best = (a, b)
    return best


def _route(cm: CrossMatrix, u: int, v: int, coef: float, dw: np.ndarray, dwt: np.ndarray) -> None:
    """Add ``coef`` to the w or w~ entry behind doubled edge (u, v)."""
    code = int(cm.source[u, v])
    n = cm.n
    if code == SRC_ZERO:
        return
    if code == SRC_WPLUS:
        i, j = v - n, u  # u < n <= v, entry w+[v-n][u]
    else:
        i, j = u - n, v - n
    if i == j:
        return
    a, b = (i, j) if i < j else (j, i)
    if code == SRC_MIN_WT:
        dwt[a, b] += coef
    else:
        dw[a, b] += coef


def _coordinate_grads(dS: np.ndarray, cloud: PointCloud, dist: np.ndarray) -> np.ndarray:
    """Chain a symmetric-entry gradient through Euclidean distances."""
    g = np.zeros_like(cloud.points)
    rows, cols = np.nonzero(dS)
    for i, j in zip(rows, cols):
        d = dist[i, j]
        if d == 0.0:
            continue
        direction = (cloud.points[i] - cloud.points[j]) / d
        g[i] += dS[i, j] * direction
        g[j] -= dS[i, j] * direction
    return g


def _direction_grads(
    first: PointCloud, second: PointCloud
) -> tuple[np.ndarray, np.ndarray, Barcode]:
    """Gradients of one directed term w.r.t. both clouds, plus its barcode."""
    bc, cm, w, wt = _directed_barcode(first, second)
    n = cm.n
    dw = np.zeros((n, n))
    dwt = np.zeros((n, n))
    for pair in bc.pairs:
        for simplex, coef in ((pair.death_simplex, 1.0), (pair.birth_simplex, -1.0)):
            u, v = _argmax_edge(simplex, cm.entries)
            _route(cm, u, v, coef, dw, dwt)
    g_first = _coordinate_grads(dw, first, w.entries)
    g_second = _coordinate_grads(dwt, second, wt.entries)
    return g_first, g_second, bc


def rtd_subgradient(p: PointCloud, pt: PointCloud) -> tuple[RtdGradient, RtdReport]:
    """Subgradient of the divergence score in both clouds' coordinates."""
    gp_f, gpt_f, bc_f = _direction_grads(p, pt)
    gpt_b, gp_b, bc_b = _direction_grads(pt, p)
    grad = RtdGradient(grad_p=0.5 * (gp_f + gp_b), grad_pt=0.5 * (gpt_f + gpt_b))
    report = RtdReport(
        score=0.5 * (_half_sum(bc_f) + _half_sum(bc_b)),
        barcode_fwd=bc_f,
        barcode_bwd=bc_b,
    )
    return grad, report


def descend_rtd(
    p: PointCloud, pt: PointCloud, steps: int, lr: float
) -> tuple[PointCloud, list[float]]:
    """Gradient descent on the second cloud to shrink the divergence.

    The first cloud stays fixed.  Returns the final second cloud and the
    score trace, one entry per step evaluated before that step's update.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if lr < 0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    current = pt.points.copy()
    trace: list[float] = []
    for _ in range(steps):
        grad, report = rtd_subgradient(p, PointCloud(current))
        trace.append(report.score)
        current = current - lr * grad.grad_pt
    return PointCloud(current), trace
