"""Shared fixtures and helpers for the test suite."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtdtopo import PointCloud, pairwise_distances


@pytest.fixture
def unit_square() -> PointCloud:
    return PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))


@pytest.fixture
def triangle_345() -> PointCloud:
    return PointCloud(np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]))


def random_cloud(rng: np.random.Generator, n: int, d: int, scale: float = 1.0) -> PointCloud:
    return PointCloud(scale * rng.standard_normal((n, d)))


def has_near_ties(p: PointCloud, pt: PointCloud, gap: float = 1e-6) -> bool:
    """True when a pair of comparison values is too close for stable
    finite differences: near-equal distinct entries, a near-zero distance,
    or w and w~ nearly crossing somewhere."""
    w = pairwise_distances(p).entries
    wt = pairwise_distances(pt).entries
    n = p.n
    iu = np.triu_indices(n, k=1)
    wv = w[iu]
    wtv = wt[iu]
    if np.any(wv < gap) or np.any(wtv < gap):
        return True
    if np.any(np.abs(wv - wtv) < gap):
        return True
    allv = np.sort(np.concatenate([wv, wtv]))
    return bool(np.any(np.diff(allv) < gap))


def circle_cloud(n: int, radius: float = 1.0, center=(0.0, 0.0), jitter: float = 0.0,
                 rng: np.random.Generator | None = None) -> PointCloud:
    angles = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1) * radius
    pts = pts + np.asarray(center)
    if jitter and rng is not None:
        pts = pts + jitter * rng.standard_normal(pts.shape)
    return PointCloud(pts)
