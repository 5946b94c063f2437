"""Topology divergence between paired representations.

Scores pairs of point clouds that share row indices: identical clouds score
zero, rigid motions keep the score at zero, and structural edits such as
collapsing clusters or tearing a loop push it up. Ends with the cross
barcode between two separate clouds.
"""
import numpy as np

from rtdtopo import PointCloud, cross_barcode, mtop_div, rtd_score


def score(title: str, p: PointCloud, q: PointCloud) -> None:
    r = rtd_score(p, q)
    print(f"{title:<42s} rtd = {r.score:.6f}")


def main() -> None:
    rng = np.random.default_rng(7)
    base = rng.standard_normal((40, 8))
    p = PointCloud(base)

    score("identical copies", p, PointCloud(base.copy()))

    theta = 0.7
    rot = np.eye(8)
    rot[:2, :2] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    score("rotated + translated", p, PointCloud(base @ rot.T + 3.0))

    score("mild noise (sigma 0.05)", p, PointCloud(base + 0.05 * rng.standard_normal(base.shape)))
    score("heavy noise (sigma 1.0)", p, PointCloud(base + 1.0 * rng.standard_normal(base.shape)))

    collapsed = base.copy()
    collapsed[20:] = collapsed[20:] * 0.05 + collapsed[20:].mean(axis=0)
    score("half the rows collapsed to a point", p, PointCloud(collapsed))

    angles = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    torn = ring.copy()
    torn[: 20] += [2.5, 0.0]
    score("circle vs torn circle", PointCloud(ring), PointCloud(torn))

    # Three corners of a square as P, the fourth corner as the reference Q.
    # Linking the corners through the contracted Q closes a loop that only
    # the long diagonal can fill, so one robust bar must appear.
    corners = ([0.0, 0.0], [4.0, 0.0], [4.0, 4.0])
    blobs = [c + 0.05 * rng.standard_normal((4, 2)) for c in map(np.asarray, corners)]
    pc = PointCloud(np.concatenate(blobs))
    qc = PointCloud(np.asarray([0.0, 4.0]) + 0.05 * rng.standard_normal((4, 2)))
    bc = cross_barcode(pc, qc)
    print(f"\ncross barcode of three square corners vs the fourth: {len(bc.pairs)} bars")
    longest = max(bc.pairs, key=lambda b: b.length)
    print(f"  longest bar [{longest.birth:.3f}, {longest.death:.3f})")
    print(f"mtop_div = {mtop_div(pc, qc):.4f}")


if __name__ == "__main__":
    main()
