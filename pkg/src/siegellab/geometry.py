"""Polygon/polyline primitives shared by the disk, bubble, and puzzle code.

Curves are arrays of complex samples.  A "polygon" is implicitly closed
(last vertex joins the first); a "polyline" is open.  All predicates are
numpy-vectorized; nothing here knows about dynamics.
"""

from __future__ import annotations

import numpy as np


def as_curve(points) -> np.ndarray:
    return np.asarray(points, dtype=np.complex128)


def polygon_contains(poly: np.ndarray, z: complex) -> bool:
    """Even-odd crossing test for a single point against a closed polygon."""
    return bool(polygon_contains_many(poly, np.asarray([z]))[0])


def polygon_contains_many(poly: np.ndarray, zs) -> np.ndarray:
    """Even-odd crossing test, vectorized over query points.

    Standard upward/downward edge-crossing count against the horizontal ray
    to +infinity from each query point.
    """
    poly = as_curve(poly)
    zs = np.asarray(zs, dtype=np.complex128).ravel()
    x0, y0 = poly.real, poly.imag
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    px = zs.real[:, None]
    py = zs.imag[:, None]
    straddles = (y0[None, :] > py) != (y1[None, :] > py)
    # x-coordinate где the edge crosses the horizontal line through the point
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (py - y0[None, :]) / (y1 - y0)[None, :]
        xc = x0[None, :] + t * (x1 - x0)[None, :]
    crossing = straddles & (xc > px)
    return (crossing.sum(axis=1) % 2).astype(bool)


def dist_to_segments(a: np.ndarray, b: np.ndarray, z: complex) -> float:
    """Minimum distance from z to the union of segments a[i]->b[i]."""
    d = b - a
    denom = np.abs(d) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((z - a) * np.conj(d)).real / denom
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    nearest = a + t * d
    return float(np.min(np.abs(z - nearest)))


def dist_to_polygon(poly: np.ndarray, z: complex) -> float:
    poly = as_curve(poly)
    return dist_to_segments(poly, np.roll(poly, -1), z)


def dist_to_polyline(path: np.ndarray, z: complex) -> float:
    path = as_curve(path)
    if len(path) == 1:
        return float(abs(z - path[0]))
    return dist_to_segments(path[:-1], path[1:], z)


def polygon_winding(poly: np.ndarray, z: complex = 0j) -> int:
    """Winding number of the closed polygon around z (angle-sum form)."""
    poly = as_curve(poly)
    angles = np.angle(poly - z)
    total = np.diff(np.concatenate([angles, angles[:1]]))
    total = np.mod(total + np.pi, 2 * np.pi) - np.pi
    return int(np.round(total.sum() / (2 * np.pi)))


def polygon_area(poly: np.ndarray) -> float:
    """Unsigned shoelace area."""
    poly = as_curve(poly)
    x, y = poly.real, poly.imag
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def polygon_is_simple(poly: np.ndarray, block: int = 512) -> bool:
    """True when no two non-adjacent edges properly cross.

    O(m^2) orientation tests, evaluated in row blocks so an m = 4096 polygon
    stays within a few tens of MB.
    """
    poly = as_curve(poly)
    m = len(poly)
    if m < 4:
        return True
    scale = float(np.max(np.abs(poly)))
    if not np.isfinite(scale):
        return False
    if scale > 0:  # orientation signs are scale-invariant; avoid overflow
        poly = poly / scale
    ax, ay = poly.real, poly.imag
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    idx = np.arange(m)
    for start in range(0, m, block):
        rows = idx[start : start + block]
        # proper-crossing test of edge i against all edges j
        o1 = _orient(ax[rows, None], ay[rows, None], bx[rows, None], by[rows, None], ax[None, :], ay[None, :])
        o2 = _orient(ax[rows, None], ay[rows, None], bx[rows, None], by[rows, None], bx[None, :], by[None, :])
        o3 = _orient(ax[None, :], ay[None, :], bx[None, :], by[None, :], ax[rows, None], ay[rows, None])
        o4 = _orient(ax[None, :], ay[None, :], bx[None, :], by[None, :], bx[rows, None], by[rows, None])
        crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
        # adjacent edges (and self) share endpoints; they cannot properly cross
        j = idx[None, :]
        i = rows[:, None]
        adjacent = (j == i) | (j == (i + 1) % m) | (j == (i - 1) % m)
        if np.any(crossing & ~adjacent):
            return False
    return True


def segment_crossings(path: np.ndarray, p: complex, q: complex, closed: bool = False) -> int:
    """Count proper crossings of segment p->q with a polyline/polygon."""
    path = as_curve(path)
    a = path if closed else path[:-1]
    b = np.roll(path, -1) if closed else path[1:]
    o1 = _orient(a.real, a.imag, b.real, b.imag, p.real, p.imag)
    o2 = _orient(a.real, a.imag, b.real, b.imag, q.real, q.imag)
    o3 = _orient(p.real, p.imag, q.real, q.imag, a.real, a.imag)
    o4 = _orient(p.real, p.imag, q.real, q.imag, b.real, b.imag)
    return int(np.count_nonzero((o1 * o2 < 0) & (o3 * o4 < 0)))
