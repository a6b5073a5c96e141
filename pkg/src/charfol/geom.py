"""Planar helpers for periodic parameter domains."""

from __future__ import annotations

import numpy as np


def rot90ccw(w):
    """Rotate a 2-vector by +90 degrees."""
    w = np.asarray(w, dtype=float)
    return np.stack([-w[..., 1], w[..., 0]], axis=-1)


def wrap_delta(p, q, periods):
    """Shortest representative of ``p - q`` given per-axis periods (None = flat)."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    for i, per in enumerate(periods):
        if per:
            d[..., i] = (d[..., i] + 0.5 * per) % per - 0.5 * per
    return d


def wrap_point(p, periods):
    p = np.array(p, dtype=float)
    for i, per in enumerate(periods):
        if per:
            p[..., i] = p[..., i] % per
    return p


def wrap_dist(p, q, periods):
    return float(np.hypot(*wrap_delta(p, q, periods)))


def polyline_arclengths(points):
    """Cumulative arclength along a polyline of shape (n, 2)."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_at_arclength(points, arclengths, s):
    """Linear interpolation of a polyline at arclength ``s``."""
    s = float(np.clip(s, 0.0, arclengths[-1]))
    i = int(np.searchsorted(arclengths, s, side="right") - 1)
    i = min(max(i, 0), len(points) - 2)
    span = arclengths[i + 1] - arclengths[i]
    w = 0.0 if span == 0 else (s - arclengths[i]) / span
    return points[i] * (1 - w) + points[i + 1] * w


def resample_polyline(points, n):
    """Resample a polyline to ``n`` points uniform in arclength."""
    arcs = polyline_arclengths(points)
    if arcs[-1] == 0:
        return np.repeat(points[:1], n, axis=0)
    targets = np.linspace(0.0, arcs[-1], n)
    return np.array([point_at_arclength(points, arcs, s) for s in targets])


def min_dist_to_polyline(p, points, periods):
    """Distance from p to a sampled polyline (vertex-based, periodic)."""
    d = wrap_delta(points, np.asarray(p, dtype=float), periods)
    return float(np.min(np.hypot(d[:, 0], d[:, 1])))


def chain_points(points, periods, start=None):
    """Order a cloud of points along a curve by greedy nearest-neighbor walking.

    Assumes the points sample a simple closed curve densely.  Returns the
    ordered array.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n <= 2:
        return pts.copy()
    used = np.zeros(n, dtype=bool)
    idx = 0 if start is None else start
    order = [idx]
    used[idx] = True
    for _ in range(n - 1):
        cur = pts[order[-1]]
        d = wrap_delta(pts, cur, periods)
        dist = np.hypot(d[:, 0], d[:, 1])
        dist[used] = np.inf
        nxt = int(np.argmin(dist))
        order.append(nxt)
        used[nxt] = True
    return pts[order]
