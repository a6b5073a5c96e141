"""Leaf integration: normalized flow with terminal classification.

Leaves are integrated with the unit field Y/|Y| so budgets and capture
tests are arclength statements independent of the scale of Y.  The solver
runs in unwrapped coordinates (the field is evaluated modulo the domain
periods) and termination is detected on densely sampled output: capture
balls around singularities, proximity to non-generic singular loci,
boundary exit, or an exhausted arclength budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from .geom import resample_polyline, rot90ccw, wrap_delta
from .surfaces import TOPO_TORUS

LIMIT_SINGULARITY = "singularity"
LIMIT_CLOSED_LEAF = "closed-leaf"
LIMIT_BOUNDARY = "boundary-exit"
LIMIT_BUDGET = "budget-exhausted"
LIMIT_LOCUS = "singular-locus"


class ReturnMapError(RuntimeError):
    """A first-return computation left the section or failed to return."""


class _RhsBudgetExceeded(RuntimeError):
    """Safety valve: the solver is grinding on a field discontinuity."""


class LocusSet:
    """Dense, periodically imaged sampling of singular loci for capture tests."""

    def __init__(self, loci, periods, spacing):
        self.n = len(loci)
        self.tree = None
        if not self.n:
            return
        pts = []
        labels = []
        for li, locus in enumerate(loci):
            poly = np.asarray(getattr(locus, "points", locus), dtype=float)
            m = max(int(np.ceil(_poly_len(poly) / spacing)) + 1, len(poly))
            dense = resample_polyline(poly, m)
            for su in ((-1.0, 0.0, 1.0) if periods[0] else (0.0,)):
                for sv in ((-1.0, 0.0, 1.0) if periods[1] else (0.0,)):
                    pts.append(dense + np.array([su, sv]))
                    labels.append(np.full(len(dense), li))
        self._pts = np.concatenate(pts)
        self._labels = np.concatenate(labels)
        self.tree = cKDTree(self._pts)

    def hits(self, samples, radius):
        """(first sample index inside radius, locus label) or (None, None)."""
        if not self.n:
            return None, None
        d, idx = self.tree.query(samples, k=1)
        inside = np.nonzero(d < radius)[0]
        if not len(inside):
            return None, None
        k = int(inside[0])
        return k, int(self._labels[idx[k]])

    def near(self, point, radius):
        if not self.n:
            return None
        d, idx = self.tree.query(np.asarray(point, dtype=float), k=1)
        return int(self._labels[idx]) if d < radius else None


def _poly_len(poly):
    return float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum()) or 1.0


@dataclass
class CaptureBall:
    """Terminal neighborhood of a singularity in the parameter domain."""

    index: int
    point: np.ndarray
    radius: float
    is_pole: bool = False

    def distances(self, pts, periods):
        if self.is_pole:
            return np.abs(pts[:, 1] - self.point[1])
        d = wrap_delta(pts, self.point, periods)
        return np.hypot(d[:, 0], d[:, 1])


@dataclass
class LeafPath:
    """A numerically integrated leaf with its terminal classification."""

    points: np.ndarray            # (n, 2), unwrapped
    arclengths: np.ndarray        # (n,)
    limit_kind: str
    limit_ref: Optional[int] = None
    direction: int = 1
    stalled: bool = False

    @property
    def arclength(self):
        return float(self.arclengths[-1]) if len(self.arclengths) else 0.0

    def endpoint(self):
        return self.points[-1]

    def tangent_at_end(self):
        if len(self.points) < 2:
            return np.array([1.0, 0.0])
        d = self.points[-1] - self.points[-2]
        n = np.linalg.norm(d)
        return d / n if n > 0 else np.array([1.0, 0.0])


def _v_exit(points, topology):
    if topology == TOPO_TORUS:
        return None
    out = np.nonzero((points[:, 1] <= 0.0) | (points[:, 1] >= 1.0))[0]
    return int(out[0]) if len(out) else None


def run_flow(field, seed, direction, budget, cfg, captures=(), loci=(),
             release_ball: Optional[int] = None):
    """Integrate the unit field from ``seed``; returns a LeafPath.

    ``captures`` is a sequence of CaptureBall; ``release_ball`` names a
    capture that stays inactive until the path has left twice its radius
    (used when launching separatrices from their own saddle).  Terminal
    solver events stop the integration at ball boundaries, which keeps the
    solver away from the field's zeros where steps would collapse.
    """
    sgn = float(direction)
    calls = [0]

    def rhs(_, y):
        calls[0] += 1
        if calls[0] > 50_000:
            raise _RhsBudgetExceeded
        return sgn * field.unit(y)

    periods = field.periods
    y0 = np.asarray(seed, dtype=float)
    pts = [y0.copy()]
    arcs = [0.0]
    s_done = 0.0
    locus_set = loci if isinstance(loci, LocusSet) else LocusSet(
        loci, periods, 0.5 * cfg.capture_eps)

    active = list(captures)
    if release_ball is not None:
        # release leg: run until twice the origin ball radius, origin inactive
        origin = captures[release_ball]
        others = [b for i, b in enumerate(captures) if i != release_ball]

        def release_event(_, y):
            return origin.distances(y[None, :], periods)[0] - 2.0 * origin.radius

        release_event.terminal = True
        leg = _flow_leg(field, rhs, calls, y0, min(1.0, budget), cfg, others,
                        locus_set, periods, extra_events=[release_event])
        pts.extend(leg["points"][1:])
        arcs.extend((s_done + leg["arcs"][1:]).tolist())
        s_done += leg["arcs"][-1]
        y0 = leg["points"][-1].copy()
        if leg["kind"] not in (None, "release"):
            return LeafPath(np.array(pts), np.array(arcs), leg["kind"],
                            leg["ref"], int(direction), leg["stalled"])
        if leg["kind"] is None and s_done >= budget:
            return LeafPath(np.array(pts), np.array(arcs), LIMIT_BUDGET, None,
                            int(direction), leg["stalled"])

    while s_done < budget:
        leg = _flow_leg(field, rhs, calls, y0, min(4.0, budget - s_done), cfg,
                        active, locus_set, periods)
        pts.extend(leg["points"][1:])
        arcs.extend((s_done + leg["arcs"][1:]).tolist())
        s_done += leg["arcs"][-1]
        y0 = leg["points"][-1].copy()
        if leg["kind"] is not None:
            return LeafPath(np.array(pts), np.array(arcs), leg["kind"],
                            leg["ref"], int(direction), leg["stalled"])
        if leg["stalled"]:
            return LeafPath(np.array(pts), np.array(arcs), LIMIT_BUDGET, None,
                            int(direction), stalled=True)

    return LeafPath(np.array(pts), np.array(arcs), LIMIT_BUDGET, None,
                    int(direction))


def _flow_leg(field, rhs, calls, y0, seg, cfg, balls, locus_set, periods,
              extra_events=()):
    """One solver segment with terminal capture events.

    Returns a dict with points, arcs, and the termination (kind, ref) where
    kind None means the segment simply ended; kind "release" marks an
    extra-event stop.
    """
    events = []

    def ball_event(_, y):
        p = y[None, :]
        return min(b.distances(p, periods)[0] - b.radius for b in balls)

    def locus_event(_, y):
        d, _idx = locus_set.tree.query(field.wrap(y))
        return d - cfg.capture_eps

    def boundary_event(_, y):
        return min(y[1], 1.0 - y[1])

    if balls:
        ball_event.terminal = True
        events.append(("ball", ball_event))
    if locus_set.n:
        locus_event.terminal = True
        events.append(("locus", locus_event))
    if field.topology != TOPO_TORUS:
        boundary_event.terminal = True
        events.append(("boundary", boundary_event))
    for ev in extra_events:
        events.append(("release", ev))

    calls[0] = 0
    try:
        sol = solve_ivp(rhs, (0.0, seg), y0, dense_output=True,
                        rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step,
                        events=[e for _, e in events])
    except _RhsBudgetExceeded:
        kind, ref = LIMIT_BUDGET, None
        near = locus_set.near(field.wrap(y0), 10 * cfg.capture_eps)
        if near is not None:
            kind, ref = LIMIT_LOCUS, near
        else:
            for b in balls:
                if b.distances(y0[None, :], periods)[0] < 5 * b.radius:
                    kind, ref = LIMIT_SINGULARITY, b.index
                    break
        return {"points": y0[None, :], "arcs": np.array([0.0]),
                "kind": kind, "ref": ref, "stalled": True}

    t_end = float(sol.t[-1])
    n_samp = max(int(np.ceil(t_end / cfg.sample_ds)), 2)
    ts = np.linspace(0.0, t_end, n_samp + 1)
    ys = sol.sol(ts).T

    kind, ref = None, None
    stalled = False
    if sol.status == 1:  # an event fired
        fired = [i for i, te in enumerate(sol.t_events) if len(te)]
        label = events[fired[0]][0]
        y_end = ys[-1]
        if label == "ball":
            dists = [b.distances(y_end[None, :], periods)[0] - b.radius
                     for b in balls]
            kind, ref = LIMIT_SINGULARITY, balls[int(np.argmin(dists))].index
        elif label == "locus":
            kind = LIMIT_LOCUS
            ref = locus_set.near(field.wrap(y_end), 2 * cfg.capture_eps)
            ref = 0 if ref is None else ref
        elif label == "boundary":
            kind = LIMIT_BOUNDARY
        else:
            kind = "release"
    elif sol.status != 0 or t_end < 0.25 * seg:
        stalled = True
        near = locus_set.near(field.wrap(ys[-1]), 10 * cfg.capture_eps)
        if near is not None:
            kind, ref = LIMIT_LOCUS, near
        else:
            for b in balls:
                if b.distances(ys[-1][None, :], periods)[0] < 5 * b.radius:
                    kind, ref = LIMIT_SINGULARITY, b.index
                    break
    return {"points": ys, "arcs": ts, "kind": kind, "ref": ref,
            "stalled": stalled}


def capture_balls(singularities, cfg):
    """Capture balls for a singularity list (saddles use connection_tol)."""
    balls = []
    for i, s in enumerate(singularities):
        radius = cfg.connection_tol if s.is_saddle_like else cfg.capture_eps
        balls.append(CaptureBall(i, np.asarray(s.location, dtype=float), radius,
                                 is_pole=s.is_pole))
    return balls


def integrate_leaf(field, seed, direction, cfg, singularities=(), loci=(),
                   known_cycles=(), budget=None, release_ball=None):
    """Public leaf integration with closed-leaf post-classification."""
    budget = cfg.arclength_budget if budget is None else budget
    balls = capture_balls(singularities, cfg)
    path = run_flow(field, seed, direction, budget, cfg, balls, loci,
                    release_ball=release_ball)
    if path.limit_kind == LIMIT_BUDGET and known_cycles:
        end = path.points[-1]
        for ci, cyc in enumerate(known_cycles):
            d = wrap_delta(cyc.points, end, field.periods)
            if np.hypot(d[:, 0], d[:, 1]).min() < 5 * cfg.capture_eps:
                return LeafPath(path.points, path.arclengths, LIMIT_CLOSED_LEAF,
                                ci, path.direction, path.stalled)
    return path


def detect_recurrent_loop(path: LeafPath, periods, cfg):
    """Extract a closed-loop candidate from the tail of a budget-limited orbit.

    Returns the loop polyline or None.  The test looks for an earlier passage
    near the endpoint with aligned direction and a genuine arclength gap.
    """
    pts, arcs = path.points, path.arclengths
    if len(pts) < 10:
        return None
    end = pts[-1]
    tang_end = path.tangent_at_end()
    d = wrap_delta(pts[:-5], end, periods)
    dist = np.hypot(d[:, 0], d[:, 1])
    close = np.nonzero(dist < cfg.recurrence_radius)[0]
    if not len(close):
        return None
    gaps = arcs[-1] - arcs[close]
    ok = close[(gaps > 0.3)]
    if not len(ok):
        return None
    j = int(ok[-1])
    seg = pts[min(j + 1, len(pts) - 1)] - pts[j]
    n = np.linalg.norm(seg)
    if n == 0 or float(seg @ tang_end) / n < 0.5:
        return None
    return pts[j:]


# ----------------------------------------------------------------------
# transversals and first-return maps
# ----------------------------------------------------------------------

@dataclass
class Transversal:
    """Oriented section through ``base``.

    The transversal direction is the +90 degree rotation of the flow
    direction at the base point, so that (flow, transversal) is a
    positively oriented frame of the parameter domain.
    """

    base: np.ndarray
    normal: np.ndarray
    flow_dir: np.ndarray
    halfwidth: float
    periods: tuple

    def point(self, x):
        return self.base + float(x) * self.normal

    def coord(self, p):
        d = wrap_delta(np.asarray(p, dtype=float), self.base, self.periods)
        return float(d @ self.normal)

    def along(self, p):
        d = wrap_delta(np.asarray(p, dtype=float), self.base, self.periods)
        return float(d @ self.flow_dir)


def make_transversal(field, base, halfwidth=None, cfg=None):
    hw = halfwidth if halfwidth is not None else (cfg.transversal_halfwidth if cfg else 0.05)
    base = np.asarray(base, dtype=float)
    fd = field.unit(base)
    return Transversal(base, rot90ccw(fd), fd, hw, field.periods)


def _crossings(points, arcs, tr, lo_arc=0.0, width_factor=1.0, direction=1):
    """Crossings of a sampled path through a transversal, in the direction
    of motion (``along`` increasing for direction +1, decreasing for -1)."""
    along = np.array([tr.along(p) for p in points])
    coord = np.array([tr.coord(p) for p in points])
    if direction < 0:
        along = -along
    local = (np.abs(along) < 0.3) & (np.abs(coord) < 3 * tr.halfwidth)
    hits = []
    for k in range(1, len(points)):
        if arcs[k] < lo_arc or not (local[k - 1] and local[k]):
            continue
        if along[k - 1] < 0.0 <= along[k]:
            w = -along[k - 1] / (along[k] - along[k - 1])
            x = coord[k - 1] * (1 - w) + coord[k] * w
            if abs(x) <= width_factor * tr.halfwidth:
                hits.append((arcs[k - 1] * (1 - w) + arcs[k] * w, float(x)))
    return hits


def path_section_ordinate(path: LeafPath, tr: Transversal, min_arc=0.0):
    """Ordinate of the first positive crossing of ``tr`` by the path."""
    hits = _crossings(path.points, path.arclengths, tr, lo_arc=min_arc,
                      width_factor=1.0)
    return hits[0][1] if hits else None


def first_return(field, tr: Transversal, x0, cfg, singularities=(), loci=(),
                 min_arc=0.05, max_arc=None, with_path=False, direction=1):
    """First return of the flow through the oriented transversal.

    With ``direction=-1`` this computes the return map of the reversed
    flow, i.e. the inverse Poincare map in the same section coordinate
    (used to pin down repelling cycles).  Returns (x1, arclength) or
    (x1, arclength, path).  Raises ReturnMapError when the orbit is
    captured or fails to come back within the arc allowance.
    """
    max_arc = cfg.max_return_arc if max_arc is None else max_arc
    balls = capture_balls(singularities, cfg)
    locus_pts = loci if isinstance(loci, LocusSet) else LocusSet(
        loci, field.periods, 0.5 * cfg.capture_eps)
    # integrate chunk by chunk so the orbit stops at its first crossing
    pts = [np.asarray(tr.point(x0), dtype=float)]
    arcs = [0.0]
    done = 0.0
    chunk = 2.0
    while done < max_arc:
        path = run_flow(field, pts[-1], direction, min(chunk, max_arc - done),
                        cfg, balls, locus_pts)
        if path.limit_kind in (LIMIT_SINGULARITY, LIMIT_LOCUS, LIMIT_BOUNDARY):
            raise ReturnMapError(f"orbit left the section region ({path.limit_kind})")
        new_pts = np.concatenate([np.asarray(pts[-1])[None, :], path.points[1:]])
        new_arcs = np.concatenate([[done], done + path.arclengths[1:]])
        hits = _crossings(new_pts, new_arcs, tr, lo_arc=min_arc,
                          width_factor=3.0, direction=direction)
        if hits:
            arc, x1 = hits[0]
            if with_path:
                pts_all = np.concatenate([np.array(pts), path.points[1:]])
                arcs_all = np.concatenate([np.array(arcs), done + path.arclengths[1:]])
                k = int(np.searchsorted(arcs_all, arc)) + 1
                loop = LeafPath(pts_all[:k], arcs_all[:k], LIMIT_CLOSED_LEAF,
                                None, direction)
                return x1, arc, loop
            return x1, arc
        if with_path:
            pts.extend(path.points[1:])
            arcs.extend((done + path.arclengths[1:]).tolist())
        else:
            pts = [path.points[-1]]
            arcs = [done + path.arclengths[-1]]
        done += path.arclengths[-1]
        if path.stalled:
            break
    raise ReturnMapError("orbit did not return to the section")
