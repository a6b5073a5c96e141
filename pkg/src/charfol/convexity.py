"""Giroux graphs, dividing sets and the convexity verdict.

The dividing multi-curve is constructed the way the convexity criterion's
proof does it: take disjoint neighborhoods of the expanding and contracting
graphs, and put one curve in each complementary annulus, transverse to the
flow.  Concretely each curve is swept out by the arclength midpoints of the
leaf arcs crossing its annulus, traced by a predictor-corrector walk.  Only
the isotopy class (component count and region incidence) is contractual;
transversality is verified a posteriori.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from .analysis import FoliationAnalysis
from .cycles import STATUS_ATTRACTING, STATUS_REPELLING
from .geom import resample_polyline, rot90ccw, wrap_delta
from .integrate import LIMIT_SINGULARITY
from .surfaces import TOPO_ANNULUS, TOPO_SPHERE, TOPO_TORUS

OBS_DEGENERATE_LEAF = "degenerate_closed_leaf"
OBS_RETROGRADE = "retrograde_connection"
OBS_PB_FAILURE = "pb_failure"
OBS_NON_GENERIC = "non_generic_locus"

TIGHT = "tight-neighborhood"
OVERTWISTED = "overtwisted-neighborhood"


class ConvexityObstructionError(RuntimeError):
    def __init__(self, obstructions):
        super().__init__(
            "foliation is not divided: " + ", ".join(o.kind for o in obstructions))
        self.obstructions = obstructions


class InternalInconsistencyError(RuntimeError):
    """A theoretical invariant failed numerically (bug or resolution)."""


class NumericalResolutionError(RuntimeError):
    """A construction could not be completed at the configured resolution."""


class UnsupportedTopologyError(ValueError):
    pass


@dataclass
class Obstruction:
    kind: str
    detail: str

    def summary(self):
        return {"kind": self.kind, "detail": self.detail}


def find_obstructions(analysis: FoliationAnalysis):
    obs = []
    for locus in analysis.loci:
        obs.append(Obstruction(OBS_NON_GENERIC,
                               f"singular locus with {len(locus.points)} samples"))
    if not analysis.pb_satisfied:
        obs.append(Obstruction(OBS_PB_FAILURE,
                               "an orbit limit could not be resolved"))
    for leaf in analysis.degenerate_leaves:
        obs.append(Obstruction(OBS_DEGENERATE_LEAF,
                               f"closed leaf with multiplier {leaf.multiplier:.8f}"))
    for conn in analysis.retrograde_connections:
        obs.append(Obstruction(
            OBS_RETROGRADE,
            f"leaf from singularity {conn.source} (-) to {conn.target} (+)"))
    return obs


# ----------------------------------------------------------------------
# Giroux graph
# ----------------------------------------------------------------------

@dataclass
class GraphHalf:
    sign: int
    node_indices: list
    saddle_indices: list
    edges: list                   # (saddle index, [paths of its two stable/unstable seps])
    cycle_indices: list           # closed-leaf indices

    @property
    def chi(self):
        return len(self.node_indices) - len(self.saddle_indices)


@dataclass
class GirouxGraph:
    plus: GraphHalf
    minus: GraphHalf
    cyclic_orders: dict           # node index -> ordered list of (saddle, branch)

    def summary(self):
        return {
            "plus": {"nodes": self.plus.node_indices,
                     "saddles": self.plus.saddle_indices,
                     "cycles": self.plus.cycle_indices,
                     "chi": self.plus.chi},
            "minus": {"nodes": self.minus.node_indices,
                      "saddles": self.minus.saddle_indices,
                      "cycles": self.minus.cycle_indices,
                      "chi": self.minus.chi},
        }


def _departure_angle(analysis, path, node_index):
    """Angle at which a separatrix path leaves the capture ball of a node."""
    field = analysis.field
    node = analysis.singularities[node_index]
    cfg = analysis.cfg
    pts = path.points
    if node.is_pole:
        # angle in the pole chart; the chart orientation flips at a
        # negatively oriented pole
        surface = field.surface
        which = node.pole
        u_end = pts[-1][0] % 1.0
        ta, tb = surface.tangent_at_pole(which)
        v_ref = 1 - 3.0 / cfg.grid_n if which == "north" else 3.0 / cfg.grid_n
        _, du, dv = surface.frame(0.0, v_ref)
        normal = np.cross(du, dv)
        s = 1.0 if float(np.cross(ta, tb) @ normal) > 0 else -1.0
        return float((s * 2 * np.pi * u_end) % (2 * np.pi))
    for p in pts[::-1]:
        d = wrap_delta(p, node.location, field.periods)
        r = float(np.hypot(d[0], d[1]))
        if r > 2 * cfg.capture_eps:
            return float(np.arctan2(d[1], d[0]) % (2 * np.pi))
    d = wrap_delta(pts[0], node.location, field.periods)
    return float(np.arctan2(d[1], d[0]) % (2 * np.pi))


def giroux_graph(analysis: FoliationAnalysis) -> GirouxGraph:
    """The expanding/contracting graphs of a divided foliation."""
    obs = find_obstructions(analysis)
    if obs:
        raise ConvexityObstructionError(obs)
    halves = {}
    for sign, stability in ((+1, "stable"), (-1, "unstable")):
        nodes = [i for i, s in enumerate(analysis.singularities)
                 if s.sign == sign and s.is_node_like]
        saddles = [i for i, s in enumerate(analysis.singularities)
                   if s.sign == sign and s.is_saddle_like]
        edges = []
        for si in saddles:
            seps = [s for s in analysis.separatrices[si] if s.stability == stability]
            for sep in seps:
                kind, ref = sep.limit
                if kind != LIMIT_SINGULARITY or ref is None or \
                        not analysis.singularities[ref].is_node_like or \
                        analysis.singularities[ref].sign != sign:
                    raise InternalInconsistencyError(
                        f"{stability} separatrix of singularity {si} does not "
                        f"limit on a sign {sign:+d} node (got {kind}/{ref})")
            edges.append((si, seps))
        status = STATUS_REPELLING if sign > 0 else STATUS_ATTRACTING
        cycles = [i for i, l in enumerate(analysis.closed_leaves)
                  if l.status == status]
        halves[sign] = GraphHalf(sign, nodes, saddles, edges, cycles)

    orders = {}
    for sign, stability in ((+1, "stable"), (-1, "unstable")):
        for si, seps in halves[sign].edges:
            for sep in seps:
                node = sep.limit[1]
                ang = _departure_angle(analysis, sep.path, node)
                orders.setdefault(node, []).append((ang, si, sep.branch))
    cyclic = {node: [(si, br) for _, si, br in sorted(items)]
              for node, items in orders.items()}
    return GirouxGraph(halves[+1], halves[-1], cyclic)


# ----------------------------------------------------------------------
# dividing sets
# ----------------------------------------------------------------------

def _half_point_sets(analysis, sign):
    """Dense point samples of the expanding (sign +1) or contracting graph."""
    field = analysis.field
    out = []
    stability = "stable" if sign > 0 else "unstable"
    for i, s in enumerate(analysis.singularities):
        if s.sign != sign:
            continue
        if s.is_pole:
            us = np.linspace(0.0, 1.0, 201)
            out.append(np.stack([us, np.full_like(us, s.location[1])], axis=-1))
        else:
            out.append(s.location[None, :])
        if s.is_saddle_like:
            for sep in analysis.separatrices[i]:
                if sep.stability == stability:
                    out.append(field.wrap(sep.path.points))
    status = STATUS_REPELLING if sign > 0 else STATUS_ATTRACTING
    for leaf in analysis.closed_leaves:
        if leaf.status == status:
            out.append(field.wrap(leaf.points))
    return out


def _imaged_tree(point_sets, periods):
    if not point_sets:
        return None
    pts = np.concatenate(point_sets)
    images = [pts]
    if periods[0]:
        images = [p + np.array([s, 0.0]) for p in images for s in (-1.0, 0.0, 1.0)]
    if periods[1]:
        images = [p + np.array([0.0, s]) for p in images for s in (-1.0, 0.0, 1.0)]
    return cKDTree(np.concatenate(images))


def _flow_to_tree(field, seed, direction, tree, rho, cfg, budget=60.0):
    """Integrate until the wrapped point comes within rho of the tree."""
    sgn = float(direction)
    calls = [0]

    def rhs(_, y):
        calls[0] += 1
        if calls[0] > 40_000:
            raise RuntimeError("leaf arc integration stalled")
        return sgn * field.unit(y)

    def event(_, y):
        d, _i = tree.query(field.wrap(y))
        return d - rho

    event.terminal = True
    pts = [np.asarray(seed, dtype=float)]
    arcs = [0.0]
    done = 0.0
    while done < budget:
        sol = solve_ivp(rhs, (0.0, min(4.0, budget - done)), pts[-1],
                        dense_output=True, rtol=cfg.rtol, atol=cfg.atol,
                        max_step=cfg.max_step, events=[event])
        t_end = float(sol.t[-1])
        n = max(int(np.ceil(t_end / cfg.sample_ds)), 2)
        ts = np.linspace(0.0, t_end, n + 1)
        ys = sol.sol(ts).T
        pts.extend(list(ys[1:]))
        arcs.extend((done + ts[1:]).tolist())
        done += t_end
        if sol.status == 1:
            return np.array(pts), np.array(arcs)
        if sol.status != 0 or t_end < 1e-6:
            break
    raise NumericalResolutionError("leaf arc failed to reach the graph neighborhood")


def _leaf_arc_midpoint(field, q, plus_tree, minus_tree, rho, cfg):
    """Midpoint (by arclength) of the leaf arc through q between the
    expanding and contracting neighborhoods; also its flow direction."""
    back_pts, back_arcs = _flow_to_tree(field, q, -1, plus_tree, rho, cfg)
    fwd_pts, fwd_arcs = _flow_to_tree(field, q, +1, minus_tree, rho, cfg)
    total = back_arcs[-1] + fwd_arcs[-1]
    half = 0.5 * total
    if half <= back_arcs[-1]:
        s = back_arcs[-1] - half
        k = int(np.searchsorted(back_arcs, s))
        k = min(max(k, 0), len(back_pts) - 1)
        m = back_pts[k]
    else:
        s = half - back_arcs[-1]
        k = int(np.searchsorted(fwd_arcs, s))
        k = min(max(k, 0), len(fwd_pts) - 1)
        m = fwd_pts[k]
    return field.wrap(m)


def _trace_component(field, m0, plus_tree, minus_tree, rho, cfg):
    """Predictor-corrector walk along the midpoint curve through m0."""
    h = cfg.gamma_step
    pts = [np.asarray(m0, dtype=float)]
    direction = rot90ccw(field.unit(m0))
    for step in range(int(40.0 / h)):
        tangent = rot90ccw(field.unit(pts[-1]))
        if float(tangent @ direction) < 0:
            tangent = -tangent
        pred = pts[-1] + h * tangent
        m = _leaf_arc_midpoint(field, pred, plus_tree, minus_tree, rho, cfg)
        d = wrap_delta(m, pts[-1], field.periods)
        if np.hypot(d[0], d[1]) > 4 * h:
            raise NumericalResolutionError(
                "dividing-curve corrector jumped off the midpoint section")
        m = pts[-1] + d
        direction = m - pts[-1]
        pts.append(m)
        d0 = wrap_delta(m, m0, field.periods)
        if step > 4 and np.hypot(d0[0], d0[1]) < 0.9 * h:
            pts.append(m - d0)  # close the loop on the seed point
            return np.array(pts)
    raise NumericalResolutionError("dividing curve failed to close")


@dataclass
class DividingSet:
    components: list              # wrapped polylines (n, 2)
    margins: list                 # min transverse angle per component (radians)
    chi_plus: int
    chi_minus: int
    index_sum: int
    faces: list                   # dicts: sign, chi, n_cells
    component_faces: list         # (face id on minus side, face id on plus side)
    crossing_ok: bool
    warnings: list = dc_field(default_factory=list)

    @property
    def n_components(self):
        return len(self.components)

    def summary(self):
        return {
            "n_components": self.n_components,
            "chi_plus": self.chi_plus,
            "chi_minus": self.chi_minus,
            "margins": [float(m) for m in self.margins],
            "faces": self.faces,
            "crossing_ok": bool(self.crossing_ok),
            "warnings": list(self.warnings),
        }


def _component_margin(field, comp):
    tang = np.diff(comp, axis=0)
    tang = tang / np.maximum(np.linalg.norm(tang, axis=1)[:, None], 1e-30)
    Y = field.unit(comp[:-1])
    cross = np.abs(tang[:, 0] * Y[:, 1] - tang[:, 1] * Y[:, 0])
    return float(np.arcsin(np.clip(cross.min(), 0.0, 1.0)))


# grid cell complex -----------------------------------------------------

def _canon_vertex(i, j, n, topology):
    if topology == TOPO_SPHERE:
        if j == 0:
            return (-1, -1)   # south pole
        if j == n:
            return (-2, -2)   # north pole
        return (i % n, j)
    if topology == TOPO_TORUS:
        return (i % n, j % n)
    return (i % n, j)


def _chi_of_cells(cells, n, topology):
    """Euler characteristic of a union of grid cells on the closed surface."""
    verts = set()
    edges = set()
    for (i, j) in cells:
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        cv = [_canon_vertex(a, b, n, topology) for a, b in corners]
        verts.update(cv)
        for k in range(4):
            a, b = cv[k], cv[(k + 1) % 4]
            if a == b:
                continue  # collapsed pole edge
            edges.add((a, b) if a <= b else (b, a))
    return len(verts) - len(edges) + len(cells)


def _face_decomposition(field, components, plus_tree, minus_tree, cfg):
    """Label the complement of the dividing curves on a grid; return faces."""
    n = cfg.dividing_grid
    topology = field.topology
    cell = 1.0 / n
    centers_u, centers_v = np.meshgrid((np.arange(n) + 0.5) / n,
                                       (np.arange(n) + 0.5) / n, indexing="ij")
    centers = np.stack([centers_u, centers_v], axis=-1).reshape(-1, 2)

    gamma_pts = []
    for comp in components:
        dense = resample_polyline(comp, max(int(4 * len(comp)), int(3.0 / cell)))
        gamma_pts.append(dense)
        if field.periods[0]:
            gamma_pts.append(dense + np.array([1.0, 0.0]))
            gamma_pts.append(dense - np.array([1.0, 0.0]))
        if field.periods[1]:
            gamma_pts.append(dense + np.array([0.0, 1.0]))
            gamma_pts.append(dense - np.array([0.0, 1.0]))
    gtree = cKDTree(np.concatenate(gamma_pts))
    dist_g, _ = gtree.query(centers)
    cut = (dist_g < 1.5 * cell).reshape(n, n)

    label = -np.ones((n, n), dtype=int)
    faces = []

    def neighbors(i, j):
        out = []
        if topology in (TOPO_TORUS,):
            out = [((i + 1) % n, j), ((i - 1) % n, j), (i, (j + 1) % n), (i, (j - 1) % n)]
        else:
            out = [((i + 1) % n, j), ((i - 1) % n, j)]
            if j + 1 < n:
                out.append((i, j + 1))
            if j - 1 >= 0:
                out.append((i, j - 1))
        return out

    for i0 in range(n):
        for j0 in range(n):
            if cut[i0, j0] or label[i0, j0] >= 0:
                continue
            fid = len(faces)
            stack = [(i0, j0)]
            label[i0, j0] = fid
            cells = []
            while stack:
                i, j = stack.pop()
                cells.append((i, j))
                for (a, b) in neighbors(i, j):
                    if not cut[a, b] and label[a, b] < 0:
                        label[a, b] = fid
                        stack.append((a, b))
            faces.append({"cells": cells})

    for f in faces:
        pts = (np.array(f["cells"]) + 0.5) / n
        dp, _ = plus_tree.query(pts)
        dm, _ = minus_tree.query(pts)
        near_p = bool(np.min(dp) < 2 * cell)
        near_m = bool(np.min(dm) < 2 * cell)
        if near_p and near_m:
            raise InternalInconsistencyError(
                "a complement face touches both expanding and contracting graphs")
        if near_p or near_m:
            f["sign"] = 1 if near_p else -1
        else:
            f["sign"] = 1 if float(np.min(dp)) < float(np.min(dm)) else -1
            f["ambiguous"] = True
        f["chi"] = _chi_of_cells(f["cells"], n, topology)
        f["n_cells"] = len(f["cells"])
    return label, faces, cut


def _component_side_faces(field, comp, label, cfg):
    """Face ids on the two sides of one dividing curve."""
    n = cfg.dividing_grid
    k = max(len(comp) // 12, 1)
    sides = [[], []]
    for p in comp[::k]:
        t = rot90ccw(field.unit(p))
        for side, sgn in ((0, +1), (1, -1)):
            off = 3.0 / n
            q = field.wrap(p + sgn * off * rot90ccw(t))
            i, j = int(q[0] * n) % n, min(int(q[1] * n), n - 1)
            if label[i, j] >= 0:
                sides[side].append(label[i, j])
    out = []
    for s in sides:
        out.append(int(np.bincount(s).argmax()) if s else -1)
    return tuple(out)


def build_dividing_set(analysis: FoliationAnalysis, graph: Optional[GirouxGraph] = None) -> DividingSet:
    """Dividing multi-curve of a divided foliation (raises on obstructions)."""
    if graph is None:
        graph = giroux_graph(analysis)
    field = analysis.field
    cfg = analysis.cfg
    warnings = []

    plus_sets = _half_point_sets(analysis, +1)
    minus_sets = _half_point_sets(analysis, -1)
    if not plus_sets or not minus_sets:
        raise InternalInconsistencyError(
            "one of the expanding/contracting graphs is empty")
    plus_tree = _imaged_tree(plus_sets, field.periods)
    minus_tree = _imaged_tree(minus_sets, field.periods)

    sep = plus_tree.query(np.concatenate(minus_sets))[0].min()
    rho0 = min(cfg.dividing_radius, 0.3 * float(sep))

    rho = rho0
    for attempt in range(cfg.dividing_max_shrink + 1):
        try:
            components = _find_components(field, plus_tree, minus_tree, rho, cfg)
            margins = [_component_margin(field, c) for c in components]
            if components and min(margins) >= cfg.margin_min:
                break
            if attempt == cfg.dividing_max_shrink:
                raise NumericalResolutionError(
                    f"transversality margin {min(margins):.4f} below "
                    f"{cfg.margin_min} at minimum radius")
        except NumericalResolutionError:
            if attempt == cfg.dividing_max_shrink:
                raise
        rho *= 0.5
    if rho != rho0:
        warnings.append(f"graph neighborhood radius shrunk to {rho:.4g}")

    crossing_ok = _crossing_orientation_ok(field, components, minus_tree, plus_tree)

    label, faces, cut = _face_decomposition(field, components, plus_tree,
                                            minus_tree, cfg)
    comp_faces = [_component_side_faces(field, c, label, cfg) for c in components]

    chi_plus = graph.plus.chi
    chi_minus = graph.minus.chi
    index_sum = sum(s.sign * (1 if s.is_node_like else -1)
                    for s in analysis.singularities
                    if s.is_node_like or s.is_saddle_like)

    chi_faces_plus = sum(f["chi"] for f in faces if f["sign"] > 0)
    chi_faces_minus = sum(f["chi"] for f in faces if f["sign"] < 0)
    if (chi_faces_plus, chi_faces_minus) != (chi_plus, chi_minus):
        raise InternalInconsistencyError(
            f"face Euler characteristics ({chi_faces_plus}, {chi_faces_minus}) "
            f"disagree with graph values ({chi_plus}, {chi_minus})")

    exportable = [{"sign": f["sign"], "chi": f["chi"], "n_cells": f["n_cells"]}
                  for f in faces]
    return DividingSet([field.wrap(c) for c in components], margins, chi_plus,
                       chi_minus, index_sum, exportable, comp_faces,
                       crossing_ok, warnings)


def _find_components(field, plus_tree, minus_tree, rho, cfg):
    n_seed = 12
    components = []
    for i in range(n_seed):
        for j in range(n_seed):
            q = np.array([(i + 0.5) / n_seed, (j + 0.37) / n_seed])
            if field.topology != TOPO_TORUS and not (0.02 < q[1] < 0.98):
                continue
            dp, _ = plus_tree.query(q)
            dm, _ = minus_tree.query(q)
            if dp < 1.5 * rho or dm < 1.5 * rho:
                continue
            try:
                m = _leaf_arc_midpoint(field, q, plus_tree, minus_tree, rho, cfg)
            except NumericalResolutionError:
                continue
            if any(np.hypot(*wrap_delta(c, m, field.periods).T).min() < 3 * cfg.gamma_step
                   for c in components):
                continue
            components.append(_trace_component(field, m, plus_tree, minus_tree,
                                               rho, cfg))
    if not components:
        raise NumericalResolutionError("no dividing curve could be traced")
    components.sort(key=lambda c: (round(float(np.mean(field.wrap(c)[:, 1])), 6),
                                   round(float(field.wrap(c)[0, 0]), 6)))
    return components


def _crossing_orientation_ok(field, components, minus_tree, plus_tree):
    """The flow must cross every dividing curve from the plus side to the
    minus side."""
    for comp in components:
        k = max(len(comp) // 100, 1)
        for p in comp[::k]:
            y = field.unit(p)
            eps = 0.01
            ahead = field.wrap(p + eps * y)
            behind = field.wrap(p - eps * y)
            da_m, _ = minus_tree.query(ahead)
            db_m, _ = minus_tree.query(behind)
            da_p, _ = plus_tree.query(ahead)
            db_p, _ = plus_tree.query(behind)
            # moving along the flow should approach the contracting graph
            if not (da_m <= db_m and db_p <= da_p):
                return False
    return True


# ----------------------------------------------------------------------
# verdicts
# ----------------------------------------------------------------------

@dataclass
class ConvexityVerdict:
    convex: bool
    obstructions: list
    dividing_set: Optional[DividingSet] = None
    graph: Optional[GirouxGraph] = None

    def summary(self):
        out = {"convex": bool(self.convex),
               "obstructions": [o.summary() for o in self.obstructions]}
        if self.dividing_set is not None:
            out["dividing_set"] = self.dividing_set.summary()
        if self.graph is not None:
            out["giroux_graph"] = self.graph.summary()
        return out


def convexity_verdict(analysis: FoliationAnalysis) -> ConvexityVerdict:
    obs = find_obstructions(analysis)
    if obs:
        return ConvexityVerdict(False, obs)
    graph = giroux_graph(analysis)
    div = build_dividing_set(analysis, graph)
    return ConvexityVerdict(True, [], div, graph)


def giroux_criterion(div: DividingSet, topology: str) -> str:
    """Tightness of an ambient neighborhood from the dividing set."""
    if topology == TOPO_SPHERE:
        return TIGHT if div.n_components == 1 else OVERTWISTED
    if topology in (TOPO_TORUS, TOPO_ANNULUS):
        for fm, fp in div.component_faces:
            for fid in (fm, fp):
                if fid >= 0 and div.faces[fid]["chi"] == 1:
                    return OVERTWISTED  # this component bounds a disk
        return TIGHT
    raise UnsupportedTopologyError(f"no tightness criterion for {topology!r}")


def euler_bennequin_check(div: DividingSet, euler_characteristic: int):
    """(relative Euler value, bound, passed) with the index cross-check."""
    e_value = div.chi_plus - div.chi_minus
    if e_value != div.index_sum:
        raise InternalInconsistencyError(
            f"chi difference {e_value} disagrees with signed index sum "
            f"{div.index_sum}")
    if div.chi_plus + div.chi_minus != euler_characteristic:
        raise InternalInconsistencyError(
            f"chi_plus + chi_minus = {div.chi_plus + div.chi_minus} does not "
            f"tile the surface (chi = {euler_characteristic})")
    bound = max(0, -euler_characteristic)
    return e_value, bound, abs(e_value) <= bound


@dataclass(frozen=True)
class SyntheticDividingExample:
    """Hand-checked dividing data for surfaces outside the chart catalog."""

    name: str
    euler_characteristic: int
    dividing_set: DividingSet


def genus2_example() -> SyntheticDividingExample:
    """A convex genus-2 portrait: one node and two saddles on each side,
    so chi(S+) = chi(S-) = -1 and the relative Euler value is 0."""
    div = DividingSet(components=[np.zeros((0, 2))] * 3, margins=[],
                      chi_plus=-1, chi_minus=-1, index_sum=0,
                      faces=[], component_faces=[], crossing_ok=True)
    return SyntheticDividingExample("genus2_symmetric", -2, div)
