"""Zeros of the foliation field: detection, classification, separatrices.

Interior zeros are seeded on a grid and polished by damped Newton steps on
the finite-difference Jacobian.  Sphere poles carry coordinate
degeneracies, so tangencies there are tested and classified in a local
pole chart instead.  Curves of non-isolated zeros (the singular circles of
the non-generic catalog pictures) are detected separately and excluded
from the generic pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .geom import wrap_delta, chain_points
from .integrate import LeafPath, LocusSet, capture_balls, run_flow
from .surfaces import TOPO_SPHERE

KIND_NODE = "node"
KIND_SADDLE = "saddle"
KIND_SADDLE_NODE = "saddle-node"
KIND_FOCUS = "focus"
KIND_CIRCLE_POINT = "degenerate-circle-point"

#: kinds treated as nodes by all downstream graph logic
NODE_LIKE = (KIND_NODE, KIND_FOCUS)


class DivergenceSignError(ArithmeticError):
    """A zero with vanishing trace: inconsistent with the contact condition."""


@dataclass
class Singularity:
    location: np.ndarray
    kind: str
    sign: int
    divergence: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    jacobian: np.ndarray
    is_pole: bool = False
    pole: Optional[str] = None    # "south" / "north"

    @property
    def is_saddle_like(self):
        return self.kind in (KIND_SADDLE, KIND_SADDLE_NODE)

    @property
    def is_node_like(self):
        return self.kind in NODE_LIKE

    def summary(self):
        return {
            "location": [float(self.location[0]), float(self.location[1])],
            "kind": self.kind,
            "sign": int(self.sign),
            "divergence": float(self.divergence),
            "is_pole": bool(self.is_pole),
        }


@dataclass
class SingularLocus:
    """A curve of non-isolated zeros, reported outside the generic pipeline."""

    points: np.ndarray

    def summary(self):
        return {"n_points": int(len(self.points)),
                "v_mean": float(np.mean(self.points[:, 1]))}


def _classify_jacobian(J, scale, cfg):
    tr = float(J[0, 0] + J[1, 1])
    if abs(tr) < cfg.trace_rel_tol * max(scale, 1e-30):
        raise DivergenceSignError(
            f"zero divergence at a singularity (trace {tr:.3e}); "
            "inconsistent with a contact model at this tolerance")
    eigvals, eigvecs = np.linalg.eig(J)
    mag = max(float(np.abs(eigvals).max()), 1e-30)
    if np.max(np.abs(eigvals.imag)) > cfg.eig_split_tol * mag:
        kind = KIND_FOCUS
    else:
        lam = np.sort(eigvals.real)
        if np.min(np.abs(lam)) < cfg.eig_split_tol * mag:
            kind = KIND_SADDLE_NODE
        elif lam[0] * lam[1] > 0:
            kind = KIND_NODE
        else:
            kind = KIND_SADDLE
    return kind, int(np.sign(tr)), tr, eigvals, eigvecs


def classify_singularity(field, p, cfg, on_locus=False):
    """(kind, sign, eigen-data) of a zero of the field at p."""
    J = field.jacobian(p, cfg.jacobian_step)
    scale = float(np.abs(J).max())
    if on_locus:
        eigvals, eigvecs = np.linalg.eig(J)
        tr = float(J[0, 0] + J[1, 1])
        return Singularity(np.asarray(p, dtype=float), KIND_CIRCLE_POINT,
                           int(np.sign(tr)), tr, eigvals, eigvecs, J)
    kind, sign, tr, eigvals, eigvecs = _classify_jacobian(J, scale, cfg)
    return Singularity(np.asarray(p, dtype=float), kind, sign, tr,
                       eigvals, eigvecs, J)


# ----------------------------------------------------------------------
# interior zeros
# ----------------------------------------------------------------------

def _newton_polish(field, p0, cfg, cell):
    p = np.array(p0, dtype=float)
    fp = field.Y(p)
    for _ in range(cfg.newton_max_iter):
        if np.linalg.norm(fp) < cfg.newton_tol:
            return p
        J = field.jacobian(p, cfg.jacobian_step)
        try:
            step = np.linalg.solve(J, -fp)
        except np.linalg.LinAlgError:
            return None
        n = np.linalg.norm(step)
        if n > 2 * cell:
            step *= 2 * cell / n
        cand = p + step
        fc = field.Y(cand)
        halvings = 0
        while np.linalg.norm(fc) > np.linalg.norm(fp) and halvings < 8:
            step *= 0.5
            cand = p + step
            fc = field.Y(cand)
            halvings += 1
        if halvings >= 8:
            return None
        p, fp = cand, fc
    return p if np.linalg.norm(fp) < cfg.newton_tol else None


def _grid(field, cfg):
    n = cfg.grid_n
    us = np.arange(n + 1) / n
    if field.topology == TOPO_SPHERE:
        vs = np.linspace(1.5 / n, 1 - 1.5 / n, n + 1)
    else:
        vs = np.arange(n + 1) / n
    U, V = np.meshgrid(us, vs, indexing="ij")
    Y = field.Y(np.stack([U, V], axis=-1))
    return us, vs, Y


def find_interior_singularities(field, cfg):
    us, vs, Y = _grid(field, cfg)
    n = cfg.grid_n
    cell = 1.0 / n
    seeds = []
    sx, sy = np.sign(Y[..., 0]), np.sign(Y[..., 1])
    for i in range(n):
        for j in range(n):
            cx = sx[i:i + 2, j:j + 2]
            cy = sy[i:i + 2, j:j + 2]
            if cx.max() >= 0 >= cx.min() and cy.max() >= 0 >= cy.min():
                seeds.append((0.5 * (us[i] + us[i + 1]), 0.5 * (vs[j] + vs[j + 1])))
    found = []
    for seed in seeds:
        p = _newton_polish(field, seed, cfg, cell)
        if p is None:
            continue
        if field.topology == TOPO_SPHERE and not (cell < p[1] < 1 - cell):
            continue  # pole zone handled analytically
        p = field.wrap(p)
        if all(np.hypot(*wrap_delta(p, q, field.periods)) > cfg.merge_radius
               for q in found):
            found.append(p)
    return found


# ----------------------------------------------------------------------
# sphere poles
# ----------------------------------------------------------------------

def _pole_field(field, which, cfg):
    """Y in the pole chart, oriented by the outward coorientation."""
    surface, model = field.surface, field.model
    chart = surface.pole_chart(which)
    h = 1e-5

    # orientation of the chart frame against the surface coorientation
    v_ref = 1 - 3.0 / cfg.grid_n if which == "north" else 3.0 / cfg.grid_n
    _, du, dv = surface.frame(0.0, v_ref)
    normal = np.cross(du, dv)
    normal /= np.linalg.norm(normal)
    ta, tb = surface.tangent_at_pole(which)
    sign = 1.0 if float(np.cross(ta, tb) @ normal) > 0 else -1.0

    def Y(ab):
        ab = np.asarray(ab, dtype=float)
        ea, eb = np.array([h, 0.0]), np.array([0.0, h])
        pa = (chart(*(ab + ea)) - chart(*(ab - ea))) / (2 * h)
        pb = (chart(*(ab + eb)) - chart(*(ab - eb))) / (2 * h)
        a = model.alpha(chart(*ab))
        beta = np.array([float(a @ pa), float(a @ pb)])
        return sign * np.array([beta[1], -beta[0]])

    return Y


def _pole_jacobian(Yfn, step=2e-4):
    J = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        J[:, j] = (Yfn(e) - Yfn(-e)) / (2 * step)
    return J


def find_pole_singularities(field, cfg):
    """Tangencies at the collapsed edges of a sphere parametrization."""
    out = []
    surface = field.surface
    if surface is None or surface.topology != TOPO_SPHERE:
        return out
    for which, v in (("south", 0.0), ("north", 1.0)):
        ta, tb = surface.tangent_at_pole(which)
        pole_pt = surface.pole_points[0 if which == "south" else 1]
        a = field.model.alpha(pole_pt)
        scale = np.linalg.norm(a) * max(np.linalg.norm(ta), np.linalg.norm(tb))
        if max(abs(float(a @ ta)), abs(float(a @ tb))) > 1e-8 * max(scale, 1e-30):
            continue  # pole is not a tangency
        Yfn = _pole_field(field, which, cfg)
        J = _pole_jacobian(Yfn)
        kind, sign, tr, eigvals, eigvecs = _classify_jacobian(
            J, float(np.abs(J).max()), cfg)
        out.append(Singularity(np.array([0.0, v]), kind, sign, tr, eigvals,
                               eigvecs, J, is_pole=True, pole=which))
    return out


# ----------------------------------------------------------------------
# non-isolated loci
# ----------------------------------------------------------------------

def _refine_locus_point(field, p, cfg, cell):
    best = None
    for axis in (0, 1):
        def speed(x, axis=axis):
            q = np.array(p, dtype=float)
            q[axis] = x
            return float(field.speed(q))

        res = minimize_scalar(speed, bracket=None,
                              bounds=(p[axis] - cell, p[axis] + cell),
                              method="bounded",
                              options={"xatol": 1e-12})
        q = np.array(p, dtype=float)
        q[axis] = float(res.x)
        val = float(field.speed(q))
        if best is None or val < best[0]:
            best = (val, q)
    return best


def detect_loci(field, cfg, known=()):
    """Detect curves of non-isolated zeros on the seed grid."""
    us, vs, Y = _grid(field, cfg)
    mag = np.hypot(Y[..., 0], Y[..., 1])
    scale = float(np.median(mag)) + 1e-30
    cell = 1.0 / cfg.grid_n
    cand_idx = np.argwhere(mag < cfg.locus_rel_tol * scale)
    pts = []
    for i, j in cand_idx:
        p = np.array([us[i], vs[j]])
        if any(np.hypot(*wrap_delta(p, q.location, field.periods)) < 2 * cell
               for q in known):
            continue
        ref = _refine_locus_point(field, p, cfg, cell)
        if ref is not None and ref[0] < cfg.locus_refine_tol * scale:
            pts.append(field.wrap(ref[1]))
    if not pts:
        return []
    pts = np.array(pts)
    # single-linkage clustering at twice the grid step
    loci = []
    unassigned = list(range(len(pts)))
    while unassigned:
        stack = [unassigned.pop()]
        comp = [stack[0]]
        while stack:
            k = stack.pop()
            rest = []
            for m in unassigned:
                d = wrap_delta(pts[k], pts[m], field.periods)
                if np.hypot(d[0], d[1]) < 2.5 * cell:
                    comp.append(m)
                    stack.append(m)
                else:
                    rest.append(m)
            unassigned = rest
        if len(comp) >= cfg.locus_min_points:
            ordered = chain_points(pts[comp], field.periods)
            loci.append(SingularLocus(ordered))
    return loci


# ----------------------------------------------------------------------
# public driver
# ----------------------------------------------------------------------

def find_singularities(field, cfg):
    """All isolated zeros (classified) plus the non-isolated loci.

    Returns (singularities, loci, warnings).
    """
    warnings = []
    sings = []
    for p in find_interior_singularities(field, cfg):
        try:
            sings.append(classify_singularity(field, p, cfg))
        except DivergenceSignError as exc:
            warnings.append(f"zero at {tuple(np.round(p, 6))} dropped: {exc}")
    sings.extend(find_pole_singularities(field, cfg))
    loci = detect_loci(field, cfg, known=sings)
    if loci:
        # zeros refined onto a locus are locus points, not isolated zeros
        kept = []
        for s in sings:
            on_locus = any(
                np.hypot(*wrap_delta(s.location, q, field.periods).T).min() < 2 * cfg.capture_eps
                for locus in loci for q in [locus.points])
            if on_locus and not s.is_pole:
                continue
            kept.append(s)
        sings = kept
    sings.sort(key=lambda s: (round(float(s.location[1]), 9),
                              round(float(s.location[0]), 9)))
    return sings, loci, warnings


# ----------------------------------------------------------------------
# separatrices
# ----------------------------------------------------------------------

@dataclass
class Separatrix:
    saddle_index: int
    stability: str           # "stable" / "unstable" / "center"
    branch: int              # +1 / -1 along the eigenvector
    eigenvector: np.ndarray
    path: LeafPath

    @property
    def limit(self):
        return self.path.limit_kind, self.path.limit_ref


def trace_separatrices(field, singularities, saddle_index, cfg, loci=()):
    """The four labeled separatrices of a saddle (three for a saddle-node)."""
    saddle = singularities[saddle_index]
    if not saddle.is_saddle_like:
        raise ValueError("separatrices are only traced from saddle-like zeros")
    balls = capture_balls(singularities, cfg)
    locus_pts = LocusSet(loci, field.periods, 0.5 * cfg.capture_eps)
    out = []
    eigvals = saddle.eigenvalues.real
    vecs = saddle.eigenvectors.real
    order = np.argsort(eigvals)
    mag = max(float(np.abs(eigvals).max()), 1e-30)
    for which, col in (("stable", order[0]), ("unstable", order[1])):
        lam = eigvals[col]
        if abs(lam) < cfg.eig_split_tol * mag:
            which = "center"
        vec = vecs[:, col]
        vec = vec / np.linalg.norm(vec)
        direction = -1 if which == "stable" else +1
        for branch in (+1, -1):
            seed = saddle.location + branch * cfg.separatrix_offset * vec
            if which == "center":
                # pick the escaping side of the center manifold
                path = run_flow(field, seed, +1, cfg.separatrix_budget, cfg,
                                balls, locus_pts, release_ball=saddle_index)
                back = run_flow(field, seed, -1, cfg.separatrix_budget, cfg,
                                balls, locus_pts, release_ball=saddle_index)
                if back.arclength > path.arclength:
                    path = back
            else:
                path = run_flow(field, seed, direction, cfg.separatrix_budget,
                                cfg, balls, locus_pts, release_ball=saddle_index)
            out.append(Separatrix(saddle_index, which, branch, vec * branch, path))
    return out
