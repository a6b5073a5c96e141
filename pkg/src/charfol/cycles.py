"""Closed leaves: recurrence candidates, return maps, multipliers.

Candidates come from the tails of long probe orbits; each is refined by a
Poincare first-return map on a transversal.  The transversal coordinate is
oriented so that (flow direction, transversal direction) is a positively
oriented frame; the sign of the second derivative of the return map at a
degenerate fixed point is reported in that convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import wrap_delta
from .integrate import (LIMIT_BUDGET, LocusSet, ReturnMapError,
                        detect_recurrent_loop, first_return, integrate_leaf,
                        make_transversal)

STATUS_ATTRACTING = "attracting"
STATUS_REPELLING = "repelling"
STATUS_DEGENERATE_POS = "degenerate-positive"
STATUS_DEGENERATE_NEG = "degenerate-negative"


@dataclass
class ClosedLeaf:
    points: np.ndarray            # representative loop polyline
    base: np.ndarray              # transversal base point
    fixed_x: float                # fixed point coordinate on the transversal
    multiplier: float             # pi'(x*)
    status: str
    second_order: Optional[float] = None
    period_arc: float = 0.0

    @property
    def degenerate(self):
        return self.status in (STATUS_DEGENERATE_POS, STATUS_DEGENERATE_NEG)

    def summary(self):
        return {
            "base": [float(self.base[0]), float(self.base[1])],
            "multiplier": float(self.multiplier),
            "status": self.status,
            "second_order": None if self.second_order is None else float(self.second_order),
        }


def probe_orbits(field, cfg, singularities=(), loci=()):
    """Forward and backward probe orbits from an interior seed grid."""
    n = cfg.probe_grid
    margin = 1.5 / max(cfg.grid_n, 4)
    us = (np.arange(n) + 0.31) / n
    if field.topology == "torus":
        vs = (np.arange(n) + 0.47) / n
    else:
        vs = np.linspace(margin, 1 - margin, n + 2)[1:-1]
    orbits = []
    locus_set = LocusSet(loci, field.periods, 0.5 * cfg.capture_eps)
    for u in us:
        for v in vs:
            seed = np.array([u, v])
            if any(np.hypot(*wrap_delta(seed, s.location, field.periods)) < 5 * cfg.capture_eps
                   for s in singularities):
                continue
            if float(field.speed(seed)) == 0.0:
                continue
            for direction in (+1, -1):
                orbits.append(integrate_leaf(field, seed, direction, cfg,
                                             singularities, locus_set,
                                             budget=cfg.probe_budget))
    return orbits


def _loop_extent(loop, periods):
    d = wrap_delta(loop, loop[0], periods)
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def _secant(fn, x0, x1, tol, max_iter=30, clamp=None):
    f0, f1 = fn(x0), fn(x1)
    for _ in range(max_iter):
        if abs(f1) < tol:
            return x1, f1
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if clamp is not None:
            x2 = float(np.clip(x2, -clamp, clamp))
        x0, f0, x1 = x1, f1, x2
        f1 = fn(x1)
    return (x1, f1) if abs(f1) < tol else (None, f1)


def _refine_on_section(field, tr, cfg, singularities, loci, direction):
    """Fixed point, multiplier and curvature of the (possibly reversed)
    return map on the section.  Values are converted to the forward map."""

    def ret(x):
        x1, _ = first_return(field, tr, x, cfg, singularities, loci,
                             direction=direction)
        return x1

    gap = ret(0.0)

    def F(x):
        return ret(x) - x

    x_star, resid = _secant(F, 0.0, 0.5 * gap if gap != 0 else 1e-4,
                            cfg.cycle_tol, clamp=tr.halfwidth)
    if x_star is None:
        raise ReturnMapError(
            f"return-map iteration non-convergent (residual {resid:.2e})")

    noise_floor = 1e3 * cfg.cycle_tol

    def slope_step():
        # widen the step until the map response rises above integration
        # noise; super-contracting maps never do and are clamped positive
        d = cfg.return_fd_step
        while True:
            plus, minus = ret(x_star + d), ret(x_star - d)
            response = max(abs(plus - x_star), abs(minus - x_star))
            if response > noise_floor or d >= 0.45 * tr.halfwidth:
                slope = (plus - minus) / (2 * d)
                if response <= noise_floor:
                    slope = min(max(slope, 0.0), 1e-9) + 1e-12
                return slope, d
            d *= 5.0

    mult, d = slope_step()

    def dpi(x):
        return (ret(x + d) - ret(x - d)) / (2 * d)
    if abs(mult - 1.0) < 10 * cfg.degenerate_band:
        # polish onto the derivative-one point for a sharp multiplier
        x_polish, _ = _secant(lambda x: dpi(x) - 1.0, x_star, x_star + d,
                              cfg.degenerate_band * 0.05, max_iter=12,
                              clamp=tr.halfwidth)
        if x_polish is not None and abs(F(x_polish)) < 50 * cfg.cycle_tol + abs(F(x_star)):
            x_star = x_polish
            mult = dpi(x_star)
    second = None
    if abs(mult - 1.0) < cfg.degenerate_band:
        second = (ret(x_star + d) - 2 * ret(x_star) + ret(x_star - d)) / d**2
    _, arc, rep = first_return(field, tr, x_star, cfg, singularities, loci,
                               with_path=True, direction=direction)
    if direction < 0:
        # the reversed flow computes the inverse map: pi' -> 1/pi',
        # and for pi(x) = x + c (x - x*)^2 the inverse has curvature -c
        mult = 1.0 / mult
        if second is not None:
            second = -second
    return float(x_star), float(mult), second, float(arc), rep


def _refine_candidate(field, loop, cfg, singularities, loci, warnings,
                      direction_hint=1):
    speeds = field.speed(loop)
    base = loop[int(np.argmax(speeds))]
    tr = make_transversal(field, base, cfg=cfg)

    last_exc = None
    for direction in (direction_hint, -direction_hint):
        try:
            x_star, mult, second, arc, rep = _refine_on_section(
                field, tr, cfg, singularities, loci, direction)
            break
        except ReturnMapError as exc:
            last_exc = exc
    else:
        warnings.append(
            f"cycle candidate near {tuple(np.round(field.wrap(base), 4))} "
            f"dropped: {last_exc}")
        return None

    if abs(mult - 1.0) < cfg.degenerate_band:
        status = STATUS_DEGENERATE_POS if (second or 0.0) >= 0 else STATUS_DEGENERATE_NEG
    elif mult < 1.0:
        status = STATUS_ATTRACTING
    else:
        status = STATUS_REPELLING
    return ClosedLeaf(rep.points, tr.point(x_star), float(x_star), float(mult),
                      status, second, float(arc))


def detect_closed_leaves(field, cfg, singularities=(), loci=(), orbits=None):
    """Closed leaves of the field.  Returns (leaves, warnings)."""
    warnings = []
    if orbits is None:
        orbits = probe_orbits(field, cfg, singularities, loci)
    leaves = []
    attempted = []
    for orbit in orbits:
        if orbit.limit_kind != LIMIT_BUDGET:
            continue
        loop = detect_recurrent_loop(orbit, field.periods, cfg)
        if loop is None:
            continue
        if _loop_extent(loop, field.periods) < 2 * cfg.recurrence_radius:
            continue
        end = loop[-1]
        if any(np.hypot(*wrap_delta(leaf.points, end, field.periods).T).min()
               < 5 * cfg.capture_eps for leaf in leaves):
            continue
        if any(np.hypot(*wrap_delta(end, q, field.periods)) < 5 * cfg.capture_eps
               for q in attempted):
            continue
        attempted.append(end)
        leaf = _refine_candidate(field, loop, cfg, singularities, loci,
                                 warnings, direction_hint=orbit.direction)
        if leaf is None:
            continue
        if any(np.hypot(*wrap_delta(l.points, leaf.base, field.periods).T).min()
               < 5 * cfg.capture_eps for l in leaves):
            continue
        leaves.append(leaf)
    leaves.sort(key=lambda l: (round(float(np.mean(field.wrap(l.points)[:, 1])), 6),
                               round(float(l.base[0]), 6)))
    return leaves, warnings
