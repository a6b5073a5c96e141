"""Parametrized embedded surfaces over the unit square.

All surfaces are maps from (u, v) in [0,1]^2 with edge identifications:
tori identify both pairs of edges, annuli only u = 0 with u = 1, and
spheres collapse the rows v = 0 and v = 1 to pole points.  The sign
convention throughout is that (d/du, d/dv, coorienting normal) is a
positively oriented ambient frame; the latitude runs from the south pole
(v = 0) to the north pole (v = 1) so that spheres get their outward
coorientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TOPO_TORUS = "torus"
TOPO_ANNULUS = "annulus"
TOPO_SPHERE = "sphere"

_EULER = {TOPO_TORUS: 0, TOPO_ANNULUS: 0, TOPO_SPHERE: 2}


class PoleError(ValueError):
    """Query at a collapsed edge of a sphere parametrization."""

    def __init__(self, which, point):
        super().__init__(f"parameter lies on the {which} pole (ambient {point})")
        self.which = which
        self.point = point


@dataclass(frozen=True)
class ParamSurface:
    name: str
    map_fn: Callable                 # (U, V) -> (..., 3)
    jacobian_fn: Callable            # (U, V) -> ((..., 3), (..., 3))
    topology: str = TOPO_TORUS
    pole_points: tuple = ()          # (south, north) ambient points for spheres

    @property
    def periods(self):
        return (1.0, 1.0) if self.topology == TOPO_TORUS else (1.0, None)

    @property
    def euler_characteristic(self):
        return _EULER[self.topology]

    def point(self, u, v):
        return self.map_fn(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

    def frame(self, u, v):
        """Ambient point and tangent vectors (p, du, dv) at (u, v)."""
        if self.topology == TOPO_SPHERE:
            vv = np.asarray(v, dtype=float)
            if np.any(vv <= 0.0) or np.any(vv >= 1.0):
                which = "south" if np.any(vv <= 0.0) else "north"
                raise PoleError(which, self.pole_points[0 if which == "south" else 1])
        p = self.point(u, v)
        du, dv = self.jacobian_fn(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return p, du, dv

    def pole_chart(self, which: str):
        """Local coordinates (a, b) around a pole, positively oriented for
        the outward coorientation.  Only meaningful for spheres."""
        if self.topology != TOPO_SPHERE:
            raise ValueError("pole charts exist only for sphere topology")

        north = which == "north"

        def chart(a, b):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            rho = np.hypot(a, b)
            u = np.arctan2(b, a) / (2 * np.pi)
            v = 1.0 - rho if north else rho
            return self.point(u, v)

        return chart

    def tangent_at_pole(self, which: str, step=1e-5):
        """Finite-difference tangent basis of the pole chart at the pole."""
        chart = self.pole_chart(which)
        ta = (chart(step, 0.0) - chart(-step, 0.0)) / (2 * step)
        tb = (chart(0.0, step) - chart(0.0, -step)) / (2 * step)
        return ta, tb


def surface_frame(surface: ParamSurface, uv):
    """Spec-facing wrapper: frame at a parameter point (pole queries raise)."""
    u, v = float(uv[0]), float(uv[1])
    return surface.frame(u, v)


# ----------------------------------------------------------------------
# revolution surfaces
# ----------------------------------------------------------------------

def make_revolution(name, rho, zeta, drho, dzeta, topology=TOPO_SPHERE):
    """Surface of revolution around the z-axis with profile (rho(v), zeta(v)).

    For sphere topology the profile must vanish at v = 0, 1 (poles on the
    axis); for torus topology it must be 1-periodic and stay positive.
    """

    def mp(U, V):
        U, V = np.broadcast_arrays(U, V)
        r = rho(V)
        phi = 2 * np.pi * U
        return np.stack([r * np.cos(phi), r * np.sin(phi), zeta(V)], axis=-1)

    def jac(U, V):
        U, V = np.broadcast_arrays(U, V)
        r, dr, dz = rho(V), drho(V), dzeta(V)
        phi = 2 * np.pi * U
        c, s = np.cos(phi), np.sin(phi)
        zero = np.zeros_like(r)
        du = np.stack([-2 * np.pi * r * s, 2 * np.pi * r * c, zero], axis=-1)
        dv = np.stack([dr * c, dr * s, dz], axis=-1)
        return du, dv

    poles = ()
    if topology == TOPO_SPHERE:
        poles = (np.array([0.0, 0.0, float(zeta(0.0))]),
                 np.array([0.0, 0.0, float(zeta(1.0))]))
    return ParamSurface(name, mp, jac, topology, poles)


def make_sphere(radius: float) -> ParamSurface:
    """Round sphere of the given radius centered at the chart origin.

    v = 0 is the south pole, v = 1 the north pole, so that (du, dv) matches
    the outward coorientation.
    """
    R = float(radius)
    return make_revolution(
        f"sphere:{R:g}",
        rho=lambda v: R * np.sin(np.pi * v),
        zeta=lambda v: -R * np.cos(np.pi * v),
        drho=lambda v: np.pi * R * np.cos(np.pi * v),
        dzeta=lambda v: np.pi * R * np.sin(np.pi * v),
    )


def make_t3_torus_x(c: float) -> ParamSurface:
    """Torus {x = c} in the T^3 chart, (u, v) -> (c, 2 pi u, 2 pi v)."""
    c = float(c)

    def mp(U, V):
        U, V = np.broadcast_arrays(U, V)
        return np.stack([np.full_like(U, c), 2 * np.pi * U, 2 * np.pi * V], axis=-1)

    def jac(U, V):
        U, V = np.broadcast_arrays(U, V)
        zero = np.zeros_like(U)
        du = np.stack([zero, np.full_like(U, 2 * np.pi), zero], axis=-1)
        dv = np.stack([zero, zero, np.full_like(U, 2 * np.pi)], axis=-1)
        return du, dv

    return ParamSurface(f"t3_torus_x:{c:g}", mp, jac, TOPO_TORUS)


def make_t3_torus_z(c: float) -> ParamSurface:
    """Torus {z = c} in the T^3 chart (pre-Lagrangian for the catalog form)."""
    c = float(c)

    def mp(U, V):
        U, V = np.broadcast_arrays(U, V)
        return np.stack([2 * np.pi * U, 2 * np.pi * V, np.full_like(U, c)], axis=-1)

    def jac(U, V):
        U, V = np.broadcast_arrays(U, V)
        zero = np.zeros_like(U)
        du = np.stack([np.full_like(U, 2 * np.pi), zero, zero], axis=-1)
        dv = np.stack([zero, np.full_like(U, 2 * np.pi), zero], axis=-1)
        return du, dv

    return ParamSurface(f"t3_torus_z:{c:g}", mp, jac, TOPO_TORUS)


def make_rotating_torus(offset: float = 0.0, rho: float = 1.0) -> ParamSurface:
    """Torus swept in R^2 x S^1 by rotating a circle while climbing in z.

    The circle c(u) = (offset + rho (1 + cos 2 pi u), rho sin 2 pi u) in the
    plane z = 0 is carried by the screw motion ((x, y), z) -> (Rot(-4 pi t)
    applied to (x, y), z + t).  At offset 0 the circle passes through the
    origin and the swept torus contains the z-axis.
    """
    d = float(offset)
    r0 = float(rho)

    def circle(U):
        return (d + r0 * (1 + np.cos(2 * np.pi * U)),
                r0 * np.sin(2 * np.pi * U))

    def mp(U, V):
        U, V = np.broadcast_arrays(U, V)
        cx, cy = circle(U)
        th = -4 * np.pi * V
        ct, st = np.cos(th), np.sin(th)
        return np.stack([ct * cx - st * cy, st * cx + ct * cy, V], axis=-1)

    def jac(U, V):
        U, V = np.broadcast_arrays(U, V)
        cx, cy = circle(U)
        dcx = -2 * np.pi * r0 * np.sin(2 * np.pi * U)
        dcy = 2 * np.pi * r0 * np.cos(2 * np.pi * U)
        th = -4 * np.pi * V
        ct, st = np.cos(th), np.sin(th)
        zero = np.zeros_like(U)
        du = np.stack([ct * dcx - st * dcy, st * dcx + ct * dcy, zero], axis=-1)
        # d/dv of Rot(th(v)) p = th'(v) * Rot(th) J p with J(x, y) = (-y, x)
        jx, jy = -cy, cx
        dv = np.stack([-4 * np.pi * (ct * jx - st * jy),
                       -4 * np.pi * (st * jx + ct * jy),
                       np.ones_like(U)], axis=-1)
        return du, dv

    return ParamSurface(f"rotating_torus:{d:g}", mp, jac, TOPO_TORUS)


# ----------------------------------------------------------------------
# one-parameter families
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceFamily:
    """A family t -> ParamSurface inside a fixed contact model."""

    name: str
    model_name: str
    generator: Callable
    t_range: tuple = (0.0, 1.0)

    def surface(self, t: float) -> ParamSurface:
        return self.generator(float(t))


def make_sphere_family(model_name="ot", t_range=(2.8, 3.5)) -> SurfaceFamily:
    return SurfaceFamily(f"{model_name}_spheres", model_name, make_sphere, t_range)


def make_rotating_torus_family(t_range=(-0.15, 0.15)) -> SurfaceFamily:
    return SurfaceFamily("rotating_torus_offsets", "r2s1",
                         lambda t: make_rotating_torus(offset=t), t_range)


def make_x_torus_family(t_range=(0.0, 1.0)) -> SurfaceFamily:
    return SurfaceFamily("t3_x_tori", "t3",
                         lambda t: make_t3_torus_x(2 * np.pi * t), t_range)


def make_profile_interpolation_family(surface_a: ParamSurface, surface_b: ParamSurface,
                                      name="profile_blend", model_name="std_cyl",
                                      t_range=(0.0, 1.0)) -> SurfaceFamily:
    """Linear interpolation between two compatible parametrized surfaces."""
    if surface_a.topology != surface_b.topology:
        raise ValueError("interpolated surfaces must share a topology")

    def gen(t):
        def mp(U, V):
            return (1 - t) * surface_a.map_fn(U, V) + t * surface_b.map_fn(U, V)

        def jac(U, V):
            dua, dva = surface_a.jacobian_fn(U, V)
            dub, dvb = surface_b.jacobian_fn(U, V)
            return (1 - t) * dua + t * dub, (1 - t) * dva + t * dvb

        poles = ()
        if surface_a.topology == TOPO_SPHERE:
            poles = tuple((1 - t) * pa + t * pb
                          for pa, pb in zip(surface_a.pole_points, surface_b.pole_points))
        return ParamSurface(f"{name}:{t:g}", mp, jac, surface_a.topology, poles)

    return SurfaceFamily(name, model_name, gen, t_range)
