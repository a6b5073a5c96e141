"""Characteristic foliations as vector fields on the parameter domain.

The foliation printed by ker(alpha) on a parametrized surface is encoded by
the pullback covector beta = (alpha(du), alpha(dv)) and its area dual
Y = (beta_v, -beta_u) with respect to du ^ dv.  Zeros of Y are the points
where the surface is tangent to the plane field; away from them Y spans
ker(beta).

Fields can also be synthetic, defined by an explicit formula on the domain.
Those are used for the generic stand-ins of non-generic catalog pictures and
for negative controls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .surfaces import ParamSurface, TOPO_SPHERE, TOPO_TORUS, PoleError


def pullback_beta(model, surface: ParamSurface, uv):
    """(alpha(du), alpha(dv)) at a parameter point; pole queries raise."""
    p, du, dv = surface.frame(uv[0], uv[1])
    a = model.alpha(p)
    return np.stack([np.sum(a * du, axis=-1), np.sum(a * dv, axis=-1)], axis=-1)


def characteristic_field(model, surface: ParamSurface, uv):
    """The du^dv-dual vector (beta_v, -beta_u) of the pullback covector."""
    b = pullback_beta(model, surface, uv)
    return np.stack([b[..., 1], -b[..., 0]], axis=-1)


class FoliationField:
    """A singular foliation on the parameter domain, given by beta and Y."""

    def __init__(self, name, beta_fn, periods, topology, surface=None, model=None):
        self.name = name
        self._beta = beta_fn
        self.periods = periods
        self.topology = topology
        self.surface = surface
        self.model = model

    # -- construction ---------------------------------------------------

    @classmethod
    def from_surface(cls, model, surface: ParamSurface) -> "FoliationField":
        # raw map/jacobian evaluation: integrator trial steps may probe just
        # past a pole row, where the parametrization formulas still extend
        def beta(uv):
            uv = np.asarray(uv, dtype=float)
            u, v = uv[..., 0], uv[..., 1]
            p = surface.map_fn(u, v)
            du, dv = surface.jacobian_fn(u, v)
            a = model.alpha(p)
            return np.stack([np.sum(a * du, axis=-1), np.sum(a * dv, axis=-1)], axis=-1)

        return cls(f"{model.name}/{surface.name}", beta, surface.periods,
                   surface.topology, surface, model)

    @classmethod
    def synthetic(cls, name, Y_fn, topology=TOPO_TORUS) -> "FoliationField":
        """Field given directly by Y(u, v); beta is recovered by duality."""
        periods = (1.0, 1.0) if topology == TOPO_TORUS else (1.0, None)

        def beta(uv):
            Y = np.asarray(Y_fn(np.asarray(uv, dtype=float)), dtype=float)
            return np.stack([-Y[..., 1], Y[..., 0]], axis=-1)

        return cls(name, beta, periods, topology)

    # -- evaluation -----------------------------------------------------

    def wrap(self, uv):
        uv = np.array(uv, dtype=float)
        for i, per in enumerate(self.periods):
            if per:
                uv[..., i] = uv[..., i] % per
        return uv

    def beta(self, uv):
        return self._beta(self.wrap(uv))

    def Y(self, uv):
        b = self.beta(uv)
        return np.stack([b[..., 1], -b[..., 0]], axis=-1)

    def speed(self, uv):
        Y = self.Y(uv)
        return np.hypot(Y[..., 0], Y[..., 1])

    def unit(self, uv):
        Y = self.Y(uv)
        n = np.hypot(Y[..., 0], Y[..., 1])
        n = np.where(n == 0, 1.0, n)
        return Y / n[..., None]

    def jacobian(self, uv, step=1e-6):
        """Centered finite-difference Jacobian of Y at a point."""
        uv = np.asarray(uv, dtype=float)
        J = np.zeros((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = step
            J[:, j] = (self.Y(uv + e) - self.Y(uv - e)) / (2 * step)
        return J

    def divergence(self, uv, step=1e-6):
        J = self.jacobian(uv, step)
        return float(J[0, 0] + J[1, 1])

    def dbeta(self, uv, step=1e-5):
        """Scalar density of d(beta) against du ^ dv (finite differences)."""
        uv = np.asarray(uv, dtype=float)
        eu, ev = np.array([step, 0.0]), np.array([0.0, step])
        dbv_du = (self.beta(uv + eu)[..., 1] - self.beta(uv - eu)[..., 1]) / (2 * step)
        dbu_dv = (self.beta(uv + ev)[..., 0] - self.beta(uv - ev)[..., 0]) / (2 * step)
        return dbv_du - dbu_dv

    # -- derived fields ---------------------------------------------------

    def rescaled(self, factor_fn) -> "FoliationField":
        """Same foliation with Y multiplied by a positive function."""

        def beta(uv):
            f = np.asarray(factor_fn(np.asarray(uv, dtype=float)), dtype=float)
            return self._beta(uv) * f[..., None]

        return FoliationField(f"{self.name}|rescaled", beta, self.periods,
                              self.topology, self.surface, self.model)

    def orientation_reversed(self) -> "FoliationField":
        """The field induced by swapping the roles of u and v."""

        def beta(uv):
            swapped = np.stack([uv[..., 1], uv[..., 0]], axis=-1)
            b = self._beta(swapped)
            return np.stack([b[..., 1], b[..., 0]], axis=-1)

        if self.topology == TOPO_SPHERE:
            raise ValueError("cannot swap parameters on a sphere domain")
        return FoliationField(f"{self.name}|reversed", beta, self.periods[::-1],
                              self.topology)

    def interior_domain(self, margin=0.0):
        """(vmin, vmax) of the open v-range (excludes sphere pole bands)."""
        if self.topology == TOPO_TORUS:
            return (-np.inf, np.inf)
        return (margin, 1.0 - margin)


@dataclass(frozen=True)
class FieldFamily:
    """One-parameter family of synthetic foliation fields."""

    name: str
    generator: Callable
    t_range: tuple = (0.0, 1.0)

    def field(self, t: float) -> FoliationField:
        return self.generator(float(t))


# ----------------------------------------------------------------------
# synthetic catalog
# ----------------------------------------------------------------------

def make_torus_ms_field() -> FoliationField:
    """Generic stand-in for the singular torus {x = c} in T^3.

    The singular circles at v = 0 and v = 1/2 are replaced by regular closed
    leaves (repelling and attracting); the dividing curves sit on v = 1/4
    and v = 3/4, the images of cos(z) = 0.
    """

    def Y(uv):
        u, v = uv[..., 0], uv[..., 1]
        return np.stack([np.ones_like(u), np.sin(2 * np.pi * v)], axis=-1)

    return FoliationField.synthetic("torus_ms", Y, TOPO_TORUS)


def make_torus_birth_death_family() -> FieldFamily:
    """Torus movie with a birth of a pair of closed leaves and a later death.

    Y_t = (1, a(t) - cos 2 pi v) with a(t) = 2 - 4t: for t < 1/4 the second
    component is positive (no closed leaf), a pair is born at v = 0 when
    t = 1/4 and dies at v = 1/2 when t = 3/4.
    """

    def gen(t):
        a = 2.0 - 4.0 * t

        def Y(uv):
            u, v = uv[..., 0], uv[..., 1]
            return np.stack([np.ones_like(u), a - np.cos(2 * np.pi * v)], axis=-1)

        return FoliationField.synthetic(f"torus_birth_death:{t:g}", Y, TOPO_TORUS)

    return FieldFamily("torus_birth_death", gen, (0.0, 1.0))


SYNTHETIC_FIELDS = {
    "torus_ms": make_torus_ms_field,
}
