"""Contact models: explicit 1-forms on chart domains with analytic derivatives.

A model stores the three components of a 1-form ``a1 dx1 + a2 dx2 + a3 dx3``
together with the full Jacobian of the component functions, from which the
exterior derivative is assembled.  Built-in catalog entries keep analytic
Jacobians; arbitrary user forms fall back on finite differences (with the
corresponding accuracy loss).

Cylindrical presentations are converted to Cartesian components once and for
all (r^2 dtheta = x dy - y dx) so that the z-axis is a regular point of every
formula; the cylindrical expression is kept as a display string only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

CHART_CARTESIAN = "cartesian-r3"
CHART_TORUS = "torus-t3"
CHART_CYLINDER = "cylinder-r2s1"


class DomainError(ValueError):
    """A point violates the chart domain (e.g. negative cylindrical radius)."""


class DegeneracyError(ArithmeticError):
    """The pointwise linear system of a contact operation is singular."""


def from_cylindrical(r, theta, z):
    """Convert cylindrical coordinates to the Cartesian chart point."""
    if np.any(np.asarray(r) < 0):
        raise DomainError("cylindrical radius must be nonnegative")
    r, theta, z = np.broadcast_arrays(*np.atleast_1d(r, theta, z))
    pts = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)
    return pts[0] if pts.shape[0] == 1 and pts.ndim == 2 else pts


def _check_point(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise DomainError("chart points have three coordinates")
    if not np.all(np.isfinite(p)):
        raise DomainError("chart point has non-finite coordinates")
    return p


@dataclass(frozen=True)
class ContactModel:
    """A cooriented plane field ker(alpha) on one of the chart domains."""

    name: str
    chart_kind: str
    alpha_fn: Callable
    jacobian_fn: Callable          # J[..., i, j] = d a_i / d x_j
    periodicities: tuple = (None, None, None)
    display: str = ""
    is_contact: bool = True

    def alpha(self, p):
        return self.alpha_fn(_check_point(p))

    def alpha_jacobian(self, p):
        return self.jacobian_fn(_check_point(p))

    def d_alpha(self, p):
        """Antisymmetric matrix D with D[i,j] = d_i a_j - d_j a_i."""
        J = self.alpha_jacobian(p)
        return np.swapaxes(J, -1, -2) - J

    @classmethod
    def from_callable(cls, name, alpha_fn, chart_kind=CHART_CARTESIAN,
                      periodicities=(None, None, None), display="",
                      step=1e-6):
        """Wrap a user form; derivatives are centered finite differences."""

        def jac(p):
            p = np.asarray(p, dtype=float)
            out = np.zeros(p.shape[:-1] + (3, 3))
            for j in range(3):
                e = np.zeros(3)
                e[j] = step
                out[..., :, j] = (alpha_fn(p + e) - alpha_fn(p - e)) / (2 * step)
            return out

        return cls(name, chart_kind, alpha_fn, jac, periodicities, display)


def eval_form(model: ContactModel, p):
    """alpha(p) and the antisymmetric matrix of d(alpha) at p."""
    return model.alpha(p), model.d_alpha(p)


def contact_volume(model: ContactModel, p):
    """Density of alpha ^ d(alpha) against the chart volume form."""
    a = model.alpha(p)
    D = model.d_alpha(p)
    return (a[..., 0] * D[..., 1, 2]
            - a[..., 1] * D[..., 0, 2]
            + a[..., 2] * D[..., 0, 1])


def _kernel_basis(a):
    """Two vectors spanning ker(a) for a nonzero covector a."""
    a = np.asarray(a, dtype=float)
    n = np.linalg.norm(a)
    if n == 0:
        raise DegeneracyError("zero 1-form has no plane field")
    k = int(np.argmin(np.abs(a)))
    e = np.zeros(3)
    e[k] = 1.0
    w1 = e - (a[k] / n**2) * a
    w1 /= np.linalg.norm(w1)
    w2 = np.cross(a, w1) / n
    return w1, w2


def _hamiltonian_solve(a, D, f_value, grad):
    """The unique X with a(X) = f and (i_X dA + df) = 0 on ker(a)."""
    w1, w2 = _kernel_basis(a)
    M = np.stack([a, -w1 @ D, -w2 @ D])
    rhs = np.array([f_value, -float(grad @ w1), -float(grad @ w2)])
    try:
        X = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("contact linear system is singular") from exc
    scale = max(1.0, float(np.abs(D).max()), float(np.abs(a).max()))
    r1 = abs(float(a @ X) - f_value)
    c = (X @ D) + grad           # i_X dA + df as a covector
    r2 = max(abs(float(c @ w1)), abs(float(c @ w2)))
    if r1 + r2 > 1e-8 * scale * max(1.0, abs(f_value), float(np.linalg.norm(grad)) + 1.0):
        raise DegeneracyError(f"contact solve residual too large ({r1 + r2:.3e})")
    return X


def reeb_field(model: ContactModel, p):
    """The vector field with i_R dA = 0 and alpha(R) = 1 at p."""
    a = model.alpha(p)
    D = model.d_alpha(p)
    return _hamiltonian_solve(a, D, 1.0, np.zeros(3))


def contact_hamiltonian_field(model: ContactModel, f, p, step=1e-5):
    """The unique contact vector field X with alpha(X) = f at p.

    ``f`` is a scalar function of the chart point; its gradient is taken by
    centered finite differences with the given step.
    """
    p = _check_point(p)
    a = model.alpha(p)
    D = model.d_alpha(p)
    grad = np.zeros(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        grad[j] = (f(p + e) - f(p - e)) / (2 * step)
    return _hamiltonian_solve(a, D, float(f(p)), grad)


# ----------------------------------------------------------------------
# catalog forms
# ----------------------------------------------------------------------

def _sinc(r):
    """sin(r)/r, stable at r = 0."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-2
    r2 = r * r
    series = 1.0 - r2 / 6.0 + r2 * r2 / 120.0
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = np.where(small, 1.0, np.sin(np.where(small, 1.0, r)) / np.where(small, 1.0, r))
    return np.where(small, series, direct)


def _sinc_slope(r):
    """(r cos r - sin r) / r^3 = (d/dr sinc)(r) / r, stable at r = 0."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-2
    r2 = r * r
    series = -1.0 / 3.0 + r2 / 30.0 - r2 * r2 / 840.0
    rs = np.where(small, 1.0, r)
    direct = (rs * np.cos(rs) - np.sin(rs)) / rs**3
    return np.where(small, series, direct)


def _zeros_like_jac(p):
    return np.zeros(np.asarray(p).shape[:-1] + (3, 3))


def _std_xyz_alpha(p):
    z = p[..., 2]
    return np.stack([np.cos(z), -np.sin(z), np.zeros_like(z)], axis=-1)


def _std_xyz_jac(p):
    z = p[..., 2]
    J = _zeros_like_jac(p)
    J[..., 0, 2] = -np.sin(z)
    J[..., 1, 2] = -np.cos(z)
    return J


def _r2s1_alpha(p):
    z = 2 * np.pi * p[..., 2]
    return np.stack([np.cos(z), -np.sin(z), np.zeros_like(z)], axis=-1)


def _r2s1_jac(p):
    z = 2 * np.pi * p[..., 2]
    J = _zeros_like_jac(p)
    J[..., 0, 2] = -2 * np.pi * np.sin(z)
    J[..., 1, 2] = -2 * np.pi * np.cos(z)
    return J


def _std_jet_alpha(p):
    x2 = p[..., 1]
    one = np.ones_like(x2)
    return np.stack([one, np.zeros_like(x2), x2], axis=-1)


def _std_jet_jac(p):
    J = _zeros_like_jac(p)
    J[..., 2, 1] = 1.0
    return J


def _make_cyl(c):
    def alpha(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([-c * y, c * x, np.ones_like(x)], axis=-1)

    def jac(p):
        J = _zeros_like_jac(p)
        J[..., 0, 1] = -c
        J[..., 1, 0] = c
        return J

    return alpha, jac


def _ot_alpha(p):
    x, y = p[..., 0], p[..., 1]
    r = np.hypot(x, y)
    s = _sinc(r)
    return np.stack([-y * s, x * s, np.cos(r)], axis=-1)


def _ot_jac(p):
    x, y = p[..., 0], p[..., 1]
    r = np.hypot(x, y)
    s = _sinc(r)
    g = _sinc_slope(r)
    J = _zeros_like_jac(p)
    J[..., 0, 0] = -x * y * g
    J[..., 0, 1] = -s - y * y * g
    J[..., 1, 0] = s + x * x * g
    J[..., 1, 1] = x * y * g
    J[..., 2, 0] = -x * s
    J[..., 2, 1] = -y * s
    return J


def _flat_alpha(p):
    z = p[..., 2]
    return np.stack([np.zeros_like(z), np.zeros_like(z), np.ones_like(z)], axis=-1)


_TWO_PI = 2 * np.pi

MODELS = {
    "std_xyz": ContactModel("std_xyz", CHART_CARTESIAN, _std_xyz_alpha, _std_xyz_jac,
                            display="cos(z) dx - sin(z) dy"),
    "std_jet": ContactModel("std_jet", CHART_CARTESIAN, _std_jet_alpha, _std_jet_jac,
                            display="dt + p dq"),
    "std_cyl": ContactModel("std_cyl", CHART_CARTESIAN, *_make_cyl(1.0),
                            display="dz + r^2 dtheta  (dz + x dy - y dx)"),
    "std_cyl_half": ContactModel("std_cyl_half", CHART_CARTESIAN, *_make_cyl(0.5),
                                 display="dz + (1/2) r^2 dtheta"),
    "ot": ContactModel("ot", CHART_CARTESIAN, _ot_alpha, _ot_jac,
                       display="cos(r) dz + r sin(r) dtheta"),
    "t3": ContactModel("t3", CHART_TORUS, _std_xyz_alpha, _std_xyz_jac,
                       periodicities=(_TWO_PI, _TWO_PI, _TWO_PI),
                       display="cos(z) dx - sin(z) dy on T^3"),
    "r2s1": ContactModel("r2s1", CHART_CYLINDER, _r2s1_alpha, _r2s1_jac,
                         periodicities=(None, None, 1.0),
                         display="cos(2 pi z) dx - sin(2 pi z) dy, z in R/Z"),
}

#: control form with alpha ^ d(alpha) = 0; not a contact structure
FLAT_MODEL = ContactModel("flat", CHART_CARTESIAN, _flat_alpha, _zeros_like_jac,
                          display="dz (non-contact control)", is_contact=False)

ALL_MODELS = dict(MODELS)
ALL_MODELS["flat"] = FLAT_MODEL


def get_model(name: str) -> ContactModel:
    try:
        return ALL_MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; catalog: {sorted(ALL_MODELS)}") from None
