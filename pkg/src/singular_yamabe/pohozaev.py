"""Pohozaev invariants: the radial flux on the cylinder and the conformal-Killing fluxes in R^n.

For a solution u of the Euclidean equation and a conformal Killing field X,
the flux through the sphere |x - c| = eta (y = x - c) is

    P = sum_m w_m |y|^{n-2} { n/(n-1) (X.grad u)(y.grad u) - (n-2)/(n-1) u Hess u(X, y)
                              - ( |grad u|^2/(n-1) + (n-2)^2/(4(n-1)) u^{2n/(n-2)} ) (X.y) }

over unit-sphere nodes theta_m with y = eta theta_m.  It is independent of
eta for exact solutions.  On the deformed family one has, for a field X
evaluated relative to the singular point p,

    P_p(X) = omega H(eps) [ div X(p)/n + 2 a.X(p) ],

which gives the closed forms returned by :func:`closed_form`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _diff
from .errors import NumericalError, ParameterError
from .fowler import energy_level
from .geometry import QuadratureRule, build_quadrature, integrate_sphere, setup

DEFAULT_DEGREE = 24


# -- conformal Killing fields ------------------------------------------------


def _vec(b) -> np.ndarray:
    return np.asarray(b, dtype=float).ravel()


@dataclass(frozen=True, eq=False)
class KillingField:
    """Base class; ``__call__`` evaluates the field on (..., n) points."""

    def __call__(self, x):
        raise NotImplementedError

    def divergence(self, x):
        raise NotImplementedError

    @property
    def name(self) -> str:
        return type(self).__name__

    def describe(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True, eq=False)
class ParabolicInf(KillingField):
    """Constant field b (translations)."""

    b: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "b", _vec(self.b))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.b, x.shape).copy()

    def divergence(self, x):
        return np.zeros(np.shape(x)[:-1])

    def describe(self) -> dict:
        return {"kind": self.name, "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Dilation(KillingField):
    def __call__(self, x):
        return np.array(x, dtype=float)

    def divergence(self, x):
        x = np.asarray(x)
        return np.full(x.shape[:-1], float(x.shape[-1]))


@dataclass(frozen=True, eq=False)
class Rotation(KillingField):
    """(b.x) c - (c.x) b."""

    b: np.ndarray = field(default=None)
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        b, c = _vec(self.b), _vec(self.c)
        if b.shape != c.shape:
            raise ParameterError("rotation vectors must have the same length")
        if np.linalg.matrix_rank(np.stack([b, c]), tol=1e-12 * max(1.0, np.abs([b, c]).max())) < 2:
            raise ParameterError("rotation needs linearly independent b and c")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (x @ self.b)[..., None] * self.c - (x @ self.c)[..., None] * self.b

    def divergence(self, x):
        return np.zeros(np.shape(x)[:-1])

    def describe(self) -> dict:
        return {"kind": self.name, "b": self.b.tolist(), "c": self.c.tolist()}


@dataclass(frozen=True, eq=False)
class ParabolicZero(KillingField):
    """(b.x) x - |x|^2 b / 2 (inversions of translations)."""

    b: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "b", _vec(self.b))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (x @ self.b)[..., None] * x - 0.5 * np.sum(x * x, axis=-1)[..., None] * self.b

    def divergence(self, x):
        x = np.asarray(x, dtype=float)
        return x.shape[-1] * (x @ self.b)

    def describe(self) -> dict:
        return {"kind": self.name, "b": self.b.tolist()}


def killing_eval(X: KillingField, x):
    return X(x)


def killing_basis(n: int) -> list[KillingField]:
    """The (n+1)(n+2)/2 spanning fields, grouped as translations, dilation, rotations, Y."""
    e = np.eye(n)
    out: list[KillingField] = [ParabolicInf(e[i]) for i in range(n)]
    out.append(Dilation())
    out += [Rotation(e[i], e[j]) for i in range(n) for j in range(i + 1, n)]
    out += [ParabolicZero(e[i]) for i in range(n)]
    return out


# -- radial invariant ----------------------------------------------------------


def radial_flux(v, vt, grad_sq, rule: QuadratureRule, n: int) -> float:
    """Integral over the cross-section of 1/2 v_t^2 - 1/2|grad_theta v|^2 - k^2/2 v^2 + k^2/2 v^{2n/(n-2)}."""
    k2 = (n - 2) ** 2 / 4
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ParameterError("radial invariant needs a positive field")
    dens = 0.5 * np.asarray(vt) ** 2 - 0.5 * np.asarray(grad_sq) + 0.5 * k2 * (v ** (2 * n / (n - 2)) - v * v)
    return integrate_sphere(rule, dens)


def radial_invariant(v, t0: float, rule: QuadratureRule, n: int, h: float = 1e-3) -> float:
    """Radial Pohozaev invariant of a cylinder field (t, theta) -> v at time t0.

    ``v.dt`` is used for the time derivative when available, otherwise a
    five-point central difference with step h; the angular gradient is the
    Euclidean gradient of the degree-0 extension, by extrapolated differences.
    """
    th = rule.nodes
    tt = np.full(rule.size, float(t0))
    vals = v(tt, th)
    if getattr(v, "has_dt", False):
        vt = v.dt(tt, th)
    else:
        vt = (-v(tt + 2 * h, th) + 8 * v(tt + h, th) - 8 * v(tt - h, th) + v(tt - 2 * h, th)) / (12 * h)

    def ext(x):
        return v(tt, x / np.linalg.norm(x, axis=-1, keepdims=True))

    g = _diff.gradient(ext, th, 1e-4)
    # remove any radial component left by differencing
    g = g - np.sum(g * th, axis=-1, keepdims=True) * th
    return radial_flux(vals, vt, np.sum(g * g, axis=-1), rule, n)


# -- trace-free Ricci and the Euclidean fluxes -------------------------------------


def _derivatives(u, x, h=None):
    if hasattr(u, "grad"):
        g = u.grad(x)
    else:
        g = _diff.gradient(u, x, np.maximum(1e-4, 1e-3 * np.linalg.norm(x, axis=-1)) if h is None else h)
    if hasattr(u, "hess"):
        H = u.hess(x) if h is None else u.hess(x, h)
    elif hasattr(u, "grad"):
        H = _diff.hessian_from_gradient(u.grad, x, 1e-3 if h is None else h)
    else:
        H = _diff.hessian(u, x, 1e-3 if h is None else h)
    return g, H


def trace_free_ricci(u, x, n: int, h=None) -> np.ndarray:
    """Trace-free Ricci tensor of u^{4/(n-2)} delta in Euclidean components, shape (..., n, n).

    Its trace is -(2/u)(Delta u + n(n-2)/4 u^{(n+2)/(n-2)}), so it is trace
    free exactly on solutions.
    """
    x = np.asarray(x, dtype=float)
    u0 = np.asarray(u(x), dtype=float)
    if np.any(u0 <= 0):
        raise ParameterError("trace-free Ricci needs u > 0")
    g, H = _derivatives(u, x, h)
    gg = np.sum(g * g, axis=-1)
    scal = 2 / (n - 2) * gg / u0**2 + (n - 2) / 2 * u0 ** (4 / (n - 2))
    out = (
        2 * n / (n - 2) * g[..., :, None] * g[..., None, :] / (u0**2)[..., None, None]
        - 2 * H / u0[..., None, None]
        - scal[..., None, None] * np.eye(n)
    )
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def flux_density(u, X: KillingField, y, x, n: int, field_origin=None, h=None):
    """Integrand of the Euclidean flux at points x = center + y (before |y|^{n-2} weighting)."""
    u0 = np.asarray(u(x), dtype=float)
    if np.any(u0 <= 0) or not np.all(np.isfinite(u0)):
        raise NumericalError("solution is not positive and finite on the integration sphere")
    g, H = _derivatives(u, x, h)
    Xv = X(x - field_origin)
    Xg = np.sum(Xv * g, axis=-1)
    yg = np.sum(y * g, axis=-1)
    hxy = np.einsum("...i,...ij,...j->...", Xv, H, y)
    Xy = np.sum(Xv * y, axis=-1)
    gg = np.sum(g * g, axis=-1)
    return (
        n / (n - 1) * Xg * yg
        - (n - 2) / (n - 1) * u0 * hxy
        - (gg / (n - 1) + (n - 2) ** 2 / (4 * (n - 1)) * u0 ** (2 * n / (n - 2))) * Xy
    )


def invariant(u, X: KillingField, eta: float, center=None, rule: QuadratureRule | None = None,
              n: int | None = None, field_origin=None, max_radius: float | None = None) -> float:
    """Flux of X through |x - center| = eta.

    The field is evaluated at x - field_origin; by default the origin is the
    center, which is the translated field the per-point decomposition uses.
    ``max_radius`` (distance to the nearest other singularity) rejects
    spheres that would enclose it.
    """
    n = n or getattr(u, "n", None)
    if n is None:
        raise ParameterError("dimension n must be given")
    if not eta > 0:
        raise ParameterError(f"radius must be positive, got {eta}")
    if max_radius is not None and eta >= max_radius:
        raise ParameterError(f"radius {eta} reaches another singularity at distance {max_radius}")
    center = np.zeros(n) if center is None else _vec(center)
    origin = center if field_origin is None else _vec(field_origin)
    rule = rule or build_quadrature(n, DEFAULT_DEGREE)
    y = eta * rule.nodes
    x = center + y
    h = max(1e-4, 1e-3 * eta)
    dens = flux_density(u, X, y, x, n, origin, h)
    return eta ** (n - 2) * integrate_sphere(rule, dens)


@dataclass(frozen=True)
class PohozaevEstimate:
    etas: tuple
    values: tuple
    extrapolated: float
    uncertainty: float
    monotone: bool = True

    @property
    def spread(self) -> float:
        return float(np.ptp(self.values))


def invariant_extrapolated(u, X: KillingField, etas, center=None, rule: QuadratureRule | None = None,
                           n: int | None = None, field_origin=None) -> PohozaevEstimate:
    """Values at each radius and the eta -> 0 limit of a linear fit on the three smallest radii.

    The uncertainty is the largest deviation of the three values from the
    limit, plus the fit residual; non-monotone sequences are flagged.
    """
    etas = [float(e) for e in etas]
    if len(etas) < 3:
        raise ParameterError("extrapolation needs at least three radii")
    order = sorted(etas, reverse=True)
    vals = [invariant(u, X, e, center, rule, n, field_origin) for e in order]
    e3, v3 = np.array(order[-3:]), np.array(vals[-3:])
    A = np.stack([np.ones(3), e3], axis=1)
    coef, *_ = np.linalg.lstsq(A, v3, rcond=None)
    limit = float(coef[0])
    resid = float(np.max(np.abs(A @ coef - v3)))
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    unc = float(np.max(np.abs(v3 - limit))) + resid
    return PohozaevEstimate(tuple(order), tuple(vals), limit, unc, monotone)


# -- closed forms -------------------------------------------------------------------


def point_contribution(X: KillingField, p, eps: float, a, n: int) -> float:
    """omega H(eps) [div X(p)/n + 2 a.X(p)]: flux of a global field around the singular point p."""
    g = setup(n)
    p = _vec(p) if p is not None else np.zeros(n)
    a = _vec(a) if a is not None else np.zeros(n)
    H = energy_level(eps, n)
    return float(g.omega * H * (X.divergence(p) / n + 2 * a @ X(p)))


def closed_form(X: KillingField, eps: float, a, n: int) -> float:
    """Dilation: omega H; ParabolicInf(b): 2 omega H (a.b); rotations and ParabolicZero: 0."""
    return point_contribution(X, np.zeros(n), eps, a, n)
