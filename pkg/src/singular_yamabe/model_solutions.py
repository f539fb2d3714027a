"""Deformed Fowler solutions, Kelvin transforms and spherical (bubble) solutions.

The deformed family is obtained from the radial solution by inversion in the
unit sphere, a Euclidean translation by a, and a second inversion.  On the
cylinder (t = -log|x|, theta = x/|x|) it reads

    v_{eps,a,T}(t, theta) = |theta - a e^{-t}|^{-k} v_eps(t + T + log|theta - a e^{-t}|),

with the phase T placed inside the Fowler profile, and
u_{eps,a,T}(x) = |x|^{-k} v_{eps,a,T}(-log|x|, x/|x|).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _diff
from .errors import ParameterError
from .fowler import FowlerOrbit, cached_orbit, homoclinic, homoclinic_dt
from .geometry import QuadratureRule, build_quadrature, setup


@dataclass(frozen=True)
class DeformedParams:
    n: int
    eps: float
    a: tuple
    T: float = 0.0

    def __post_init__(self):
        setup(self.n)
        a = tuple(float(x) for x in np.ravel(self.a)) if np.size(self.a) else (0.0,) * self.n
        if len(a) != self.n:
            raise ParameterError(f"translation must have {self.n} components, got {len(a)}")
        object.__setattr__(self, "a", a)
        orbit = cached_orbit(float(self.eps), self.n)
        object.__setattr__(self, "eps", orbit.eps)
        object.__setattr__(self, "T", float(np.mod(self.T, orbit.period)))

    @property
    def orbit(self) -> FowlerOrbit:
        return cached_orbit(self.eps, self.n)

    @property
    def avec(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def singular_time(self) -> float:
        """log|a|: the deformed profile blows up at t = log|a|, theta = a/|a|."""
        na = float(np.linalg.norm(self.a))
        return math.log(na) if na > 0 else -math.inf


@dataclass(frozen=True)
class SphericalSolutionParams:
    lam: float
    x0: tuple

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"dilation must be positive, got {self.lam}")
        object.__setattr__(self, "x0", tuple(float(x) for x in np.ravel(self.x0)))


def _check_time(p: DeformedParams, t) -> None:
    if np.any(np.asarray(t) <= p.singular_time):
        raise ParameterError(
            f"deformed profile evaluated at t <= log|a| = {p.singular_time:.6g} (singular region)"
        )


def v_deformed(p: DeformedParams, t, theta, orbit: FowlerOrbit | None = None):
    """Deformed profile on the cylinder; t and theta (..., n) broadcast."""
    _check_time(p, t)
    orbit = orbit or p.orbit
    k = (p.n - 2) / 2
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    d = np.linalg.norm(theta - p.avec * np.exp(-t)[..., None], axis=-1)
    return d ** (-k) * orbit.v(t + p.T + np.log(d))


def v_deformed_dt(p: DeformedParams, t, theta, orbit: FowlerOrbit | None = None):
    """Analytic d/dt of the deformed profile at fixed theta."""
    _check_time(p, t)
    orbit = orbit or p.orbit
    k = (p.n - 2) / 2
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    a = p.avec
    e = np.exp(-t)
    at = theta @ a
    d2 = 1 - 2 * at * e + (a @ a) * e * e
    dlog = (at * e - (a @ a) * e * e) / d2
    d = np.sqrt(d2)
    s = t + p.T + np.log(d)
    return d ** (-k) * (orbit.w(s) * (1 + dlog) - k * dlog * orbit.v(s))


class DeformedSolution:
    """u_{eps,a,T} on R^n minus {0, a/|a|^2}, with an analytic gradient.

    Hessians are central differences of the analytic gradient with one
    Richardson step, using h = max(1e-4, 1e-3 |x|).
    """

    def __init__(self, params: DeformedParams):
        self.params = params
        self.n = params.n
        self.orbit = params.orbit
        self._k = (self.n - 2) / 2

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if np.any(r2 == 0):
            raise ParameterError("deformed solution is singular at x = 0")
        y = x / r2[..., None] - self.params.avec
        ny2 = np.sum(y * y, axis=-1)
        if np.any(ny2 == 0):
            raise ParameterError("point coincides with the second singularity a/|a|^2")
        return x, r2, y, ny2

    def __call__(self, x):
        x, r2, y, ny2 = self._parts(x)
        n, k = self.n, self._k
        s = 0.5 * np.log(ny2) + self.params.T
        return r2 ** ((2 - n) / 2) * ny2 ** (-k / 2) * self.orbit.v(s)

    def grad(self, x):
        x, r2, y, ny2 = self._parts(x)
        n, k = self.n, self._k
        s = 0.5 * np.log(ny2) + self.params.T
        # d log|y| / dx = J y / |y|^2 with J = (I - 2 x x^T / |x|^2) / |x|^2
        xy = np.sum(x * y, axis=-1)
        dlog = (y - 2 * x * (xy / r2)[..., None]) / (r2 * ny2)[..., None]
        pref = r2 ** ((2 - n) / 2) * ny2 ** (-k / 2)
        v, w = self.orbit.v(s), self.orbit.w(s)
        return pref[..., None] * (
            ((2 - n) * v / r2)[..., None] * x + (w - k * v)[..., None] * dlog
        )

    def hess(self, x, h=None):
        x = np.asarray(x, dtype=float)
        if h is None:
            h = np.maximum(1e-4, 1e-3 * np.linalg.norm(x, axis=-1))
        return _diff.hessian_from_gradient(self.grad, x, h)


def u_deformed(p: DeformedParams, x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ParameterError("deformed solution is singular at x = 0")
    k = (p.n - 2) / 2
    return r ** (-k) * v_deformed(p, -np.log(r), x / r[..., None])


def kelvin(f, x, n: int | None = None):
    """|x|^{2-n} f(x/|x|^2) for a vectorised scalar field f."""
    x = np.asarray(x, dtype=float)
    n = n or x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 == 0):
        raise ParameterError("Kelvin transform is undefined at x = 0")
    return r2 ** ((2 - n) / 2) * f(x / r2[..., None])


def translate(f, a):
    """The field x -> f(x - a)."""
    a = np.asarray(a, dtype=float)
    return lambda x: f(np.asarray(x, dtype=float) - a)


def radial_solution(eps: float, n: int, T: float = 0.0):
    """u(x) = |x|^{-k} v_eps(-log|x| + T)."""
    orbit = cached_orbit(float(eps), n)
    k = (n - 2) / 2

    def u(x):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return r ** (-k) * orbit.v(-np.log(r) + T)

    return u


def spherical_solution(p: SphericalSolutionParams, n: int, x):
    """(2 lam / (1 + lam^2 |x - x0|^2))^{(n-2)/2}: the round sphere in stereographic form."""
    x = np.asarray(x, dtype=float)
    d2 = np.sum((x - np.asarray(p.x0)) ** 2, axis=-1)
    return (2 * p.lam / (1 + p.lam**2 * d2)) ** ((n - 2) / 2)


class SphericalSolution:
    def __init__(self, params: SphericalSolutionParams, n: int):
        self.params = params
        self.n = n
        self._x0 = np.asarray(params.x0)

    def __call__(self, x):
        return spherical_solution(self.params, self.n, x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        lam, k = self.params.lam, (self.n - 2) / 2
        dx = x - self._x0
        c = 2 * lam / (1 + lam**2 * np.sum(dx * dx, axis=-1))
        # grad c = -lam c^2 (x - x0)
        return (-k * lam * c ** (k + 1))[..., None] * dx

    def hess(self, x, h=1e-3):
        return _diff.hessian_from_gradient(self.grad, np.asarray(x, dtype=float), h)


class Translated:
    """A model solution recentred at ``center``: x -> u(x - center)."""

    def __init__(self, u, center):
        self.u = u
        self.center = np.asarray(center, dtype=float)
        self.n = getattr(u, "n", len(self.center))

    def __call__(self, x):
        return self.u(np.asarray(x) - self.center)

    def grad(self, x):
        return self.u.grad(np.asarray(x) - self.center)

    def hess(self, x, h=None):
        if h is None:
            return self.u.hess(np.asarray(x) - self.center)
        return self.u.hess(np.asarray(x) - self.center, h)


def psi_mode1_profile(orbit: FowlerOrbit, s):
    """-v'(s) + ((n-2)/2) v(s): the periodic factor of the decaying degree-1 Jacobi field."""
    return -orbit.w(s) + (orbit.n - 2) / 2 * orbit.v(s)


def expansion_remainder(p: DeformedParams, t: float, rule: QuadratureRule | None = None) -> float:
    """sup over nodes of |v_def - v_eps(t+T) - (a.theta) e^{-t} psi(t+T)|; decays like e^{-2t}."""
    if t <= p.singular_time + 1:
        raise ParameterError(f"t={t} must exceed log|a| + 1 = {p.singular_time + 1:.6g}")
    rule = rule or build_quadrature(p.n, 12)
    orbit = p.orbit
    th = rule.nodes
    s = t + p.T
    model = orbit.v(s) + (th @ p.avec) * math.exp(-t) * psi_mode1_profile(orbit, s)
    return float(np.max(np.abs(v_deformed(p, np.full(rule.size, t), th) - model)))


def euclidean_residual(u, x, n: int, h: float):
    """Delta u + n(n-2)/4 u^{(n+2)/(n-2)} with a central-difference Laplacian."""
    x = np.asarray(x, dtype=float)
    return _diff.laplacian(u, x, h) + n * (n - 2) / 4 * u(x) ** ((n + 2) / (n - 2))


def cylinder_residual(vfun, t, theta, n: int, h: float):
    """v_tt + Delta_theta v - k^2 v + n(n-2)/4 v^{(n+2)/(n-2)} by central differences.

    Delta_theta is the Euclidean Laplacian of the degree-0 extension
    x -> v(t, x/|x|), evaluated on the unit sphere.
    """
    theta = np.asarray(theta, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), theta.shape[:-1])
    k2 = (n - 2) ** 2 / 4
    v0 = vfun(t, theta)
    vtt = (vfun(t + h, theta) - 2 * v0 + vfun(t - h, theta)) / h**2

    def ext(x):
        return vfun(t, x / np.linalg.norm(x, axis=-1, keepdims=True))

    lap = _diff.laplacian(ext, theta, h)
    return vtt + lap - k2 * v0 + n * (n - 2) / 4 * v0 ** ((n + 2) / (n - 2))


class CylinderField:
    """A field (t, theta) -> v with an optional analytic time derivative ``dt``."""

    def __init__(self, f, dt=None):
        self._f = f
        self._dt = dt

    def __call__(self, t, theta):
        return self._f(t, theta)

    @property
    def has_dt(self) -> bool:
        return self._dt is not None

    def dt(self, t, theta):
        if self._dt is None:
            raise AttributeError("field has no analytic time derivative")
        return self._dt(t, theta)


def _ones_like_nodes(theta):
    return np.ones(np.shape(theta)[:-1])


def homoclinic_field(n: int, shift: float = 0.0) -> CylinderField:
    """(cosh(t - shift))^{-k}: the round sphere on the cylinder."""
    return CylinderField(
        lambda t, th: homoclinic(np.asarray(t) - shift, n) * _ones_like_nodes(th),
        lambda t, th: homoclinic_dt(np.asarray(t) - shift, n) * _ones_like_nodes(th),
    )


def fowler_field(orbit: FowlerOrbit, T: float = 0.0) -> CylinderField:
    """The radial solution v_eps(t + T), constant in theta."""
    return CylinderField(
        lambda t, th: orbit.v(np.asarray(t) + T) * _ones_like_nodes(th),
        lambda t, th: orbit.w(np.asarray(t) + T) * _ones_like_nodes(th),
    )


def deformed_field(p: DeformedParams) -> CylinderField:
    return CylinderField(lambda t, th: v_deformed(p, t, th), lambda t, th: v_deformed_dt(p, t, th))


def sample_grid(field, times, rule: QuadratureRule) -> np.ndarray:
    """Values field(t_i, theta_m) as an array of shape (len(times), rule.size)."""
    times = np.asarray(times, dtype=float)
    tt = np.repeat(times[:, None], rule.size, axis=1)
    th = np.broadcast_to(rule.nodes, (len(times),) + rule.nodes.shape)
    return np.asarray(field(tt, th), dtype=float)


def write_samples_csv(path, times, rule: QuadratureRule, values) -> None:
    """CSV with header t,theta_1..theta_n,v; one row per (time, node)."""
    n = rule.n
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"theta_{i + 1}" for i in range(n)] + ["v"])
        for i, t in enumerate(times):
            for m in range(rule.size):
                wr.writerow(
                    [format(float(t), ".17g")]
                    + [format(float(c), ".17g") for c in rule.nodes[m]]
                    + [format(float(values[i, m]), ".17g")]
                )
