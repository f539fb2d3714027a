"""Dimension constants, spherical-harmonic eigendata and quadrature on S^{n-1}."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.special import roots_jacobi

from .errors import NumericalError, ParameterError

MAX_QUADRATURE_DIM = 8


def gamma_half(m: int) -> float:
    """Gamma(m/2) for a positive integer m, via the half-integer recursion."""
    if m < 1:
        raise ParameterError(f"gamma_half needs m >= 1, got {m}")
    g = math.sqrt(math.pi) if m % 2 else 1.0
    for j in range(2 - m % 2, m - 1, 2):
        # Gamma(j/2 + 1) = (j/2) Gamma(j/2)
        g *= j / 2
    return g


def sphere_volume(n: int) -> float:
    """Volume omega_{n-1} of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / gamma_half(n)


@dataclass(frozen=True)
class GeometrySetup:
    n: int
    eps0: float
    omega: float
    crit_exp: float

    @property
    def k(self) -> float:
        """The decay exponent (n-2)/2 of the cylindrical conformal factor."""
        return (self.n - 2) / 2


def setup(n: int) -> GeometrySetup:
    if int(n) != n or n < 3:
        raise ParameterError(f"dimension must be an integer n >= 3, got {n}")
    n = int(n)
    eps0 = ((n - 2) / n) ** ((n - 2) / 4)
    return GeometrySetup(n=n, eps0=eps0, omega=sphere_volume(n), crit_exp=(n + 2) / (n - 2))


@dataclass(frozen=True)
class SphereEigenvalue:
    degree: int
    lam: float
    multiplicity: int


def sphere_eigen(l: int, n: int) -> SphereEigenvalue:
    """Eigenvalue l(l+n-2) of -Delta on S^{n-1} and the dimension of its eigenspace."""
    if l < 0:
        raise ParameterError(f"harmonic degree must be >= 0, got {l}")
    setup(n)
    mult = math.comb(l + n - 1, n - 1)
    if l >= 2:
        mult -= math.comb(l + n - 3, n - 1)
    return SphereEigenvalue(degree=l, lam=float(l * (l + n - 2)), multiplicity=mult)


def degree_of_index(j: int, n: int) -> int:
    """Harmonic degree of the j-th eigenvalue when eigenvalues repeat with multiplicity.

    Index 0 is the constant, 1..n the coordinate functions, n+1 the first
    quadratic harmonic, and so on.
    """
    if j < 0:
        raise ParameterError(f"eigen-index must be >= 0, got {j}")
    l, upper = 0, 1
    while j >= upper:
        l += 1
        upper += sphere_eigen(l, n).multiplicity
    return l


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Product rule on S^{n-1} in hyperspherical angles.

    ``polar`` holds the Gauss nodes of the n-2 polar angles (phi_1 is the
    angle from e_1), ``n_azimuth`` the number of uniform azimuth points.
    Nodes are ordered as ``np.meshgrid(..., indexing="ij")`` over
    ``(phi_1, ..., phi_{n-2}, azimuth)`` and raveled, so values on the
    nodes reshape to ``grid_shape``.
    """

    n: int
    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    polar: tuple = field(default=())
    n_azimuth: int = 0

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def grid_shape(self) -> tuple:
        return tuple(len(p) for p in self.polar) + (self.n_azimuth,)

    def rotated(self, rotation) -> "QuadratureRule":
        """Same angular grid with every node mapped by an orthogonal matrix."""
        rotation = np.asarray(rotation, dtype=float)
        return QuadratureRule(
            n=self.n,
            degree=self.degree,
            nodes=self.nodes @ rotation.T,
            weights=self.weights,
            polar=self.polar,
            n_azimuth=self.n_azimuth,
        )

    def angular_gradient_sq(self, values: np.ndarray) -> np.ndarray:
        """|grad_theta f|^2 at the nodes from nodal values, by differencing along the angle grid.

        Polar directions use second-order differences on the (non-uniform)
        Gauss nodes with one-sided stencils at the ends of each line; the
        azimuth uses periodic central differences.  The leading axes of
        ``values`` are batch axes; the last has length ``size``.
        """
        values = np.asarray(values, dtype=float)
        batch = values.shape[:-1]
        f = values.reshape(batch + self.grid_shape)
        nb = len(batch)
        npolar = len(self.polar)
        # metric factor prod_{j<i} sin^2(phi_j) for the i-th angle
        sin_grids = np.meshgrid(*[np.sin(p) for p in self.polar], indexing="ij") if npolar else []
        metric = np.ones(self.grid_shape[:-1])
        total = np.zeros_like(f)
        for i, phis in enumerate(self.polar):
            if len(phis) < 3:
                raise ParameterError("angular differencing needs >= 3 nodes per polar angle")
            d = np.gradient(f, phis, axis=nb + i, edge_order=2)
            total += d**2 / metric[..., None]
            metric = metric * sin_grids[i] ** 2
        m = self.n_azimuth
        if m < 3:
            raise ParameterError("angular differencing needs >= 3 azimuth nodes")
        dphi = 2 * np.pi / m
        d = (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2 * dphi)
        total += d**2 / metric[..., None]
        return total.reshape(batch + (self.size,))


def _polar_rule(power: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights in phi for the weight sin(phi)^power on [0, pi]."""
    alpha = (power - 1) / 2
    z, w = roots_jacobi(npts, alpha, alpha)
    return np.arccos(z)[::-1].copy(), w[::-1].copy()


@lru_cache(maxsize=64)
def build_quadrature(n: int, degree: int) -> QuadratureRule:
    """Product rule on S^{n-1} exact for polynomials of total degree <= ``degree``.

    Each polar angle phi_i carries the weight sin(phi_i)^{n-1-i}; with
    z = cos(phi_i) this is a Gauss-Jacobi rule with alpha = beta = (n-2-i)/2,
    which is exact for the even-power terms that survive the inner
    integrations.  The azimuth is the trapezoid rule on degree+1 points.
    """
    if int(n) != n or not 3 <= n <= MAX_QUADRATURE_DIM:
        raise ParameterError(f"quadrature supports 3 <= n <= {MAX_QUADRATURE_DIM}, got {n}")
    if degree < 1:
        raise ParameterError(f"quadrature degree must be >= 1, got {degree}")
    npts = degree // 2 + 1
    polar, pweights = [], []
    for i in range(1, n - 1):
        phi, w = _polar_rule(n - 1 - i, npts)
        polar.append(phi)
        pweights.append(w)
    m = degree + 1
    azimuth = 2 * np.pi * np.arange(m) / m
    aweights = np.full(m, 2 * np.pi / m)

    grids = np.meshgrid(*polar, azimuth, indexing="ij")
    wgrids = np.meshgrid(*pweights, aweights, indexing="ij")
    weights = np.prod(np.stack(wgrids), axis=0).ravel()

    coords = []
    sin_prod = np.ones(grids[0].shape)
    for phi in grids[:-1]:
        coords.append(sin_prod * np.cos(phi))
        sin_prod = sin_prod * np.sin(phi)
    coords.append(sin_prod * np.cos(grids[-1]))
    coords.append(sin_prod * np.sin(grids[-1]))
    nodes = np.stack([c.ravel() for c in coords], axis=1)
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    return QuadratureRule(
        n=int(n), degree=int(degree), nodes=nodes, weights=weights, polar=tuple(polar), n_azimuth=m
    )


SphereField = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def integrate_sphere(rule: QuadratureRule, f: SphereField) -> float:
    """Sum w_m f(theta_m); ``f`` is a callable on the (M, n) node array or nodal values."""
    vals = f(rule.nodes) if callable(f) else f
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (rule.size,))
    if not np.all(np.isfinite(vals)):
        bad = int(np.count_nonzero(~np.isfinite(vals)))
        raise NumericalError(f"integrand is not finite at {bad} quadrature node(s)")
    return float(rule.weights @ vals)
