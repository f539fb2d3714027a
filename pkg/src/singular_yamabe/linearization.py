"""Mode operators of the linearisation about a Fowler solution and their Floquet data.

Separating variables with a spherical harmonic of eigenvalue lam turns the
linearised cylinder equation into the Hill equation

    psi'' + q(t) psi = 0,   q = n(n+2)/4 v_eps^{4/(n-2)} - (n-2)^2/4 - lam,

whose one-period monodromy has determinant one.  The indicial root is read off
the trace: gamma = arccosh(|tr|/2) / T_eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalError, ParameterError
from .fowler import FowlerOrbit, cached_orbit, force
from .geometry import degree_of_index, sphere_eigen

# |trace| within this of 2 is treated as a (degenerate) unit multiplier
PARABOLIC_TOL = 1e-7
# shooting segments are about this long; keeps the growing solution well scaled
SEGMENT = 1.0


@dataclass(frozen=True)
class ModeOperator:
    orbit: FowlerOrbit
    degree: int
    lam: float

    def potential(self, t):
        n = self.orbit.n
        v = self.orbit.v(t)
        return n * (n + 2) / 4 * v ** (4 / (n - 2)) - (n - 2) ** 2 / 4 - self.lam

    def apply(self, f, t, h: float = 1e-2):
        """psi'' + q psi by a fourth-order central stencil."""
        t = np.asarray(t, dtype=float)
        d2 = (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)
        return d2 + self.potential(t) * f(t)


@dataclass(frozen=True)
class FloquetResult:
    degree: int
    monodromy: np.ndarray
    trace: float
    gamma: float | None
    det: float
    period: float

    @property
    def j(self) -> int:
        return self.degree


def mode_operator(orbit: FowlerOrbit, j: int | None = None, *, degree: int | None = None) -> ModeOperator:
    """Mode operator by multiplicity index ``j`` or harmonic ``degree`` (exactly one)."""
    if (j is None) == (degree is None):
        raise ParameterError("give exactly one of j (eigen-index) or degree")
    if degree is None:
        degree = degree_of_index(j, orbit.n)
    eig = sphere_eigen(degree, orbit.n)
    return ModeOperator(orbit=orbit, degree=degree, lam=eig.lam)


def jacobi_translation(orbit: FowlerOrbit):
    """d/dT v_eps(t + T) = v_eps'(t): periodic, in the kernel of the degree-0 operator."""
    return orbit.w


def jacobi_necksize(orbit: FowlerOrbit):
    """d/d eps v_eps(t): value 1 and slope 0 at t = 0, grows linearly in t."""
    return orbit.dv_deps


def jacobi_mode1(orbit: FowlerOrbit):
    """e^{-t}(-v_eps' + ((n-2)/2) v_eps): the decaying degree-1 field from translations."""
    k = (orbit.n - 2) / 2

    def psi(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-t) * (-orbit.w(t) + k * orbit.v(t))

    return psi


def _segment_rhs(n: int, lam: float):
    def rhs(t, y):
        v, w, a, b, c, d = y
        q = n * (n + 2) / 4 * v ** (4 / (n - 2)) - (n - 2) ** 2 / 4 - lam
        return [w, force(v, n), b, -q * a, d, -q * c]

    return rhs


def monodromy(op: ModeOperator, tol: float = 1e-11) -> FloquetResult:
    """One-period state-transition matrix of psi'' + q psi = 0 by multiple shooting.

    The period is split into segments of length about one; on each, the
    orbit is restarted from its stored state and integrated with the
    fundamental matrix from the identity.  The monodromy is the ordered
    product, the determinant the product of the (well-conditioned) segment
    determinants.
    """
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    orbit = op.orbit
    n, T = orbit.n, orbit.period
    nseg = max(1, int(math.ceil(T / SEGMENT)))
    edges = np.linspace(0.0, T, nseg + 1)
    rhs = _segment_rhs(n, op.lam)
    M = np.eye(2)
    det = 1.0
    for t0, t1 in zip(edges[:-1], edges[1:]):
        y0 = [float(orbit.v(t0)), float(orbit.w(t0)), 1.0, 0.0, 0.0, 1.0]
        sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=tol, atol=tol * 1e-2)
        if sol.status != 0:
            raise NumericalError(f"monodromy integration failed on [{t0:.4g}, {t1:.4g}]: {sol.message}")
        a, b, c, d = sol.y[2:, -1]
        seg = np.array([[a, c], [b, d]])
        det *= a * d - b * c
        M = seg @ M
    tr = float(np.trace(M))
    if abs(abs(tr) - 2) <= PARABOLIC_TOL:
        gamma = 0.0
    elif abs(tr) < 2:
        gamma = None
    else:
        gamma = math.acosh(abs(tr) / 2) / T
    return FloquetResult(degree=op.degree, monodromy=M, trace=tr, gamma=gamma, det=float(det), period=T)


def floquet(eps: float, n: int, degree: int, tol: float = 1e-11) -> FloquetResult:
    return monodromy(mode_operator(cached_orbit(float(eps), n), degree=degree), tol)


def indicial_root(eps: float, n: int, j: int | None = None, *, degree: int | None = None) -> float:
    """gamma_{eps,j}; j is the multiplicity-expanded index, ``degree`` the harmonic degree.

    Degree 0 is 0 by definition.  Raises NumericalError in the elliptic case.
    """
    if j is not None and j < 0:
        raise ParameterError(f"eigen-index must be >= 0, got {j}")
    if degree is None:
        if j is None:
            raise ParameterError("give j or degree")
        degree = degree_of_index(j, n)
    if degree == 0:
        return 0.0
    res = floquet(eps, n, degree)
    if res.gamma is None:
        raise NumericalError(f"elliptic monodromy (trace {res.trace:.6g}) for degree {degree}, eps={eps}")
    return res.gamma


def spectrum(eps: float, n: int, degrees) -> list[dict]:
    """Report rows {degree, lambda, gamma, trace, period}; gamma is None when elliptic."""
    orbit = cached_orbit(float(eps), n)
    rows = []
    for l in degrees:
        res = monodromy(mode_operator(orbit, degree=int(l)))
        gamma = 0.0 if res.degree == 0 else res.gamma
        rows.append(
            {
                "degree": int(l),
                "lambda": sphere_eigen(int(l), n).lam,
                "gamma": gamma,
                "trace": res.trace,
                "period": res.period,
            }
        )
    return rows
