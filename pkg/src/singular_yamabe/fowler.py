"""Radial Fowler solutions of the constant scalar curvature equation on the cylinder.

With w = dv/dt the radial equation is the Hamiltonian system

    v' = w,   w' = k^2 v - (n(n-2)/4) v^{(n+2)/(n-2)},   k = (n-2)/2,

with energy H(v, w) = w^2 - k^2 v^2 + k^2 v^{2n/(n-2)}.  Periodic orbits live
in {H < 0, v > 0} and are labelled by their minimum (the necksize) eps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .errors import NumericalError, ParameterError
from .geometry import setup

# necksizes this close to eps0 are treated as the constant orbit
EPS0_SNAP = 1e-8
DEFAULT_TOL = 1e-9
# knot spacing of the stored dense representation
SAMPLE_SPACING = 2e-2
MIN_KNOTS = 64
# drift is checked at this many points per knot interval of the interpolant
DRIFT_SUBDIVISIONS = 4


@dataclass(frozen=True)
class PhasePoint:
    v: float
    w: float


def _coeffs(n: int) -> tuple[float, float, float]:
    k2 = (n - 2) ** 2 / 4
    return k2, n * (n - 2) / 4, (n + 2) / (n - 2)


def force(v, n: int):
    """Right-hand side w' = F(v) of the radial equation."""
    k2, c, p = _coeffs(n)
    return k2 * v - c * v**p


def force_prime(v, n: int):
    """F'(v) = k^2 - (n(n+2)/4) v^{4/(n-2)}."""
    k2 = (n - 2) ** 2 / 4
    return k2 - n * (n + 2) / 4 * v ** (4 / (n - 2))


def _force_second(v, n: int):
    return -n * (n + 2) / (n - 2) * v ** (4 / (n - 2) - 1)


def hamiltonian(p: PhasePoint, n: int) -> float:
    if p.v <= 0:
        raise ParameterError(f"Hamiltonian needs v > 0, got v={p.v}")
    return float(_hamiltonian(np.float64(p.v), np.float64(p.w), n))


def _hamiltonian(v, w, n: int):
    k2 = (n - 2) ** 2 / 4
    return w * w - k2 * v * v + k2 * v ** (2 * n / (n - 2))


def _check_eps(eps: float, n: int) -> float:
    g = setup(n)
    if not (0 < eps <= g.eps0 * (1 + 1e-14)):
        raise ParameterError(f"necksize must lie in (0, eps0={g.eps0:.12g}] for n={n}, got {eps}")
    return min(float(eps), g.eps0)


def energy_level(eps: float, n: int) -> float:
    """H(eps) = k^2 (eps^{2n/(n-2)} - eps^2), the energy of the necksize-eps orbit."""
    eps = _check_eps(eps, n)
    k2 = (n - 2) ** 2 / 4
    return k2 * (eps ** (2 * n / (n - 2)) - eps**2)


def necksize_from_energy(H: float, n: int) -> float:
    """Invert energy_level on (0, eps0]; H is strictly decreasing there."""
    g = setup(n)
    hmin = energy_level(g.eps0, n)
    if not (hmin * (1 + 1e-12) <= H < 0):
        raise ParameterError(
            f"energy {H!r} outside the attainable range [{hmin:.12g}, 0) of periodic orbits for n={n}"
        )
    if H <= hmin:
        return g.eps0
    k2 = (n - 2) ** 2 / 4
    q = 2 * n / (n - 2)
    # eps^2 >= -H/k2 always; start the bracket a little below that
    lo = math.sqrt(-H / k2) * (1 - 1e-9)
    lo = min(lo, g.eps0 * 0.5)

    def f(e):
        return k2 * (e**q - e * e) - H

    while f(lo) < 0:
        lo *= 0.5
    return brentq(f, lo, g.eps0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def homoclinic(t, n: int):
    """The zero-energy orbit (cosh t)^{(2-n)/2}, the eps -> 0 limit centred at its maximum."""
    return np.cosh(t) ** ((2 - n) / 2)


def homoclinic_dt(t, n: int):
    k = (n - 2) / 2
    return -k * np.tanh(t) * np.cosh(t) ** (-k)


def limiting_period(n: int) -> float:
    """Period 2 pi / sqrt(n-2) of the linearisation about the constant orbit."""
    return 2 * math.pi / math.sqrt(n - 2)


def hermite_bpoly(t: np.ndarray, ders: np.ndarray) -> BPoly:
    """Piecewise two-point Hermite interpolant in Bernstein form.

    ``ders[i, q]`` is the q-th derivative at knot ``t[i]``; with m columns
    the pieces have degree 2m - 1 and the interpolant is C^{m-1}.
    Equivalent to ``BPoly.from_derivatives`` but built without a per-interval
    Python loop.
    """
    t = np.asarray(t, dtype=float)
    ders = np.asarray(ders, dtype=float)
    m = ders.shape[1]
    d = 2 * m - 1
    h = np.diff(t)
    left, right = ders[:-1], ders[1:]
    c = np.zeros((d + 1, len(h)))
    for j in range(m):
        for q in range(j + 1):
            scale = math.comb(j, q) * math.factorial(d - q) / math.factorial(d)
            c[j] += scale * h**q * left[:, q]
            c[d - j] += scale * (-h) ** q * right[:, q]
    return BPoly(c, t)


@dataclass(frozen=True, eq=False)
class FowlerOrbit:
    """One period of v_eps, normalised so that v(0) = eps = min v.

    ``samples`` has rows (t, v, w) on a uniform grid over [0, period];
    evaluation uses degree-7 Hermite interpolation of (v, v', v'', v''')
    between these knots, with the higher derivatives taken from the ODE.
    """

    n: int
    eps: float
    period: float
    energy: float
    samples: np.ndarray
    drift: float = 0.0
    t_max: float = 0.0
    v_max: float = 0.0
    constant: bool = False
    _dv_deps: np.ndarray = field(default=None, repr=False)
    _mono0_shift: float = field(default=0.0, repr=False)

    def __post_init__(self):
        t, v, w = self.samples.T
        n = self.n
        if self.constant:
            interp = None
        else:
            ders = np.stack([v, w, force(v, n), force_prime(v, n) * w], axis=1)
            interp = hermite_bpoly(t, ders)
        object.__setattr__(self, "_interp", interp)
        object.__setattr__(self, "_interp_d1", interp.derivative() if interp is not None else None)
        object.__setattr__(self, "_interp_d2", interp.derivative(2) if interp is not None else None)
        if self._dv_deps is not None and not self.constant:
            dv, dw = self._dv_deps.T
            fp = force_prime(v, n)
            ders = np.stack([dv, dw, fp * dv, _force_second(v, n) * w * dv + fp * dw], axis=1)
            vi = hermite_bpoly(t, ders)
            object.__setattr__(self, "_var", vi)
            object.__setattr__(self, "_var_d1", vi.derivative())
        else:
            object.__setattr__(self, "_var", None)
            object.__setattr__(self, "_var_d1", None)

    def reduce(self, t):
        return np.mod(t, self.period)

    def v(self, t):
        t = np.asarray(t, dtype=float)
        if self.constant:
            return np.full_like(t, self.eps)
        return self._interp(self.reduce(t))

    def w(self, t):
        t = np.asarray(t, dtype=float)
        if self.constant:
            return np.zeros_like(t)
        return self._interp_d1(self.reduce(t))

    def w_prime(self, t):
        t = np.asarray(t, dtype=float)
        if self.constant:
            return np.zeros_like(t)
        return self._interp_d2(self.reduce(t))

    def dv_deps(self, t):
        """The necksize Jacobi field d v_eps / d eps at fixed t (linearly growing).

        Over one period it is the variational solution with data (1, 0); the
        continuation uses psi(t + mT) = psi(t) + m c v'(t), where c is fixed by
        the one-period monodromy of the mode-0 equation.
        """
        t = np.asarray(t, dtype=float)
        if self.constant:
            return np.cos(math.sqrt(self.n - 2) * t)
        m = np.floor(t / self.period)
        tr = t - m * self.period
        return self._var(tr) + m * self._mono0_shift * self._interp_d1(tr)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "v", "w"])
            for row in self.samples:
                wr.writerow([format(x, ".17g") for x in row])


def eval_v(orbit: FowlerOrbit, t):
    return orbit.v(t)


def eval_w(orbit: FowlerOrbit, t):
    return orbit.w(t)


def _constant_orbit(n: int) -> FowlerOrbit:
    g = setup(n)
    T = limiting_period(n)
    t = np.linspace(0.0, T, 65)
    samples = np.stack([t, np.full_like(t, g.eps0), np.zeros_like(t)], axis=1)
    return FowlerOrbit(
        n=n,
        eps=g.eps0,
        period=T,
        energy=energy_level(g.eps0, n),
        samples=samples,
        t_max=T / 2,
        v_max=g.eps0,
        constant=True,
    )


def _rhs(n):
    def rhs(t, y):
        v, w, dv, dw = y
        return [w, force(v, n), dw, force_prime(v, n) * dv]

    return rhs


def _integrate(eps: float, n: int, rtol: float):
    """Two legs, minimum -> maximum -> minimum, each ended by a w = 0 event."""
    atol = rtol * 1e-2
    rhs = _rhs(n)
    horizon = 100 * limiting_period(n)

    def at_max(t, y):
        return y[1]

    at_max.terminal = True
    at_max.direction = -1

    def at_min(t, y):
        return y[1]

    at_min.terminal = True
    at_min.direction = 1

    y0 = [eps, 0.0, 1.0, 0.0]
    leg1 = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853", rtol=rtol, atol=atol,
                     events=at_max, dense_output=True)
    if leg1.status != 1 or not len(leg1.t_events[0]):
        raise NumericalError(f"no maximum of v found within {horizon:.4g} for eps={eps}, n={n}")
    t1 = float(leg1.t_events[0][0])
    y1 = leg1.y_events[0][0].copy()
    y1[1] = 0.0
    leg2 = solve_ivp(rhs, (t1, t1 + horizon), y1, method="DOP853", rtol=rtol, atol=atol,
                     events=at_min, dense_output=True)
    if leg2.status != 1 or not len(leg2.t_events[0]):
        raise NumericalError(f"no return to the minimum within {horizon:.4g} for eps={eps}, n={n}")
    T = float(leg2.t_events[0][0])
    return leg1.sol, leg2.sol, t1, T


def compute_orbit(eps: float, n: int, tol: float = DEFAULT_TOL) -> FowlerOrbit:
    """Integrate the necksize-eps orbit over one period.

    The period is the first return of w to 0 from below after the maximum.
    The energy drift of the interpolated orbit (checked at four points per
    knot interval) must stay below tol * |H(eps)| + 1e-12; the integration is
    repeated once with the tightest solver tolerance before giving up.
    """
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    eps = _check_eps(eps, n)
    g = setup(n)
    if g.eps0 - eps <= EPS0_SNAP:
        return _constant_orbit(n)
    H = energy_level(eps, n)
    bound = tol * abs(H) + 1e-12
    rtol = min(max(1e-2 * tol, 3e-14), 1e-13)
    for attempt in range(2):
        orbit = _assemble(eps, n, H, rtol)
        if orbit.drift <= bound:
            return orbit
        rtol = 3e-14
    raise NumericalError(f"energy drift {orbit.drift:.3e} exceeds {bound:.3e} for eps={eps}, n={n}")


def _knot_states(eps: float, n: int, t: np.ndarray, rtol: float) -> np.ndarray:
    # Knot to knot, so every knot is a solver step end point; sampling the
    # solver's dense output instead leaves phase jitter between knots that the
    # Hermite interpolant turns into energy drift.
    rhs = _rhs(n)
    y = np.empty((4, len(t)))
    y[:, 0] = [eps, 0.0, 1.0, 0.0]
    for i in range(len(t) - 1):
        seg = solve_ivp(rhs, (t[i], t[i + 1]), y[:, i], method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        if not seg.success:
            raise NumericalError(f"integration failed for eps={eps}, n={n}: {seg.message}")
        y[:, i + 1] = seg.y[:, -1]
    return y


def _assemble(eps: float, n: int, H: float, rtol: float) -> FowlerOrbit:
    sol1, _, t1, T = _integrate(eps, n, rtol)
    nknots = max(MIN_KNOTS, int(math.ceil(T / SAMPLE_SPACING)))
    t = np.linspace(0.0, T, nknots + 1)
    y = _knot_states(eps, n, t, rtol)
    # the terminal state is the minimum again; pin the seam exactly
    y[0, -1], y[1, -1] = eps, 0.0
    # mode-0 monodromy: (dv, dw)(T) = (1, 0) + c (0, F(eps))
    shift = float(y[3, -1] / force(eps, n))
    orbit = FowlerOrbit(
        n=n,
        eps=eps,
        period=T,
        energy=H,
        samples=np.stack([t, y[0], y[1]], axis=1),
        t_max=t1,
        v_max=float(sol1(t1)[0]),
        _dv_deps=np.stack([y[2], y[3]], axis=1),
        _mono0_shift=shift,
    )
    dense = np.linspace(0.0, T, DRIFT_SUBDIVISIONS * nknots + 1)
    drift = float(np.max(np.abs(_hamiltonian(orbit.v(dense), orbit.w(dense), n) - H)))
    object.__setattr__(orbit, "drift", drift)
    return orbit


@lru_cache(maxsize=256)
def cached_orbit(eps: float, n: int, tol: float = DEFAULT_TOL) -> FowlerOrbit:
    return compute_orbit(eps, n, tol)


def turning_points(eps: float, n: int) -> tuple[float, float]:
    """Both positive roots of H(v, 0) = H(eps) by bracketed root-finding: (eps, v_max)."""
    eps = _check_eps(eps, n)
    g = setup(n)
    H = energy_level(eps, n)
    if g.eps0 - eps <= EPS0_SNAP:
        return g.eps0, g.eps0
    k2 = (n - 2) ** 2 / 4
    q = 2 * n / (n - 2)
    f = lambda x: k2 * (x**q - x * x) - H  # noqa: E731
    return eps, brentq(f, g.eps0, 1.0, xtol=1e-15)
