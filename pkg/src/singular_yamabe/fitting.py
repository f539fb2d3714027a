"""Recover (eps, T, a) from samples v(t_i, theta_m) of a solution near an isolated singularity.

Stages: the radial invariant gives H(eps) and hence eps; the angular mean
gives the phase T; the degree-1 projection of the remainder gives a.  A
Gauss-Newton polish on the full deformed model follows and is kept only if it
lowers the sup-norm misfit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NoFowlerMatch, NumericalError, ParameterError
from .fowler import EPS0_SNAP, cached_orbit, energy_level, necksize_from_energy
from .geometry import QuadratureRule, build_quadrature, setup
from .model_solutions import DeformedParams, sample_grid, deformed_field
from .pohozaev import radial_flux

SCAN_POINTS = 256
GN_MAX_ITER = 6
# the window must start this far past log(max(|a|, 1))
WINDOW_MARGIN = 3.0


@dataclass(frozen=True, eq=False)
class CylinderSamples:
    n: int
    times: np.ndarray
    rule: QuadratureRule
    values: np.ndarray

    def __post_init__(self):
        setup(self.n)
        t = np.asarray(self.times, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float)
        if self.rule.n != self.n:
            raise ParameterError(f"rule is for n={self.rule.n}, samples for n={self.n}")
        if len(t) < 4:
            raise ParameterError(f"need at least 4 time slices, got {len(t)}")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("sample times must be strictly increasing")
        if v.shape != (len(t), self.rule.size):
            raise ParameterError(f"values must have shape {(len(t), self.rule.size)}, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ParameterError("sample values must be finite and strictly positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_field(cls, field_, times, rule: QuadratureRule) -> "CylinderSamples":
        return cls(rule.n, np.asarray(times, dtype=float), rule, sample_grid(field_, times, rule))

    @classmethod
    def from_model(cls, p: DeformedParams, times, rule: QuadratureRule) -> "CylinderSamples":
        return cls.from_field(deformed_field(p), times, rule)

    def window(self, t_min: float, t_max: float = math.inf) -> "CylinderSamples":
        keep = (self.times >= t_min) & (self.times <= t_max)
        return CylinderSamples(self.n, self.times[keep], self.rule, self.values[keep])

    def angular_mean(self) -> np.ndarray:
        return self.values @ self.rule.weights / self.rule.weights.sum()


def _match_rule(n: int, nodes: np.ndarray) -> QuadratureRule:
    """Product rule whose nodes coincide with ``nodes``, possibly after a fixed rotation."""
    for degree in range(1, 200):
        rule = build_quadrature(n, degree)
        if rule.size > len(nodes):
            break
        if rule.size != len(nodes):
            continue
        if np.max(np.abs(rule.nodes - nodes)) <= 1e-9:
            return rule
        # orthogonal Procrustes: nodes ~ rule.nodes @ R^T
        U, _, Vt = np.linalg.svd(nodes.T @ rule.nodes)
        R = U @ Vt
        if np.max(np.abs(rule.nodes @ R.T - nodes)) <= 1e-9:
            return rule.rotated(R)
    raise ParameterError(f"angular nodes ({len(nodes)} per slice) do not form a supported product rule")


def read_samples_csv(path) -> CylinderSamples:
    """Parse the t,theta_1..theta_n,v format; every slice must use the same node set."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParameterError(f"cannot read samples: {exc}") from exc
    if not rows:
        raise ParameterError("empty sample file")
    head = [h.strip() for h in rows[0]]
    n = len(head) - 2
    if n < 3 or head[0] != "t" or head[-1] != "v" or head[1:-1] != [f"theta_{i + 1}" for i in range(n)]:
        raise ParameterError(f"unexpected header {head}")
    body = [r for r in rows[1:] if r]
    short = [i + 2 for i, r in enumerate(body) if len(r) != n + 2]
    if short:
        raise ParameterError(f"row {short[0]} has the wrong number of columns (truncated file?)")
    try:
        data = np.array([[float(x) for x in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ParameterError(f"non-numeric sample entry: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != n + 2 or len(data) == 0:
        raise ParameterError("malformed sample rows")
    times, idx = np.unique(data[:, 0], return_inverse=True)
    counts = np.bincount(idx)
    if np.any(counts != counts[0]):
        raise ParameterError("slices have different node counts (truncated file?)")
    m = int(counts[0])
    order = np.argsort(data[:, 0], kind="stable")
    block = data[order].reshape(len(times), m, n + 2)
    nodes = block[0, :, 1:-1]
    if np.max(np.abs(block[:, :, 1:-1] - nodes)) > 1e-12:
        raise ParameterError("slices use different angular nodes")
    rule = _match_rule(n, nodes)
    return CylinderSamples(n, times, rule, block[:, :, -1])


# -- stage 1: necksize -----------------------------------------------------------


def _time_derivative(s: CylinderSamples):
    """(interior indices, d/dt values there): five-point stencil on uniform grids."""
    t, v = s.times, s.values
    dt = np.diff(t)
    if len(t) >= 7 and np.ptp(dt) <= 1e-9 * dt.mean():
        h = dt.mean()
        vt = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        return np.arange(2, len(t) - 2), vt
    g = np.gradient(v, t, axis=0, edge_order=2)
    return np.arange(1, len(t) - 1), g[1:-1]


def radial_invariants(s: CylinderSamples) -> tuple[np.ndarray, np.ndarray]:
    """Radial Pohozaev invariant at each interior slice (times, values)."""
    idx, vt = _time_derivative(s)
    if len(idx) < 3:
        raise ParameterError("need at least 3 interior slices for the time differences")
    vals = s.values[idx]
    gsq = s.rule.angular_gradient_sq(vals)
    P = np.array([radial_flux(vals[i], vt[i], gsq[i], s.rule, s.n) for i in range(len(idx))])
    return s.times[idx], P


def estimate_necksize(s: CylinderSamples) -> float:
    """Invert 2 <P>/omega = H(eps); raises NoFowlerMatch outside [H(eps0), 0)."""
    g = setup(s.n)
    _, P = radial_invariants(s)
    mean, scatter = float(P.mean()), float(P.std())
    H = 2 * mean / g.omega
    scale = 0.5 * g.omega * g.k**2 * float(np.mean(s.values**2))
    zero_band = 2 * (1e-6 * scale + 10 * scatter) / g.omega
    H0 = energy_level(g.eps0, s.n)
    if H >= -zero_band:
        raise NoFowlerMatch(f"radial invariant {mean:.3e} is not negative: no Fowler asymptotics")
    if H < H0:
        if H0 - H <= 1e-6 * abs(H0) + zero_band:
            return g.eps0
        raise NoFowlerMatch(f"energy {H:.6g} is below the cylinder level {H0:.6g}")
    return necksize_from_energy(H, s.n)


# -- stage 2: phase --------------------------------------------------------------------


def estimate_phase(s: CylinderSamples, eps_hat: float) -> float:
    """Minimise sum_i (mean_theta v(t_i) - v_eps(t_i + T))^2 over one period."""
    orbit = cached_orbit(float(eps_hat), s.n)
    if orbit.constant:
        return 0.0
    P = orbit.period
    mean = s.angular_mean()

    def misfit(T):
        return float(np.sum((mean - orbit.v(s.times + T)) ** 2))

    grid = np.linspace(0.0, P, SCAN_POINTS, endpoint=False)
    vals = np.array([misfit(T) for T in grid])
    i = int(np.argmin(vals))
    d = P / SCAN_POINTS
    try:
        res = minimize_scalar(misfit, bracket=(grid[i] - d, grid[i], grid[i] + d), method="golden",
                              options={"xtol": 1e-12})
        T = float(res.x)
    except ValueError:
        res = minimize_scalar(misfit, bounds=(grid[i] - d, grid[i] + d), method="bounded",
                              options={"xatol": 1e-12})
        T = float(res.x)
    T = float(np.mod(T, P))
    return 0.0 if T >= P - 1e-12 else T


# -- stage 3: translation ----------------------------------------------------------------


def degree1_coefficients(s: CylinderSamples, eps_hat: float, T_hat: float) -> np.ndarray:
    """c_i = (n/omega) sum_m w_m r(t_i, theta_m) theta_m with r = v - v_eps(t + T)."""
    g = setup(s.n)
    orbit = cached_orbit(float(eps_hat), s.n)
    r = s.values - orbit.v(s.times + T_hat)[:, None]
    return s.n / g.omega * (r * s.rule.weights) @ s.rule.nodes


def estimate_translation(s: CylinderSamples, eps_hat: float, T_hat: float) -> np.ndarray:
    orbit = cached_orbit(float(eps_hat), s.n)
    k = (s.n - 2) / 2
    tau = s.times + T_hat
    g = np.exp(-s.times) * (-orbit.w(tau) + k * orbit.v(tau))
    gg = float(g @ g)
    if not gg > 0:
        raise NumericalError("degree-1 profile vanishes on the sample window")
    return g @ degree1_coefficients(s, eps_hat, T_hat) / gg


# -- full fit ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    n: int
    eps_hat: float
    T_hat: float
    a_hat: np.ndarray
    residual: float
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "eps_hat": self.eps_hat,
            "T_hat": self.T_hat,
            "a_hat": [float(x) for x in self.a_hat],
            "residual": self.residual,
            "diagnostics": self.diagnostics,
        }


def _model(s: CylinderSamples, eps: float, T: float, a: np.ndarray):
    """Model values and Jacobian columns (d/d eps, d/dT, d/da_1..n) on the grid."""
    orbit = cached_orbit(float(eps), s.n)
    k = (s.n - 2) / 2
    t = s.times[:, None]
    th = s.rule.nodes[None]
    e = np.exp(-t)
    diff = th - a * e[..., None]
    d2 = np.sum(diff * diff, axis=-1)
    logd = 0.5 * np.log(d2)
    sarg = t + T + logd
    pref = d2 ** (-k / 2)
    v, w = orbit.v(sarg), orbit.w(sarg)
    val = pref * v
    J = np.empty(val.shape + (2 + s.n,))
    J[..., 0] = pref * orbit.dv_deps(sarg)
    J[..., 1] = pref * w
    dlog_da = -(diff * e[..., None]) / d2[..., None]
    J[..., 2:] = (pref * (w - k * v))[..., None] * dlog_da
    return val, J


def _sup_misfit(s, eps, T, a) -> float:
    val, _ = _model(s, eps, T, a)
    return float(np.max(np.abs(s.values - val)))


def residual_profile(s: CylinderSamples, res: FitResult) -> np.ndarray:
    """Per-slice sup misfit of the fitted model."""
    val, _ = _model(s, res.eps_hat, res.T_hat, np.asarray(res.a_hat))
    return np.max(np.abs(s.values - val), axis=1)


def _polish(s: CylinderSamples, eps, T, a, r0):
    """Gauss-Newton on the nonlinear model; each step is kept only if the sup misfit drops."""
    eps0 = setup(s.n).eps0
    x = np.concatenate([[eps, T], a])
    best, steps = r0, 0
    for _ in range(GN_MAX_ITER):
        val, J = _model(s, x[0], x[1], x[2:])
        r = (s.values - val).ravel()
        Jm = J.reshape(-1, J.shape[-1])
        cols = slice(0, None)
        if eps0 - x[0] <= EPS0_SNAP:
            cols = slice(1, None)  # the eps direction is frozen at the cylinder
        dx = np.zeros_like(x)
        dx[cols], *_ = np.linalg.lstsq(Jm[:, cols], r, rcond=None)
        cand = x + dx
        if not 0 < cand[0] <= eps0:
            cand[0] = min(max(cand[0], 1e-12), eps0)
        try:
            new = _sup_misfit(s, cand[0], cand[1], cand[2:])
        except (ParameterError, NumericalError):
            break
        if not new < best:
            break
        x, best, steps = cand, new, steps + 1
        if np.max(np.abs(dx)) < 1e-13:
            break
    return x, best, steps


def fit(s: CylinderSamples, polish: bool = True) -> FitResult:
    """Chain the three estimators, then polish; see the module docstring."""
    eps_hat = estimate_necksize(s)
    T_hat = estimate_phase(s, eps_hat)
    a_hat = estimate_translation(s, eps_hat, T_hat)
    start = math.log(max(float(np.linalg.norm(a_hat)), 1.0)) + WINDOW_MARGIN
    if s.times[0] < start:
        if np.count_nonzero(s.times >= start) < 4:
            raise ParameterError(f"window must start after t = {start:.4g}; too few slices remain")
        return fit(s.window(start), polish)
    staged = _sup_misfit(s, eps_hat, T_hat, a_hat)
    diag = {"staged_residual": staged, "gn_steps": 0, "window": [float(s.times[0]), float(s.times[-1])]}
    residual = staged
    if polish:
        x, best, steps = _polish(s, eps_hat, T_hat, a_hat, staged)
        diag["gn_steps"] = steps
        if steps:
            eps_hat, T_hat, a_hat, residual = float(x[0]), float(x[1]), x[2:], best
    orbit = cached_orbit(float(eps_hat), s.n)
    T_hat = float(np.mod(T_hat, orbit.period))
    if T_hat >= orbit.period - 1e-12 or orbit.constant:
        T_hat = 0.0
    diag["polished_residual"] = residual
    return FitResult(s.n, float(eps_hat), T_hat, np.asarray(a_hat, dtype=float), float(residual), diag)
