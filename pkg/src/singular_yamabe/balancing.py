"""Balancing conditions for configurations of isolated singular points.

Summing the per-point Pohozaev contributions of each global conformal Killing
field and asking the total to vanish gives, with m_j = H(eps_j) a_j,

    translations   sum_j m_j = 0                                        (n)
    dilation       sum_j (p_j.m_j) + 1/2 sum_j H_j = 0                  (1)
    rotations      sum_j (p_j m_j^T - m_j p_j^T) = 0, upper triangle    (n(n-1)/2)
    Y-fields       sum_j [p_j (m_j.p_j) + 1/2 H_j p_j - 1/2 |p_j|^2 m_j] = 0   (n)

All of these are affine in m; the system is solved in least squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fowler import energy_level
from .geometry import setup

NULLITY_RTOL = 1e-10
GROUPS = ("translation", "dilation", "rotation", "parabolic_zero")


@dataclass(frozen=True)
class SingularConfiguration:
    n: int
    points: np.ndarray
    necksizes: np.ndarray
    translations: np.ndarray | None = None

    def __post_init__(self):
        setup(self.n)
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        eps = np.asarray(self.necksizes, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ParameterError(f"points must be a k x {self.n} array")
        k = len(pts)
        if k < 2:
            raise ParameterError("a configuration needs at least two singular points")
        if len(eps) != k:
            raise ParameterError(f"{k} points but {len(eps)} necksizes")
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(k)
        if np.any(d == 0):
            raise ParameterError("singular points must be pairwise distinct")
        for e in eps:
            energy_level(float(e), self.n)  # range check
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "necksizes", eps)
        if self.translations is not None:
            a = np.atleast_2d(np.asarray(self.translations, dtype=float))
            if a.shape != pts.shape:
                raise ParameterError(f"translations must be a {k} x {self.n} array")
            object.__setattr__(self, "translations", a)

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def energies(self) -> np.ndarray:
        return np.array([energy_level(float(e), self.n) for e in self.necksizes])

    def with_translations(self, a) -> "SingularConfiguration":
        return SingularConfiguration(self.n, self.points, self.necksizes, a)

    @classmethod
    def from_dict(cls, d: dict) -> "SingularConfiguration":
        try:
            return cls(int(d["n"]), d["points"], d["necksizes"], d.get("translations"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"malformed configuration: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "SingularConfiguration":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ParameterError("configuration must be a JSON object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class BalanceReport:
    residuals: dict = field(default_factory=dict)
    max_abs: float = 0.0
    translation_bound: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(self.residuals[g]) for g in GROUPS])


def _system(points: np.ndarray, H: np.ndarray):
    """Matrix A (rows: residual components, cols: m flattened) and offset c, residual = A m + c."""
    k, n = points.shape
    rows, offs = [], []
    eye = np.eye(n)
    # translations
    for i in range(n):
        rows.append(np.tile(eye[i], k))
        offs.append(0.0)
    # dilation
    rows.append(points.ravel().copy())
    offs.append(0.5 * H.sum())
    # rotations: sum_j p_j[i] m_j[l] - m_j[i] p_j[l]
    for i in range(n):
        for l in range(i + 1, n):
            r = np.zeros((k, n))
            r[:, l] += points[:, i]
            r[:, i] -= points[:, l]
            rows.append(r.ravel())
            offs.append(0.0)
    # Y-fields: component i of p_j (m_j.p_j) - |p_j|^2/2 m_j, plus H_j p_j[i]/2
    sq = np.sum(points**2, axis=1)
    for i in range(n):
        r = points[:, i][:, None] * points - 0.5 * sq[:, None] * eye[i]
        rows.append(r.ravel())
        offs.append(0.5 * H @ points[:, i])
    return np.array(rows), np.array(offs)


def _split(vec: np.ndarray, n: int) -> dict:
    nr = n * (n - 1) // 2
    return {
        "translation": vec[:n],
        "dilation": vec[n : n + 1],
        "rotation": vec[n + 1 : n + 1 + nr],
        "parabolic_zero": vec[n + 1 + nr :],
    }


def rotation_matrix_residual(cfg: SingularConfiguration) -> np.ndarray:
    """The full antisymmetric matrix sum_j (p_j m_j^T - m_j p_j^T)."""
    if cfg.translations is None:
        raise ParameterError("translations are required")
    m = cfg.energies[:, None] * cfg.translations
    P = cfg.points
    return P.T @ m - m.T @ P


def residuals(cfg: SingularConfiguration) -> BalanceReport:
    if cfg.translations is None:
        raise ParameterError("residuals need the translations a_j")
    H = cfg.energies
    m = H[:, None] * cfg.translations
    A, c = _system(cfg.points, H)
    vec = A @ m.ravel() + c
    return BalanceReport(
        residuals=_split(vec, cfg.n),
        max_abs=float(np.max(np.abs(vec))),
        translation_bound=translation_bound(cfg),
    )


@dataclass(frozen=True)
class Solution:
    translations: np.ndarray
    residual_norm: float
    nullity: int
    singular_values: np.ndarray

    def __iter__(self):
        return iter((self.translations, self.residual_norm, self.nullity))


def solve_translations(points, necksizes, n: int | None = None) -> Solution:
    """Minimum-norm least-squares m from the SVD; a_j = m_j / H(eps_j).

    nullity = (number of unknowns) - (rank), rank counting singular values
    above 1e-10 times the largest.  Unpacks as (translations, residual_norm, nullity).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = n or pts.shape[1]
    cfg = SingularConfiguration(n, pts, necksizes)
    H = cfg.energies
    A, c = _system(cfg.points, H)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = NULLITY_RTOL * (s[0] if len(s) else 0.0)
    keep = s > cutoff
    rank = int(np.count_nonzero(keep))
    m = Vt[keep].T @ ((U[:, keep].T @ -c) / s[keep])
    res = float(np.linalg.norm(A @ m + c))
    a = m.reshape(cfg.k, n) / H[:, None]
    return Solution(a, res, A.shape[1] - rank, s)


def translation_bound(cfg: SingularConfiguration) -> float:
    if cfg.translations is None:
        raise ParameterError("translations are required")
    m = cfg.energies[:, None] * cfg.translations
    return float(np.max(np.linalg.norm(m, axis=1)))


def report_dict(cfg: SingularConfiguration, rep: BalanceReport, solution: Solution | None = None) -> dict:
    out = {
        "n": cfg.n,
        "points": cfg.points.tolist(),
        "necksizes": cfg.necksizes.tolist(),
        "energies": cfg.energies.tolist(),
        "translations": cfg.translations.tolist() if cfg.translations is not None else None,
        "residuals": {g: np.asarray(v).tolist() for g, v in rep.residuals.items()},
        "max_abs": rep.max_abs,
        "translation_bound": rep.translation_bound,
    }
    if solution is not None:
        out["residual_norm"] = solution.residual_norm
        out["nullity"] = solution.nullity
    return out
