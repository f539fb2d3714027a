import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation as SciRotation

from singular_yamabe.balancing import (
    GROUPS,
    SingularConfiguration,
    report_dict,
    residuals,
    rotation_matrix_residual,
    solve_translations,
    translation_bound,
)
from singular_yamabe.errors import ParameterError
from singular_yamabe.fowler import energy_level
from singular_yamabe.geometry import setup

E = np.eye(3)


def random_config(rng, n=3, k=None, with_a=True):
    k = k or int(rng.integers(2, 5))
    pts = rng.normal(size=(k, n))
    eps = rng.uniform(0.05, setup(n).eps0, size=k)
    a = rng.normal(size=(k, n)) if with_a else None
    return SingularConfiguration(n, pts, eps, a)


# -- configuration validation -------------------------------------------------------


@pytest.mark.parametrize("points,eps", [
    ([[0, 0, 0]], [0.5]),
    ([[0, 0, 0], [0, 0, 0]], [0.5, 0.5]),
    ([[0, 0, 0], [1, 0, 0]], [0.5]),
    ([[0, 0], [1, 0]], [0.5, 0.5]),
    ([[0, 0, 0], [1, 0, 0]], [0.5, 0.9]),
    ([[0, 0, 0], [1, 0, 0]], [0.5, 0.0]),
])
def test_configuration_rejects_bad_input(points, eps):
    with pytest.raises(ParameterError):
        SingularConfiguration(3, points, eps)


def test_configuration_rejects_bad_translations():
    with pytest.raises(ParameterError):
        SingularConfiguration(3, [[0, 0, 0], [1, 0, 0]], [0.5, 0.5], [[0, 0, 0]])


def test_configuration_from_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n": 3, "points": [[-1, 0, 0], [1, 0, 0]], "necksizes": [0.3, 0.3]}))
    cfg = SingularConfiguration.from_json(path)
    assert cfg.k == 2 and cfg.translations is None
    for bad in ("[1, 2]", "{not json", json.dumps({"n": 3, "points": [[0, 0, 0], [1, 0, 0]]})):
        path.write_text(bad)
        with pytest.raises(ParameterError):
            SingularConfiguration.from_json(path)


# -- residuals ------------------------------------------------------------------------


def test_residual_count_and_groups():
    for n in (3, 4, 5):
        cfg = random_config(np.random.default_rng(n), n=n)
        rep = residuals(cfg)
        assert tuple(rep.residuals) == GROUPS
        assert len(rep.vector) == n + 1 + n * (n - 1) // 2 + n == (n + 1) * (n + 2) // 2


def test_zero_translations_leave_dilation_residual():
    cfg = SingularConfiguration(3, [[-1, 0, 0], [1, 0, 0], [0, 2, 0]], [0.2, 0.4, 0.6], np.zeros((3, 3)))
    rep = residuals(cfg)
    assert rep.residuals["dilation"][0] == pytest.approx(0.5 * cfg.energies.sum(), rel=1e-15)
    assert rep.residuals["dilation"][0] != 0
    assert translation_bound(cfg) == 0


def test_symmetric_pair_by_hand():
    cfg = SingularConfiguration(3, [-E[0], E[0]], [0.4, 0.4], [0.5 * E[0], -0.5 * E[0]])
    rep = residuals(cfg)
    assert rep.max_abs <= 1e-12
    assert rep.translation_bound == pytest.approx(abs(energy_level(0.4, 3)) / 2, rel=1e-15)


def test_residuals_match_direct_sums():
    rng = np.random.default_rng(21)
    cfg = random_config(rng, n=4, k=3)
    H = cfg.energies
    m = H[:, None] * cfg.translations
    P = cfg.points
    rep = residuals(cfg)
    assert np.allclose(rep.residuals["translation"], m.sum(axis=0), atol=1e-14)
    assert rep.residuals["dilation"][0] == pytest.approx(np.sum(P * m) + 0.5 * H.sum(), abs=1e-14)
    M = rotation_matrix_residual(cfg)
    iu = np.triu_indices(4, 1)
    assert np.allclose(rep.residuals["rotation"], M[iu], atol=1e-14)
    Y = sum(P[j] * (m[j] @ P[j]) + 0.5 * H[j] * P[j] - 0.5 * (P[j] @ P[j]) * m[j] for j in range(3))
    assert np.allclose(rep.residuals["parabolic_zero"], Y, atol=1e-14)


def test_rotation_residual_is_antisymmetric():
    for seed in range(5):
        M = rotation_matrix_residual(random_config(np.random.default_rng(seed)))
        assert np.max(np.abs(M + M.T)) <= 1e-14


def test_residuals_require_translations():
    cfg = SingularConfiguration(3, [-E[0], E[0]], [0.4, 0.4])
    with pytest.raises(ParameterError):
        residuals(cfg)
    with pytest.raises(ParameterError):
        translation_bound(cfg)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rotation_covariance(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng)
    R = SciRotation.random(random_state=rng).as_matrix()
    rot = SingularConfiguration(3, cfg.points @ R.T, cfg.necksizes, cfg.translations @ R.T)
    r0, r1 = residuals(cfg).residuals, residuals(rot).residuals
    assert np.allclose(r1["translation"], R @ r0["translation"], atol=1e-12)
    assert np.allclose(r1["dilation"], r0["dilation"], atol=1e-12)
    assert np.allclose(r1["parabolic_zero"], R @ r0["parabolic_zero"], atol=1e-12)
    M0, M1 = rotation_matrix_residual(cfg), rotation_matrix_residual(rot)
    assert np.allclose(M1, R @ M0 @ R.T, atol=1e-12)
    for g in GROUPS:
        assert np.linalg.norm(r1[g]) == pytest.approx(np.linalg.norm(r0[g]), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng)
    perm = rng.permutation(cfg.k)
    other = SingularConfiguration(3, cfg.points[perm], cfg.necksizes[perm], cfg.translations[perm])
    assert abs(residuals(other).max_abs - residuals(cfg).max_abs) <= 1e-13


def test_translation_bound_homogeneous():
    cfg = random_config(np.random.default_rng(3))
    assert translation_bound(cfg.with_translations(2 * cfg.translations)) == pytest.approx(
        2 * translation_bound(cfg), rel=1e-15)


# -- solving ----------------------------------------------------------------------------


def test_symmetric_pair_solves():
    sol = solve_translations([-E[0], E[0]], [0.3, 0.3])
    a, res, nullity = sol
    assert np.allclose(a, [0.5 * E[0], -0.5 * E[0]], atol=1e-12)
    assert res <= 1e-12
    s = sol.singular_values
    assert nullity == 2 * 3 - np.count_nonzero(s > 1e-10 * s[0])


def test_scaled_pair_halves_translations():
    a1, _, _ = solve_translations([-E[0], E[0]], [0.3, 0.3])
    a2, res, _ = solve_translations([-2 * E[0], 2 * E[0]], [0.3, 0.3])
    assert res <= 1e-12
    assert np.allclose(a2 @ E[0], 0.5 * (a1 @ E[0]), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_three_points_always_solvable(seed):
    rng = np.random.default_rng(100 + seed)
    pts = rng.normal(size=(3, 3))
    eps = rng.uniform(0.05, 0.7, size=3)
    a, res, _ = solve_translations(pts, eps)
    assert res <= 1e-10
    assert residuals(SingularConfiguration(3, pts, eps, a)).max_abs <= 1e-10


def test_four_points_report_nullity():
    rng = np.random.default_rng(7)
    sol = solve_translations(rng.normal(size=(4, 3)), [0.3, 0.4, 0.5, 0.6])
    assert sol.nullity >= 2 and sol.residual_norm <= 1e-10


def test_inconsistent_pair_returns_least_squares():
    sol = solve_translations([-E[0], E[0]], [0.2, 0.6])
    assert sol.residual_norm > 1e-4
    cfg = SingularConfiguration(3, [-E[0], E[0]], [0.2, 0.6], sol.translations)
    assert np.linalg.norm(residuals(cfg).vector) == pytest.approx(sol.residual_norm, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_solver_and_evaluator_agree(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng, with_a=False)
    sol = solve_translations(cfg.points, cfg.necksizes)
    rep = residuals(cfg.with_translations(sol.translations))
    assert np.linalg.norm(rep.vector) == pytest.approx(sol.residual_norm, rel=1e-8, abs=1e-13)
    if sol.residual_norm <= 1e-10:
        assert rep.max_abs <= 1e-10
        # the translation equation holds to machine level on consistent systems
        assert np.max(np.abs(rep.residuals["translation"])) <= 1e-13


def test_report_dict_roundtrips_through_json():
    cfg = SingularConfiguration(3, [-E[0], E[0]], [0.3, 0.3])
    sol = solve_translations(cfg.points, cfg.necksizes)
    solved = cfg.with_translations(sol.translations)
    d = json.loads(json.dumps(report_dict(solved, residuals(solved), sol)))
    assert d["nullity"] == sol.nullity
    assert set(d["residuals"]) == set(GROUPS)
    assert np.allclose(d["translations"], sol.translations)
