import math

import numpy as np
import pytest

from spheredyn.errors import InPerpError, SingularError
from spheredyn.geometry import RngStream, sample_uniform
from spheredyn.metrics import perp_ratio
from spheredyn.presets import (
    NONSYM_REAL_B,
    NONSYM_REAL_V,
    NONSYM_ROTATING_B,
    NONSYM_ROTATING_V,
    _tilted_plane_matrix,
)
from spheredyn.spectral import (
    Subspace,
    build_model,
    project_ensemble,
    spherical_projection,
    spherical_projection_jacobian,
    subspace_project,
)


def test_build_model_diagonal_example():
    model = build_model(B=np.diag([-1.0, -1.0, 1.0]), V=np.diag([-1.0, 1.0, -2.0]))
    assert np.allclose(model.VBt, np.diag([1.0, -1.0, -2.0]), atol=0)
    assert model.dominant.dim == 1
    assert np.allclose(np.abs(model.dominant.basis[:, 0]), [1, 0, 0], atol=0)
    assert model.gap == 2.0
    assert model.value_dominant.dim == 1
    assert np.allclose(np.abs(model.value_dominant.basis[:, 0]), [0, 1, 0], atol=0)
    assert model.value_dominant_abs.dim == 1
    assert np.allclose(np.abs(model.value_dominant_abs.basis[:, 0]), [0, 0, 1], atol=0)
    assert model.sigma_min_b == 1.0 and model.sigma_max_b == 1.0


def test_build_model_identity_value_matrix():
    gen = np.random.Generator(np.random.Philox(11))
    q, _ = np.linalg.qr(gen.standard_normal((4, 4)))
    b = q @ np.diag([4.0, 2.0, 1.0, 0.5]) @ q.T
    model = build_model(b, np.eye(4))
    assert model.dominant.dim == 1
    assert np.max(np.abs(np.abs(model.dominant.basis[:, 0]) - np.abs(q[:, 0]))) <= 1e-9
    # V = Id: the value eigenspace is the whole space (gap convention inf)
    assert model.value_dominant.dim == 4
    assert model.value_dominant_abs.dim == 4


def test_build_model_tilted_plane():
    model = build_model(_tilted_plane_matrix(), np.eye(3))
    assert model.dominant.dim == 2
    assert abs(model.gap - 4.0) <= 1e-12
    assert abs(model.lead_eigenvalue - 5.0) <= 1e-12


def test_build_model_singular_b():
    with pytest.raises(SingularError):
        build_model(np.diag([1.0, 0.0]), np.eye(2))


def test_build_model_nonsymmetric_cases():
    rotating = build_model(np.array(NONSYM_ROTATING_B), np.array(NONSYM_ROTATING_V))
    assert not rotating.vbt_symmetric
    assert rotating.dominant is None and rotating.gap is None
    # complex spectrum (eigenvalues +-i and -2): no general direction either
    assert rotating.dominant_general is None
    eigs = np.linalg.eigvals(rotating.VBt)
    assert sorted(np.round(eigs.imag, 9).tolist()) == [-1.0, 0.0, 1.0]

    real = build_model(np.array(NONSYM_REAL_B), np.array(NONSYM_REAL_V))
    assert not real.vbt_symmetric
    assert real.dominant is None
    assert real.dominant_general is not None and real.dominant_general.dim == 1
    eigs = np.sort(np.linalg.eigvals(real.VBt).real)
    assert np.allclose(eigs, [-2.0, 1.0 - math.sqrt(2), 1.0 + math.sqrt(2)], atol=1e-9)
    # V of the real-spectrum pair is diagonal, so value eigenspaces exist
    assert real.value_dominant is not None
    assert np.allclose(np.abs(real.value_dominant.basis[:, 0]), [0, 1, 0], atol=0)


def test_subspace_project_examples():
    s = Subspace(np.eye(3)[:, :2])
    x_in = np.array([0.3, -0.4, 0.0])
    assert np.allclose(subspace_project(s, x_in), x_in, atol=0)
    assert np.allclose(subspace_project(s, np.array([0.0, 0.0, 2.0])), 0.0, atol=0)
    assert np.allclose(subspace_project(s, np.array([0.6, 0.0, 0.8])), [0.6, 0.0, 0.0], atol=0)


def test_subspace_projector_operator_identities():
    gen = np.random.Generator(np.random.Philox(21))
    q, _ = np.linalg.qr(gen.standard_normal((6, 3)))
    s = Subspace(q)
    p = s.projector()
    assert np.max(np.abs(p @ p - p)) <= 1e-12
    assert np.max(np.abs(p - p.T)) <= 1e-12


def test_spherical_projection_examples():
    s = Subspace(np.eye(3)[:, :2])
    assert np.allclose(spherical_projection(s, np.array([0.6, 0.0, 0.8])), [1, 0, 0], atol=1e-15)
    on_sphere = np.array([0.6, 0.8, 0.0])
    assert np.allclose(spherical_projection(s, on_sphere), on_sphere, atol=1e-15)
    with pytest.raises(InPerpError):
        spherical_projection(Subspace(np.eye(3)[:, :1]), np.array([0.0, 0.0, 1.0]))


def test_spherical_projection_idempotent():
    gen = np.random.Generator(np.random.Philox(31))
    q, _ = np.linalg.qr(gen.standard_normal((5, 2)))
    s = Subspace(q)
    for _ in range(50):
        x = gen.standard_normal(5)
        x /= np.linalg.norm(x)
        y = spherical_projection(s, x)
        assert np.max(np.abs(spherical_projection(s, y) - y)) <= 1e-12


def test_jacobian_on_subspace_formula():
    s = Subspace(np.eye(3)[:, :2])
    x = np.array([0.6, 0.8, 0.0])  # inside the subspace, unit norm
    expected = s.projector() - np.outer(x, x)
    assert np.allclose(spherical_projection_jacobian(s, x), expected, atol=1e-14)


def test_jacobian_matches_finite_differences():
    gen = np.random.Generator(np.random.Philox(41))
    h = 1e-5
    for _ in range(10):
        q, _ = np.linalg.qr(gen.standard_normal((4, 2)))
        s = Subspace(q)
        x = gen.standard_normal(4)
        x /= np.linalg.norm(x)
        if np.linalg.norm(subspace_project(s, x)) < 0.3:
            continue
        jac = spherical_projection_jacobian(s, x)
        fd = np.empty((4, 4))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd[:, k] = (spherical_projection(s, x + e) - spherical_projection(s, x - e)) / (2 * h)
        assert np.max(np.abs(jac - fd)) <= 1e-6


def test_jacobian_annihilates_zero_temperature_field():
    from spheredyn.dynamics import zero_temperature_drift

    gen = np.random.Generator(np.random.Philox(51))
    for _ in range(20):
        d = 4
        b = gen.standard_normal((d, d)) + 2.5 * np.eye(d)
        sym = gen.standard_normal((d, d))
        sym = sym + sym.T
        v = sym @ np.linalg.inv(b.T)
        model = build_model(b, v)
        x = gen.standard_normal(d)
        x /= np.linalg.norm(x)
        jac = spherical_projection_jacobian(model.dominant, x)
        assert np.max(np.abs(jac @ zero_temperature_drift(x, model))) <= 1e-10


def test_project_ensemble_examples():
    s = Subspace(np.eye(3)[:, :2])
    inside = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    assert np.allclose(project_ensemble(inside, s), inside, atol=0)
    pair = np.array([[0.6, 0.0, 0.8], [-0.6, 0.0, -0.8]])
    assert np.allclose(project_ensemble(pair, s), [[1, 0, 0], [-1, 0, 0]], atol=1e-15)
    with pytest.raises(InPerpError) as err:
        project_ensemble(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), Subspace(np.eye(3)[:, :1]))
    assert err.value.token_index == 1


def test_pushforward_lands_in_subspace_for_tilted_plane():
    model = build_model(_tilted_plane_matrix(), np.eye(3))
    tokens = sample_uniform(3, RngStream(61), n=500)
    images = project_ensemble(tokens, model.dominant)
    residual = images - images @ model.dominant.projector().T
    assert np.max(np.linalg.norm(residual, axis=1)) <= 1e-9
    assert np.max(np.abs(np.linalg.norm(images, axis=1) - 1.0)) <= 1e-12


def test_projection_distance_bounded_by_lyapunov_ratio():
    gen = np.random.Generator(np.random.Philox(71))
    q, _ = np.linalg.qr(gen.standard_normal((5, 2)))
    s = Subspace(q)
    for _ in range(200):
        x = gen.standard_normal(5)
        x /= np.linalg.norm(x)
        if np.linalg.norm(subspace_project(s, x)) <= 1e-6:
            continue
        gap_sq = float(np.sum((x - spherical_projection(s, x)) ** 2))
        for p in (0.25, 0.5, 1.0):
            assert gap_sq <= 2.0 * perp_ratio(s, x, p) + 1e-12


def test_cluster_stability_under_tiny_perturbation():
    gen = np.random.Generator(np.random.Philox(81))
    for b in (_tilted_plane_matrix(), np.diag([-1.0, -1.0, 1.0])):
        base = build_model(b, np.eye(3))
        noise = 1e-12 * gen.standard_normal(b.shape)
        noisy = build_model(b + (noise + noise.T) / 2, np.eye(3))
        assert noisy.dominant.dim == base.dominant.dim
