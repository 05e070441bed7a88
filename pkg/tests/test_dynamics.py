import math

import numpy as np
import pytest
from scipy.linalg import expm

from spheredyn.dynamics import (
    Ensemble,
    SimConfig,
    attention_consensus,
    cbo_consensus,
    consensus_at,
    euler_step,
    finite_beta_drift,
    simulate,
    softmax_weights,
    zero_temperature_drift,
)
from spheredyn.geometry import RngStream, sample_uniform
from spheredyn.metrics import hardmax_target
from spheredyn.spectral import build_model

E = math.e
IDENTITY3 = build_model(np.eye(3), np.eye(3))


def random_symmetric_vbt_model(gen, d, shift=2.5):
    b = gen.standard_normal((d, d)) + shift * np.eye(d)
    sym = gen.standard_normal((d, d))
    sym = sym + sym.T
    return build_model(b, sym @ np.linalg.inv(b.T))


def test_softmax_beta_zero_uniform():
    ens = Ensemble(sample_uniform(3, RngStream(1), n=7))
    w = softmax_weights(ens, np.eye(3), 0.0, 2)
    assert np.allclose(w, 1.0 / 7.0, atol=1e-15)


def test_softmax_single_token():
    ens = Ensemble(np.array([[1.0, 0.0]]))
    assert np.allclose(softmax_weights(ens, np.eye(2), 3.0, 0), [1.0], atol=0)


def test_softmax_two_token_value():
    ens = Ensemble(np.eye(2))
    w = softmax_weights(ens, np.eye(2), 1.0, 0)
    assert np.allclose(w, [E / (E + 1), 1 / (E + 1)], atol=1e-15)


def test_softmax_shift_invariance():
    gen = np.random.Generator(np.random.Philox(2))
    ens = Ensemble(sample_uniform(4, RngStream(2), n=9))
    b = gen.standard_normal((4, 4))
    w = softmax_weights(ens, b, 11.0, 4)
    logits = 11.0 * (ens.tokens @ b.T @ ens.tokens[4]) + 123.456  # constant shift
    naive = np.exp(logits - logits.max())
    naive /= naive.sum()
    assert np.max(np.abs(w - naive)) <= 1e-14


def test_softmax_large_beta_no_overflow():
    ens = Ensemble(sample_uniform(3, RngStream(3), n=20))
    w = softmax_weights(ens, np.eye(3), 1e6, 0)
    assert np.all(np.isfinite(w)) and abs(w.sum() - 1.0) <= 1e-12


def test_attention_consensus_trivial_cases():
    single = Ensemble(np.array([[0.0, 1.0]]))
    assert np.allclose(attention_consensus(single, np.eye(2), 5.0, 0), [0.0, 1.0], atol=0)
    ens = Ensemble(sample_uniform(3, RngStream(4), n=11))
    m = attention_consensus(ens, np.eye(3), 0.0, 5)
    assert np.allclose(m, ens.tokens.mean(axis=0), atol=1e-15)
    assert np.linalg.norm(m) <= 1.0 + 1e-12


def test_consensus_approaches_sharp_target_monotonically():
    # Laplace-principle trend: the consensus point of a token over a fixed
    # full-support ensemble approaches its sharp target as beta grows
    ens = Ensemble(sample_uniform(3, RngStream(5), n=10_000))
    b = np.eye(3)
    for i in (0, 17, 999):
        target = hardmax_target(b, ens.tokens[i])
        gaps = [
            np.linalg.norm(attention_consensus(ens, b, beta, i) - target)
            for beta in (10.0, 100.0, 1000.0, 10_000.0)
        ]
        assert all(gaps[k + 1] < gaps[k] for k in range(len(gaps) - 1))


def test_cbo_matches_attention_consensus_on_tokens():
    gen = np.random.Generator(np.random.Philox(6))
    for _ in range(25):
        d = int(gen.integers(2, 6))
        n = int(gen.integers(1, 30))
        beta = float(gen.uniform(0.1, 60.0))
        b = gen.standard_normal((d, d))
        b = b + b.T  # the kernelized weights only see the symmetric part
        ens = Ensemble(sample_uniform(d, RngStream(int(gen.integers(1 << 30))), n=n))
        for i in range(0, n, max(1, n // 4)):
            lhs = cbo_consensus(ens, b, beta, ens.tokens[i])
            rhs = attention_consensus(ens, b, beta, i)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_cbo_trivial_cases():
    single = Ensemble(np.array([[1.0, 0.0]]))
    assert np.allclose(cbo_consensus(single, np.eye(2), 2.0, np.array([0.0, 1.0])), [1, 0], atol=1e-15)
    ens = Ensemble(sample_uniform(3, RngStream(7), n=13))
    m = cbo_consensus(ens, np.eye(3), 0.0, ens.tokens[0])
    assert np.allclose(m, ens.tokens.mean(axis=0), atol=1e-14)


def test_finite_beta_drift_lone_token_stationary():
    ens = Ensemble(np.array([[0.0, 0.0, 1.0]]))
    assert np.allclose(finite_beta_drift(ens, IDENTITY3, 4.0, 0), 0.0, atol=1e-15)


def test_finite_beta_drift_two_token_value():
    model = build_model(np.eye(2), np.eye(2))
    ens = Ensemble(np.eye(2))
    drift = finite_beta_drift(ens, model, 1.0, 0)
    assert np.allclose(drift, [0.0, 1.0 / (E + 1.0)], atol=1e-15)


def test_finite_beta_drift_collapsed_is_projected_value_field():
    gen = np.random.Generator(np.random.Philox(8))
    v = gen.standard_normal((3, 3))
    model = build_model(np.eye(3), v)
    x = sample_uniform(3, RngStream(8))[0]
    collapsed = Ensemble(np.tile(x, (9, 1)))
    expected = v @ x - np.dot(x, v @ x) * x
    for i in range(9):
        assert np.allclose(finite_beta_drift(collapsed, model, 37.0, i), expected, atol=1e-12)


def test_drift_tangency():
    gen = np.random.Generator(np.random.Philox(9))
    for _ in range(20):
        model = random_symmetric_vbt_model(gen, 4)
        ens = Ensemble(sample_uniform(4, RngStream(int(gen.integers(1 << 30))), n=6))
        for i in range(ens.n):
            drift = finite_beta_drift(ens, model, 13.0, i)
            assert abs(np.dot(ens.tokens[i], drift)) <= 1e-12 * max(np.linalg.norm(drift), 1e-30)
        zt = zero_temperature_drift(ens.tokens[0], model)
        assert abs(np.dot(ens.tokens[0], zt)) <= 1e-12 * max(np.linalg.norm(zt), 1e-30)


def test_zero_temperature_drift_stationary_on_eigenvector():
    # B = Id makes V B^T = V; a unit eigenvector of V is a fixed direction
    v = np.diag([3.0, 1.0, 0.5])
    model = build_model(np.eye(3), v)
    assert np.allclose(zero_temperature_drift(np.array([1.0, 0.0, 0.0]), model), 0.0, atol=1e-15)


def test_zero_temperature_drift_direct_formula():
    model = build_model(np.eye(2), np.diag([2.0, 0.0]))
    x = np.array([1.0, 1.0]) / math.sqrt(2)
    expected = np.array([1.0, -1.0]) / math.sqrt(2)
    assert np.allclose(zero_temperature_drift(x, model), expected, atol=1e-15)


def test_zero_temperature_drift_decreases_offspace_ratio():
    from spheredyn.metrics import perp_ratio_gradient
    from spheredyn.presets import _tilted_plane_matrix

    model = build_model(_tilted_plane_matrix(), np.eye(3))
    gen = np.random.Generator(np.random.Philox(10))
    for _ in range(200):
        x = gen.standard_normal(3)
        x /= np.linalg.norm(x)
        if np.linalg.norm(model.dominant.projector() @ x) < 1e-3:
            continue
        grad = perp_ratio_gradient(model.dominant, x, 1.0)
        assert np.dot(grad, zero_temperature_drift(x, model)) <= 1e-12


def test_euler_step_zero_drift_keeps_tokens():
    ens = Ensemble(np.array([[1.0, 0.0, 0.0]]), time=0.5)
    cfg = SimConfig(beta=2.0, dt=0.01, t_final=1.0)
    out = euler_step(ens, IDENTITY3, cfg)
    assert np.allclose(out.tokens, ens.tokens, atol=1e-15)
    assert out.time == pytest.approx(0.51)


def test_euler_step_matches_hand_computation():
    model = build_model(np.eye(2), np.eye(2))
    ens = Ensemble(np.eye(2))
    cfg = SimConfig(beta=1.0, dt=0.01, t_final=1.0)
    out = euler_step(ens, model, cfg)
    for i in range(2):
        drift = finite_beta_drift(ens, model, 1.0, i)
        moved = ens.tokens[i] + 0.01 * drift
        assert np.allclose(out.tokens[i], moved / np.linalg.norm(moved), atol=1e-15)


def test_zero_temperature_step_permutation_equivariant():
    gen = np.random.Generator(np.random.Philox(11))
    model = random_symmetric_vbt_model(gen, 3)
    tokens = sample_uniform(3, RngStream(11), n=8)
    cfg = SimConfig(beta=math.inf, dt=0.01, t_final=1.0)
    perm = gen.permutation(8)
    stepped = euler_step(Ensemble(tokens), model, cfg).tokens
    stepped_perm = euler_step(Ensemble(tokens[perm]), model, cfg).tokens
    assert np.allclose(stepped[perm], stepped_perm, atol=0)


def test_unit_norm_preserved_along_simulation():
    gen = np.random.Generator(np.random.Philox(12))
    model = random_symmetric_vbt_model(gen, 3)
    cfg = SimConfig(beta=50.0, dt=0.01, t_final=2.0, record_stride=20)
    res = simulate(Ensemble(sample_uniform(3, RngStream(12), n=40)), model, cfg)
    for snap in res.trajectory.snapshots:
        assert np.max(np.abs(np.linalg.norm(snap.tokens, axis=1) - 1.0)) <= 1e-9


def test_simulate_bookkeeping_minimal():
    cfg = SimConfig(beta=1.0, dt=0.01, t_final=0.01, record_stride=1)
    res = simulate(Ensemble(np.eye(2)), build_model(np.eye(2), np.eye(2)), cfg)
    assert len(res.trajectory.snapshots) == 2
    assert res.trajectory.snapshots[0].time == 0.0
    assert res.trajectory.snapshots[1].time == pytest.approx(0.01)


def test_simulate_observer_cadence_and_determinism():
    gen = np.random.Generator(np.random.Philox(13))
    model = random_symmetric_vbt_model(gen, 3)
    init = Ensemble(sample_uniform(3, RngStream(13), n=10))
    cfg = SimConfig(beta=5.0, dt=0.01, t_final=0.1, record_stride=3)
    seen = []
    res = simulate(init, model, cfg, observers=((lambda s, t, e: (s, round(t, 9))),))
    assert res.records[0] == [(0, 0.0), (3, 0.03), (6, 0.06), (9, 0.09), (10, 0.1)]
    rerun = simulate(init, model, cfg)
    assert res.trajectory.snapshots[-1].tokens.tobytes() == rerun.trajectory.snapshots[-1].tokens.tobytes()


def test_stationary_collapsed_and_bipartite_states():
    v = np.diag([2.0, 1.0, -3.0])
    model = build_model(np.eye(3), v)
    vec = np.array([1.0, 0.0, 0.0])  # unit eigenvector of V
    collapsed = Ensemble(np.tile(vec, (5, 1)))
    bipartite = Ensemble(np.array([vec, -vec, vec, -vec]))
    for ens in (collapsed, bipartite):
        for i in range(ens.n):
            assert np.max(np.abs(finite_beta_drift(ens, model, 25.0, i))) <= 1e-12


def test_collapsed_flow_matches_matrix_exponential():
    # a collapsed ensemble follows the projected linear flow of V; its
    # normalized closed form is exp(V t) x0 / ||exp(V t) x0||
    v = np.diag([1.0, 2.0, 0.5])
    model = build_model(np.eye(3), v)
    x0 = np.array([3.0, 1.0, 2.0])
    x0 /= np.linalg.norm(x0)
    errors = []
    for dt in (0.01, 0.005):
        cfg = SimConfig(beta=10.0, dt=dt, t_final=5.0, record_stride=max(1, int(0.5 / dt)))
        res = simulate(Ensemble(np.tile(x0, (4, 1))), model, cfg)
        worst = 0.0
        for snap in res.trajectory.snapshots:
            closed = expm(v * snap.time) @ x0
            closed /= np.linalg.norm(closed)
            worst = max(worst, float(np.max(np.linalg.norm(snap.tokens - closed, axis=1))))
        errors.append(worst)
    assert errors[0] <= 0.05  # O(dt) accuracy at dt = 0.01
    ratio = errors[1] / errors[0]
    assert 0.35 <= ratio <= 0.65  # halving dt halves the error


def test_kernel_backends_agree():
    pytest.importorskip("spheredyn._stepkernels")
    from spheredyn import _stepkernels as kcy
    from spheredyn import _stepkernels_py as kpy

    gen = np.random.Generator(np.random.Philox(14))
    x = sample_uniform(5, RngStream(14), n=33)
    b = gen.standard_normal((5, 5))
    v = gen.standard_normal((5, 5))
    fb_py, bad_py = kpy.finite_beta_step(x, b, v, 17.0, 0.01)
    fb_cy, bad_cy = kcy.finite_beta_step(x, b, v, 17.0, 0.01)
    assert bad_py == bad_cy == -1
    assert np.max(np.abs(fb_py - fb_cy)) <= 1e-12
    zt_py, _ = kpy.zero_temp_run(x, b, v, 0.01, 25)
    zt_cy, _ = kcy.zero_temp_run(x, b, v, 0.01, 25)
    assert np.max(np.abs(zt_py - zt_cy)) <= 1e-12
