# test_opinf.py
"""Least-squares operator fitting, residual diagnostic, gating."""

import numpy as np
import pytest

from lqdyn import dynsys, errors, features, opinf
from lqdyn.dynsys import DerivativeSamples
from lqdyn.features import QuadIndexMap, quad_monomial_matrix


def _dataset_from_ops(n, a_rows, q_rows, biases, m_rows=300, seed=0):
    """Exact-derivative dataset generated by known operators."""
    rng = np.random.default_rng(seed)
    states = rng.uniform(-1, 1, size=(m_rows, n))
    quad = quad_monomial_matrix(states, QuadIndexMap.for_dim(n))
    targets = states @ np.asarray(a_rows).T + quad @ np.asarray(q_rows).T \
        + np.asarray(biases)
    block = DerivativeSamples(states=states, derivs=targets, spacing=0.01)
    return features.build_dataset([block], split_seed=seed)


def test_fit_recovers_pure_linear_1d():
    ds = _dataset_from_ops(1, [[2.0]], [[0.0]], [0.0])
    ops = opinf.fit_linquad(ds, 0)
    assert ops.a_row[0] == pytest.approx(2.0, abs=1e-10)
    assert ops.q_row[0] == pytest.approx(0.0, abs=1e-10)
    assert ops.bias == pytest.approx(0.0, abs=1e-10)


def test_fit_recovers_synthetic_linquad():
    # dx1/dt = -0.5 x1 + 0.1 x1 x2 + 0.3 in two dimensions.
    a = [[-0.5, 0.0], [0.0, 0.0]]
    q = [[0.0, 0.1, 0.0], [0.0, 0.0, 0.0]]
    b = [0.3, 0.0]
    ds = _dataset_from_ops(2, a, q, b, seed=4)
    ops = opinf.fit_linquad(ds, 0)
    assert np.allclose(ops.a_row, [-0.5, 0.0], atol=1e-8)
    assert np.allclose(ops.q_row, [0.0, 0.1, 0.0], atol=1e-8)
    assert ops.bias == pytest.approx(0.3, abs=1e-8)


def _fhn_dataset(num_ics=3, num_points=2500, t_end=100.0, seed=11):
    p = dynsys.FhnParams()
    ics = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], num_ics, seed)
    blocks = [dynsys.stencil_derivatives(
        dynsys.integrate(lambda x: dynsys.rhs_fhn(x, p), ic, (0.0, t_end),
                         num_points)) for ic in ics]
    return features.build_dataset(blocks, split_seed=22)


def test_fit_fhn_recovery_component():
    # The recovery equation is exactly linear: dw/dt = (v + a - b w)/tau.
    ds = _fhn_dataset()
    ops = opinf.fit_linquad(ds, 1)
    assert np.allclose(ops.a_row, [1 / 12.5, -0.8 / 12.5], atol=1e-3)
    assert ops.bias == pytest.approx(0.7 / 12.5, abs=1e-3)
    assert np.allclose(ops.q_row, 0.0, atol=1e-3)


def test_residual_zero_for_exact_fit():
    ds = _dataset_from_ops(2, [[0.5, -0.2], [0.1, 0.0]],
                           [[0.0, 0.0, 0.3], [0.0, 0.0, 0.0]], [0.1, 0.0],
                           seed=7)
    ops = opinf.fit_linquad(ds, 0)
    rep = opinf.residual_stats(ds, ops)
    assert rep.rel_rms < 1e-12
    assert rep.max_abs < 1e-10


def test_residual_fhn_gate_pattern():
    ds = _fhn_dataset()
    rep_v = opinf.residual_stats(ds, opinf.fit_linquad(ds, 0))
    rep_w = opinf.residual_stats(ds, opinf.fit_linquad(ds, 1))
    assert rep_w.rel_rms < 1e-3   # exactly linear, stencil-limited
    assert rep_v.rel_rms > 0.01   # the cubic term is unrepresentable


def test_residual_scale_invariance():
    ds = _dataset_from_ops(2, [[0.5, -0.2], [0.0, 0.0]],
                           [[0.1, 0.0, 0.0], [0.0, 0.0, 0.0]], [0.0, 0.0],
                           seed=9)
    ops = opinf.fit_linquad(ds, 0)
    rep = opinf.residual_stats(ds, ops)
    scaled = features.RegressionDataset(
        states=ds.states, quad_feats=ds.quad_feats,
        targets=ds.targets * 7.5, split_assignment=ds.split_assignment,
        seed=ds.seed)
    ops_scaled = opinf.LinQuadOps(a_row=ops.a_row * 7.5,
                                  q_row=ops.q_row * 7.5,
                                  bias=ops.bias * 7.5, component_index=0)
    rep_scaled = opinf.residual_stats(scaled, ops_scaled)
    assert rep_scaled.rel_rms == pytest.approx(rep.rel_rms, rel=1e-9,
                                               abs=1e-12)


def test_residual_per_sample_vector():
    ds = _dataset_from_ops(1, [[1.0]], [[0.0]], [0.0], m_rows=50)
    ops = opinf.fit_linquad(ds, 0)
    rep = opinf.residual_stats(ds, ops, return_per_sample=True)
    assert rep.per_sample.shape == (50,)
    short = opinf.residual_stats(ds, ops)
    assert short.per_sample is None


def test_fit_is_train_set_minimizer():
    # Perturbing any fitted coefficient by +-1e-3 never decreases the
    # train-set squared residual.
    ds = _dataset_from_ops(3, np.eye(3) * 0.2,
                           np.zeros((3, 6)), [0.0, 0.1, -0.2], seed=13)
    noisy = features.RegressionDataset(
        states=ds.states, quad_feats=ds.quad_feats,
        targets=ds.targets
        + 0.01 * np.random.default_rng(5).standard_normal(ds.targets.shape),
        split_assignment=ds.split_assignment, seed=ds.seed)
    ops = opinf.fit_linquad(noisy, 1)
    mask = noisy.train_mask
    design = np.hstack([noisy.states[mask], noisy.quad_feats[mask],
                        np.ones((int(mask.sum()), 1))])
    y = noisy.targets[mask, 1]
    theta = np.concatenate([ops.a_row, ops.q_row, [ops.bias]])
    base = np.sum((design @ theta - y) ** 2)
    for i in range(theta.shape[0]):
        for delta in (1e-3, -1e-3):
            pert = theta.copy()
            pert[i] += delta
            sse = np.sum((design @ pert - y) ** 2)
            assert sse >= base - 1e-12 * max(base, 1.0)


def test_fit_underdetermined_raises():
    ds = _dataset_from_ops(3, np.zeros((3, 3)), np.zeros((3, 6)),
                           np.zeros(3), m_rows=8)
    with pytest.raises(errors.Underdetermined):
        opinf.fit_linquad(ds, 0)


def test_fit_rejects_nonfinite_targets():
    ds = _dataset_from_ops(1, [[1.0]], [[0.0]], [0.0], m_rows=30)
    bad = features.RegressionDataset(
        states=ds.states, quad_feats=ds.quad_feats,
        targets=np.where(np.arange(30)[:, None] == 3, np.nan, ds.targets),
        split_assignment=ds.split_assignment, seed=ds.seed)
    with pytest.raises(errors.NonFinite):
        opinf.fit_linquad(bad, 0)


def test_fit_minimum_norm_on_rank_deficiency():
    # Duplicated state columns make the design rank deficient; the
    # minimum-norm solution splits the weight equally.
    rng = np.random.default_rng(3)
    states = rng.uniform(-1, 1, size=(100, 1))
    states = np.hstack([states, states])
    quad = quad_monomial_matrix(states, QuadIndexMap.for_dim(2))
    targets = np.stack([2.0 * states[:, 0], np.zeros(100)], axis=1)
    ds = features.build_dataset(
        [DerivativeSamples(states=states, derivs=targets, spacing=0.1)],
        split_seed=0)
    ops = opinf.fit_linquad(ds, 0)
    assert np.all(np.isfinite(ops.a_row))
    assert ops.a_row[0] == pytest.approx(ops.a_row[1], abs=1e-8)
    assert ops.a_row[0] + ops.a_row[1] == pytest.approx(2.0, abs=1e-6)


def test_gate_zero_residual_is_analytic():
    rep = opinf.ResidualReport(rel_rms=0.0, max_abs=0.0)
    decision = opinf.gate_component(rep, 1e-3)
    assert decision.kind == opinf.ANALYTIC
    assert decision.threshold_used == 1e-3


def test_gate_is_deterministic_function():
    for rel in (0.0, 1e-4, 1e-3, 1.0001e-3, 0.5):
        rep = opinf.ResidualReport(rel_rms=rel, max_abs=rel)
        a = opinf.gate_component(rep, 1e-3)
        b = opinf.gate_component(rep, 1e-3)
        assert a.kind == b.kind
        assert a.kind == (opinf.ANALYTIC if rel <= 1e-3
                          else opinf.NEEDS_NETWORK)


def test_gate_rejects_nonpositive_threshold():
    rep = opinf.ResidualReport(rel_rms=0.1, max_abs=0.1)
    with pytest.raises(ValueError):
        opinf.gate_component(rep, 0.0)


def test_gate_decision_consistency_enforced():
    with pytest.raises(ValueError):
        opinf.GateDecision(kind=opinf.ANALYTIC, threshold_used=1e-3,
                           rel_rms=0.5)


def test_generate_and_recover_random_systems():
    # 20 random linear-quadratic systems, exact derivatives: the fit
    # recovers the generating operators to 1e-8 relative.
    rng = np.random.default_rng(2024)
    for trial in range(20):
        n = int(rng.integers(1, 6))
        nq = n * (n + 1) // 2
        a = rng.uniform(-1, 1, size=(n, n))
        q = rng.uniform(-1, 1, size=(n, nq))
        b = rng.uniform(-1, 1, size=n)
        ds = _dataset_from_ops(n, a, q, b, m_rows=40 * (n + nq),
                               seed=1000 + trial)
        for i in range(n):
            ops = opinf.fit_linquad(ds, i)
            truth = np.concatenate([a[i], q[i], [b[i]]])
            fitted = np.concatenate([ops.a_row, ops.q_row, [ops.bias]])
            err = np.linalg.norm(fitted - truth) / np.linalg.norm(truth)
            assert err < 1e-8
