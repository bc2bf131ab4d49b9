# test_acceptance.py
"""Acceptance suite: one test per criterion, each printing a PASS line.

The heavy end-to-end cases (two benchmark systems trained from scratch)
run last; the whole module is self-contained and uses only fixed seeds.
"""

import json
import time

import numpy as np
import pytest

from lqdyn import cli, dynsys, features, model, neural, opinf, optim, \
    reduce
from lqdyn.features import QuadIndexMap, quad_monomial_matrix

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")

GLY_RANGES = [(0.15, 1.6), (0.19, 2.16), (0.04, 0.2), (0.1, 0.35),
              (0.08, 0.3), (0.14, 2.67), (0.05, 0.1)]


def _report(line):
    print(f"\n[PASS] {line}", flush=True)


# 1. Gradient oracle ==========================================================

def test_acceptance_gradient_oracle():
    """Every parameter gradient matches step-1e-6 central differences with
    relative error < 1e-5 on 5 random configurations (n <= 7, width <= 35,
    blocks <= 5); coordinates below the finite-difference noise floor are
    compared absolutely at 1e-9. Runtime < 30 s."""
    t0 = time.perf_counter()
    configs = [(2, 10, 2, 0), (3, 5, 1, 1), (1, 4, 0, 2), (7, 35, 5, 3),
               (4, 8, 3, 4)]
    worst_rel = 0.0
    checked = 0
    for n, width, blocks, seed in configs:
        rng = np.random.default_rng(seed)
        net = neural.init_params(n, width, blocks, seed=seed)
        flat_net = neural.pack_net(net) \
            + 0.1 * rng.standard_normal(net.num_params)
        net = neural.unpack_net(flat_net, n, width, blocks)
        nq = n * (n + 1) // 2
        ops = opinf.LinQuadOps(a_row=0.3 * rng.standard_normal(n),
                               q_row=0.3 * rng.standard_normal(nq),
                               bias=float(0.3 * rng.standard_normal()),
                               component_index=0)
        gate = opinf.GateDecision(kind=opinf.NEEDS_NETWORK,
                                  threshold_used=1e-3, rel_rms=1.0)
        comp = neural.ComponentModel(ops=ops, gate=gate, net=net)
        states = rng.standard_normal((6, n))
        targets = neural.predict_rows(comp, states) \
            + 0.02 * rng.standard_normal(6)

        _, grads = neural.loss_and_grads(comp, states, targets)
        analytic = grads.flat()
        flat = optim.pack_component(ops, net)

        def loss_at(vec):
            o, m = optim.unpack_component(vec, n, width, blocks, 0)
            c = neural.ComponentModel(ops=o, gate=gate, net=m)
            return neural.loss_and_grads(c, states, targets)[0]

        step = 1e-6
        for i in range(flat.shape[0]):
            up, down = flat.copy(), flat.copy()
            up[i] += step
            down[i] -= step
            fd = (loss_at(up) - loss_at(down)) / (2 * step)
            diff = abs(analytic[i] - fd)
            scale = max(abs(analytic[i]), abs(fd))
            assert diff <= max(1e-5 * scale, 1e-9), \
                f"coordinate {i} of config {(n, width, blocks)}: " \
                f"analytic {analytic[i]:.3e} vs fd {fd:.3e}"
            if scale > 1e-4:
                worst_rel = max(worst_rel, diff / scale)
            checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report(f"gradient oracle: {checked} coordinates over 5 configs, "
            f"worst relative error {worst_rel:.2e}, {elapsed:.1f}s")


# 2. Least-squares recovery oracle ===========================================

def test_acceptance_ls_recovery_oracle():
    """20 random linear-quadratic systems (n <= 5): exact derivatives
    recover the operators to 1e-8 relative; five-point-stencil derivatives
    at h = 0.01 recover them to 1e-4. Runtime < 1 min."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worst_exact = 0.0
    worst_stencil = 0.0
    for trial in range(20):
        n = int(rng.integers(1, 6))
        nq = n * (n + 1) // 2
        # Stable linear part plus a small quadratic coupling keeps the
        # trajectories bounded for the stencil variant.
        a = -np.eye(n) + 0.3 * rng.uniform(-1, 1, size=(n, n))
        q = 0.1 * rng.uniform(-1, 1, size=(n, nq))
        b = 0.2 * rng.uniform(-1, 1, size=n)
        truth = np.hstack([a, q, b[:, None]])

        # Exact derivatives on random states.
        states = rng.uniform(-1, 1, size=(60 * (n + nq), n))
        quad = quad_monomial_matrix(states, QuadIndexMap.for_dim(n))
        targets = states @ a.T + quad @ q.T + b
        ds = features.build_dataset(
            [dynsys.DerivativeSamples(states=states, derivs=targets,
                                      spacing=0.01)],
            split_seed=trial)
        for i in range(n):
            ops = opinf.fit_linquad(ds, i)
            fitted = np.concatenate([ops.a_row, ops.q_row, [ops.bias]])
            err = np.linalg.norm(fitted - truth[i]) \
                / np.linalg.norm(truth[i])
            worst_exact = max(worst_exact, err)
            assert err < 1e-8

        # Stencil derivatives along trajectories at h = 0.01.
        imap = QuadIndexMap.for_dim(n)

        def field(x, a=a, q=q, b=b, imap=imap):
            mono = quad_monomial_matrix(x[None, :], imap)[0]
            return a @ x + q @ mono + b

        blocks = []
        for k in range(8):
            x0 = rng.uniform(-1, 1, size=n)
            traj = dynsys.integrate(field, x0, (0.0, 2.0), 201)
            blocks.append(dynsys.stencil_derivatives(traj))
        ds2 = features.build_dataset(blocks, split_seed=trial)
        for i in range(n):
            ops = opinf.fit_linquad(ds2, i)
            fitted = np.concatenate([ops.a_row, ops.q_row, [ops.bias]])
            err = np.linalg.norm(fitted - truth[i]) \
                / np.linalg.norm(truth[i])
            worst_stencil = max(worst_stencil, err)
            assert err < 1e-4
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _report(f"LS recovery oracle: 20 systems, worst exact {worst_exact:.2e}"
            f", worst stencil {worst_stencil:.2e}, {elapsed:.1f}s")


# 3. Gate correctness on the benchmarks ======================================

def test_acceptance_gate_correctness():
    """FHN: w gates analytic, v needs a network. Glycolysis: S3, S4, S5,
    S7 gate analytic and S1, S2, S6 need networks, at threshold 1e-3.
    Runtime < 2 min including data generation."""
    t0 = time.perf_counter()

    p = dynsys.FhnParams()
    ics = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 10, seed=11)
    blocks = [dynsys.stencil_derivatives(
        dynsys.integrate(lambda x: dynsys.rhs_fhn(x, p), ic, (0.0, 200.0),
                         5000)) for ic in ics]
    ds = features.build_dataset(blocks, split_seed=22)
    kinds = []
    for i in range(2):
        rep = opinf.residual_stats(ds, opinf.fit_linquad(ds, i))
        kinds.append(opinf.gate_component(rep, 1e-3).kind)
    assert kinds[0] == opinf.NEEDS_NETWORK   # voltage: cubic term
    assert kinds[1] == opinf.ANALYTIC        # recovery: exactly linear

    gp = dynsys.default_glycolysis_params()
    ics = dynsys.sample_initial_conditions(GLY_RANGES, 6, seed=11)
    blocks = [dynsys.stencil_derivatives(
        dynsys.integrate(lambda x: dynsys.rhs_glycolysis(x, gp), ic,
                         (0.0, 10.0), 4000)) for ic in ics]
    ds = features.build_dataset(blocks, split_seed=22)
    decisions = {}
    for i in range(7):
        rep = opinf.residual_stats(ds, opinf.fit_linquad(ds, i))
        decisions[i + 1] = opinf.gate_component(rep, 1e-3).kind
    for species in (3, 4, 5, 7):
        assert decisions[species] == opinf.ANALYTIC, \
            f"S{species} should gate analytic"
    for species in (1, 2, 6):
        assert decisions[species] == opinf.NEEDS_NETWORK, \
            f"S{species} should need a network"
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    _report(f"gate correctness: FHN (v network, w analytic) and "
            f"glycolysis ({{3,4,5,7}} analytic, {{1,2,6}} network), "
            f"{elapsed:.1f}s")


# 4. Numerical kernels ========================================================

def test_acceptance_numerical_kernels():
    """RK4 empirical order 4.0 +- 0.2; stencil exact on degree-<=4
    polynomials and O(h^4) on sine; POD Eckart-Young identity to 1e-8
    relative; the optimizer reaches loss < 1e-8 on a 2-D quadratic within
    2000 steps."""
    errs = []
    for h in (0.04, 0.02, 0.01):
        npts = round(1.0 / h) + 1
        traj = dynsys.integrate(lambda x: -x, [1.0], (0.0, 1.0), npts)
        errs.append(abs(traj.states[-1, 0] - np.exp(-1.0)))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(o - 4.0) < 0.2 for o in orders)

    rng = np.random.default_rng(1)
    coeffs = rng.uniform(-2, 2, size=5)
    poly = np.polynomial.Polynomial(coeffs)
    times = 0.3 + 0.05 * np.arange(40)
    traj = dynsys.Trajectory(times=times, states=poly(times))
    ds = dynsys.stencil_derivatives(traj)
    assert np.max(np.abs(ds.derivs[:, 0] - poly.deriv()(times[2:-2]))) \
        <= 1e-10
    sin_errs = []
    for h in (0.02, 0.01):
        t = np.arange(0.0, 2.0, h)
        sds = dynsys.stencil_derivatives(
            dynsys.Trajectory(times=t, states=np.sin(t)))
        sin_errs.append(np.max(np.abs(sds.derivs[:, 0] - np.cos(t[2:-2]))))
    assert 12.0 < sin_errs[0] / sin_errs[1] < 20.0

    snaps = rng.standard_normal((30, 100))
    for r in (2, 9):
        basis = reduce.pod_basis(snaps, rank=r)
        v = basis.v_matrix
        resid = np.linalg.norm(snaps - v @ (v.T @ snaps), "fro") ** 2
        tail = float(np.sum(basis.singular_values[r:] ** 2))
        assert resid == pytest.approx(tail, rel=1e-8)

    h = optim.HyperParams(epochs=1, learning_rate=1e-2, batch_size=1,
                          weight_decay=0.0, seed=0)
    params = np.array([1.5, -2.0])
    target = np.array([0.3, 0.7])
    state = optim.OptState.zeros(2)
    for _ in range(2000):
        params, state = optim.radam_update(state, params,
                                           2.0 * (params - target), h)
    quad_loss = float(np.sum((params - target) ** 2))
    assert quad_loss < 1e-8
    _report(f"numerical kernels: RK4 orders {orders[0]:.2f}/{orders[1]:.2f}"
            f", stencil ratio {sin_errs[0] / sin_errs[1]:.1f}, "
            f"Eckart-Young ok, optimizer loss {quad_loss:.1e}")


# 5. Discrete-model oracle ====================================================

def test_acceptance_discrete_oracle():
    """A least-squares discrete fit of a known linear map recovers it to
    1e-8 and replays the source sequence to 1e-6 over 100 steps."""
    theta = 0.15
    mat = 0.97 * np.array([[np.cos(theta), -np.sin(theta)],
                           [np.sin(theta), np.cos(theta)]])
    rng = np.random.default_rng(10)
    blocks = []
    for _ in range(8):
        seq = [rng.uniform(-1, 1, size=2)]
        for _ in range(50):
            seq.append(mat @ seq[-1])
        seq = np.asarray(seq)
        blocks.append(dynsys.DerivativeSamples(states=seq[:-1],
                                               derivs=seq[1:], spacing=1.0))
    ds = features.build_dataset(blocks, split_seed=6)
    comps = []
    worst = 0.0
    for i in range(2):
        ops = opinf.fit_linquad(ds, i)
        err = np.linalg.norm(ops.a_row - mat[i]) / np.linalg.norm(mat[i])
        worst = max(worst, err)
        assert err < 1e-8
        rep = opinf.residual_stats(ds, ops)
        comps.append(neural.ComponentModel(
            ops=ops, gate=opinf.gate_component(rep, 1e-3), net=None))
    lqm = model.LQModel(n=2, components=tuple(comps), kind=model.DISCRETE)
    x0 = np.array([0.9, -0.4])
    truth = [x0]
    for _ in range(100):
        truth.append(mat @ truth[-1])
    sim = model.simulate_discrete(lqm, x0, steps=100)
    replay = np.max(np.abs(sim.states - np.asarray(truth)))
    assert replay < 1e-6
    _report(f"discrete oracle: map recovery {worst:.2e}, replay error "
            f"{replay:.2e} over 100 steps")


# 6. Determinism ==============================================================

def test_acceptance_determinism(tmp_path):
    """Running `demo fhn` twice with the desk config produces
    byte-identical model files and metrics."""
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    rc1 = cli.main(["demo", "fhn", "--desk", "--out", str(out1)])
    rc2 = cli.main(["demo", "fhn", "--desk", "--out", str(out2)])
    assert rc1 == 0 and rc2 == 0
    model_a = (out1 / "model.json").read_bytes()
    model_b = (out2 / "model.json").read_bytes()
    metrics_a = (out1 / "metrics.json").read_bytes()
    metrics_b = (out2 / "metrics.json").read_bytes()
    assert model_a == model_b
    assert metrics_a == metrics_b
    _report(f"determinism: desk demo model ({len(model_a)} bytes) and "
            f"metrics ({len(metrics_a)} bytes) byte-identical across runs")


# 7. FHN desk-scale end-to-end ===============================================

def test_acceptance_fhn_end_to_end():
    """Full-size data (10 initial conditions, 5000 points on [0, 200]),
    architecture (10, 2), the benchmark hyperparameters with 150 epochs:
    the learned model from a fresh initial condition stays within relative
    L2 error 0.10 per component over [0, 100]. Runtime < 10 min."""
    t0 = time.perf_counter()
    p = dynsys.FhnParams()
    rhs = lambda x: dynsys.rhs_fhn(x, p)  # noqa: E731
    ics = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 10, seed=11)
    blocks = [dynsys.stencil_derivatives(
        dynsys.integrate(rhs, ic, (0.0, 200.0), 5000)) for ic in ics]
    ds = features.build_dataset(blocks, split_seed=22)

    hyper = optim.HyperParams(epochs=150, learning_rate=5e-4,
                              batch_size=512, weight_decay=1e-4, seed=33)
    comps = []
    for i in range(2):
        ops = opinf.fit_linquad(ds, i)
        rep = opinf.residual_stats(ds, ops)
        gate = opinf.gate_component(rep, 1e-3)
        if gate.kind == opinf.ANALYTIC:
            comps.append(neural.ComponentModel(ops=ops, gate=gate,
                                               net=None))
        else:
            if rep.rel_rms > 1e-2:
                # Same rule as the pipeline: a poor LS fit is a bad
                # starting point for the joint optimization.
                ops = opinf.LinQuadOps(a_row=np.zeros(2),
                                       q_row=np.zeros(3), bias=0.0,
                                       component_index=i)
            comp, _ = optim.train_component(ds, i, (10, 2), hyper, ops,
                                            gate, shuffle_seed=44)
            comps.append(comp)
    assert comps[0].net is not None
    assert comps[1].net is None
    lqm = model.LQModel(n=2, components=tuple(comps),
                        kind=model.CONTINUOUS)

    test_ic = dynsys.sample_initial_conditions([(-1, 1), (-1, 1)], 1,
                                               seed=55)[0]
    truth = dynsys.integrate(rhs, test_ic, (0.0, 100.0), 2500)
    pred = model.simulate_model(lqm, test_ic, (0.0, 100.0), 2500)
    met = model.evaluate(truth, pred)
    elapsed = time.perf_counter() - t0
    assert np.all(met.rel_l2 < 0.10), f"rel_l2 = {met.rel_l2}"
    assert elapsed < 600.0
    _report(f"FHN end-to-end: rel_l2 = {np.round(met.rel_l2, 4)} over "
            f"[0, 100] from unseen IC, {elapsed:.0f}s")


# 8. Glycolysis desk-scale end-to-end ========================================

def test_acceptance_glycolysis_end_to_end(tmp_path):
    """Reduced-budget oscillator study via the full pipeline: 10 initial
    conditions, 2000 points each on [0, 10], architecture (35, 5), 300
    epochs. The learned model from a fresh initial condition stays within
    relative L2 error 0.25 on every species over [0, 5] and remains
    bounded over [0, 10]. Runtime < 30 min. Full-budget accuracy is not
    claimed at this reduced scale."""
    t0 = time.perf_counter()
    cfg = {
        "system": "glycolysis",
        "variable_names": ["S1", "S2", "S3", "S4", "S5", "S6", "S7"],
        "params": dynsys.load_packaged_config("glycolysis")["params"],
        "ic_ranges": [list(r) for r in GLY_RANGES],
        "ic_count": 10,
        "t_span": [0.0, 10.0],
        "num_points": 2000,
        "gate_threshold": 1e-3,
        "standardize": True,
        "architecture": {"width": 35, "blocks": 5},
        "train": {"epochs": 300, "learning_rate": 1e-3, "batch_size": 128,
                  "weight_decay": 1e-4, "beta1": 0.9, "beta2": 0.999,
                  "epsilon": 1e-8},
        "test": {"ic_count": 1, "t_span": [0.0, 5.0], "num_points": 1000},
        "seeds": {"data": 11, "split": 22, "init": 33, "shuffle": 44,
                  "test": 58},
    }
    cli.validate_config(cfg)
    out = tmp_path / "gly"
    manifest = cli.cmd_simulate(cfg, out)
    model_path = cli.cmd_train(cfg, manifest, out)
    cli.cmd_evaluate(cfg, model_path, out)

    metrics = json.loads((out / "metrics.json").read_text())
    entry = metrics["per_ic"][0]
    assert entry["blow_up"] is None, "learned model blew up on [0, 5]"
    rel = np.asarray(entry["rel_l2"])
    assert np.all(rel < 0.25), f"rel_l2 = {rel}"

    lqm = model.load_model(model_path)
    test_ic = dynsys.sample_initial_conditions(GLY_RANGES, 1, seed=58)[0]
    traj10 = model.simulate_model(lqm, test_ic, (0.0, 10.0), 2000)
    bound = float(np.abs(traj10.states).max())
    assert np.all(np.isfinite(traj10.states))
    assert bound < 50.0

    elapsed = time.perf_counter() - t0
    assert elapsed < 1800.0
    _report(f"glycolysis end-to-end: rel_l2 = {np.round(rel, 3)} over "
            f"[0, 5], bounded over [0, 10] (max |x| {bound:.2f}), "
            f"{elapsed:.0f}s")
