# optim.py
"""Variance-rectified Adam with decoupled weight decay, plus the
mini-batch trainer for one component.

The adaptive denominator is only enabled once its variance estimate is
reliable: with rho_inf = 2/(1-beta2) - 1 and
rho_t = rho_inf - 2t*beta2^t/(1-beta2^t), steps with rho_t <= 4 fall back
to a plain bias-corrected momentum step, which emulates a warm-up
schedule.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import errors, neural
from .neural import ComponentModel, GradientBundle  # noqa: F401
from .opinf import NEEDS_NETWORK, LinQuadOps


@dataclass(frozen=True)
class HyperParams:
    """Training hyperparameters for one component's network."""

    epochs: int
    learning_rate: float
    batch_size: int
    weight_decay: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        # Zero is tolerated so a no-op optimizer run can be exercised.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


@dataclass(frozen=True)
class OptState:
    """First/second moment accumulators for a flat parameter vector."""

    t: int
    m: np.ndarray
    v: np.ndarray

    @staticmethod
    def zeros(dim):
        return OptState(t=0, m=np.zeros(dim), v=np.zeros(dim))


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch train/validation MSE and total wall-clock time."""

    train_loss: np.ndarray
    val_loss: np.ndarray
    wall_seconds: float

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write("epoch,train_mse,val_mse\n")
            for e, (tr, va) in enumerate(zip(self.train_loss,
                                             self.val_loss)):
                f.write(f"{e},{tr:.17g},{va:.17g}\n")


def radam_update(state, params, grads, h, decay_mask=None):
    """One rectified-Adam step on a flat parameter vector.

    Parameters
    ----------
    state : OptState
    params, grads : (P,) ndarray
    h : HyperParams
    decay_mask : (P,) bool ndarray or None
        Entries eligible for decoupled weight decay (network weight
        matrices); None disables decay entirely.

    Returns
    -------
    (params', state')

    Raises
    ------
    NonFinite
        If the updated parameters are not finite.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if state.m.shape != params.shape or grads.shape != params.shape:
        raise errors.DimensionMismatch("state/params/grads length mismatch")
    b1, b2 = h.beta1, h.beta2
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads ** 2

    m_hat = m / (1.0 - b1 ** t)
    rho_inf = 2.0 / (1.0 - b2) - 1.0
    b2t = b2 ** t
    rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t)
    if rho_t > 4.0:
        rect = np.sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                       / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
        v_hat = np.sqrt(v / (1.0 - b2t))
        step = h.learning_rate * rect * m_hat / (v_hat + h.epsilon)
    else:
        step = h.learning_rate * m_hat

    new_params = params.copy()
    if decay_mask is not None and h.weight_decay > 0:
        new_params[decay_mask] -= (h.learning_rate * h.weight_decay
                                   * params[decay_mask])
    new_params -= step
    if not np.all(np.isfinite(new_params)):
        raise errors.NonFinite(f"non-finite parameters after step {t}")
    return new_params, OptState(t=t, m=m, v=v)


def pack_component(ops, net):
    """Flatten [a_row, q_row, bias, network] into one vector."""
    head = np.concatenate([ops.a_row, ops.q_row, np.array([ops.bias])])
    return np.concatenate([head, neural.pack_net(net)])


def unpack_component(flat, n, width, blocks, component_index):
    """Split a flat vector back into (LinQuadOps, ResNetParams)."""
    nq = n * (n + 1) // 2
    ops = LinQuadOps(a_row=flat[:n], q_row=flat[n:n + nq],
                     bias=float(flat[n + nq]),
                     component_index=component_index)
    net = neural.unpack_net(flat[n + nq + 1:], n, width, blocks)
    return ops, net


def component_decay_mask(n, width, blocks):
    """Decay only network weight matrices: operators and every bias are
    exempt."""
    nq = n * (n + 1) // 2
    return np.concatenate([np.zeros(n + nq + 1, dtype=bool),
                           neural.net_decay_mask(n, width, blocks)])


def train_component(ds, component, arch, h, warm_ops, gate,
                    shuffle_seed=None):
    """Jointly train one component's operators and residual network.

    The operators start from the least-squares fit (warm start) and the
    network from :func:`neural.init_params`; all of them are optimized
    together on mini-batches of the training rows. Train and validation
    MSE are recorded once per epoch and the parameter snapshot with the
    best validation loss is returned.

    Parameters
    ----------
    ds : RegressionDataset
    component : int
    arch : (width, blocks)
    h : HyperParams
    warm_ops : LinQuadOps
        The least-squares fit used to initialize the operator part.
    gate : GateDecision
        Must be a needs-network decision; stored on the result.
    shuffle_seed : int, optional
        Separate seed for the per-epoch batch shuffle; derived from
        ``h.seed`` when omitted.

    Returns
    -------
    (ComponentModel, TrainHistory)

    Raises
    ------
    Diverged
        If the training loss becomes non-finite.
    """
    if gate.kind != NEEDS_NETWORK:
        raise ValueError("train_component requires a needs_network gate")
    width, blocks = int(arch[0]), int(arch[1])
    n = ds.n
    nq = ds.index_map.num_features

    base = np.random.SeedSequence([int(h.seed), int(component)])
    init_ss, shuffle_ss = base.spawn(2)
    init_seed = int(init_ss.generate_state(1)[0])
    if shuffle_seed is None:
        shuffle_rng = np.random.default_rng(shuffle_ss)
    else:
        shuffle_rng = np.random.default_rng([int(shuffle_seed),
                                             int(component)])

    net0 = neural.init_params(n, width, blocks, seed=init_seed)
    flat = pack_component(warm_ops, net0)
    mask = component_decay_mask(n, width, blocks)
    state = OptState.zeros(flat.shape[0])

    tr = ds.train_mask
    va = ds.val_mask
    x_tr, q_tr = ds.states[tr], ds.quad_feats[tr]
    y_tr = ds.targets[tr, component]
    x_va, q_va = ds.states[va], ds.quad_feats[va]
    y_va = ds.targets[va, component]
    m_tr = x_tr.shape[0]
    if m_tr == 0:
        raise errors.EmptyInput("no training rows")

    def as_model(vec):
        ops, net = unpack_component(vec, n, width, blocks, component)
        return ComponentModel(ops=ops, gate=gate, net=net)

    def mse(vec, x, q, y):
        if x.shape[0] == 0:
            return float("nan")
        r = neural.predict_rows(as_model(vec), x, q) - y
        return float(np.mean(r ** 2))

    train_hist = []
    val_hist = []
    best_val = np.inf
    best_flat = flat.copy()
    t_start = time.perf_counter()
    for epoch in range(h.epochs):
        perm = shuffle_rng.permutation(m_tr)
        loss_sum = 0.0
        for start in range(0, m_tr, h.batch_size):
            rows = perm[start:start + h.batch_size]
            try:
                loss, grads = neural.loss_and_grads(
                    as_model(flat), x_tr[rows], y_tr[rows],
                    quad_feats=q_tr[rows])
                flat, state = radam_update(state, flat, grads.flat(), h,
                                           decay_mask=mask)
            except errors.NonFinite as exc:
                raise errors.Diverged(
                    f"component {component} diverged in epoch {epoch}: "
                    f"{exc}") from exc
            loss_sum += loss * rows.shape[0]
        # Running mean of batch losses: the train loss seen this epoch.
        train_hist.append(loss_sum / m_tr)
        try:
            val_hist.append(mse(flat, x_va, q_va, y_va))
        except errors.NonFinite as exc:
            raise errors.Diverged(
                f"component {component} diverged in epoch {epoch}: "
                f"{exc}") from exc
        if not np.isfinite(train_hist[-1]):
            raise errors.Diverged(
                f"component {component} diverged in epoch {epoch}")
        if val_hist[-1] < best_val:
            best_val = val_hist[-1]
            best_flat = flat.copy()
    wall = time.perf_counter() - t_start

    history = TrainHistory(train_loss=np.asarray(train_hist),
                           val_loss=np.asarray(val_hist),
                           wall_seconds=wall)
    return as_model(best_flat), history
