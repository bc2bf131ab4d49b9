# neural.py
"""Feed-forward residual network and the combined linear-quadratic map.

The network lifts the state to a hidden width with an affine entry map,
applies residual blocks u <- u + W2 * elu(W1 * u + b1) + b2, and reduces
to a scalar with an affine output map. A component's full prediction adds
this scalar on top of its linear-quadratic operators, and
:func:`loss_and_grads` returns exact reverse-mode derivatives of the mean
squared error with respect to every trainable parameter, operators
included.
"""

from dataclasses import dataclass, field

import numpy as np

from . import errors
from .features import QuadIndexMap, quad_monomials, quad_monomial_matrix
from .opinf import NEEDS_NETWORK, GateDecision, LinQuadOps  # noqa: F401


def elu(z):
    """Exponential linear unit (alpha = 1): z for z > 0, exp(z) - 1 else."""
    z = np.asarray(z, dtype=float)
    # Branch-free: expm1(min(z,0)) + max(z,0) equals both pieces exactly.
    return np.expm1(np.minimum(z, 0.0)) + np.maximum(z, 0.0)


def elu_prime(z):
    """Derivative of elu; continuous at 0 with value 1."""
    z = np.asarray(z, dtype=float)
    return np.exp(np.minimum(z, 0.0))


@dataclass(frozen=True)
class ResNetParams:
    """Parameters of one scalar-output residual network.

    Shapes: entry map w_in (width, n) with bias b_in (width,); per block
    inner w1 (blocks, width, width), b1 (blocks, width) and outer
    w2, b2 alike; output map w_out (1, width) with scalar bias b_out.
    """

    w_in: np.ndarray
    b_in: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: float

    def __post_init__(self):
        for name in ("w_in", "b_in", "w1", "b1", "w2", "b2", "w_out"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "b_out", float(self.b_out))
        w, n = self.w_in.shape
        b = self.w1.shape[0]
        expect = {
            "b_in": (w,),
            "w1": (b, w, w), "b1": (b, w),
            "w2": (b, w, w), "b2": (b, w),
            "w_out": (1, w),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise errors.DimensionMismatch(
                    f"{name} has shape {getattr(self, name).shape}, "
                    f"expected {shape}")
        for name in ("w_in", "b_in", "w1", "b1", "w2", "b2", "w_out"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise errors.NonFinite(f"{name} contains non-finite entries")
        if not np.isfinite(self.b_out):
            raise errors.NonFinite("b_out is not finite")

    @property
    def input_dim(self):
        return self.w_in.shape[1]

    @property
    def width(self):
        return self.w_in.shape[0]

    @property
    def num_blocks(self):
        return self.w1.shape[0]

    @property
    def num_params(self):
        return net_param_count(self.input_dim, self.width, self.num_blocks)


def net_param_count(n, width, blocks):
    return (width * n + width
            + blocks * (2 * width * width + 2 * width)
            + width + 1)


def _pack_arrays(w_in, b_in, w1, b1, w2, b2, w_out, b_out):
    parts = [np.ravel(w_in), b_in]
    for k in range(w1.shape[0]):
        parts.extend([w1[k].ravel(), b1[k], w2[k].ravel(), b2[k]])
    parts.extend([np.ravel(w_out), np.array([b_out])])
    return np.concatenate(parts)


def pack_net(net):
    """Flatten all network parameters in the canonical order."""
    return _pack_arrays(net.w_in, net.b_in, net.w1, net.b1, net.w2, net.b2,
                        net.w_out, net.b_out)


def unpack_net(flat, n, width, blocks):
    """Inverse of :func:`pack_net`."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (net_param_count(n, width, blocks),):
        raise errors.DimensionMismatch(
            f"flat vector has length {flat.shape[0]}, expected "
            f"{net_param_count(n, width, blocks)}")
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = flat[pos:pos + size].reshape(shape)
        pos += size
        return out

    w_in = take((width, n))
    b_in = take((width,))
    w1 = np.empty((blocks, width, width))
    b1 = np.empty((blocks, width))
    w2 = np.empty((blocks, width, width))
    b2 = np.empty((blocks, width))
    for k in range(blocks):
        w1[k] = take((width, width))
        b1[k] = take((width,))
        w2[k] = take((width, width))
        b2[k] = take((width,))
    w_out = take((1, width))
    b_out = float(take((1,))[0])
    return ResNetParams(w_in=w_in, b_in=b_in, w1=w1, b1=b1, w2=w2, b2=b2,
                        w_out=w_out, b_out=b_out)


def net_decay_mask(n, width, blocks):
    """Boolean mask over the packed vector: True on weight-matrix entries,
    False on every bias."""
    parts = [np.ones(width * n, dtype=bool), np.zeros(width, dtype=bool)]
    for _ in range(blocks):
        parts.extend([np.ones(width * width, dtype=bool),
                      np.zeros(width, dtype=bool),
                      np.ones(width * width, dtype=bool),
                      np.zeros(width, dtype=bool)])
    parts.extend([np.ones(width, dtype=bool), np.zeros(1, dtype=bool)])
    return np.concatenate(parts)


def init_params(n, width, blocks, seed):
    """Deterministic initialization: weights uniform in
    [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases exactly zero."""
    if width < 1:
        raise ValueError("width must be at least 1")
    if blocks < 0:
        raise ValueError("blocks must be nonnegative")
    rng = np.random.default_rng(seed)

    def draw(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return ResNetParams(
        w_in=draw((width, n), n),
        b_in=np.zeros(width),
        w1=draw((blocks, width, width), width),
        b1=np.zeros((blocks, width)),
        w2=draw((blocks, width, width), width),
        b2=np.zeros((blocks, width)),
        w_out=draw((1, width), width),
        b_out=0.0)


@dataclass
class ForwardTape:
    """Per-layer intermediates kept for the backward pass."""

    lifted: list      # u_0 .. u_B, each (M, width)
    preacts: list     # z_1 .. z_B
    activations: list  # elu(z_1) .. elu(z_B)


def _forward_rows(net, states):
    """Batched network forward pass: states (M, n) -> outputs (M,), tape."""
    u = states @ net.w_in.T + net.b_in
    lifted = [u]
    preacts = []
    activations = []
    for k in range(net.num_blocks):
        z = u @ net.w1[k].T + net.b1[k]
        s = elu(z)
        u = u + s @ net.w2[k].T + net.b2[k]
        lifted.append(u)
        preacts.append(z)
        activations.append(s)
    out = u @ net.w_out[0] + net.b_out
    if not np.all(np.isfinite(out)):
        # Localize the first offending layer only on failure; the happy
        # path pays for a single finiteness scan.
        if not np.all(np.isfinite(lifted[0])):
            raise errors.NonFinite("non-finite values after the entry map")
        for k in range(net.num_blocks):
            if not np.all(np.isfinite(lifted[k + 1])):
                raise errors.NonFinite(f"non-finite values after block {k}")
        raise errors.NonFinite("non-finite values in the output map")
    return out, ForwardTape(lifted, preacts, activations)


def resnet_forward(net, x):
    """Evaluate the network at one state; returns (scalar, tape)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise errors.DimensionMismatch(
            f"x has shape {x.shape}, expected ({net.input_dim},)")
    out, tape = _forward_rows(net, x[None, :])
    return float(out[0]), tape


def _backward_rows(net, tape, states, out_grad):
    """Gradients of sum_i out_grad_i * output_i w.r.t. the packed
    network parameters."""
    nb = net.num_blocks
    d_w_out = (out_grad @ tape.lifted[nb])[None, :]
    d_b_out = float(out_grad.sum())
    delta = np.outer(out_grad, net.w_out[0])

    d_w1 = np.empty_like(net.w1)
    d_b1 = np.empty_like(net.b1)
    d_w2 = np.empty_like(net.w2)
    d_b2 = np.empty_like(net.b2)
    for k in reversed(range(nb)):
        d_b2[k] = delta.sum(axis=0)
        d_w2[k] = delta.T @ tape.activations[k]
        inner = (delta @ net.w2[k]) * elu_prime(tape.preacts[k])
        d_b1[k] = inner.sum(axis=0)
        d_w1[k] = inner.T @ tape.lifted[k]
        delta = delta + inner @ net.w1[k]
    d_w_in = delta.T @ states
    d_b_in = delta.sum(axis=0)
    return _pack_arrays(d_w_in, d_b_in, d_w1, d_b1, d_w2, d_b2, d_w_out,
                        d_b_out)


@dataclass(frozen=True)
class ComponentModel:
    """One state component: operators, gate decision, optional network."""

    ops: LinQuadOps
    gate: GateDecision
    net: ResNetParams | None = field(default=None)

    def __post_init__(self):
        needs = self.gate.kind == NEEDS_NETWORK
        if needs != (self.net is not None):
            raise ValueError(
                "network present iff the gate decided needs_network")
        if self.net is not None and self.net.input_dim != self.ops.n:
            raise errors.DimensionMismatch(
                f"network input {self.net.input_dim} vs operators "
                f"{self.ops.n}")


@dataclass(frozen=True)
class GradientBundle:
    """Loss gradients, aligned index-for-index with the trainable set."""

    d_a_row: np.ndarray
    d_q_row: np.ndarray
    d_bias: float
    d_net: np.ndarray

    def flat(self):
        """Concatenation in the canonical order [a_row, q_row, bias, net]."""
        return np.concatenate([self.d_a_row, self.d_q_row,
                               np.array([self.d_bias]), self.d_net])


def predict_rows(model, states, quad_feats=None):
    """Full prediction (operators + optional network) for stacked rows."""
    states = np.asarray(states, dtype=float)
    if quad_feats is None:
        quad_feats = quad_monomial_matrix(
            states, QuadIndexMap.for_dim(model.ops.n))
    out = (states @ model.ops.a_row + quad_feats @ model.ops.q_row
           + model.ops.bias)
    if model.net is not None:
        out = out + _forward_rows(model.net, states)[0]
    return out


def lqres_predict(model, x):
    """Scalar prediction a.x + q.m(x) + bias (+ network output) at one
    state."""
    x = np.asarray(x, dtype=float)
    quad = quad_monomials(x, QuadIndexMap.for_dim(model.ops.n))
    out = float(x @ model.ops.a_row + quad @ model.ops.q_row
                + model.ops.bias)
    if model.net is not None:
        out += resnet_forward(model.net, x)[0]
    return out


def loss_and_grads(model, states, targets, quad_feats=None):
    """Mean squared error of the component prediction and its exact
    gradients.

    Parameters
    ----------
    model : ComponentModel
    states : (M, n) ndarray
    targets : (M,) ndarray
    quad_feats : (M, n(n+1)/2) ndarray, optional
        Precomputed quadratic monomials of `states`; computed if omitted.

    Returns
    -------
    (float, GradientBundle)
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    m = states.shape[0]
    if m == 0:
        raise errors.EmptyInput("empty batch")
    if targets.shape != (m,):
        raise errors.DimensionMismatch(
            f"targets {targets.shape} for {m} rows")
    if quad_feats is None:
        quad_feats = quad_monomial_matrix(
            states, QuadIndexMap.for_dim(model.ops.n))

    lq = (states @ model.ops.a_row + quad_feats @ model.ops.q_row
          + model.ops.bias)
    tape = None
    if model.net is not None:
        net_out, tape = _forward_rows(model.net, states)
        pred = lq + net_out
    else:
        pred = lq
    resid = pred - targets
    loss = float(np.mean(resid ** 2))
    if not np.isfinite(loss):
        raise errors.NonFinite("loss is not finite")

    out_grad = (2.0 / m) * resid
    d_a = out_grad @ states
    d_q = out_grad @ quad_feats
    d_bias = float(out_grad.sum())
    if model.net is not None:
        d_net = _backward_rows(model.net, tape, states, out_grad)
    else:
        d_net = np.zeros(0)
    return loss, GradientBundle(d_a_row=d_a, d_q_row=d_q, d_bias=d_bias,
                                d_net=d_net)
