# opinf.py
"""Per-component linear-quadratic operator fitting and the analytic gate.

Each state component i gets its own regression: the derivative target is
explained by a linear row, a deduplicated quadratic row, and an optional
bias. The relative residual of that fit decides whether the component is
kept analytic or handed to a residual-network trainer.
"""

from dataclasses import dataclass, field

import numpy as np

from . import errors

# Singular values below this fraction of the largest are treated as zero.
SVD_CUTOFF = 1e-10

#: Gate decision labels.
ANALYTIC = "analytic"
NEEDS_NETWORK = "needs_network"

_RMS_FLOOR = 1e-15


@dataclass(frozen=True)
class LinQuadOps:
    """Fitted linear row, deduplicated quadratic row, and bias for one
    state component."""

    a_row: np.ndarray
    q_row: np.ndarray
    bias: float
    component_index: int

    def __post_init__(self):
        a = np.asarray(self.a_row, dtype=float)
        q = np.asarray(self.q_row, dtype=float)
        object.__setattr__(self, "a_row", a)
        object.__setattr__(self, "q_row", q)
        object.__setattr__(self, "bias", float(self.bias))
        n = a.shape[0]
        if q.shape != (n * (n + 1) // 2,):
            raise errors.DimensionMismatch(
                f"q_row has length {q.shape[0]}, expected {n * (n + 1) // 2}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))
                and np.isfinite(self.bias)):
            raise errors.NonFinite("operator entries must be finite")
        if self.component_index < 0 or self.component_index >= n:
            raise ValueError("component_index out of range")

    @property
    def n(self):
        return self.a_row.shape[0]


@dataclass(frozen=True)
class ResidualReport:
    """Residual of a linear-quadratic fit over all dataset rows."""

    rel_rms: float
    max_abs: float
    per_sample: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.rel_rms < 0:
            raise ValueError("rel_rms must be nonnegative")


@dataclass(frozen=True)
class GateDecision:
    """Analytic-vs-network decision for one component."""

    kind: str
    threshold_used: float
    rel_rms: float

    def __post_init__(self):
        if self.kind not in (ANALYTIC, NEEDS_NETWORK):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.kind == ANALYTIC) != (self.rel_rms <= self.threshold_used):
            raise ValueError("gate kind inconsistent with rel_rms/threshold")


def lq_predict_rows(ops, states, quad_feats):
    """Linear-quadratic prediction for stacked rows."""
    return states @ ops.a_row + quad_feats @ ops.q_row + ops.bias


def fit_linquad(ds, component, include_bias=True):
    """Least-squares fit of one component's linear-quadratic operators.

    Minimizes the squared residual of target ~ a.x + q.m(x) + b over the
    training rows with a rank-revealing SVD solve: singular values below
    ``SVD_CUTOFF`` times the largest are treated as zero and the
    minimum-norm solution is returned.

    Parameters
    ----------
    ds : RegressionDataset
    component : int
        Index of the derivative component to fit.
    include_bias : bool
        Include the constant term (default True).

    Returns
    -------
    LinQuadOps

    Raises
    ------
    Underdetermined
        If there are fewer training rows than regression columns.
    NonFinite
        If the training block contains non-finite values.
    """
    n = ds.n
    nq = ds.index_map.num_features
    mask = ds.train_mask
    states = ds.states[mask]
    quad = ds.quad_feats[mask]
    y = ds.targets[mask, component]

    ncols = n + nq + (1 if include_bias else 0)
    if states.shape[0] < ncols:
        raise errors.Underdetermined(
            f"{states.shape[0]} training rows for {ncols} unknowns")
    blocks = [states, quad]
    if include_bias:
        blocks.append(np.ones((states.shape[0], 1)))
    design = np.hstack(blocks)
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(y))):
        raise errors.NonFinite("regression data contains non-finite values")

    sol, _, _, _ = np.linalg.lstsq(design, y, rcond=SVD_CUTOFF)
    bias = float(sol[-1]) if include_bias else 0.0
    return LinQuadOps(a_row=sol[:n], q_row=sol[n:n + nq], bias=bias,
                      component_index=int(component))


def residual_stats(ds, ops, return_per_sample=False):
    """Residual of a linear-quadratic fit, evaluated over ALL rows.

    The diagnostic judges representability of the data, not
    generalization, so train and validation rows both contribute.
    rel_rms is the 2-norm of the residual over the 2-norm of the targets
    (denominator floored at 1e-15).
    """
    if ds.states.shape[1] != ops.n:
        raise errors.DimensionMismatch(
            f"dataset dimension {ds.states.shape[1]} vs operators {ops.n}")
    y = ds.targets[:, ops.component_index]
    r = y - lq_predict_rows(ops, ds.states, ds.quad_feats)
    rel = float(np.linalg.norm(r) / max(np.linalg.norm(y), _RMS_FLOOR))
    return ResidualReport(
        rel_rms=rel,
        max_abs=float(np.max(np.abs(r))),
        per_sample=r if return_per_sample else None)


def gate_component(report, threshold):
    """Decide analytic vs needs-network from a residual report."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    kind = ANALYTIC if report.rel_rms <= threshold else NEEDS_NETWORK
    return GateDecision(kind=kind, threshold_used=float(threshold),
                        rel_rms=report.rel_rms)


def gate_report_entry(component, decision):
    """One gate-report JSON object: {component, rel_rms, threshold,
    decision}."""
    return {
        "component": int(component),
        "rel_rms": decision.rel_rms,
        "threshold": decision.threshold_used,
        "decision": decision.kind,
    }
