# model.py
"""Assembled multi-component models: simulation, metrics, serialization.

An LQModel stacks one ComponentModel per state index and is either
continuous (its components predict time derivatives, simulated with the
same fixed-step RK4 used for data generation) or discrete (its components
predict the next state directly).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import dynsys, errors, neural
from .features import QuadIndexMap, Standardization, quad_monomials
from .opinf import ANALYTIC, GateDecision, LinQuadOps
from .reduce import PODBasis

SCHEMA_VERSION = 1
CONTINUOUS = "continuous"
DISCRETE = "discrete"

_RMS_FLOOR = 1e-15


@dataclass(frozen=True)
class LQModel:
    """Named collection of per-component models plus metadata.

    metadata keys in use: ``variable_names`` (list of str),
    ``standardization`` (Standardization or None), ``pod_basis`` (PODBasis or
    None), ``provenance`` (JSON-compatible dict: seeds, hyperparameters,
    gate reports).
    """

    n: int
    components: tuple
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DISCRETE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if len(self.components) != self.n:
            raise errors.DimensionMismatch(
                f"{len(self.components)} components for n = {self.n}")
        object.__setattr__(self, "components", tuple(self.components))
        for i, comp in enumerate(self.components):
            if comp.ops.n != self.n:
                raise errors.DimensionMismatch(
                    f"component {i} has dimension {comp.ops.n}, "
                    f"expected {self.n}")

    @property
    def variable_names(self):
        names = self.metadata.get("variable_names")
        if names is None:
            names = [f"x{i + 1}" for i in range(self.n)]
        return list(names)

    @property
    def scaler(self):
        return self.metadata.get("standardization")


def _component_values(model, x):
    """Stacked per-component predictions at one state, in raw units."""
    x = np.asarray(x, dtype=float)
    if model.scaler is not None:
        x = model.scaler.transform_states(x)
    quad = quad_monomials(x, QuadIndexMap.for_dim(model.n))
    out = np.empty(model.n)
    for i, comp in enumerate(model.components):
        val = float(x @ comp.ops.a_row + quad @ comp.ops.q_row
                    + comp.ops.bias)
        if comp.net is not None:
            val += neural.resnet_forward(comp.net, x)[0]
        out[i] = val
    if model.scaler is not None:
        out = model.scaler.invert_targets(out)
    return out


def model_rhs(model, x):
    """Learned vector field of a continuous model at one state."""
    if model.kind != CONTINUOUS:
        raise ValueError("model_rhs requires a continuous model")
    return _component_values(model, x)


def simulate_model(model, x0, t_span, num_points):
    """Integrate a continuous learned model with fixed-step RK4.

    Uses the exact integrator contract of :func:`dynsys.integrate`, so
    comparisons against ground truth isolate model error rather than
    integrator mismatch. A blow-up raises NonFiniteState carrying the
    step index and the finite partial trajectory.
    """
    if model.kind != CONTINUOUS:
        raise ValueError("simulate_model requires a continuous model")
    return dynsys.integrate(lambda x: _component_values(model, x),
                            x0, t_span, num_points)


def step_discrete(model, x_k):
    """One application of a discrete model: x_{k+1} from x_k."""
    if model.kind != DISCRETE:
        raise ValueError("step_discrete requires a discrete model")
    return _component_values(model, x_k)


def simulate_discrete(model, x0, steps):
    """Iterate a discrete model; times index the step count 0..steps."""
    if model.kind != DISCRETE:
        raise ValueError("simulate_discrete requires a discrete model")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.empty((steps + 1, x0.shape[0]))
    states[0] = x0
    times = np.arange(steps + 1, dtype=float)
    for k in range(steps):
        nxt = step_discrete(model, states[k])
        if not np.all(np.isfinite(nxt)):
            raise errors.NonFiniteState(
                f"state became non-finite at step {k + 1}",
                step_index=k + 1,
                partial_times=times[:k + 1].copy(),
                partial_states=states[:k + 1].copy())
        states[k + 1] = nxt
    return dynsys.Trajectory(times=times, states=states)


@dataclass(frozen=True)
class Metrics:
    """Per-component relative L2 error and worst pointwise error."""

    rel_l2: np.ndarray
    max_abs: float
    horizon: float


def evaluate(reference, predicted):
    """Compare two trajectories on an identical time grid.

    Per component i the error is ||ref_i - pred_i||_2 / ||ref_i||_2 over
    the grid (denominator floored at 1e-15), plus the maximum pointwise
    absolute error over all components.
    """
    if (reference.times.shape != predicted.times.shape
            or not np.array_equal(reference.times, predicted.times)):
        raise errors.GridMismatch("trajectories use different time grids")
    if reference.states.shape != predicted.states.shape:
        raise errors.DimensionMismatch(
            f"states {reference.states.shape} vs {predicted.states.shape}")
    diff = reference.states - predicted.states
    denom = np.maximum(np.linalg.norm(reference.states, axis=0), _RMS_FLOOR)
    rel = np.linalg.norm(diff, axis=0) / denom
    return Metrics(rel_l2=rel, max_abs=float(np.max(np.abs(diff))),
                   horizon=float(reference.times[-1] - reference.times[0]))


# Serialization ===============================================================

def _gate_to_dict(gate):
    return {"kind": gate.kind, "threshold_used": gate.threshold_used,
            "rel_rms": gate.rel_rms}


def _net_to_dict(net):
    return {
        "input_dim": net.input_dim,
        "width": net.width,
        "blocks": net.num_blocks,
        "w_in": net.w_in.tolist(),
        "b_in": net.b_in.tolist(),
        "w1": net.w1.tolist(),
        "b1": net.b1.tolist(),
        "w2": net.w2.tolist(),
        "b2": net.b2.tolist(),
        "w_out": net.w_out.tolist(),
        "b_out": net.b_out,
    }


def _net_from_dict(d):
    blocks = int(d["blocks"])
    width = int(d["width"])
    n = int(d["input_dim"])
    shape3 = (blocks, width, width)
    shape2 = (blocks, width)
    return neural.ResNetParams(
        w_in=np.asarray(d["w_in"], dtype=float).reshape((width, n)),
        b_in=np.asarray(d["b_in"], dtype=float).reshape((width,)),
        w1=np.asarray(d["w1"], dtype=float).reshape(shape3),
        b1=np.asarray(d["b1"], dtype=float).reshape(shape2),
        w2=np.asarray(d["w2"], dtype=float).reshape(shape3),
        b2=np.asarray(d["b2"], dtype=float).reshape(shape2),
        w_out=np.asarray(d["w_out"], dtype=float).reshape((1, width)),
        b_out=float(d["b_out"]))


def model_to_dict(model):
    """JSON-compatible dict in the documented schema."""
    comps = []
    for comp in model.components:
        entry = {
            "gate": _gate_to_dict(comp.gate),
            "a_row": comp.ops.a_row.tolist(),
            "q_row": comp.ops.q_row.tolist(),
            "bias": comp.ops.bias,
        }
        if comp.net is not None:
            entry["net"] = _net_to_dict(comp.net)
        comps.append(entry)
    doc = {
        "version": SCHEMA_VERSION,
        "kind": model.kind,
        "n": model.n,
        "variable_names": model.variable_names,
        "components": comps,
        "provenance": model.metadata.get("provenance", {}),
    }
    basis = model.metadata.get("pod_basis")
    if basis is not None:
        doc["pod_basis"] = {
            "v_matrix": basis.v_matrix.tolist(),
            "singular_values": basis.singular_values.tolist(),
            "rank": basis.rank,
            "energy_captured": basis.energy_captured,
        }
    if model.scaler is not None:
        doc["standardization"] = model.scaler.to_dict()
    return doc


def save_model(model, path):
    """Write the model as JSON; numbers round-trip exactly."""
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, sort_keys=True, indent=1)
        f.write("\n")


def _require(doc, key, where):
    if key not in doc:
        raise errors.MalformedFile(f"missing key {key!r} in {where}")
    return doc[key]


def model_from_dict(doc):
    version = _require(doc, "version", "model file")
    if version != SCHEMA_VERSION:
        raise errors.VersionMismatch(
            f"schema version {version}, supported: {SCHEMA_VERSION}")
    kind = _require(doc, "kind", "model file")
    if kind not in (CONTINUOUS, DISCRETE):
        raise errors.MalformedFile(f"kind must be continuous or discrete, "
                                   f"got {kind!r}")
    n = int(_require(doc, "n", "model file"))
    comp_docs = _require(doc, "components", "model file")
    if len(comp_docs) != n:
        raise errors.MalformedFile(
            f"{len(comp_docs)} components listed for n = {n}")

    components = []
    for i, cd in enumerate(comp_docs):
        where = f"components[{i}]"
        gate_doc = _require(cd, "gate", where)
        try:
            gate = GateDecision(
                kind=_require(gate_doc, "kind", where + ".gate"),
                threshold_used=float(gate_doc["threshold_used"]),
                rel_rms=float(gate_doc["rel_rms"]))
            ops = LinQuadOps(
                a_row=np.asarray(_require(cd, "a_row", where), dtype=float),
                q_row=np.asarray(_require(cd, "q_row", where), dtype=float),
                bias=float(_require(cd, "bias", where)),
                component_index=i)
            net = _net_from_dict(cd["net"]) if "net" in cd else None
            components.append(neural.ComponentModel(ops=ops, gate=gate,
                                                    net=net))
        except (KeyError, ValueError, errors.DimensionMismatch) as exc:
            raise errors.MalformedFile(f"bad component in {where}: {exc}")

    metadata = {
        "variable_names": list(_require(doc, "variable_names",
                                        "model file")),
        "provenance": doc.get("provenance", {}),
    }
    if "pod_basis" in doc:
        bd = doc["pod_basis"]
        metadata["pod_basis"] = PODBasis(
            v_matrix=np.asarray(bd["v_matrix"], dtype=float),
            singular_values=np.asarray(bd["singular_values"], dtype=float),
            rank=int(bd["rank"]),
            energy_captured=float(bd["energy_captured"]))
    if "standardization" in doc:
        metadata["standardization"] = Standardization.from_dict(
            doc["standardization"])
    return LQModel(n=n, components=tuple(components), kind=kind,
                   metadata=metadata)


def load_model(path):
    """Load a model written by :func:`save_model`.

    Raises
    ------
    MalformedFile
        On schema violations, with the offending location.
    VersionMismatch
        If the file was written with a different schema version.
    """
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise errors.MalformedFile(f"not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise errors.MalformedFile("top level must be a JSON object")
    return model_from_dict(doc)


def assemble_analytic(ops_list, gates, kind=CONTINUOUS, metadata=None):
    """Convenience constructor for a model whose components are all
    analytic."""
    comps = []
    for ops, gate in zip(ops_list, gates):
        if gate.kind != ANALYTIC:
            raise ValueError("assemble_analytic requires analytic gates")
        comps.append(neural.ComponentModel(ops=ops, gate=gate, net=None))
    n = comps[0].ops.n
    return LQModel(n=n, components=tuple(comps), kind=kind,
                   metadata=metadata or {})
