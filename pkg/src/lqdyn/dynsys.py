# dynsys.py
"""Benchmark systems, fixed-step integration, and derivative estimation.

Ground truth for the two study systems (a two-variable neuron spiking
model and a seven-species yeast glycolysis oscillator), a classical
fourth-order Runge-Kutta integrator on uniform grids, uniform sampling of
initial conditions, and five-point-stencil estimation of time derivatives
from sampled trajectories.
"""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import errors

_SPACING_RTOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """One rollout: a uniform time grid plus the state at each sample.

    Parameters
    ----------
    times : (N,) ndarray
        Sample times, strictly increasing with constant spacing.
    states : (N, n) ndarray
        State at each sample time, one row per time.
    """

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or states.ndim != 2:
            raise errors.DimensionMismatch("times must be 1-D, states 2-D")
        if states.shape[0] != times.shape[0]:
            raise errors.DimensionMismatch(
                f"{states.shape[0]} state rows for {times.shape[0]} times")
        if times.shape[0] < 2:
            raise errors.TooFewPoints("a trajectory needs at least 2 samples")
        diffs = np.diff(times)
        if np.any(diffs <= 0):
            raise errors.NonUniformGrid("times must be strictly increasing")
        h = diffs[0]
        if np.max(np.abs(diffs - h)) > _SPACING_RTOL * max(abs(h), 1.0):
            raise errors.NonUniformGrid("time spacing is not constant")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(states))):
            raise errors.NonFinite("trajectory contains non-finite entries")

    @property
    def num_points(self):
        return self.times.shape[0]

    @property
    def n(self):
        """State dimension."""
        return self.states.shape[1]

    @property
    def spacing(self):
        return (self.times[-1] - self.times[0]) / (self.num_points - 1)


@dataclass(frozen=True)
class DerivativeSamples:
    """Paired state and time-derivative samples from one trajectory.

    Parameters
    ----------
    states : (M, n) ndarray
    derivs : (M, n) ndarray
        Estimated (or exact) time derivative at each state row.
    spacing : float
        Time spacing of the source trajectory.
    """

    states: np.ndarray
    derivs: np.ndarray
    spacing: float

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        derivs = np.asarray(self.derivs, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if derivs.ndim == 1:
            derivs = derivs[:, None]
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivs", derivs)
        if states.shape != derivs.shape:
            raise errors.DimensionMismatch(
                f"states {states.shape} vs derivs {derivs.shape}")


@dataclass(frozen=True)
class FhnParams:
    """Parameters of the two-variable neuron spiking benchmark."""

    a: float = 0.7
    b: float = 0.8
    tau: float = 12.5
    i_ext: float = 0.5

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class GlyParams:
    """Parameters of the seven-species glycolysis oscillator.

    Values are configuration, shipped in ``configs/glycolysis.json``;
    use :func:`default_glycolysis_params` to load them.
    """

    j0: float
    k1: float
    K1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float
    kappa: float
    q: float
    N_tot: float
    A_tot: float
    psi: float

    def __post_init__(self):
        for name in ("j0", "k1", "K1", "k2", "k3", "k4", "k5", "k6",
                     "kappa", "q", "N_tot", "A_tot", "psi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.q < 1:
            raise ValueError("q must be at least 1")


def load_packaged_config(name):
    """Read one of the shipped demo configuration files by stem name."""
    path = resources.files("lqdyn").joinpath(f"configs/{name}.json")
    with path.open("r") as f:
        return json.load(f)


def default_glycolysis_params():
    """Literature parameter values, loaded from the shipped config file."""
    return GlyParams(**load_packaged_config("glycolysis")["params"])


def rhs_fhn(state, params=None):
    """Right-hand side of the neuron spiking benchmark.

    dv = v - v^3/3 - w + i_ext,  dw = (v + a - b*w) / tau.

    Broadcasts over leading axes, so `state` may be a single (v, w) pair
    or a batch of shape (..., 2).
    """
    if params is None:
        params = FhnParams()
    state = np.asarray(state, dtype=float)
    v = state[..., 0]
    w = state[..., 1]
    dv = v - v**3 / 3.0 - w + params.i_ext
    dw = (v + params.a - params.b * w) / params.tau
    return np.stack([dv, dw], axis=-1)


def rhs_glycolysis(state, params=None):
    """Right-hand side of the glycolysis oscillator, shape (..., 7).

    The shared saturating flux is J = k1*S1*S6 / (1 + (S6/K1)^q).

    Raises
    ------
    NonFiniteOutput
        If the saturation exponentiation overflows.
    """
    if params is None:
        params = default_glycolysis_params()
    p = params
    state = np.asarray(state, dtype=float)
    s1, s2, s3, s4, s5, s6, s7 = (state[..., i] for i in range(7))
    with np.errstate(over="ignore", invalid="ignore"):
        flux = p.k1 * s1 * s6 / (1.0 + (s6 / p.K1) ** p.q)
        nadh = p.k2 * s2 * (p.N_tot - s5)
        atp = p.k3 * s3 * (p.A_tot - s6)
        out = np.stack([
            p.j0 - flux,
            2.0 * flux - nadh - p.k6 * s2 * s5,
            nadh - atp,
            atp - p.k4 * s4 * s5 - p.kappa * (s4 - s7),
            nadh - p.k4 * s4 * s5 - p.k6 * s2 * s5,
            -2.0 * flux + 2.0 * atp - p.k5 * s6,
            p.psi * p.kappa * (s4 - s7) - p.kappa * s7,
        ], axis=-1)
    if not np.all(np.isfinite(out)):
        raise errors.NonFiniteOutput(
            "glycolysis right-hand side overflowed; check state scale")
    return out


def integrate(rhs, x0, t_span, num_points):
    """Integrate dx/dt = rhs(x) with classical fixed-step RK4.

    Parameters
    ----------
    rhs : callable
        Vector field, maps an n-vector to an n-vector.
    x0 : (n,) array_like
        Initial state.
    t_span : (float, float)
        Integration interval (t0, t1) with t1 > t0.
    num_points : int
        Number of grid points including both endpoints; the step is
        h = (t1 - t0) / (num_points - 1).

    Returns
    -------
    Trajectory

    Raises
    ------
    NonFiniteState
        If a step produces NaN or infinity; carries the step index and
        the finite partial trajectory.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if num_points < 2:
        raise ValueError("num_points must be at least 2")
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    times = np.linspace(t0, t1, num_points)
    h = (t1 - t0) / (num_points - 1)
    states = np.empty((num_points, x0.shape[0]))
    states[0] = x0
    for k in range(num_points - 1):
        x = states[k]
        k1 = np.asarray(rhs(x), dtype=float)
        k2 = np.asarray(rhs(x + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(rhs(x + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(rhs(x + h * k3), dtype=float)
        nxt = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(nxt)):
            raise errors.NonFiniteState(
                f"state became non-finite at step {k + 1}",
                step_index=k + 1,
                partial_times=times[:k + 1].copy(),
                partial_states=states[:k + 1].copy())
        states[k + 1] = nxt
    return Trajectory(times=times, states=states)


def stencil_derivatives(traj):
    """Fourth-order five-point-stencil derivative estimates.

    For each interior index i in [2, N-3],

        deriv_i = (-x_{i+2} + 8 x_{i+1} - 8 x_{i-1} + x_{i-2}) / (12 h),

    dropping the first two and last two samples.

    Raises
    ------
    TooFewPoints
        If the trajectory has fewer than 5 samples.
    NonUniformGrid
        If the spacing varies beyond 1e-12 relative.
    """
    times = traj.times
    if times.shape[0] < 5:
        raise errors.TooFewPoints("five-point stencil needs >= 5 samples")
    diffs = np.diff(times)
    h = traj.spacing
    if np.max(np.abs(diffs - h)) > _SPACING_RTOL * max(abs(h), 1.0):
        raise errors.NonUniformGrid("five-point stencil needs a uniform grid")
    x = traj.states
    derivs = (-x[4:] + 8.0 * x[3:-1] - 8.0 * x[1:-3] + x[:-4]) / (12.0 * h)
    return DerivativeSamples(states=x[2:-2].copy(), derivs=derivs, spacing=h)


def sample_initial_conditions(ranges, count, seed):
    """Draw `count` initial conditions uniformly from a coordinate box.

    Parameters
    ----------
    ranges : sequence of (lo, hi) pairs
        Closed sampling interval per coordinate.
    count : int
        Number of samples, at least 1.
    seed : int
        Seed for the generator; output is deterministic per seed.

    Returns
    -------
    (count, n) ndarray
    """
    ranges = np.asarray(ranges, dtype=float)
    if ranges.ndim != 2 or ranges.shape[1] != 2:
        raise errors.DimensionMismatch("ranges must be pairs (lo, hi)")
    if count < 1:
        raise ValueError("count must be at least 1")
    lo, hi = ranges[:, 0], ranges[:, 1]
    if np.any(lo > hi):
        bad = int(np.argmax(lo > hi))
        raise errors.EmptyRange(f"range {bad} has lo > hi")
    rng = np.random.default_rng(seed)
    u = rng.random((count, ranges.shape[0]))
    return lo + u * (hi - lo)
