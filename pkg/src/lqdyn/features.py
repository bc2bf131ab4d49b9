# features.py
"""Quadratic features and regression dataset assembly.

The full Kronecker square x (x) x duplicates every cross term x_i x_j,
which makes least-squares design matrices rank deficient. Regression
therefore uses the deduplicated upper-triangular monomials; the full form
is recoverable exactly with :func:`expand_q_row`.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import errors


@dataclass(frozen=True)
class QuadIndexMap:
    """Upper-triangular index set (i, j), i <= j, in lexicographic order."""

    n: int
    pairs: tuple

    @staticmethod
    @lru_cache(maxsize=None)
    def for_dim(n):
        pairs = tuple((i, j) for i in range(n) for j in range(i, n))
        return QuadIndexMap(n=n, pairs=pairs)

    @property
    def num_features(self):
        return self.n * (self.n + 1) // 2

    def index_arrays(self):
        """The pair list as two integer arrays (rows, cols)."""
        ii = np.fromiter((i for i, _ in self.pairs), dtype=int,
                         count=len(self.pairs))
        jj = np.fromiter((j for _, j in self.pairs), dtype=int,
                         count=len(self.pairs))
        return ii, jj


def kron_square(x):
    """Kronecker square of a vector: entry i*n + j equals x_i * x_j."""
    x = np.asarray(x, dtype=float)
    return np.outer(x, x).ravel()


def quad_monomials(x, index_map):
    """Deduplicated quadratic monomials x_i * x_j for i <= j."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != index_map.n:
        raise errors.DimensionMismatch(
            f"x has dimension {x.shape[-1]}, map expects {index_map.n}")
    ii, jj = index_map.index_arrays()
    return x[..., ii] * x[..., jj]


def quad_monomial_matrix(states, index_map):
    """Row-wise quadratic monomials for a (M, n) state matrix."""
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != index_map.n:
        raise errors.DimensionMismatch(
            f"states {states.shape} vs map dimension {index_map.n}")
    ii, jj = index_map.index_arrays()
    return states[:, ii] * states[:, jj]


def expand_q_row(q_dedup, index_map):
    """Expand a deduplicated quadratic row to the full Kronecker-square row.

    The returned q_full satisfies q_full . kron_square(x) ==
    q_dedup . quad_monomials(x) for every x; each off-diagonal weight is
    split equally between positions (i, j) and (j, i).
    """
    q_dedup = np.asarray(q_dedup, dtype=float)
    n = index_map.n
    if q_dedup.shape != (index_map.num_features,):
        raise errors.DimensionMismatch(
            f"q_dedup has length {q_dedup.shape}, expected "
            f"{index_map.num_features}")
    q_full = np.zeros(n * n)
    for k, (i, j) in enumerate(index_map.pairs):
        if i == j:
            q_full[i * n + i] = q_dedup[k]
        else:
            q_full[i * n + j] = 0.5 * q_dedup[k]
            q_full[j * n + i] = 0.5 * q_dedup[k]
    return q_full


@dataclass(frozen=True)
class Standardization:
    """Per-column affine standardization record for ill-scaled data.

    States and targets are both standardized; the record is carried in
    model metadata so predictions are transformed back to raw units.
    """

    state_mean: np.ndarray
    state_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray

    def transform_states(self, x):
        return (np.asarray(x, dtype=float) - self.state_mean) \
            / self.state_scale

    def transform_targets(self, y):
        return (np.asarray(y, dtype=float) - self.target_mean) \
            / self.target_scale

    def invert_targets(self, y):
        return np.asarray(y, dtype=float) * self.target_scale \
            + self.target_mean

    def to_dict(self):
        return {"state_mean": self.state_mean.tolist(),
                "state_scale": self.state_scale.tolist(),
                "target_mean": self.target_mean.tolist(),
                "target_scale": self.target_scale.tolist()}

    @staticmethod
    def from_dict(d):
        return Standardization(
            state_mean=np.asarray(d["state_mean"], dtype=float),
            state_scale=np.asarray(d["state_scale"], dtype=float),
            target_mean=np.asarray(d["target_mean"], dtype=float),
            target_scale=np.asarray(d["target_scale"], dtype=float))


def _safe_std(arr):
    std = arr.std(axis=0)
    return np.where(std > 0, std, 1.0)


@dataclass(frozen=True)
class RegressionDataset:
    """Pooled (state, quadratic features, derivative targets) samples.

    Rows are shuffled with `seed`; the first 80% (floor) carry the
    'train' tag and the rest 'val'. If a scaler is present, `states` and
    `quad_feats` are already in standardized coordinates.
    """

    states: np.ndarray
    quad_feats: np.ndarray
    targets: np.ndarray
    split_assignment: np.ndarray
    seed: int
    scaler: Standardization | None = field(default=None)

    def __post_init__(self):
        m = self.states.shape[0]
        if not (self.quad_feats.shape[0] == m == self.targets.shape[0]
                == self.split_assignment.shape[0]):
            raise errors.DimensionMismatch("inconsistent dataset row counts")

    @property
    def num_rows(self):
        return self.states.shape[0]

    @property
    def n(self):
        return self.states.shape[1]

    @property
    def train_mask(self):
        return self.split_assignment == "train"

    @property
    def val_mask(self):
        return self.split_assignment == "val"

    @property
    def index_map(self):
        return QuadIndexMap.for_dim(self.n)


def build_dataset(samples, split_seed, standardize=False):
    """Pool derivative samples into one shuffled, split regression dataset.

    Parameters
    ----------
    samples : sequence of DerivativeSamples
        Blocks from one or more trajectories; all must share the state
        dimension.
    split_seed : int
        Seed for the row shuffle; the split is deterministic per seed.
    standardize : bool
        If True, states and targets are standardized per column before
        feature construction and the record is kept on the dataset for
        the model to invert at prediction time.

    Returns
    -------
    RegressionDataset
    """
    samples = list(samples)
    if not samples:
        raise errors.EmptyInput("no derivative samples given")
    n = samples[0].states.shape[1]
    for s in samples:
        if s.states.shape[1] != n:
            raise errors.DimensionMismatch(
                "sample blocks disagree on state dimension")
    states = np.vstack([s.states for s in samples])
    targets = np.vstack([s.derivs for s in samples])

    scaler = None
    if standardize:
        scaler = Standardization(state_mean=states.mean(axis=0),
                                 state_scale=_safe_std(states),
                                 target_mean=targets.mean(axis=0),
                                 target_scale=_safe_std(targets))
        states = scaler.transform_states(states)
        targets = scaler.transform_targets(targets)

    index_map = QuadIndexMap.for_dim(n)
    quad = quad_monomial_matrix(states, index_map)

    m = states.shape[0]
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(m)
    states, quad, targets = states[perm], quad[perm], targets[perm]

    n_train = int(np.floor(0.8 * m))
    tags = np.array(["train"] * n_train + ["val"] * (m - n_train))
    return RegressionDataset(states=states, quad_feats=quad, targets=targets,
                             split_assignment=tags, seed=int(split_seed),
                             scaler=scaler)
