# reduce.py
"""Proper orthogonal decomposition of snapshot matrices.

Builds an orthonormal basis from the leading left singular vectors of an
(n x M) snapshot matrix, either at a requested rank or at the smallest
rank capturing a requested fraction of the squared singular-value energy.
States project to the reduced coordinates with V^T and lift back with V.
"""

from dataclasses import dataclass

import numpy as np

from . import errors

_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class PODBasis:
    """Orthonormal basis with the full singular-value spectrum."""

    v_matrix: np.ndarray
    singular_values: np.ndarray
    rank: int
    energy_captured: float

    def __post_init__(self):
        v = np.asarray(self.v_matrix, dtype=float)
        s = np.asarray(self.singular_values, dtype=float)
        object.__setattr__(self, "v_matrix", v)
        object.__setattr__(self, "singular_values", s)
        if v.ndim != 2 or v.shape[1] != self.rank:
            raise errors.DimensionMismatch(
                f"basis shape {v.shape} inconsistent with rank {self.rank}")
        gram = v.T @ v
        if np.max(np.abs(gram - np.eye(self.rank))) > _ORTHO_TOL:
            raise ValueError("basis columns are not orthonormal")
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValueError("singular values must be descending and >= 0")

    @property
    def n(self):
        return self.v_matrix.shape[0]


def pod_basis(snapshots, rank=None, energy=None):
    """Basis of leading left singular vectors of a snapshot matrix.

    Parameters
    ----------
    snapshots : (n, M) ndarray
        One state snapshot per column.
    rank : int, optional
        Number of basis vectors to keep.
    energy : float in (0, 1], optional
        Keep the smallest rank whose squared singular values capture at
        least this fraction of the total. Exactly one of `rank` and
        `energy` may be given; the default is energy = 0.9999.

    Returns
    -------
    PODBasis

    Raises
    ------
    RankTooLarge
        If `rank` exceeds min(n, M).
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 2 or snapshots.shape[1] < 1:
        raise errors.DimensionMismatch("snapshots must be a 2-D n x M matrix")
    if rank is not None and energy is not None:
        raise ValueError("give either rank or energy, not both")
    if rank is None and energy is None:
        energy = 0.9999

    u, s, _ = np.linalg.svd(snapshots, full_matrices=False)
    total = float(np.sum(s ** 2))
    if rank is not None:
        if rank < 1:
            raise ValueError("rank must be at least 1")
        if rank > min(snapshots.shape):
            raise errors.RankTooLarge(
                f"rank {rank} exceeds min(n, M) = {min(snapshots.shape)}")
        r = int(rank)
    else:
        if not 0 < energy <= 1:
            raise ValueError("energy must lie in (0, 1]")
        if total == 0.0:
            r = 1
        else:
            cum = np.cumsum(s ** 2) / total
            r = int(np.searchsorted(cum, energy - 1e-14) + 1)
            r = min(r, s.shape[0])

    v = u[:, :r].copy()
    # Fix the sign convention: largest-magnitude entry of each column > 0.
    for j in range(r):
        lead = np.argmax(np.abs(v[:, j]))
        if v[lead, j] < 0:
            v[:, j] = -v[:, j]
    captured = 1.0 if total == 0.0 else float(np.sum(s[:r] ** 2) / total)
    return PODBasis(v_matrix=v, singular_values=s, rank=r,
                    energy_captured=captured)


def project(basis, x):
    """Reduced coordinates V^T x; accepts a vector or an (n, k) matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != basis.n:
        raise errors.DimensionMismatch(
            f"x has leading dimension {x.shape[0]}, basis expects {basis.n}")
    return basis.v_matrix.T @ x


def lift(basis, x_hat):
    """Full-space reconstruction V x_hat."""
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.shape[0] != basis.rank:
        raise errors.DimensionMismatch(
            f"x_hat has leading dimension {x_hat.shape[0]}, basis rank is "
            f"{basis.rank}")
    return basis.v_matrix @ x_hat
