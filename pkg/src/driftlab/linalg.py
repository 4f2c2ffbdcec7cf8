"""Dense float64 vector/matrix primitives used by every other module.

All functions are pure and deterministic. Randomness always enters through
an explicit seed, fed to ``numpy.random.default_rng`` (PCG64, a 64-bit
counter-based generator with stable streams across platforms). Seeds may be
single integers or sequences of integers; sequences are how child seeds are
derived from one root seed.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .errors import DegenerateRowError, DimensionMismatchError

SeedLike = Union[int, Sequence[int]]

#: Row norms at or below this are treated as degenerate (no direction).
DEGENERATE_NORM = 1e-12


def rng_from(seed: SeedLike) -> np.random.Generator:
    """Deterministic generator for a root seed or a (root, *path) sequence."""
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    return np.random.default_rng([int(s) for s in seed])


def as_matrix(data) -> np.ndarray:
    """Coerce to a 2-D float64 array."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D array, got ndim={m.ndim}")
    return m


def l2_normalize_rows(m) -> np.ndarray:
    """Scale each row to unit L2 norm.

    Raises DegenerateRowError if any row norm is <= 1e-12.
    """
    m = as_matrix(m)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms <= DEGENERATE_NORM):
        bad = int(np.argmax(norms <= DEGENERATE_NORM))
        raise DegenerateRowError(f"row {bad} has norm {norms[bad]:.3e}")
    return m / norms[:, None]


def cosine_matrix(v, l) -> np.ndarray:
    """All-pairs dot products between rows of ``v`` and rows of ``l``.

    For unit rows these are cosine similarities. Output is (n_v, n_l).
    """
    v = as_matrix(v)
    l = as_matrix(l)
    if v.shape[1] != l.shape[1]:
        raise DimensionMismatchError(
            f"embedding widths differ: {v.shape[1]} vs {l.shape[1]}"
        )
    return v @ l.T


def angle_deg(cosine):
    """arccos in degrees, clamping the argument into [-1, 1] first.

    Accepts scalars or arrays; returns values in [0, 180].
    """
    return np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))


def rowwise_cosine(a, b) -> np.ndarray:
    """Dot product of corresponding rows (row i of a with row i of b)."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return np.einsum("ij,ij->i", a, b)


def diagonal_is_argmax(m) -> np.ndarray:
    """Per row: does the diagonal entry attain the row maximum?

    Ties resolve in favor of the diagonal (an exactly tied entry does not
    demote the diagonal). Returns a boolean vector of length n.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"matrix is not square: {m.shape}")
    return np.diagonal(m) >= m.max(axis=1)


def random_rotation(d: int, seed: SeedLike) -> np.ndarray:
    """Seeded random d x d orthogonal matrix with determinant +1.

    Built by QR-orthogonalizing a Gaussian matrix; column signs are fixed by
    the sign of R's diagonal, and one column is negated if the determinant
    comes out -1.
    """
    if d < 1:
        raise DimensionMismatchError(f"d must be >= 1, got {d}")
    if d == 1:
        return np.array([[1.0]])
    g = rng_from(seed).standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return q


def plane_rotation(d: int, theta_deg: float, axes: tuple = (0, 1)) -> np.ndarray:
    """Rotation by ``theta_deg`` in the coordinate plane spanned by ``axes``.

    Identity on every other coordinate; useful for constructing embeddings
    whose rotation angle is known exactly.
    """
    i, j = axes
    if not (0 <= i < d and 0 <= j < d and i != j):
        raise DimensionMismatchError(f"axes {axes} invalid for d={d}")
    t = np.radians(theta_deg)
    r = np.eye(d)
    r[i, i] = np.cos(t)
    r[j, j] = np.cos(t)
    r[i, j] = -np.sin(t)
    r[j, i] = np.sin(t)
    return r


def negate_identity(d: int) -> np.ndarray:
    """-I of size d x d (the rotation used by the retrieval-flip argument)."""
    if d < 1:
        raise DimensionMismatchError(f"d must be >= 1, got {d}")
    return -np.eye(d)
