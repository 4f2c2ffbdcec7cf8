"""Spatial-disorder diagnostics and retrieval evaluation.

Three angle statistics over unit embeddings:

- self-angle matrix: pairwise angles within one modality at one snapshot;
  differences across snapshots measure topology drift,
- rotation angles: per-sample angle between the same sample's embeddings
  from two snapshots; measures global rotation of the space,
- inter-modal angle variation: per-sample change of the angle between a
  sample's own vision and language embeddings, restricted to samples the
  older snapshot retrieved correctly.

Histograms use the standard bin presets below; retrieval quality is
reported as recall@K in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .datastream import PhaseDataset
from .encoder import DualEncoderSnapshot, encode
from .errors import (
    ConstructionFailureError,
    DimensionMismatchError,
    EmptyCorrectSetError,
)
from .linalg import (
    SeedLike,
    angle_deg,
    as_matrix,
    cosine_matrix,
    diagonal_is_argmax,
    l2_normalize_rows,
    negate_identity,
    rng_from,
    rowwise_cosine,
)

#: Degree-bin presets: first bin closed on both ends, the rest half-open (lo, hi].
SAM_BINS: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 180.0)
RAM_BINS: Tuple[float, ...] = (0.0, 15.0, 20.0, 25.0, 30.0, 180.0)
IMAV_BINS: Tuple[float, ...] = SAM_BINS

DEFAULT_KS: Tuple[int, ...] = (1, 5, 10)


@dataclass(frozen=True)
class AngleHistogram:
    """Counts of angle values over degree bins."""

    bin_edges_deg: Tuple[float, ...]
    counts: Tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def fractions(self) -> Tuple[float, ...]:
        t = self.total
        if t == 0:
            return tuple(0.0 for _ in self.counts)
        return tuple(c / t for c in self.counts)

    def bin_labels(self) -> Tuple[str, ...]:
        e = self.bin_edges_deg
        labels = [f"[{_fmt_deg(e[0])},{_fmt_deg(e[1])}]"]
        labels += [f"({_fmt_deg(a)},{_fmt_deg(b)}]" for a, b in zip(e[1:-1], e[2:])]
        return tuple(labels)

    def to_dict(self) -> Dict:
        return {
            "bin_edges_deg": list(self.bin_edges_deg),
            "bin_labels": list(self.bin_labels()),
            "counts": list(self.counts),
            "fractions": list(self.fractions),
        }


def _fmt_deg(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


def bin_angles(values, edges: Sequence[float] = SAM_BINS) -> AngleHistogram:
    """Histogram values (degrees) into bins [e0,e1], (e1,e2], ..."""
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise DimensionMismatchError(f"bin edges must be ascending: {edges}")
    v = np.asarray(values, dtype=np.float64).ravel()
    v = np.clip(v, edges[0], edges[-1])
    idx = np.searchsorted(edges[1:], v, side="left")
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return AngleHistogram(edges, tuple(int(c) for c in counts))


def sam(e) -> np.ndarray:
    """Pairwise angle matrix (degrees) of one embedding set.

    Symmetric with an exactly zero diagonal (a vector's angle with itself).
    """
    e = as_matrix(e)
    c = e @ e.T
    c = 0.5 * (c + c.T)
    angles = angle_deg(c)
    np.fill_diagonal(angles, 0.0)
    return angles


def sam_delta_hist(
    e_i, e_j, bins: Sequence[float] = SAM_BINS
) -> AngleHistogram:
    """Histogram of |pairwise-angle differences| over unordered pairs a < b."""
    e_i = as_matrix(e_i)
    e_j = as_matrix(e_j)
    if e_i.shape[0] != e_j.shape[0]:
        raise DimensionMismatchError(
            f"row counts differ: {e_i.shape[0]} vs {e_j.shape[0]}"
        )
    delta = np.abs(sam(e_i) - sam(e_j))
    iu = np.triu_indices(delta.shape[0], k=1)
    return bin_angles(delta[iu], bins)


def ram(e_i, e_j) -> np.ndarray:
    """Per-sample angle (degrees) between two snapshots' embeddings."""
    e_i = as_matrix(e_i)
    e_j = as_matrix(e_j)
    if e_i.shape != e_j.shape:
        raise DimensionMismatchError(f"shapes differ: {e_i.shape} vs {e_j.shape}")
    return angle_deg(rowwise_cosine(e_i, e_j))


def intra_pair_angles(vision_emb, language_emb) -> np.ndarray:
    """Angle between each sample's own vision and language embeddings."""
    return angle_deg(rowwise_cosine(vision_emb, language_emb))


def imav(
    old: DualEncoderSnapshot,
    new: DualEncoderSnapshot,
    data: PhaseDataset,
    bins: Sequence[float] = IMAV_BINS,
    both_directions: bool = False,
) -> AngleHistogram:
    """Inter-modal angle change across snapshots, on the old model's correct set.

    A sample contributes iff the old snapshot retrieves it correctly
    (image->text: its similarity row peaks on the diagonal; with
    ``both_directions`` the column must peak there too). Raises
    EmptyCorrectSetError when no sample qualifies.
    """
    if data.n < 1:
        raise EmptyCorrectSetError("dataset is empty")
    v_old = encode(old.vision, data.vision_inputs)
    l_old = encode(old.language, data.language_inputs)
    m_old = cosine_matrix(v_old, l_old)
    correct = diagonal_is_argmax(m_old)
    if both_directions:
        correct = correct & diagonal_is_argmax(m_old.T)
    if not correct.any():
        raise EmptyCorrectSetError("no sample was correctly retrieved by the old snapshot")
    v_new = encode(new.vision, data.vision_inputs)
    l_new = encode(new.language, data.language_inputs)
    theta_old = intra_pair_angles(v_old, l_old)
    theta_new = intra_pair_angles(v_new, l_new)
    return bin_angles(np.abs(theta_old - theta_new)[correct], bins)


@dataclass(frozen=True)
class RetrievalReport:
    """recall@K per direction; keys ascending K."""

    image_to_text: Dict[int, float]
    text_to_image: Dict[int, float]

    def to_dict(self) -> Dict:
        return {
            "image_to_text": {str(k): self.image_to_text[k] for k in sorted(self.image_to_text)},
            "text_to_image": {str(k): self.text_to_image[k] for k in sorted(self.text_to_image)},
        }


def _diagonal_ranks(m: np.ndarray) -> np.ndarray:
    """Rank (1-based) of each row's diagonal entry, descending by value.

    Ties rank the lower column index earlier, so an off-diagonal entry equal
    to the diagonal pushes the diagonal down only if its index is smaller.
    """
    n = m.shape[0]
    diag = np.diagonal(m)
    greater = (m > diag[:, None]).sum(axis=1)
    cols = np.arange(n)
    ties_before = ((m == diag[:, None]) & (cols[None, :] < cols[:, None])).sum(axis=1)
    return 1 + greater + ties_before


def recall_at_k(m, ks: Sequence[int] = DEFAULT_KS) -> RetrievalReport:
    """Fraction of queries whose true match ranks within the top K.

    Rows give image->text, columns text->image; K larger than n is clipped
    to n.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"matrix is not square: {m.shape}")
    n = m.shape[0]
    ranks_i2t = _diagonal_ranks(m)
    ranks_t2i = _diagonal_ranks(m.T)
    i2t = {int(k): float(np.mean(ranks_i2t <= min(int(k), n))) for k in ks}
    t2i = {int(k): float(np.mean(ranks_t2i <= min(int(k), n))) for k in ks}
    return RetrievalReport(i2t, t2i)


@dataclass(frozen=True)
class RotationFlipReport:
    """Outcome of the one-sided-negation retrieval-flip construction."""

    vision: np.ndarray
    language: np.ndarray
    rotation: np.ndarray
    m_before: np.ndarray
    m_after: np.ndarray
    m_both_rotated: np.ndarray
    correct_index: int
    misretrieved_index: int
    argmax_before: Tuple[int, ...]
    argmax_after: Tuple[int, ...]
    entries_negated_exactly: bool
    correct_row_flipped: bool
    retrieval_unchanged_when_both_rotated: bool


def rotation_flip_demo(
    d: int, n: int, seed: SeedLike, max_attempts: int = 64
) -> RotationFlipReport:
    """Numerically realize the representation-flip argument.

    Builds unit embeddings with at least one correctly retrieved sample and
    one misretrieved sample, applies R = -I to the language side only, and
    verifies that every similarity negates and the correct sample's row
    argmax leaves the diagonal. Applying R to both sides instead leaves the
    similarity matrix (hence retrieval) unchanged.
    """
    if n < 2 or d < 2:
        raise DimensionMismatchError(f"need n >= 2 and d >= 2, got n={n}, d={d}")
    base = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    for attempt in range(max_attempts):
        rng = rng_from(base + [attempt])
        vision = l2_normalize_rows(rng.standard_normal((n, d)))
        language = l2_normalize_rows(vision + 0.25 * rng.standard_normal((n, d)))
        b = n - 1
        # Point sample b's language embedding away from its vision embedding.
        language[b] = l2_normalize_rows(
            (-vision[b] + 0.1 * rng.standard_normal(d))[None, :]
        )[0]
        m = cosine_matrix(vision, language)
        correct = diagonal_is_argmax(m)
        if correct[b] or not correct[:b].any():
            continue
        a = int(np.argmax(correct))
        rotation = negate_identity(d)
        m_after = cosine_matrix(vision, language @ rotation.T)
        m_both = cosine_matrix(vision @ rotation.T, language @ rotation.T)
        after_correct = diagonal_is_argmax(m_after)
        report_before = recall_at_k(m)
        report_both = recall_at_k(m_both)
        return RotationFlipReport(
            vision=vision,
            language=language,
            rotation=rotation,
            m_before=m,
            m_after=m_after,
            m_both_rotated=m_both,
            correct_index=a,
            misretrieved_index=b,
            argmax_before=tuple(int(j) for j in m.argmax(axis=1)),
            argmax_after=tuple(int(j) for j in m_after.argmax(axis=1)),
            entries_negated_exactly=bool(np.array_equal(m_after, -m)),
            correct_row_flipped=not bool(after_correct[a]),
            retrieval_unchanged_when_both_rotated=(
                np.array_equal(m_both, m)
                and report_both.to_dict() == report_before.to_dict()
            ),
        )
    raise ConstructionFailureError(
        f"could not construct a flip instance in {max_attempts} attempts (d={d}, n={n})"
    )
