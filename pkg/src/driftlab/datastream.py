"""Synthetic paired-modality streams with controllable domain shift.

Each sample is a unit latent vector drawn around a domain mean, pushed
through two fixed linear modality maps (shared across domains) with
independent additive noise. Domains differ only in their mean direction,
so the angle between domain means controls the distribution gap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, TooFewSamplesError
from .linalg import SeedLike, as_matrix, l2_normalize_rows, rng_from


@dataclass(frozen=True)
class DomainSpec:
    """Generator settings for one domain's paired samples."""

    name: str
    latent_dim: int
    vision_dim: int
    language_dim: int
    domain_mean: np.ndarray
    latent_noise: float
    modality_noise: float
    seed: SeedLike
    map_seed: SeedLike
    id_start: int = 0

    def __post_init__(self):
        if min(self.latent_dim, self.vision_dim, self.language_dim) < 2:
            raise DimensionMismatchError("all dims must be >= 2")
        if self.latent_noise < 0 or self.modality_noise < 0:
            raise DimensionMismatchError("noise levels must be >= 0")
        mean = np.asarray(self.domain_mean, dtype=np.float64)
        if mean.shape != (self.latent_dim,):
            raise DimensionMismatchError(
                f"domain_mean shape {mean.shape} != ({self.latent_dim},)"
            )
        if abs(np.linalg.norm(mean) - 1.0) > 1e-9:
            raise DimensionMismatchError("domain_mean must be a unit vector")
        object.__setattr__(self, "domain_mean", mean)


@dataclass(frozen=True)
class PhaseDataset:
    """Paired raw feature rows for one training phase."""

    vision_inputs: np.ndarray
    language_inputs: np.ndarray
    sample_ids: np.ndarray
    domain_tag: str

    def __post_init__(self):
        v = as_matrix(self.vision_inputs)
        l = as_matrix(self.language_inputs)
        ids = np.asarray(self.sample_ids, dtype=np.int64)
        if not (v.shape[0] == l.shape[0] == ids.shape[0]):
            raise DimensionMismatchError("field row counts differ")
        if len(np.unique(ids)) != len(ids):
            raise DimensionMismatchError("sample ids must be unique within a dataset")
        object.__setattr__(self, "vision_inputs", v)
        object.__setattr__(self, "language_inputs", l)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n(self) -> int:
        return self.vision_inputs.shape[0]

    def take(self, indices) -> "PhaseDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return PhaseDataset(
            self.vision_inputs[idx],
            self.language_inputs[idx],
            self.sample_ids[idx],
            self.domain_tag,
        )


def concat_datasets(parts: Sequence[PhaseDataset], tag: str) -> PhaseDataset:
    return PhaseDataset(
        np.concatenate([p.vision_inputs for p in parts]),
        np.concatenate([p.language_inputs for p in parts]),
        np.concatenate([p.sample_ids for p in parts]),
        tag,
    )


def modality_maps(
    latent_dim: int, vision_dim: int, language_dim: int, map_seed: SeedLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed full-rank maps latent -> vision and latent -> language.

    Seeded Gaussian matrices with orthonormalized columns, so they embed the
    latent sphere isometrically. The two maps are distinct draws from the
    same stream, forcing the two encoders to learn different functions.
    """
    if vision_dim < latent_dim or language_dim < latent_dim:
        raise DimensionMismatchError("modality dims must be >= latent_dim")
    rng = rng_from(map_seed)

    def draw(out_dim: int) -> np.ndarray:
        g = rng.standard_normal((out_dim, latent_dim))
        q, r = np.linalg.qr(g)
        signs = np.sign(np.diagonal(r))
        signs[signs == 0] = 1.0
        return q * signs

    return draw(vision_dim), draw(language_dim)


def generate_domain(spec: DomainSpec, n: int) -> PhaseDataset:
    """Draw ``n`` paired samples; deterministic per (spec, n)."""
    if n < 1:
        raise TooFewSamplesError(f"n must be >= 1, got {n}")
    a_v, a_l = modality_maps(
        spec.latent_dim, spec.vision_dim, spec.language_dim, spec.map_seed
    )
    rng = rng_from(spec.seed)
    z = spec.domain_mean + spec.latent_noise * rng.standard_normal((n, spec.latent_dim))
    z = l2_normalize_rows(z)
    vision = z @ a_v.T + spec.modality_noise * rng.standard_normal((n, spec.vision_dim))
    language = z @ a_l.T + spec.modality_noise * rng.standard_normal(
        (n, spec.language_dim)
    )
    ids = np.arange(spec.id_start, spec.id_start + n, dtype=np.int64)
    return PhaseDataset(vision, language, ids, spec.name)


def split_phases(d: PhaseDataset, n_phases: int, seed: SeedLike) -> List[PhaseDataset]:
    """Seeded shuffle, then contiguous near-equal slices (remainder first)."""
    if n_phases < 1:
        raise TooFewSamplesError(f"n_phases must be >= 1, got {n_phases}")
    if d.n < n_phases:
        raise TooFewSamplesError(f"{d.n} samples cannot fill {n_phases} phases")
    perm = rng_from(seed).permutation(d.n)
    base, rem = divmod(d.n, n_phases)
    out: List[PhaseDataset] = []
    start = 0
    for k in range(n_phases):
        size = base + (1 if k < rem else 0)
        out.append(d.take(perm[start : start + size]))
        start += size
    return out


@dataclass(frozen=True)
class ReplayBuffer:
    """Capacity-bounded retention buffer, rebalanced to equal per-phase share."""

    capacity: int
    stored: Tuple[PhaseDataset, ...] = ()

    def __post_init__(self):
        if self.capacity < 1:
            raise TooFewSamplesError(f"capacity must be >= 1, got {self.capacity}")

    @property
    def size(self) -> int:
        return sum(p.n for p in self.stored)

    def rows(self) -> Optional[PhaseDataset]:
        if not self.stored:
            return None
        return concat_datasets(self.stored, "buffer")


def buffer_update(buf: ReplayBuffer, phase: PhaseDataset, seed: SeedLike) -> ReplayBuffer:
    """Admit one finished phase, rebalancing to floor(capacity / phases_seen)
    uniformly sampled rows per seen phase (without replacement, so a phase
    smaller than its share is stored whole)."""
    phases_seen = len(buf.stored) + 1
    share = buf.capacity // phases_seen
    rng = rng_from(seed)
    kept: List[PhaseDataset] = []
    for old in buf.stored:
        k = min(share, old.n)
        idx = np.sort(rng.choice(old.n, size=k, replace=False))
        kept.append(old.take(idx))
    k = min(share, phase.n)
    idx = np.sort(rng.choice(phase.n, size=k, replace=False))
    kept.append(phase.take(idx))
    return ReplayBuffer(buf.capacity, tuple(kept))


def write_dataset_csv(d: PhaseDataset, path) -> None:
    """UTF-8 CSV: id, domain, v_0..v_{dv-1}, l_0..l_{dl-1}.

    Reals are written with 17 significant digits so float64 values
    round-trip exactly.
    """
    dv = d.vision_inputs.shape[1]
    dl = d.language_inputs.shape[1]
    header = (
        ["id", "domain"]
        + [f"v_{j}" for j in range(dv)]
        + [f"l_{j}" for j in range(dl)]
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i in range(d.n):
            row = [str(int(d.sample_ids[i])), d.domain_tag]
            row += [f"{x:.17g}" for x in d.vision_inputs[i]]
            row += [f"{x:.17g}" for x in d.language_inputs[i]]
            w.writerow(row)


def read_dataset_csv(path) -> PhaseDataset:
    """Inverse of write_dataset_csv."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        dv = sum(1 for h in header if h.startswith("v_"))
        dl = sum(1 for h in header if h.startswith("l_"))
        ids: List[int] = []
        tags: List[str] = []
        vis: List[List[float]] = []
        lang: List[List[float]] = []
        for row in reader:
            ids.append(int(row[0]))
            tags.append(row[1])
            vals = [float(x) for x in row[2:]]
            vis.append(vals[:dv])
            lang.append(vals[dv : dv + dl])
    unique_tags = sorted(set(tags))
    tag = unique_tags[0] if len(unique_tags) == 1 else "mixed"
    return PhaseDataset(np.array(vis), np.array(lang), np.array(ids), tag)
