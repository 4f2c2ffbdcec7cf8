"""Continual-training orchestration on the synthetic two-domain benchmark.

A run pretrains a dual encoder on domain 0, then streams domain 1 through
``n_phases`` sequential phases under one of six strategies:

- ``ct``            plain sequential training, no anti-forgetting mechanism
- ``modx``          screened similarity-matrix distillation from the
                    previous phase's frozen snapshot
- ``modx_noscreen`` the same distillation without the screening step
- ``ewc``           quadratic penalty weighted by a diagonal Fisher estimate
- ``replay``        retention-buffer rows mixed into every training batch
- ``joint``         one model trained from scratch on the union of all data
                    (the upper bound); it gets the same per-epoch budget as
                    the whole continual pipeline

Every run is a pure function of its config: all randomness derives from the
single ``seed`` through fixed child-seed offsets, so identical configs
produce byte-identical records, summaries, and snapshot files. Wall times
are kept out of record.json (they go to a timing.csv sidecar) for exactly
that reason.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis, datastream, losses, optim
from .analysis import AngleHistogram, RetrievalReport
from .datastream import DomainSpec, PhaseDataset, ReplayBuffer
from .encoder import (
    DualEncoderSnapshot,
    MlpSpec,
    encode,
    encode_backward,
    encode_with_cache,
    init_snapshot,
    write_snapshot,
)
from .errors import ConfigError, MissingPretrainError
from .linalg import l2_normalize_rows, rng_from

STRATEGIES = ("ct", "modx", "modx_noscreen", "ewc", "replay", "joint")

# Child-seed offsets; every rng in a run is rng_from([seed, OFFSET, *indices]).
_SEED_MEANS = 11
_SEED_MAPS = 12
_SEED_DATA = 13
_SEED_SPLIT = 14
_SEED_INIT = 15
_SEED_BATCH = 16
_SEED_BUFFER = 17
_SEED_REPLAY = 18


@dataclass
class ExperimentConfig:
    """Every knob of a run; serializes to/from ``key = value`` config text."""

    # data stream
    latent_dim: int = 16
    embed_dim: int = 32
    vision_dim: int = 48
    language_dim: int = 40
    hidden_dim: int = 64
    activation: str = "tanh"
    train_per_domain: int = 2000
    test_per_domain: int = 500
    domain_angle_deg: float = 60.0
    latent_noise: float = 0.25
    modality_noise: float = 0.10
    n_phases: int = 5
    # strategy
    strategy: str = "modx"
    temperature: float = 0.07
    learn_temperature: bool = False
    alpha: float = 20.0
    distill_tau: float = 1.0
    ewc_lambda: float = 50.0
    buffer_capacity: int = 300
    replay_fraction: float = 0.5
    # optimization
    batch_size: int = 64
    pretrain_epochs: int = 30
    epochs_per_phase: int = 15
    base_lr: float = 5e-3
    weight_decay: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    warmup_fraction: float = 0.2
    # bookkeeping
    seed: int = 0
    output_dir: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.n_phases < 1:
            raise ConfigError("n_phases must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.temperature <= 0 or self.distill_tau <= 0:
            raise ConfigError("temperatures must be > 0")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.strategy == "replay" and self.buffer_capacity < 1:
            raise ConfigError("replay needs buffer_capacity >= 1")
        if not 0.0 < self.replay_fraction <= 1.0:
            raise ConfigError("replay_fraction must be in (0, 1]")
        if self.ewc_lambda < 0:
            raise ConfigError("ewc_lambda must be >= 0")
        if self.test_per_domain < 1 or self.train_per_domain < self.n_phases:
            raise ConfigError("per-domain sample counts too small")


def config_to_text(config: ExperimentConfig) -> str:
    """Echo every field as one ``key = value`` line, in declaration order."""
    lines = ["# resolved experiment config"]
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Apply ``key = value`` lines over ``base`` (or the defaults).

    Lines may carry ``#`` comments; unknown keys are hard errors.
    """
    config = dataclasses.replace(base) if base is not None else ExperimentConfig()
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        setattr(config, key, _coerce(fields[key].name, type(getattr(config, key)), value, lineno))
    config.validate()
    return config


def _coerce(name: str, t: type, value: str, lineno: int):
    try:
        if t is bool:
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if t is int:
            return int(value)
        if t is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {name}: {value!r}") from exc


def load_config(path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def encoder_specs(config: ExperimentConfig) -> Tuple[MlpSpec, MlpSpec]:
    vision = MlpSpec((config.vision_dim, config.hidden_dim, config.embed_dim), config.activation)
    language = MlpSpec((config.language_dim, config.hidden_dim, config.embed_dim), config.activation)
    return vision, language


@dataclass(frozen=True)
class Benchmark:
    """Materialized datasets for one seeded run."""

    d0_train: PhaseDataset
    d0_test: PhaseDataset
    stream_train: PhaseDataset
    stream_test: PhaseDataset
    phases: Tuple[PhaseDataset, ...]

    @property
    def test_sets(self) -> Dict[str, PhaseDataset]:
        return {
            self.d0_test.domain_tag: self.d0_test,
            self.stream_test.domain_tag: self.stream_test,
        }


def _domain_means(config: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    rng = rng_from([config.seed, _SEED_MEANS])
    u0 = l2_normalize_rows(rng.standard_normal((1, config.latent_dim)))[0]
    g = rng.standard_normal(config.latent_dim)
    w = g - np.dot(g, u0) * u0
    w = w / np.linalg.norm(w)
    t = np.radians(config.domain_angle_deg)
    u1 = np.cos(t) * u0 + np.sin(t) * w
    return u0, u1


def build_benchmark(config: ExperimentConfig) -> Benchmark:
    """Generate both domains, carve held-out tests, split the stream."""
    u0, u1 = _domain_means(config)
    total = config.train_per_domain + config.test_per_domain
    common = dict(
        latent_dim=config.latent_dim,
        vision_dim=config.vision_dim,
        language_dim=config.language_dim,
        latent_noise=config.latent_noise,
        modality_noise=config.modality_noise,
        map_seed=(config.seed, _SEED_MAPS),
    )
    spec0 = DomainSpec(
        name="domain0", domain_mean=u0, seed=(config.seed, _SEED_DATA, 0), id_start=0, **common
    )
    spec1 = DomainSpec(
        name="domain1",
        domain_mean=u1,
        seed=(config.seed, _SEED_DATA, 1),
        id_start=10_000_000,
        **common,
    )
    full0 = datastream.generate_domain(spec0, total)
    full1 = datastream.generate_domain(spec1, total)

    def carve(full: PhaseDataset, which: int) -> Tuple[PhaseDataset, PhaseDataset]:
        perm = rng_from([config.seed, _SEED_SPLIT, which]).permutation(full.n)
        test = full.take(perm[: config.test_per_domain])
        train = full.take(perm[config.test_per_domain :])
        return train, test

    d0_train, d0_test = carve(full0, 0)
    stream_train, stream_test = carve(full1, 1)
    phases = datastream.split_phases(
        stream_train, config.n_phases, [config.seed, _SEED_SPLIT, 2]
    )
    return Benchmark(d0_train, d0_test, stream_train, stream_test, tuple(phases))


@dataclass(frozen=True)
class PhaseDiagnostics:
    """Drift statistics of one snapshot against its predecessor."""

    sam_delta_vision: AngleHistogram
    sam_delta_language: AngleHistogram
    ram_vision: AngleHistogram
    ram_language: AngleHistogram
    ram_vision_mean_deg: float
    ram_language_mean_deg: float
    imav: Optional[AngleHistogram]
    imav_note: str = ""

    def to_dict(self) -> Dict:
        return {
            "sam_delta_vision": self.sam_delta_vision.to_dict(),
            "sam_delta_language": self.sam_delta_language.to_dict(),
            "ram_vision": self.ram_vision.to_dict(),
            "ram_language": self.ram_language.to_dict(),
            "ram_vision_mean_deg": self.ram_vision_mean_deg,
            "ram_language_mean_deg": self.ram_language_mean_deg,
            "imav": self.imav.to_dict() if self.imav is not None else None,
            "imav_note": self.imav_note,
        }


@dataclass
class PhaseRecord:
    """Everything persisted about one completed phase (wall time aside)."""

    phase_index: int
    strategy: str
    retrieval: Dict[str, RetrievalReport]
    loss_curve: List[float]
    diagnostics: Optional[PhaseDiagnostics]
    wall_time_s: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "phase_index": self.phase_index,
            "strategy": self.strategy,
            "retrieval": {k: self.retrieval[k].to_dict() for k in sorted(self.retrieval)},
            "loss_curve": self.loss_curve,
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
        }


def evaluate_snapshot(
    snapshot: DualEncoderSnapshot, test_sets: Dict[str, PhaseDataset]
) -> Dict[str, RetrievalReport]:
    out: Dict[str, RetrievalReport] = {}
    for tag in sorted(test_sets):
        data = test_sets[tag]
        v = encode(snapshot.vision, data.vision_inputs)
        l = encode(snapshot.language, data.language_inputs)
        out[tag] = analysis.recall_at_k(v @ l.T)
    return out


def _epoch_order(config: ExperimentConfig, phase_no: int, epoch: int, n: int) -> np.ndarray:
    # Strategy-independent key, so every strategy sees identical batch streams.
    return rng_from([config.seed, _SEED_BATCH, phase_no, epoch]).permutation(n)


def _train_params(
    config: ExperimentConfig,
    start: DualEncoderSnapshot,
    data: PhaseDataset,
    epochs: int,
    phase_no: int,
    teacher: Optional[DualEncoderSnapshot] = None,
    fisher: Optional[losses.FisherDiag] = None,
    buffer: Optional[ReplayBuffer] = None,
    batch_id_log: Optional[List[np.ndarray]] = None,
) -> Tuple[DualEncoderSnapshot, List[float]]:
    """One training stage; returns the new snapshot and per-epoch mean losses.

    ``phase_no`` 0 (pretraining / joint) always trains with the plain
    contrastive loss; later phases dispatch on the configured strategy. The
    starting snapshot is copied, never mutated.
    """
    strategy = config.strategy if phase_no > 0 else "ct"
    work = start.copy()
    params = work.param_arrays()
    n_batches = (data.n + config.batch_size - 1) // config.batch_size
    opt_cfg = optim.OptimizerConfig(
        total_steps=max(1, epochs * n_batches),
        base_lr=config.base_lr,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
        weight_decay=config.weight_decay,
        warmup_fraction=config.warmup_fraction,
    )
    state = optim.init_state(params, opt_cfg)
    log_tau = np.array([np.log(work.temperature)])
    if config.learn_temperature:
        # Separate state so the temperature is exempt from weight decay.
        tau_state = optim.init_state([log_tau], dataclasses.replace(opt_cfg, weight_decay=0.0))
    buffer_rows = buffer.rows() if buffer is not None else None
    curve: List[float] = []
    for epoch in range(epochs):
        order = _epoch_order(config, phase_no, epoch, data.n)
        epoch_losses: List[float] = []
        for b in range(n_batches):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            vis = data.vision_inputs[idx]
            lang = data.language_inputs[idx]
            ids = data.sample_ids[idx]
            if strategy == "replay" and buffer_rows is not None:
                k = min(buffer_rows.n, int(round(config.batch_size * config.replay_fraction)))
                if k > 0:
                    pick = rng_from([config.seed, _SEED_REPLAY, phase_no, epoch, b]).choice(
                        buffer_rows.n, size=k, replace=False
                    )
                    vis = np.concatenate([vis, buffer_rows.vision_inputs[pick]])
                    lang = np.concatenate([lang, buffer_rows.language_inputs[pick]])
                    ids = np.concatenate([ids, buffer_rows.sample_ids[pick]])
            if batch_id_log is not None:
                batch_id_log.append(ids.copy())
            tau = float(np.exp(log_tau[0])) if config.learn_temperature else work.temperature
            v, cache_v = encode_with_cache(work.vision, vis)
            l, cache_l = encode_with_cache(work.language, lang)
            if strategy in ("modx", "modx_noscreen"):
                fn = losses.modx_loss if strategy == "modx" else losses.unscreened_distill_loss
                res = fn(v, l, teacher, vis, lang, tau, config.alpha, config.distill_tau)
            else:
                res = losses.infonce(v, l, tau)
            gv = encode_backward(work.vision, vis, res.grad_v, cache_v)
            gl = encode_backward(work.language, lang, res.grad_l, cache_l)
            grads = gv.arrays() + gl.arrays()
            value = res.value
            if strategy == "ewc" and fisher is not None:
                pen = losses.ewc_penalty(params, fisher, config.ewc_lambda)
                value += pen.value
                grads = [g + pg for g, pg in zip(grads, pen.grads)]
            optim.adamw_step(params, grads, state)
            if config.learn_temperature:
                # Only the contrastive term depends on tau; with logits M/tau,
                # d(value)/d(log tau) = -sum(dV/dM * M) = -sum(grad_v * v).
                info = res if strategy not in ("modx", "modx_noscreen") else losses.infonce(v, l, tau)
                d_log_tau = -float(np.sum(info.grad_v * v))
                optim.adamw_step([log_tau], [np.array([d_log_tau])], tau_state)
            epoch_losses.append(value)
        curve.append(float(np.mean(epoch_losses)))
    final_tau = float(np.exp(log_tau[0])) if config.learn_temperature else work.temperature
    return DualEncoderSnapshot(work.vision, work.language, final_tau, phase_no), curve


def _initial_snapshot(config: ExperimentConfig) -> DualEncoderSnapshot:
    vision_spec, language_spec = encoder_specs(config)
    return init_snapshot(
        vision_spec, language_spec, config.temperature, [config.seed, _SEED_INIT]
    )


def _pretrain_with_curve(
    config: ExperimentConfig, bench: Benchmark
) -> Tuple[DualEncoderSnapshot, List[float]]:
    start = _initial_snapshot(config)
    if config.pretrain_epochs == 0:
        return start, []
    return _train_params(config, start, bench.d0_train, config.pretrain_epochs, phase_no=0)


def pretrain(config: ExperimentConfig, bench: Optional[Benchmark] = None) -> DualEncoderSnapshot:
    """Train the phase-0 snapshot on domain 0 with the plain contrastive loss.

    Zero pretrain epochs returns the seeded random initialization unchanged.
    """
    bench = bench or build_benchmark(config)
    snapshot, _ = _pretrain_with_curve(config, bench)
    return snapshot


def _phase_fisher(
    config: ExperimentConfig, snapshot: DualEncoderSnapshot, data: PhaseDataset
) -> losses.FisherDiag:
    """Fisher over one deterministic pass of the phase's batch stream."""
    batches = [
        (
            data.vision_inputs[s : s + config.batch_size],
            data.language_inputs[s : s + config.batch_size],
        )
        for s in range(0, data.n, config.batch_size)
    ]
    return losses.estimate_fisher(snapshot, batches, snapshot.temperature)


def _accumulate_fisher(
    old: Optional[losses.FisherDiag], new: losses.FisherDiag
) -> losses.FisherDiag:
    # Summed across phases; the anchor moves to the newest parameters.
    if old is None:
        return new
    return losses.FisherDiag([a + b for a, b in zip(old.fisher, new.fisher)], new.anchor)


def _diagnose(
    old: DualEncoderSnapshot,
    new: DualEncoderSnapshot,
    geometry_data: PhaseDataset,
    imav_data: PhaseDataset,
) -> PhaseDiagnostics:
    v_old = encode(old.vision, geometry_data.vision_inputs)
    v_new = encode(new.vision, geometry_data.vision_inputs)
    l_old = encode(old.language, geometry_data.language_inputs)
    l_new = encode(new.language, geometry_data.language_inputs)
    ram_v = analysis.ram(v_old, v_new)
    ram_l = analysis.ram(l_old, l_new)
    try:
        imav_hist: Optional[AngleHistogram] = analysis.imav(old, new, imav_data)
        note = ""
    except analysis.EmptyCorrectSetError as exc:
        imav_hist = None
        note = str(exc)
    return PhaseDiagnostics(
        sam_delta_vision=analysis.sam_delta_hist(v_old, v_new),
        sam_delta_language=analysis.sam_delta_hist(l_old, l_new),
        ram_vision=analysis.bin_angles(ram_v, analysis.RAM_BINS),
        ram_language=analysis.bin_angles(ram_l, analysis.RAM_BINS),
        ram_vision_mean_deg=float(np.mean(ram_v)),
        ram_language_mean_deg=float(np.mean(ram_l)),
        imav=imav_hist,
        imav_note=note,
    )


def _run_phases(
    config: ExperimentConfig,
    bench: Benchmark,
    pretrained: DualEncoderSnapshot,
    pretrain_curve: Optional[List[float]] = None,
) -> Tuple[List[PhaseRecord], List[DualEncoderSnapshot]]:
    records: List[PhaseRecord] = []
    snapshots: List[DualEncoderSnapshot] = [pretrained]
    records.append(
        PhaseRecord(
            0,
            config.strategy,
            evaluate_snapshot(pretrained, bench.test_sets),
            pretrain_curve or [],
            None,
        )
    )
    fisher: Optional[losses.FisherDiag] = None
    buffer: Optional[ReplayBuffer] = None
    if config.strategy == "ewc":
        fisher = _phase_fisher(config, pretrained, bench.d0_train)
    if config.strategy == "replay":
        buffer = datastream.buffer_update(
            ReplayBuffer(config.buffer_capacity), bench.d0_train, [config.seed, _SEED_BUFFER, 0]
        )
    previous = pretrained
    for t, phase_data in enumerate(bench.phases, start=1):
        t0 = time.perf_counter()
        snapshot, curve = _train_params(
            config,
            previous,
            phase_data,
            config.epochs_per_phase,
            phase_no=t,
            teacher=previous,
            fisher=fisher,
            buffer=buffer,
        )
        retrieval = evaluate_snapshot(snapshot, bench.test_sets)
        imav_data = bench.d0_train if t == 1 else bench.phases[t - 2]
        diagnostics = _diagnose(previous, snapshot, bench.d0_test, imav_data)
        records.append(
            PhaseRecord(
                t, config.strategy, retrieval, curve, diagnostics,
                wall_time_s=time.perf_counter() - t0,
            )
        )
        snapshots.append(snapshot)
        if config.strategy == "ewc":
            fisher = _accumulate_fisher(fisher, _phase_fisher(config, snapshot, phase_data))
        if config.strategy == "replay":
            buffer = datastream.buffer_update(buffer, phase_data, [config.seed, _SEED_BUFFER, t])
        previous = snapshot
    return records, snapshots


def _run_joint(
    config: ExperimentConfig, bench: Benchmark
) -> Tuple[List[PhaseRecord], List[DualEncoderSnapshot]]:
    t0 = time.perf_counter()
    union = datastream.concat_datasets([bench.d0_train, bench.stream_train], "joint")
    epochs = config.pretrain_epochs + config.n_phases * config.epochs_per_phase
    snapshot, curve = _train_params(config, _initial_snapshot(config), union, epochs, phase_no=0)
    record = PhaseRecord(
        0,
        "joint",
        evaluate_snapshot(snapshot, bench.test_sets),
        curve,
        None,
        wall_time_s=time.perf_counter() - t0,
    )
    return [record], [snapshot]


def run_continual(
    config: ExperimentConfig,
    bench: Benchmark,
    pretrained: Optional[DualEncoderSnapshot],
) -> List[PhaseRecord]:
    """Sequential phase training under ``config.strategy``.

    Returns one record per phase, index 0 being the pretrained snapshot's
    evaluation (for ``joint``, the single record of the union-trained model).
    """
    if config.strategy == "joint":
        records, _ = _run_joint(config, bench)
        return records
    if pretrained is None:
        raise MissingPretrainError("continual strategies need a pretrained snapshot")
    records, _ = _run_phases(config, bench, pretrained)
    return records


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    bench: Benchmark
    records: List[PhaseRecord]
    snapshots: List[DualEncoderSnapshot]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Full pipeline: build data, pretrain (or joint-train), stream phases,
    and persist everything when ``output_dir`` is set."""
    bench = build_benchmark(config)
    if config.strategy == "joint":
        records, snapshots = _run_joint(config, bench)
    else:
        pretrained, curve = _pretrain_with_curve(config, bench)
        records, snapshots = _run_phases(config, bench, pretrained, curve)
    result = ExperimentResult(config, bench, records, snapshots)
    if config.output_dir:
        persist_result(result)
    return result


def record_json(record: PhaseRecord) -> str:
    return json.dumps(record.to_dict(), indent=2) + "\n"


def summary_rows(records: Sequence[PhaseRecord]) -> List[Tuple[str, int, str, str, float]]:
    """(strategy, phase, domain, metric, value) rows for external plotting."""
    rows: List[Tuple[str, int, str, str, float]] = []
    for rec in records:
        for domain in sorted(rec.retrieval):
            rep = rec.retrieval[domain]
            for k in sorted(rep.image_to_text):
                rows.append((rec.strategy, rec.phase_index, domain, f"r{k}_i2t", rep.image_to_text[k]))
            for k in sorted(rep.text_to_image):
                rows.append((rec.strategy, rec.phase_index, domain, f"r{k}_t2i", rep.text_to_image[k]))
    return rows


def write_summary_csv(records: Sequence[PhaseRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["strategy", "phase", "domain", "metric", "value"])
        for row in summary_rows(records):
            w.writerow([row[0], row[1], row[2], row[3], repr(row[4])])


def persist_result(result: ExperimentResult) -> None:
    """Write config echo, datasets, per-phase snapshots/records, summary CSV,
    and the (non-deterministic) timing sidecar under ``config.output_dir``."""
    out = result.config.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as f:
        f.write(config_to_text(result.config))
    data_dir = os.path.join(out, "data")
    os.makedirs(data_dir, exist_ok=True)
    bench = result.bench
    datastream.write_dataset_csv(bench.d0_train, os.path.join(data_dir, "d0_train.csv"))
    datastream.write_dataset_csv(bench.d0_test, os.path.join(data_dir, "d0_test.csv"))
    datastream.write_dataset_csv(bench.stream_train, os.path.join(data_dir, "stream_train.csv"))
    datastream.write_dataset_csv(bench.stream_test, os.path.join(data_dir, "stream_test.csv"))
    for i, phase in enumerate(bench.phases, start=1):
        datastream.write_dataset_csv(phase, os.path.join(data_dir, f"phase_{i:02d}.csv"))
    for record, snapshot in zip(result.records, result.snapshots):
        pdir = os.path.join(out, f"phase_{record.phase_index}")
        os.makedirs(pdir, exist_ok=True)
        write_snapshot(snapshot, os.path.join(pdir, "snapshot.bin"))
        with open(os.path.join(pdir, "record.json"), "w", encoding="utf-8") as f:
            f.write(record_json(record))
    write_summary_csv(result.records, os.path.join(out, "summary.csv"))
    with open(os.path.join(out, "timing.csv"), "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["phase", "wall_time_s"])
        for record in result.records:
            w.writerow([record.phase_index, f"{record.wall_time_s:.3f}"])


def alpha_sweep(
    config: ExperimentConfig, alphas: Sequence[float]
) -> Dict[float, List[PhaseRecord]]:
    """Run the distillation strategy once per alpha over shared data and
    pretraining; returns the full record list per alpha."""
    base = dataclasses.replace(config, strategy="modx", output_dir="")
    bench = build_benchmark(base)
    pretrained, curve = _pretrain_with_curve(base, bench)
    out: Dict[float, List[PhaseRecord]] = {}
    for alpha in alphas:
        cfg = dataclasses.replace(base, alpha=float(alpha))
        records, _ = _run_phases(cfg, bench, pretrained, curve)
        out[float(alpha)] = records
    return out
