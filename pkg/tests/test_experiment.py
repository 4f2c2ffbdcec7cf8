import dataclasses
import json

import numpy as np
import pytest

from driftlab.datastream import ReplayBuffer, buffer_update
from driftlab.encoder import snapshot_bytes
from driftlab.errors import ConfigError, MissingPretrainError
from driftlab.experiment import (
    ExperimentConfig,
    _run_phases,
    _train_params,
    alpha_sweep,
    build_benchmark,
    config_to_text,
    parse_config_text,
    pretrain,
    run_continual,
    run_experiment,
)

TINY = dict(
    latent_dim=6,
    embed_dim=8,
    vision_dim=12,
    language_dim=10,
    hidden_dim=12,
    train_per_domain=120,
    test_per_domain=30,
    n_phases=2,
    batch_size=32,
    pretrain_epochs=3,
    epochs_per_phase=2,
)


def tiny_config(**kw) -> ExperimentConfig:
    merged = dict(TINY)
    merged.update(kw)
    return ExperimentConfig(**merged)


class TestConfig:
    def test_round_trip_through_text(self):
        cfg = tiny_config(strategy="ewc", alpha=7.5, seed=3)
        assert parse_config_text(config_to_text(cfg)) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config_text("alpa = 20")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            parse_config_text("alpha = twenty")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# a comment\n\nalpha = 3.5  # trailing\n")
        assert cfg.alpha == 3.5

    def test_overrides_apply_over_base(self):
        base = parse_config_text("alpha = 3.5")
        cfg = parse_config_text("alpha = 4.5", base)
        assert cfg.alpha == 4.5

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ConfigError, match="unknown strategy"):
            ExperimentConfig(strategy="distill")

    def test_bool_parsing(self):
        assert parse_config_text("learn_temperature = true").learn_temperature
        assert not parse_config_text("learn_temperature = false").learn_temperature


class TestBenchmark:
    def test_sizes_and_partition(self):
        cfg = tiny_config()
        bench = build_benchmark(cfg)
        assert bench.d0_train.n == 120 and bench.d0_test.n == 30
        assert sum(p.n for p in bench.phases) == bench.stream_train.n
        stream_ids = set(bench.stream_train.sample_ids.tolist())
        phase_ids = set()
        for p in bench.phases:
            ids = set(p.sample_ids.tolist())
            assert not (ids & phase_ids)
            phase_ids |= ids
        assert phase_ids == stream_ids

    def test_domains_do_not_share_ids(self):
        bench = build_benchmark(tiny_config())
        assert not (
            set(bench.d0_train.sample_ids.tolist())
            & set(bench.stream_train.sample_ids.tolist())
        )

    def test_deterministic(self):
        a = build_benchmark(tiny_config(seed=5))
        b = build_benchmark(tiny_config(seed=5))
        np.testing.assert_array_equal(a.d0_train.vision_inputs, b.d0_train.vision_inputs)
        np.testing.assert_array_equal(a.phases[1].sample_ids, b.phases[1].sample_ids)

    def test_domain_mean_angle(self):
        cfg = tiny_config(domain_angle_deg=60.0)
        from driftlab.experiment import _domain_means

        u0, u1 = _domain_means(cfg)
        assert float(u0 @ u1) == pytest.approx(0.5, abs=1e-12)


class TestPretrain:
    def test_zero_epochs_returns_init(self):
        cfg = tiny_config(pretrain_epochs=0)
        from driftlab.experiment import _initial_snapshot

        assert snapshot_bytes(pretrain(cfg)) == snapshot_bytes(_initial_snapshot(cfg))

    def test_deterministic_snapshots(self):
        cfg = tiny_config()
        assert snapshot_bytes(pretrain(cfg)) == snapshot_bytes(pretrain(cfg))

    def test_phase_index_zero(self):
        assert pretrain(tiny_config()).phase_index == 0


class TestRunContinual:
    def test_missing_pretrain_raises(self):
        cfg = tiny_config(strategy="ct")
        with pytest.raises(MissingPretrainError):
            run_continual(cfg, build_benchmark(cfg), None)

    def test_record_indices_contiguous(self):
        cfg = tiny_config(strategy="ct")
        bench = build_benchmark(cfg)
        records = run_continual(cfg, bench, pretrain(cfg, bench))
        assert [r.phase_index for r in records] == [0, 1, 2]
        assert records[1].diagnostics is not None
        assert records[0].diagnostics is None

    def test_teacher_snapshot_frozen(self):
        cfg = tiny_config(strategy="modx")
        bench = build_benchmark(cfg)
        pre = pretrain(cfg, bench)
        before = snapshot_bytes(pre)
        run_continual(cfg, bench, pre)
        assert snapshot_bytes(pre) == before

    def test_data_isolation_in_phase_batches(self):
        cfg = tiny_config(strategy="ct")
        bench = build_benchmark(cfg)
        pre = pretrain(cfg, bench)
        log = []
        _train_params(cfg, pre, bench.phases[1], cfg.epochs_per_phase, phase_no=2, batch_id_log=log)
        allowed = set(bench.phases[1].sample_ids.tolist())
        seen = set(np.concatenate(log).tolist())
        assert seen <= allowed
        earlier = set(bench.d0_train.sample_ids.tolist()) | set(bench.phases[0].sample_ids.tolist())
        assert not (seen & earlier)

    def test_replay_batches_mix_in_buffer_rows(self):
        cfg = tiny_config(strategy="replay", buffer_capacity=20)
        bench = build_benchmark(cfg)
        pre = pretrain(cfg, bench)
        buffer = buffer_update(ReplayBuffer(cfg.buffer_capacity), bench.d0_train, 0)
        log = []
        _train_params(
            cfg, pre, bench.phases[0], 1, phase_no=1, buffer=buffer, batch_id_log=log
        )
        seen = set(np.concatenate(log).tolist())
        assert seen & set(bench.d0_train.sample_ids.tolist())

    def test_modx_alpha_zero_reproduces_ct_losses(self):
        bench = build_benchmark(tiny_config())
        cfg_ct = tiny_config(strategy="ct")
        cfg_m0 = tiny_config(strategy="modx", alpha=0.0)
        pre = pretrain(cfg_ct, bench)
        ct = run_continual(cfg_ct, bench, pre)
        m0 = run_continual(cfg_m0, bench, pre)
        for a, b in zip(ct, m0):
            assert a.loss_curve == b.loss_curve

    def test_strategies_share_batch_order(self):
        cfg = tiny_config(strategy="ct")
        bench = build_benchmark(cfg)
        pre = pretrain(cfg, bench)
        log_ct, log_mx = [], []
        _train_params(cfg, pre, bench.phases[0], 1, phase_no=1, batch_id_log=log_ct)
        cfg_mx = tiny_config(strategy="modx")
        _train_params(
            cfg_mx, pre, bench.phases[0], 1, phase_no=1, teacher=pre, batch_id_log=log_mx
        )
        for a, b in zip(log_ct, log_mx):
            np.testing.assert_array_equal(a, b)

    def test_joint_single_record(self):
        cfg = tiny_config(strategy="joint")
        records = run_continual(cfg, build_benchmark(cfg), None)
        assert len(records) == 1
        assert records[0].phase_index == 0
        assert len(records[0].loss_curve) == cfg.pretrain_epochs + cfg.n_phases * cfg.epochs_per_phase

    @pytest.mark.parametrize("strategy", ["modx_noscreen", "ewc", "replay"])
    def test_other_strategies_run(self, strategy):
        cfg = tiny_config(strategy=strategy)
        bench = build_benchmark(cfg)
        records = run_continual(cfg, bench, pretrain(cfg, bench))
        assert len(records) == cfg.n_phases + 1
        for rec in records:
            assert set(rec.retrieval) == {"domain0", "domain1"}

    def test_learnable_temperature_moves_tau(self):
        cfg = tiny_config(learn_temperature=True, strategy="ct")
        bench = build_benchmark(cfg)
        snap = pretrain(cfg, bench)
        assert snap.temperature != cfg.temperature
        fixed = pretrain(tiny_config(strategy="ct"), bench)
        assert fixed.temperature == cfg.temperature


class TestRunExperiment:
    def test_in_memory_run(self):
        result = run_experiment(tiny_config(strategy="ct"))
        assert len(result.records) == len(result.snapshots) == 3

    def test_persistence_layout(self, tmp_path):
        out = tmp_path / "run"
        cfg = tiny_config(strategy="ct", output_dir=str(out))
        run_experiment(cfg)
        assert (out / "config.txt").is_file()
        assert (out / "summary.csv").is_file()
        assert (out / "timing.csv").is_file()
        for t in range(3):
            assert (out / f"phase_{t}" / "snapshot.bin").is_file()
            assert (out / f"phase_{t}" / "record.json").is_file()
        assert (out / "data" / "d0_test.csv").is_file()
        rec = json.loads((out / "phase_1" / "record.json").read_text())
        assert rec["phase_index"] == 1
        assert "diagnostics" in rec and rec["diagnostics"]["imav"] is not None

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(tiny_config(strategy="modx", output_dir=str(out_a)))
        run_experiment(tiny_config(strategy="modx", output_dir=str(out_b)))
        for rel in [
            "summary.csv",
            "phase_0/record.json",
            "phase_2/record.json",
            "phase_0/snapshot.bin",
            "phase_2/snapshot.bin",
            "data/d0_train.csv",
        ]:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes(), rel


class TestAlphaSweep:
    def test_alpha_zero_row_equals_ct(self):
        cfg = tiny_config(strategy="ct")
        bench = build_benchmark(cfg)
        pre = pretrain(cfg, bench)
        ct = run_continual(cfg, bench, pre)
        sweep = alpha_sweep(tiny_config(), [0.0, 1.0])
        zero = sweep[0.0]
        assert [r.loss_curve for r in zero[1:]] == [r.loss_curve for r in ct[1:]]
        for a, b in zip(zero, ct):
            assert a.retrieval["domain0"].to_dict() == b.retrieval["domain0"].to_dict()

    def test_returns_all_alphas(self):
        sweep = alpha_sweep(tiny_config(), [0.0, 2.0, 5.0])
        assert set(sweep) == {0.0, 2.0, 5.0}
