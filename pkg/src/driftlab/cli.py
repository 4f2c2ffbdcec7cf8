"""Command-line interface.

Subcommands:

- ``generate``       write the benchmark datasets as CSV files
- ``train``          run one strategy end to end, persisting snapshots,
                     records, and the summary CSV
- ``analyze``        drift diagnostics between two snapshots of a run
- ``sweep``          repeat the distillation run over several alpha values
- ``demo-rotation``  numeric demonstration that negating one modality flips
                     retrieval while the similarity structure is preserved
- ``report``         render tables, JSON, CSV, and figures for a run

Every experiment field can be set in a ``key = value`` config file (``#``
comments allowed; unknown keys are errors) and overridden by the matching
``--flag``. The resolved config is echoed into the output directory.

Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import analysis, datastream, experiment, report
from .errors import ConfigError, DriftLabError
from .experiment import ExperimentConfig


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="key = value config file")
    group = parser.add_argument_group("config overrides")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            group.add_argument(flag, default=None, metavar="BOOL")
        else:
            group.add_argument(flag, default=None, metavar=f.name.upper())


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig()
    if args.config:
        config = experiment.load_config(args.config, config)
    override_lines = []
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            override_lines.append(f"{f.name} = {value}")
    if override_lines:
        config = experiment.parse_config_text("\n".join(override_lines), config)
    return config


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out = config.output_dir or "benchmark_data"
    os.makedirs(out, exist_ok=True)
    bench = experiment.build_benchmark(config)
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as f:
        f.write(experiment.config_to_text(config))
    names = {
        "d0_train.csv": bench.d0_train,
        "d0_test.csv": bench.d0_test,
        "stream_train.csv": bench.stream_train,
        "stream_test.csv": bench.stream_test,
    }
    for i, phase in enumerate(bench.phases, start=1):
        names[f"phase_{i:02d}.csv"] = phase
    for name, data in names.items():
        datastream.write_dataset_csv(data, os.path.join(out, name))
    print(f"wrote {len(names)} dataset files to {out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    if not config.output_dir:
        config = dataclasses.replace(config, output_dir="runs/latest")
    result = experiment.run_experiment(config)
    final = result.records[-1]
    print(f"strategy {config.strategy}: {len(result.records)} phase records -> {config.output_dir}")
    for domain in sorted(final.retrieval):
        rep = final.retrieval[domain]
        print(
            f"  final {domain}: R@1 i2t {100 * rep.image_to_text[1]:.2f}%  "
            f"t2i {100 * rep.text_to_image[1]:.2f}%"
        )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    from .encoder import encode, read_snapshot

    run_dir = args.run_dir
    snap_a = read_snapshot(os.path.join(run_dir, f"phase_{args.phase_a}", "snapshot.bin"))
    snap_b = read_snapshot(os.path.join(run_dir, f"phase_{args.phase_b}", "snapshot.bin"))
    data_path = args.data or os.path.join(run_dir, "data", "d0_test.csv")
    data = datastream.read_dataset_csv(data_path)
    v_a = encode(snap_a.vision, data.vision_inputs)
    v_b = encode(snap_b.vision, data.vision_inputs)
    l_a = encode(snap_a.language, data.language_inputs)
    l_b = encode(snap_b.language, data.language_inputs)
    ram_v = analysis.ram(v_a, v_b)
    ram_l = analysis.ram(l_a, l_b)
    payload = {
        "phase_a": args.phase_a,
        "phase_b": args.phase_b,
        "dataset": os.path.basename(data_path),
        "n_samples": data.n,
        "sam_delta_vision": analysis.sam_delta_hist(v_a, v_b).to_dict(),
        "sam_delta_language": analysis.sam_delta_hist(l_a, l_b).to_dict(),
        "ram_vision": analysis.bin_angles(ram_v, analysis.RAM_BINS).to_dict(),
        "ram_language": analysis.bin_angles(ram_l, analysis.RAM_BINS).to_dict(),
        "ram_vision_mean_deg": float(np.mean(ram_v)),
        "ram_language_mean_deg": float(np.mean(ram_l)),
        "retrieval_a": analysis.recall_at_k(v_a @ l_a.T).to_dict(),
        "retrieval_b": analysis.recall_at_k(v_b @ l_b.T).to_dict(),
    }
    try:
        payload["imav"] = analysis.imav(snap_a, snap_b, data).to_dict()
        payload["imav_note"] = ""
    except analysis.EmptyCorrectSetError as exc:
        payload["imav"] = None
        payload["imav_note"] = str(exc)
    out_path = os.path.join(run_dir, f"analyze_{args.phase_a}_{args.phase_b}.json")
    with open(out_path, "w", encoding="utf-8") as f:
        f.write(json.dumps(payload, indent=2) + "\n")
    for key in ("sam_delta_vision", "ram_vision", "imav"):
        hist = payload[key]
        if hist is None:
            print(f"{key}: empty correct set")
            continue
        cells = "  ".join(
            f"{label} {100 * frac:.2f}%"
            for label, frac in zip(hist["bin_labels"], hist["fractions"])
        )
        print(f"{key}: {cells}")
    print(f"wrote {out_path}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --alphas value {args.alphas!r}") from exc
    if not alphas:
        raise ConfigError("--alphas must list at least one value")
    out = config.output_dir or "runs/sweep"
    os.makedirs(out, exist_ok=True)
    results = experiment.alpha_sweep(config, alphas)
    import csv as _csv

    table_path = os.path.join(out, "sweep.csv")
    with open(table_path, "w", encoding="utf-8", newline="") as f:
        w = _csv.writer(f, lineterminator="\n")
        w.writerow(["alpha", "domain", "metric", "value"])
        for alpha in alphas:
            final = results[float(alpha)][-1]
            for domain in sorted(final.retrieval):
                rep = final.retrieval[domain]
                for k in sorted(rep.image_to_text):
                    w.writerow([repr(float(alpha)), domain, f"r{k}_i2t", repr(rep.image_to_text[k])])
                for k in sorted(rep.text_to_image):
                    w.writerow([repr(float(alpha)), domain, f"r{k}_t2i", repr(rep.text_to_image[k])])
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as f:
        f.write(experiment.config_to_text(config))
    print(f"alpha sweep over {alphas} -> {table_path}")
    for alpha in alphas:
        final = results[float(alpha)][-1]
        cells = []
        for domain in sorted(final.retrieval):
            rep = final.retrieval[domain]
            cells.append(f"{domain} R@1 i2t {100 * rep.image_to_text[1]:.2f}%")
        print(f"  alpha={alpha:g}: " + "  ".join(cells))
    return 0


def _cmd_demo_rotation(args: argparse.Namespace) -> int:
    rep = analysis.rotation_flip_demo(args.dim, args.n, args.seed)
    fmt = dict(precision=4, suppress_small=True, floatmode="fixed")
    print(f"similarity matrix before (row argmax {list(rep.argmax_before)}):")
    print(np.array2string(rep.m_before, **fmt))
    print(f"after negating the language side (row argmax {list(rep.argmax_after)}):")
    print(np.array2string(rep.m_after, **fmt))
    print(f"every entry negated exactly: {rep.entries_negated_exactly}")
    print(
        f"sample {rep.correct_index} was retrieved correctly and now is not: "
        f"{rep.correct_row_flipped}"
    )
    print(
        "rotating BOTH modalities leaves retrieval unchanged: "
        f"{rep.retrieval_unchanged_when_both_rotated}"
    )
    ok = (
        rep.entries_negated_exactly
        and rep.correct_row_flipped
        and rep.retrieval_unchanged_when_both_rotated
    )
    print("verdict:", "flip demonstrated" if ok else "FAILED")
    return 0 if ok else 1


def _cmd_report(args: argparse.Namespace) -> int:
    paths = report.render_report(args.run_dir, with_figures=not args.no_figures)
    with open(paths["text"], "r", encoding="utf-8") as f:
        print(f.read(), end="")
    print(f"wrote {', '.join(sorted(os.path.basename(p) for p in paths.values()))} to {args.run_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="continual dual-encoder training lab with drift diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write benchmark dataset CSVs")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="run one training strategy end to end")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("analyze", help="drift diagnostics between two snapshots")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--phase-a", type=int, default=0)
    p.add_argument("--phase-b", type=int, default=1)
    p.add_argument("--data", help="dataset CSV (default: run data/d0_test.csv)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep", help="rerun the distillation strategy per alpha")
    _add_config_flags(p)
    p.add_argument("--alphas", default="10,15,20,25,30", metavar="A1,A2,...")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("demo-rotation", help="one-sided negation retrieval flip")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_demo_rotation)

    p = sub.add_parser("report", help="render tables, JSON, CSV, and figures")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"driftlab: config error: {exc}", file=sys.stderr)
        return 2
    except (DriftLabError, OSError, ValueError) as exc:
        print(f"driftlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
