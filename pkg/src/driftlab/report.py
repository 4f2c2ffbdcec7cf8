"""Render a finished run directory into tables, JSON, CSV, and figures.

Reads the ``phase_*/record.json`` files written by a training run and
produces:

- ``report.txt``   aligned plain-text tables (retrieval per phase, plus the
                   angle-distribution tables with their standard bin headers)
- ``report.json``  the same content as one JSON object with stable key order
- ``summary.csv``  one row per (strategy, phase, domain, metric)
- ``figures/*.png`` recall-per-phase curves and angle-distribution bars

Re-rendering the same inputs reproduces the text/JSON/CSV outputs byte for
byte; nothing volatile (timestamps, paths) is embedded.
"""

from __future__ import annotations

import json
import os
from typing import Dict, List, Optional, Sequence

from .errors import MissingRecordsError


def load_records(run_dir) -> List[Dict]:
    """Phase record dicts from ``run_dir``, ordered by phase index."""
    found = []
    if os.path.isdir(run_dir):
        for name in os.listdir(run_dir):
            path = os.path.join(run_dir, name, "record.json")
            if name.startswith("phase_") and os.path.isfile(path):
                with open(path, "r", encoding="utf-8") as f:
                    found.append(json.load(f))
    if not found:
        raise MissingRecordsError(f"no phase records under {run_dir!r}")
    found.sort(key=lambda r: r["phase_index"])
    return found


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    def fmt(cells):
        return "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(headers), rule] + [fmt(r) for r in rows])


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def retrieval_table(records: Sequence[Dict]) -> str:
    domains = sorted(records[0]["retrieval"])
    ks = sorted(int(k) for k in records[0]["retrieval"][domains[0]]["image_to_text"])
    headers = ["phase"]
    for domain in domains:
        for direction in ("i2t", "t2i"):
            headers += [f"{domain} {direction} R@{k}" for k in ks]
    rows = []
    for rec in records:
        row = [str(rec["phase_index"])]
        for domain in domains:
            rep = rec["retrieval"][domain]
            row += [_pct(rep["image_to_text"][str(k)]) for k in ks]
            row += [_pct(rep["text_to_image"][str(k)]) for k in ks]
        rows.append(row)
    return _table(headers, rows)


def _angle_table(records: Sequence[Dict], key: str, title: str) -> str:
    rows = []
    labels: Optional[List[str]] = None
    for rec in records:
        diag = rec.get("diagnostics")
        if not diag:
            continue
        hist = diag.get(key)
        if hist is None:
            note = diag.get("imav_note", "")
            rows.append([f"{rec['phase_index'] - 1}-{rec['phase_index']}", f"(empty correct set{': ' + note if note else ''})"])
            continue
        if labels is None:
            labels = list(hist["bin_labels"])
        rows.append(
            [f"{rec['phase_index'] - 1}-{rec['phase_index']}"]
            + [_pct(f) for f in hist["fractions"]]
        )
    if labels is None or not rows:
        return f"{title}: no data (single-phase run)"
    headers = ["phases"] + labels
    padded = [r + [""] * (len(headers) - len(r)) for r in rows]
    return f"{title}\n{_table(headers, padded)}"


def render_report_text(records: Sequence[Dict]) -> str:
    strategy = records[0]["strategy"]
    parts = [
        f"run report (strategy: {strategy}, phases: {len(records) - 1})",
        "",
        "retrieval per phase",
        retrieval_table(records),
        "",
        _angle_table(records, "sam_delta_vision", "pairwise-angle drift, vision (fraction per bin)"),
        "",
        _angle_table(records, "sam_delta_language", "pairwise-angle drift, language (fraction per bin)"),
        "",
        _angle_table(records, "ram_vision", "per-sample rotation, vision (fraction per bin)"),
        "",
        _angle_table(records, "ram_language", "per-sample rotation, language (fraction per bin)"),
        "",
        _angle_table(records, "imav", "inter-modal angle change on the old correct set (fraction per bin)"),
        "",
    ]
    return "\n".join(parts)


def render_report_json(records: Sequence[Dict]) -> str:
    payload = {
        "strategy": records[0]["strategy"],
        "n_phases": len(records) - 1,
        "records": list(records),
    }
    return json.dumps(payload, indent=2) + "\n"


def _records_summary_rows(records: Sequence[Dict]):
    rows = []
    for rec in records:
        for domain in sorted(rec["retrieval"]):
            rep = rec["retrieval"][domain]
            for k in sorted(rep["image_to_text"], key=int):
                rows.append((rec["strategy"], rec["phase_index"], domain, f"r{k}_i2t", rep["image_to_text"][k]))
            for k in sorted(rep["text_to_image"], key=int):
                rows.append((rec["strategy"], rec["phase_index"], domain, f"r{k}_t2i", rep["text_to_image"][k]))
    return rows


def write_summary_csv(records: Sequence[Dict], path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["strategy", "phase", "domain", "metric", "value"])
        for row in _records_summary_rows(records):
            w.writerow([row[0], row[1], row[2], row[3], repr(row[4])])


def render_figures(records: Sequence[Dict], fig_dir) -> List[str]:
    """Write PNG figures; returns the file paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(fig_dir, exist_ok=True)
    written: List[str] = []

    domains = sorted(records[0]["retrieval"])
    phases = [rec["phase_index"] for rec in records]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for domain in domains:
        for direction, key in (("i2t", "image_to_text"), ("t2i", "text_to_image")):
            values = [100.0 * rec["retrieval"][domain][key]["1"] for rec in records]
            ax.plot(phases, values, marker="o", label=f"{domain} {direction}")
    ax.set_xlabel("training phase")
    ax.set_ylabel("R@1 (%)")
    ax.set_title(f"retrieval per phase ({records[0]['strategy']})")
    ax.set_xticks(phases)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    path = os.path.join(fig_dir, "recall_r1.png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    for key, fname, title in (
        ("sam_delta_vision", "sam_delta_vision.png", "pairwise-angle drift, vision"),
        ("sam_delta_language", "sam_delta_language.png", "pairwise-angle drift, language"),
        ("ram_vision", "ram_vision.png", "per-sample rotation, vision"),
        ("ram_language", "ram_language.png", "per-sample rotation, language"),
        ("imav", "imav.png", "inter-modal angle change (old correct set)"),
    ):
        rows = []
        labels = None
        for rec in records:
            diag = rec.get("diagnostics")
            if not diag or diag.get(key) is None:
                continue
            hist = diag[key]
            labels = hist["bin_labels"]
            rows.append((f"{rec['phase_index'] - 1}-{rec['phase_index']}", hist["fractions"]))
        if not rows:
            continue
        fig, ax = plt.subplots(figsize=(7, 4.5))
        n_bins = len(labels)
        width = 0.8 / len(rows)
        for i, (label, fractions) in enumerate(rows):
            xs = [j + i * width for j in range(n_bins)]
            ax.bar(xs, [100.0 * f for f in fractions], width=width, label=label)
        ax.set_xticks([j + 0.4 - width / 2 for j in range(n_bins)])
        ax.set_xticklabels(labels)
        ax.set_xlabel("angle change (degrees)")
        ax.set_ylabel("fraction of pairs (%)")
        ax.set_title(title)
        ax.legend(title="phases", fontsize=8)
        path = os.path.join(fig_dir, fname)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_report(run_dir, with_figures: bool = True) -> Dict[str, str]:
    """Render everything for one run directory; returns written paths by kind."""
    records = load_records(run_dir)
    paths: Dict[str, str] = {}
    text = render_report_text(records)
    paths["text"] = os.path.join(run_dir, "report.txt")
    with open(paths["text"], "w", encoding="utf-8") as f:
        f.write(text)
    paths["json"] = os.path.join(run_dir, "report.json")
    with open(paths["json"], "w", encoding="utf-8") as f:
        f.write(render_report_json(records))
    paths["csv"] = os.path.join(run_dir, "summary.csv")
    write_summary_csv(records, paths["csv"])
    if with_figures:
        for p in render_figures(records, os.path.join(run_dir, "figures")):
            paths[os.path.basename(p)] = p
    return paths
