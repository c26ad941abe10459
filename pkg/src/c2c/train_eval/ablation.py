"""Scenario sweep and comparison tables (relative ROC-AUC change against C2C)."""
from __future__ import annotations

import csv
import io
import math
import os
import warnings

from ..audio_io import load_manifest, split_dataset
from ..config import PipelineConfig
from .trainer import get_scenario, train

BASELINE = "C2C"
DEFAULT_SUITE = ("C2C", "D2C", "B2C", "no_preprocess", "raw_frontend", "no_augment")


def performance_variation(auc, baseline_auc):
    """Relative change in percent, e.g. 0.5 against 0.781 gives -35.98."""
    if baseline_auc == 0:
        return math.nan
    return 100.0 * (auc - baseline_auc) / baseline_auc


def order_reports(reports):
    base = [r for r in reports if r.scenario == BASELINE]
    rest = sorted((r for r in reports if r.scenario != BASELINE), key=lambda r: -r.roc_auc)
    return base + rest


def table_rows(reports):
    reports = order_reports(reports)
    base = next((r.roc_auc for r in reports if r.scenario == BASELINE), None)
    rows = []
    for r in reports:
        if r.scenario == BASELINE or base is None:
            variation = "-"
        else:
            change = performance_variation(r.roc_auc, base)
            variation = "n/a" if math.isnan(change) else f"{change:.2f}"
        rows.append((r.scenario, f"{r.roc_auc:.4f}", variation))
    return rows


HEADER = ("Model", "ROC-AUC", "Performance variation (%)")


def format_table(reports):
    rows = [HEADER] + table_rows(reports)
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(table_rows(reports))
    return buf.getvalue()


def run_ablation_suite(manifest, cfg: PipelineConfig = PipelineConfig(), scenarios=DEFAULT_SUITE,
                       out_dir=None, progress=None):
    """Train and evaluate every scenario on one shared split and seed.

    Scenarios needing the breath modality are skipped with a warning when the
    manifest has no breath clips.  With ``out_dir`` set, per-scenario JSON
    reports plus ``ablation.txt`` and ``ablation.csv`` are written there.
    """
    entries = load_manifest(manifest)
    root = os.path.dirname(os.path.abspath(manifest))
    split = split_dataset(entries, cfg.train.val_fraction, cfg.train.seed)
    present = {e.modality for e in entries}

    reports = []
    for name in scenarios:
        scenario = get_scenario(name)
        missing = set(scenario.modalities) - present
        if missing:
            warnings.warn(f"skipping scenario {name}: manifest has no {', '.join(sorted(missing))} clips")
            continue
        result = train(split, scenario, cfg, root=root)
        reports.append(result.report)
        if progress is not None:
            progress(name, result.report)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, f"report_{name}.json"), "w", encoding="utf-8") as fh:
                fh.write(result.report.to_json())

    if out_dir is not None:
        with open(os.path.join(out_dir, "ablation.txt"), "w", encoding="utf-8") as fh:
            fh.write(format_table(reports))
        with open(os.path.join(out_dir, "ablation.csv"), "w", encoding="utf-8") as fh:
            fh.write(format_csv(reports))
    return order_reports(reports)
