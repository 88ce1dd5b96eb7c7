"""Report writers: key=value text, JSON, plain-text tables and plot-ready CSV grids.

Nothing here writes timestamps, so reports of identical runs are
byte-identical.
"""

import json
import os

import pandas as pd
from prettytable import PrettyTable

from analysis import Quadrant


def _ensure_parent(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def fmt(value, digits=3):
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def scores_payload(scores):
    return scores.as_dict()


def quadrant_payload(report):
    return {
        "counts": report.counts.tolist(),
        "confusion": report.confusion.tolist(),
        "per_quadrant_le": dict(zip([q.label for q in Quadrant], report.per_quadrant_le)),
        "front_back_confusion": report.front_back_confusion,
        "unmatched_refs": report.unmatched_refs.tolist(),
        "unmatched_preds": report.unmatched_preds.tolist(),
    }


def polyphony_payload(report):
    return {
        str(k): {
            "n_refs": b.n_refs,
            "n_matched": b.n_matched,
            "recall": b.recall,
            "localization_error_deg": b.localization_error_deg,
        }
        for k, b in report.buckets.items()
    }


def lateral_payload(report):
    payload = dict(vars(report))
    payload["band_deg"] = list(report.band_deg)
    payload["front_back_to_lateral_ratio"] = report.front_back_to_lateral_ratio
    return payload


def write_json(path, payload):
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(payload, f, indent=4, sort_keys=True)
        f.write("\n")
    return path


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_key_values(path, values):
    """One `key = value` line per entry, keys sorted."""
    _ensure_parent(path)
    with open(path, "w") as f:
        for key in sorted(values):
            f.write(f"{key} = {fmt(values[key], 6)}\n")
    return path


def write_confusion_grid(path, report):
    _ensure_parent(path)
    df = pd.DataFrame(report.grid_triples(), columns=["true_quadrant", "predicted_quadrant", "value"])
    df.to_csv(path, index=False, float_format="%.6f")
    return path


def comparison_table(rows):
    """rows: (name, SeldScores, QuadrantReport or None)."""
    table = PrettyTable()
    table.field_names = ["Input", "SELD", "ER", "F", "LE", "LR", "Front/back confusion"]
    for name, scores, quadrants in rows:
        confusion = quadrants.front_back_confusion if quadrants is not None else None
        table.add_row(
            [
                name,
                fmt(scores.seld_score, 2),
                fmt(scores.error_rate, 2),
                f"{100 * scores.f_score:.1f}%",
                "n/a" if scores.localization_error_deg is None else f"{scores.localization_error_deg:.1f}",
                f"{100 * scores.localization_recall:.1f}%",
                "n/a" if confusion is None else f"{100 * confusion:.1f}%",
            ]
        )
    table.align["Input"] = "l"
    return table.get_string()


def quadrant_table(report):
    table = PrettyTable()
    table.field_names = ["True \\ Predicted", *[q.label for q in Quadrant], "LE"]
    confusion = report.confusion
    for q, le in zip(Quadrant, report.per_quadrant_le):
        table.add_row([q.label, *[f"{v:.3f}" for v in confusion[q]], fmt(le, 1)])
    return table.get_string()


def polyphony_table(report):
    table = PrettyTable()
    table.field_names = ["Sources", "Records", "LR", "LE"]
    for k, bucket in report.buckets.items():
        table.add_row([f"{k}+" if k >= 4 else str(k), bucket.n_refs, fmt(bucket.recall), fmt(bucket.localization_error_deg, 1)])
    return table.get_string()


def reference_rows_table(rows):
    """rows: (name, (ER, F, LE, LR), reported, recomputed)."""
    table = PrettyTable()
    table.field_names = ["Row", "ER", "F", "LE", "LR", "Reported SELD", "Recomputed SELD", "Difference"]
    for name, (er, f, le, lr), reported, recomputed in rows:
        table.add_row(
            [name, f"{er:.2f}", f"{100 * f:.1f}%", f"{le:.1f}", f"{100 * lr:.1f}%", f"{reported:.2f}", f"{recomputed:.4f}", f"{recomputed - reported:+.4f}"]
        )
    table.align["Row"] = "l"
    return table.get_string()


def histogram_table(histogram):
    table = PrettyTable()
    table.field_names = [q.label for q in Quadrant]
    table.add_row([int(n) for n in histogram.quadrants])
    return table.get_string()
