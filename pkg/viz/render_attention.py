#!/usr/bin/env python3
"""Render attention-export JSON as per-channel heatmaps.

    python3 render_attention.py records.json out.png [--show-pads] [--cmap NAME]

The input is the JSON array written by the classifier's inspect-attention
command: one record per sentence with parallel ``tokens``/``pads`` lists, a
list of per-channel weight rows, the predicted class, and an optional true
label.  Each record becomes one image: channels stacked as rows, tokens as
columns, color mapping the attention weight.

Weight rows are probability distributions, so with many tokens every cell
is small; for display each row is divided by its own maximum.  That rescale
never touches the input data, which is read-only.

Pad columns are dropped unless --show-pads is given.  With several records
the output name gains a _<index> suffix before its extension.

Exit codes: 0 on success, 1 for a schema violation (the message names the
offending record index), 2 for anything else (unreadable input, bad
colormap, unwritable output).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SCHEMA_KEYS = frozenset({"tokens", "pads", "channels", "predicted", "label"})
SUM_TOL = 1e-6


class SchemaError(ValueError):
    """A record does not match the exporter's documented shape."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


def validate_record(record, index: int) -> None:
    if not isinstance(record, dict):
        raise SchemaError(index, "not an object")
    if set(record) != SCHEMA_KEYS:
        missing = SCHEMA_KEYS - set(record)
        extra = set(record) - SCHEMA_KEYS
        raise SchemaError(index, f"keys off (missing {sorted(missing)}, "
                                 f"unexpected {sorted(extra)})")
    tokens, pads, channels = record["tokens"], record["pads"], record["channels"]
    if not isinstance(tokens, list) or not tokens \
            or not all(isinstance(t, str) for t in tokens):
        raise SchemaError(index, "tokens must be a non-empty list of strings")
    n = len(tokens)
    if not isinstance(pads, list) or len(pads) != n \
            or not all(isinstance(p, bool) for p in pads):
        raise SchemaError(index, f"pads must be {n} booleans")
    if not isinstance(channels, list) or not channels:
        raise SchemaError(index, "channels must be a non-empty list of rows")
    for ci, row in enumerate(channels):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(index, f"channel {ci} must have {n} weights")
        if not all(isinstance(w, (int, float)) and not isinstance(w, bool)
                   and w >= 0.0 for w in row):
            raise SchemaError(index, f"channel {ci} has non-numeric or "
                                     f"negative weights")
        if abs(sum(row) - 1.0) > SUM_TOL:
            raise SchemaError(index, f"channel {ci} weights sum to "
                                     f"{sum(row):.6f}, not 1")
    if not isinstance(record["predicted"], int) or isinstance(record["predicted"], bool):
        raise SchemaError(index, "predicted must be an integer")
    label = record["label"]
    if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
        raise SchemaError(index, "label must be an integer or null")


def load_records(path: str) -> list:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, list) or not payload:
        raise ValueError(f"{path}: expected a non-empty JSON array of records")
    for i, record in enumerate(payload):
        validate_record(record, i)
    return payload


def display_matrix(record: dict, hide_pads: bool = True) -> tuple:
    """(row-normalized weight matrix, kept token labels) for one record.

    Rows are divided by their own max so per-channel contrasts stay visible;
    an all-zero row (possible when every kept weight underflowed) is left as
    zeros rather than divided.
    """
    pads = record["pads"]
    keep = [i for i, pad in enumerate(pads) if not (hide_pads and pad)]
    matrix = np.asarray(record["channels"], dtype=float)[:, keep]
    labels = [record["tokens"][i] for i in keep]
    if not keep:  # nothing visible; the caller decides how to complain
        return matrix, labels
    row_max = matrix.max(axis=1, keepdims=True)
    normalized = np.divide(matrix, row_max, out=np.zeros_like(matrix),
                           where=row_max > 0)
    return normalized, labels


def render(record: dict, out_path: str, index: int, hide_pads: bool = True,
           cmap: str = "viridis") -> None:
    matrix, labels = display_matrix(record, hide_pads)
    if matrix.shape[1] == 0:
        raise SchemaError(index, "no visible columns (all positions are pads)")
    n_channels, n_cols = matrix.shape
    fig, ax = plt.subplots(
        figsize=(max(2.5, 0.55 * n_cols + 1.2), 0.6 * n_channels + 1.6))
    image = ax.imshow(matrix, aspect="auto", cmap=cmap, vmin=0.0, vmax=1.0)
    ax.set_xticks(range(n_cols))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(n_channels))
    ax.set_yticklabels([f"channel {c}" for c in range(n_channels)], fontsize=8)
    title = f"predicted {record['predicted']}"
    if record["label"] is not None:
        title += f", label {record['label']}"
    ax.set_title(title, fontsize=9)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def output_paths(out: str, count: int) -> list:
    if count == 1:
        return [out]
    stem, ext = os.path.splitext(out)
    return [f"{stem}_{i}{ext or '.png'}" for i in range(count)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render attention-export JSON as per-channel heatmaps")
    parser.add_argument("records", help="JSON file from inspect-attention")
    parser.add_argument("out", help="output image path (suffixed per record)")
    parser.add_argument("--show-pads", action="store_true",
                        help="keep pad columns instead of dropping them")
    parser.add_argument("--cmap", default="viridis",
                        help="matplotlib colormap name")
    args = parser.parse_args(argv)

    try:
        records = load_records(args.records)
    except SchemaError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"cannot load {args.records}: {exc}", file=sys.stderr)
        return 2

    try:
        plt.get_cmap(args.cmap)
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return 2

    paths = output_paths(args.out, len(records))
    for i, (record, path) in enumerate(zip(records, paths)):
        try:
            render(record, path, i, hide_pads=not args.show_pads,
                   cmap=args.cmap)
        except SchemaError as exc:
            print(exc, file=sys.stderr)
            return 1
        except OSError as exc:
            print(f"cannot write {path}: {exc}", file=sys.stderr)
            return 2
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
