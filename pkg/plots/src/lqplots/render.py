# render.py
"""Render comparison and history figures from documented CSV schemas.

Comparison CSVs pair truth and prediction per variable:
``t,true_x1,pred_x1,...``. History CSVs carry per-epoch losses:
``epoch,train_mse,val_mse``. Nothing here imports the model-learning
package; the CSV schemas are the only coupling.
"""

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRUE_STYLE = {"color": "red", "linestyle": "-", "linewidth": 1.2}
LEARNED_STYLE = {"color": "cyan", "linestyle": "--", "linewidth": 1.2}

_LOSS_FLOOR = 1e-16


class MissingColumn(ValueError):
    """A requested or required CSV column is absent."""


class OutputExists(FileExistsError):
    """The output path exists and --force was not given."""


def read_csv_columns(path):
    """Read a headered numeric CSV into {column_name: ndarray}."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file")
        rows = [[float(v) for v in row] for row in reader if row]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows")
    data = np.asarray(rows)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return {name: data[:, k] for k, name in enumerate(header)}


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: input comparison CSV, variable subset, output path."""

    csv_path: str
    output_path: str
    variables: tuple = field(default=())   # empty = all variables found
    title: str = ""
    force: bool = False
    svg: bool = False


def _comparison_variables(columns):
    """Variable names x1..xn present as true_/pred_ pairs, in order."""
    names = []
    for key in columns:
        if key.startswith("true_"):
            var = key[len("true_"):]
            if f"pred_{var}" in columns:
                names.append(var)
    return names


def _save(fig, output_path, force, svg):
    out = Path(output_path)
    if out.exists() and not force:
        raise OutputExists(f"{out} exists; pass --force to overwrite")
    kwargs = {"dpi": 110}
    if svg or out.suffix.lower() == ".svg":
        # Drop the creation date so identical inputs give identical bytes.
        kwargs = {"metadata": {"Date": None}}
    else:
        kwargs["metadata"] = {"Software": "lqplots"}
    fig.savefig(out, **kwargs)
    plt.close(fig)
    return out


def render_comparison(spec):
    """One panel per variable, truth solid red and learned dashed cyan.

    Raises
    ------
    MissingColumn
        If the time column, a requested variable, or its pair column is
        absent (the message names the column).
    OutputExists
        If the output path exists and force is not set.
    """
    columns = read_csv_columns(spec.csv_path)
    if "t" not in columns:
        raise MissingColumn(f"{spec.csv_path}: missing column 't'")
    available = _comparison_variables(columns)
    wanted = list(spec.variables) if spec.variables else available
    if not wanted:
        raise MissingColumn(
            f"{spec.csv_path}: no true_*/pred_* column pairs found")
    for var in wanted:
        for col in (f"true_{var}", f"pred_{var}"):
            if col not in columns:
                raise MissingColumn(
                    f"{spec.csv_path}: missing column '{col}'")

    t = columns["t"]
    k = len(wanted)
    if k == 1:
        ncols, nrows = 1, 1
    else:
        ncols = 2 if k <= 4 else 3
        nrows = -(-k // ncols)
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             figsize=(4.2 * ncols, 2.6 * nrows),
                             sharex=True)
    for idx, var in enumerate(wanted):
        ax = axes[idx // ncols][idx % ncols]
        ax.plot(t, columns[f"true_{var}"], label="true", **TRUE_STYLE)
        ax.plot(t, columns[f"pred_{var}"], label="learned",
                **LEARNED_STYLE)
        ax.set_ylabel(var)
        if idx == 0:
            ax.legend(loc="best", fontsize=8)
    for idx in range(k, nrows * ncols):
        axes[idx // ncols][idx % ncols].axis("off")
    for ax in axes[-1]:
        ax.set_xlabel("t")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, spec.output_path, spec.force, spec.svg)


def render_history(csv_path, output_path, force=False, svg=False):
    """Log-scale train/validation loss curves from a history CSV.

    A missing validation column degrades to a train-only plot with a
    warning; a malformed header raises MissingColumn.
    """
    columns = read_csv_columns(csv_path)
    for col in ("epoch", "train_mse"):
        if col not in columns:
            raise MissingColumn(f"{csv_path}: missing column '{col}'")
    has_val = "val_mse" in columns
    if not has_val:
        warnings.warn(f"{csv_path}: no val_mse column, plotting train only")

    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    epochs = columns["epoch"]
    ax.semilogy(epochs, np.maximum(columns["train_mse"], _LOSS_FLOOR),
                label="train", color="tab:blue")
    if has_val:
        ax.semilogy(epochs, np.maximum(columns["val_mse"], _LOSS_FLOOR),
                    label="validation", color="tab:orange",
                    linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, output_path, force, svg)
