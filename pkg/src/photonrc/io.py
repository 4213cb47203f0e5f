"""CSV interchange.

All files are UTF-8, comma separated, minimal RFC 4180 quoting, ``\\n`` line
endings, dot decimal separator. Floats are written with ``repr`` (shortest
round-trip form), so rewriting the same numbers gives the same bytes.

Schemas
-------
states        ``<index>,node0,...,node{N-1}`` with ``<index>`` = ``input``
trajectory    ``time,x``
weights       ``node0,...,node{N-1}[,bias]``, one row per output
metrics       ``task,kind,seed,n_nodes,params,ridge_lambda,train_nmse,test_nmse,mc_total``
tolerance     ``sigma,median_nmse,n_seeds``
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import ParameterError, StateMatrix, TimeSeries
from .readout import ReadoutWeights

METRIC_COLUMNS = (
    "task",
    "kind",
    "seed",
    "n_nodes",
    "params",
    "ridge_lambda",
    "train_nmse",
    "test_nmse",
    "mc_total",
)
TOLERANCE_COLUMNS = ("sigma", "median_nmse", "n_seeds")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_rows(path, header, rows) -> Path:
    return atomic_write_text(path, rows_to_csv(header, rows))


def states_csv(states: StateMatrix, index_name: str = "input") -> str:
    header = [index_name] + [f"node{i}" for i in range(states.n_nodes)]
    return rows_to_csv(header, ([int(i), *row] for i, row in zip(states.index, states.values)))


def trajectory_csv(traj: TimeSeries) -> str:
    cols = ["x"] if traj.width == 1 else [f"x{i}" for i in range(traj.width)]
    return rows_to_csv(["time", *cols], ([t, *row] for t, row in zip(traj.times, traj.values)))


def read_states_csv(path) -> StateMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ParameterError(f"{path}: no data rows")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return StateMatrix(data[:, 1:], data[:, 0].astype(int))


def weights_csv(w: ReadoutWeights) -> str:
    header = [f"node{i}" for i in range(w.n_nodes)] + (["bias"] if w.bias else [])
    return rows_to_csv(header, w.w_out.tolist())


def write_weights(path, w: ReadoutWeights) -> Path:
    return atomic_write_text(path, weights_csv(w))


def read_weights(path, kind: str = "real", alphabet=(0.0, 1.0)) -> ReadoutWeights:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ParameterError(f"{path}: no weight rows")
    bias = rows[0][-1] == "bias"
    return ReadoutWeights(np.array([[float(v) for v in r] for r in rows[1:]]), kind, bias, alphabet)


def metrics_csv(records: list[dict]) -> str:
    return rows_to_csv(METRIC_COLUMNS, ([rec.get(c, "") for c in METRIC_COLUMNS] for rec in records))


def append_metrics(path, records: list[dict]) -> None:
    """Append records to a results file, writing the header if it is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    text = metrics_csv(records)
    if not new:
        text = text.split("\n", 1)[1]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        fh.write(text)
