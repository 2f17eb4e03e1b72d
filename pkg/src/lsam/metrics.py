"""Metrics streams, CSV persistence and CSV-derived run summaries."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

METRIC_COLUMNS = (
    "t", "wall_ns", "f_val", "grad_norm_sq", "G_norm_sq", "z_norm_sq", "phi", "sync_flag", "worker_id",
)
_FLOATS = ("f_val", "grad_norm_sq", "G_norm_sq", "z_norm_sq", "phi")

FULL_RESOLUTION_UNTIL = 1000
DOWNSAMPLE_EVERY = 10


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    wall_ns: int
    f_val: float
    grad_norm_sq: float
    G_norm_sq: float
    z_norm_sq: float
    phi: float
    sync_flag: bool
    worker_id: int


class MetricsLog:
    """Append-only event stream; ``t`` is the event index.

    Float fields may be arrays when the run carries replicas; use
    :meth:`replica` to get a scalar stream.
    """

    def __init__(self):
        self._rows: dict[str, list] = {k: [] for k in METRIC_COLUMNS}

    def __len__(self):
        return len(self._rows["t"])

    def append(self, wall_ns, f_val, grad_norm_sq, G_norm_sq, z_norm_sq, phi, sync_flag=False, worker_id=-1):
        r = self._rows
        r["t"].append(len(r["t"]))
        r["wall_ns"].append(int(wall_ns))
        r["f_val"].append(f_val)
        r["grad_norm_sq"].append(grad_norm_sq)
        r["G_norm_sq"].append(G_norm_sq)
        r["z_norm_sq"].append(z_norm_sq)
        r["phi"].append(phi)
        r["sync_flag"].append(bool(sync_flag))
        r["worker_id"].append(int(worker_id))

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self._rows[name])

    def columns(self) -> dict[str, np.ndarray]:
        return {k: self.column(k) for k in METRIC_COLUMNS}

    def replica(self, i: int) -> "MetricsLog":
        out = MetricsLog()
        for k in METRIC_COLUMNS:
            vals = self._rows[k]
            out._rows[k] = [float(np.asarray(v)[i]) for v in vals] if k in _FLOATS else list(vals)
        return out

    def records(self) -> Iterator[MetricsRecord]:
        r = self._rows
        for i in range(len(self)):
            yield MetricsRecord(
                r["t"][i], r["wall_ns"][i], *(float(r[k][i]) for k in _FLOATS),
                r["sync_flag"][i], r["worker_id"][i],
            )

    @classmethod
    def from_chain(cls, run) -> "MetricsLog":
        """Stream for a single-replica dual-loop run; ``wall_ns`` is the logical step clock."""
        log = cls()
        cols = [getattr(run, k) for k in _FLOATS]
        for t in range(run.T):
            log.append(t, *(float(c[t]) for c in cols))
        return log


def keep_row(rec: MetricsRecord) -> bool:
    return rec.t < FULL_RESOLUTION_UNTIL or rec.t % DOWNSAMPLE_EVERY == 0 or rec.sync_flag


def _fmt(rec: MetricsRecord) -> list[str]:
    return [
        str(rec.t), str(rec.wall_ns), *(repr(float(getattr(rec, k))) for k in _FLOATS),
        "1" if rec.sync_flag else "0", str(rec.worker_id),
    ]


def write_csv(path: str | Path, records: Iterable[MetricsRecord], downsample: bool = True) -> list[MetricsRecord]:
    """Write the header plus (downsampled) rows; returns the rows written."""
    kept = [r for r in records if not downsample or keep_row(r)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in kept:
        w.writerow(_fmt(r))
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return kept


def read_csv(path: str | Path) -> list[MetricsRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != METRIC_COLUMNS:
        raise ValueError(f"unexpected CSV header {rows[0]}")
    out = []
    for row in rows[1:]:
        out.append(MetricsRecord(
            int(row[0]), int(row[1]), *(float(v) for v in row[2:7]), row[7] == "1", int(row[8]),
        ))
    return out


def loglog_slope(t: np.ndarray, v: np.ndarray) -> float:
    """Least-squares slope of ``log v`` against ``log t`` over positive entries."""
    mask = (t > 0) & (v > 0) & np.isfinite(v)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[mask]), np.log(v[mask]), 1)[0])


def summarize(records: list[MetricsRecord]) -> dict:
    """Statistics of a written stream; depends on the rows only.

    Averages are over the logged rows.  Slopes are fitted on the second
    half of the non-sync rows, against ``t + 1``.
    """
    if not records:
        return {"rows": 0}
    t = np.array([r.t for r in records], dtype=float)
    sync = np.array([r.sync_flag for r in records])
    col = {k: np.array([getattr(r, k) for r in records]) for k in _FLOATS}
    work = ~sync if (~sync).any() else np.ones_like(sync)
    idx = np.flatnonzero(work)
    tail = idx[len(idx) // 2:]
    last = records[-1]
    return {
        "rows": len(records),
        "final_t": last.t,
        "final_f_val": float(col["f_val"][-1]),
        "min_f_val": float(col["f_val"].min()),
        "mean_G_norm_sq": float(col["G_norm_sq"][work].mean()),
        "mean_z_norm_sq": float(col["z_norm_sq"][work].mean()),
        "mean_grad_norm_sq": float(col["grad_norm_sq"][work].mean()),
        "final_grad_norm_sq": float(col["grad_norm_sq"][-1]),
        "sync_events": int(sync.sum()),
        "slope_G_norm_sq": loglog_slope(t[tail] + 1, col["G_norm_sq"][tail]),
        "slope_z_norm_sq": loglog_slope(t[tail] + 1, col["z_norm_sq"][tail]),
    }


def write_summary(path: str | Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
