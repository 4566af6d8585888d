"""CSV/JSON writers.  Numbers are written with ``repr`` so files round-trip bit-exactly."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FIELD_COLUMNS = ("t", "x", "rho", "u", "v", "Q", "p", "p_g", "p_v", "F_mean", "mask")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(o):
    if isinstance(o, float) and not np.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite(json.loads(json.dumps(obj, default=_json_default))), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def write_snapshots(path, result) -> Path:
    def rows():
        for t, psi in result.snapshots:
            for x, z in zip(psi.grid.nodes, psi.values):
                yield t, x, z.real, z.imag

    return write_rows(path, ("t", "x", "re_psi", "im_psi"), rows())


def write_fields(path, fields_list) -> Path:
    def rows():
        for f in fields_list:
            cols = (f.rho, f.u, f.v, f.bohm_Q, f.p_total, f.p_gas, f.p_vacuum, f.force_local)
            arrays = [c.values for c in cols]
            for j, x in enumerate(f.grid.nodes):
                yield (f.time, x, *(a[j] for a in arrays), bool(f.valid[j]))

    return write_rows(path, FIELD_COLUMNS, rows())


def write_ladder(path, report, cfg) -> Path:
    return write_rows(path, ("k", "lhs", "rhs", "residual"), report.ladder_table(cfg))


def write_law_report(out_dir, report, n_trajectories: int = 100):
    out_dir = Path(out_dir)
    stem = report.law.value
    paths = [write_json(out_dir / f"{stem}_report.json", report.to_dict())]
    paths.append(
        write_rows(
            out_dir / f"{stem}_series.csv",
            ("t", "l1_error", "x1_ensemble", "x1_solver", "x2_ensemble", "x2_solver", "x2_standard_error"),
            report.time_series_rows(),
        )
    )
    traj = report.trajectories[:, :n_trajectories]
    header = ("t",) + tuple(f"x{i}" for i in range(traj.shape[1]))
    paths.append(
        write_rows(out_dir / f"{stem}_trajectories.csv", header, ((t, *row) for t, row in zip(report.trajectory_times, traj)))
    )
    return paths


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
