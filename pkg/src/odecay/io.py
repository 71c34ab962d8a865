"""Trajectory files and JSON reports.

CSV trajectories have the header ``t,u,v,E`` and 17-significant-digit
floats, so values survive a write/read cycle bit for bit. JSON documents
share one layout: ``{"version", "config", "results", "verdict"}``.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .integrator import Status, Trajectory
from .model import ModelParams

CSV_HEADER = ("t", "u", "v", "E")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for t, (u, v), e in zip(traj.times, traj.states, traj.energies):
        buf.write(f"{_fmt(t)},{_fmt(u)},{_fmt(v)},{_fmt(e)}\n")
    return buf.getvalue()


def parse_trajectory_csv(text: str) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise ValueError(f"expected CSV header {','.join(CSV_HEADER)}")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float).reshape(-1, 4)
    return Trajectory(params=None, times=data[:, 0], states=data[:, 1:3], energies=data[:, 3])


def to_jsonable(obj):
    """Convert dataclasses, enums and numpy values into plain JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report(config: dict, results, verdict: dict) -> str:
    doc = {
        "version": __version__,
        "config": to_jsonable(config),
        "results": to_jsonable(results),
        "verdict": to_jsonable(verdict),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def trajectory_results(traj: Trajectory) -> dict:
    return {
        "status": traj.status.value,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "t": traj.times,
        "u": traj.u,
        "v": traj.v,
        "E": traj.energies,
    }


def parse_trajectory_json(text: str) -> Trajectory:
    doc = json.loads(text)
    res = doc["results"]
    cfg = doc.get("config", {})
    params = None
    if "alpha" in cfg and "beta" in cfg:
        params = ModelParams(cfg["alpha"], cfg["beta"])
    states = np.column_stack([res["u"], res["v"]])
    return Trajectory(
        params=params,
        times=res["t"],
        states=states,
        energies=res["E"],
        accepted_steps=res.get("accepted_steps", 0),
        rejected_steps=res.get("rejected_steps", 0),
        status=Status(res.get("status", Status.COMPLETED.value)),
    )


def read_trajectory(path: str | os.PathLike) -> Trajectory:
    """Load a trajectory written by ``simulate`` (CSV or JSON, by content)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_trajectory_json(text)
    return parse_trajectory_csv(text)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
