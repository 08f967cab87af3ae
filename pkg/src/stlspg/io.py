"""Binary snapshot container and CSV exports.

Container layout (little-endian)::

    8 bytes   magic b"STLSPG\\x00\\x01"
    int64     number of rows
    int64     number of columns
    int64     parameter dimension p
    p float64 parameter values
    payload   rows*cols float64, column-major
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .time_integration import Trajectory

__all__ = [
    "MAGIC",
    "write_container",
    "read_container",
    "save_trajectory",
    "load_trajectory",
    "trajectory_to_csv",
    "convergence_to_csv",
    "spectrum_to_csv",
]

MAGIC = b"STLSPG\x00\x01"
_HEADER = struct.Struct("<qqq")


def write_container(path, array, mu=()):
    """Write a 2-D array (and an optional parameter vector) to ``path``."""
    a = np.asarray(array, dtype="<f8")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError("container holds 2-D arrays only")
    mu = np.atleast_1d(np.asarray(mu, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(a.shape[0], a.shape[1], mu.size))
        fh.write(mu.tobytes())
        fh.write(a.tobytes(order="F"))


def read_container(path):
    """Return ``(array, mu)`` from a container file."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a snapshot container")
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        rows, cols, p = _HEADER.unpack(head)
        if min(rows, cols, p) < 0:
            raise ValueError(f"{path}: corrupt header")
        mu = np.frombuffer(fh.read(8 * p), dtype="<f8")
        payload = fh.read()
    if len(payload) != 8 * rows * cols or mu.size != p:
        raise ValueError(f"{path}: payload size does not match header")
    a = np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F")
    return a.astype(float), mu.astype(float)


def save_trajectory(path, traj: Trajectory):
    write_container(path, traj.states, traj.mu)


def load_trajectory(path, times=None) -> Trajectory:
    states, mu = read_container(path)
    return Trajectory(states, mu, None if times is None else np.asarray(times, dtype=float))


def trajectory_to_csv(path, traj: Trajectory):
    """One row per time instance; first column is the time."""
    times = traj.times if traj.times is not None else np.arange(traj.states.shape[1], dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"w{i}" for i in range(traj.states.shape[0])])
        for n, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in traj.states[:, n]])


def convergence_to_csv(path, history):
    """Gauss-Newton history rows; columns follow the keys of the first row.

    Optimizer histories carry ``iteration, objective, grad_norm, step``.
    """
    cols = list(history[0]) if history else ["iteration", "objective", "grad_norm", "step"]

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.16e}"
        return str(v)

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for h in history:
            w.writerow([fmt(h.get(c)) for c in cols])


def spectrum_to_csv(path, singular_values):
    s = np.asarray(singular_values, dtype=float)
    energy = np.cumsum(s ** 2) / max(np.sum(s ** 2), np.finfo(float).tiny)
    Path(path).write_text(
        "index,singular_value,cumulative_energy\n"
        + "".join(f"{k + 1},{v:.16e},{e:.16e}\n" for k, (v, e) in enumerate(zip(s, energy))))
