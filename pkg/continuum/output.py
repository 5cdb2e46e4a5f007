import csv
import logging
from pathlib import Path

import numpy as np

from .grid import Grid1D, WaveFunction
from .solvers import TRAJECTORY_COLUMNS

logger = logging.getLogger(__name__)

SNAPSHOT_DTYPE = np.dtype("<f8")


def write_trajectory_csv(path, trajectory):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory.rows():
            writer.writerow([repr(value) for value in row])
    logger.info("trajectory table written to %s", path)
    return path


def write_snapshots(path, trajectory, every=1):
    """
    Binary dump of ψ snapshots, little-endian float64 throughout.

    Header: L, m, count, then the count snapshot times. Payload: for every
    snapshot, m (re, im) pairs.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    picked = list(range(0, len(trajectory.waves), every))
    grid = trajectory.waves[0].grid
    header = [grid.length, grid.points, len(picked)] + [trajectory.times[i] for i in picked]
    payload = np.stack([trajectory.waves[i].psi for i in picked])
    with path.open("wb") as handle:
        np.asarray(header, dtype=SNAPSHOT_DTYPE).tofile(handle)
        np.column_stack([payload.real.ravel(), payload.imag.ravel()]).astype(SNAPSHOT_DTYPE).tofile(handle)
    return path


def read_snapshots(path):
    """(times, waves) from a snapshot dump."""
    values = np.fromfile(Path(path), dtype=SNAPSHOT_DTYPE)
    length, points, count = values[0], int(values[1]), int(values[2])
    times = values[3:3 + count].tolist()
    pairs = values[3 + count:]
    if pairs.size != count * points * 2:
        raise ValueError(f"snapshot file {path} is truncated")
    pairs = pairs.reshape(count, points, 2)
    grid = Grid1D(length, points)
    return times, [WaveFunction(grid, p[:, 0] + 1j * p[:, 1]) for p in pairs]
