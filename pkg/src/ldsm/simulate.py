"""Trajectory simulation: seeded Gaussian rollouts from a zero initial state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import RejectedInputError
from .systems import SymmetricDynamics, _check_seed

# Noise values are consumed strictly in step order, so drawing them in chunks
# of any size reproduces the same stream. Fixed here for reproducible output.
NOISE_CHUNK = 8192


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_T as rows of a read-only (T+1, N) array; x_0 is zero."""

    states: np.ndarray
    sigma: float
    n_obs: int
    seed: int

    @property
    def t_len(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n(self) -> int:
        return self.states.shape[1]


def noise_stream(seed: int) -> np.random.Generator:
    """Counter-based generator so distinct seeds give independent streams."""
    return np.random.Generator(np.random.Philox(_check_seed(seed)))


def rollout(d: SymmetricDynamics, t_len: int, seed: int) -> Trajectory:
    """Roll the recurrence x_t = A x_{t-1} + noise for t_len steps from x_0 = 0."""
    if t_len < 1:
        raise RejectedInputError(f"t_len must be at least 1, got {t_len}")
    rng = noise_stream(seed)
    n = d.n
    states = np.empty((t_len + 1, n))
    states[0] = 0.0
    x = np.zeros(n)
    pos = 1
    while pos <= t_len:
        count = min(NOISE_CHUNK, t_len + 1 - pos)
        buf = states[pos : pos + count]
        rng.standard_normal(out=buf)
        if d.sigma != 1.0:
            buf *= d.sigma
        _kernels.rollout_steps(d.a, x, buf)
        pos += count
    states.setflags(write=False)
    return Trajectory(states=states, sigma=d.sigma, n_obs=d.n_obs, seed=int(seed))


def observed_view(traj: Trajectory) -> np.ndarray:
    """Read-only column-prefix view holding the observed coordinates."""
    return traj.states[:, : traj.n_obs]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per time step, header t,x0,x1,..., full 17-digit precision."""
    states = traj.states
    with open(path, "w") as fh:
        fh.write("t," + ",".join(f"x{i}" for i in range(states.shape[1])) + "\n")
        for t in range(states.shape[0]):
            fh.write(f"{t}," + ",".join(f"{v:.17g}" for v in states[t]) + "\n")


def read_trajectory_csv(path) -> np.ndarray:
    """States array from a CSV produced by write_trajectory_csv."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[1] < 2 or np.isnan(data).any():
        raise RejectedInputError(f"{path} is not a trajectory CSV")
    return np.ascontiguousarray(data[:, 1:])
