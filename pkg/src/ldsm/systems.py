"""Ground-truth system constructors and the observed/hidden block split.

Systems pair a symmetric stable state matrix with a noise level and a count of
observed coordinates. Observed coordinates are always the index prefix
0..n_obs-1; callers wanting a different observation set permute first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError
from .linalg import SYMMETRY_TOL, as_matrix, max_norm, spectral_radius

RHO_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SymmetricDynamics:
    """Symmetric state matrix with spectral radius below one.

    n_obs is the number of observed coordinates (n_obs == n means fully
    observed). sigma is the per-coordinate noise standard deviation; zero is
    accepted for diagnostic use but estimators require it positive.
    """

    a: np.ndarray
    sigma: float = 1.0
    n_obs: int | None = None
    rho: float = field(init=False)

    def __post_init__(self):
        a = as_matrix(self.a, "state matrix")
        if a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise RejectedInputError(f"state matrix must be square and non-empty, got {a.shape}")
        if max_norm(a - a.T) > SYMMETRY_TOL:
            raise RejectedInputError("state matrix must be symmetric within 1e-12")
        rho = spectral_radius(a)
        if rho >= 1.0:
            raise RejectedInputError(f"spectral radius must be below 1, got {rho}")
        if not (self.sigma >= 0.0 and np.isfinite(self.sigma)):
            raise RejectedInputError(f"sigma must be a finite non-negative real, got {self.sigma}")
        n_obs = a.shape[0] if self.n_obs is None else int(self.n_obs)
        if not 1 <= n_obs <= a.shape[0]:
            raise RejectedInputError(f"n_obs must lie in [1, {a.shape[0]}], got {n_obs}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "n_obs", n_obs)
        object.__setattr__(self, "rho", float(rho))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.n - self.n_obs


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise RejectedInputError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def random_2regular(n: int, seed: int, sigma: float = 1.0, n_obs: int | None = None) -> SymmetricDynamics:
    """Random 2-regular simple graph (a cycle cover), scaled by 1/3.

    Sampled by drawing random permutations and keeping the first whose cycle
    decomposition has no cycle shorter than 3; each cycle becomes a ring of
    edges. Entries are 0 or 1/3 with zero diagonal, so the spectral radius is
    exactly 2/3.
    """
    if n < 3:
        raise RejectedInputError(f"a 2-regular simple graph needs n >= 3, got {n}")
    rng = np.random.default_rng(_check_seed(seed))
    while True:
        perm = rng.permutation(n)
        cycles = _permutation_cycles(perm)
        if min(len(c) for c in cycles) >= 3:
            break
    a = np.zeros((n, n))
    for cycle in cycles:
        for u in cycle:
            v = perm[u]
            a[u, v] = 1.0 / 3.0
            a[v, u] = 1.0 / 3.0
    return SymmetricDynamics(a=a, sigma=sigma, n_obs=n_obs)


def _permutation_cycles(perm: np.ndarray) -> list[list[int]]:
    seen = np.zeros(len(perm), dtype=bool)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cycle = []
        u = start
        while not seen[u]:
            seen[u] = True
            cycle.append(u)
            u = int(perm[u])
        cycles.append(cycle)
    return cycles


def dense_star(n: int, sigma: float = 1.0, n_obs: int | None = None) -> SymmetricDynamics:
    """Hub-and-spokes matrix: hub self-weight 1/sqrt(5), spokes 1/sqrt(2n).

    Every node couples to the hub (coordinate 0), all other entries are zero,
    which keeps the spectral radius below one at any size.
    """
    if n < 2:
        raise RejectedInputError(f"the star construction needs n >= 2, got {n}")
    a = np.zeros((n, n))
    a[0, 0] = 1.0 / np.sqrt(5.0)
    a[0, 1:] = 1.0 / np.sqrt(2.0 * n)
    a[1:, 0] = 1.0 / np.sqrt(2.0 * n)
    return SymmetricDynamics(a=a, sigma=sigma, n_obs=n_obs)


def random_stable(
    n: int, target_rho: float, seed: int, sigma: float = 1.0, n_obs: int | None = None
) -> SymmetricDynamics:
    """Symmetrized Gaussian matrix rescaled to the requested spectral radius."""
    if not 0.0 < target_rho < 1.0:
        raise RejectedInputError(f"target spectral radius must lie in (0, 1), got {target_rho}")
    if n < 1:
        raise RejectedInputError(f"n must be positive, got {n}")
    rng = np.random.default_rng(_check_seed(seed))
    g = rng.standard_normal((n, n))
    s = 0.5 * (g + g.T)
    rho0 = spectral_radius(s)
    if rho0 <= 0.0:
        raise RejectedInputError("drawn matrix has zero spectral radius; use another seed")
    return SymmetricDynamics(a=s * (target_rho / rho0), sigma=sigma, n_obs=n_obs)


def partition(d: SymmetricDynamics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Observed/hidden blocks (B, C, E) of the state matrix.

    B is observed-observed, C couples observed to hidden, E is hidden-hidden.
    Reassembling [[B, C], [C.T, E]] reproduces the matrix exactly.
    """
    k = d.n_obs
    a = d.a
    return a[:k, :k].copy(), a[:k, k:].copy(), a[k:, k:].copy()


def to_json_dict(d: SymmetricDynamics) -> dict:
    return {
        "n": d.n,
        "sigma": d.sigma,
        "n_obs": d.n_obs,
        "entries": [float(v) for v in d.a.ravel()],
    }


def from_json_dict(obj: dict) -> SymmetricDynamics:
    try:
        n = int(obj["n"])
        sigma = float(obj["sigma"])
        n_obs = int(obj["n_obs"])
        entries = np.asarray(obj["entries"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise RejectedInputError(f"malformed system document: {exc}") from exc
    if entries.size != n * n:
        raise RejectedInputError(f"entries length {entries.size} does not match n={n}")
    return SymmetricDynamics(a=entries.reshape(n, n), sigma=sigma, n_obs=n_obs)


def save_json(d: SymmetricDynamics, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(d), fh)


def load_json(path) -> SymmetricDynamics:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
