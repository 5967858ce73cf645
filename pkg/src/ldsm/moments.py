"""Lag-moment estimators for symmetric stable linear dynamics.

The core object is the debiased lag-m cross moment of a state sequence: the
lag-m empirical cross covariance minus the lag-(m+2) one, whose expectation
is sigma^2 A^m up to an O(1/T) remainder with an exact closed form. Restricted
to observed coordinates the same expression feeds the block estimators for the
partially observed setting, together with executable sample-size bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError, InsufficientDataError, RejectedInputError
from .linalg import sym_eigen
from .systems import SymmetricDynamics

SIGMA2_FLOOR = 1e-12

# smallest usable T for each block estimator (m = 0..3 plus the debiasing lag)
T_FLOOR_SIGMA2 = 6
T_FLOOR_B = 6
T_FLOOR_CCT = 8
T_FLOOR_CECT = 10


@dataclass(frozen=True)
class MomentEstimate:
    """One debiased lag-m moment matrix with the sample size that produced it."""

    order_m: int
    t_used: int
    s_hat: np.ndarray


@dataclass(frozen=True)
class PartialBlockEstimates:
    """Noise level and block reconstructions from an observed-coordinate view.

    Blocks whose minimum-T floor was not met are None rather than garbage.
    """

    sigma2_hat: float
    b_hat: np.ndarray
    cct_hat: np.ndarray | None
    cect_hat: np.ndarray | None


@dataclass(frozen=True)
class SampleBound:
    """Trajectory length sufficient for a max-norm guarantee at (epsilon, delta)."""

    epsilon: float
    delta: float
    t_required: int


def lag_moment(states, m: int, symmetrize: bool = False) -> MomentEstimate:
    """Debiased lag-m cross moment of a state sequence.

    states has one row per time step (the first row is the zero initial
    state); both the full state and an observed-coordinate view are accepted,
    the latter giving the observed sub-block exactly. The estimate is left
    asymmetric at finite T unless symmetrize is set.
    """
    x = np.asarray(states, dtype=np.float64)
    if x.ndim != 2:
        raise RejectedInputError(f"states must be 2-D, got shape {x.shape}")
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise RejectedInputError(f"lag must be a non-negative integer, got {m!r}")
    m = int(m)
    t = x.shape[0]
    if t < m + 3:
        raise InsufficientDataError(
            f"lag {m} needs at least {m + 3} steps, got {t}", required=m + 3
        )
    s = x[: t - m].T @ x[m:] / (t - m) - x[: t - m - 2].T @ x[m + 2 :] / (t - m - 2)
    if symmetrize:
        s = 0.5 * (s + s.T)
    return MomentEstimate(order_m=m, t_used=t, s_hat=s)


def _eigen_apply(d: SymmetricDynamics, fn) -> np.ndarray:
    spec = sym_eigen(d.a)
    lam = spec.eigenvalues
    if np.max(np.abs(lam)) >= 1.0:
        raise RejectedInputError("state matrix must have spectral radius below 1")
    q = spec.eigenvectors
    return (q * fn(lam)) @ q.T


def moment_bias(d: SymmetricDynamics, m: int, t_len: int) -> np.ndarray:
    """Exact finite-T bias of the lag-m moment, evaluated in the eigenbasis.

    Decays as O(1/T); equals -sigma^2 I / T at A = 0 and m = 0.
    """
    if m < 0 or t_len < m + 3:
        raise RejectedInputError(f"need t_len >= m + 3, got m={m}, t_len={t_len}")
    tm = t_len - m
    tm2 = t_len - m - 2
    s2 = d.sigma**2

    def f(lam):
        denom = (1.0 - lam**2) ** 2
        first = lam**m * (lam ** (2 * tm) - 1.0) / (tm * denom)
        second = lam ** (m + 2) * (lam ** (2 * tm2) - 1.0) / (tm2 * denom)
        return s2 * (first - second)

    return _eigen_apply(d, f)


def state_cross_cov(d: SymmetricDynamics, t: int, s: int) -> np.ndarray:
    """Closed-form E[x_t x_s^T] for s >= t, from the zero initial state."""
    if not 0 <= t <= s:
        raise RejectedInputError(f"need 0 <= t <= s, got t={t}, s={s}")
    s2 = d.sigma**2

    def f(lam):
        return s2 * lam ** (s - t) * (1.0 - lam ** (2 * t)) / (1.0 - lam**2)

    return _eigen_apply(d, f)


def _log_factor(delta: float, n: int) -> float:
    return (1.0 + 2.0 * math.sqrt(math.log(2.0 * n * n / delta))) ** 2


def sample_size_bound(
    epsilon: float, delta: float, sigma: float, rho: float, m: int, n: int
) -> SampleBound:
    """Trajectory length after which the lag-m moment is within epsilon of
    sigma^2 A^m in max norm with probability 1 - delta."""
    if not 0.0 <= rho < 1.0:
        raise RejectedInputError(f"rho must lie in [0, 1), got {rho}")
    if not 0.0 < delta < 1.0:
        raise RejectedInputError(f"delta must lie in (0, 1), got {delta}")
    if sigma <= 0.0 or n < 1 or m < 0:
        raise RejectedInputError("sigma must be positive, n >= 1, m >= 0")
    eps_max = 4.0 * sigma**2 / (1.0 - rho) ** 2
    if not 0.0 < epsilon < eps_max:
        raise RejectedInputError(
            f"epsilon must lie in (0, {eps_max:g}) for sigma={sigma}, rho={rho}; got {epsilon}"
        )
    first = 64.0 * sigma**4 * _log_factor(delta, n) / (epsilon**2 * (1.0 - rho) ** 4)
    return SampleBound(
        epsilon=float(epsilon),
        delta=float(delta),
        t_required=int(math.ceil(max(first, 2.0 * (m + 2)))),
    )


def block_sample_size_bounds(
    epsilon: float, delta: float, sigma: float, rho: float, n: int
) -> tuple[int, int, int]:
    """Trajectory lengths sufficient for the three block estimators.

    Returned in order: (noise level and observed block, observed-hidden
    product block, hidden-sandwich block).
    """
    if not 0.0 <= rho < 1.0:
        raise RejectedInputError(f"rho must lie in [0, 1), got {rho}")
    if not 0.0 < delta < 1.0:
        raise RejectedInputError(f"delta must lie in (0, 1), got {delta}")
    if sigma <= 0.0 or n < 1:
        raise RejectedInputError("sigma must be positive and n >= 1")
    eps_max = sigma**2 / 2.0
    if not 0.0 < epsilon < eps_max:
        raise RejectedInputError(
            f"epsilon must lie in (0, {eps_max:g}) for sigma={sigma}; got {epsilon}"
        )
    kappa = max(64.0 * sigma**2, 32.0**2)
    base = kappa * _log_factor(delta, n) / (epsilon**2 * (1.0 - rho) ** 4)
    t_b = int(math.ceil(max(base, T_FLOOR_B)))
    t_cct = int(math.ceil(max(20.0**2 * n**2 * base, T_FLOOR_CCT)))
    t_cect = int(math.ceil(max(140.0**2 * n**4 * base, T_FLOOR_CECT)))
    return t_b, t_cct, t_cect


def block_estimates(obs_states) -> PartialBlockEstimates:
    """Block reconstructions from the observed-coordinate view.

    Divides by the estimated noise level exactly as defined (no clipping);
    a vanishing noise estimate is an explicit error state. Blocks whose
    minimum-T floor is unmet come back as None.
    """
    x = np.asarray(obs_states, dtype=np.float64)
    if x.ndim != 2:
        raise RejectedInputError(f"states must be 2-D, got shape {x.shape}")
    t, n_o = x.shape
    if t < T_FLOOR_SIGMA2:
        raise InsufficientDataError(
            f"block estimates need at least {T_FLOOR_SIGMA2} steps, got {t}",
            required=T_FLOOR_SIGMA2,
        )
    sigma2 = float(np.trace(lag_moment(x, 0).s_hat)) / n_o
    if sigma2 <= SIGMA2_FLOOR:
        raise DegenerateVarianceError(
            f"estimated noise variance {sigma2:g} is at or below {SIGMA2_FLOOR:g}"
        )
    b = lag_moment(x, 1).s_hat / sigma2
    cct = None
    cect = None
    if t >= T_FLOOR_CCT:
        cct = lag_moment(x, 2).s_hat / sigma2 - b @ b
    if t >= T_FLOOR_CECT:
        cect = lag_moment(x, 3).s_hat / sigma2 - b @ b @ b - cct @ b - b @ cct
    return PartialBlockEstimates(sigma2_hat=sigma2, b_hat=b, cct_hat=cct, cect_hat=cect)


def write_matrix_csv(m: np.ndarray, path) -> None:
    """Sparse-friendly triplet dump: header i,j,value, one row per entry."""
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("i,j,value\n")
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                fh.write(f"{i},{j},{m[i, j]:.17g}\n")


def write_matrix_json(m: np.ndarray, path) -> None:
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w") as fh:
        json.dump(
            {"rows": m.shape[0], "cols": m.shape[1], "entries": [float(v) for v in m.ravel()]},
            fh,
        )
