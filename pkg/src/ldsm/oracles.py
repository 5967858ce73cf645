"""Exact dense constructions used as independent test oracles.

These deliberately slow, explicit builds exist to falsify the fast estimator
paths: the stacked noise-to-state map whose Gram gives the law of a whole
trajectory, the quadratic-form matrix reproducing single moment entries, and
scalar bounds on the spectrum and deviation probability of those forms. A
size guard keeps every construction at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OracleScaleError, RejectedInputError
from .linalg import require_symmetric, sym_eigen
from .moments import lag_moment, state_cross_cov
from .simulate import rollout
from .systems import SymmetricDynamics, random_stable

DIM_CAP = 4096


@dataclass(frozen=True)
class StackedSystem:
    """Block lower-triangular map from stacked noise to stacked states x_1..x_{T-1}."""

    l: np.ndarray
    t_len: int
    n: int


def stacked_noise_map(d: SymmetricDynamics, t_len: int) -> StackedSystem:
    """Explicit (n(T-1)) x (n(T-1)) map with A^(r-c) in block (r, c), r >= c."""
    if t_len < 2:
        raise RejectedInputError(f"need t_len >= 2, got {t_len}")
    n = d.n
    blocks = t_len - 1
    dim = n * blocks
    if dim > DIM_CAP:
        raise OracleScaleError(f"oracle dimension {dim} exceeds the cap {DIM_CAP}")
    powers = [np.eye(n)]
    for _ in range(blocks - 1):
        powers.append(powers[-1] @ d.a)
    l = np.zeros((dim, dim))
    for r in range(blocks):
        for c in range(r + 1):
            l[r * n : (r + 1) * n, c * n : (c + 1) * n] = powers[r - c]
    return StackedSystem(l=l, t_len=t_len, n=n)


def quadratic_form_matrix(i: int, j: int, m: int, t_len: int, n: int) -> np.ndarray:
    """Symmetric block-banded G with X.T G X equal to entry (i, j) of the
    debiased lag-m moment, X stacking x_1..x_{T-1}.

    The moment's sums start at the zero initial state, which contributes
    nothing; the t = 0 terms are therefore dropped here while the 1/(T-m) and
    1/(T-m-2) weights keep their full-count denominators.
    """
    if t_len < m + 3 or m < 0:
        raise RejectedInputError(f"need t_len >= m + 3, got m={m}, t_len={t_len}")
    if not (0 <= i < n and 0 <= j < n):
        raise RejectedInputError(f"indices ({i}, {j}) out of range for n={n}")
    blocks = t_len - 1
    dim = n * blocks
    if dim > DIM_CAP:
        raise OracleScaleError(f"oracle dimension {dim} exceeds the cap {DIM_CAP}")
    g = np.zeros((dim, dim))
    for lag, coeff in ((m, 0.5 / (t_len - m)), (m + 2, -0.5 / (t_len - m - 2))):
        for t in range(1, t_len - lag):
            row = (t - 1) * n + i
            col = (t + lag - 1) * n + j
            g[row, col] += coeff
            g[col, row] += coeff
    return g


def radius_bound(rho: float, m: int, t_len: int) -> float:
    """Upper bound on the spectral radius of L.T G L for any entry pair."""
    if t_len < m + 3 or m < 0:
        raise RejectedInputError(f"need t_len >= m + 3, got m={m}, t_len={t_len}")
    if not 0.0 <= rho < 1.0:
        raise RejectedInputError(f"rho must lie in [0, 1), got {rho}")
    return (1.0 / (t_len - m) + 1.0 / (t_len - m - 2)) / (1.0 - rho) ** 2


def logdet_trace_pair(h, k_terms: int) -> tuple[float, float]:
    """(-log det(I - H), truncated trace series) computed by two routes.

    The left side comes from the eigenvalues, the right side from explicit
    matrix powers, so agreement cross-checks both. All eigenvalue magnitudes
    must be below one. The truncation error is at most
    n * r^(k+1) / ((k+1)(1-r)) with r the largest magnitude.
    """
    h = require_symmetric(h, name="h")
    if k_terms < 1:
        raise RejectedInputError(f"k_terms must be positive, got {k_terms}")
    lam = sym_eigen(h).eigenvalues
    if np.max(np.abs(lam)) >= 1.0:
        raise RejectedInputError("all eigenvalue magnitudes must be below 1")
    lhs = -float(np.sum(np.log1p(-lam)))
    power = np.eye(h.shape[0])
    rhs = 0.0
    for k in range(1, k_terms + 1):
        power = power @ h
        rhs += float(np.trace(power)) / k
    return lhs, rhs


def deviation_probability_bound(
    epsilon: float, sigma: float, radius_bound: float, t_len: int, rho: float | None = None
) -> float:
    """Tail bound on a single moment entry deviating from its mean by epsilon.

    Returned uncapped (it exceeds 1, hence is vacuous, for small T). When rho
    is given the admissible epsilon range is enforced; otherwise the caller
    is responsible for it.
    """
    if epsilon <= 0.0 or sigma <= 0.0 or radius_bound <= 0.0 or t_len < 1:
        raise RejectedInputError("epsilon, sigma, radius_bound must be positive and t_len >= 1")
    if rho is not None:
        eps_max = 4.0 * sigma**2 / (1.0 - rho) ** 2
        if epsilon >= eps_max:
            raise RejectedInputError(
                f"epsilon must lie in (0, {eps_max:g}) for sigma={sigma}, rho={rho}; got {epsilon}"
            )
    return 2.0 * math.exp(-(epsilon**2) / (16.0 * t_len * radius_bound**2 * sigma**4))


def identity_suite(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Fast deterministic cross-checks between oracles and estimator paths.

    Returns (name, passed, detail) triples; used by the CLI verify command.
    """
    results = []

    # quadratic form reproduces every moment entry on a random trajectory
    d = random_stable(3, 0.6, seed=seed + 1)
    t_len = 10
    traj = rollout(d, t_len - 1, seed=seed + 2)
    x = traj.states[1:].ravel()
    worst = 0.0
    for m in range(4):
        s = lag_moment(traj.states, m).s_hat
        for i in range(3):
            for j in range(3):
                g = quadratic_form_matrix(i, j, m, t_len, 3)
                err = abs(x @ g @ x - s[i, j]) / (1.0 + abs(s[i, j]))
                worst = max(worst, err)
    results.append(("quadratic-form equivalence", worst <= 1e-10, f"max rel err {worst:.3e}"))

    # stacked-map Gram matches the closed-form cross covariances block-wise
    d2 = random_stable(3, 0.5, seed=seed + 3)
    t_len = 6
    ss = stacked_noise_map(d2, t_len)
    gram = d2.sigma**2 * ss.l @ ss.l.T
    worst = 0.0
    for t in range(1, t_len):
        for s_idx in range(t, t_len):
            block = gram[(t - 1) * 3 : t * 3, (s_idx - 1) * 3 : s_idx * 3]
            closed = state_cross_cov(d2, t, s_idx)
            worst = max(worst, float(np.max(np.abs(block - closed))))
    results.append(("stacked-map covariance blocks", worst <= 1e-10, f"max abs err {worst:.3e}"))

    # spectral bound chain on random stable systems
    failures = []
    for k in range(5):
        dk = random_stable(3, 0.3 + 0.1 * k, seed=seed + 10 + k)
        t_len = 8
        lk = stacked_noise_map(dk, t_len).l
        ll_top = float(np.abs(sym_eigen(lk @ lk.T).eigenvalues[0]))
        if ll_top > 1.0 / (1.0 - dk.rho) ** 2 + 1e-10:
            failures.append(f"stacked Gram radius exceeded at system {k}")
        for m in range(2):
            bound = radius_bound(dk.rho, m, t_len)
            g_bound = 1.0 / (t_len - m) + 1.0 / (t_len - m - 2)
            for i in range(3):
                for j in range(3):
                    g = quadratic_form_matrix(i, j, m, t_len, 3)
                    if float(np.abs(sym_eigen(g).eigenvalues[0])) > g_bound + 1e-10:
                        failures.append(f"form radius exceeded at ({i},{j},m={m})")
                    prod = lk.T @ g @ lk
                    if float(np.abs(sym_eigen(prod).eigenvalues[0])) > bound + 1e-10:
                        failures.append(f"sandwich radius exceeded at ({i},{j},m={m})")
    results.append(
        ("spectral bound chain", not failures, failures[0] if failures else "all radii within bounds")
    )

    # log-det trace identity
    dh = random_stable(4, 0.3, seed=seed + 30)
    lhs, rhs = logdet_trace_pair(dh.a, 60)
    err = abs(lhs - rhs)
    results.append(("log-det trace identity", err <= 1e-12, f"abs err {err:.3e}"))

    # the two denominator weights together stay below 4/T once T >= 2(m+2)
    ok = True
    for m in range(4):
        for t_len in range(2 * (m + 2), 40):
            if 1.0 / (t_len - m) + 1.0 / (t_len - m - 2) > 4.0 / t_len + 1e-15:
                ok = False
    results.append(("weight sum bound", ok, "1/(T-m) + 1/(T-m-2) <= 4/T"))

    return results
