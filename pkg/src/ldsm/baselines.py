"""Least-squares baselines fit on one-step transitions.

Plain OLS with a fixed ridge jitter, and an l1-penalized variant solved by
covariance-form coordinate descent with active-set screening. The penalty
level is picked on a held-out suffix of the transitions (no shuffling, since
the samples are serially dependent), and the returned coefficients are the
train-portion fit at the selected level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, RejectedInputError, SingularMatrixError
from .linalg import solve_spd

OLS_JITTER = 1e-10
# Pivots this small relative to the Gram scale mean the jitter, not the data,
# is carrying the solve; the fit would be a minimum-norm interpolation.
OLS_SINGULAR_REL = 1e-8
MAX_KKT_ROUNDS = 50


@dataclass(frozen=True)
class LassoConfig:
    """Penalty grid and solver knobs.

    When lambda_grid is None a geometric grid of grid_size points is built at
    fit time, from the smallest level that zeroes every coefficient down by a
    factor grid_ratio (floored at 1e-2 when the train set is underdetermined).
    tol is the duality-gap tolerance relative to the output energy; max_iter
    is the total sweep budget per output row at each level. path_patience
    stops descending the grid after that many consecutive levels without a
    holdout improvement, skipping the expensive overfitting tail; 0 disables
    the early exit.
    """

    lambda_grid: np.ndarray | None = None
    grid_size: int = 30
    grid_ratio: float = 1e-3
    max_iter: int = 1000
    tol: float = 1e-4
    holdout_frac: float = 0.2
    path_patience: int = 5

    def __post_init__(self):
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=np.float64)
            if grid.ndim != 1 or grid.size == 0:
                raise RejectedInputError("lambda_grid must be a non-empty 1-D array")
            if np.any(grid <= 0.0) or np.any(np.diff(grid) >= 0.0):
                raise RejectedInputError("lambda_grid must be positive and strictly descending")
            object.__setattr__(self, "lambda_grid", grid)
        if self.grid_size < 1 or not 0.0 < self.grid_ratio < 1.0:
            raise RejectedInputError("grid_size must be >= 1 and grid_ratio in (0, 1)")
        if self.max_iter < 1 or self.tol <= 0.0:
            raise RejectedInputError("max_iter must be >= 1 and tol positive")
        if self.path_patience < 0:
            raise RejectedInputError("path_patience must be non-negative (0 disables early exit)")
        if not 0.0 < self.holdout_frac <= 0.5:
            raise RejectedInputError(f"holdout_frac must lie in (0, 0.5], got {self.holdout_frac}")


@dataclass
class LassoFitInfo:
    lambda_grid: np.ndarray
    chosen_lambda: float
    holdout_sse: np.ndarray
    gaps: np.ndarray
    objective_sweeps: list = field(default_factory=list)


def soft_threshold(z, threshold):
    """Shrink toward zero: sign(z) * max(|z| - threshold, 0)."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0)


def transition_grams(states) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """(sum x x^T, sum x_next x^T, per-row sum x_next^2, count) over transitions."""
    x = np.asarray(states, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise RejectedInputError("states must be 2-D with at least two rows")
    inputs = x[:-1]
    outputs = x[1:]
    return inputs.T @ inputs, outputs.T @ inputs, (outputs**2).sum(axis=0), x.shape[0] - 1


def ols_from_grams(gram: np.ndarray, cross: np.ndarray) -> np.ndarray:
    """Transition matrix from accumulated second moments, with ridge jitter.

    Raises SingularMatrixError when the jittered Gram is still numerically
    singular relative to its scale (fewer informative samples than
    coordinates).
    """
    n = gram.shape[0]
    gram = np.asarray(gram, dtype=np.float64)
    m = np.ascontiguousarray(0.5 * (gram + gram.T) + OLS_JITTER * np.eye(n))
    lower = np.zeros_like(m)
    fail = _kernels.cholesky(m, lower, 0.0)
    scale = float(np.max(np.diagonal(m))) if n else 0.0
    if fail >= 0:
        raise SingularMatrixError(f"Gram matrix is not positive definite (pivot {fail})", int(fail))
    pivots = np.diagonal(lower) ** 2
    worst = int(np.argmin(pivots))
    if pivots[worst] <= OLS_SINGULAR_REL * scale:
        raise SingularMatrixError(
            f"Gram matrix numerically singular after jitter (pivot {worst})", worst
        )
    return solve_spd(m, cross.T).T


def ols_fit(states) -> np.ndarray:
    """Least-squares one-step transition matrix."""
    gram, cross, _, _ = transition_grams(states)
    return ols_from_grams(gram, cross)


def lasso_fit(states, cfg: LassoConfig | None = None, return_info: bool = False):
    """l1-penalized transition matrix with holdout-selected penalty.

    The first (1 - holdout_frac) share of transitions drives the penalty path;
    the trailing share scores each level by one-step squared error. The
    returned coefficients are then re-solved on all transitions at the chosen
    level, so the degenerate-penalty limit coincides with the plain
    least-squares fit.
    """
    cfg = cfg or LassoConfig()
    x = np.asarray(states, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise RejectedInputError("need at least 4 states to fit with a holdout split")
    n_trans = x.shape[0] - 1
    n_hold = max(1, int(np.floor(cfg.holdout_frac * n_trans)))
    n_train = n_trans - n_hold
    if n_train < 1:
        raise RejectedInputError("holdout split leaves no training transitions")
    gram, cross, y_sq, _ = transition_grams(x[: n_train + 1])
    ho_in = x[n_train:n_trans]
    ho_out = x[n_train + 1 :]
    gram_h = ho_in.T @ ho_in
    cross_h = ho_out.T @ ho_in
    y_sq_h = (ho_out**2).sum(axis=0)
    return lasso_from_grams(
        gram, cross, y_sq, n_train, gram_h, cross_h, y_sq_h, cfg,
        refit=transition_grams(x), return_info=return_info,
    )


def lasso_from_grams(
    gram: np.ndarray,
    cross: np.ndarray,
    y_sq: np.ndarray,
    n_train: int,
    gram_h: np.ndarray,
    cross_h: np.ndarray,
    y_sq_h: np.ndarray,
    cfg: LassoConfig | None = None,
    refit: tuple | None = None,
    return_info: bool = False,
):
    """Penalty-path solve from accumulated train and holdout second moments.

    Rows decouple: each output coordinate is an independent l1 regression,
    warm-started along the descending grid with active sets refreshed by full
    correlation checks. refit, when given as another (gram, cross, y_sq,
    count) tuple, re-solves the returned coefficients on those moments at the
    selected penalty. Raises ConvergenceError when a row's duality gap will
    not close within the iteration budget at some penalty level.
    """
    cfg = cfg or LassoConfig()
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    cross = np.ascontiguousarray(cross, dtype=np.float64)
    y_sq = np.asarray(y_sq, dtype=np.float64)
    n_out, n_coef = cross.shape
    if cfg.lambda_grid is not None:
        grid = cfg.lambda_grid
    else:
        lam_max = float(np.max(np.abs(cross))) / n_train
        if lam_max <= 0.0:
            w = np.zeros((n_out, n_coef))
            info = LassoFitInfo(np.zeros(1), 0.0, np.zeros(1), np.zeros((1, n_out)))
            return (w, info) if return_info else w
        ratio = cfg.grid_ratio
        if n_train < n_coef:
            # underdetermined designs overfit long before the nominal floor;
            # same convention as glmnet's lambda.min.ratio for nobs < nvars
            ratio = max(ratio, 1e-2)
        if cfg.grid_size == 1:
            grid = np.array([lam_max])
        else:
            grid = lam_max * ratio ** (np.arange(cfg.grid_size) / (cfg.grid_size - 1))

    w = np.zeros((n_out, n_coef))
    active = [np.zeros(n_coef, dtype=bool) for _ in range(n_out)]
    gaps = np.full((grid.size, n_out), np.nan)
    holdout_sse = np.empty(grid.size)
    info = LassoFitInfo(grid, 0.0, holdout_sse, gaps)
    best_sse = np.inf
    best_w = np.zeros((n_out, n_coef))
    best_lam = float(grid[0])

    since_best = 0
    for g_idx, lam in enumerate(grid):
        _solve_at_lambda(gram, cross, y_sq, n_train, float(lam), w, active, cfg, gaps[g_idx], info if return_info else None)
        sse = float(y_sq_h.sum() - 2.0 * (w * cross_h).sum() + ((w @ gram_h) * w).sum())
        holdout_sse[g_idx] = sse
        if sse < best_sse:
            best_sse = sse
            best_w[:] = w
            best_lam = float(lam)
            since_best = 0
        else:
            since_best += 1
            if cfg.path_patience and since_best >= cfg.path_patience:
                holdout_sse[g_idx + 1 :] = np.nan
                break

    info.chosen_lambda = best_lam
    if refit is not None:
        gram_r, cross_r, y_sq_r, n_refit = refit
        gram_r = np.ascontiguousarray(gram_r, dtype=np.float64)
        cross_r = np.ascontiguousarray(cross_r, dtype=np.float64)
        active_r = [bw != 0.0 for bw in best_w]
        refit_gaps = np.full(n_out, np.nan)
        _solve_at_lambda(
            gram_r, cross_r, np.asarray(y_sq_r, dtype=np.float64), int(n_refit),
            best_lam, best_w, active_r, cfg, refit_gaps, info if return_info else None,
        )
    return (best_w, info) if return_info else best_w


def _solve_at_lambda(gram, cross, y_sq, n_samples, lam, w, active, cfg, gaps_out, info):
    """Bring every row of w to the penalized optimum at one penalty level.

    Alternates active-set coordinate descent with full correlation checks;
    rows converge independently and share nothing. cfg.max_iter is the total
    sweep budget per row at this level; exhausting it with the duality gap
    still open raises. w and the active masks are updated in place.
    """
    n_out = cross.shape[0]
    lam_n = lam * n_samples
    obj_buf = np.empty(cfg.max_iter)
    done = np.zeros(n_out, dtype=bool)
    used = np.zeros(n_out, dtype=np.int64)
    stationary = np.zeros(n_out, dtype=bool)
    for round_idx in range(MAX_KKT_ROUNDS):
        tol_dw = cfg.tol * 0.1**round_idx
        for row in range(n_out):
            if done[row]:
                continue
            idx = np.flatnonzero(active[row])
            budget = cfg.max_iter - used[row]
            if idx.size and budget > 0:
                qa = (gram @ w[row])[idx]  # w is zero off the active set
                sweeps = _kernels.cd_active(
                    gram, cross[row], lam_n, w[row], idx, qa,
                    budget, tol_dw, float(y_sq[row]),
                    0.5 / n_samples, lam, obj_buf,
                )
                stationary[row] = sweeps < 0
                sweeps = abs(sweeps)
                used[row] += sweeps
                if info is not None:
                    info.objective_sweeps.append((float(lam), row, obj_buf[:sweeps].copy()))
        corr = cross - w @ gram
        all_done = True
        for row in range(n_out):
            if done[row]:
                continue
            slack = lam_n + 1e-12 * max(1.0, lam_n)
            violations = (np.abs(corr[row]) > slack) & ~active[row]
            gap = _dual_gap(w[row], cross[row], corr[row], float(y_sq[row]), lam_n)
            gaps_out[row] = gap
            if not violations.any():
                # the gap certificate is loose near the unpenalized limit, so
                # an exact coordinate-wise fixed point also counts as solved
                if gap <= cfg.tol * max(float(y_sq[row]), 1e-300) or stationary[row]:
                    done[row] = True
                    continue
            if used[row] >= cfg.max_iter:
                raise ConvergenceError(
                    f"coordinate descent exhausted {cfg.max_iter} sweeps at penalty {lam:g} (row {row})",
                    lam=float(lam),
                    gap=float(gap),
                )
            active[row] |= violations
            all_done = False
        if all_done:
            return
    bad = int(np.argmax(~done))
    raise ConvergenceError(
        f"coordinate descent did not converge at penalty {lam:g} (row {bad})",
        lam=float(lam),
        gap=float(gaps_out[bad]),
    )


def _dual_gap(w_row, cross_row, corr_row, y_sq_row, lam_n):
    # duality gap of (1/2)||y - Xw||^2 + lam_n |w|_1, from gram quantities only
    r_norm2 = max(y_sq_row - w_row @ cross_row - w_row @ corr_row, 0.0)
    r_dot_y = y_sq_row - w_row @ cross_row
    dual_norm = float(np.max(np.abs(corr_row))) if corr_row.size else 0.0
    if dual_norm > lam_n:
        const = lam_n / dual_norm
        gap = 0.5 * r_norm2 * (1.0 + const**2)
    else:
        const = 1.0
        gap = r_norm2
    gap += lam_n * float(np.abs(w_row).sum()) - const * r_dot_y
    return max(gap, 0.0)
