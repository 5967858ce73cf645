"""Sample-complexity sweeps: minimal trajectory length per (system, method, size).

For each trial the search doubles the trajectory length from 16 until the
estimation error drops below the threshold, then binary-searches the exact
integer between the last failure and the first success. All lengths for one
trial are evaluated on one noise stream (longer trajectories extend shorter
ones), which makes the per-trial minimum well defined and lets the search
resume from saved stream positions instead of re-simulating from scratch.

Trials run in parallel worker processes keyed by seed; results are reduced in
sorted (n, seed) order so the worker count never changes output bytes. The
LDSM_THREADS environment variable caps the worker count.
"""

from __future__ import annotations

import copy
import json
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import LassoConfig, lasso_from_grams, ols_from_grams
from .errors import ConvergenceError, RejectedInputError, SingularMatrixError
from .linalg import max_norm
from .moments import SIGMA2_FLOOR
from .simulate import noise_stream
from .systems import SymmetricDynamics, dense_star, partition, random_2regular

FAMILIES = ("sparse2regular", "densestar")
METHODS = ("moments", "ols", "lasso")
MODES = ("full", "partial")
TARGETS = ("A", "B", "CCT", "CECT")

T_START = 16
T_CAP = 10_000_000
STREAM_CHUNK = 1024

_CONFIG_FIELDS = ("family", "method", "mode", "n_values", "threshold", "trials", "delta_seed", "target")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a system family and estimation method across sizes.

    In partial mode the first n/2 coordinates are observed (n must be even)
    and only the moment method applies; the baselines run fully observed
    against the whole matrix.
    """

    family: str
    method: str
    mode: str
    n_values: tuple[int, ...]
    threshold: float
    trials: int
    delta_seed: int
    target: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RejectedInputError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.method not in METHODS:
            raise RejectedInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in MODES:
            raise RejectedInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.target not in TARGETS:
            raise RejectedInputError(f"target must be one of {TARGETS}, got {self.target!r}")
        n_values = tuple(int(v) for v in self.n_values)
        if not n_values or any(b <= a for a, b in zip(n_values, n_values[1:])):
            raise RejectedInputError("n_values must be non-empty and strictly increasing")
        min_n = 3 if self.family == "sparse2regular" else 2
        if n_values[0] < min_n:
            raise RejectedInputError(f"family {self.family} needs n >= {min_n}")
        object.__setattr__(self, "n_values", n_values)
        if not (self.threshold > 0.0 and math.isfinite(self.threshold)):
            raise RejectedInputError(f"threshold must be positive, got {self.threshold}")
        if self.trials < 1:
            raise RejectedInputError(f"trials must be >= 1, got {self.trials}")
        if self.delta_seed < 0:
            raise RejectedInputError(f"delta_seed must be non-negative, got {self.delta_seed}")
        if self.mode == "full":
            if self.target != "A":
                raise RejectedInputError("full observation estimates the whole matrix (target A)")
        else:
            if self.method != "moments":
                raise RejectedInputError("baselines run in full mode only")
            if self.target == "A":
                raise RejectedInputError("partial mode targets one block: B, CCT or CECT")
            if any(n % 2 for n in n_values):
                raise RejectedInputError("partial mode observes n/2 coordinates; n must be even")

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "method": self.method,
            "mode": self.mode,
            "n_values": list(self.n_values),
            "threshold": self.threshold,
            "trials": self.trials,
            "delta_seed": self.delta_seed,
            "target": self.target,
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "ExperimentConfig":
        missing = [k for k in _CONFIG_FIELDS if k not in obj]
        if missing:
            raise RejectedInputError(f"config is missing fields: {missing}")
        extra = [k for k in obj if k not in _CONFIG_FIELDS]
        if extra:
            raise RejectedInputError(f"config has unknown fields: {extra}")
        return ExperimentConfig(
            family=obj["family"],
            method=obj["method"],
            mode=obj["mode"],
            n_values=tuple(obj["n_values"]),
            threshold=float(obj["threshold"]),
            trials=int(obj["trials"]),
            delta_seed=int(obj["delta_seed"]),
            target=obj["target"],
        )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_json_dict(json.load(fh))


def build_system(family: str, n: int, mode: str, delta_seed: int) -> SymmetricDynamics:
    """The ground-truth system for one sweep point; fixed across trials."""
    n_obs = n // 2 if mode == "partial" else None
    if family == "sparse2regular":
        return random_2regular(n, seed=delta_seed, n_obs=n_obs)
    return dense_star(n, n_obs=n_obs)


def error_metric(estimate, truth) -> float:
    """Largest absolute entry of the difference."""
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise RejectedInputError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return max_norm(estimate - truth)


class MomentStream:
    """Resumable rollout that accumulates lagged state products.

    Holds, for each requested lag k, the running sum of x_u x_{u+k}^T over all
    pairs with both states generated so far, restricted to the first n_view
    coordinates (diag-only lags keep just the diagonal). Pausing after state
    index T-1 leaves each lag-k sum with exactly T-k summands, which is the
    count the debiased lag moments need at length T. clone() snapshots the
    full position (generator state included) so searches can branch.
    """

    def __init__(
        self,
        d: SymmetricDynamics,
        seed: int,
        lags_full: tuple[int, ...],
        lags_diag: tuple[int, ...] = (),
        n_view: int | None = None,
        chunk: int = STREAM_CHUNK,
    ):
        self.a = np.ascontiguousarray(d.a)
        self.sigma = d.sigma
        self.n = d.n
        self.n_view = d.n if n_view is None else int(n_view)
        self.lags_full = tuple(sorted(set(lags_full)))
        self.lags_diag = tuple(sorted(set(lags_diag) - set(lags_full)))
        self.max_lag = max(self.lags_full + self.lags_diag)
        self.chunk = int(chunk)
        self.rng = noise_stream(seed)
        self.x = np.zeros(self.n)
        self.t = 1  # states generated so far; x_0 = 0 exists from the start
        self.tail = np.zeros((1, self.n))  # trailing states, ends at x_{t-1}
        self.full = {k: np.zeros((self.n_view, self.n_view)) for k in self.lags_full}
        self.diag = {k: np.zeros(self.n_view) for k in self.lags_diag}
        self._win = np.empty((self.chunk + self.max_lag, self.n))
        self._tmp = np.empty((self.n_view, self.n_view))

    def clone(self) -> "MomentStream":
        other = object.__new__(MomentStream)
        other.a = self.a
        other.sigma = self.sigma
        other.n = self.n
        other.n_view = self.n_view
        other.lags_full = self.lags_full
        other.lags_diag = self.lags_diag
        other.max_lag = self.max_lag
        other.chunk = self.chunk
        other.rng = np.random.Generator(np.random.Philox())
        other.rng.bit_generator.state = copy.deepcopy(self.rng.bit_generator.state)
        other.x = self.x.copy()
        other.t = self.t
        other.tail = self.tail.copy()
        other.full = {k: v.copy() for k, v in self.full.items()}
        other.diag = {k: v.copy() for k, v in self.diag.items()}
        other._win = np.empty_like(self._win)
        other._tmp = np.empty_like(self._tmp)
        return other

    def advance_to(self, t_states: int) -> "MomentStream":
        """Generate states up to index t_states - 1 and fold in their products."""
        from . import _kernels

        while self.t < t_states:
            c = min(self.chunk, t_states - self.t)
            tail_len = self.tail.shape[0]
            win = self._win[: tail_len + c]
            win[:tail_len] = self.tail
            buf = win[tail_len:]
            self.rng.standard_normal(out=buf)
            if self.sigma != 1.0:
                buf *= self.sigma
            _kernels.rollout_steps(self.a, self.x, buf)
            view = win if self.n_view == self.n else win[:, : self.n_view]
            t0 = self.t
            for k in self.lags_full:
                lo = max(t0 - k, 0)
                hi = t0 + c - 1 - k
                if hi >= lo:
                    base = t0 - tail_len
                    lhs = view[lo - base : hi + 1 - base]
                    rhs = view[lo + k - base : hi + 1 + k - base]
                    np.matmul(lhs.T, rhs, out=self._tmp)
                    self.full[k] += self._tmp
            for k in self.lags_diag:
                lo = max(t0 - k, 0)
                hi = t0 + c - 1 - k
                if hi >= lo:
                    base = t0 - tail_len
                    lhs = view[lo - base : hi + 1 - base]
                    rhs = view[lo + k - base : hi + 1 + k - base]
                    self.diag[k] += np.einsum("ti,ti->i", lhs, rhs)
            self.t = t0 + c
            keep = min(self.t, self.max_lag)
            if keep != tail_len:
                self.tail = np.empty((keep, self.n))
            self.tail[:] = win[tail_len + c - keep : tail_len + c]
        return self

    def diag_of(self, k: int) -> np.ndarray:
        if k in self.diag:
            return self.diag[k]
        return np.diagonal(self.full[k])

    def moment(self, m: int) -> np.ndarray:
        """Debiased lag-m moment at the current length (needs t >= m + 3)."""
        t = self.t
        return self.full[m] / (t - m) - self.full[m + 2] / (t - m - 2)

    def sigma2_hat(self) -> float:
        t = self.t
        trace = self.diag_of(0).sum() / t - self.diag_of(2).sum() / (t - 2)
        return float(trace) / self.n_view

    def transition_grams(self):
        """(gram, cross, y_sq, count) over the t-1 transitions seen so far."""
        xv = self.x[: self.n_view]
        gram = self.full[0] - np.outer(xv, xv)
        cross = self.full[1].T.copy()
        y_sq = np.diagonal(self.full[0]).copy()  # x_0 is zero, so this sums outputs only
        return gram, cross, y_sq, self.t - 1


class TrialEvaluator:
    """Estimation-error evaluation for one (config, system, trial seed)."""

    def __init__(self, cfg: ExperimentConfig, system: SymmetricDynamics, trial_seed: int):
        self.cfg = cfg
        self.system = system
        self.seed = trial_seed
        self.lasso_cfg = LassoConfig() if cfg.method == "lasso" else None
        n_view = system.n_obs if cfg.mode == "partial" else system.n
        self.n_view = n_view
        if cfg.method in ("ols", "lasso"):
            self.lags_full, self.lags_diag = (0, 1), ()
        elif cfg.target in ("A", "B"):
            self.lags_full, self.lags_diag = (1, 3), (0, 2)
        elif cfg.target == "CCT":
            self.lags_full, self.lags_diag = (1, 2, 3, 4), (0,)
        else:  # CECT
            self.lags_full, self.lags_diag = (1, 2, 3, 4, 5), (0,)
        if cfg.target == "A":
            self.truth = system.a
        else:
            b, c, e = partition(system)
            self.truth = {"B": b, "CCT": c @ c.T, "CECT": c @ e @ c.T}[cfg.target]

    def new_stream(self) -> MomentStream:
        return MomentStream(
            self.system, self.seed, self.lags_full, self.lags_diag, n_view=self.n_view
        )

    def first_pause(self, t_states: int) -> int:
        """Earliest stream position an evaluation at t_states must not overshoot."""
        if self.cfg.method != "lasso":
            return t_states
        n_trans = t_states - 1
        n_hold = max(1, int(math.floor(self.lasso_cfg.holdout_frac * n_trans)))
        return n_trans - n_hold + 1

    def advance_and_eval(self, stream: MomentStream, t_states: int) -> float:
        """Error of the configured estimator at trajectory length t_states.

        Numerical failure states (singular solve, stalled descent, vanishing
        noise estimate) count as infinite error so the search keeps growing T.
        """
        cfg = self.cfg
        if cfg.method == "lasso":
            cut = self.first_pause(t_states)
            stream.advance_to(cut)
            g_tr, cross_tr, y_sq_tr, n_tr = stream.transition_grams()
            stream.advance_to(t_states)
            g_all, cross_all, y_sq_all, _ = stream.transition_grams()
            try:
                est = lasso_from_grams(
                    g_tr, cross_tr, y_sq_tr, n_tr,
                    g_all - g_tr, cross_all - cross_tr, y_sq_all - y_sq_tr,
                    self.lasso_cfg,
                    refit=(g_all, cross_all, y_sq_all, t_states - 1),
                )
            except ConvergenceError:
                return math.inf
            return error_metric(est, self.truth)
        stream.advance_to(t_states)
        if cfg.method == "ols":
            gram, cross, _, _ = stream.transition_grams()
            try:
                est = ols_from_grams(gram, cross)
            except SingularMatrixError:
                return math.inf
            return error_metric(est, self.truth)
        sigma2 = stream.sigma2_hat()
        if sigma2 <= SIGMA2_FLOOR:
            return math.inf
        if cfg.target in ("A", "B"):
            est = stream.moment(1) / sigma2
        elif cfg.target == "CCT":
            b = stream.moment(1) / sigma2
            est = stream.moment(2) / sigma2 - b @ b
        else:
            b = stream.moment(1) / sigma2
            cct = stream.moment(2) / sigma2 - b @ b
            est = stream.moment(3) / sigma2 - b @ b @ b - cct @ b - b @ cct
        return error_metric(est, self.truth)


def min_t_single_trial(
    cfg: ExperimentConfig, n: int, trial_seed: int, system: SymmetricDynamics | None = None
) -> tuple[int | None, bool]:
    """Smallest trajectory length on the search lattice meeting the threshold.

    Returns (min_t, capped); min_t is None when no length up to the cap
    succeeded. Lengths count states including the zero initial one.
    """
    if system is None:
        system = build_system(cfg.family, n, cfg.mode, cfg.delta_seed)
    ev = TrialEvaluator(cfg, system, trial_seed)
    stream = ev.new_stream()
    t_cand = T_START
    last_fail = 0
    base = None
    while True:
        err = ev.advance_and_eval(stream, t_cand)
        if err <= cfg.threshold:
            break
        last_fail = t_cand
        base = stream.clone()
        if t_cand >= T_CAP:
            return None, True
        t_cand = min(2 * t_cand, T_CAP)
    if t_cand == T_START:
        return T_START, False
    lo, hi = last_fail, t_cand
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if base is not None and ev.first_pause(mid) >= base.t:
            probe = base.clone()
        else:
            probe = ev.new_stream()
        err = ev.advance_and_eval(probe, mid)
        if err <= cfg.threshold:
            hi = mid
        else:
            lo = mid
            base = probe
    return hi, False


@dataclass(frozen=True)
class TrialRecord:
    n: int
    trial_seed: int
    min_t: int | None
    capped: bool


@dataclass(frozen=True)
class CurveFit:
    a: float
    b: float
    r2: float


@dataclass
class ScalingRun:
    config: ExperimentConfig
    records: list[TrialRecord]
    max_min_t: dict[int, int | None]
    excluded_n: list[int]
    fit_log: CurveFit = field(default=None)
    fit_linear: CurveFit = field(default=None)
    fit_nlogn: CurveFit = field(default=None)


def _fit_line(x: np.ndarray, y: np.ndarray) -> CurveFit:
    if x.size < 2:
        return CurveFit(math.nan, math.nan, math.nan)
    xm = x.mean()
    ym = y.mean()
    var = float(((x - xm) ** 2).sum())
    if var == 0.0:
        return CurveFit(math.nan, math.nan, math.nan)
    b = float(((x - xm) * (y - ym)).sum()) / var
    a = ym - b * xm
    ssr = float(((y - (a + b * x)) ** 2).sum())
    sst = float(((y - ym) ** 2).sum())
    r2 = math.nan if sst == 0.0 else 1.0 - ssr / sst
    return CurveFit(float(a), float(b), r2)


def fit_scaling_curves(ns, ts) -> dict[str, CurveFit]:
    """Least-squares fits of T against log n, n, and n log n."""
    x = np.asarray(ns, dtype=np.float64)
    y = np.asarray(ts, dtype=np.float64)
    return {
        "fit_log": _fit_line(np.log(x), y),
        "fit_linear": _fit_line(x, y),
        "fit_nlogn": _fit_line(x * np.log(x), y),
    }


def _run_trial(args) -> tuple[int, int, int | None, bool]:
    cfg, n, seed, system = args
    min_t, capped = min_t_single_trial(cfg, n, seed, system=system)
    return n, seed, min_t, capped


def resolve_workers(requested: int | None = None) -> int:
    env = os.environ.get("LDSM_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    workers = cap if requested is None else min(requested, cap)
    return max(1, workers)


_BLAS_ENV = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def run_sweep(cfg: ExperimentConfig, max_workers: int | None = None) -> ScalingRun:
    """All trials for all sizes, reduced deterministically and curve-fitted."""
    systems = {n: build_system(cfg.family, n, cfg.mode, cfg.delta_seed) for n in cfg.n_values}
    tasks = [
        (cfg, n, seed, systems[n])
        for n in cfg.n_values
        for seed in range(cfg.delta_seed, cfg.delta_seed + cfg.trials)
    ]
    workers = resolve_workers(max_workers)
    results: dict[tuple[int, int], tuple[int | None, bool]] = {}
    if workers <= 1 or len(tasks) == 1:
        for task in tasks:
            n, seed, min_t, capped = _run_trial(task)
            results[(n, seed)] = (min_t, capped)
    else:
        saved = {k: os.environ.get(k) for k in _BLAS_ENV}
        for k in _BLAS_ENV:
            os.environ[k] = "1"  # workers stay single-threaded in BLAS
        try:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                for n, seed, min_t, capped in pool.map(_run_trial, tasks, chunksize=1):
                    results[(n, seed)] = (min_t, capped)
        finally:
            for k, v in saved.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v

    records = []
    max_min_t: dict[int, int | None] = {}
    excluded = []
    for n in cfg.n_values:
        per_trial = []
        any_capped = False
        for seed in range(cfg.delta_seed, cfg.delta_seed + cfg.trials):
            min_t, capped = results[(n, seed)]
            records.append(TrialRecord(n=n, trial_seed=seed, min_t=min_t, capped=capped))
            any_capped |= capped
            if not capped:
                per_trial.append(min_t)
        if any_capped:
            max_min_t[n] = None
            excluded.append(n)
        else:
            max_min_t[n] = max(per_trial)
    run = ScalingRun(config=cfg, records=records, max_min_t=max_min_t, excluded_n=excluded)
    kept = [n for n in cfg.n_values if max_min_t[n] is not None]
    fits = fit_scaling_curves(kept, [max_min_t[n] for n in kept])
    run.fit_log = fits["fit_log"]
    run.fit_linear = fits["fit_linear"]
    run.fit_nlogn = fits["fit_nlogn"]
    return run


def write_scaling_csv(run: ScalingRun, path) -> None:
    cfg = run.config
    with open(path, "w") as fh:
        fh.write("family,method,mode,target,n,trial_seed,min_t,capped\n")
        for rec in run.records:
            min_t = "" if rec.min_t is None else str(rec.min_t)
            capped = "true" if rec.capped else "false"
            fh.write(
                f"{cfg.family},{cfg.method},{cfg.mode},{cfg.target},"
                f"{rec.n},{rec.trial_seed},{min_t},{capped}\n"
            )


def write_summary_csv(run: ScalingRun, path) -> None:
    with open(path, "w") as fh:
        fh.write("n,max_min_t\n")
        for n in run.config.n_values:
            v = run.max_min_t[n]
            fh.write(f"{n},{'' if v is None else v}\n")


def _fit_json(fit: CurveFit) -> dict:
    clean = lambda v: None if (v is None or math.isnan(v)) else v
    return {"a": clean(fit.a), "b": clean(fit.b), "r2": clean(fit.r2)}


def write_fit_report(run: ScalingRun, path) -> None:
    doc = {
        "fit_log": _fit_json(run.fit_log),
        "fit_linear": _fit_json(run.fit_linear),
        "fit_nlogn": _fit_json(run.fit_nlogn),
        "excluded_n": list(run.excluded_n),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
