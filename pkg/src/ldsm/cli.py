"""Command-line entry points: simulate, estimate, bound, sweep, verify.

Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldsm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="roll out a trajectory and write it as CSV")
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=("sparse2regular", "densestar"))
    src.add_argument("--system", help="JSON system file")
    p_sim.add_argument("--n", type=int, help="system dimension (with --family)")
    p_sim.add_argument("--graph-seed", type=int, default=0, help="seed for the sparse family")
    p_sim.add_argument("--sigma", type=float, default=1.0)
    p_sim.add_argument("--n-obs", type=int, default=None)
    p_sim.add_argument("--steps", type=int, required=True, help="number of recurrence steps")
    p_sim.add_argument("--seed", type=int, required=True, help="noise stream seed")
    p_sim.add_argument("--out", required=True)

    p_est = sub.add_parser("estimate", help="estimate matrices from a trajectory CSV")
    p_est.add_argument("--traj", required=True, help="trajectory CSV from the simulate command")
    p_est.add_argument("--method", choices=("moments", "ols", "lasso", "blocks"), required=True)
    p_est.add_argument("--m", type=int, default=1, help="lag order for the moments method")
    p_est.add_argument("--n-obs", type=int, default=None, help="restrict to the first k coordinates")
    p_est.add_argument("--scale-by-sigma2", action="store_true",
                       help="divide the moments estimate by the estimated noise variance")
    p_est.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    p_est.add_argument("--out", required=True)

    p_bound = sub.add_parser("bound", help="print sufficient trajectory lengths")
    p_bound.add_argument("--eps", type=float, required=True)
    p_bound.add_argument("--delta", type=float, required=True)
    p_bound.add_argument("--sigma", type=float, required=True)
    p_bound.add_argument("--rho", type=float, required=True)
    p_bound.add_argument("--m", type=int, default=0)
    p_bound.add_argument("--n", type=int, required=True)
    p_bound.add_argument("--blocks", action="store_true",
                         help="print the three partial-observation lengths instead")

    p_sweep = sub.add_parser("sweep", help="run a scaling sweep from a JSON config")
    p_sweep.add_argument("config", help="JSON file with the experiment configuration")
    p_sweep.add_argument("--out-dir", default=".", help="directory for CSV and fit outputs")
    p_sweep.add_argument("--workers", type=int, default=None)

    sub.add_parser("verify", help="run the oracle identity suite")
    return parser


def _cmd_simulate(args) -> int:
    from . import simulate, systems

    if args.system:
        d = systems.load_json(args.system)
    else:
        if args.n is None:
            print("error: --n is required with --family", file=sys.stderr)
            return EXIT_CONFIG
        if args.family == "sparse2regular":
            d = systems.random_2regular(args.n, seed=args.graph_seed, sigma=args.sigma, n_obs=args.n_obs)
        else:
            d = systems.dense_star(args.n, sigma=args.sigma, n_obs=args.n_obs)
    traj = simulate.rollout(d, args.steps, args.seed)
    simulate.write_trajectory_csv(traj, args.out)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    import numpy as np

    from . import baselines, moments, simulate

    states = simulate.read_trajectory_csv(args.traj)
    if args.n_obs is not None:
        states = states[:, : args.n_obs]
    if args.method == "blocks":
        blocks = moments.block_estimates(states)
        doc = {
            "sigma2_hat": blocks.sigma2_hat,
            "b_hat": blocks.b_hat.tolist(),
            "cct_hat": None if blocks.cct_hat is None else blocks.cct_hat.tolist(),
            "cect_hat": None if blocks.cect_hat is None else blocks.cect_hat.tolist(),
        }
        with open(args.out, "w") as fh:
            json.dump(doc, fh)
        return EXIT_OK
    if args.method == "moments":
        est = moments.lag_moment(states, args.m).s_hat
        if args.scale_by_sigma2:
            sigma2 = float(np.trace(moments.lag_moment(states, 0).s_hat)) / states.shape[1]
            est = est / sigma2
    elif args.method == "ols":
        est = baselines.ols_fit(states)
    else:
        est = baselines.lasso_fit(states)
    if args.json:
        moments.write_matrix_json(est, args.out)
    else:
        moments.write_matrix_csv(est, args.out)
    return EXIT_OK


def _cmd_bound(args) -> int:
    from . import moments

    if args.blocks:
        t_b, t_cct, t_cect = moments.block_sample_size_bounds(
            args.eps, args.delta, args.sigma, args.rho, args.n
        )
        print(t_b)
        print(t_cct)
        print(t_cect)
    else:
        bound = moments.sample_size_bound(args.eps, args.delta, args.sigma, args.rho, args.m, args.n)
        print(bound.t_required)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from . import harness

    cfg = harness.load_config(args.config)
    run = harness.run_sweep(cfg, max_workers=args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    harness.write_scaling_csv(run, os.path.join(args.out_dir, "scaling.csv"))
    harness.write_summary_csv(run, os.path.join(args.out_dir, "scaling_summary.csv"))
    harness.write_fit_report(run, os.path.join(args.out_dir, "fit_report.json"))
    return EXIT_OK


def _cmd_verify() -> int:
    from . import oracles

    results = oracles.identity_suite()
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    from .errors import LdsmError, RejectedInputError

    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "bound":
            return _cmd_bound(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_verify()
    except (RejectedInputError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LdsmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
