"""Command line driver: run scenarios, verify the acceptance suite, densities.

Exit codes: 0 success, 1 verification failures, 2 configuration errors,
3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, FbmcfError


def _cmd_run(args):
    from .scenario import run_scenario
    from concurrent.futures import ProcessPoolExecutor

    configs = args.config
    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_scenario, c, args.out, args.seed)
                       for c in configs]
            for cfg, fut in zip(configs, futures):
                print(f"{cfg}: artifacts in {fut.result()}")
    else:
        for cfg in configs:
            art = run_scenario(cfg, args.out, args.seed)
            print(f"{cfg}: artifacts in {art}")
    return 0


def _cmd_verify(args):
    from .acceptance import run_all

    seed = int(os.environ.get("FBMCF_SEED", args.seed))
    lines = []

    def printer(line):
        print(line)
        lines.append(line)

    try:
        rows = run_all(filter=args.filter, seed=seed, printer=printer)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    n_fail = sum(not r.passed for r in rows)
    print(f"{len(rows) - n_fail}/{len(rows)} criteria passed")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "verify_results.csv")
        with open(path, "w") as f:
            f.write("id,description,measured,bound,passed,detail\n")
            for r in rows:
                f.write('%s,"%s",%.17g,%.17g,%d,"%s"\n' % (
                    r.id, r.description, r.measured, r.bound,
                    int(r.passed), r.detail.replace('"', "'")))
        print(f"wrote {path}")
    return 1 if n_fail else 0


def _cmd_density(args):
    from .density import monotonicity_report
    from .flow import FlowHistory
    from .kernels import KernelParams, measured_c1
    from .scenario import barrier_from_config

    try:
        x, y, t = (float(v) for v in args.center.split(","))
    except ValueError:
        print("error: --center expects x,y,t", file=sys.stderr)
        return 2
    history = FlowHistory.from_jsonl(args.history)
    barrier = barrier_from_config(history.config.get("barrier"))
    if barrier is None:
        print("error: history carries no barrier; reflected densities "
              "need one", file=sys.stderr)
        return 2
    history.barrier = barrier
    for s in history.snapshots:
        s.barrier = barrier
    params = KernelParams.for_barrier(barrier, kappa=args.kappa,
                                      c1=measured_c1(barrier))
    radii = [float(r) for r in args.radii.split(",")] if args.radii \
        else [0.4, 0.2, 0.1, 0.05]
    rep = monotonicity_report(history, barrier, (x, y, t), params, radii)
    out = {
        "center": rep.center.tolist(),
        "radii": rep.radii.tolist(),
        "theta_values": rep.theta_values.tolist(),
        "fitted_A": rep.fitted_A,
        "M_bound": rep.M_bound,
        "theta_at_point": rep.theta_at_point,
        "theta_error": rep.theta_error,
    }
    print(json.dumps(out, sort_keys=True, indent=1))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        rep.write_csv(os.path.join(args.out, "density_profile.csv"))
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="fbmcf",
        description="Free-boundary curve-shortening laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run scenario configs")
    pr.add_argument("config", nargs="+", help="scenario JSON path(s)")
    pr.add_argument("--out", default=None, help="artifact directory root")
    pr.add_argument("--jobs", type=int, default=1,
                    help="scenario-level parallelism")
    pr.add_argument("--seed", type=int, default=None)
    pr.set_defaults(func=_cmd_run)

    pv = sub.add_parser("verify", help="run the acceptance suite")
    pv.add_argument("--filter", default=None,
                    help="run only the criterion with this id")
    pv.add_argument("--out", default=None, help="write verify_results.csv here")
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(func=_cmd_verify)

    pd = sub.add_parser("density", help="densities of a stored history")
    pd.add_argument("history", help="history.jsonl path")
    pd.add_argument("--center", required=True, help="x,y,t")
    pd.add_argument("--kappa", type=float, required=True)
    pd.add_argument("--radii", default=None, help="comma separated radii")
    pd.add_argument("--out", default=None)
    pd.set_defaults(func=_cmd_density)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FbmcfError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
