"""Command-line entry point: ``causefs {fit,eval,synth,sweep}``.

Exit codes: 0 success, 1 runtime error, 2 usage error. ``CAUSEFS_SEED``
overrides ``--seed`` for every command.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import graphs
from .dataset import SyntheticSpec, load_dataset, save_csv, standardize, synthesize
from .evaluation import DEFAULT_RHO_LIST, evaluate_ranking
from .regression import load_ranking
from .solver import VARIANTS, HyperParams, converged, fit

logger = logging.getLogger("causefs")

METRIC_FIELDS = ["rho", "acc_mean", "acc_std", "nmi_mean", "nmi_std"]
SWEEP_FIELDS = ["alpha", "beta", "lambda"] + METRIC_FIELDS


class CliError(Exception):
    pass


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(args) -> int:
    env = os.environ.get("CAUSEFS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"CAUSEFS_SEED must be an integer, got {env!r}") from None
    return args.seed


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({f: row[f] for f in fields})


def _load(args):
    path = Path(args.data)
    if not path.is_file():
        raise CliError(f"data file not found: {path}")
    return load_dataset(path, args.format)


def _hyper(args, **overrides) -> HyperParams:
    values = dict(alpha=args.alpha, beta=args.beta, lam=args.lam, k=args.k, h=args.h,
                  rho=args.rho, epsilon=args.epsilon, max_outer=args.max_outer,
                  outer_tol=args.outer_tol, seed=_seed(args), variant=args.variant,
                  standardize=not args.raw, freeze_partition=args.freeze_partition)
    values.update(overrides)
    return HyperParams(**values)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ------------------------------------------------------------------------

def run_fit(data, hyper: HyperParams, out: Path, export_graphs: bool = False) -> dict:
    """Fit one model and write ranking, partition, trace and report files into ``out``."""
    start = time.perf_counter()
    state, ranking = fit(data, hyper)
    wall = time.perf_counter() - start
    ranking_path, partition_path = out / "ranking.json", out / "partition.json"
    ranking_path.write_text(ranking.to_json(data.feature_ids) + "\n", encoding="utf-8")
    _write_json(partition_path, state.partition.to_records(data.feature_ids))
    _write_csv(out / "objective_trace.csv", ["iteration", "objective"],
               [{"iteration": i + 1, "objective": repr(v)} for i, v in enumerate(state.objective_trace)])
    if export_graphs:
        graphs.export_triplets(state.G, out / "graph_G.txt")
        for m, S in enumerate(state.S_list):
            graphs.export_triplets(S, out / f"graph_S{m}.txt")
    report = {
        "hyperparameters": hyper.to_dict(),
        "n_samples": data.n,
        "n_features": data.d,
        "n_iter": state.iteration,
        "converged": converged(state.objective_trace, hyper.outer_tol),
        "objective_trace": state.objective_trace,
        "n_granularities": state.partition.n_groups,
        "wall_time_seconds": wall,
        "ranking_path": str(ranking_path),
        "partition_path": str(partition_path),
    }
    _write_json(out / "fit_report.json", report)
    return report


def cmd_fit(args) -> int:
    data = _load(args)
    out = _outdir(args)
    report = run_fit(data, _hyper(args), out, args.export_graphs)
    print(f"fit: {report['n_iter']} iterations, ranking of {data.d} features -> {report['ranking_path']}")
    return 0


def run_eval(data, ranking, rho_list, runs, seed, standardize_data=True) -> list[dict]:
    if data.labels is None:
        raise CliError("evaluation requires labels")
    if standardize_data:
        data, _ = standardize(data)
    return evaluate_ranking(data, ranking, rho_list, runs, seed)


def cmd_eval(args) -> int:
    data = _load(args)
    if data.labels is None:
        raise CliError("evaluation requires labels")
    ranking_path = Path(args.ranking)
    if not ranking_path.is_file():
        raise CliError(f"ranking file not found: {ranking_path}")
    ranking = load_ranking(ranking_path, data.feature_ids)
    seed = _seed(args)
    rows = run_eval(data, ranking, args.rho_list, args.runs, seed, not args.raw)
    if not rows:
        raise CliError(f"no rho in {args.rho_list} is <= the {data.d} available features")
    out = _outdir(args)
    _write_json(out / "metrics.json", {"data": str(args.data), "ranking": str(ranking_path),
                                       "runs": args.runs, "seed": seed, "results": rows})
    _write_csv(out / "metrics.csv", METRIC_FIELDS, rows)
    for r in rows:
        print(f"rho={r['rho']:>4}  ACC {r['acc_mean']:.4f} ± {r['acc_std']:.4f}  "
              f"NMI {r['nmi_mean']:.4f} ± {r['nmi_std']:.4f}")
    return 0


def cmd_synth(args) -> int:
    try:
        spec = SyntheticSpec(n=args.n, n_clusters=args.n_clusters, n_causal=args.n_causal,
                             n_spurious=args.n_spurious, n_noise=args.n_noise,
                             confound_strength=args.confound_strength,
                             noise_sigma=args.noise_sigma, seed=_seed(args))
    except ValueError as exc:
        raise CliError(f"invalid synthetic settings: {exc}") from None
    data, truth = synthesize(spec)
    out = _outdir(args)
    save_csv(data, out / "data.csv")
    _write_json(out / "ground_truth.json", truth)
    print(f"synth: {data.n} samples x {data.d} features -> {out / 'data.csv'}")
    return 0


def _point_key(alpha, beta, lam) -> str:
    return f"alpha={alpha!r}_beta={beta!r}_lambda={lam!r}"


def _sweep_point(data_path, fmt, hyper_kwargs, rho_list, runs, seed, raw, point_dir):
    """Fit and evaluate one grid point; leaves a ``done`` marker on success."""
    point_dir = Path(point_dir)
    point_dir.mkdir(parents=True, exist_ok=True)
    done = point_dir / "done"
    if done.exists():
        return "cached"
    data = load_dataset(data_path, fmt)
    run_fit(data, HyperParams(**hyper_kwargs), point_dir)
    ranking = load_ranking(point_dir / "ranking.json", data.feature_ids)
    rows = run_eval(data, ranking, rho_list, runs, seed, not raw)
    _write_csv(point_dir / "metrics.csv", METRIC_FIELDS, rows)
    done.write_text("ok\n", encoding="utf-8")
    return "ran"


def cmd_sweep(args) -> int:
    data = _load(args)
    if data.labels is None:
        raise CliError("evaluation requires labels")
    out = _outdir(args)
    seed = _seed(args)
    grid = list(itertools.product(args.alpha, args.beta, args.lam))
    base = _hyper(args, alpha=1.0, beta=1.0, lam=1.0).to_dict()
    jobs = []
    for alpha, beta, lam in grid:
        kwargs = {**base, "alpha": alpha, "beta": beta, "lam": lam}
        jobs.append(((alpha, beta, lam),
                     (str(args.data), args.format, kwargs, args.rho_list, args.runs, seed, args.raw,
                      str(out / "points" / _point_key(alpha, beta, lam)))))

    failures = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {key: pool.submit(_sweep_point, *job) for key, job in jobs}
            for key, fut in futures.items():
                try:
                    fut.result()
                except Exception as exc:  # recorded, sweep continues
                    failures[key] = f"{type(exc).__name__}: {exc}"
    else:
        for key, job in jobs:
            try:
                _sweep_point(*job)
            except Exception as exc:  # recorded, sweep continues
                failures[key] = f"{type(exc).__name__}: {exc}"

    rows = []
    for (alpha, beta, lam), job in jobs:
        if (alpha, beta, lam) in failures:
            logger.error("grid point %s failed: %s", _point_key(alpha, beta, lam), failures[(alpha, beta, lam)])
            continue
        with open(Path(job[-1]) / "metrics.csv", newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                rows.append({"alpha": alpha, "beta": beta, "lambda": lam, **r})
    _write_csv(out / "results.csv", SWEEP_FIELDS, rows)
    _write_csv(out / "failures.csv", ["alpha", "beta", "lambda", "error"],
               [{"alpha": a, "beta": b, "lambda": l, "error": e} for (a, b, l), e in failures.items()])
    print(f"sweep: {len(grid) - len(failures)}/{len(grid)} grid points succeeded -> {out / 'results.csv'}")
    if failures and len(failures) == len(grid):
        return 1
    return 0


# -- parser ------------------------------------------------------------------------------

def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="dataset file (CSV rows are samples)")
    p.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--raw", action="store_true", help="skip feature standardization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")


def _add_hyper_args(p, grid=False):
    num = _float_list if grid else float
    p.add_argument("--alpha", type=num, default=[1.0] if grid else 1.0)
    p.add_argument("--beta", type=num, default=[1e7] if grid else 1e7)
    p.add_argument("--lambda", dest="lam", type=num, default=[1.0] if grid else 1.0)
    p.add_argument("--k", type=int, default=5, help="neighbours per graph column")
    p.add_argument("--h", type=int, default=None, help="embedding dimension (default: number of classes)")
    p.add_argument("--rho", type=int, default=20, help="number of selected features")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-outer", type=int, default=50)
    p.add_argument("--outer-tol", type=float, default=1e-5)
    p.add_argument("--variant", choices=VARIANTS, default="full")
    p.add_argument("--freeze-partition", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causefs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every outer iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the selector and write a feature ranking")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--export-graphs", action="store_true", help="write graphs as 'i j value' triplets")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="k-means ACC/NMI of the top-ranked features")
    _add_data_args(p)
    p.add_argument("--ranking", required=True)
    p.add_argument("--rho-list", type=_int_list, default=list(DEFAULT_RHO_LIST))
    p.add_argument("--runs", type=int, default=50, help="k-means runs averaged per rho")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a confounded synthetic dataset")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--n-clusters", type=int, default=3)
    p.add_argument("--n-causal", type=int, default=10)
    p.add_argument("--n-spurious", type=int, default=10)
    p.add_argument("--n-noise", type=int, default=80)
    p.add_argument("--confound-strength", type=float, default=2.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="grid of fits over alpha, beta and lambda")
    _add_data_args(p)
    _add_hyper_args(p, grid=True)
    p.add_argument("--rho-list", type=_int_list, default=list(DEFAULT_RHO_LIST))
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, RuntimeError, OSError, FloatingPointError) as exc:
        print(f"causefs {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
