"""``mhminibatch`` command line: make-correction, run, metrics.

Outputs are plain CSV with a header row. Floats are written with 17
significant digits and nothing time-dependent is recorded, so a fixed seed
gives byte-identical files.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .chain import ChainError, run_chain, summarize
from .config import ConfigError, load_config
from .correction import TABLE_ENV_VAR, make_correction, save_table
from .metrics import (
    Grid2D,
    GridMassError,
    accuracy_curve,
    bin_counts,
    chi_squared,
    poisson_loglike,
    true_bin_probs,
    tv_distance,
)

METRICS = ("poisson", "chi2", "tv", "accuracy")
SUMMARY_FIELDS = ("T", "acceptance_rate", "mean_batch", "median_batch", "p99_batch",
                  "max_batch", "total_data", "side_cost", "exhausted_steps")


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def trial_dir(out, trial):
    return Path(out) / f"trial_{trial:03d}"


# -- make-correction ---------------------------------------------------------------

def cmd_make_correction(args):
    try:
        table = make_correction(args.sigma, args.lam, args.N, args.V)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        save_table(table, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    print(f"residual={table.residual:.6g}")
    print(f"variance={table.variance():.6g}")
    print(f"wrote {args.out}")
    return 0


# -- run ---------------------------------------------------------------------------

def write_trial(path, result):
    path.mkdir(parents=True, exist_ok=True)
    d = result.samples.shape[1]
    header = ["t"] + [f"theta_{k + 1}" for k in range(d)] + ["accept", "batch", "epsilon",
                                                             "exhausted"]
    rows = (
        [t + 1, *result.samples[t], bool(result.accept_flags[t]), int(result.batch_sizes[t]),
         float(result.epsilon_estimates[t]), bool(result.exhausted[t])]
        for t in range(result.T)
    )
    write_csv(path / "samples.csv", header, rows)
    s = summarize(result)
    write_csv(path / "summary.csv", SUMMARY_FIELDS, [[s[k] for k in SUMMARY_FIELDS]])
    write_csv(path / "histogram.csv", ("lower", "upper", "count"),
              [[lo, 2 * lo, c] for lo, c in s["histogram"]])
    return s


def cmd_run(args):
    overrides = list(args.set or [])
    for key, value in (("output.dir", args.out), ("chain.seed", args.seed),
                       ("chain.T", args.T), ("chain.trials", args.trials)):
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        cfg = load_config(args.config, overrides)
        model = cfg.model()
        test = cfg.test()
        dim = model.dim
        configs = [cfg.chain_config(i, dim, test) for i in range(cfg["chain.trials"])]
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.render(), encoding="ascii")
    rows = []
    for i, chain_cfg in enumerate(configs):
        try:
            result = run_chain(model, chain_cfg)
        except ChainError as exc:
            write_trial(trial_dir(out, i), exc.partial)
            print(f"error: trial {i}: {exc}", file=sys.stderr)
            return 1
        s = write_trial(trial_dir(out, i), result)
        rows.append([i] + [s[k] for k in SUMMARY_FIELDS])
        if not args.quiet:
            print(f"trial {i}: acceptance {s['acceptance_rate']:.3f}, "
                  f"mean batch {s['mean_batch']:.1f}")
    write_csv(out / "summary.csv", ("trial",) + SUMMARY_FIELDS, rows)
    return 0


# -- metrics -----------------------------------------------------------------------

def read_samples(path):
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = [i for i, h in enumerate(header) if h.startswith("theta_")]
    return data[:, cols], data[:, header.index("batch")].astype(np.int64)


def list_trials(results):
    trials = sorted(p for p in Path(results).glob("trial_*") if (p / "samples.csv").exists())
    if not trials:
        raise FileNotFoundError(f"no trial_*/samples.csv under {results}")
    return trials


def cmd_metrics(args):
    wanted = []
    for name in args.metric.split(","):
        name = name.strip()
        if name not in METRICS:
            args.parser.error(f"unknown metric {name!r}; choose from {', '.join(METRICS)}")
        wanted.append(name)
    if "tv" in wanted and not args.reference:
        args.parser.error("the tv metric needs --reference RESULTS_DIR")
    try:
        cfg = load_config(Path(args.results) / "config.txt")
        trials = list_trials(args.results)
        grid = Grid2D.parse(args.grid) if args.grid else cfg["metrics.grid"]
        samples = [read_samples(t / "samples.csv") for t in trials]
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    header = ["trial"]
    columns = []
    binned = {"poisson", "chi2", "tv"} & set(wanted)
    if binned:
        if samples[0][0].shape[1] != 2:
            print("error: binned metrics need a 2-parameter model", file=sys.stderr)
            return 2
        counts = [bin_counts(s, grid) for s, _ in samples]
        header.append("n_in_grid")
        columns.append([int(c.sum()) for c in counts])
    if {"poisson", "chi2"} & set(wanted):
        model = cfg.model().with_temperature(cfg.final_temperature())
        try:
            P = true_bin_probs(model, grid)
        except GridMassError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if "poisson" in wanted:
            vals = [poisson_loglike(c, P, int(c.sum())) for c in counts]
            header += ["poisson", "poisson_impossible"]
            columns += [[v.value for v in vals], [v.impossible for v in vals]]
        if "chi2" in wanted:
            vals = [chi_squared(c, P, int(c.sum())) for c in counts]
            header += ["chi2", "chi2_impossible"]
            columns += [[v.value for v in vals], [v.impossible for v in vals]]
    if "tv" in wanted:
        try:
            ref = sum(bin_counts(read_samples(t / "samples.csv")[0], grid)
                      for t in list_trials(args.reference))
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        header.append("tv")
        columns.append([tv_distance(c, ref) for c in counts])
    if "accuracy" in wanted:
        try:
            test = cfg.test_set()
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if test is None:
            print("error: accuracy needs data.test_images and data.test_labels", file=sys.stderr)
            return 2
        finals = []
        for t, (th, batches) in zip(trials, samples):
            cum, acc = accuracy_curve(th, batches, test.features, test.labels)
            write_csv(t / "accuracy.csv", ("t", "cumulative_data", "accuracy"),
                      [[i + 1, int(c), float(a)] for i, (c, a) in enumerate(zip(cum, acc))])
            finals.append(float(acc[-1]))
        header.append("final_accuracy")
        columns.append(finals)

    rows = [[int(t.name.split("_")[1])] + [col[i] for col in columns]
            for i, t in enumerate(trials)]
    out = Path(args.out) if args.out else Path(args.results) / "metrics.csv"
    write_csv(out, header, rows)
    if not args.quiet:
        print(f"wrote {out}")
    return 0


# -- entry point -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="mhminibatch",
        description="Minibatch Metropolis-Hastings experiments.",
        epilog=f"The default correction table can be replaced by setting {TABLE_ENV_VAR}.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    mc = sub.add_parser("make-correction", help="precompute a correction table")
    mc.add_argument("--sigma", type=float, default=1.0)
    mc.add_argument("--lam", type=float, default=10.0, help="ridge penalty")
    mc.add_argument("--N", type=int, default=4000, help="half the number of grid cells")
    mc.add_argument("--V", type=float, default=20.0, help="half-width of the density support")
    mc.add_argument("--out", required=True, help="table file to write")
    mc.set_defaults(func=cmd_make_correction)

    run = sub.add_parser("run", help="run chains described by a config file")
    run.add_argument("config")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    run.add_argument("--out", help="output directory (output.dir)")
    run.add_argument("--seed", type=int, help="master seed (chain.seed)")
    run.add_argument("--T", type=int, help="samples per chain (chain.T)")
    run.add_argument("--trials", type=int, help="number of chains (chain.trials)")
    run.add_argument("-q", "--quiet", action="store_true")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="posterior-quality metrics for a results directory")
    met.add_argument("results")
    met.add_argument("--metric", default="poisson,chi2",
                     help=f"comma-separated subset of {', '.join(METRICS)}")
    met.add_argument("--grid", help="lo1:hi1:n1,lo2:hi2:n2 (default: metrics.grid)")
    met.add_argument("--reference", help="results directory used as the tv reference")
    met.add_argument("--out", help="metrics CSV path (default: RESULTS/metrics.csv)")
    met.add_argument("-q", "--quiet", action="store_true")
    met.set_defaults(func=cmd_metrics, parser=met)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
