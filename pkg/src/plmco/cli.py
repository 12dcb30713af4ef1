"""Command-line entry point: ``bench``, ``plot``, ``lab`` and ``list``.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import bench, plotting
from .distributions import Smoothing
from .mc_integration import (
    Uniform1D,
    empirical_bias_variance,
    importance_estimate,
    naive_mco_argmin,
)
from .objectives import REGISTRY, make_problem

log = logging.getLogger("plmco")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    problems: list = field(default_factory=lambda: ["hartman6"])
    algorithms: list = field(default_factory=lambda: list(bench.ALGORITHMS))
    trials: int = 100
    master_seed: int = 0
    budget: int = None
    pop_size: int = None
    smoothing: dict = field(default_factory=lambda: asdict(Smoothing()))
    cv: dict = field(default_factory=lambda: {"folds": 4, "kappas": [0.05, 0.10, 0.15],
                                               "component_counts": [1, 2, 3]})
    archive_window: int = 1
    n_checkpoints: int = 50
    out_dir: str = "results"
    plots: bool = True

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.smoothing = {**asdict(Smoothing()), **cfg.smoothing}
        cfg.cv = {**cls().cv, **cfg.cv}
        return cfg

    def to_dict(self):
        return asdict(self)

    def errors(self):
        errs = []
        if not isinstance(self.trials, int) or self.trials < 1:
            errs.append(f"trials must be a positive integer (got {self.trials!r})")
        if not self.problems:
            errs.append("no problems given")
        if not self.algorithms:
            errs.append("no algorithms given")
        for key in ("budget", "pop_size"):
            v = getattr(self, key)
            if v is not None and (not isinstance(v, int) or v < 1):
                errs.append(f"{key} must be a positive integer or null (got {v!r})")
        if self.n_checkpoints < 2:
            errs.append("n_checkpoints must be >= 2")
        if errs:
            return errs
        try:
            settings = self.settings()
        except (TypeError, ValueError) as exc:
            return [f"invalid smoothing/cv settings: {exc}"]
        return bench.validate(self.problems, self.algorithms, settings)

    def settings(self):
        return bench.BenchSettings(
            pop_size=self.pop_size, budget=self.budget, smoothing=Smoothing(**self.smoothing),
            kappas=tuple(float(k) for k in self.cv["kappas"]),
            component_counts=tuple(int(k) for k in self.cv["component_counts"]),
            folds=int(self.cv["folds"]), archive_window=int(self.archive_window),
            n_checkpoints=int(self.n_checkpoints))


def _csv_list(text, conv=str):
    return [conv(t.strip()) for t in text.split(",") if t.strip()]


def _safe(name):
    return name.replace(":", "-")


def load_config(args):
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = RunConfig.from_dict(data)
    if args.problem:
        cfg.problems = [p for chunk in args.problem for p in _csv_list(chunk)]
    if args.algos is not None:
        cfg.algorithms = _csv_list(args.algos)
    for attr, key in (("trials", "trials"), ("seed", "master_seed"), ("budget", "budget"),
                      ("pop_size", "pop_size"), ("window", "archive_window"),
                      ("checkpoints", "n_checkpoints"), ("out", "out_dir")):
        v = getattr(args, attr)
        if v is not None:
            setattr(cfg, key, v)
    for key in ("alpha", "beta", "q"):
        v = getattr(args, key)
        if v is not None:
            cfg.smoothing[key] = v
    if args.folds is not None:
        cfg.cv["folds"] = args.folds
    if args.kappas is not None:
        cfg.cv["kappas"] = _csv_list(args.kappas, float)
    if args.components is not None:
        cfg.cv["component_counts"] = _csv_list(args.components, int)
    if args.no_plots:
        cfg.plots = False
    return cfg


def cmd_bench(args):
    try:
        cfg = load_config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    errs = cfg.errors()
    if errs:
        print("invalid configuration:", file=sys.stderr)
        for e in errs:
            print(f"  - {e}", file=sys.stderr)
        return EXIT_USAGE
    settings = cfg.settings()
    os.makedirs(cfg.out_dir, exist_ok=True)
    log.info("running %d trials of %s on %s", cfg.trials, ",".join(cfg.algorithms), ",".join(cfg.problems))
    results = bench.run_benchmark(cfg.problems, cfg.algorithms, cfg.trials, cfg.master_seed, settings,
                                  threads=args.threads)
    stats = {}
    for pname in cfg.problems:
        prob = make_problem(pname)
        rs = [r for r in results if r.problem == prob.key]
        pstats = bench.aggregate(rs, prob.g_star, bench.checkpoints_for(prob.dim, settings))
        stats.update(pstats)
        if cfg.plots:
            for style in plotting.STYLES:
                path = os.path.join(cfg.out_dir, f"{_safe(prob.key)}_{style}.svg")
                plotting.render(list(pstats.values()), style, path, title=prob.key,
                                empirical=prob.g_star is None)
    bench.write_csv(os.path.join(cfg.out_dir, "raw.csv"), results=results)
    bench.write_csv(os.path.join(cfg.out_dir, "aggregate.csv"), stats=stats)
    with open(os.path.join(cfg.out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", cfg.out_dir)
    return EXIT_OK


def cmd_plot(args):
    try:
        stats = bench.read_aggregate_csv(args.csv)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problems = sorted({p for p, _ in stats})
    if args.problem:
        problem = args.problem
    elif len(problems) == 1:
        problem = problems[0]
    else:
        print(f"error: CSV holds several problems ({', '.join(problems)}); pick one with --problem",
              file=sys.stderr)
        return EXIT_USAGE
    chosen = [s for (p, _), s in stats.items() if p == problem]
    if not chosen:
        print(f"error: no rows for problem {problem!r}", file=sys.stderr)
        return EXIT_USAGE
    empirical = args.empirical
    if empirical is None:
        try:
            empirical = make_problem(problem).g_star is None
        except ValueError:
            empirical = False
    plotting.render(chosen, args.style, args.out, title=problem, empirical=empirical)
    return EXIT_OK


# -- lab demos ------------------------------------------------------------------

def lab_is_unbiased(reps, m, rng):
    est = np.array([importance_estimate(lambda x: x, Uniform1D(), m, rng).value for _ in range(reps)])
    mean, sd = est.mean(), est.std(ddof=1)
    se = sd / np.sqrt(reps)
    return ["reps", "m", "truth", "mean", "sd", "se", "within_4se"], [
        [reps, m, 0.5, mean, sd, se, int(abs(mean - 0.5) <= 4 * se)]]


def lab_bias_variance(reps, m, rng):
    """IS estimates of the integral of x on [0, 1], plain and shrunk toward 0."""
    rows = []
    for mm in sorted({1, m, 10 * m}):
        est = np.array([importance_estimate(lambda x: x, Uniform1D(), mm, rng).value for _ in range(reps)])
        for shrink in (1.0, 0.9):
            r = empirical_bias_variance(shrink * est, 0.5)
            rows.append([mm, shrink, reps, r.mse, r.bias_sq, r.variance, r.mse - (r.bias_sq + r.variance)])
    return ["m", "shrink", "reps", "mse", "bias_sq", "variance", "identity_residual"], rows


def lab_naive_mco(reps, m, rng):
    """Pick theta in {0, .25, .5, .75, 1} minimizing the IS estimate of
    E[(theta - x)^2], x ~ U(0, 1); the true minimizer is 0.5."""
    thetas = [0.0, 0.25, 0.5, 0.75, 1.0]
    def true_loss(th):
        return th * th - th + 1.0 / 3.0
    h = Uniform1D()
    picks = []
    for _ in range(reps):
        x = h.sample(m, rng)
        picks.append(naive_mco_argmin(thetas, lambda th, xs: (th - xs) ** 2, x, h.pdf(x)))
    picks = np.array(picks)
    mis = float(np.mean(picks != 0.5))
    excess = float(np.mean([true_loss(p) - true_loss(0.5) for p in picks]))
    return ["m", "reps", "theta_opt", "misselection_freq", "mean_excess_loss"], [[m, reps, 0.5, mis, excess]]


LAB_DEMOS = {"is_unbiased": lab_is_unbiased, "bias_variance": lab_bias_variance, "naive_mco": lab_naive_mco}
LAB_DEFAULTS = {"is_unbiased": (2000, 100), "bias_variance": (1000, 10), "naive_mco": (500, 2)}


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def cmd_lab(args):
    reps_d, m_d = LAB_DEFAULTS[args.demo]
    reps = args.reps if args.reps is not None else reps_d
    m = args.m if args.m is not None else m_d
    if reps < 2 or m < 1:
        print("error: --reps must be >= 2 and --m >= 1", file=sys.stderr)
        return EXIT_USAGE
    header, rows = LAB_DEMOS[args.demo](reps, m, np.random.default_rng(args.seed))
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows([[_fmt(v) for v in row] for row in rows])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_list(args):
    print("problems:")
    for name in REGISTRY:
        p = make_problem(name)
        g = "unknown" if p.g_star is None else f"{p.g_star:.5f}"
        extra = "  (any dim >= 2 via rosenbrock:N)" if name == "rosenbrock" else ""
        print(f"  {name} {p.dim} {g}{extra}")
    print("algorithms:")
    print("  " + " ".join(bench.ALGORITHMS))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="plmco", description="Cross-entropy optimization with "
                                 "cross-validated elite fraction and mixture size.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the benchmark protocol and write CSVs and figures")
    b.add_argument("--config", help="JSON run configuration; flags override its keys")
    b.add_argument("--problem", action="append", help="problem name(s), comma separated; name:dim allowed")
    b.add_argument("--algos", help="comma separated algorithm names")
    b.add_argument("--trials", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--budget", type=int)
    b.add_argument("--pop-size", type=int)
    b.add_argument("--alpha", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--q", type=float)
    b.add_argument("--folds", type=int)
    b.add_argument("--kappas", help="comma separated CV elite fractions")
    b.add_argument("--components", help="comma separated CV mixture sizes")
    b.add_argument("--window", type=int, help="archive window in iterations")
    b.add_argument("--checkpoints", type=int, help="number of checkpoints")
    b.add_argument("--out", help="output directory")
    b.add_argument("--threads", type=int, default=None, help="worker processes (default: MCO_CE_THREADS)")
    b.add_argument("--no-plots", action="store_true")
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="draw a figure from an aggregate CSV")
    p.add_argument("csv")
    p.add_argument("--style", choices=plotting.STYLES, default="semilog_median")
    p.add_argument("--out", required=True)
    p.add_argument("--problem")
    p.add_argument("--empirical", action="store_true", default=None,
                   help="use the best observed value as the reference optimum")
    p.set_defaults(func=cmd_plot)

    lab = sub.add_parser("lab", help="Monte Carlo integration demos")
    lab.add_argument("demo", choices=sorted(LAB_DEMOS))
    lab.add_argument("--reps", type=int)
    lab.add_argument("--m", type=int)
    lab.add_argument("--seed", type=int, default=0)
    lab.add_argument("--out")
    lab.set_defaults(func=cmd_lab)

    ls = sub.add_parser("list", help="show problems and algorithms")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
