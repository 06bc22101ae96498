"""Command-line surface.

Subcommands: ``gen`` (synthetic data), ``build`` (cohorts), ``eval``
(recall report + size CDF), ``sweep`` (recall across the kernel power
grid), ``bench`` (wall-clock scaling), ``verify`` (anonymity check), and
``debug-hash`` (hex hash words for one user).  Report-producing commands
render the matching figure next to each delimited file.

Values resolve as: command-line flag, then config file (flat ``key = value``
lines, ``#`` comments), then built-in default.  All randomness flows from
``--seed``; reruns with identical inputs produce byte-identical outputs at
any ``--threads`` setting.

Exit codes: 0 success, 2 usage/config error, 3 infeasibility (n < K),
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import time
import tracemalloc
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .cohorts import (
    CohortAssignment,
    build_ccws,
    build_hash_and_sort,
    build_random,
    read_assignment,
    size_distribution,
    verify_k_anonymity,
    write_assignment,
    write_assignment_metadata,
)
from .errors import ConfigError, DatasetFormatError, InfeasibilityError
from .evaluation import (
    SyntheticConfig,
    default_p_grid,
    evaluate,
    generate_synthetic,
    load_campaigns,
    store_campaigns,
    sweep_p,
    write_labels,
    write_recall_report,
    write_size_cdf_csv,
    write_sweep_csv,
)
from .hashers import HashMethod, hash_vector
from .vectors import load_dataset, store_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

DEFAULTS = {
    "k": 20,
    "t": 1000,
    "p": 1.0,
    "m": 75,
    "tau": 0.5,
    "seed": 42,
    "threads": 0,  # 0 = all cores
    "cws_bits": "zero",
    "method": "ccws",
}

BUILD_METHODS = ("ccws", "cws", "minhash", "signrp", "random")
BENCH_SIZES = (25_000, 50_000, 100_000, 200_000)


@dataclass
class RunConfig:
    """Resolved run parameters shared by the subcommands."""

    subcommand: str
    k: int
    t: int
    p: float
    m: int
    tau: float
    seed: int
    threads: int
    method: str
    cws_bits: str

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.t < 1:
            raise ConfigError("t must be >= 1")
        if self.p <= 0:
            raise ConfigError("p must be positive")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must be in (0, 1]")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.method not in BUILD_METHODS:
            raise ConfigError(f"method must be one of {', '.join(BUILD_METHODS)}")
        if self.cws_bits not in ("zero", "full"):
            raise ConfigError("cws-bits must be 'zero' or 'full'")


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace, key: str, cast, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    file_values = getattr(args, "_config_values", {})
    if key in file_values:
        try:
            return cast(file_values[key])
        except ValueError:
            raise ConfigError(f"config value {key}={file_values[key]!r} is not valid") from None
    return default


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        subcommand=args.command,
        k=_resolve(args, "k", int, DEFAULTS["k"]),
        t=_resolve(args, "t", int, DEFAULTS["t"]),
        p=_resolve(args, "p", float, DEFAULTS["p"]),
        m=_resolve(args, "m", int, DEFAULTS["m"]),
        tau=_resolve(args, "tau", float, DEFAULTS["tau"]),
        seed=_resolve(args, "seed", int, DEFAULTS["seed"]),
        threads=_resolve(args, "threads", int, DEFAULTS["threads"]),
        method=_resolve(args, "method", str, DEFAULTS["method"]),
        cws_bits=_resolve(args, "cws_bits", str, DEFAULTS["cws_bits"]),
    )
    cfg.validate()
    return cfg


def _hash_method(cfg: RunConfig) -> HashMethod:
    if cfg.method == "cws":
        return HashMethod.cws(p=cfg.p, bits=cfg.cws_bits)
    if cfg.method == "minhash":
        return HashMethod.minhash()
    if cfg.method == "signrp":
        return HashMethod.signrp()
    raise ConfigError(f"{cfg.method} is not a hashing method")


def _build_assignment(dataset, cfg: RunConfig) -> CohortAssignment:
    if cfg.method == "ccws":
        return build_ccws(dataset, p=cfg.p, T=cfg.t, K=cfg.k, experiment_seed=cfg.seed)
    if cfg.method == "random":
        return build_random(dataset, K=cfg.k, experiment_seed=cfg.seed)
    return build_hash_and_sort(dataset, _hash_method(cfg), m=cfg.m, K=cfg.k,
                               experiment_seed=cfg.seed, threads=cfg.threads)


# --- subcommands -------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    synth = SyntheticConfig(
        n=_resolve(args, "n", int, SyntheticConfig.n),
        d=_resolve(args, "d", int, SyntheticConfig.d),
        clusters=_resolve(args, "clusters", int, SyntheticConfig.clusters),
        support_size=_resolve(args, "support_size", int, SyntheticConfig.support_size),
        noise_rate=_resolve(args, "noise_rate", float, SyntheticConfig.noise_rate),
        weight_mu=_resolve(args, "weight_mu", float, SyntheticConfig.weight_mu),
        weight_base_sigma=_resolve(args, "weight_base_sigma", float,
                                   SyntheticConfig.weight_base_sigma),
        weight_jitter_sigma=_resolve(args, "weight_jitter_sigma", float,
                                     SyntheticConfig.weight_jitter_sigma),
        campaigns_per_cluster=_resolve(args, "campaigns_per_cluster", int,
                                       SyntheticConfig.campaigns_per_cluster),
        seed=cfg.seed,
    )
    dataset, campaigns, labels = generate_synthetic(synth)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store_dataset(dataset, out_dir / "dataset.tsv")
    store_campaigns(campaigns, out_dir / "campaigns.tsv")
    write_labels(dataset.user_ids, labels, out_dir / "labels.tsv")
    print(f"wrote {out_dir / 'dataset.tsv'} ({dataset.n} users, d={dataset.d})")
    print(f"wrote {out_dir / 'campaigns.tsv'} ({len(campaigns)} campaigns)")
    print(f"wrote {out_dir / 'labels.tsv'}")
    return EXIT_OK


def cmd_build(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = load_dataset(args.dataset)
    if cfg.method == "ccws" and dataset.n < 2 * cfg.k:
        print(f"warning: {dataset.n} users < 2K={2 * cfg.k}; everyone lands in one cohort",
              file=sys.stderr)
    assignment = _build_assignment(dataset, cfg)
    out = Path(args.out)
    write_assignment(assignment, out)
    write_assignment_metadata(assignment, out.with_suffix(out.suffix + ".meta"))
    sizes = assignment.sizes()
    print(f"method={assignment.method} cohorts={len(assignment.cohorts)} "
          f"size_min={sizes.min()} size_median={int(np.median(sizes))} "
          f"size_max={sizes.max()} iterations={assignment.iterations_used}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = load_dataset(args.dataset)
    assignment_path = Path(args.assignment)
    assignment = read_assignment(
        assignment_path,
        assignment_path.with_suffix(assignment_path.suffix + ".meta"))
    campaigns = load_campaigns(args.campaigns)
    report = evaluate(assignment, dataset, campaigns, tau=cfg.tau)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_recall_report(report, out_dir / "report.csv")
    distribution = size_distribution(assignment)
    write_size_cdf_csv(distribution, out_dir / "size_cdf.csv")
    plots.plot_size_cdf(distribution, out_dir / "size_cdf.png", k=cfg.k)
    print(f"macro={report.macro_recall:.6f} micro={report.micro_recall:.6f} "
          f"excluded={report.campaigns_excluded}")
    return EXIT_OK


def _parse_p_grid(spec: str) -> list[float]:
    try:
        if ":" in spec:
            lo_s, step_s, hi_s = spec.split(":")
            lo, step, hi = float(lo_s), float(step_s), float(hi_s)
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(round((hi - lo) / step)) + 1
            return [round(lo + i * step, 10) for i in range(count)]
        return [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"bad p grid {spec!r}; use 'lo:step:hi' or 'p1,p2,...'") from None


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = load_dataset(args.dataset)
    campaigns = load_campaigns(args.campaigns)
    grid = _parse_p_grid(args.p_grid) if args.p_grid else default_p_grid()
    points = sweep_p(dataset, campaigns, grid, K=cfg.k, T=cfg.t,
                     experiment_seed=cfg.seed, tau=cfg.tau)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(points, out_dir / "sweep.csv")
    plots.plot_sweep(points, out_dir / "sweep.png")
    for pt in points:
        print(f"p={pt.p:g} macro={pt.macro_recall:.6f} micro={pt.micro_recall:.6f}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    sizes = [int(tok) for tok in args.sizes.split(",")] if args.sizes else list(BENCH_SIZES)
    if any(s < cfg.k for s in sizes):
        raise ConfigError("bench sizes must be >= k")
    methods = args.methods.split(",") if args.methods else ["ccws"]
    for method in methods:
        if method not in BUILD_METHODS:
            raise ConfigError(f"unknown bench method {method!r}")
    t = _resolve(args, "t", int, 200)  # benchmark default, not the build default
    rows: list[dict] = []
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for n in sizes:
        dataset, _, _ = generate_synthetic(SyntheticConfig(n=n, seed=cfg.seed))
        for method in methods:
            run_cfg = RunConfig(subcommand="bench", k=cfg.k, t=t, p=cfg.p, m=cfg.m,
                                tau=cfg.tau, seed=cfg.seed, threads=cfg.threads,
                                method=method, cws_bits=cfg.cws_bits)
            tracemalloc.start()
            start = time.perf_counter()
            assignment = _build_assignment(dataset, run_cfg)
            seconds = time.perf_counter() - start
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            row = {"n": n, "method": method, "seconds": seconds,
                   "peak_cohorts": len(assignment.cohorts), "peak_mem_bytes": peak}
            rows.append(row)
            print(f"n={n} method={method} seconds={seconds:.3f} "
                  f"peak_cohorts={row['peak_cohorts']} peak_mem_bytes={peak}")
    with (out_dir / "bench.csv").open("w", encoding="utf-8") as fh:
        fh.write("n,method,seconds,peak_cohorts,peak_mem_bytes\n")
        for row in rows:
            fh.write(f"{row['n']},{row['method']},{row['seconds']:.6f},"
                     f"{row['peak_cohorts']},{row['peak_mem_bytes']}\n")
    plots.plot_bench(rows, out_dir / "bench.png")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    assignment_path = Path(args.assignment)
    assignment = read_assignment(
        assignment_path,
        assignment_path.with_suffix(assignment_path.suffix + ".meta"))
    dataset = load_dataset(args.dataset) if args.dataset else None
    report = verify_k_anonymity(assignment, cfg.k, dataset)
    if report.ok:
        print("ok=true")
    else:
        print(f"ok=false violations={len(report.violations)} "
              f"missing_users={len(report.missing_users)}")
        for cid in report.violations:
            print(f"violation\t{cid}")
    return EXIT_OK


def cmd_debug_hash(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    dataset = load_dataset(args.dataset)
    try:
        row = dataset.index_of(args.user)
    except KeyError:
        raise ConfigError(f"user {args.user!r} not found in dataset") from None
    if cfg.method in ("ccws", "random"):
        raise ConfigError("debug-hash needs a hashing method: cws, minhash, or signrp")
    vector = hash_vector(dataset.vector(row), _hash_method(cfg), cfg.m, cfg.seed)
    for word in vector.hex_words():
        print(word)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--k", type=int, help="anonymity bound K (default 20)")
    sub.add_argument("--seed", type=int, help="experiment seed (default 42)")
    sub.add_argument("--threads", type=int, help="worker thread cap, 0 = all cores")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcohort",
        description="K-anonymous user cohorts from sparse feature vectors")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a synthetic dataset and campaigns")
    _add_common(gen)
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--n", type=int, help="number of users")
    gen.add_argument("--d", type=int, help="dimensionality")
    gen.add_argument("--clusters", type=int)
    gen.add_argument("--support-size", type=int, dest="support_size")
    gen.add_argument("--noise-rate", type=float, dest="noise_rate")
    gen.add_argument("--weight-mu", type=float, dest="weight_mu")
    gen.add_argument("--weight-base-sigma", type=float, dest="weight_base_sigma")
    gen.add_argument("--weight-jitter-sigma", type=float, dest="weight_jitter_sigma")
    gen.add_argument("--campaigns-per-cluster", type=int, dest="campaigns_per_cluster")
    gen.set_defaults(func=cmd_gen)

    build = commands.add_parser("build", help="build a cohort assignment")
    _add_common(build)
    build.add_argument("--dataset", required=True)
    build.add_argument("--out", required=True, help="assignment file (metadata at <out>.meta)")
    build.add_argument("--method", choices=BUILD_METHODS)
    build.add_argument("--t", type=int, help="max splitting iterations (default 1000)")
    build.add_argument("--p", type=float, help="kernel power (default 1.0)")
    build.add_argument("--m", type=int, help="hash vector length (default 75)")
    build.add_argument("--cws-bits", choices=("zero", "full"), dest="cws_bits")
    build.set_defaults(func=cmd_build)

    ev = commands.add_parser("eval", help="campaign recall report for an assignment")
    _add_common(ev)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--assignment", required=True)
    ev.add_argument("--campaigns", required=True)
    ev.add_argument("--out-dir", required=True)
    ev.add_argument("--tau", type=float, help="cohort match threshold (default 0.5)")
    ev.set_defaults(func=cmd_eval)

    sweep = commands.add_parser("sweep", help="recall across the kernel power grid")
    _add_common(sweep)
    sweep.add_argument("--dataset", required=True)
    sweep.add_argument("--campaigns", required=True)
    sweep.add_argument("--out-dir", required=True)
    sweep.add_argument("--p-grid", dest="p_grid",
                       help="'lo:step:hi' or comma list (default 0.5:0.1:1.5)")
    sweep.add_argument("--t", type=int)
    sweep.add_argument("--tau", type=float)
    sweep.set_defaults(func=cmd_sweep)

    bench = commands.add_parser("bench", help="wall-clock scaling benchmark")
    _add_common(bench)
    bench.add_argument("--out-dir", required=True)
    bench.add_argument("--sizes", help="comma list of n (default 25k,50k,100k,200k)")
    bench.add_argument("--methods", help="comma list of build methods (default ccws)")
    bench.add_argument("--t", type=int, help="splitting iterations (default 200)")
    bench.add_argument("--p", type=float)
    bench.add_argument("--m", type=int)
    bench.set_defaults(func=cmd_bench)

    verify = commands.add_parser("verify", help="check K-anonymity of an assignment")
    _add_common(verify)
    verify.add_argument("--assignment", required=True)
    verify.add_argument("--dataset", help="also check coverage of this dataset")
    verify.set_defaults(func=cmd_verify)

    debug = commands.add_parser("debug-hash", help="print one user's hash words in hex")
    _add_common(debug)
    debug.add_argument("--dataset", required=True)
    debug.add_argument("--user", required=True)
    debug.add_argument("--method", choices=("cws", "minhash", "signrp"))
    debug.add_argument("--m", type=int)
    debug.add_argument("--p", type=float)
    debug.add_argument("--cws-bits", choices=("zero", "full"), dest="cws_bits")
    debug.set_defaults(func=cmd_debug_hash)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    if getattr(args, "config", None):
        try:
            args._config_values = _read_config_file(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        args._config_values = {}
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
