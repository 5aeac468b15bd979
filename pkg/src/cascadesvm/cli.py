"""``cascadesvm`` command line: train, predict, bench, retention, prob.

Every command prints a JSON run report on stdout (and to ``--report`` when
given).  Exit codes: 0 ok, 2 usage, 3 parse, 4 config, 5 training, 6 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    CensusError,
    RetentionCensus,
    census,
    denominator_inequality,
    fraction_to_json,
    measure_retention,
    retention_prob_balanced,
    retention_prob_random,
)
from .cascade import CascadeError, CascadePlan, PlanError, run_cascade, validate_plan
from .dataset import Dataset, DatasetError, ParseError, load_libsvm, shuffle, stratified_subsample
from .kernel import KernelSpec
from .solver import SolverConfig, SvmModel, TrainingError, smo_train

log = logging.getLogger("cascadesvm")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_TRAINING = 5
EXIT_IO = 6

CACHE_ENV = "CASCADESVM_CACHE_MB"
BENCH_HEADER = ["method", "seed", "accuracy", "sv_count", "train_seconds"]
METHODS = ("direct", "csvm", "bcsvm")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def parse_seeds(text: str) -> List[int]:
    """``"0-9"``, ``"1,2,5"`` or a mix such as ``"0-3,10"``."""
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep and lo:
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _default_cache_mb() -> float:
    raw = os.environ.get(CACHE_ENV)
    if raw is None:
        return 100.0
    try:
        return float(raw)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"{CACHE_ENV} must be a number, got {raw!r}") from None


def _add_svm_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("SVM")
    g.add_argument("--kernel", choices=["rbf", "linear", "polynomial"], default="rbf")
    g.add_argument("--gamma", type=float, default=None, help="kernel gamma (default 1/dim)")
    g.add_argument("--cost", type=float, default=None, help="box constraint C (default 1)")
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--coef0", type=float, default=0.0)
    g.add_argument("--tol", type=float, default=1e-3, help="KKT violation tolerance")
    g.add_argument("--max-iter", type=int, default=10_000_000)
    g.add_argument("--cache-mb", type=float, default=None,
                   help=f"kernel row cache in MB (default ${CACHE_ENV} or 100)")
    g.add_argument("--label-remap", action="store_true", help="read 0/1 labels as -1/+1")


def _add_plan_flags(p: argparse.ArgumentParser, partition: bool = True) -> None:
    g = p.add_argument_group("cascade")
    g.add_argument("--layers", default="1", help="groups per layer, e.g. 8,1 (default 1: direct)")
    if partition:
        g.add_argument("--partition", choices=["random", "balanced"], default="balanced")
    g.add_argument("--merge", choices=["pooled", "pairwise"], default="pooled")
    g.add_argument("--workers", type=int, default=None,
                   help="parallel subset trainers (default: available CPUs)")
    g.add_argument("--allow-nonconverged", action="store_true")


def _solver_config(args, dim: int) -> SolverConfig:
    gamma = args.gamma if args.gamma is not None else 1.0 / max(dim, 1)
    cache = args.cache_mb if args.cache_mb is not None else _default_cache_mb()
    try:
        return SolverConfig(
            C=args.cost if args.cost is not None else 1.0,
            tol=args.tol,
            max_iter=args.max_iter,
            cache_mb=cache,
            kernel=KernelSpec(args.kernel, gamma, args.degree, args.coef0),
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc


def _plan(args, partition: Optional[str] = None) -> CascadePlan:
    try:
        plan = CascadePlan.parse(args.layers, partition=partition or args.partition, merge=args.merge)
        validate_plan(plan)
    except PlanError as exc:
        raise CliError(EXIT_CONFIG, f"invalid cascade plan: {exc}") from exc
    return plan


def _workers(args) -> int:
    return args.workers if args.workers is not None else (os.cpu_count() or 1)


def _load(path: str, args) -> Dataset:
    try:
        return load_libsvm(path, remap01=getattr(args, "label_remap", False))
    except ParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc
    except DatasetError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}: not ASCII text ({exc})") from exc


def _check_trainable(ds: Dataset, path: str) -> None:
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise CliError(EXIT_TRAINING, f"{path}: training data needs both classes "
                                      f"({ds.n_positive} positive, {ds.n_negative} negative)")


def _base_report(command: str, argv: Sequence[str]) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "python": platform.python_version(),
    }


def _emit(report: dict, path: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc
    sys.stdout.write(text)


def _train(ds: Dataset, plan: CascadePlan, cfg: SolverConfig, seed: int, args):
    try:
        return run_cascade(ds, plan, cfg, seed, workers=_workers(args),
                           allow_nonconverged=args.allow_nonconverged)
    except (CascadeError, TrainingError) as exc:
        raise CliError(EXIT_TRAINING, str(exc)) from exc


# commands


def cmd_train(args, argv) -> int:
    plan = _plan(args)
    ds = _load(args.data, args)
    _check_trainable(ds, args.data)
    cfg = _solver_config(args, ds.dim)
    t0 = time.perf_counter()
    model, reports = _train(ds, plan, cfg, args.seed, args)
    seconds = time.perf_counter() - t0
    report = _base_report("train", argv)
    report.update(
        dataset=ds.summary(),
        config={**cfg.to_dict(), **plan.to_dict(), "seed": args.seed, "workers": _workers(args)},
        layers=[r.to_dict() for r in reports],
        model=model.summary(),
        train_seconds=seconds,
    )
    if args.test:
        test = _load(args.test, args)
        if len(test) == 0:
            raise CliError(EXIT_PARSE, f"{args.test}: empty test set")
        report["test"] = {"dataset": test.summary(), "accuracy": float(np.mean(model.predict(test) == test.y))}
    if args.model_out:
        try:
            model.save(args.model_out)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.model_out}: {exc}") from exc
        report["model_file"] = args.model_out
    _emit(report, args.report)
    return EXIT_OK


def cmd_predict(args, argv) -> int:
    try:
        model = SvmModel.load(args.model)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.model}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_PARSE, f"{args.model}: not a model file ({exc})") from exc
    test = _load(args.data, args)
    if len(test) == 0:
        raise CliError(EXIT_PARSE, f"{args.data}: empty test set")
    labels = model.predict(test)
    lines = "".join(("+1\n" if v == 1 else "-1\n") for v in labels)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(lines)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.output}: {exc}") from exc
    report = _base_report("predict", argv)
    report.update(
        dataset=test.summary(),
        model=model.summary(),
        accuracy=float(np.mean(labels == test.y)),
        predictions_file=args.output,
    )
    _emit(report, args.report)
    return EXIT_OK


def _bench_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        acc = "" if r["accuracy"] is None else repr(r["accuracy"])
        sv = "" if r["sv_count"] is None else r["sv_count"]
        w.writerow([r["method"], r["seed"], acc, sv, f"{r['train_seconds']:.6f}"])
    return buf.getvalue()


def run_bench(
    train: Dataset,
    test: Dataset,
    layers: Sequence[int],
    cfg: SolverConfig,
    seeds: Sequence[int],
    *,
    merge: str = "pooled",
    workers: int = 1,
    allow_nonconverged: bool = False,
) -> dict:
    """Direct vs CSVM vs BCSVM on each seed's shuffle of ``train``.

    Per-seed failures are recorded in the rows and do not stop the bench.
    """
    plans = {
        "direct": CascadePlan((1,), "random", "pooled"),
        "csvm": CascadePlan(tuple(layers), "random", merge),
        "bcsvm": CascadePlan(tuple(layers), "balanced", merge),
    }
    for plan in plans.values():
        validate_plan(plan)
    rows = []
    for seed in seeds:
        shuffled = shuffle(train, seed)
        for method in METHODS:
            t0 = time.perf_counter()
            row = {"method": method, "seed": int(seed), "accuracy": None, "sv_count": None, "error": None}
            try:
                model, reports = run_cascade(shuffled, plans[method], cfg, seed, workers=workers,
                                             allow_nonconverged=allow_nonconverged)
                row["accuracy"] = float(np.mean(model.predict(test) == test.y))
                row["sv_count"] = model.n_sv
                row["layer1_merged_size"] = reports[0].merged_size
            except (CascadeError, TrainingError, DatasetError) as exc:
                row["error"] = str(exc)
                log.warning("bench %s seed %d failed: %s", method, seed, exc)
            row["train_seconds"] = time.perf_counter() - t0
            rows.append(row)

    summary = {}
    direct_acc = {r["seed"]: r["accuracy"] for r in rows if r["method"] == "direct"}
    for method in METHODS:
        accs = [r["accuracy"] for r in rows if r["method"] == method and r["accuracy"] is not None]
        gaps = [
            abs(direct_acc[r["seed"]] - r["accuracy"])
            for r in rows
            if r["method"] == method and r["accuracy"] is not None and direct_acc.get(r["seed"]) is not None
        ]
        summary[method] = {
            "runs": len(accs),
            "failures": sum(1 for r in rows if r["method"] == method and r["error"]),
            "mean_accuracy": float(np.mean(accs)) if accs else None,
            "std_accuracy": float(np.std(accs, ddof=1)) if len(accs) > 1 else None,
            "mean_abs_error_vs_direct": float(np.mean(gaps)) if gaps else None,
        }
    return {"rows": rows, "summary": summary}


def cmd_bench(args, argv) -> int:
    # no universally sensible C/gamma for a comparison run, so ask for them
    if args.cost is None or args.gamma is None:
        raise CliError(EXIT_USAGE, "bench needs explicit --cost and --gamma")
    plan = _plan(args, partition="balanced")
    train = _load(args.train, args)
    test = _load(args.test, args)
    if len(test) == 0:
        raise CliError(EXIT_PARSE, f"{args.test}: empty test set")
    if args.subsample:
        train = stratified_subsample(train, args.subsample, args.subsample_seed)
    _check_trainable(train, args.train)
    cfg = _solver_config(args, max(train.dim, test.dim))
    result = run_bench(train, test, plan.layers, cfg, args.seeds, merge=plan.merge,
                       workers=_workers(args), allow_nonconverged=args.allow_nonconverged)
    csv_text = _bench_csv(result["rows"])
    if args.csv:
        try:
            with open(args.csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(csv_text)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.csv}: {exc}") from exc
    report = _base_report("bench", argv)
    report.update(
        dataset={"train": train.summary(), "test": test.summary()},
        config={**cfg.to_dict(), **plan.to_dict(), "seeds": list(args.seeds),
                "subsample": args.subsample, "subsample_seed": args.subsample_seed,
                "workers": _workers(args)},
        bench=result,
        csv_file=args.csv,
    )
    _emit(report, args.report)
    return EXIT_OK


def cmd_retention(args, argv) -> int:
    ds = _load(args.data, args)
    _check_trainable(ds, args.data)
    cfg = _solver_config(args, ds.dim)
    plans = {mode: _plan(args, partition=mode) for mode in ("random", "balanced")}
    try:
        direct = smo_train(ds, cfg)
    except TrainingError as exc:
        raise CliError(EXIT_TRAINING, f"direct training failed: {exc}") from exc
    m = plans["balanced"].layers[0]
    out = {}
    for mode, plan in plans.items():
        try:
            res = measure_retention(ds, plan, cfg, args.seeds, direct=direct, workers=_workers(args))
        except (CascadeError, TrainingError) as exc:
            raise CliError(EXIT_TRAINING, f"{mode} cascade failed: {exc}") from exc
        out[mode] = {
            "per_seed": [vars(r) for r in res.runs],
            "mean_layer1": float(res.layer1.mean()),
            "mean_final": float(res.final.mean()),
        }
    report = _base_report("retention", argv)
    report.update(
        dataset=ds.summary(),
        config={**cfg.to_dict(), **plans["balanced"].to_dict(), "partition": "both",
                "seeds": list(args.seeds), "workers": _workers(args)},
        global_sv_count=direct.n_sv,
        census=census(ds, direct, m=m).to_dict(),
        retention=out,
    )
    _emit(report, args.report)
    return EXIT_OK


def prob_report(c: RetentionCensus) -> dict:
    out = {"census": c.to_dict()}
    try:
        pr = retention_prob_random(c)
        pb = retention_prob_balanced(c)
    except CensusError as exc:
        raise CliError(EXIT_CONFIG, f"infeasible census: {exc}") from exc
    out["random"] = fraction_to_json(pr)
    out["balanced"] = fraction_to_json(pb)
    out["balanced_ge_random"] = pb >= pr
    try:
        lhs, rhs, holds = denominator_inequality(c)
        out["denominator"] = {"random": str(lhs), "balanced": str(rhs), "strict": holds, "equal": lhs == rhs}
    except CensusError as exc:
        out["denominator"] = {"error": str(exc)}
    return out


def cmd_prob(args, argv) -> int:
    report = _base_report("prob", argv)
    if args.from_data:
        ds = _load(args.from_data, args)
        _check_trainable(ds, args.from_data)
        cfg = _solver_config(args, ds.dim)
        try:
            model = smo_train(ds, cfg)
        except TrainingError as exc:
            raise CliError(EXIT_TRAINING, str(exc)) from exc
        c = census(ds, model, m=args.m)
        report["dataset"] = ds.summary()
        report["config"] = cfg.to_dict()
    else:
        counts = {k: getattr(args, k.lower()) for k in ("pSv", "nSv", "pN", "nN", "pDS", "nDS")}
        missing = [k for k, v in counts.items() if v is None]
        if missing:
            raise CliError(EXIT_USAGE, f"missing census counts: {', '.join('--' + k.lower() for k in missing)}"
                                       " (or use --from-data)")
        try:
            c = RetentionCensus(**counts, m=args.m)
        except CensusError as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from exc
    report.update(prob_report(c))
    _emit(report, args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascadesvm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train directly or by cascade")
    p.add_argument("--data", required=True, help="LIBSVM training file")
    p.add_argument("--test", help="optional LIBSVM test file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", help="write the model here")
    p.add_argument("--report", help="also write the JSON report here")
    _add_svm_flags(p)
    _add_plan_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label a LIBSVM file with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output", help="one predicted label per line")
    p.add_argument("--report")
    p.add_argument("--label-remap", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="direct vs CSVM vs BCSVM accuracy over seeds")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds("0-9"))
    p.add_argument("--subsample", type=int, default=None, help="stratified training subsample size")
    p.add_argument("--subsample-seed", type=int, default=0)
    p.add_argument("--csv", help="write the per-run table here")
    p.add_argument("--report")
    _add_svm_flags(p)
    _add_plan_flags(p, partition=False)
    p.set_defaults(func=cmd_bench, layers="8,1")

    p = sub.add_parser("retention", help="global SV retention under both groupings")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds("0-49"))
    p.add_argument("--report")
    _add_svm_flags(p)
    _add_plan_flags(p, partition=False)
    p.set_defaults(func=cmd_retention, layers="2,1")

    p = sub.add_parser("prob", help="exact retention probabilities for a census")
    for name in ("psv", "nsv", "pn", "nn", "pds", "nds"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--m", type=int, default=2, help="number of groups")
    p.add_argument("--from-data", help="train directly on this file and take its census")
    p.add_argument("--report")
    _add_svm_flags(p)
    p.set_defaults(func=cmd_prob)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except CliError as exc:
        print(f"cascadesvm {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
