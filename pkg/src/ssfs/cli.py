"""Command-line interface.

Subcommands: select, evaluate, compare-criteria, compare-search, synth.
Every command prints a human-readable table; machine-readable JSON and
per-trial CSV outputs are written on request.
"""

import argparse
import json
import math
import sys
from dataclasses import replace

from . import dataset as ds_mod
from . import pipeline
from .seeding import derive_seed


def _add_source_flags(parser: argparse.ArgumentParser) -> None:
    grp = parser.add_argument_group("dataset source")
    grp.add_argument("--csv", metavar="PATH", help="CSV dataset file")
    grp.add_argument("--label-column", default="label",
                     help="label column name (or index with --no-header)")
    grp.add_argument("--delimiter", default=",")
    grp.add_argument("--no-header", action="store_true",
                     help="CSV has no header; --label-column is a position")
    grp.add_argument("--libsvm", metavar="PATH", help="libsvm dataset file")
    grp.add_argument("--synthetic", action="store_true",
                     help="generate a synthetic dataset instead of loading one")
    grp.add_argument("--n", type=int, default=1000)
    grp.add_argument("--d", type=int, default=50)
    grp.add_argument("--informative", type=int, default=10)
    grp.add_argument("--classes", type=int, default=2)
    grp.add_argument("--noise", type=float, default=0.0)
    grp.add_argument("--margin", type=float, default=0.0)
    grp.add_argument("--data-seed", type=int, default=0)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--time-limit", type=float, default=None,
                        help="seconds per trial; slower trials become NA")
    parser.add_argument("--criterion", choices=pipeline.CRITERIA, default=None)
    parser.add_argument("--scheme", choices=("cga", "fsga"), default=None)
    parser.add_argument("--ratios", default=None,
                        help="labeled,unlabeled,test fractions (e.g. 0.1,0.8,0.1)")
    parser.add_argument("--trees", type=int, default=None, help="forest size")
    parser.add_argument("--generations", type=int, default=None)
    parser.add_argument("--population", type=int, default=None)
    parser.add_argument("--parents", type=int, default=None,
                        help="surviving parents per generation (default scales "
                             "down with --population)")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--json", metavar="PATH", help="write the JSON report here")
    parser.add_argument("--csv-out", metavar="PATH", help="write the per-trial CSV here")


def _source_from_args(args) -> dict:
    chosen = [s for s in ("csv", "libsvm", "synthetic")
              if getattr(args, s if s != "csv" else "csv")]
    if len(chosen) > 1:
        raise SystemExit("choose exactly one of --csv, --libsvm, --synthetic")
    if args.csv:
        label = args.label_column
        if args.no_header:
            label = int(label)
        return {"kind": "csv", "path": args.csv, "label_column": label,
                "delimiter": args.delimiter, "header": not args.no_header}
    if args.libsvm:
        return {"kind": "libsvm", "path": args.libsvm}
    if args.synthetic:
        return {"kind": "synthetic", "n": args.n, "d": args.d,
                "informative": args.informative, "class_count": args.classes,
                "noise": args.noise, "margin": args.margin, "seed": args.data_seed}
    return {}


def _build_config(args) -> pipeline.ExperimentConfig:
    if args.config:
        cfg = pipeline.ExperimentConfig.from_file(args.config)
    else:
        cfg = pipeline.ExperimentConfig()
    source = _source_from_args(args)
    if source:
        cfg = replace(cfg, dataset=source)
    if not cfg.dataset:
        raise SystemExit("no dataset: pass --csv/--libsvm/--synthetic or a --config with one")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.time_limit is not None:
        cfg = replace(cfg, time_limit=args.time_limit)
    if args.criterion is not None:
        cfg = replace(cfg, criterion=args.criterion)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.ratios is not None:
        parts = tuple(float(p) for p in args.ratios.split(","))
        cfg = replace(cfg, ratios=parts)
    if args.trees is not None:
        cfg = replace(cfg, forest=replace(cfg.forest, tree_count=args.trees))
    ga = cfg.ga
    if args.scheme is not None:
        ga = replace(ga, scheme=args.scheme)
    if args.generations is not None:
        ga = replace(ga, generations=args.generations)
    if args.population is not None:
        parents = args.parents
        if parents is None:
            # keep the configured parent count when it still fits
            parents = min(ga.parents, max(1, args.population // 2))
        ga = replace(ga, population=args.population, parents=parents)
    elif args.parents is not None:
        ga = replace(ga, parents=args.parents)
    return replace(cfg, ga=ga)


def _fmt(v, digits: int = 4) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        return f"{v:.{digits}f}"
    return str(v)


def _print_report(report: pipeline.SelectionReport) -> None:
    print(f"{'trial':>5} {'status':>6} {'size':>5} {'acc_u':>8} {'acc_t':>8} "
          f"{'criterion':>10} {'gamma':>7} {'coverage':>9}")
    for r in report.records:
        print(f"{r.trial:>5} {r.status:>6} {_fmt(r.size):>5} {_fmt(r.acc_u):>8} "
              f"{_fmt(r.acc_t):>8} {_fmt(r.criterion_value):>10} "
              f"{_fmt(r.gamma):>7} {_fmt(r.sla_coverage):>9}")
    agg = report.aggregate()
    print(f"completed {agg['completed']}/{len(report.records)} "
          f"(timed out {agg['timed_out']})")
    for name in ("acc_u", "acc_t", "size"):
        m = agg["metrics"][name]
        if m["count"]:
            print(f"  {name}: {m['mean']:.4f} +/- {m['std']:.4f} over {m['count']} trials")
    if report.significance:
        s = report.significance
        print(f"  vs {s['baseline']}: U={s['u_statistic']:.1f} p={s['p_value']:.4g} "
              f"{'significant' if s['significant_at_0.01'] else 'not significant'} at 0.01")


def _write_outputs(args, report: pipeline.SelectionReport) -> None:
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(report.to_json())
        print(f"wrote {args.json}")
    if args.csv_out:
        report.write_csv(args.csv_out)
        print(f"wrote {args.csv_out}")


def cmd_select(args) -> int:
    cfg = _build_config(args)
    report = pipeline.run_experiment(cfg)
    _print_report(report)
    _write_outputs(args, report)
    if args.subset_out:
        done = report.completed()
        if not done:
            print("no completed trial; subset file not written", file=sys.stderr)
        else:
            best = max(done, key=lambda r: (r.acc_u if r.acc_u is not None else -1.0))
            ds = pipeline.load_source(cfg.dataset)
            pipeline.write_subset_file(args.subset_out, best.subset,
                                       ds_mod.dataset_hash(ds))
            print(f"wrote {args.subset_out} (subset of best trial {best.trial})")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _build_config(args)
    subset, source_hash = pipeline.read_subset_file(args.subset)
    ds0 = pipeline.load_source(cfg.dataset)
    actual = ds_mod.dataset_hash(ds0)
    if source_hash is not None and source_hash != actual:
        print(f"warning: subset file hash {source_hash} does not match "
              f"dataset hash {actual}", file=sys.stderr)
    rows = []
    for trial in range(cfg.trials):
        seed_t = derive_seed(cfg.seed, "trial", trial)
        ds = ds_mod.split(ds0, cfg.ratios, seed=derive_seed(seed_t, "split"))
        fcfg = replace(cfg.forest, seed=derive_seed(seed_t, "eval"))
        acc_u, acc_t = pipeline.evaluate_selection(ds, subset, fcfg, cfg.sla_rounds)
        rows.append((trial, acc_u, acc_t))
        print(f"trial {trial}: acc_u={_fmt(acc_u)} acc_t={_fmt(acc_t)}")
    if len(rows) > 1:
        import numpy as np
        for pos, name in ((1, "acc_u"), (2, "acc_t")):
            vals = [r[pos] for r in rows if not math.isnan(r[pos])]
            if vals:
                print(f"mean {name}: {np.mean(vals):.4f} +/- "
                      f"{(np.std(vals, ddof=1) if len(vals) > 1 else 0.0):.4f}")
    if args.json:
        payload = {"subset": [int(i) for i in subset],
                   "trials": [{"trial": t, "acc_u": u, "acc_t": a} for t, u, a in rows]}
        with open(args.json, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


def cmd_compare_criteria(args) -> int:
    cfg = _build_config(args)
    ds0 = pipeline.load_source(cfg.dataset)
    per_trial = []
    for trial in range(cfg.trials):
        seed_t = derive_seed(cfg.seed, "trial", trial)
        ds = ds_mod.split(ds0, cfg.ratios, seed=derive_seed(seed_t, "split"))
        result = pipeline.criterion_comparison(
            ds, replace(cfg, seed=seed_t), pool_size=args.pool_size,
            skip_gt=args.skip_gt, pseudo_noise=args.pseudo_noise,
            gamma_per_subset=args.gamma_per_subset)
        row = {crit: result.picks[crit].acc_u for crit in pipeline.CRITERIA}
        row["gt"] = result.gt_acc_u
        per_trial.append(row)
        cells = " ".join(f"{c}={_fmt(row[c])}" for c in (*pipeline.CRITERIA, "gt"))
        print(f"trial {trial}: {cells}")
    if len(per_trial) > 1:
        import numpy as np
        print("means:")
        for c in (*pipeline.CRITERIA, "gt"):
            vals = [r[c] for r in per_trial if r[c] is not None]
            if vals:
                print(f"  {c}: {np.mean(vals):.4f} +/- "
                      f"{(np.std(vals, ddof=1) if len(vals) > 1 else 0.0):.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"trials": per_trial}, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


def cmd_compare_search(args) -> int:
    cfg = _build_config(args)
    result = pipeline.compare_search(cfg)
    for scheme, report in result["reports"].items():
        print(f"== {scheme} ==")
        _print_report(report)
    if "significance" in result:
        s = result["significance"]
        print(f"acc_u rank test: U={s['u_statistic']:.1f} p={s['p_value']:.4g} "
              f"{'significant' if s['significant_at_0.01'] else 'not significant'} at 0.01")
    if args.json:
        payload = {
            "reports": {k: v.to_dict() for k, v in result["reports"].items()},
            "significance": result.get("significance"),
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.json}")
    if args.csv_out:
        base = args.csv_out
        for scheme, report in result["reports"].items():
            path = f"{base}.{scheme}.csv" if not base.endswith(".csv") \
                else base.replace(".csv", f".{scheme}.csv")
            report.write_csv(path)
            print(f"wrote {path}")
    return 0


def cmd_synth(args) -> int:
    ds = ds_mod.generate_synthetic(
        n=args.n, d=args.d, informative=args.informative,
        class_count=args.classes, noise=args.noise, margin=args.margin,
        seed=args.data_seed)
    ds_mod.write_csv(ds, args.out)
    print(f"wrote {args.out} ({ds.n} rows, {ds.d} features, "
          f"{ds.class_count} classes, hash {ds_mod.dataset_hash(ds)})")
    print(f"informative columns: {ds.metadata['informative']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssfs",
        description="Semi-supervised wrapper feature selection with "
                    "noise-corrected majority-vote bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run selection trials on one dataset")
    _add_source_flags(p)
    _add_common_flags(p)
    p.add_argument("--subset-out", metavar="PATH",
                   help="write the best trial's subset file here")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="evaluate a subset file on a dataset")
    p.add_argument("--subset", metavar="PATH", required=True)
    _add_source_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-criteria",
                       help="score a random subset pool under every criterion")
    _add_source_flags(p)
    _add_common_flags(p)
    p.add_argument("--pool-size", type=int, default=40)
    p.add_argument("--skip-gt", action="store_true",
                   help="skip the expensive end-to-end sweep of the whole pool")
    p.add_argument("--pseudo-noise", type=float, default=0.0,
                   help="corrupt this fraction of pseudo-labels after augmentation")
    p.add_argument("--gamma-per-subset", action="store_true",
                   help="re-estimate the correction factor from each candidate "
                        "forest instead of sharing the dataset-level estimate")
    p.set_defaults(func=cmd_compare_criteria)

    p = sub.add_parser("compare-search", help="run both search schemes and compare")
    _add_source_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_compare_search)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_synth)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
