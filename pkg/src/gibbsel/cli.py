"""Command-line interface: ``gibbsel <subcommand> ...``.

Failures exit nonzero with a message of the form ``gibbsel: [stage] ...``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from gibbsel.adaptive import AdaptiveModelChoice
from gibbsel.exceptions import GibbselError, StageError
from gibbsel.experiment import (
    adaptive_summary,
    calibrated_classifier,
    load_config,
    run_experiment,
    stage,
)
from gibbsel.knn import KnnModelChoice, prior_error_rate
from gibbsel.lattice import read_pgm
from gibbsel.local_error import error_surface
from gibbsel.noise import read_field_csv
from gibbsel.potts import exact_model_posterior
from gibbsel.reftable import ReferenceTable, check_disjoint, generate_table
from gibbsel.summaries import SUBSETS, geometric_summaries, kmeans_quantize


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _k_grid(text):
    return [int(k) for k in text.split(",")] if text else None


def _read_obs(path):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)[0]
    return read_field_csv(path)


def _load(path, role=None) -> ReferenceTable:
    table = ReferenceTable.from_csv(path)
    if role and table.meta.get("role") not in (None, role):
        print(f"gibbsel: warning: {path} was generated as a {table.meta['role']} table", file=sys.stderr)
    return table


def cmd_gen(args):
    with stage("config"):
        cfg = load_config(args.config, height=args.height, width=args.width, sweeps=args.sweeps)
    with stage("gen"):
        table = generate_table(
            cfg.models,
            args.n,
            (cfg.height, cfg.width),
            cfg.n_sweeps,
            args.seed,
            args.role,
            keep_fields=args.keep_fields,
            n_jobs=args.n_jobs,
        )
        table.to_csv(args.out)
        if args.keep_fields:
            np.save(Path(args.out).with_suffix(".fields.npy"), table.fields)


def cmd_calibrate(args):
    with stage("load"):
        train, valid = _load(args.train, "train"), _load(args.valid, "valid")
        check_disjoint(train, valid)
    with stage("calibrate"):
        _, cal = calibrated_classifier(train, valid, args.stats, _k_grid(args.k_grid))
    _emit({"stats": args.stats, **cal.to_dict()}, args.out)


def cmd_classify(args):
    with stage("load"):
        train = _load(args.train, "train")
        obs = _read_obs(args.obs)
        models = train.models
    with stage("summaries"):
        if np.issubdtype(obs.dtype, np.integer):
            field = obs
        else:
            kinds = {m.noise.kind for m in models}
            if kinds != {"gaussian"}:
                raise ValueError("continuous observation but the table was simulated with discrete noise")
            if args.sigma_known is not None:
                sigmas = {m.noise.low for m in models if m.noise.fixed}
                if sigmas != {args.sigma_known} or not all(m.noise.fixed for m in models):
                    raise ValueError(f"table noise {sorted(sigmas)} does not match --sigma-known {args.sigma_known}")
            field = kmeans_quantize(obs, models[0].n_colors, np.random.default_rng(args.seed))
        s_obs = geometric_summaries(field)
    with stage("classify"):
        vote = KnnModelChoice(k=args.k, stats=args.stats).fit(train.X, train.model).vote(s_obs.astype(float))
    _emit(
        {
            "summaries": s_obs.tolist(),
            "frequencies": {str(int(c)): float(f) for c, f in zip(vote.classes, vote.frequencies)},
            "predicted": vote.predicted,
        },
        args.out,
    )


def _projection(spec, train, valid, k_grid):
    if spec == "lda":
        clfs = [calibrated_classifier(train, valid, s, k_grid)[0] for s in sorted(SUBSETS, key=SUBSETS.get)]
        ada = AdaptiveModelChoice(clfs).fit(valid.X, valid.model)
        return lambda X: ada.project(X)[:, :2]
    if spec.startswith("cols:"):
        return [int(c) for c in spec[5:].split(",")]
    raise ValueError(f"projection must be 'lda' or 'cols:i,j', got {spec!r}")


def cmd_local_error(args):
    with stage("load"):
        train, valid = _load(args.train, "train"), _load(args.valid)
        check_disjoint(train, valid)
    with stage("calibrate"):
        if args.k is None:
            clf, _ = calibrated_classifier(train, valid, args.stats, _k_grid(args.k_grid))
        else:
            clf = KnnModelChoice(k=args.k, stats=args.stats).fit(train.X, train.model)
        projection = _projection(args.s2, train, valid, _k_grid(args.k_grid))
    with stage("local-error"):
        surf = error_surface(clf, valid.X, valid.model, projection, args.grid, provenance={"stats": args.stats, "s2": args.s2})
        surf.to_csv(args.out)


def cmd_adaptive(args):
    names = args.stats.split(",")
    with stage("load"):
        train, valid, test = _load(args.train, "train"), _load(args.valid, "valid"), _load(args.test, "test")
        check_disjoint(train, valid)
        check_disjoint(train, test)
        check_disjoint(valid, test)
    with stage("calibrate"):
        fitted = {n: calibrated_classifier(train, valid, n, _k_grid(args.k_grid)) for n in names}
    with stage("adaptive"):
        ada = AdaptiveModelChoice([fitted[n][0] for n in names]).fit(valid.X, valid.model)
        report = adaptive_summary(ada, test, names)
        report["subsets"] = {
            n: {**cal.to_dict(), "test_error": prior_error_rate(clf, test.X, test.model)} for n, (clf, cal) in fitted.items()
        }
    _emit(report, args.out)


def cmd_run(args):
    with stage("config"):
        sizes = {"train": args.train_size, "valid": args.valid_size, "test": args.test_size}
        cfg = load_config(
            args.config, height=args.height, width=args.width, sweeps=args.sweeps, ancillary=args.ancillary, sizes=sizes
        )
    report = run_experiment(cfg, args.out, n_jobs=args.n_jobs)
    if args.out is None:
        _emit({k: v for k, v in report.items() if k != "runtimes"})


def cmd_oracle(args):
    with stage("config"):
        cfg = load_config(args.config)
        obs = _read_obs(args.obs)
    with stage("oracle"):
        post = exact_model_posterior(obs, cfg.models, nodes=args.nodes, check_convergence=args.check)
    _emit(
        {
            "probabilities": {str(m): float(p) for m, p in zip(post.models, post.probabilities)},
            "log_evidence": {str(m): float(e) for m, e in zip(post.models, post.log_evidence)},
            "map_model": post.map_model,
            "quadrature_delta": post.quadrature_delta,
        },
        args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gibbsel", description="ABC model choice between G4 and G8 hidden Potts fields")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="simulate a reference table")
    g.add_argument("--config", required=True, help="preset (exp1, exp2, exp3) or JSON config")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--role", choices=("train", "valid", "test"), default="train")
    g.add_argument("--out", required=True)
    g.add_argument("--keep-fields", action="store_true", help="also save observed fields as <out>.fields.npy")
    g.add_argument("--sweeps", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--n-jobs", type=int, default=1)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("calibrate", help="choose k on a validation table")
    c.add_argument("--train", required=True)
    c.add_argument("--valid", required=True)
    c.add_argument("--stats", choices=tuple(SUBSETS), default="6d")
    c.add_argument("--k-grid")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("classify", help="kNN vote for one observed field")
    k.add_argument("--train", required=True)
    k.add_argument("--k", type=int, required=True)
    k.add_argument("--stats", choices=tuple(SUBSETS), default="6d")
    k.add_argument("--obs", required=True, help="PGM (discrete) or CSV (continuous) field")
    k.add_argument("--sigma-known", type=float, help="require the table's fixed Gaussian sigma to equal this value")
    k.add_argument("--seed", type=int, default=0, help="k-means seed for continuous fields")
    k.add_argument("--out")
    k.set_defaults(func=cmd_classify)

    le = sub.add_parser("local-error", help="local misclassification surface")
    le.add_argument("--train", required=True)
    le.add_argument("--valid", required=True)
    le.add_argument("--stats", choices=tuple(SUBSETS), default="6d")
    le.add_argument("--s2", default="lda", help="'lda' or 'cols:i,j'")
    le.add_argument("--grid", type=int, default=64)
    le.add_argument("--k", type=int)
    le.add_argument("--k-grid")
    le.add_argument("--out", required=True)
    le.set_defaults(func=cmd_local_error)

    a = sub.add_parser("adaptive", help="fit and evaluate the adaptive classifier")
    a.add_argument("--train", required=True)
    a.add_argument("--valid", required=True)
    a.add_argument("--test", required=True)
    a.add_argument("--stats", default="2d,4d,6d")
    a.add_argument("--k-grid")
    a.add_argument("--out")
    a.set_defaults(func=cmd_adaptive)

    r = sub.add_parser("run", help="full experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--height", type=int)
    r.add_argument("--width", type=int)
    r.add_argument("--sweeps", type=int)
    r.add_argument("--train-size", type=int)
    r.add_argument("--valid-size", type=int)
    r.add_argument("--test-size", type=int)
    r.add_argument("--ancillary", type=int)
    r.add_argument("--n-jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="exact posterior on a tiny lattice")
    o.add_argument("--config", required=True)
    o.add_argument("--obs", required=True)
    o.add_argument("--nodes", type=int, default=32)
    o.add_argument("--check", action="store_true", help="repeat at twice the nodes and report the change")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StageError as exc:
        print(f"gibbsel: {exc}", file=sys.stderr)
        return 1
    except (GibbselError, ValueError, OSError) as exc:
        print(f"gibbsel: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
