"""Command-line interface.

Subcommands: simulate | fit | evaluate | learn | bench | report. A YAML
config file supplies defaults; flags override config keys. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .bench import BenchConfig, render_report, run_bench
from .crossfit import NuisanceEstimates, default_specs, fit_nuisances
from .dataset import CsvSchema, load_csv, save_csv
from .errors import DataError, NumericalError
from .estimators import PolicyEvalInput, estimate_balanced, estimate_reward
from .learners import LearnerSpec
from .policy import OptSettings, Policy, learn_policy
from .simgen import DgpSpec, apply_missingness, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return yaml.safe_load(fh) or {}


def _dgp_from_config(cfg: dict, args) -> DgpSpec:
    dgp = dict(cfg.get("dgp", {}))
    if args.family:
        dgp["family"] = args.family
    if args.n:
        dgp["n"] = args.n
    if args.seed is not None:
        dgp["seed"] = args.seed
    if "family" not in dgp:
        raise _UsageError("no DGP family given (flag --family or config key dgp.family)")
    if "n" not in dgp:
        raise _UsageError("no sample size given (flag --n or config key dgp.n)")
    if dgp.get("family") == "dgp_a" and "table" not in dgp:
        dgp["table"] = "canonical"
    return DgpSpec.from_dict(dgp)


def _learner_specs(cfg: dict) -> dict:
    specs = default_specs()
    for name, sub in cfg.get("learners", {}).items():
        specs[name] = LearnerSpec.from_dict({**specs[name].to_dict(), **sub})
    return specs


def _schema(args, cfg: dict) -> CsvSchema:
    keys = dict(cfg.get("schema", {}))
    if args.covariates:
        keys["covariates"] = [c.strip() for c in args.covariates.split(",")]
    for flag, key in (("col_a", "a"), ("col_s", "s"), ("col_y", "y"),
                      ("col_r", "r"), ("covariate_prefix", "covariate_prefix")):
        value = getattr(args, flag, None)
        if value is not None:
            keys[key] = value
    return CsvSchema(**keys)


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    spec = _dgp_from_config(cfg, args)
    ds = generate(spec)
    gamma = args.gamma if args.gamma is not None else cfg.get("gamma")
    if gamma is not None:
        ds = apply_missingness(ds, float(gamma))
    out = Path(args.out or cfg.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out / "data.csv", truth_path=out / "truth.csv")
    print(f"wrote {out / 'data.csv'} ({ds.n} rows, {ds.n_missing} missing y) "
          f"and {out / 'truth.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    ds = load_csv(args.data, _schema(args, cfg))
    nu = fit_nuisances(ds, args.k_folds or cfg.get("k_folds", 5),
                       specs=_learner_specs(cfg),
                       seed=args.seed if args.seed is not None else cfg.get("seed", 0))
    out = Path(args.out or cfg.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    nu.save_csv(out / "nuisances.csv")
    print(f"wrote {out / 'nuisances.csv'}")
    return EXIT_OK


def _policy_values(args, ds) -> np.ndarray:
    if args.policy_file:
        pol = Policy.from_json(Path(args.policy_file).read_text())
        return pol.values(ds.x if pol.variant == "smooth" else None)
    if args.policy == "treat_all":
        return np.ones(ds.n)
    if args.policy == "treat_none":
        return np.zeros(ds.n)
    raise _UsageError("give --policy treat_all|treat_none or --policy-file FILE")


def cmd_evaluate(args) -> int:
    ds = load_csv(args.data, _schema(args, _load_config(args.config)))
    nu = NuisanceEstimates.load_csv(args.nuisances)
    pi = _policy_values(args, ds)
    inp = PolicyEvalInput(dataset=ds, nuisances=nu, pi=pi, cost=args.cost)
    results = {
        "short": json.loads(estimate_reward(inp, "short", args.method).to_json()),
        "long": json.loads(estimate_reward(inp, "long", args.method).to_json()),
        "balanced": json.loads(
            estimate_balanced(inp, args.lam, args.method).to_json()),
    }
    text = json.dumps(results, indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "estimates.json").write_text(text)
    print(text)
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = _load_config(args.config)
    ds = load_csv(args.data, _schema(args, cfg))
    nu = NuisanceEstimates.load_csv(args.nuisances)
    opt = OptSettings(seed=args.seed if args.seed is not None else cfg.get("seed", 0))
    pol = learn_policy(ds, nu, args.lam, method=args.method, opt=opt,
                       cost=args.cost)
    out = Path(args.out or cfg.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    (out / "policy.json").write_text(pol.to_json())
    share = float(np.mean(pol.decisions(ds.x)))
    print(f"wrote {out / 'policy.json'} (treated share {share:.3f})")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.config:
        raise _UsageError("bench requires --config")
    overrides = {"seed": args.seed, "out_dir": args.out, "jobs": args.jobs}
    if args.replications:
        overrides["replications"] = args.replications
    cfg = BenchConfig.from_yaml(args.config, overrides)
    rows = run_bench(cfg, progress=not args.quiet)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} rows ({failed} failed) -> {cfg.out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    print(render_report(args.results))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="twohorizon",
                     description="Policy evaluation and learning balancing "
                                 "short- and long-term rewards")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1)

    def schema_flags(p):
        p.add_argument("--col-a", dest="col_a", help="treatment column name")
        p.add_argument("--col-s", dest="col_s", help="short-term outcome column")
        p.add_argument("--col-y", dest="col_y", help="long-term outcome column")
        p.add_argument("--col-r", dest="col_r", help="observation flag column")
        p.add_argument("--covariates", help="comma-separated covariate columns")
        p.add_argument("--covariate-prefix", dest="covariate_prefix",
                       help="take every column starting with this as a covariate")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--family", choices=["ihdp_like", "jobs_like", "dgp_a"])
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float, help="missing ratio to apply")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="cross-fit nuisance estimates")
    common(p)
    schema_flags(p)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--k-folds", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="estimate rewards for a fixed policy")
    common(p)
    schema_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--nuisances", required=True)
    p.add_argument("--policy", choices=["treat_all", "treat_none"])
    p.add_argument("--policy-file")
    p.add_argument("--method", default="proposed", choices=["proposed", "ipw", "or"])
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--cost", type=float, default=0.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("learn", help="learn a smooth policy")
    common(p)
    schema_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--nuisances", required=True)
    p.add_argument("--method", default="proposed", choices=["proposed", "ipw", "or"])
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--cost", type=float, default=0.0)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bench", help="run an experiment grid")
    common(p)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render the comparison table")
    common(p)
    p.add_argument("--results", required=True, help="bench output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError,) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
