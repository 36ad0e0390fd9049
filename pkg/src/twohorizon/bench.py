"""Experiment grid runner.

Each grid cell is (missing ratio, time steps, cost, method, strategy) and is
executed for a number of replications. Every row is reproducible from the
master seed and the cell coordinates alone, is written atomically to its own
file, and failed rows are recorded rather than aborting the run. Aggregation
is a deterministic post-pass over the row files.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .crossfit import default_specs, fit_nuisances, stable_seed
from .errors import DataError
from .learners import LearnerSpec
from .policy import OptSettings, dm_policy, evaluate_policy, learn_policy
from .simgen import DgpSpec, apply_missingness, generate

METHOD_CHOICES = ("proposed", "ipw", "or", "dm")
STRATEGY_CHOICES = ("naive_s", "naive_y", "balanced")
STRATEGY_LAMBDA = {"naive_s": 0.0, "naive_y": 1.0}

ROW_FIELDS = ["method", "strategy", "lam", "gamma", "t_steps", "cost",
              "replication", "reward_short", "reward_long", "reward_balanced",
              "dw_short", "dw_long", "dw_balanced", "policy_error",
              "runtime_ms", "status"]
METRIC_FIELDS = ["reward_short", "reward_long", "reward_balanced",
                 "dw_short", "dw_long", "dw_balanced", "policy_error"]


@dataclass(frozen=True)
class BenchConfig:
    """Declarative experiment grid."""

    dgp: DgpSpec
    gammas: tuple = (0.1,)
    lams: tuple = (0.0, 0.5, 1.0)
    t_grid: tuple = ()                  # empty: use dgp.t_steps only
    costs: tuple = (0.0,)
    methods: tuple = ("proposed",)
    strategies: tuple = ("naive_s", "naive_y", "balanced")
    replications: int = 5
    k_folds: int = 5
    learners: dict = field(default_factory=default_specs)
    opt: OptSettings = OptSettings()
    eval_lam: float = 0.5
    combination: str = "convex"
    seed: int = 0
    out_dir: str = "results"
    jobs: int = 1
    freeze_data: bool = False
    freeze_learner: bool = False

    def validate(self) -> None:
        self.dgp.validate()
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for grid_name in ("gammas", "lams", "costs", "methods", "strategies"):
            if not getattr(self, grid_name):
                raise ValueError(f"grid {grid_name} must be non-empty")
        for m in self.methods:
            if m not in METHOD_CHOICES:
                raise ValueError(f"unknown method {m!r}")
        for s in self.strategies:
            if s not in STRATEGY_CHOICES:
                raise ValueError(f"unknown strategy {s!r}")

    def effective_t_grid(self) -> tuple:
        return self.t_grid if self.t_grid else (self.dgp.t_steps,)

    def strategy_lambdas(self) -> list[tuple[str, float]]:
        """Learning lambda per strategy; the grid applies to 'balanced' only."""
        pairs = []
        for strat in self.strategies:
            if strat in STRATEGY_LAMBDA:
                pairs.append((strat, STRATEGY_LAMBDA[strat]))
            else:
                pairs.extend((strat, lam) for lam in self.lams)
        return pairs

    def cells(self) -> list[dict]:
        out = []
        for gamma in self.gammas:
            for t in self.effective_t_grid():
                for cost in self.costs:
                    for method in self.methods:
                        for strat, lam in self.strategy_lambdas():
                            out.append(dict(gamma=gamma, t_steps=t, cost=cost,
                                            method=method, strategy=strat,
                                            lam=lam))
        return out

    def to_dict(self) -> dict:
        return {
            "dgp": self.dgp.to_dict(),
            "grid": {"gammas": list(self.gammas), "lams": list(self.lams),
                     "t_steps": list(self.t_grid), "costs": list(self.costs)},
            "methods": list(self.methods), "strategies": list(self.strategies),
            "replications": self.replications, "k_folds": self.k_folds,
            "learners": {k: v.to_dict() for k, v in self.learners.items()},
            "opt": {f.name: getattr(self.opt, f.name) for f in fields(self.opt)},
            "eval_lam": self.eval_lam, "combination": self.combination,
            "seed": self.seed, "out_dir": self.out_dir, "jobs": self.jobs,
            "freeze_data": self.freeze_data, "freeze_learner": self.freeze_learner,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        dgp = DgpSpec.from_dict(d.pop("dgp"))
        grid = d.pop("grid", {})
        learners = default_specs()
        for name, sub in d.pop("learners", {}).items():
            learners[name] = LearnerSpec.from_dict({**learners[name].to_dict(), **sub})
        opt = OptSettings(**d.pop("opt", {}))
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for name in ("methods", "strategies"):
            if name in d:
                d[name] = tuple(d[name])
        return cls(dgp=dgp,
                   gammas=tuple(grid.get("gammas", (0.1,))),
                   lams=tuple(grid.get("lams", (0.0, 0.5, 1.0))),
                   t_grid=tuple(grid.get("t_steps", ())),
                   costs=tuple(grid.get("costs", (0.0,))),
                   learners=learners, opt=opt, **d)

    @classmethod
    def from_yaml(cls, path, overrides: Optional[dict] = None) -> "BenchConfig":
        with open(path) as fh:
            d = yaml.safe_load(fh) or {}
        if overrides:
            d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


def make_dataset(cfg: BenchConfig, cell: dict, rep: int):
    """Generate the cell's dataset; the draw depends only on the data
    coordinates so that methods and strategies compare on the same data."""
    rep_key = 0 if cfg.freeze_data else rep
    data_seed = stable_seed(cfg.seed, "data", cell["gamma"], cell["t_steps"],
                            cell["cost"], rep_key)
    spec = replace(cfg.dgp, t_steps=cell["t_steps"], cost=cell["cost"],
                   seed=data_seed)
    ds = generate(spec)
    if spec.family != "dgp_a":
        ds = apply_missingness(ds, cell["gamma"])
    return ds


_NUISANCE_CACHE: dict = {}


def _fit_cell_nuisances(cfg: BenchConfig, cell: dict, rep: int, ds):
    fingerprint = stable_seed(repr(sorted(cfg.to_dict().items(), key=str)))
    key = (fingerprint, cell["gamma"], cell["t_steps"], cell["cost"], rep)
    if key in _NUISANCE_CACHE:
        return _NUISANCE_CACHE[key]
    rep_key = 0 if cfg.freeze_learner else rep
    nu_seed = stable_seed(cfg.seed, "nuisance", cell["gamma"], cell["t_steps"],
                          cell["cost"], rep_key)
    nu = fit_nuisances(ds, cfg.k_folds, specs=cfg.learners, seed=nu_seed)
    if len(_NUISANCE_CACHE) > 8:
        _NUISANCE_CACHE.clear()
    _NUISANCE_CACHE[key] = nu
    return nu


def run_row(cfg: BenchConfig, cell: dict, rep: int) -> dict:
    """Execute one (cell, replication): generate, fit, learn, evaluate."""
    row = dict(cell)
    row["replication"] = rep
    start = time.perf_counter()
    try:
        ds = make_dataset(cfg, cell, rep)
        nu = _fit_cell_nuisances(cfg, cell, rep, ds)
        if cell["method"] == "dm":
            pol = dm_policy(nu, cell["lam"], cost=cell["cost"],
                            combination=cfg.combination)
        else:
            opt = replace(cfg.opt, seed=stable_seed(cfg.seed, "opt", cell["method"],
                                                    cell["strategy"], cell["lam"],
                                                    cell["gamma"], cell["t_steps"],
                                                    cell["cost"], rep))
            pol = learn_policy(ds, nu, cell["lam"], method=cell["method"],
                               opt=opt, cost=cell["cost"],
                               combination=cfg.combination)
        metrics = evaluate_policy(pol, ds, lam=cfg.eval_lam, cost=cell["cost"],
                                  combination=cfg.combination)
        for name in METRIC_FIELDS:
            row[name] = getattr(metrics, name)
        row["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - row-level failure containment
        for name in METRIC_FIELDS:
            row[name] = float("nan")
        row["status"] = f"error: {exc}"
    row["runtime_ms"] = (time.perf_counter() - start) * 1000.0
    return row


def _row_filename(cell: dict, rep: int) -> str:
    return ("row_m-{method}_s-{strategy}_lam-{lam}_g-{gamma}_t-{t_steps}"
            "_c-{cost}_rep-{rep}.json").format(rep=rep, **cell)


def _write_atomic(path: Path, payload: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(payload)
    os.replace(tmp, path)


def _run_row_task(args):
    cfg, cell, rep = args
    return cell, rep, run_row(cfg, cell, rep)


def run_bench(cfg: BenchConfig, progress: bool = False) -> list[dict]:
    """Run the whole grid, resuming past completed rows; returns all rows."""
    cfg.validate()
    out = Path(cfg.out_dir)
    rows_dir = out / "rows"
    rows_dir.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict()))

    pending = []
    rows = []
    for cell in cfg.cells():
        for rep in range(cfg.replications):
            path = rows_dir / _row_filename(cell, rep)
            if path.exists():
                rows.append(json.loads(path.read_text()))
            else:
                pending.append((cell, rep))

    total = len(rows) + len(pending)

    def finish(cell, rep, row):
        path = rows_dir / _row_filename(cell, rep)
        _write_atomic(path, json.dumps(row))
        rows.append(row)
        if progress:
            print(f"[{len(rows)}/{total}] {_row_filename(cell, rep)}: {row['status']}")

    if cfg.jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for cell, rep, row in pool.map(_run_row_task,
                                           [(cfg, c, r) for c, r in pending]):
                finish(cell, rep, row)
    else:
        for cell, rep in pending:
            finish(cell, rep, run_row(cfg, cell, rep))

    aggregate(rows, out)
    return rows


def aggregate(rows: list[dict], out_dir) -> list[dict]:
    """Per-cell means and standard deviations over successful replications."""
    out_dir = Path(out_dir)
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["method"], row["strategy"], row["lam"], row["gamma"],
               row["t_steps"], row["cost"])
        cells.setdefault(key, []).append(row)

    agg_rows = []
    for key in sorted(cells, key=str):
        group = cells[key]
        ok = [r for r in group if r.get("status") == "ok"]
        agg = dict(zip(["method", "strategy", "lam", "gamma", "t_steps", "cost"], key))
        agg["n_ok"] = len(ok)
        agg["n_total"] = len(group)
        for name in METRIC_FIELDS:
            vals = np.array([r[name] for r in ok], dtype=float)
            agg[f"{name}_mean"] = float(np.mean(vals)) if len(ok) else float("nan")
            agg[f"{name}_std"] = (float(np.std(vals, ddof=1))
                                  if len(ok) > 1 else 0.0)
        agg_rows.append(agg)

    if agg_rows:
        fieldnames = list(agg_rows[0])
        with open(out_dir / "aggregate.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(agg_rows)
        _write_atomic(out_dir / "aggregate.json", json.dumps(agg_rows))
    return agg_rows


BLOCKS = [
    ("short", [("reward_short_mean", "reward"), ("dw_short_mean", "dW")]),
    ("balanced", [("reward_balanced_mean", "reward"), ("dw_balanced_mean", "dW"),
                  ("policy_error_mean", "error")]),
    ("long", [("reward_long_mean", "reward"), ("dw_long_mean", "dW")]),
]


def render_report(results_dir) -> str:
    """Plain-text comparison table with the best strategy per method starred
    in each metric block. Also writes report.csv next to the aggregate."""
    results_dir = Path(results_dir)
    agg_path = results_dir / "aggregate.csv"
    if not agg_path.exists():
        raise DataError(f"no aggregate found in {results_dir}")
    with open(agg_path, newline="") as fh:
        agg = list(csv.DictReader(fh))
    if not agg:
        raise DataError(f"aggregate in {results_dir} is empty")

    settings: dict[tuple, list[dict]] = {}
    for row in agg:
        key = (row["gamma"], row["t_steps"], row["cost"])
        settings.setdefault(key, []).append(row)

    lines = []
    report_rows = []
    for key in sorted(settings):
        gamma, t, cost = key
        lines.append(f"setting: gamma={gamma} t={t} cost={cost}")
        header = f"{'method (strategy)':<28}"
        for block, metrics in BLOCKS:
            for _, label in metrics:
                header += f"{block[:4] + ' ' + label:>16}"
        lines.append(header)
        lines.append("-" * len(header))
        group = settings[key]
        methods = sorted({r["method"] for r in group})
        for method in methods:
            method_rows = [r for r in group if r["method"] == method]
            best = {}
            for block, metrics in BLOCKS:
                for col, _ in metrics:
                    vals = [float(r[col]) for r in method_rows]
                    pick = (np.nanargmin if col.startswith("policy_error")
                            else np.nanargmax)
                    try:
                        best[col] = int(pick(np.array(vals)))
                    except ValueError:
                        best[col] = -1
            for i, r in enumerate(method_rows):
                label = f"{method} ({r['strategy']}, lam={r['lam']})"
                line = f"{label:<28}"
                out_row = {"gamma": gamma, "t_steps": t, "cost": cost,
                           "method": method, "strategy": r["strategy"],
                           "lam": r["lam"]}
                for block, metrics in BLOCKS:
                    for col, _ in metrics:
                        mark = "*" if best.get(col) == i else " "
                        val = float(r[col])
                        line += f"{val:>15.3f}{mark}"
                        out_row[col] = val
                        out_row[f"{col}_best"] = best.get(col) == i
                lines.append(line)
                report_rows.append(out_row)
        lines.append("")

    text = "\n".join(lines)
    with open(results_dir / "report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(report_rows[0]))
        writer.writeheader()
        writer.writerows(report_rows)
    (results_dir / "report.txt").write_text(text)
    return text
