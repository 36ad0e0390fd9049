"""Cross-fitted nuisance estimation.

Five nuisance functions are learned per treatment arm where applicable:
the propensity e(x), the observation rate r(a, x, s), the short-term
regression mu_a(x), and two long-term regressions: mtilde_a(x, s) on the
observed subset, and m_a(x). Predictions for each unit come from models
trained on that unit's fold complement.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from hashlib import sha256
from typing import Optional

import numpy as np

from .dataset import ObservationalDataset, split_folds
from .errors import DataError
from .learners import DEFAULT_EPS_CLIP, LearnerSpec, fit, predict

NUISANCE_NAMES = ("e", "r", "mu", "m", "mtilde")


def stable_seed(*parts) -> int:
    """Platform-independent seed derived from the given parts."""
    digest = sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class NuisanceEstimates:
    """Per-unit out-of-fold nuisance predictions.

    Arm-indexed arrays have shape (n, 2) with column a holding the prediction
    under treatment a. ``fold`` is -1 for oracle values.
    """

    e: np.ndarray
    r: np.ndarray
    mu: np.ndarray
    m: np.ndarray
    mtilde: np.ndarray
    fold: np.ndarray
    eps_clip: float = DEFAULT_EPS_CLIP

    @property
    def n(self) -> int:
        return len(self.e)

    def save_csv(self, path) -> None:
        header = ["fold", "e", "r0", "r1", "mu0", "mu1", "m0", "m1",
                  "mtilde0", "mtilde1"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                writer.writerow([int(self.fold[i]), repr(float(self.e[i])),
                                 repr(float(self.r[i, 0])), repr(float(self.r[i, 1])),
                                 repr(float(self.mu[i, 0])), repr(float(self.mu[i, 1])),
                                 repr(float(self.m[i, 0])), repr(float(self.m[i, 1])),
                                 repr(float(self.mtilde[i, 0])),
                                 repr(float(self.mtilde[i, 1]))])

    @classmethod
    def load_csv(cls, path) -> "NuisanceEstimates":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
        if not rows:
            raise DataError(f"{path}: no nuisance rows")
        n = len(rows)
        out = cls(e=np.empty(n), r=np.empty((n, 2)), mu=np.empty((n, 2)),
                  m=np.empty((n, 2)), mtilde=np.empty((n, 2)),
                  fold=np.empty(n, dtype=np.int64))
        try:
            for i, row in enumerate(rows):
                out.fold[i] = int(row["fold"])
                out.e[i] = float(row["e"])
                for a in (0, 1):
                    out.r[i, a] = float(row[f"r{a}"])
                    out.mu[i, a] = float(row[f"mu{a}"])
                    out.m[i, a] = float(row[f"m{a}"])
                    out.mtilde[i, a] = float(row[f"mtilde{a}"])
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: row {i}: {exc}")
        return out


def default_specs() -> dict[str, LearnerSpec]:
    return {
        "e": LearnerSpec(kind="logistic", lr=2.0, iters=500),
        "r": LearnerSpec(kind="logistic", lr=2.0, iters=500),
        "mu": LearnerSpec(kind="ridge", reg=1e-3),
        "m": LearnerSpec(kind="ridge", reg=1e-3),
        "mtilde": LearnerSpec(kind="ridge", reg=1e-3),
    }


def _subset_check(mask, what: str, fold: int):
    if not np.any(mask):
        raise DataError(f"fold {fold}: no training rows for {what}")


def fit_nuisances(ds: ObservationalDataset, k: int,
                  specs: Optional[dict[str, LearnerSpec]] = None,
                  seed: int = 0,
                  m_via_mtilde: bool = False,
                  pooled_r: bool = False) -> NuisanceEstimates:
    """Cross-fit all nuisance functions with k folds.

    For each fold, models train on the complement and predict on the fold.
    Training subsets: e on all complement rows; r and mu per arm on that
    arm's rows; mtilde and m per arm on the arm's observed rows. With
    ``m_via_mtilde`` the m regressions are refit on predicted mtilde values
    over all arm rows, integrating out the short-term outcome instead of
    conditioning on observation. With ``pooled_r`` a single observation-rate
    model is fit with the treatment as a feature.

    Degenerate folds (an arm or an arm's observed subset empty) raise
    ``DataError`` naming the nuisance.
    """
    if specs is None:
        specs = default_specs()
    missing = [name for name in NUISANCE_NAMES if name not in specs]
    if missing:
        raise ValueError(f"missing learner specs for {missing}")
    eps_clip = specs["e"].eps_clip

    n = ds.n
    folds = split_folds(n, k, stable_seed(seed, "folds"))
    fold_of = np.empty(n, dtype=np.int64)
    for j, idx in enumerate(folds):
        fold_of[idx] = j

    e_hat = np.empty(n)
    r_hat = np.empty((n, 2))
    mu_hat = np.empty((n, 2))
    m_hat = np.empty((n, 2))
    mt_hat = np.empty((n, 2))

    xs_all = np.column_stack([ds.x, ds.s])
    y_filled = np.where(ds.r == 1, ds.y, 0.0)

    for j, idx in enumerate(folds):
        comp = fold_of != j
        x_c, a_c, s_c, r_c = ds.x[comp], ds.a[comp], ds.s[comp], ds.r[comp]
        y_c = y_filled[comp]
        xs_c = xs_all[comp]

        def spec_seeded(name, arm=None):
            return replace(specs[name], seed=stable_seed(seed, name, j, arm))

        model_e = fit(spec_seeded("e"), x_c, a_c.astype(float), task="probability")
        e_hat[idx] = predict(model_e, ds.x[idx])

        if pooled_r:
            xsa_c = np.column_stack([xs_c, a_c.astype(float)])
            model_r = fit(spec_seeded("r"), xsa_c, r_c.astype(float),
                          task="probability")
            for a in (0, 1):
                xsa_q = np.column_stack([xs_all[idx], np.full(len(idx), float(a))])
                r_hat[idx, a] = predict(model_r, xsa_q)

        for a in (0, 1):
            arm = comp & (ds.a == a)
            _subset_check(arm, f"arm a={a} (needed by "
                          f"mu_{a}, r({a},.), m_{a}, mtilde_{a})", j)
            obs = arm & (ds.r == 1)
            _subset_check(obs, f"observed rows in arm a={a} (needed by "
                          f"m_{a}, mtilde_{a})", j)

            if not pooled_r:
                model_r = fit(spec_seeded("r", a), xs_all[arm],
                              ds.r[arm].astype(float), task="probability")
                r_hat[idx, a] = predict(model_r, xs_all[idx])

            model_mu = fit(spec_seeded("mu", a), ds.x[arm], ds.s[arm])
            mu_hat[idx, a] = predict(model_mu, ds.x[idx])

            model_mt = fit(spec_seeded("mtilde", a), xs_all[obs], y_filled[obs])
            mt_hat[idx, a] = predict(model_mt, xs_all[idx])

            if m_via_mtilde:
                pseudo = predict(model_mt, xs_all[arm])
                model_m = fit(spec_seeded("m", a), ds.x[arm], pseudo)
            else:
                model_m = fit(spec_seeded("m", a), ds.x[obs], y_filled[obs])
            m_hat[idx, a] = predict(model_m, ds.x[idx])

    e_hat = np.clip(e_hat, eps_clip, 1.0 - eps_clip)
    r_hat = np.clip(r_hat, eps_clip, 1.0 - eps_clip)
    return NuisanceEstimates(e=e_hat, r=r_hat, mu=mu_hat, m=m_hat,
                             mtilde=mt_hat, fold=fold_of, eps_clip=eps_clip)


def oracle_nuisances(ds: ObservationalDataset) -> NuisanceEstimates:
    """Exact nuisance values from an attached enumerable table.

    The m regressions are the marginal means E[Y(a) | x]: the influence
    function's correction terms are mean-zero around that choice, which is
    what the robustness checks rely on.
    """
    table = ds.dgp
    if table is None:
        raise DataError("dataset has no attached enumerable process")
    x = ds.x[:, 0]
    s = ds.s
    e = table.propensity(x)
    r = np.column_stack([table.obs_rate(a, x, s) for a in (0, 1)])
    mu = np.column_stack([table.s_mean(a, x) for a in (0, 1)])
    m = np.column_stack([table.y_mean(a, x) for a in (0, 1)])
    mt = np.column_stack([table.y_given_s(a, x, s) for a in (0, 1)])
    return NuisanceEstimates(e=e, r=r, mu=mu, m=m, mtilde=mt,
                             fold=np.full(ds.n, -1, dtype=np.int64))


CORRUPTION_MODES = ("constant", "logit_flip_shift", "shift")


def corrupt_nuisance(nu: NuisanceEstimates, target: str, mode: str = "constant",
                     value: float = None) -> NuisanceEstimates:
    """Replace one nuisance with a deliberately wrong function.

    Modes: ``constant`` (probabilities default to 0.5, regressions to 0),
    ``logit_flip_shift`` (probabilities mapped through a sign-flipped,
    shifted logit), ``shift`` (regressions shifted by an additive constant).
    All other fields are returned untouched.
    """
    if target not in NUISANCE_NAMES:
        raise ValueError(f"unknown nuisance {target!r}; expected one of {NUISANCE_NAMES}")
    if mode not in CORRUPTION_MODES:
        raise ValueError(f"unknown corruption mode {mode!r}")
    is_prob = target in ("e", "r")
    arr = getattr(nu, target)
    if mode == "constant":
        const = (0.5 if is_prob else 0.0) if value is None else value
        if is_prob and not 0.0 < const < 1.0:
            raise ValueError("constant for a probability nuisance must be in (0, 1)")
        new = np.full_like(arr, const)
    elif mode == "logit_flip_shift":
        if not is_prob:
            raise ValueError(f"logit_flip_shift applies to probabilities, not {target!r}")
        shift = 1.0 if value is None else value
        logit = np.log(arr / (1.0 - arr))
        new = 1.0 / (1.0 + np.exp(-(-logit + shift)))
        new = np.clip(new, nu.eps_clip, 1.0 - nu.eps_clip)
    else:
        if is_prob:
            raise ValueError(f"shift applies to regressions, not {target!r}")
        new = arr + (1.0 if value is None else value)
    return replace(nu, **{target: new})
