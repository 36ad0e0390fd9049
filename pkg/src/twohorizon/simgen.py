"""Synthetic data generation.

Two flavors:

* ``ihdp_like`` / ``jobs_like``: semi-synthetic mechanisms over real or
  Gaussian covariates, with short-term outcomes drawn from a logistic-index
  Bernoulli model and long-term outcomes built by a time-step recursion whose
  cumulative term couples them to the short-term outcome. A score-based rule
  hides the top fraction of long-term outcomes.
* ``dgp_a``: a fully enumerable process over binary (x, a, s, y, r) driven by
  an explicit probability table. Every functional of interest has a closed
  form, which makes this family the brute-force oracle for estimator tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._kernels import sigmoid
from .dataset import ObservationalDataset, PotentialTruth
from .errors import DataError


# ---------------------------------------------------------------------------
# Enumerable binary process


@dataclass(frozen=True)
class DgpATable:
    """Probability table of the enumerable binary process.

    ``p_x1`` is P(X=1); ``e[x]`` the treatment probability; ``ps[x, a]`` the
    short-term success probability; ``robs[a, x, s]`` the probability the
    long-term outcome is observed; ``py[x, s, a]`` the long-term success
    probability. All entries must lie strictly inside (0, 1) so that inverse
    weighting is well defined everywhere.
    """

    p_x1: float
    e: np.ndarray       # (2,)
    ps: np.ndarray      # (2, 2) indexed [x, a]
    robs: np.ndarray    # (2, 2, 2) indexed [a, x, s]
    py: np.ndarray      # (2, 2, 2) indexed [x, s, a]

    def __post_init__(self):
        object.__setattr__(self, "e", np.asarray(self.e, dtype=np.float64))
        object.__setattr__(self, "ps", np.asarray(self.ps, dtype=np.float64))
        object.__setattr__(self, "robs", np.asarray(self.robs, dtype=np.float64))
        object.__setattr__(self, "py", np.asarray(self.py, dtype=np.float64))
        for name, arr in (("p_x1", np.array([self.p_x1])), ("e", self.e),
                          ("ps", self.ps), ("robs", self.robs), ("py", self.py)):
            if np.any(arr <= 0.0) or np.any(arr >= 1.0):
                raise ValueError(f"table entry {name} must lie strictly in (0, 1)")

    # -- closed-form nuisance functionals, vectorized over unit arrays

    def p_x(self, x):
        x = np.asarray(x)
        return np.where(x == 1, self.p_x1, 1.0 - self.p_x1)

    def propensity(self, x):
        return self.e[np.asarray(x, dtype=int)]

    def s_mean(self, a: int, x):
        return self.ps[np.asarray(x, dtype=int), a]

    def obs_rate(self, a: int, x, s):
        return self.robs[a, np.asarray(x, dtype=int), np.asarray(s, dtype=int)]

    def y_given_s(self, a: int, x, s):
        """E[Y(a) | x, S(a)=s]; equals the observed-data regression on
        (x, s, a, r=1) because observation is independent of y given them."""
        return self.py[np.asarray(x, dtype=int), np.asarray(s, dtype=int), a]

    def y_mean(self, a: int, x):
        """E[Y(a) | x], marginalizing the short-term outcome.

        Note this is the average of ``y_given_s`` under S(a) | x, not the
        regression on the observed subset: conditioning on observation tilts
        the S distribution whenever the observation rate depends on s.
        """
        x = np.asarray(x, dtype=int)
        p1 = self.ps[x, a]
        return (1.0 - p1) * self.py[x, 0, a] + p1 * self.py[x, 1, a]

    def y_mean_observed(self, a: int, x):
        """E[Y | x, A=a, R=1], the regression on the observed subset."""
        x = np.asarray(x, dtype=int)
        p1 = self.ps[x, a]
        num = ((1.0 - p1) * self.robs[a, x, 0] * self.py[x, 0, a]
               + p1 * self.robs[a, x, 1] * self.py[x, 1, a])
        den = (1.0 - p1) * self.robs[a, x, 0] + p1 * self.robs[a, x, 1]
        return num / den

    # -- reference tables

    @classmethod
    def canonical(cls) -> "DgpATable":
        """Default table: treatment helps everywhere."""
        e = np.array([0.3, 0.7])
        ps = np.array([[0.2 + 0.3 * a + 0.2 * x for a in (0, 1)] for x in (0, 1)])
        robs = np.array([[[0.6 + 0.2 * s for s in (0, 1)] for _ in (0, 1)]
                         for _ in (0, 1)])
        py = np.array([[[0.1 + 0.4 * s + 0.2 * a for a in (0, 1)] for s in (0, 1)]
                       for x in (0, 1)])
        return cls(p_x1=0.5, e=e, ps=ps, robs=robs, py=py)

    @classmethod
    def sign_contrast(cls) -> "DgpATable":
        """Treatment effects flip sign with x: treat x=1, spare x=0."""
        e = np.array([0.3, 0.7])
        ps = np.array([[0.5 + (2 * x - 1) * 0.25 * a for a in (0, 1)] for x in (0, 1)])
        robs = np.array([[[0.5 + 0.2 * s + 0.1 * a for s in (0, 1)] for _ in (0, 1)]
                         for a in (0, 1)])
        py = np.array([[[0.2 + 0.4 * s + a * (0.2 * x - 0.1) for a in (0, 1)]
                        for s in (0, 1)] for x in (0, 1)])
        return cls(p_x1=0.5, e=e, ps=ps, robs=robs, py=py)

    @classmethod
    def low_signal_contrast(cls, delta_s: float = 0.05, delta_y: float = -0.03) -> "DgpATable":
        """Sign-contrast table with effects small relative to sampling noise;
        used to exercise sample-size trends in learned-policy regret."""
        e = np.array([0.3, 0.7])
        ps = np.array([[0.5 + (2 * x - 1) * delta_s * a for a in (0, 1)] for x in (0, 1)])
        robs = np.array([[[0.6 + 0.2 * s for s in (0, 1)] for _ in (0, 1)]
                         for _ in (0, 1)])
        py = np.array([[[0.3 + 0.2 * s + a * (2 * x - 1) * delta_y for a in (0, 1)]
                        for s in (0, 1)] for x in (0, 1)])
        return cls(p_x1=0.5, e=e, ps=ps, robs=robs, py=py)


# ---------------------------------------------------------------------------
# Generation spec


IHDP_NOISE = {"mu0": 1.0, "mu1": 3.0}
JOBS_NOISE = {"mu0": 0.0, "mu1": 2.0}
# long-term recursion constants: arm-0 / arm-1 noise scale, arm-1 mean shift
IHDP_Y_SD = (1.0, 0.5)
IHDP_Y_SHIFT = 2.0
JOBS_Y_SD = (1.0, 0.5)


@dataclass(frozen=True)
class DgpSpec:
    """Declarative description of one data-generating process."""

    family: str                      # ihdp_like | jobs_like | dgp_a
    n: int
    p: int = 10                      # synthetic Gaussian covariate dimension
    covariates_csv: Optional[str] = None
    resample: bool = False           # sample CSV rows with replacement
    mu0: Optional[float] = None      # short-term noise means (family default)
    mu1: Optional[float] = None
    sigma0: float = 1.0
    sigma1: float = 1.0
    t_steps: int = 10
    scale_c: float = 0.02
    correlated: bool = True
    cost: float = 0.0
    seed: int = 0
    table: Optional[DgpATable] = None
    # test hooks: fix the per-dataset coefficient draws
    w0: Optional[np.ndarray] = None
    w1: Optional[np.ndarray] = None
    beta0: Optional[np.ndarray] = None
    beta1: Optional[np.ndarray] = None
    w_e: Optional[np.ndarray] = None

    def validate(self) -> None:
        if self.family not in ("ihdp_like", "jobs_like", "dgp_a"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.t_steps < 1:
            raise ValueError("t_steps must be at least 1")
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise ValueError("noise scales must be positive")
        if self.family == "dgp_a" and self.table is None:
            raise ValueError("dgp_a requires a probability table")

    def noise_means(self) -> tuple[float, float]:
        defaults = IHDP_NOISE if self.family == "ihdp_like" else JOBS_NOISE
        mu0 = defaults["mu0"] if self.mu0 is None else self.mu0
        mu1 = defaults["mu1"] if self.mu1 is None else self.mu1
        return mu0, mu1

    def to_dict(self) -> dict:
        d = {
            "family": self.family, "n": self.n, "p": self.p,
            "covariates_csv": self.covariates_csv, "resample": self.resample,
            "mu0": self.mu0, "mu1": self.mu1,
            "sigma0": self.sigma0, "sigma1": self.sigma1,
            "t_steps": self.t_steps, "scale_c": self.scale_c,
            "correlated": self.correlated, "cost": self.cost, "seed": self.seed,
        }
        if self.table is not None:
            d["table"] = {
                "p_x1": self.table.p_x1,
                "e": self.table.e.tolist(),
                "ps": self.table.ps.tolist(),
                "robs": self.table.robs.tolist(),
                "py": self.table.py.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        d = dict(d)
        table = d.pop("table", None)
        if isinstance(table, dict):
            table = DgpATable(p_x1=table["p_x1"], e=np.asarray(table["e"]),
                              ps=np.asarray(table["ps"]),
                              robs=np.asarray(table["robs"]),
                              py=np.asarray(table["py"]))
        elif isinstance(table, str):
            table = {"canonical": DgpATable.canonical,
                     "sign_contrast": DgpATable.sign_contrast,
                     "low_signal_contrast": DgpATable.low_signal_contrast}[table]()
        return cls(table=table, **d)


# ---------------------------------------------------------------------------
# Sampling helpers


def _truncated_normal(rng, low, high, size):
    """Standard normal conditioned on [low, high], by rejection."""
    out = rng.standard_normal(size)
    bad = (out < low) | (out > high)
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = (out < low) | (out > high)
    return out


def _load_covariates(spec: DgpSpec, rng) -> np.ndarray:
    if spec.covariates_csv is None:
        return rng.standard_normal((spec.n, spec.p))
    with open(spec.covariates_csv, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise DataError(f"{spec.covariates_csv}: no data rows")
    mat = np.asarray(rows, dtype=np.float64)
    if len(mat) >= spec.n:
        return mat[: spec.n]
    if not spec.resample:
        raise DataError(
            f"{spec.covariates_csv}: {len(mat)} rows < n={spec.n} "
            "(pass resample=True to sample with replacement)")
    idx = rng.integers(0, len(mat), size=spec.n)
    return mat[idx]


def _draw_coefficients(spec: DgpSpec, p: int, rng):
    w0 = spec.w0 if spec.w0 is not None else _truncated_normal(rng, -1.0, 1.0, p)
    w1 = spec.w1 if spec.w1 is not None else rng.uniform(-1.0, 1.0, p)
    if spec.beta0 is not None:
        beta0 = spec.beta0
    else:
        beta0 = rng.choice([0.0, 1.0, 2.0, 3.0, 4.0], size=p,
                           p=[0.5, 0.2, 0.15, 0.1, 0.05])
    if spec.beta1 is not None:
        beta1 = spec.beta1
    else:
        beta1 = 4.0 * _truncated_normal(rng, 0.0, 4.0, p)
    w_e = spec.w_e if spec.w_e is not None else rng.standard_normal(p) / np.sqrt(p)
    return (np.asarray(w0, dtype=float), np.asarray(w1, dtype=float),
            np.asarray(beta0, dtype=float), np.asarray(beta1, dtype=float),
            np.asarray(w_e, dtype=float))


def _long_term_recursion(spec: DgpSpec, x, y0_init, y1_init, beta0, beta1, rng):
    """Run the time-step recursion and return the step-T potential outcomes."""
    n = len(y0_init)
    idx0 = x @ beta0
    idx1 = x @ beta1
    hist0 = [np.asarray(y0_init, dtype=float)]
    hist1 = [np.asarray(y1_init, dtype=float)]
    cum0 = hist0[0].copy()
    cum1 = hist1[0].copy()
    for t in range(1, spec.t_steps + 1):
        if spec.family == "ihdp_like":
            c_t = spec.scale_c
            y0_t = rng.normal(idx0, IHDP_Y_SD[0]) + c_t * cum0
            y1_t = rng.normal(idx1 + IHDP_Y_SHIFT, IHDP_Y_SD[1]) + c_t * cum1
        else:
            c_t = spec.scale_c / t
            p0 = np.clip(sigmoid(idx0) + c_t * cum0, 0.0, 1.0)
            p1 = np.clip(sigmoid(idx1) + c_t * cum1, 0.0, 1.0)
            y0_t = rng.binomial(1, p0).astype(float) + rng.normal(0.0, JOBS_Y_SD[0], n)
            y1_t = rng.binomial(1, p1).astype(float) + rng.normal(0.0, JOBS_Y_SD[1], n)
        hist0.append(y0_t)
        hist1.append(y1_t)
        cum0 += y0_t
        cum1 += y1_t
    return hist0[-1], hist1[-1]


def _generate_semi_synthetic(spec: DgpSpec, rng) -> ObservationalDataset:
    x = _load_covariates(spec, rng)
    p = x.shape[1]
    w0, w1, beta0, beta1, w_e = _draw_coefficients(spec, p, rng)
    mu0, mu1 = spec.noise_means()

    eps0 = rng.normal(mu0, spec.sigma0, spec.n)
    eps1 = rng.normal(mu1, spec.sigma1, spec.n)
    s0 = rng.binomial(1, sigmoid(x @ w0 + eps0)).astype(float)
    s1 = rng.binomial(1, sigmoid(x @ w1 + eps1)).astype(float)

    if spec.correlated:
        y00, y10 = s0, s1
        y0, y1 = _long_term_recursion(spec, x, y00, y10, beta0, beta1, rng)
    elif spec.family == "ihdp_like":
        # break the coupling: seed the recursion with fresh draws instead of s
        eps0b = rng.normal(mu0, spec.sigma0, spec.n)
        eps1b = rng.normal(mu1, spec.sigma1, spec.n)
        y00 = rng.binomial(1, sigmoid(x @ w0 + eps0b)).astype(float)
        y10 = rng.binomial(1, sigmoid(x @ w1 + eps1b)).astype(float)
        y0, y1 = _long_term_recursion(spec, x, y00, y10, beta0, beta1, rng)
    else:
        # cumulative term removed entirely
        y0 = (rng.binomial(1, sigmoid(x @ beta0)).astype(float)
              + rng.normal(0.0, JOBS_Y_SD[0], spec.n))
        y1 = (rng.binomial(1, sigmoid(x @ beta1)).astype(float)
              + rng.normal(0.0, JOBS_Y_SD[1], spec.n))

    a = rng.binomial(1, sigmoid(x @ w_e))
    s = np.where(a == 1, s1, s0)
    y = np.where(a == 1, y1, y0)
    truth = PotentialTruth(s0=s0, s1=s1, y0=y0, y1=y1)
    return ObservationalDataset(x=x, a=a, s=s, y=y,
                                r=np.ones(spec.n, dtype=np.int64), truth=truth)


def _generate_dgp_a(spec: DgpSpec, rng) -> ObservationalDataset:
    table = spec.table
    x = rng.binomial(1, table.p_x1, spec.n)
    s0 = rng.binomial(1, table.s_mean(0, x)).astype(float)
    s1 = rng.binomial(1, table.s_mean(1, x)).astype(float)
    y0 = rng.binomial(1, table.y_given_s(0, x, s0)).astype(float)
    y1 = rng.binomial(1, table.y_given_s(1, x, s1)).astype(float)
    a = rng.binomial(1, table.propensity(x))
    s = np.where(a == 1, s1, s0)
    y_pot = np.where(a == 1, y1, y0)
    r = rng.binomial(1, table.obs_rate(0, x, s) * (a == 0)
                     + table.obs_rate(1, x, s) * (a == 1))
    y = np.where(r == 1, y_pot, np.nan)
    truth = PotentialTruth(s0=s0, s1=s1, y0=y0, y1=y1)
    return ObservationalDataset(x=x.reshape(-1, 1).astype(float), a=a, s=s, y=y,
                                r=r, truth=truth, dgp=table)


def generate(spec: DgpSpec) -> ObservationalDataset:
    """Draw one dataset with potential-outcome truth attached.

    ``ihdp_like``/``jobs_like`` datasets start fully observed; apply
    ``apply_missingness`` to hide long-term outcomes. ``dgp_a`` observation
    flags are drawn from the table's observation rates directly.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.family == "dgp_a":
        return _generate_dgp_a(spec, rng)
    return _generate_semi_synthetic(spec, rng)


def generate_uncorrelated(spec: DgpSpec) -> ObservationalDataset:
    """Variant in which the long-term outcome is independent of the short-term
    outcome given covariates."""
    if spec.family == "dgp_a":
        raise ValueError("dgp_a tables configure the s-y link directly; "
                         "use a table with py independent of s instead")
    return generate(replace(spec, correlated=False))


def apply_missingness(ds: ObservationalDataset, gamma: float) -> ObservationalDataset:
    """Hide the floor(gamma*n) long-term outcomes with the highest score
    s_i + sum_j x_ij. Ties resolve toward the lower unit index. Truth, x, a,
    s are untouched."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"missing ratio {gamma} outside [0, 1]")
    if ds.truth is not None:
        y_full = np.where(ds.a == 1, ds.truth.y1, ds.truth.y0)
    elif np.all(ds.r == 1):
        y_full = np.asarray(ds.y, dtype=float).copy()
    else:
        raise DataError("cannot re-apply missingness: dataset already has "
                        "hidden outcomes and no truth to restore them from")
    score = ds.s + ds.x.sum(axis=1)
    n_hide = int(np.floor(gamma * ds.n))
    order = np.argsort(-score, kind="stable")
    hide = order[:n_hide]
    r = np.ones(ds.n, dtype=np.int64)
    r[hide] = 0
    y = y_full.copy()
    y[hide] = np.nan
    return ds.replace(y=y, r=r)


# ---------------------------------------------------------------------------
# Exact enumeration


def combine(v_s: float, v_y: float, lam: float, combination: str = "convex") -> float:
    """Weighted objective joining the short- and long-term values."""
    if combination == "convex":
        if not 0.0 <= lam <= 1.0:
            raise ValueError("convex combination requires lam in [0, 1]")
        return (1.0 - lam) * v_s + lam * v_y
    if combination == "additive":
        if lam < 0.0:
            raise ValueError("additive combination requires lam >= 0")
        return v_s + lam * v_y
    raise ValueError(f"unknown combination {combination!r}")


@dataclass(frozen=True)
class TruthSummary:
    """Exact population quantities of a binary-table process under a policy."""

    v_s: float
    v_y: float
    v_combined: float
    tau_s: np.ndarray      # (2,) per x
    tau_y: np.ndarray      # (2,)
    pi_star: np.ndarray    # (2,) optimal decisions per x
    gap: float             # long-term variance reduction from using s
    lam: float
    cost: float
    combination: str


def _v_y_observed_factorization(table: DgpATable, pi, cost: float) -> float:
    """Long-term value assembled purely from observed-data functionals.

    Builds the full joint p(x, a, s, y, r), recovers the conditional mean of
    y on the observed slice and the distribution of s per (x, a), and
    aggregates. Must coincide with the potential-outcome calculation.
    """
    joint = np.zeros((2, 2, 2, 2, 2))  # x, a, s, y, r
    for x in (0, 1):
        for a in (0, 1):
            pa = table.e[x] if a == 1 else 1.0 - table.e[x]
            for s in (0, 1):
                ps = table.ps[x, a] if s == 1 else 1.0 - table.ps[x, a]
                for y in (0, 1):
                    py = table.py[x, s, a] if y == 1 else 1.0 - table.py[x, s, a]
                    for rr in (0, 1):
                        pr = table.robs[a, x, s] if rr == 1 else 1.0 - table.robs[a, x, s]
                        joint[x, a, s, y, rr] = table.p_x(x) * pa * ps * py * pr
    total = 0.0
    for x in (0, 1):
        for a in (0, 1):
            weight = pi[x] if a == 1 else 1.0 - pi[x]
            shift = cost if a == 1 else 0.0
            p_xa = joint[x, a].sum()
            for s in (0, 1):
                p_s_given_xa = joint[x, a, s].sum() / p_xa
                obs = joint[x, a, s, :, 1]
                mtilde = obs[1] / obs.sum()
                total += table.p_x(x) * weight * p_s_given_xa * (mtilde - shift)
    return total


def enumerate_truth(table: DgpATable, pi, lam: float = 0.5, cost: float = 0.0,
                    combination: str = "convex") -> TruthSummary:
    """Exact values, per-x effects, optimal decisions, and the efficiency gap.

    ``pi`` gives the policy's treatment probability at x=0 and x=1 and may be
    fractional. This enumeration is the reference every sampled estimate is
    tested against.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (2,) or np.any(pi < 0) or np.any(pi > 1):
        raise ValueError("pi must be two treatment probabilities in [0, 1]")
    xs = np.array([0, 1])
    px = table.p_x(xs)

    mu = np.stack([table.s_mean(a, xs) for a in (0, 1)])          # (2, 2) [a, x]
    my = np.stack([table.y_mean(a, xs) for a in (0, 1)])
    v_s = float(np.sum(px * (pi * (mu[1] - cost) + (1 - pi) * mu[0])))
    v_y = float(np.sum(px * (pi * (my[1] - cost) + (1 - pi) * my[0])))

    v_y_obs = _v_y_observed_factorization(table, pi, cost)
    if abs(v_y - v_y_obs) > 1e-10:
        raise AssertionError(
            f"identification mismatch: potential {v_y} vs observed {v_y_obs}")

    tau_s = mu[1] - mu[0]
    tau_y = my[1] - my[0]
    score = np.array([combine(tau_s[x], tau_y[x], lam, combination) for x in xs])
    pi_star = (score >= cost).astype(int)

    # variance reduction of the long-term bound from exploiting s, taken over
    # the observational joint of (x, s)
    gap = 0.0
    for x in (0, 1):
        for s in (0, 1):
            f_s = (table.e[x] * (table.ps[x, 1] if s else 1 - table.ps[x, 1])
                   + (1 - table.e[x]) * (table.ps[x, 0] if s else 1 - table.ps[x, 0]))
            d1 = table.py[x, s, 1] - my[1, x]
            d0 = table.py[x, s, 0] - my[0, x]
            t1 = pi[x] * (1 - table.robs[1, x, s]) * d1 * d1 / (table.e[x] * table.robs[1, x, s])
            t0 = ((1 - pi[x]) * (1 - table.robs[0, x, s]) * d0 * d0
                  / ((1 - table.e[x]) * table.robs[0, x, s]))
            gap += table.p_x(x) * f_s * (t1 + t0)

    return TruthSummary(v_s=v_s, v_y=v_y,
                        v_combined=combine(v_s, v_y, lam, combination),
                        tau_s=tau_s, tau_y=tau_y, pi_star=pi_star,
                        gap=float(gap), lam=lam, cost=cost,
                        combination=combination)
