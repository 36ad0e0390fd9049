"""Reward estimators for a fixed policy.

The proposed estimators average the per-unit influence values ``phi_s`` and
``phi_y``; inverse-probability weighting and outcome regression are provided
as baselines. Variances are plug-in sample variances of the per-unit
summands, which also yield normal-approximation confidence intervals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .crossfit import NuisanceEstimates
from .dataset import ObservationalDataset
from .errors import NumericalError
from .simgen import combine

METHODS = ("proposed", "ipw", "or")


@dataclass(frozen=True)
class RewardEstimate:
    """Point estimate with influence-based uncertainty."""

    value: float
    variance_of_phi: float
    n: int
    method: str = "proposed"
    which: str = "short"
    lam: Optional[float] = None

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance_of_phi / self.n)

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.std_error
        return (self.value - half, self.value + half)

    def to_json(self) -> str:
        low, high = self.ci95
        return json.dumps({
            "value": self.value, "std_error": self.std_error,
            "ci_low": low, "ci_high": high, "n": self.n,
            "method": self.method, "which": self.which, "lambda": self.lam,
        })


@dataclass(frozen=True)
class PolicyEvalInput:
    """Dataset, nuisances, and per-unit policy values bundled for estimation."""

    dataset: ObservationalDataset
    nuisances: NuisanceEstimates
    pi: np.ndarray
    cost: float = 0.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "pi", pi)
        n = self.dataset.n
        if len(pi) != n or self.nuisances.n != n:
            raise ValueError("dataset, nuisances, and policy lengths disagree")
        if np.any(pi < 0.0) or np.any(pi > 1.0):
            raise ValueError("policy values must lie in [0, 1]")


def _check_finite(name, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite {name} values")


def phi_s(pi, a, s, e, mu1, mu0, cost: float = 0.0):
    """Influence values for the short-term reward.

    Treated outcomes and their regression enter net of the treatment cost;
    the residual corrections are inverse-propensity weighted.
    """
    pi = np.asarray(pi, dtype=float)
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_finite("nuisance", e, mu1, mu0)
    if np.any((np.asarray(e) <= 0.0) | (np.asarray(e) >= 1.0)):
        raise NumericalError("propensity values must lie strictly in (0, 1)")
    s1c = s - cost
    mu1c = mu1 - cost
    return (pi * mu1c + (1.0 - pi) * mu0
            + pi * a * (s1c - mu1c) / e
            + (1.0 - pi) * (1.0 - a) * (s - mu0) / (1.0 - e))


def phi_y(pi, a, r, y, e, r1, r0, m1, m0, mt1, mt0, cost: float = 0.0):
    """Influence values for the long-term reward.

    The residual on the long-term outcome is weighted by both the propensity
    and the observation rate, and contributes exactly zero where the outcome
    is unobserved; the absent value is never touched.
    """
    pi = np.asarray(pi, dtype=float)
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite("nuisance", e, r1, r0, m1, m0, mt1, mt0)
    for probs in (e, r1, r0):
        if np.any((np.asarray(probs) <= 0.0) | (np.asarray(probs) >= 1.0)):
            raise NumericalError("probability nuisances must lie strictly in (0, 1)")
    if np.any((r == 1.0) & ~np.isfinite(y)):
        raise NumericalError("y absent while r=1")
    y_filled = np.where(r == 1.0, y, 0.0)
    _check_finite("observed outcome", y_filled)
    m1c = m1 - cost
    mt1c = mt1 - cost
    y1c = y_filled - cost
    return (pi * m1c + (1.0 - pi) * m0
            + pi * a * r * (y1c - mt1c) / (e * r1)
            + pi * a * (mt1c - m1c) / e
            + (1.0 - pi) * (1.0 - a) * r * (y_filled - mt0) / ((1.0 - e) * r0)
            + (1.0 - pi) * (1.0 - a) * (mt0 - m0) / (1.0 - e))


def _per_unit_values(inp: PolicyEvalInput, which: str, method: str,
                     hajek: bool = False) -> np.ndarray:
    ds, nu, pi, c = inp.dataset, inp.nuisances, inp.pi, inp.cost
    a = ds.a.astype(float)
    r = ds.r.astype(float)
    if which == "short":
        if method == "proposed":
            return phi_s(pi, a, ds.s, nu.e, nu.mu[:, 1], nu.mu[:, 0], cost=c)
        if method == "ipw":
            w1 = pi * a / nu.e
            w0 = (1.0 - pi) * (1.0 - a) / (1.0 - nu.e)
            if hajek:
                w1 = w1 / max(np.mean(w1), 1e-12)
                w0 = w0 / max(np.mean(w0), 1e-12)
            return w1 * (ds.s - c) + w0 * ds.s
        if method == "or":
            return pi * (nu.mu[:, 1] - c) + (1.0 - pi) * nu.mu[:, 0]
    elif which == "long":
        y_filled = np.where(ds.r == 1, ds.y, 0.0)
        if method == "proposed":
            return phi_y(pi, a, r, ds.y, nu.e, nu.r[:, 1], nu.r[:, 0],
                         nu.m[:, 1], nu.m[:, 0], nu.mtilde[:, 1], nu.mtilde[:, 0],
                         cost=c)
        if method == "ipw":
            w1 = pi * a * r / (nu.e * nu.r[:, 1])
            w0 = (1.0 - pi) * (1.0 - a) * r / ((1.0 - nu.e) * nu.r[:, 0])
            if hajek:
                w1 = w1 / max(np.mean(w1), 1e-12)
                w0 = w0 / max(np.mean(w0), 1e-12)
            return w1 * (y_filled - c) + w0 * y_filled
        if method == "or":
            return pi * (nu.mtilde[:, 1] - c) + (1.0 - pi) * nu.mtilde[:, 0]
    else:
        raise ValueError(f"unknown target {which!r}; expected 'short' or 'long'")
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _summarize(values: np.ndarray, method: str, which: str,
               lam: Optional[float] = None) -> RewardEstimate:
    if len(values) == 0:
        raise ValueError("empty dataset")
    var = float(np.var(values, ddof=1)) if len(values) > 1 else 0.0
    return RewardEstimate(value=float(np.mean(values)), variance_of_phi=var,
                          n=len(values), method=method, which=which, lam=lam)


def estimate_reward(inp: PolicyEvalInput, which: str = "short",
                    method: str = "proposed", hajek: bool = False) -> RewardEstimate:
    """Estimate one reward; variance is the sample variance of the per-unit
    summands. ``hajek`` self-normalizes the ipw weights (not part of the
    reference estimators)."""
    values = _per_unit_values(inp, which, method, hajek=hajek)
    return _summarize(values, method, which)


def estimate_balanced(inp: PolicyEvalInput, lam: float, method: str = "proposed",
                      combination: str = "convex", hajek: bool = False) -> RewardEstimate:
    """Weighted short/long objective with variance from the combined per-unit
    influence values, exploiting their linearity. The point value is the same
    weighting of the two reward estimates, exactly."""
    vs = _per_unit_values(inp, "short", method, hajek=hajek)
    vy = _per_unit_values(inp, "long", method, hajek=hajek)
    combined = combine(vs, vy, lam, combination)
    if len(combined) == 0:
        raise ValueError("empty dataset")
    value = combine(float(np.mean(vs)), float(np.mean(vy)), lam, combination)
    var = float(np.var(combined, ddof=1)) if len(combined) > 1 else 0.0
    return RewardEstimate(value=value, variance_of_phi=var, n=len(combined),
                          method=method, which="balanced", lam=lam)


def efficiency_gap(inp: PolicyEvalInput) -> float:
    """Plug-in estimate of the long-term variance reduction earned by using
    the short-term outcome. Non-negative by construction."""
    nu, pi = inp.nuisances, inp.pi
    d1 = nu.mtilde[:, 1] - nu.m[:, 1]
    d0 = nu.mtilde[:, 0] - nu.m[:, 0]
    terms = (pi * (1.0 - nu.r[:, 1]) * d1 * d1 / (nu.e * nu.r[:, 1])
             + (1.0 - pi) * (1.0 - nu.r[:, 0]) * d0 * d0 / ((1.0 - nu.e) * nu.r[:, 0]))
    return float(np.mean(terms))


def gap_summands(inp: PolicyEvalInput) -> np.ndarray:
    """Per-unit terms behind ``efficiency_gap`` (for uncertainty reporting)."""
    nu, pi = inp.nuisances, inp.pi
    d1 = nu.mtilde[:, 1] - nu.m[:, 1]
    d0 = nu.mtilde[:, 0] - nu.m[:, 0]
    return (pi * (1.0 - nu.r[:, 1]) * d1 * d1 / (nu.e * nu.r[:, 1])
            + (1.0 - pi) * (1.0 - nu.r[:, 0]) * d0 * d0 / ((1.0 - nu.e) * nu.r[:, 0]))
