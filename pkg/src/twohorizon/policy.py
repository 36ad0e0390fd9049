"""Policy representations, learning, and truth-based evaluation.

Two variants: a deterministic threshold rule over per-unit effect estimates,
and a smooth sigmoid-of-affine rule learned by maximizing the estimated
weighted reward. Because every reward estimator is affine in the per-unit
treatment probability, the learning objective has exact gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .crossfit import NuisanceEstimates, stable_seed
from .dataset import ObservationalDataset
from .errors import NumericalError
from .simgen import combine


@dataclass(frozen=True)
class Policy:
    """Treatment rule. ``threshold`` carries per-unit effect estimates and
    thresholds them; ``smooth`` carries sigmoid parameters theta (intercept
    first)."""

    variant: str
    theta: Optional[np.ndarray] = None
    tau_s: Optional[np.ndarray] = None
    tau_y: Optional[np.ndarray] = None
    lam: float = 0.0
    cost: float = 0.0
    combination: str = "additive"

    def values(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-unit treatment probabilities in [0, 1]."""
        if self.variant == "threshold":
            score = combine(self.tau_s, self.tau_y, self.lam, self.combination)
            return (score >= self.cost).astype(float)
        if x is None:
            raise ValueError("smooth policies need covariates to evaluate")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = self.theta[0] + x @ self.theta[1:]
        return _kernels.sigmoid(z)

    def decisions(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        """Deterministic 0/1 decisions; smooth values harden at 0.5."""
        return (self.values(x) >= 0.5).astype(int)

    def to_json(self) -> str:
        payload = {"variant": self.variant, "lambda": self.lam,
                   "cost": self.cost, "combination": self.combination}
        if self.variant == "smooth":
            payload["theta"] = self.theta.tolist()
        else:
            payload["tau_s"] = self.tau_s.tolist()
            payload["tau_y"] = self.tau_y.tolist()
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        d = json.loads(text)
        kwargs = dict(variant=d["variant"], lam=d["lambda"], cost=d["cost"],
                      combination=d["combination"])
        if d["variant"] == "smooth":
            kwargs["theta"] = np.asarray(d["theta"], dtype=float)
        else:
            kwargs["tau_s"] = np.asarray(d["tau_s"], dtype=float)
            kwargs["tau_y"] = np.asarray(d["tau_y"], dtype=float)
        return cls(**kwargs)


@dataclass(frozen=True)
class PolicyMetrics:
    """Truth-based summary of a policy on one dataset."""

    reward_short: float
    reward_long: float
    reward_balanced: float
    dw_short: float
    dw_long: float
    dw_balanced: float
    policy_error: float


@dataclass(frozen=True)
class OptSettings:
    """First-order ascent configuration for smooth policy learning."""

    step: float = 0.05
    iters: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init_scale: float = 0.01


def optimal_plugin_policy(tau_s, tau_y, lam: float, cost: float = 0.0,
                          combination: str = "additive") -> Policy:
    """Threshold rule: treat where the weighted effect clears the cost.

    Exact ties treat. The default combination adds lam times the long-term
    effect to the short-term effect; "convex" weighs them (1-lam)/lam.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    tau_y = np.asarray(tau_y, dtype=float)
    if tau_s.shape != tau_y.shape:
        raise ValueError(f"effect arrays disagree: {tau_s.shape} vs {tau_y.shape}")
    combine(0.0, 0.0, lam, combination)  # validates lam range for the form
    return Policy(variant="threshold", tau_s=tau_s, tau_y=tau_y, lam=lam,
                  cost=cost, combination=combination)


def dm_policy(nu: NuisanceEstimates, lam: float, cost: float = 0.0,
              combination: str = "convex") -> Policy:
    """Direct-method rule built from the regression contrasts."""
    tau_s = nu.mu[:, 1] - nu.mu[:, 0]
    tau_y = nu.m[:, 1] - nu.m[:, 0]
    return optimal_plugin_policy(tau_s, tau_y, lam, cost=cost,
                                 combination=combination)


def policy_slopes(ds: ObservationalDataset, nu: NuisanceEstimates,
                  method: str = "proposed", cost: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit derivatives of the short/long reward summands with respect to
    the unit's treatment probability."""
    a = ds.a.astype(float)
    r = ds.r.astype(float)
    y_filled = np.where(ds.r == 1, ds.y, 0.0)
    mu1c = nu.mu[:, 1] - cost
    m1c = nu.m[:, 1] - cost
    mt1c = nu.mtilde[:, 1] - cost
    if method == "proposed":
        slope_s = (mu1c - nu.mu[:, 0]
                   + a * (ds.s - cost - mu1c) / nu.e
                   - (1.0 - a) * (ds.s - nu.mu[:, 0]) / (1.0 - nu.e))
        slope_y = (m1c - nu.m[:, 0]
                   + a * r * (y_filled - cost - mt1c) / (nu.e * nu.r[:, 1])
                   + a * (mt1c - m1c) / nu.e
                   - (1.0 - a) * r * (y_filled - nu.mtilde[:, 0]) / ((1.0 - nu.e) * nu.r[:, 0])
                   - (1.0 - a) * (nu.mtilde[:, 0] - nu.m[:, 0]) / (1.0 - nu.e))
    elif method == "ipw":
        slope_s = a * (ds.s - cost) / nu.e - (1.0 - a) * ds.s / (1.0 - nu.e)
        slope_y = (a * r * (y_filled - cost) / (nu.e * nu.r[:, 1])
                   - (1.0 - a) * r * y_filled / ((1.0 - nu.e) * nu.r[:, 0]))
    elif method == "or":
        slope_s = mu1c - nu.mu[:, 0]
        slope_y = mt1c - nu.mtilde[:, 0]
    else:
        raise ValueError(f"unknown method {method!r}")
    return slope_s, slope_y


def learn_policy(ds: ObservationalDataset, nu: NuisanceEstimates, lam: float,
                 method: str = "proposed", opt: OptSettings = OptSettings(),
                 cost: float = 0.0, combination: str = "convex") -> Policy:
    """Fit a smooth policy by adaptive-moment ascent on the estimated weighted
    reward. Deterministic given the optimizer seed."""
    slope_s, slope_y = policy_slopes(ds, nu, method=method, cost=cost)
    slope = combine(slope_s, slope_y, lam, combination)
    if not np.all(np.isfinite(slope)):
        bad = int(np.nonzero(~np.isfinite(slope))[0][0])
        raise NumericalError(
            f"non-finite objective weight for unit {bad}: "
            f"short slope {slope_s[bad]}, long slope {slope_y[bad]}")
    xb = np.column_stack([np.ones(ds.n), ds.x])
    rng = np.random.default_rng(stable_seed(opt.seed, "policy-init"))
    theta0 = rng.uniform(-opt.init_scale, opt.init_scale, xb.shape[1])
    theta = _kernels.adam_max(xb, slope, opt.step, opt.iters, opt.beta1,
                              opt.beta2, opt.eps, theta0)
    return Policy(variant="smooth", theta=theta, lam=lam, cost=cost,
                  combination=combination)


def evaluate_policy(policy: Policy, ds: ObservationalDataset, lam: float = 0.5,
                    cost: float = 0.0, combination: str = "convex") -> PolicyMetrics:
    """Score a policy against the recorded potential outcomes.

    Smooth policies harden at 0.5 first. Rewards are totals over units with
    the treatment cost charged to treated potential outcomes; welfare changes
    are the summed effect among treated units; the policy error is the mean
    squared disagreement with the threshold rule built from the true per-unit
    contrasts.
    """
    if ds.truth is None:
        raise ValueError("dataset carries no potential-outcome truth")
    t = ds.truth
    pi = policy.decisions(ds.x if policy.variant == "smooth" else None).astype(float)
    if len(pi) != ds.n:
        raise ValueError("policy decisions do not align with the dataset")

    reward_short = float(np.sum(pi * (t.s1 - cost) + (1.0 - pi) * t.s0))
    reward_long = float(np.sum(pi * (t.y1 - cost) + (1.0 - pi) * t.y0))
    reward_balanced = combine(reward_short, reward_long, lam, combination)
    dw_short = float(np.sum((t.s1 - t.s0) * pi))
    dw_long = float(np.sum((t.y1 - t.y0) * pi))
    dw_balanced = combine(dw_short, dw_long, lam, combination)

    ideal = optimal_plugin_policy(t.s1 - t.s0, t.y1 - t.y0, lam, cost=cost,
                                  combination=combination)
    err = float(np.mean((ideal.values() - pi) ** 2))
    return PolicyMetrics(reward_short=reward_short, reward_long=reward_long,
                         reward_balanced=reward_balanced, dw_short=dw_short,
                         dw_long=dw_long, dw_balanced=dw_balanced,
                         policy_error=err)
