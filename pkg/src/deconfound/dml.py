"""Cross-fitted doubly robust estimation of ATE and LATE.

Folds partition the sample; inside each fold's complement an inner split
feeds the deconfounder/outcome network (first part) and the propensity
model (second part).  Fold-k rows are then scored with fold-k nuisances.
The point estimate is the mean of the uncentered augmented
inverse-propensity scores (the exact root of the pooled estimating
equation), with a plug-in variance from the centered scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .data import Dataset
from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    OverlapError,
    ValidationError,
    WeakInstrumentError,
)
from . import network
from .propensity import PropensityModel, fit_propensity, predict_propensity
from .seeds import rng_for, subseed

_WEAK_DENOM = 1e-6


@dataclass(frozen=True)
class FoldPlan:
    """K-fold assignment plus a per-fold inner split of the complement."""

    k_folds: int
    assignment: np.ndarray           # fold index per observation, 0-based
    inner_split_fraction: float
    seed: int
    inner1: dict = field(default_factory=dict)   # fold -> row indices for net
    inner2: dict = field(default_factory=dict)   # fold -> row indices for propensity

    def fold_indices(self, k):
        return np.flatnonzero(self.assignment == k)


@dataclass
class NuisanceSet:
    """Per-fold trained nuisances with training-row provenance."""

    fold: int
    model: network.TarNetModel
    propensity: PropensityModel
    train_row_ids: tuple
    models: list = field(default_factory=list)   # ensemble members; [0] is model


@dataclass
class EstimateResult:
    estimand: str                    # "ATE" | "LATE" | "DIFF_IN_MEANS"
    estimate: float
    scores: np.ndarray               # centered influence scores
    variance: float
    std_error: float
    ci_level: float
    ci_low: float
    ci_high: float
    n_used: int
    fold_summaries: list = field(default_factory=list)
    score_components: dict = field(default_factory=dict)


def make_folds(n: int, k: int, inner_split_fraction: float = 0.5,
               seed: int = 0) -> FoldPlan:
    """Seeded uniform partition into k folds (sizes differ by at most 1)."""
    if k < 2:
        raise ValidationError("need k >= 2 folds")
    if not (0.0 < inner_split_fraction < 1.0):
        raise ValidationError("inner_split_fraction must be in (0, 1)")
    if n < 2 * k:
        raise InsufficientDataError(f"n={n} too small for K={k} folds")
    rng = rng_for(seed, "folds")
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    for pos, idx in enumerate(perm):
        assignment[idx] = pos % k
    inner1, inner2 = {}, {}
    for fold in range(k):
        comp = np.flatnonzero(assignment != fold)
        order = rng_for(seed, "inner", fold).permutation(len(comp))
        n1 = max(1, int(round(inner_split_fraction * len(comp))))
        n1 = min(n1, len(comp) - 1)
        inner1[fold] = np.sort(comp[order[:n1]])
        inner2[fold] = np.sort(comp[order[n1:]])
    return FoldPlan(k_folds=k, assignment=assignment,
                    inner_split_fraction=inner_split_fraction, seed=seed,
                    inner1=inner1, inner2=inner2)


def aipw_score(obs, mu0: float, mu1: float, pi: float, tau: float) -> float:
    """Augmented inverse-propensity influence score for one observation."""
    if not (0.0 < pi < 1.0):
        raise OverlapError(f"propensity {pi} outside (0, 1)")
    t, y = obs.t, obs.y
    return (t * (y - mu1) / pi
            - (1 - t) * (y - mu0) / (1.0 - pi)
            + mu1 - mu0 - tau)


def late_score_components(obs, mu0, mu1, m0, m1, pi):
    """(outcome score, perceived-treatment score) for the ratio estimator."""
    if not (0.0 < pi < 1.0):
        raise OverlapError(f"propensity {pi} outside (0, 1)")
    if obs.t_tilde is None:
        raise ValidationError("observation lacks t_tilde")
    t, y, tt = obs.t, obs.y, obs.t_tilde
    num = (t * (y - mu1) / pi
           - (1 - t) * (y - mu0) / (1.0 - pi)
           + mu1 - mu0)
    den = (t * (tt - m1) / pi
           - (1 - t) * (tt - m0) / (1.0 - pi)
           + m1 - m0)
    return num, den


def _check_pi(pi):
    pi = np.asarray(pi, dtype=np.float64)
    if np.any(pi <= 0.0) or np.any(pi >= 1.0):
        raise OverlapError(
            "estimated propensity hit 0 or 1; overlap/separability suspect "
            "(consider clip_eps or the diagnostics report)"
        )
    return pi


def ate_uncentered_scores(y, t, mu0, mu1, pi) -> np.ndarray:
    """Vectorized uncentered scores; their mean is the point estimate."""
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    mu1 = np.asarray(mu1, dtype=np.float64)
    pi = _check_pi(pi)
    return (t * (y - mu1) / pi
            - (1.0 - t) * (y - mu0) / (1.0 - pi)
            + mu1 - mu0)


def late_uncentered_scores(y, t, t_tilde, mu0, mu1, m0, m1, pi):
    """(numerator, denominator) score vectors for the ratio estimator."""
    num = ate_uncentered_scores(y, t, mu0, mu1, pi)
    den = ate_uncentered_scores(np.asarray(t_tilde, dtype=np.float64),
                                t, m0, m1, pi)
    return num, den


def _z_critical(level: float) -> float:
    return float(ndtri(0.5 + level / 2.0))


def pooled_ate_result(y, t, mu0, mu1, pi, ci_level: float = 0.95,
                      fold_summaries=None) -> EstimateResult:
    """Point estimate, plug-in variance, and CI from pooled scores.

    This is the scoring path shared by the cross-fitted estimator and any
    caller that injects its own (e.g. oracle) nuisances.
    """
    uncentered = ate_uncentered_scores(y, t, mu0, mu1, pi)
    n = len(uncentered)
    tau_hat = float(np.mean(uncentered))
    psi = uncentered - tau_hat
    variance = float(np.mean(psi ** 2))
    se = math.sqrt(variance / n)
    z = _z_critical(ci_level)
    return EstimateResult(
        estimand="ATE", estimate=tau_hat, scores=psi, variance=variance,
        std_error=se, ci_level=ci_level,
        ci_low=tau_hat - z * se, ci_high=tau_hat + z * se, n_used=n,
        fold_summaries=fold_summaries or [],
    )


def pooled_late_result(y, t, t_tilde, mu0, mu1, m0, m1, pi,
                       ci_level: float = 0.95,
                       fold_summaries=None) -> EstimateResult:
    """Ratio-of-means estimator with its influence-based plug-in variance."""
    num, den = late_uncentered_scores(y, t, t_tilde, mu0, mu1, m0, m1, pi)
    n = len(num)
    mean_den = float(np.mean(den))
    if abs(mean_den) < _WEAK_DENOM:
        raise WeakInstrumentError(
            f"mean perceived-treatment score {mean_den:.3e} is numerically zero"
        )
    beta_hat = float(np.mean(num)) / mean_den
    phi = num - beta_hat * den
    variance = float(np.mean(phi ** 2)) / mean_den ** 2
    se = math.sqrt(variance / n)
    z = _z_critical(ci_level)
    return EstimateResult(
        estimand="LATE", estimate=beta_hat, scores=phi / mean_den,
        variance=variance, std_error=se, ci_level=ci_level,
        ci_low=beta_hat - z * se, ci_high=beta_hat + z * se, n_used=n,
        fold_summaries=fold_summaries or [],
        score_components={"numerator": num, "denominator": den},
    )


def fit_fold_nuisances(dataset: Dataset, plan: FoldPlan, fold: int,
                       net_config: network.NetworkConfig,
                       prop_kind: str = "logistic_l2",
                       prop_regularization: float = 1.0,
                       prop_clip_eps: float = 0.0) -> NuisanceSet:
    """Train the network on the fold's first inner part and the propensity
    model on deconfounder outputs of the second."""
    idx1 = plan.inner1[fold]
    idx2 = plan.inner2[fold]
    cfg_kwargs = {k: getattr(net_config, k) for k in (
        "d_R", "d_Q", "head_hidden", "dropout_rate", "learning_rate",
        "batch_size", "max_epochs", "patience", "val_fraction", "iv_mode",
        "n_nets",
    )}
    cfg = network.NetworkConfig(seed=subseed(net_config.seed, "fold", fold), **cfg_kwargs)
    sub = dataset.subset(idx1)
    models = network.train_ensemble(sub.observations, cfg)
    model = models[0]
    q2 = network.deconfounder_outputs(model, dataset.R[idx2])
    prop = fit_propensity(
        q2, dataset.t[idx2], kind=prop_kind,
        regularization=prop_regularization,
        seed=subseed(net_config.seed, "fold", fold, "propensity"),
        clip_eps=prop_clip_eps,
    )
    train_ids = tuple(dataset.ids[i] for i in np.concatenate([idx1, idx2]))
    return NuisanceSet(fold=fold, model=model, propensity=prop,
                       train_row_ids=train_ids, models=models)


def _cross_fit(dataset, plan, net_config, prop_kind, prop_regularization,
               prop_clip_eps):
    n = dataset.n
    want = ["mu0", "mu1"] + (["m0", "m1"] if net_config.iv_mode else [])
    preds = {k: np.empty(n) for k in want}
    pi = np.empty(n)
    summaries = []
    for fold in range(plan.k_folds):
        try:
            nuis = fit_fold_nuisances(dataset, plan, fold, net_config,
                                      prop_kind, prop_regularization,
                                      prop_clip_eps)
        except Exception as exc:
            exc.args = (f"fold {fold}: {exc}",) + exc.args[1:]
            raise
        hold = plan.fold_indices(fold)
        outs = network.predict_heads_ensemble(nuis.models, dataset.R[hold])
        for k in want:
            preds[k][hold] = outs[k]
        q = network.deconfounder_outputs(nuis.model, dataset.R[hold])
        pi[hold] = predict_propensity(nuis.propensity, q)
        summaries.append({
            "fold": fold,
            "n_scored": len(hold),
            "val_loss": min(e["val_loss"] for e in nuis.model.train_log),
            "epochs": len(nuis.model.train_log),
            "net_warnings": len(nuis.model.warnings),
        })
    return preds, pi, summaries


def estimate_ate(dataset: Dataset, fold_plan: FoldPlan,
                 net_config: network.NetworkConfig,
                 prop_kind: str = "logistic_l2",
                 prop_regularization: float = 1.0,
                 prop_clip_eps: float = 0.0,
                 ci_level: float = 0.95) -> EstimateResult:
    """Full cross-fitted pipeline for the average treatment effect."""
    preds, pi, summaries = _cross_fit(
        dataset, fold_plan, net_config, prop_kind, prop_regularization,
        prop_clip_eps)
    return pooled_ate_result(dataset.y, dataset.t, preds["mu0"], preds["mu1"],
                             pi, ci_level, fold_summaries=summaries)


def estimate_late(dataset: Dataset, fold_plan: FoldPlan,
                  net_config: network.NetworkConfig,
                  prop_kind: str = "logistic_l2",
                  prop_regularization: float = 1.0,
                  prop_clip_eps: float = 0.0,
                  ci_level: float = 0.95) -> EstimateResult:
    """Cross-fitted local effect of the perceived treatment, instrumented
    by the actual treatment feature."""
    if not dataset.has_perceived:
        raise ValidationError("dataset lacks t_tilde; cannot estimate LATE")
    if not net_config.iv_mode:
        raise ValidationError("estimate_late requires iv_mode network config")
    preds, pi, summaries = _cross_fit(
        dataset, fold_plan, net_config, prop_kind, prop_regularization,
        prop_clip_eps)
    return pooled_late_result(
        dataset.y, dataset.t, dataset.t_tilde,
        preds["mu0"], preds["mu1"], preds["m0"], preds["m1"], pi,
        ci_level, fold_summaries=summaries)


def difference_in_means(dataset: Dataset, ci_level: float = 0.95) -> EstimateResult:
    """Unadjusted baseline with the two-sample Welch variance."""
    t = dataset.t
    y1, y0 = dataset.y[t == 1], dataset.y[t == 0]
    if len(y1) == 0 or len(y0) == 0:
        raise DegenerateDataError("difference in means needs both arms")
    est = float(np.mean(y1) - np.mean(y0))
    n1, n0 = len(y1), len(y0)
    v1 = float(np.var(y1, ddof=1)) if n1 > 1 else 0.0
    v0 = float(np.var(y0, ddof=1)) if n0 > 1 else 0.0
    var_est = v1 / n1 + v0 / n0
    se = math.sqrt(var_est)
    z = _z_critical(ci_level)
    # influence-style scores: mean-zero at the estimate by construction
    n = dataset.n
    scores = (t * (dataset.y - np.mean(y1)) / (n1 / n)
              - (1 - t) * (dataset.y - np.mean(y0)) / (n0 / n))
    return EstimateResult(
        estimand="DIFF_IN_MEANS", estimate=est, scores=scores,
        variance=var_est * n, std_error=se, ci_level=ci_level,
        ci_low=est - z * se, ci_high=est + z * se, n_used=n,
    )
