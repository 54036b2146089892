"""Desk-scale synthetic study of the estimator's statistical guarantees.

The data generating process plants a binary treatment latent, a binary
confounding topic latent (correlated with treatment), and a bounded
sentiment-like latent inside a synthetic representation matrix, then draws
outcomes from a linear model in those features.  A Monte Carlo runner
reports bias, RMSE, CI coverage, and CI length.  By default the design
(latents and representations) is drawn once per scenario seed and only the
outcome noise (plus perception noise in IV mode) is redrawn per trial;
``redraw_design`` draws a fresh sample every trial instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateDataError,
    DeconfoundError,
    GenerationError,
    ValidationError,
)
from . import dml, network
from .seeds import rng_for, subseed

ALPHA_PRESETS = {"weak": (50.0, 50.0), "moderate": (100.0, 100.0),
                 "strong": (1000.0, 1000.0)}
_PROBE_TARGET = 0.95
_PROBE_ATTEMPTS = 10
_REP_NOISE_SD = 0.01
_NUISANCE_DIM = 5
_T_AMPLITUDE = 0.02
_SOFTPLUS_BIAS = 5.0


@dataclass
class SimulationScenario:
    """DGP coefficients and sampling design for one synthetic study."""

    alpha1: float = 10.0
    alpha2: float = 10.0
    alpha3: float = 50.0
    alpha4: float = 50.0
    n: int = 2000
    d_R: int = 64
    latent_corr: float = 0.5
    separability: bool = True
    noise_sd: float = 1.0
    compliance_rate: float | None = None       # IV block
    confounded_perception: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 100:
            raise ValidationError("scenario needs n >= 100")
        if self.d_R < 8:
            raise ValidationError("scenario needs d_R >= 8")
        if not (0.0 <= self.latent_corr < 1.0):
            raise ValidationError("latent_corr must be in [0, 1)")
        if self.compliance_rate is not None and not (0.0 < self.compliance_rate <= 1.0):
            raise ValidationError("compliance_rate must be in (0, 1]")

    @property
    def iv(self) -> bool:
        return self.compliance_rate is not None


def scenario_preset(strength: str, separable: bool = True, **overrides) -> SimulationScenario:
    """weak/moderate/strong presets with alpha1 = alpha2 = 10."""
    if strength not in ALPHA_PRESETS:
        raise ValidationError(f"unknown preset {strength!r}")
    a3, a4 = ALPHA_PRESETS[strength]
    return SimulationScenario(alpha3=a3, alpha4=a4, separability=separable,
                              **overrides)


@dataclass
class SyntheticTruth:
    """Planted latents plus the exact estimands they imply."""

    t: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    true_tau: float
    complier_mask: np.ndarray | None = None
    true_beta: float | None = None


def generate_latents(scenario: SimulationScenario, seed: int | None = None):
    """Correlated Gaussian latents thresholded into (t, h1) plus bounded h2.

    With ``separability=False`` the treatment is exactly the confounding
    topic indicator (the limiting entangled case).
    """
    seed = scenario.seed if seed is None else seed
    rng = rng_for(seed, "latents")
    rho = scenario.latent_corr
    z_t = rng.standard_normal(scenario.n)
    z_1 = rho * z_t + math.sqrt(1.0 - rho * rho) * rng.standard_normal(scenario.n)
    z_2 = rng.standard_normal(scenario.n)
    h1 = (z_1 > 0).astype(np.int64)
    h2 = np.tanh(z_2)
    if scenario.separability:
        t = (z_t > 0).astype(np.int64)
    else:
        t = h1.copy()
    return t, h1, h2


def _linear_probe_scores(R, t, h1, h2):
    X = np.hstack([R, np.ones((R.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(X, np.column_stack([t, h1, h2]), rcond=None)
    pred = X @ coef
    acc_t = float(np.mean((pred[:, 0] > 0.5) == (t == 1)))
    acc_h1 = float(np.mean((pred[:, 1] > 0.5) == (h1 == 1)))
    ss_res = float(np.sum((h2 - pred[:, 2]) ** 2))
    ss_tot = float(np.sum((h2 - h2.mean()) ** 2))
    r2_h2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return acc_t, acc_h1, r2_h2


def generate_representations(t, h1, h2, d_R: int, seed: int) -> np.ndarray:
    """Embed the latents into a d_R-wide matrix through a fixed random
    softplus map plus small Gaussian noise.

    A linear probe must recover t and h1 with accuracy >= 0.95 and h2 with
    R^2 >= 0.95 on the generated rows; the map is regenerated with a new
    sub-seed on failure (at most 10 attempts).
    """
    n = len(t)
    if not (len(h1) == len(h2) == n):
        raise ValidationError("latent vectors must share a length")
    rng_s = rng_for(seed, "nuisance-latents")
    s = rng_s.standard_normal((n, _NUISANCE_DIM))
    # the treatment direction is deliberately low-amplitude: still cleanly
    # decodable above the noise floor, but a minor share of the
    # representation's variance, as with a single keyword in a long text
    feats = np.column_stack([_T_AMPLITUDE * np.asarray(t), h1, h2, s]).astype(np.float64)
    width = feats.shape[1] * 3
    noise = rng_for(seed, "rep-noise").standard_normal((n, d_R)) * _REP_NOISE_SD
    for attempt in range(_PROBE_ATTEMPTS):
        rng_m = rng_for(seed, "rep-map", attempt)
        A = rng_m.normal(0.0, 0.5, (width, feats.shape[1]))
        # positive bias keeps most units in the softplus quasi-linear range
        a = rng_m.normal(_SOFTPLUS_BIAS, 0.5, width)
        B = rng_m.normal(0.0, 1.0 / math.sqrt(width), (d_R, width))
        hidden = np.logaddexp(0.0, feats @ A.T + a)       # softplus
        R = hidden @ B.T + noise
        acc_t, acc_h1, r2_h2 = _linear_probe_scores(R, t, h1, h2)
        if min(acc_t, acc_h1, r2_h2) >= _PROBE_TARGET:
            return R
    raise GenerationError(
        f"probe recoverability below {_PROBE_TARGET} after "
        f"{_PROBE_ATTEMPTS} map attempts "
        f"(last: t={acc_t:.3f}, h1={acc_h1:.3f}, h2 R2={r2_h2:.3f})"
    )


def generate_outcome(t, h1, h2, scenario: SimulationScenario, seed: int) -> np.ndarray:
    """Linear outcome model; pass the perceived treatment as ``t`` when the
    effective treatment is the perceived one (IV designs)."""
    t = np.asarray(t, dtype=np.float64)
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    eps = rng_for(seed, "outcome-noise").standard_normal(len(t)) * scenario.noise_sd
    return (scenario.alpha1 * t + scenario.alpha2 * t * h1
            - scenario.alpha3 * h1 - scenario.alpha4 * h2 + eps)


def _compliance_thresholds(h1, scenario: SimulationScenario) -> np.ndarray:
    rate = scenario.compliance_rate
    if scenario.confounded_perception:
        thr = np.where(h1 == 1, rate + 0.1, rate - 0.1)
        return np.clip(thr, 1e-6, 1.0 - 1e-6)
    return np.full(len(h1), rate)


def generate_perceived(t, h1, scenario: SimulationScenario, seed: int):
    """One-sided noncompliant perception: t_tilde = t on compliers, else 0.

    Returns (t_tilde, complier_mask); the mask records which rows would
    perceive the feature if treated.
    """
    if not scenario.iv:
        raise ValidationError("scenario has no IV block")
    v = rng_for(seed, "perception-noise").random(len(t))
    compliers = v < _compliance_thresholds(np.asarray(h1), scenario)
    t_tilde = (np.asarray(t) * compliers).astype(np.int64)
    return t_tilde, compliers


def true_late(scenario: SimulationScenario, truth: SyntheticTruth) -> float:
    """Mean per-row effect over the complier set recorded at generation."""
    if truth.complier_mask is None:
        raise ValidationError("truth carries no complier record")
    mask = truth.complier_mask
    if not mask.any():
        raise DegenerateDataError("empty complier set")
    return float(np.mean(scenario.alpha1 + scenario.alpha2 * truth.h1[mask]))


def draw_truth(scenario: SimulationScenario, seed: int | None = None) -> SyntheticTruth:
    """Draw latents for one design and record the implied estimands."""
    seed = scenario.seed if seed is None else seed
    t, h1, h2 = generate_latents(scenario, seed)
    truth = SyntheticTruth(
        t=t, h1=h1, h2=h2,
        true_tau=float(scenario.alpha1 + scenario.alpha2 * np.mean(h1)),
    )
    if scenario.iv:
        _, compliers = generate_perceived(t, h1, scenario, subseed(seed, "base-perception"))
        truth.complier_mask = compliers
        truth.true_beta = true_late(scenario, truth)
    return truth


def true_propensity(scenario: SimulationScenario, h1) -> np.ndarray:
    """P(t = 1 | h1) implied by the correlated-threshold latents."""
    if not scenario.separability:
        raise DegenerateDataError(
            "treatment is a deterministic function of the confounder; "
            "the true propensity is degenerate"
        )
    rho = scenario.latent_corr
    p_given_1 = 0.5 + math.asin(rho) / math.pi
    return np.where(np.asarray(h1) == 1, p_given_1, 1.0 - p_given_1)


def oracle_nuisances_ate(scenario: SimulationScenario, truth: SyntheticTruth):
    """Exact (mu0, mu1, pi) from the DGP."""
    h1, h2 = truth.h1.astype(np.float64), truth.h2
    mu0 = -scenario.alpha3 * h1 - scenario.alpha4 * h2
    mu1 = scenario.alpha1 + scenario.alpha2 * h1 + mu0
    pi = true_propensity(scenario, truth.h1)
    return mu0, mu1, pi


def oracle_nuisances_late(scenario: SimulationScenario, truth: SyntheticTruth):
    """Exact (mu0, mu1, m0, m1, pi) under one-sided perception."""
    h1, h2 = truth.h1.astype(np.float64), truth.h2
    m1 = _compliance_thresholds(truth.h1, scenario)
    m0 = np.zeros_like(m1)
    base = -scenario.alpha3 * h1 - scenario.alpha4 * h2
    mu0 = base.copy()
    mu1 = (scenario.alpha1 + scenario.alpha2 * h1) * m1 + base
    pi = true_propensity(scenario, truth.h1)
    return mu0, mu1, m0, m1, pi


def population_truth(scenario: SimulationScenario):
    """Estimand values under fresh sampling (E[h1] = 1/2 exactly)."""
    tau = scenario.alpha1 + scenario.alpha2 * 0.5
    beta = None
    if scenario.iv:
        if scenario.confounded_perception:
            p1 = min(max(scenario.compliance_rate + 0.1, 1e-6), 1 - 1e-6)
            p0 = min(max(scenario.compliance_rate - 0.1, 1e-6), 1 - 1e-6)
            w1, w0 = 0.5 * p1, 0.5 * p0
            beta = ((scenario.alpha1 + scenario.alpha2) * w1
                    + scenario.alpha1 * w0) / (w1 + w0)
        else:
            beta = scenario.alpha1 + scenario.alpha2 * 0.5
    return tau, beta


@dataclass
class EstimatorSpec:
    """Which estimator the Monte Carlo runner applies each trial."""

    method: str = "gpi"            # gpi | diff_in_means | oracle
    estimand: str = "ate"          # ate | late
    k_folds: int = 2
    inner_split_fraction: float = 0.5
    d_Q: int | None = 16
    head_hidden: int = 128
    dropout_rate: float = 0.05
    learning_rate: float = 3e-3
    batch_size: int = 64
    max_epochs: int = 3000
    patience: int = 60
    n_nets: int = 1
    prop_kind: str = "logistic_l2"
    prop_regularization: float = 1.0
    prop_clip_eps: float = 0.0
    ci_level: float = 0.95

    def __post_init__(self):
        if self.method not in ("gpi", "diff_in_means", "oracle"):
            raise ValidationError(f"unknown estimator method {self.method!r}")
        if self.estimand not in ("ate", "late"):
            raise ValidationError(f"unknown estimand {self.estimand!r}")

    def net_config(self, d_R: int, seed: int) -> network.NetworkConfig:
        return network.NetworkConfig(
            d_R=d_R, d_Q=self.d_Q, head_hidden=self.head_hidden,
            dropout_rate=self.dropout_rate, learning_rate=self.learning_rate,
            batch_size=self.batch_size, max_epochs=self.max_epochs,
            patience=self.patience, n_nets=self.n_nets, seed=seed,
            iv_mode=self.estimand == "late",
        )


@dataclass
class TrialRecord:
    trial: int
    estimate: float | None
    std_error: float | None
    ci_low: float | None
    ci_high: float | None
    covered: bool | None
    runtime_seconds: float
    error: str | None = None


@dataclass
class MCReport:
    scenario: SimulationScenario
    estimator: EstimatorSpec
    true_value: float
    trials: list
    bias: float
    rmse: float
    coverage: float
    avg_ci_length: float
    avg_runtime_seconds: float
    n_failures: int


def _needs_representations(spec: EstimatorSpec) -> bool:
    return spec.method == "gpi"


def _dataset_for_trial(scenario, truth, R, y, t_tilde):
    n = scenario.n
    ids = tuple(f"obs{i}" for i in range(n))
    if R is None:
        R = np.zeros((n, 1))
    return Dataset(ids=ids, y=y, t=truth.t, R=R, t_tilde=t_tilde)


def _run_estimator(spec, scenario, truth, R, y, t_tilde, trial_seed):
    if spec.method == "oracle":
        if spec.estimand == "late":
            mu0, mu1, m0, m1, pi = oracle_nuisances_late(scenario, truth)
            return dml.pooled_late_result(y, truth.t, t_tilde, mu0, mu1,
                                          m0, m1, pi, spec.ci_level)
        mu0, mu1, pi = oracle_nuisances_ate(scenario, truth)
        return dml.pooled_ate_result(y, truth.t, mu0, mu1, pi, spec.ci_level)
    ds = _dataset_for_trial(scenario, truth, R, y, t_tilde)
    if spec.method == "diff_in_means":
        return dml.difference_in_means(ds, spec.ci_level)
    plan = dml.make_folds(scenario.n, spec.k_folds, spec.inner_split_fraction,
                          seed=subseed(trial_seed, "folds"))
    cfg = spec.net_config(scenario.d_R, seed=subseed(trial_seed, "net"))
    if spec.estimand == "late":
        return dml.estimate_late(ds, plan, cfg, spec.prop_kind,
                                 spec.prop_regularization, spec.prop_clip_eps,
                                 spec.ci_level)
    return dml.estimate_ate(ds, plan, cfg, spec.prop_kind,
                            spec.prop_regularization, spec.prop_clip_eps,
                            spec.ci_level)


def run_monte_carlo(scenario: SimulationScenario, estimator: EstimatorSpec,
                    trials: int, redraw_design: bool = False) -> MCReport:
    """Repeated estimation over noise redraws (or fresh samples).

    Default follows the conditional design: one design draw per scenario
    seed, per-trial outcome (and perception) noise.  With ``redraw_design``
    every trial is an independent sample and the target is the population
    estimand.
    """
    if trials < 50:
        raise ValidationError("need at least 50 trials")
    base_truth = None
    base_R = None
    if not redraw_design:
        base_truth = draw_truth(scenario)
        if _needs_representations(estimator):
            base_R = generate_representations(
                base_truth.t, base_truth.h1, base_truth.h2, scenario.d_R,
                subseed(scenario.seed, "representations"))
    if redraw_design:
        tau_pop, beta_pop = population_truth(scenario)
        true_value = beta_pop if estimator.estimand == "late" else tau_pop
    else:
        true_value = (base_truth.true_beta if estimator.estimand == "late"
                      else base_truth.true_tau)
        if true_value is None:
            raise ValidationError("late estimand requires an IV scenario")

    records = []
    for j in range(trials):
        trial_seed = subseed(scenario.seed, "trial", j)
        start = time.perf_counter()
        try:
            if redraw_design:
                truth = draw_truth(scenario, seed=subseed(trial_seed, "design"))
                R = None
                if _needs_representations(estimator):
                    R = generate_representations(
                        truth.t, truth.h1, truth.h2, scenario.d_R,
                        subseed(trial_seed, "design", "representations"))
            else:
                truth, R = base_truth, base_R
            t_tilde = None
            if estimator.estimand == "late":
                t_tilde, _ = generate_perceived(truth.t, truth.h1, scenario,
                                                subseed(trial_seed, "perception"))
                y = generate_outcome(t_tilde, truth.h1, truth.h2, scenario,
                                     subseed(trial_seed, "outcome"))
            else:
                y = generate_outcome(truth.t, truth.h1, truth.h2, scenario,
                                     subseed(trial_seed, "outcome"))
            res = _run_estimator(estimator, scenario, truth, R, y, t_tilde,
                                 trial_seed)
            elapsed = time.perf_counter() - start
            records.append(TrialRecord(
                trial=j, estimate=res.estimate, std_error=res.std_error,
                ci_low=res.ci_low, ci_high=res.ci_high,
                covered=bool(res.ci_low <= true_value <= res.ci_high),
                runtime_seconds=elapsed,
            ))
        except DeconfoundError as exc:
            elapsed = time.perf_counter() - start
            records.append(TrialRecord(
                trial=j, estimate=None, std_error=None, ci_low=None,
                ci_high=None, covered=None, runtime_seconds=elapsed,
                error=str(exc),
            ))
    ok = [r for r in records if r.error is None]
    if ok:
        est = np.array([r.estimate for r in ok])
        bias = float(np.mean(est) - true_value)
        rmse = float(np.sqrt(np.mean((est - true_value) ** 2)))
        coverage = float(np.mean([r.covered for r in ok]))
        ci_len = float(np.mean([r.ci_high - r.ci_low for r in ok]))
    else:
        bias = rmse = coverage = ci_len = float("nan")
    return MCReport(
        scenario=scenario, estimator=estimator, true_value=true_value,
        trials=records, bias=bias, rmse=rmse, coverage=coverage,
        avg_ci_length=ci_len,
        avg_runtime_seconds=float(np.mean([r.runtime_seconds for r in records])),
        n_failures=len(records) - len(ok),
    )


def diagnostics_trial(scenario: SimulationScenario, spec: EstimatorSpec,
                      trial: int = 0):
    """Train nuisances on half the design and diagnose the held-out half.

    Returns (support_score, control_fraction_below_05, extreme_fraction).
    """
    from . import diagnostics as diag

    truth = draw_truth(scenario)
    R = generate_representations(truth.t, truth.h1, truth.h2, scenario.d_R,
                                 subseed(scenario.seed, "representations"))
    trial_seed = subseed(scenario.seed, "diag-trial", trial)
    y = generate_outcome(truth.t, truth.h1, truth.h2, scenario,
                         subseed(trial_seed, "outcome"))
    ds = Dataset(ids=tuple(f"obs{i}" for i in range(scenario.n)),
                 y=y, t=truth.t, R=R)
    plan = dml.make_folds(scenario.n, 2, spec.inner_split_fraction,
                          seed=subseed(trial_seed, "folds"))
    cfg = spec.net_config(scenario.d_R, seed=subseed(trial_seed, "net"))
    nuis = dml.fit_fold_nuisances(ds, plan, 0, cfg, spec.prop_kind,
                                  spec.prop_regularization, spec.prop_clip_eps)
    hold = plan.fold_indices(0)
    q = network.deconfounder_outputs(nuis.model, ds.R[hold])
    from .propensity import predict_propensity

    p = predict_propensity(nuis.propensity, q)
    t_hold = ds.t[hold]
    score = diag.ioss(q, t_hold, seed=trial_seed)
    control_p = p[t_hold == 0]
    control_below = float(np.mean(control_p < 0.05)) if len(control_p) else 0.0
    extreme = float(np.mean((p < 0.01) | (p > 0.99)))
    return score, control_below, extreme
