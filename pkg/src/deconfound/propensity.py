"""Treatment-probability models fit on the learned deconfounder.

Two kinds: a ridge-penalized logistic fit by damped Newton (exactly
reproducible, gradient norm driven to 1e-8) and a seeded random forest.
Forest vote shares are smoothed so raw predictions stay strictly inside
(0, 1); optional clipping is applied at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .errors import ConvergenceError, DegenerateDataError, ShapeError, ValidationError

_GRAD_TOL = 1e-8
_MAX_NEWTON = 100
FOREST_TREES = 200
FOREST_DEPTH = 8


@dataclass
class PropensityModel:
    kind: str                      # "logistic_l2" | "tree_ensemble"
    d_Q: int
    clip_eps: float = 0.0
    coef: np.ndarray | None = None       # logistic weights (d_Q,)
    intercept: float = 0.0
    forest: RandomForestClassifier | None = None


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _fit_logistic(X, t, reg):
    """Damped Newton on the sum-NLL + 0.5*reg*||w||^2 objective.

    Features are standardized internally (the transform is folded back
    into the returned weights) so the ridge penalty and the convergence
    test are scale-free.  The intercept is unpenalized; the gradient norm
    is driven to 1e-8 relative to its value at the zero weight vector.
    """
    n, d = X.shape
    x_mean = X.mean(axis=0)
    x_std = np.where(X.std(axis=0) < 1e-12, 1.0, X.std(axis=0))
    Xb = np.hstack([(X - x_mean) / x_std, np.ones((n, 1))])
    w = np.zeros(d + 1)
    pen = np.concatenate([np.full(d, reg), [0.0]])

    def objective(w):
        z = Xb @ w
        # log(1 + exp(-|z|)) stable form
        nll = np.sum(np.logaddexp(0.0, z) - t * z)
        return nll + 0.5 * np.sum(pen * w * w)

    def unfold(w):
        coef = w[:d] / x_std
        return coef, float(w[d] - coef @ x_mean)

    obj = objective(w)
    tol = _GRAD_TOL * max(1.0, float(np.linalg.norm(Xb.T @ (0.5 - t))))
    for _ in range(_MAX_NEWTON):
        p = _sigmoid(Xb @ w)
        grad = Xb.T @ (p - t) + pen * w
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return unfold(w)
        s = np.maximum(p * (1.0 - p), 1e-12)
        H = (Xb * s[:, None]).T @ Xb + np.diag(np.maximum(pen, 1e-12))
        step = np.linalg.solve(H, grad)
        # backtracking keeps the damped step monotone
        alpha = 1.0
        while alpha > 1e-8:
            cand = w - alpha * step
            cobj = objective(cand)
            if cobj <= obj:
                w, obj = cand, cobj
                break
            alpha *= 0.5
        else:
            break
    p = _sigmoid(Xb @ w)
    gnorm = float(np.linalg.norm(Xb.T @ (p - t) + pen * w))
    if gnorm <= tol:
        return unfold(w)
    raise ConvergenceError(
        f"logistic_l2 did not reach gradient tolerance (|g| = {gnorm:.3e})",
        gradient_norm=gnorm,
    )


def fit_propensity(q_matrix, t, kind: str = "logistic_l2",
                   regularization: float = 1.0, seed: int = 0,
                   clip_eps: float = 0.0) -> PropensityModel:
    """Fit a treatment classifier on deconfounder outputs."""
    X = np.asarray(q_matrix, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != t.shape[0]:
        raise ShapeError("q_matrix must be n x d_Q aligned with t")
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite deconfounder values")
    if regularization <= 0:
        raise ValidationError("regularization must be positive")
    if not (0.0 <= clip_eps < 0.5):
        raise ValidationError("clip_eps must be in [0, 0.5)")
    n1 = int(t.sum())
    if n1 == 0 or n1 == len(t):
        raise DegenerateDataError("propensity fit needs both treatment arms")

    if kind == "logistic_l2":
        coef, intercept = _fit_logistic(X, t, regularization)
        return PropensityModel(kind=kind, d_Q=X.shape[1], clip_eps=clip_eps,
                               coef=coef, intercept=intercept)
    if kind == "tree_ensemble":
        forest = RandomForestClassifier(
            n_estimators=FOREST_TREES, max_depth=FOREST_DEPTH,
            random_state=seed & 0xFFFFFFFF, n_jobs=1,
        )
        forest.fit(X, t.astype(np.int64))
        return PropensityModel(kind=kind, d_Q=X.shape[1], clip_eps=clip_eps,
                               forest=forest)
    raise ValidationError(f"unknown propensity kind {kind!r}")


def predict_propensity(model: PropensityModel, q_matrix) -> np.ndarray:
    """Treatment probabilities, clipped to [clip_eps, 1-clip_eps] if set."""
    X = np.asarray(q_matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d_Q:
        raise ShapeError(f"expected n x {model.d_Q} deconfounder matrix")
    if model.kind == "logistic_l2":
        p = _sigmoid(X @ model.coef + model.intercept)
        # sigmoid underflow at extreme scores would return exactly 0/1
        tiny = np.finfo(np.float64).tiny
        p = np.clip(p, tiny, 1.0 - 1e-16)
    else:
        raw = model.forest.predict_proba(X)
        cls = list(model.forest.classes_)
        raw1 = raw[:, cls.index(1)] if 1 in cls else np.zeros(len(X))
        # vote-share smoothing keeps pure-vote leaves strictly inside (0,1)
        p = (raw1 * FOREST_TREES + 0.5) / (FOREST_TREES + 1.0)
    if model.clip_eps > 0:
        p = np.clip(p, model.clip_eps, 1.0 - model.clip_eps)
    return p
