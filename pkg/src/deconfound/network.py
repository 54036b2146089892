"""Deconfounder-plus-heads network with hand-written forward/backward passes.

One affine layer maps the representation to a low-dimensional deconfounder
(ReLU), and each treatment arm gets its own two-layer outcome head.  With
``iv_mode`` two extra heads emit perceived-treatment probabilities through a
logistic squash.  Training is mini-batch Adam on the arm-routed squared
loss with inverted dropout and early stopping on a held-out validation
split.  Everything is float64 numpy and fully seeded.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateDataError, ShapeError, ValidationError
from .seeds import rng_for, subseed

_OUTCOME_HEADS = ("mu0", "mu1")
_IV_HEADS = ("m0", "m1")


@dataclass
class NetworkConfig:
    """Architecture and optimization settings.

    Defaults mirror a reference configuration (hidden width 500, dropout
    0.15, batch 32, up to 500 epochs, 15-epoch patience) with the
    deconfounder width scaled to half the input width.
    """

    d_R: int
    d_Q: int | None = None
    head_hidden: int = 500
    dropout_rate: float = 0.15
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 15
    val_fraction: float = 0.2
    seed: int = 0
    iv_mode: bool = False
    n_nets: int = 1

    def __post_init__(self):
        if self.n_nets < 1:
            raise ValidationError("n_nets must be >= 1")
        if self.d_Q is None:
            self.d_Q = max(1, self.d_R // 2)
        if not (1 <= self.d_Q <= self.d_R):
            raise ValidationError("need 1 <= d_Q <= d_R")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValidationError("dropout_rate must be in [0, 1)")
        if not (0.0 < self.val_fraction < 0.5):
            raise ValidationError("val_fraction must be in (0, 0.5)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValidationError("learning_rate, batch_size, max_epochs must be positive")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")

    def head_names(self):
        return _OUTCOME_HEADS + (_IV_HEADS if self.iv_mode else ())


@dataclass
class Prediction:
    """Eval-time outputs for one representation vector."""

    q: np.ndarray
    mu0: float
    mu1: float
    m0: float | None = None
    m1: float | None = None


@dataclass
class TarNetModel:
    """Trained (or freshly initialized) network weights plus metadata."""

    params: dict
    config: NetworkConfig
    train_log: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def init_params(config: NetworkConfig, rng: np.random.Generator) -> dict:
    """He-scaled Gaussian init for every layer."""
    p = {}
    p["lam_W"] = rng.normal(0.0, math.sqrt(2.0 / config.d_R), (config.d_Q, config.d_R))
    p["lam_b"] = np.zeros(config.d_Q)
    for head in config.head_names():
        p[f"{head}_W1"] = rng.normal(
            0.0, math.sqrt(2.0 / config.d_Q), (config.head_hidden, config.d_Q)
        )
        p[f"{head}_b1"] = np.zeros(config.head_hidden)
        p[f"{head}_W2"] = rng.normal(
            0.0, math.sqrt(2.0 / config.head_hidden), (1, config.head_hidden)
        )
        p[f"{head}_b2"] = np.zeros(1)
    return p


def new_model(config: NetworkConfig) -> TarNetModel:
    return TarNetModel(params=init_params(config, rng_for(config.seed, "init")), config=config)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def make_dropout_masks(config: NetworkConfig, n: int, rng: np.random.Generator) -> dict:
    """Inverted-dropout masks for a batch of size n (one per dropout site)."""
    rate = config.dropout_rate
    masks = {}
    if rate == 0.0:
        return masks
    keep = 1.0 - rate
    masks["q"] = (rng.random((n, config.d_Q)) < keep) / keep
    for head in config.head_names():
        masks[head] = (rng.random((n, config.head_hidden)) < keep) / keep
    return masks


def _forward_all(params, config, R, masks=None):
    """Batch forward through deconfounder and every head; keeps intermediates."""
    if R.shape[1] != config.d_R:
        raise ShapeError(f"expected d_R={config.d_R}, got {R.shape[1]}")
    masks = masks or {}
    cache = {"R": R}
    Z = R @ params["lam_W"].T + params["lam_b"]
    Q = np.maximum(Z, 0.0)
    Qd = Q * masks["q"] if "q" in masks else Q
    cache.update(Z=Z, Q=Q, Qd=Qd)
    outs = {}
    for head in config.head_names():
        P = Qd @ params[f"{head}_W1"].T + params[f"{head}_b1"]
        H = np.maximum(P, 0.0)
        Hd = H * masks[head] if head in masks else H
        O = (Hd @ params[f"{head}_W2"].T + params[f"{head}_b2"])[:, 0]
        cache[f"{head}_P"] = P
        cache[f"{head}_Hd"] = Hd
        if head in _IV_HEADS:
            outs[head] = _sigmoid(O)
            cache[f"{head}_prob"] = outs[head]
        else:
            outs[head] = O
    return outs, cache


def forward(model: TarNetModel, r, train_mode: bool = False,
            rng: np.random.Generator | None = None) -> Prediction:
    """Evaluate one representation vector.

    With ``train_mode`` dropout masks are drawn from ``rng`` (or a fresh
    stream from the model seed); eval mode is a pure function.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1:
        raise ShapeError("r must be a vector")
    R = r[None, :]
    masks = None
    if train_mode and model.config.dropout_rate > 0:
        rng = rng or rng_for(model.config.seed, "forward")
        masks = make_dropout_masks(model.config, 1, rng)
    outs, cache = _forward_all(model.params, model.config, R, masks)
    return Prediction(
        q=cache["Q"][0].copy(),
        mu0=float(outs["mu0"][0]),
        mu1=float(outs["mu1"][0]),
        m0=float(outs["m0"][0]) if model.config.iv_mode else None,
        m1=float(outs["m1"][0]) if model.config.iv_mode else None,
    )


def deconfounder_outputs(model: TarNetModel, R) -> np.ndarray:
    """Eval-mode deconfounder values for a batch (n x d_Q)."""
    R = np.asarray(R, dtype=np.float64)
    Z = R @ model.params["lam_W"].T + model.params["lam_b"]
    return np.maximum(Z, 0.0)


def predict_heads(model: TarNetModel, R):
    """Eval-mode head outputs for a batch; returns dict of arrays."""
    outs, _ = _forward_all(model.params, model.config, np.asarray(R, dtype=np.float64))
    return outs


def predict_heads_ensemble(models, R):
    """Average eval-mode head outputs across independently trained models."""
    acc = None
    for model in models:
        outs = predict_heads(model, R)
        if acc is None:
            acc = {k: v.copy() for k, v in outs.items()}
        else:
            for k in acc:
                acc[k] += outs[k]
    for k in acc:
        acc[k] /= len(models)
    return acc


def _batch_arrays(batch):
    y = np.array([o.y for o in batch], dtype=np.float64)
    t = np.array([o.t for o in batch], dtype=np.int64)
    R = np.stack([np.asarray(o.r, dtype=np.float64) for o in batch])
    tt = None
    if all(o.t_tilde is not None for o in batch):
        tt = np.array([o.t_tilde for o in batch], dtype=np.float64)
    return y, t, R, tt


def _loss_from_outs(outs, y, t, tt, iv_mode):
    mu = np.where(t == 1, outs["mu1"], outs["mu0"])
    loss = float(np.mean((y - mu) ** 2))
    if iv_mode:
        m = np.where(t == 1, outs["m1"], outs["m0"])
        loss += float(np.mean((tt - m) ** 2))
    return loss


def loss_ate(model: TarNetModel, batch, masks=None) -> float:
    """Mean squared arm-routed outcome residual over the batch."""
    if len(batch) == 0:
        raise ValidationError("empty batch")
    y, t, R, _ = _batch_arrays(batch)
    outs, _ = _forward_all(model.params, model.config, R, masks)
    mu = np.where(t == 1, outs["mu1"], outs["mu0"])
    return float(np.mean((y - mu) ** 2))


def loss_late(model: TarNetModel, batch, masks=None) -> float:
    """Outcome plus perceived-treatment squared residuals, arm-routed."""
    if not model.config.iv_mode:
        raise ValidationError("loss_late requires iv_mode")
    if len(batch) == 0:
        raise ValidationError("empty batch")
    y, t, R, tt = _batch_arrays(batch)
    if tt is None:
        raise ValidationError("batch observations lack t_tilde")
    outs, _ = _forward_all(model.params, model.config, R, masks)
    return _loss_from_outs(outs, y, t, tt, iv_mode=True)


def batch_loss(model: TarNetModel, batch, masks=None) -> float:
    return loss_late(model, batch, masks) if model.config.iv_mode else loss_ate(model, batch, masks)


def gradients(model: TarNetModel, batch, masks=None) -> dict:
    """Exact gradient of the batch loss at the current weights.

    ``masks``, when given, pins the dropout pattern so the same masks can
    be replayed through the loss (finite-difference checks rely on this).
    """
    if len(batch) == 0:
        raise ValidationError("empty batch")
    y, t, R, tt = _batch_arrays(batch)
    if model.config.iv_mode and tt is None:
        raise ValidationError("batch observations lack t_tilde")
    return _gradients_arrays(model.params, model.config, y, t, R, tt, masks)


def _gradients_arrays(params, config, y, t, R, tt, masks=None):
    n = R.shape[0]
    masks = masks or {}
    outs, cache = _forward_all(params, config, R, masks)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    arm = {"0": (t == 0).astype(np.float64), "1": (t == 1).astype(np.float64)}
    dQd = np.zeros_like(cache["Qd"])
    for head in config.head_names():
        a = arm[head[-1]]
        if head in _IV_HEADS:
            prob = cache[f"{head}_prob"]
            dO = 2.0 * a * (prob - tt) * prob * (1.0 - prob) / n
        else:
            dO = 2.0 * a * (outs[head] - y) / n
        Hd = cache[f"{head}_Hd"]
        grads[f"{head}_W2"] = (dO[None, :] @ Hd)
        grads[f"{head}_b2"] = np.array([dO.sum()])
        dHd = dO[:, None] * params[f"{head}_W2"]
        dH = dHd * masks[head] if head in masks else dHd
        dP = dH * (cache[f"{head}_P"] > 0)
        grads[f"{head}_W1"] = dP.T @ cache["Qd"]
        grads[f"{head}_b1"] = dP.sum(axis=0)
        dQd += dP @ params[f"{head}_W1"]
    dQ = dQd * masks["q"] if "q" in masks else dQd
    dZ = dQ * (cache["Z"] > 0)
    grads["lam_W"] = dZ.T @ R
    grads["lam_b"] = dZ.sum(axis=0)
    return grads


class _Adam:
    """Adaptive moment estimation over a parameter dict."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0

    def update(self, params, grads):
        self.step += 1
        b1c = 1.0 - self.beta1 ** self.step
        b2c = 1.0 - self.beta2 ** self.step
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def train(batch_or_slice, config: NetworkConfig) -> TarNetModel:
    """Fit the network on a slice of observations.

    Deterministic given the seed: the validation split, weight init,
    batch order, and dropout masks all derive from ``config.seed``.  The
    returned weights are the snapshot with the best validation loss.
    """
    obs = list(batch_or_slice)
    y, t, R, tt = _batch_arrays(obs)
    n = len(obs)
    if t.sum() == 0 or t.sum() == n:
        raise DegenerateDataError("training slice has a single treatment arm")
    if config.iv_mode and tt is None:
        raise ValidationError("iv_mode training requires t_tilde on every observation")
    if n < config.batch_size:
        raise ValidationError(f"slice size {n} < batch_size {config.batch_size}")

    split_rng = rng_for(config.seed, "val-split")
    perm = split_rng.permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    if t[tr_idx].sum() in (0, len(tr_idx)):
        raise DegenerateDataError("training split has a single treatment arm")

    # optimize on standardized inputs and outcomes; the affine transforms
    # are folded back into the weights below, so the returned model maps
    # raw representations to raw-scale outputs
    r_mean = R[tr_idx].mean(axis=0)
    r_std = np.where(R[tr_idx].std(axis=0) < 1e-8, 1.0, R[tr_idx].std(axis=0))
    y_mean = float(y[tr_idx].mean())
    y_std = float(y[tr_idx].std())
    if y_std < 1e-8:
        y_std = 1.0
    Rs = (R - r_mean) / r_std
    ys = (y - y_mean) / y_std

    params = init_params(config, rng_for(config.seed, "init"))
    opt = _Adam(params, config.learning_rate)
    batch_rng = rng_for(config.seed, "batches")
    drop_rng = rng_for(config.seed, "dropout")

    def eval_loss(idx):
        # reported on the raw outcome scale
        outs, _ = _forward_all(params, config, Rs[idx])
        mu = np.where(t[idx] == 1, outs["mu1"], outs["mu0"]) * y_std + y_mean
        loss = float(np.mean((y[idx] - mu) ** 2))
        if config.iv_mode:
            m = np.where(t[idx] == 1, outs["m1"], outs["m0"])
            loss += float(np.mean((tt[idx] - m) ** 2))
        return loss

    train_log = []
    warnings = []
    best_val = math.inf
    best_params = {k: v.copy() for k, v in params.items()}
    stale = 0
    for epoch in range(config.max_epochs):
        order = batch_rng.permutation(tr_idx)
        for start in range(0, len(order), config.batch_size):
            bidx = order[start:start + config.batch_size]
            masks = make_dropout_masks(config, len(bidx), drop_rng)
            grads = _gradients_arrays(
                params, config, ys[bidx], t[bidx], Rs[bidx],
                None if tt is None else tt[bidx], masks,
            )
            opt.update(params, grads)
        tr_loss = eval_loss(tr_idx)
        val_loss = eval_loss(val_idx)
        train_log.append({"epoch": epoch, "train_loss": tr_loss, "val_loss": val_loss})
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
            # halve the step size on a sustained plateau (floor at 1/1024)
            if stale % max(1, config.patience // 3) == 0:
                opt.lr = max(opt.lr * 0.5, config.learning_rate / 1024.0)
        if epoch == 9:
            first = [e["train_loss"] for e in train_log]
            if first[-1] >= first[0]:
                warnings.append(
                    "loss has not decreased over the first 10 epochs; "
                    "optimization has likely failed, try other hyperparameters"
                )
    best_params["lam_W"] = best_params["lam_W"] / r_std[None, :]
    best_params["lam_b"] = best_params["lam_b"] - best_params["lam_W"] @ r_mean
    for head in _OUTCOME_HEADS:
        best_params[f"{head}_W2"] = best_params[f"{head}_W2"] * y_std
        best_params[f"{head}_b2"] = best_params[f"{head}_b2"] * y_std + y_mean
    return TarNetModel(params=best_params, config=config,
                       train_log=train_log, warnings=warnings)


def train_ensemble(batch_or_slice, config: NetworkConfig) -> list:
    """config.n_nets independently seeded training runs on the same rows.

    Head predictions averaged across members damp the run-to-run
    optimization noise of any single net; member 0 keeps the config's own
    seed so n_nets=1 reduces exactly to train().
    """
    models = []
    for member in range(config.n_nets):
        seed = config.seed if member == 0 else subseed(config.seed, "member", member)
        cfg = replace(config, seed=seed)
        models.append(train(batch_or_slice, cfg))
    return models


# checkpoint format: npz with weights plus a JSON-encoded config entry
def save_model(model: TarNetModel, path) -> None:
    payload = dict(model.params)
    cfg = {k: getattr(model.config, k) for k in (
        "d_R", "d_Q", "head_hidden", "dropout_rate", "learning_rate",
        "batch_size", "max_epochs", "patience", "val_fraction", "seed", "iv_mode",
    )}
    payload["__config__"] = np.frombuffer(
        json.dumps({"version": 1, "config": cfg}).encode(), dtype=np.uint8
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def load_model(path) -> TarNetModel:
    with np.load(path) as npz:
        meta = json.loads(bytes(npz["__config__"]).decode())
        if meta.get("version") != 1:
            raise ValidationError("unsupported checkpoint version")
        config = NetworkConfig(**meta["config"])
        params = {k: npz[k] for k in npz.files if k != "__config__"}
    return TarNetModel(params=params, config=config)
