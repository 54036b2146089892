"""Positivity and support-overlap diagnostics.

Two checks: the per-arm distribution of estimated propensity scores
(extreme values signal an overlap problem) and a [0, 1] score measuring
how far apart the empirical supports of the deconfounder are between the
two treatment arms (Hausdorff distance on min-max standardized points,
normalized by sqrt(d_Q)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, ShapeError, ValidationError
from .seeds import rng_for

EXTREME_BAND = (0.01, 0.99)
DEFAULT_BINS = 50
SUBSAMPLE_CAP = 5000


@dataclass
class DiagnosticsReport:
    bin_edges: np.ndarray
    treated_counts: np.ndarray
    control_counts: np.ndarray
    extreme_fraction: float
    ioss: float
    n_treated: int
    n_control: int
    notes: list = field(default_factory=list)


def propensity_summary(pscores, t, bins: int = DEFAULT_BINS):
    """Per-arm histograms over [0, 1] plus the pooled extreme fraction."""
    p = np.asarray(pscores, dtype=np.float64)
    t = np.asarray(t)
    if p.shape != t.shape:
        raise ShapeError("pscores and t must align")
    if np.any(p < 0) or np.any(p > 1):
        raise ValidationError("pscores must lie in [0, 1]")
    if t.sum() in (0, len(t)):
        raise DegenerateDataError("propensity summary needs both arms")
    edges = np.linspace(0.0, 1.0, bins + 1)
    treated, _ = np.histogram(p[t == 1], bins=edges)
    control, _ = np.histogram(p[t == 0], bins=edges)
    lo, hi = EXTREME_BAND
    extreme = float(np.mean((p < lo) | (p > hi)))
    return edges, treated, control, extreme


def min_max_standardize(q_matrix) -> np.ndarray:
    """Column-wise (q - min) / (max - min); constant columns map to 0.5."""
    Q = np.asarray(q_matrix, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] < 2:
        raise ValidationError("need an n x d matrix with n >= 2")
    lo = Q.min(axis=0)
    hi = Q.max(axis=0)
    span = hi - lo
    out = np.empty_like(Q)
    const = span == 0.0
    out[:, const] = 0.5
    nz = ~const
    out[:, nz] = (Q[:, nz] - lo[nz]) / span[nz]
    return out


def _directed_hausdorff(A, B, block: int = 256) -> float:
    """max over rows of A of the distance to the nearest row of B.

    Plain sqrt-of-sum-of-squares per pair (blocked over A rows to bound
    memory) so results match a naive reimplementation bit for bit.
    """
    worst = 0.0
    for start in range(0, len(A), block):
        chunk = A[start:start + block]
        d2 = ((chunk[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        worst = max(worst, float(np.sqrt(d2.min(axis=1)).max()))
    return worst


def ioss(q_matrix, t, subsample_cap: int = SUBSAMPLE_CAP, seed: int = 0) -> float:
    """Support-independence score between deconfounder and treatment.

    0 means the standardized per-arm point sets coincide; 1 is maximal
    separation across the standardized range.
    """
    Q = np.asarray(q_matrix, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[:, None]
    t = np.asarray(t)
    if len(t) != Q.shape[0]:
        raise ShapeError("q_matrix rows must align with t")
    if t.sum() in (0, len(t)):
        raise DegenerateDataError("support score needs both arms")
    S = min_max_standardize(Q)
    A = S[t == 1]
    B = S[t == 0]
    if subsample_cap and max(len(A), len(B)) > subsample_cap:
        rng = rng_for(seed, "ioss-subsample")
        if len(A) > subsample_cap:
            A = A[np.sort(rng.choice(len(A), subsample_cap, replace=False))]
        if len(B) > subsample_cap:
            B = B[np.sort(rng.choice(len(B), subsample_cap, replace=False))]
    h = max(_directed_hausdorff(A, B), _directed_hausdorff(B, A))
    return h / np.sqrt(Q.shape[1])


def diagnostics_report(pscores, t, q_matrix, bins: int = DEFAULT_BINS,
                       seed: int = 0) -> DiagnosticsReport:
    edges, treated, control, extreme = propensity_summary(pscores, t, bins)
    score = ioss(q_matrix, t, seed=seed)
    t = np.asarray(t)
    notes = []
    if extreme > 0.05:
        notes.append(
            f"{extreme:.1%} of propensity scores fall outside "
            f"[{EXTREME_BAND[0]}, {EXTREME_BAND[1]}]; separability may be "
            "violated — consider trimming or clipping"
        )
    if score > 0.2:
        notes.append(
            f"support-independence score {score:.3f} is high; the "
            "deconfounder separates the treatment arms"
        )
    return DiagnosticsReport(
        bin_edges=edges, treated_counts=treated, control_counts=control,
        extreme_fraction=extreme, ioss=score,
        n_treated=int(t.sum()), n_control=int(len(t) - t.sum()),
        notes=notes,
    )
