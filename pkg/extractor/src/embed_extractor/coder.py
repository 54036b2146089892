"""Keyword-based treatment coding for extracted texts."""

from __future__ import annotations

import numpy as np

from .errors import JobError


def keyword_treatment_coder(texts, keywords) -> np.ndarray:
    """Binary vector: 1 where the whitespace-normalized, casefolded text
    contains any keyword as a substring."""
    keywords = [str(k) for k in keywords]
    if not keywords:
        raise JobError("keyword list must be nonempty")
    needles = [" ".join(k.split()).casefold() for k in keywords]
    out = np.zeros(len(texts), dtype=np.int64)
    for i, text in enumerate(texts):
        hay = " ".join(str(text).split()).casefold()
        out[i] = int(any(n in hay for n in needles))
    return out
