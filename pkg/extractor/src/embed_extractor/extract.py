"""Run a model over each input text and export pooled hidden states.

Outputs are the binary representation file consumed by the estimation
package, a labels skeleton (ids with empty outcome/treatment columns for
human or keyword coding), and a JSON provenance manifest with a content
hash per text.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from deconfound.data import write_representations

from .errors import ModelError
from .job import ExtractionJob
from .models import load_model


@dataclass
class ExtractionResult:
    n_written: int
    omitted: list = field(default_factory=list)   # (id, reason) pairs
    representations_path: str = ""
    labels_path: str = ""
    manifest_path: str = ""


def _pool(states: np.ndarray, pooling: str) -> np.ndarray:
    if pooling == "last_token":
        return states[-1]
    if pooling == "cls_token":
        return states[0]
    return states.mean(axis=0)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def extract(job: ExtractionJob, model=None) -> ExtractionResult:
    """One text at a time, in input order; empty generations are recorded
    and omitted rather than written as zero rows."""
    if model is None:
        model = load_model(job.model_id)
    ids = job.row_ids()
    rows, kept_ids, manifest_rows, omitted = [], [], [], []
    row_index = 0
    for obs_id, text in zip(ids, job.inputs):
        entry = {"id": obs_id, "sha256": _sha256(text)}
        try:
            generated, states = model.run(job.prompt_for(text))
        except Exception as exc:
            raise ModelError(f"model failed on {obs_id}: {exc}") from exc
        if states.shape[0] == 0:
            entry["omitted"] = "empty generation"
            omitted.append((obs_id, "empty generation"))
        else:
            rows.append(_pool(np.asarray(states, dtype=np.float64), job.pooling))
            kept_ids.append(obs_id)
            entry["row"] = row_index
            entry["generated_sha256"] = _sha256(generated)
            row_index += 1
        manifest_rows.append(entry)
    if not rows:
        raise ModelError("every input produced an empty generation")

    write_representations(np.stack(rows), job.out_representations)
    with open(job.out_labels, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "y", "t"])
        for obs_id in kept_ids:
            w.writerow([obs_id, "", ""])
    manifest = {
        "model_id": job.model_id,
        "mode": job.mode,
        "pooling": job.pooling,
        "system_prompt": job.system_prompt,
        "user_prompt_template": job.user_prompt_template,
        "n_inputs": len(job.inputs),
        "n_written": len(kept_ids),
        "rows": manifest_rows,
    }
    with open(job.out_manifest, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExtractionResult(
        n_written=len(kept_ids), omitted=omitted,
        representations_path=str(job.out_representations),
        labels_path=str(job.out_labels),
        manifest_path=str(job.out_manifest),
    )
