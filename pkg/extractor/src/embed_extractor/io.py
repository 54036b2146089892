"""Input readers: one document per file, or JSON lines with a text field."""

from __future__ import annotations

import json
import os

from .errors import JobError


def load_texts(path: str) -> list:
    """A .jsonl file (objects with a "text" key) or a directory of UTF-8
    text files read in sorted name order."""
    if os.path.isdir(path):
        texts = []
        for name in sorted(os.listdir(path)):
            full = os.path.join(path, name)
            if os.path.isfile(full):
                with open(full, encoding="utf-8") as fh:
                    texts.append(fh.read())
        if not texts:
            raise JobError(f"no text files in {path}")
        return texts
    texts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                texts.append(str(obj["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise JobError(f"{path}:{lineno}: expected a JSON object "
                               f"with a 'text' field") from exc
    if not texts:
        raise JobError(f"no texts in {path}")
    return texts
