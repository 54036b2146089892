"""Observational data tuple and its on-disk formats.

A dataset pairs a binary representation matrix file with a delimited labels
table.  Binary layout (all little-endian): magic ``GPIR1\\0``, u32 version,
u64 n, u64 d_R, u8 dtype code (0 = f32, 1 = f64), then the row-major payload.
Labels are UTF-8 CSV with header ``id,y,t[,t_tilde]``; row i of the labels
file pairs with row i of the matrix.
"""

from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDataError,
    FormatError,
    JoinError,
    ValidationError,
)

MAGIC = b"GPIR1\0"
FORMAT_VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_HEADER = struct.Struct("<6sIQQB")


@dataclass(frozen=True)
class Observation:
    """One respondent: outcome, binary treatment, representation vector."""

    id: str
    y: float
    t: int
    r: np.ndarray
    t_tilde: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Validated, immutable collection of observations.

    Column arrays are the canonical storage; ``observations`` is a
    row-wise view built on demand.
    """

    ids: tuple
    y: np.ndarray
    t: np.ndarray
    R: np.ndarray
    t_tilde: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.int64))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64))
        if self.t_tilde is not None:
            object.__setattr__(
                self, "t_tilde", np.asarray(self.t_tilde, dtype=np.int64)
            )
        _validate(self)
        self.y.setflags(write=False)
        self.t.setflags(write=False)
        self.R.setflags(write=False)
        if self.t_tilde is not None:
            self.t_tilde.setflags(write=False)

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def d_R(self) -> int:
        return self.R.shape[1]

    @property
    def has_perceived(self) -> bool:
        return self.t_tilde is not None

    @property
    def observations(self) -> list[Observation]:
        tt = self.t_tilde
        return [
            Observation(
                id=self.ids[i],
                y=float(self.y[i]),
                t=int(self.t[i]),
                r=self.R[i],
                t_tilde=None if tt is None else int(tt[i]),
            )
            for i in range(self.n)
        ]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            y=self.y[idx],
            t=self.t[idx],
            R=self.R[idx],
            t_tilde=None if self.t_tilde is None else self.t_tilde[idx],
        )


def _validate(ds: Dataset) -> None:
    n = ds.R.shape[0]
    if ds.R.ndim != 2 or n == 0 or ds.R.shape[1] == 0:
        raise ValidationError("representation matrix must be a nonempty 2-d array")
    if len(ds.ids) != n or ds.y.shape != (n,) or ds.t.shape != (n,):
        raise ValidationError("column lengths disagree")
    if len(set(ds.ids)) != n:
        raise JoinError("duplicate observation ids")
    if not np.all(np.isfinite(ds.y)):
        bad = ds.ids[int(np.flatnonzero(~np.isfinite(ds.y))[0])]
        raise ValidationError(f"non-finite outcome for id {bad!r}")
    if not np.all(np.isfinite(ds.R)):
        raise ValidationError("non-finite value in representation matrix")
    bad_t = ~np.isin(ds.t, (0, 1))
    if bad_t.any():
        bad = ds.ids[int(np.flatnonzero(bad_t)[0])]
        raise ValidationError(f"treatment must be 0 or 1; offending id {bad!r}")
    if ds.t_tilde is not None:
        bad_tt = ~np.isin(ds.t_tilde, (0, 1))
        if bad_tt.any():
            bad = ds.ids[int(np.flatnonzero(bad_tt)[0])]
            raise ValidationError(
                f"perceived treatment must be 0 or 1; offending id {bad!r}"
            )
    n1 = int(ds.t.sum())
    if n1 == 0 or n1 == n:
        raise DegenerateDataError(
            "dataset has a single treatment arm (all t=%d)" % (1 if n1 else 0)
        )


def write_representations(matrix, path, dtype: str = "f32") -> None:
    """Write a finite n x d_R matrix in the binary representation format."""
    M = np.asarray(matrix)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValidationError("matrix must be 2-d with n, d_R >= 1")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix contains non-finite values")
    if dtype not in ("f32", "f64"):
        raise ValidationError(f"unknown dtype {dtype!r}")
    code = 0 if dtype == "f32" else 1
    payload = np.ascontiguousarray(M, dtype=_DTYPE_CODES[code]).tobytes()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, M.shape[0], M.shape[1], code)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def read_representations(path) -> np.ndarray:
    """Read the binary representation format; returns float64 in memory
    (f32 payloads are upcast, so an f32 round-trip is bit-exact)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("representation file too short for header")
    magic, version, n, d_r, code = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    dt = _DTYPE_CODES[code]
    expected = n * d_r * dt.itemsize
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(
            f"payload length {len(payload)} != n*d_R*itemsize = {expected}"
        )
    M = np.frombuffer(payload, dtype=dt).reshape(n, d_r)
    return M.astype(np.float64)


def read_labels(path):
    """Read the labels CSV.  Returns (ids, y, t, t_tilde-or-None)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_labels(fh)


def _parse_labels(fh: io.TextIOBase):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty labels file") from None
    header = [h.strip() for h in header]
    if header[:3] != ["id", "y", "t"] or header not in (
        ["id", "y", "t"],
        ["id", "y", "t", "t_tilde"],
    ):
        raise FormatError(f"labels header must be id,y,t[,t_tilde]; got {header}")
    has_tt = len(header) == 4
    ids, ys, ts, tts = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"labels line {lineno}: expected {len(header)} fields")
        ids.append(row[0])
        try:
            ys.append(float(row[1]))
        except ValueError:
            raise ValidationError(
                f"non-numeric outcome for id {row[0]!r}"
            ) from None
        ts.append(_parse_binary(row[2], row[0], "t"))
        if has_tt:
            tts.append(_parse_binary(row[3], row[0], "t_tilde"))
    return ids, ys, ts, (tts if has_tt else None)


def _parse_binary(text, obs_id, column) -> int:
    text = text.strip()
    if text not in ("0", "1"):
        raise ValidationError(
            f"{column} must be 0 or 1; offending id {obs_id!r} (got {text!r})"
        )
    return int(text)


def write_labels(path, ids, y, t, t_tilde=None) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["id", "y", "t"] + (["t_tilde"] if t_tilde is not None else [])
        writer.writerow(header)
        for i in range(len(ids)):
            row = [ids[i], repr(float(y[i])), int(t[i])]
            if t_tilde is not None:
                row.append(int(t_tilde[i]))
            writer.writerow(row)
    os.replace(tmp, path)


def load_dataset(representations_path, labels_path) -> Dataset:
    """Load and join the representation matrix and labels table.

    Rows pair positionally; the dataset keeps the representation file's
    row order.
    """
    R = read_representations(representations_path)
    ids, y, t, t_tilde = read_labels(labels_path)
    if len(ids) != R.shape[0]:
        raise JoinError(
            f"labels rows ({len(ids)}) != representation rows ({R.shape[0]})"
        )
    return Dataset(ids=tuple(ids), y=y, t=t, R=R, t_tilde=t_tilde)
