"""Log-domain helpers, grid containers and the on-disk tensor format."""
import json
import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CorruptTensorFile

MAGIC = b"LTTENSR1"
_HEADER_LEN = struct.Struct("<Q")


def log_sum_exp(values):
    """Stable ``log(sum(exp(values)))``; ``-inf`` entries contribute nothing."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("empty reduction")
    if len(values) == 1:
        return values[0]
    m = max(values)
    if m == -math.inf:
        return -math.inf
    if m == math.inf:
        return math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


def log_softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def log_softmax_rows(logits):
    """Row-normalize a T x V matrix of logits into a :class:`LogProbGrid`."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"expected a T x V matrix, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    return LogProbGrid(log_softmax(logits, axis=1))


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LogProbGrid:
    """T x V per-frame log-probabilities (blank included)."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 2:
            raise ValueError(f"LogProbGrid needs shape (T>=1, V>=2), got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def V(self):
        return self.data.shape[1]

    def is_normalized(self, tol=1e-6):
        with np.errstate(divide="ignore"):
            row = np.log(np.sum(np.exp(self.data), axis=1))
        return bool(np.all(np.abs(row) <= tol))


@dataclass(frozen=True)
class BatchGrid:
    """N x T_max x V padded batch with per-item valid frame counts."""

    data: np.ndarray
    lengths: Optional[np.ndarray] = None

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3:
            raise ValueError(f"BatchGrid needs a 3-d array, got shape {data.shape}")
        N, T, _ = data.shape
        lengths = np.full(N, T) if self.lengths is None else self.lengths
        lengths = _frozen(lengths, dtype=np.int64)
        if lengths.shape != (N,):
            raise ValueError("one length per batch item required")
        if np.any(lengths < 1) or np.any(lengths > T):
            raise ValueError(f"lengths must lie in [1, {T}]")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def from_items(cls, items, fill=-np.inf):
        """Pad a list of T_i x V arrays (or LogProbGrids) into one batch."""
        arrays = [np.asarray(getattr(x, "data", x), dtype=np.float64) for x in items]
        T = max(a.shape[0] for a in arrays)
        V = arrays[0].shape[1]
        data = np.full((len(arrays), T, V), fill)
        for i, a in enumerate(arrays):
            data[i, : a.shape[0]] = a
        return cls(data, np.array([a.shape[0] for a in arrays]))

    def item(self, n):
        return self.data[n, : self.lengths[n]]

    @property
    def N(self):
        return self.data.shape[0]


def save_array(path, array, lengths=None):
    """Write any float array in the LTTENSR1 format."""
    array = np.ascontiguousarray(array, dtype="<f8")
    header = {"shape": list(array.shape), "dtype": "f64"}
    if lengths is not None:
        header["lengths"] = [int(x) for x in lengths]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER_LEN.pack(len(blob)))
        fh.write(blob)
        fh.write(array.tobytes(order="C"))


def load_array(path):
    """Read an LTTENSR1 file; returns ``(array, lengths or None)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + _HEADER_LEN.size or raw[: len(MAGIC)] != MAGIC:
        raise CorruptTensorFile("bad magic")
    pos = len(MAGIC)
    (hlen,) = _HEADER_LEN.unpack_from(raw, pos)
    pos += _HEADER_LEN.size
    if pos + hlen > len(raw):
        raise CorruptTensorFile("truncated header")
    try:
        header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
        shape = tuple(int(d) for d in header["shape"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptTensorFile("unreadable header") from exc
    if header.get("dtype", "f64") != "f64" or any(d < 0 for d in shape):
        raise CorruptTensorFile("unsupported header")
    pos += hlen
    payload = raw[pos:]
    expected = 8 * int(np.prod(shape, dtype=np.int64))
    if len(payload) != expected:
        raise CorruptTensorFile(f"payload has {len(payload)} bytes, shape needs {expected}")
    array = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    lengths = header.get("lengths")
    if lengths is not None:
        lengths = np.asarray(lengths, dtype=np.int64)
    return array, lengths


def write_tensor(grid, path):
    save_array(path, grid.data, grid.lengths)


def read_tensor(path):
    array, lengths = load_array(path)
    if array.ndim != 3:
        raise CorruptTensorFile(f"expected a 3-d batch, got shape {array.shape}")
    if lengths is not None and lengths.shape != (array.shape[0],):
        raise CorruptTensorFile("lengths do not match batch size")
    return BatchGrid(array, lengths)
