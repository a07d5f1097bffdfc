"""Node sources and on-disk formats.

Every source is re-openable: each call to :meth:`NodeStream.batches` starts
from the first node and replays the same sequence, which is what two-pass
verification relies on. Global indices start at 1.

Binary layout (little-endian)::

    b"QPN1" | u32 dim | u64 count | count * (dim + 1) float64  (coords, weight)
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import (
    AcceptanceTooLow,
    BadMagic,
    DimensionMismatch,
    NonPositiveWeight,
    ParseError,
    TruncatedFile,
    ValidationError,
)
from .measure import DiscreteMeasure

__all__ = [
    "NodeBatch",
    "NodeStream",
    "ArrayStream",
    "CsvStream",
    "BinaryStream",
    "SamplerStream",
    "DomainSpec",
    "stream_from_csv",
    "stream_from_binary",
    "rejection_sampler",
    "write_csv",
    "write_binary",
    "read_rule_csv",
    "open_source",
    "BUILTIN_SHAPES",
]

MAGIC = b"QPN1"
_HEADER = struct.Struct("<4sIQ")
_SAMPLER_CHUNK = 1 << 16
_MAX_REJECTIONS = 10_000_000


class NodeBatch(NamedTuple):
    coords: np.ndarray  # (b, d)
    weights: np.ndarray  # (b,)
    index: np.ndarray  # (b,) int64, global 1-based


class NodeStream:
    """Pull-based ordered source of ``(coords, weight, global_index)`` triples."""

    dim: int
    length: int | None = None

    def batches(self, size: int = 8192) -> Iterator[NodeBatch]:
        raise NotImplementedError

    def __iter__(self):
        for b in self.batches():
            for x, w, g in zip(b.coords, b.weights, b.index):
                yield x, float(w), int(g)

    def to_measure(self) -> DiscreteMeasure:
        xs, ws = [], []
        for b in self.batches():
            xs.append(b.coords)
            ws.append(b.weights)
        if not xs:
            return DiscreteMeasure(np.zeros((0, self.dim)), np.zeros(0), dim=self.dim)
        return DiscreteMeasure(np.vstack(xs), np.concatenate(ws), dim=self.dim)


def _rebatch(chunks: Iterator[tuple[np.ndarray, np.ndarray]], size: int, dim: int) -> Iterator[NodeBatch]:
    # regroup arbitrary chunks into batches of exactly ``size`` (last one shorter)
    if size < 1:
        raise ValidationError("batch size must be positive")
    buf_x, buf_w, held = [], [], 0
    start = 1
    for x, w in chunks:
        buf_x.append(x)
        buf_w.append(w)
        held += len(w)
        if held < size:
            continue
        X = np.concatenate(buf_x) if len(buf_x) > 1 else buf_x[0]
        W = np.concatenate(buf_w) if len(buf_w) > 1 else buf_w[0]
        lo = 0
        while held - lo >= size:
            yield NodeBatch(X[lo : lo + size], W[lo : lo + size], np.arange(start, start + size, dtype=np.int64))
            start += size
            lo += size
        buf_x, buf_w = [X[lo:]], [W[lo:]]
        held -= lo
    if held:
        X = np.concatenate(buf_x)
        W = np.concatenate(buf_w)
        yield NodeBatch(X, W, np.arange(start, start + held, dtype=np.int64))


class ArrayStream(NodeStream):
    """In-memory source over a node array (or a :class:`DiscreteMeasure`)."""

    def __init__(self, nodes, weights=None):
        if isinstance(nodes, DiscreteMeasure):
            nodes, weights = nodes.nodes, nodes.weights
        x = np.asarray(nodes, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if x.shape[0] != w.shape[0]:
            raise ValidationError("nodes and weights differ in length")
        self.nodes, self.weights = x, w
        self.dim = x.shape[1]
        self.length = w.shape[0]

    def batches(self, size: int = 8192) -> Iterator[NodeBatch]:
        if size < 1:
            raise ValidationError("batch size must be positive")
        for lo in range(0, self.length, size):
            hi = min(lo + size, self.length)
            yield NodeBatch(self.nodes[lo:hi], self.weights[lo:hi], np.arange(lo + 1, hi + 1, dtype=np.int64))


# --- CSV ------------------------------------------------------------------


def _csv_header(dim: int, with_index: bool = False) -> list[str]:
    cols = [f"x{i + 1}" for i in range(dim)] + ["w"]
    return cols + ["index"] if with_index else cols


class CsvStream(NodeStream):
    """CSV source with header ``x1,...,xd,w`` (an optional trailing ``index`` column is ignored)."""

    def __init__(self, path, dim: int | None = None, chunk: int = 8192):
        self.path = os.fspath(path)
        self.chunk = chunk
        with open(self.path, newline="") as fh:
            header = next(csv.reader(fh), None)
        if header is None:
            raise ParseError("missing header", 1)
        header = [h.strip() for h in header]
        has_index = header[-1:] == ["index"]
        cols = header[:-1] if has_index else header
        d = len(cols) - 1
        if d < 1 or cols != _csv_header(d):
            raise ParseError(f"header must be x1,...,xd,w; got {','.join(header)}", 1)
        if dim is not None and dim != d:
            raise DimensionMismatch(f"file has dimension {d}, expected {dim}")
        self.dim = d
        self.ncols = len(header)

    def _chunks(self):
        d = self.dim
        with open(self.path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            xs, ws = [], []
            for row in reader:
                line = reader.line_num
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != self.ncols:
                    raise ParseError(f"expected {self.ncols} fields, got {len(row)}", line)
                try:
                    vals = [float(v) for v in row[: d + 1]]
                except ValueError:
                    raise ParseError(f"non-numeric field in {row!r}", line) from None
                if not all(math.isfinite(v) for v in vals):
                    raise ParseError("non-finite value", line)
                if vals[d] <= 0:
                    raise NonPositiveWeight(f"weight {row[d]} is not positive", line)
                xs.append(vals[:d])
                ws.append(vals[d])
                if len(ws) == self.chunk:
                    yield np.array(xs, dtype=np.float64), np.array(ws, dtype=np.float64)
                    xs, ws = [], []
            if ws:
                yield np.array(xs, dtype=np.float64).reshape(-1, d), np.array(ws, dtype=np.float64)

    def batches(self, size: int = 8192) -> Iterator[NodeBatch]:
        return _rebatch(self._chunks(), size, self.dim)


def stream_from_csv(path, dim: int | None = None) -> CsvStream:
    return CsvStream(path, dim)


def write_csv(path, coords, weights, index=None) -> None:
    """Write nodes as CSV using the shortest round-trip decimal form of each double."""
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    w = np.asarray(weights, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(_csv_header(x.shape[1], index is not None)) + "\n")
        for i in range(w.shape[0]):
            fields = [repr(float(v)) for v in x[i]] + [repr(float(w[i]))]
            if index is not None:
                fields.append(str(int(index[i])))
            fh.write(",".join(fields) + "\n")


def read_rule_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Load a whole CSV rule: ``(coords, weights, index or None)``."""
    s = CsvStream(path)
    xs, ws = [], []
    for b in s.batches():
        xs.append(b.coords)
        ws.append(b.weights)
    x = np.vstack(xs) if xs else np.zeros((0, s.dim))
    w = np.concatenate(ws) if ws else np.zeros(0)
    idx = None
    if s.ncols == s.dim + 2:
        with open(s.path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        idx = np.array([int(r[-1]) for r in rows if r], dtype=np.int64)
    return x, w, idx


# --- binary ---------------------------------------------------------------


class BinaryStream(NodeStream):
    def __init__(self, path, dim: int | None = None, chunk: int = 8192):
        self.path = os.fspath(path)
        self.chunk = chunk
        size = os.path.getsize(self.path)
        with open(self.path, "rb") as fh:
            head = fh.read(_HEADER.size)
        if len(head) >= 4 and head[:4] != MAGIC:
            raise BadMagic(f"expected magic {MAGIC!r}, found {head[:4]!r}")
        if len(head) < _HEADER.size:
            if head[:4] != MAGIC[: len(head)]:
                raise BadMagic(f"expected magic {MAGIC!r}")
            raise TruncatedFile("incomplete header", len(head))
        _, d, count = _HEADER.unpack(head)
        if d < 1:
            raise ValidationError("binary file declares dimension 0")
        if dim is not None and d != dim:
            raise DimensionMismatch(f"file has dimension {d}, expected {dim}")
        self.dim, self.length = int(d), int(count)
        rec = 8 * (d + 1)
        body = size - _HEADER.size
        if body < count * rec:
            raise TruncatedFile(
                f"{count} records declared but only {body // rec} complete",
                _HEADER.size + (body // rec) * rec,
            )
        if body > count * rec:
            raise ValidationError(f"{body - count * rec} trailing bytes after {count} records")

    def _chunks(self):
        d = self.dim
        rec = d + 1
        dt = np.dtype("<f8")
        done = 0
        with open(self.path, "rb") as fh:
            fh.seek(_HEADER.size)
            while done < self.length:
                n = min(self.chunk, self.length - done)
                raw = fh.read(n * rec * 8)
                if len(raw) < n * rec * 8:
                    raise TruncatedFile("file shrank while reading", _HEADER.size + done * rec * 8 + len(raw))
                a = np.frombuffer(raw, dtype=dt).reshape(n, rec).astype(np.float64)
                if not np.all(np.isfinite(a)):
                    bad = int(np.argmax(~np.all(np.isfinite(a), axis=1)))
                    raise ParseError("non-finite value in record", done + bad + 1)
                if np.any(a[:, d] <= 0):
                    bad = int(np.argmax(a[:, d] <= 0))
                    raise NonPositiveWeight("non-positive weight in record", done + bad + 1)
                yield a[:, :d], a[:, d].copy()
                done += n

    def batches(self, size: int = 8192) -> Iterator[NodeBatch]:
        return _rebatch(self._chunks(), size, self.dim)


def stream_from_binary(path, dim: int | None = None) -> BinaryStream:
    return BinaryStream(path, dim)


def write_binary(path, coords, weights) -> None:
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, x.shape[1], x.shape[0]))
        fh.write(np.hstack([x, w]).astype("<f8").tobytes())


# --- generated sources ----------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Bounding box plus a vectorized membership test ``(n, d) -> bool[n]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    indicator: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    @property
    def dim(self) -> int:
        return len(self.lo)

    @classmethod
    def box(cls, lo, hi) -> "DomainSpec":
        return cls(tuple(lo), tuple(hi), lambda x: np.ones(x.shape[0], dtype=bool), "box")

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0) -> "DomainSpec":
        c = np.asarray(center, dtype=float)
        lo = tuple(c - radius)
        hi = tuple(c + radius)
        return cls(lo, hi, lambda x: np.sum((x - c) ** 2, axis=1) <= radius**2, "disk")

    @classmethod
    def annulus(cls, center=(0.0, 0.0), inner=0.5, outer=1.0) -> "DomainSpec":
        c = np.asarray(center, dtype=float)

        def ind(x):
            r2 = np.sum((x - c) ** 2, axis=1)
            return (r2 >= inner**2) & (r2 <= outer**2)

        return cls(tuple(c - outer), tuple(c + outer), ind, "annulus")

    @classmethod
    def union_of_disks(cls, centers, radii, lo=None, hi=None) -> "DomainSpec":
        C = np.asarray(centers, dtype=float)
        r = np.asarray(radii, dtype=float)
        lo = tuple(np.min(C - r[:, None], axis=0)) if lo is None else tuple(lo)
        hi = tuple(np.max(C + r[:, None], axis=0)) if hi is None else tuple(hi)

        def ind(x):
            d2 = np.sum((x[:, None, :] - C[None]) ** 2, axis=2)
            return np.any(d2 <= r**2, axis=1)

        return cls(lo, hi, ind, "union")

    @classmethod
    def torus(cls, major=0.7, minor=0.3) -> "DomainSpec":
        """Solid torus around the z axis in three dimensions."""
        b = major + minor

        def ind(x):
            rho = np.hypot(x[:, 0], x[:, 1])
            return (rho - major) ** 2 + x[:, 2] ** 2 <= minor**2

        return cls((-b, -b, -minor), (b, b, minor), ind, "torus")


BUILTIN_SHAPES: dict[str, Callable[[], DomainSpec]] = {
    "square": lambda: DomainSpec.box((-1.0, -1.0), (1.0, 1.0)),
    "cube": lambda: DomainSpec.box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)),
    "disk": lambda: DomainSpec.disk(),
    "annulus": lambda: DomainSpec.annulus(),
    "twodisks": lambda: DomainSpec.union_of_disks([(-0.5, 0.0), (0.5, 0.0)], [0.5, 0.5], (-1, -1), (1, 1)),
    "torus": lambda: DomainSpec.torus(),
}


class SamplerStream(NodeStream):
    """``count`` iid points from the uniform law on a domain, each with weight 1/count.

    Proposals are drawn in fixed chunks, so the sequence depends on the seed
    only, never on the requested batch size.
    """

    def __init__(self, domain: DomainSpec, count: int, seed: int):
        if count < 0:
            raise ValidationError("count must be nonnegative")
        lo = np.asarray(domain.lo, dtype=float)
        hi = np.asarray(domain.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValidationError("bounding box needs lo < hi on every axis")
        self.domain, self.length, self.seed = domain, int(count), int(seed)
        self.dim = domain.dim
        self._lo, self._hi = lo, hi
        self.proposals = 0

    def _chunks(self):
        rng = np.random.default_rng(self.seed)
        w = 1.0 / self.length if self.length else 0.0
        left = self.length
        since_accept = 0
        self.proposals = 0
        while left > 0:
            x = rng.uniform(self._lo, self._hi, size=(_SAMPLER_CHUNK, self.dim))
            keep = np.asarray(self.domain.indicator(x), dtype=bool)
            self.proposals += _SAMPLER_CHUNK
            hits = np.flatnonzero(keep)
            if hits.size == 0:
                since_accept += _SAMPLER_CHUNK
                if since_accept >= _MAX_REJECTIONS:
                    raise AcceptanceTooLow(f"no acceptance in {since_accept} consecutive proposals")
                continue
            gaps = np.diff(hits, prepend=-1) - 1
            gaps[0] += since_accept
            if gaps.max() >= _MAX_REJECTIONS:
                raise AcceptanceTooLow("no acceptance in 1e7 consecutive proposals")
            take = hits[:left]
            since_accept = _SAMPLER_CHUNK - 1 - hits[-1]
            left -= take.size
            if left == 0:
                # count only the proposals consumed up to the last accepted point
                self.proposals -= _SAMPLER_CHUNK - 1 - int(take[-1])
            yield x[take], np.full(take.size, w)

    def batches(self, size: int = 8192) -> Iterator[NodeBatch]:
        return _rebatch(self._chunks(), size, self.dim)


def rejection_sampler(domain: DomainSpec, count: int, seed: int) -> SamplerStream:
    return SamplerStream(domain, count, seed)


def open_source(spec: str, seed: int = 0, dim: int | None = None) -> NodeStream:
    """Resolve ``gen:<shape>:<M>``, ``*.csv`` or a binary file path to a stream."""
    if spec.startswith("gen:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"generator spec must be gen:<shape>:<M>, got {spec!r}")
        shape = parts[1].lower()
        if shape not in BUILTIN_SHAPES:
            raise ValidationError(f"unknown shape {parts[1]!r}; choose from {sorted(BUILTIN_SHAPES)}")
        try:
            count = int(float(parts[2]))
        except ValueError:
            raise ValidationError(f"bad node count {parts[2]!r}") from None
        s = SamplerStream(BUILTIN_SHAPES[shape](), count, seed)
        if dim is not None and s.dim != dim:
            raise DimensionMismatch(f"shape {shape} has dimension {s.dim}, expected {dim}")
        return s
    if not os.path.exists(spec):
        raise ValidationError(f"input {spec!r} does not exist")
    with open(spec, "rb") as fh:
        head = fh.read(4)
    if spec.lower().endswith(".csv") or head != MAGIC and not spec.lower().endswith((".bin", ".qpn")):
        return CsvStream(spec, dim)
    return BinaryStream(spec, dim)
