"""Edge-list loading and compressed sparse row (CSR) graph construction.

The CSR layout doubles as the addressing scheme for the per-vertex
hashtables: vertex ``i`` owns hashtable slots ``[2*offsets[i], 2*offsets[i+1])``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GraphFormatError, ValidationError

__all__ = [
    "EdgeList",
    "CsrGraph",
    "load_graph",
    "build_csr",
    "write_edge_list",
    "FORMATS",
]

FORMATS = ("mtx", "matrix-market", "edge-list")

# vertex ids must fit a signed 32-bit label
MAX_VERTICES = 2**31 - 1


@dataclass
class EdgeList:
    """Raw weighted edges ``(src[k], dst[k], weight[k])``.

    ``n_declared`` is the vertex count announced by the file header, if any.
    """

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    n_declared: Optional[int] = None

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64).ravel()
        self.dst = np.asarray(self.dst, dtype=np.int64).ravel()
        self.weight = np.asarray(self.weight, dtype=np.float64).ravel()
        if not (len(self.src) == len(self.dst) == len(self.weight)):
            raise ValidationError("src, dst and weight must have equal length")

    @classmethod
    def from_tuples(cls, edges, n_declared=None) -> "EdgeList":
        rows = [(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges]
        if not rows:
            return cls(np.empty(0), np.empty(0), np.empty(0), n_declared)
        u, v, w = zip(*rows)
        return cls(np.array(u), np.array(v), np.array(w), n_declared)

    def __len__(self):
        return len(self.src)

    def tuples(self):
        return [(int(u), int(v), float(w)) for u, v, w in zip(self.src, self.dst, self.weight)]

    def validate(self):
        if len(self) == 0:
            return
        if self.src.min() < 0 or self.dst.min() < 0:
            raise ValidationError("negative vertex id")
        if self.n_declared is not None:
            top = max(int(self.src.max()), int(self.dst.max()))
            if top >= self.n_declared:
                raise ValidationError(
                    f"vertex id {top} out of range for {self.n_declared} declared vertices")
        bad = ~np.isfinite(self.weight) | (self.weight <= 0)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"edge ({self.src[k]}, {self.dst[k]}) has non-positive or non-finite weight {self.weight[k]}")

    def vertex_count(self) -> int:
        if self.n_declared is not None:
            return int(self.n_declared)
        if len(self) == 0:
            return 0
        return int(max(self.src.max(), self.dst.max())) + 1


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Immutable weighted graph in CSR form.

    ``offsets`` has length ``n + 1``; row ``i`` of ``targets``/``weights``
    holds the neighbours of ``i`` in ascending id order. Undirected graphs
    store each edge in both directions, self-loops once.
    """

    n: int
    offsets: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    total_weight_2m: float = field(init=False)

    def __post_init__(self):
        for name in ("offsets", "targets", "weights"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "total_weight_2m", float(self.weights.sum(dtype=np.float64)))

    @property
    def m2(self) -> int:
        return int(self.offsets[-1])

    def degree(self, i: int) -> int:
        return int(self.offsets[i + 1] - self.offsets[i])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def weighted_degrees(self) -> np.ndarray:
        """K_i: sum of stored edge weights in row ``i`` (float64)."""
        rows = np.repeat(np.arange(self.n), self.degrees())
        return np.bincount(rows, weights=self.weights, minlength=self.n)

    def neighbors(self, i: int):
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.targets[a:b], self.weights[a:b]

    def sources(self) -> np.ndarray:
        """Row index of every stored edge, aligned with ``targets``."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())

    def to_edge_list(self) -> EdgeList:
        return EdgeList(self.sources(), self.targets.astype(np.int64),
                        self.weights.copy(), n_declared=self.n)

    def is_symmetric(self) -> bool:
        src = self.sources()
        fwd = np.lexsort((self.weights, self.targets, src))
        rev = np.lexsort((self.weights, src, self.targets))
        return (np.array_equal(src[fwd], self.targets[rev])
                and np.array_equal(self.targets[fwd], src[rev])
                and np.array_equal(self.weights[fwd], self.weights[rev]))

    def __eq__(self, other):
        if not isinstance(other, CsrGraph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.targets, other.targets)
                and np.array_equal(self.weights, other.weights))


def _normalize_format(fmt: str) -> str:
    fmt = fmt.lower()
    if fmt in ("mtx", "matrix-market", "matrixmarket"):
        return "mtx"
    if fmt in ("edge-list", "edgelist", "el"):
        return "edge-list"
    raise ValidationError(f"unknown graph format {fmt!r}; expected one of {FORMATS}")


def _parse_weight(tok, path, lineno):
    try:
        w = float(tok)
    except ValueError:
        raise GraphFormatError(f"bad weight {tok!r}", path, lineno) from None
    if not math.isfinite(w) or w <= 0:
        raise ValidationError(f"{path}:{lineno}: non-positive or non-finite weight {tok}")
    return w


def _parse_id(tok, path, lineno):
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(f"bad vertex id {tok!r}", path, lineno) from None


def _read_edge_list(fh, path) -> EdgeList:
    src, dst, wts = [], [], []
    declared = None
    for lineno, line in enumerate(fh, 1):
        s = line.strip()
        if not s or s[0] in "#%":
            # "# vertices N" keeps trailing isolated vertices across a round trip
            hint = s[1:].split()
            if len(hint) == 2 and hint[0] == "vertices" and hint[1].isdigit():
                declared = int(hint[1])
            continue
        parts = s.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"expected 'u v [w]', got {len(parts)} fields", path, lineno)
        u = _parse_id(parts[0], path, lineno)
        v = _parse_id(parts[1], path, lineno)
        if u < 0 or v < 0:
            raise ValidationError(f"{path}:{lineno}: negative vertex id")
        w = _parse_weight(parts[2], path, lineno) if len(parts) == 3 else 1.0
        src.append(u)
        dst.append(v)
        wts.append(w)
    return EdgeList(np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                    np.array(wts, dtype=np.float64), declared)


def _read_matrix_market(fh, path) -> EdgeList:
    header = fh.readline()
    toks = header.split()
    if len(toks) < 5 or toks[0].lower() != "%%matrixmarket":
        raise GraphFormatError("missing %%MatrixMarket header", path, 1)
    obj, layout, fieldtype, symmetry = (t.lower() for t in toks[1:5])
    if obj != "matrix" or layout != "coordinate":
        raise GraphFormatError(f"unsupported MatrixMarket layout {obj} {layout}", path, 1)
    if fieldtype not in ("pattern", "real", "integer", "double"):
        raise GraphFormatError(f"unsupported MatrixMarket field {fieldtype}", path, 1)
    if symmetry not in ("general", "symmetric"):
        raise GraphFormatError(f"unsupported MatrixMarket symmetry {symmetry}", path, 1)
    pattern = fieldtype == "pattern"

    lineno = 1
    size = None
    for line in fh:
        lineno += 1
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        size = s.split()
        break
    if size is None or len(size) != 3:
        raise GraphFormatError("missing size line 'rows cols nnz'", path, lineno)
    rows, cols, nnz = (_parse_id(t, path, lineno) for t in size)
    n = max(rows, cols)

    src, dst, wts = [], [], []
    for line in fh:
        lineno += 1
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        want = 2 if pattern else 3
        if len(parts) < want:
            raise GraphFormatError(f"expected {want} fields, got {len(parts)}", path, lineno)
        u = _parse_id(parts[0], path, lineno) - 1
        v = _parse_id(parts[1], path, lineno) - 1
        if not (0 <= u < rows and 0 <= v < cols):
            raise ValidationError(f"{path}:{lineno}: entry ({u + 1}, {v + 1}) outside {rows}x{cols}")
        w = 1.0 if pattern else _parse_weight(parts[2], path, lineno)
        src.append(u)
        dst.append(v)
        wts.append(w)
    if len(src) != nnz:
        raise GraphFormatError(f"header announces {nnz} entries, found {len(src)}", path, lineno)
    return EdgeList(np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                    np.array(wts, dtype=np.float64), n_declared=n)


def load_graph(path, format: str = "edge-list") -> EdgeList:
    """Read an edge list from ``path``.

    ``format`` is ``"mtx"`` (MatrixMarket coordinate, 1-based ids) or
    ``"edge-list"`` (whitespace separated ``u v [w]``, 0-based ids, ``#`` or
    ``%`` comments). Unweighted entries get weight 1.
    """
    fmt = _normalize_format(format)
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"graph file not found: {path}")
    with open(path) as fh:
        el = _read_matrix_market(fh, path) if fmt == "mtx" else _read_edge_list(fh, path)
    el.validate()
    return el


def write_edge_list(graph_or_edges, path) -> None:
    el = graph_or_edges.to_edge_list() if isinstance(graph_or_edges, CsrGraph) else graph_or_edges
    with open(path, "w") as fh:
        fh.write(f"# vertices {el.vertex_count()}\n")
        for u, v, w in el.tuples():
            fh.write(f"{u} {v} {w!r}\n")


def build_csr(el: EdgeList, symmetrize: bool = True) -> CsrGraph:
    """Build a CSR graph from ``el``.

    With ``symmetrize``, every non-loop edge is stored in both directions
    exactly once. Repeated edges in the same direction merge by summing
    weights; when both ``(u, v)`` and ``(v, u)`` are given, the one with
    ``u < v`` is kept. Self-loops are stored once.
    """
    el.validate()
    n = el.vertex_count()
    if n > MAX_VERTICES:
        raise ValidationError(f"{n} vertices exceed the 32-bit id range")
    if len(el) and max(el.src.max(), el.dst.max()) >= n:
        raise ValidationError("vertex id overflow")

    # merge same-direction duplicates
    key = el.src * n + el.dst
    ukey, inv = np.unique(key, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=el.weight, minlength=len(ukey))
    u, v = ukey // max(n, 1), ukey % max(n, 1)

    if symmetrize:
        loop = u == v
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        pair = lo * n + hi
        # prefer the u < v orientation when both directions exist
        order = np.lexsort((u > v, pair))
        pair_sorted = pair[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = pair_sorted[1:] != pair_sorted[:-1]
        keep = order[first]
        lo, hi, w, loop = lo[keep], hi[keep], w[keep], loop[keep]
        nl = ~loop
        u = np.concatenate([lo, hi[nl]])
        v = np.concatenate([hi, lo[nl]])
        w = np.concatenate([w, w[nl]])

    order = np.lexsort((v, u))
    u, v, w = u[order], v[order], w[order]
    counts = np.bincount(u, minlength=n) if len(u) else np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return CsrGraph(n, offsets, v.astype(np.int32), w.astype(np.float64))
