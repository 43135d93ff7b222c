"""Per-vertex open-addressing hashtables carved out of one flat arena.

Every vertex ``i`` of a CSR graph owns ``2 * degree(i)`` slots starting at
``2 * offsets[i]`` in two shared buffers (keys and values), so the whole
arena costs two allocations of ``2|E|`` entries. Only the first ``p1`` slots
of a region are addressable, where ``p1 = nextPow2(degree) - 1``.

The low-level kernels take raw arrays and are compiled with numba so the
LPA kernels can call them directly. :class:`HtArena` wraps them for use from
Python.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._atomics import atomic_add, atomic_cas, atomic_load
from .errors import NoTableError

__all__ = [
    "EMPTY",
    "ProbeStrategy",
    "HtGeometry",
    "HtArena",
    "next_pow2",
    "geometry_for",
    "value_dtype",
    "ht_clear",
    "ht_accumulate",
    "ht_accumulate_shared",
    "ht_max_key",
    "accumulate_workloads",
]

EMPTY = -1

LINEAR = 0
QUADRATIC = 1
DOUBLE = 2
QUADRATIC_DOUBLE = 3


class ProbeStrategy(str, enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    DOUBLE = "double"
    QUADRATIC_DOUBLE = "quadratic-double"

    @property
    def code(self) -> int:
        return _STRATEGY_CODES[self]

    @classmethod
    def parse(cls, value) -> "ProbeStrategy":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower().replace("_", "-"))


_STRATEGY_CODES = {
    ProbeStrategy.LINEAR: LINEAR,
    ProbeStrategy.QUADRATIC: QUADRATIC,
    ProbeStrategy.DOUBLE: DOUBLE,
    ProbeStrategy.QUADRATIC_DOUBLE: QUADRATIC_DOUBLE,
}


def value_dtype(precision) -> np.dtype:
    """Hashtable value dtype for a precision of 32 or 64 bits."""
    p = int(precision)
    if p == 32:
        return np.dtype(np.float32)
    if p == 64:
        return np.dtype(np.float64)
    raise ValueError(f"value precision must be 32 or 64, not {precision!r}")


@njit(nogil=True, cache=True)
def next_pow2(x):
    """Smallest power of two strictly greater than ``x``."""
    p = 1
    while p <= x:
        p <<= 1
    return p


@njit(nogil=True, cache=True)
def table_geometry(offsets, i):
    """``(base, p1, p2)`` for vertex ``i``; ``p1 == 0`` for isolated vertices."""
    d = offsets[i + 1] - offsets[i]
    if d == 0:
        return 2 * offsets[i], 0, 0
    p1 = next_pow2(d) - 1
    p2 = 2 * (p1 + 1) - 1
    return 2 * offsets[i], p1, p2


@dataclass(frozen=True)
class HtGeometry:
    offset: int
    p1: int
    p2: int

    @classmethod
    def for_degree(cls, degree: int, csr_offset: int = 0) -> "HtGeometry":
        if degree < 1:
            raise NoTableError("a vertex of degree 0 has no hashtable")
        p1 = int(next_pow2(degree)) - 1
        return cls(2 * int(csr_offset), p1, 2 * (p1 + 1) - 1)


def geometry_for(graph, i: int) -> HtGeometry:
    d = graph.degree(i)
    if d < 1:
        raise NoTableError(f"vertex {i} has degree 0 and no hashtable")
    return HtGeometry.for_degree(d, int(graph.offsets[i]))


@njit(nogil=True, cache=True)
def ht_clear(keys, values, base, p1):
    for s in range(base, base + p1):
        keys[s] = EMPTY
        values[s] = 0


@njit(nogil=True, cache=True)
def _probe_start(strategy, k, p1, p2):
    if strategy == DOUBLE:
        return k % p1, max(1, k % p2) % p1
    return k % p1, 1 % p1


@njit(nogil=True, cache=True)
def _probe_next(strategy, i, di, r, p1):
    # Returns the next (i, di). Arithmetic stays reduced modulo p1, which
    # visits the same slots as the unreduced sequence without overflow.
    i = (i + di) % p1
    if strategy == QUADRATIC:
        di = (2 * di) % p1
    elif strategy == QUADRATIC_DOUBLE:
        di = (2 * di + r) % p1
    return i, di


@njit(nogil=True, cache=True)
def ht_accumulate(keys, values, base, p1, p2, strategy, k, v):
    """Add ``v`` to key ``k`` in a table owned by a single worker.

    Probes follow ``strategy`` for ``3*p1`` steps and then sweep linearly
    for ``p1`` more, so an insertion only fails when the table is full.
    Returns False on failure.
    """
    r = k % p2
    i, di = _probe_start(strategy, k, p1, p2)
    max_retries = 4 * p1
    sweep_from = max_retries - p1
    for t in range(max_retries):
        if t == sweep_from:
            strategy = LINEAR
            di = 1 % p1
        s = base + i
        cur = keys[s]
        if cur == k or cur == EMPTY:
            keys[s] = k
            values[s] += v
            return True
        i, di = _probe_next(strategy, i, di, r, p1)
    return False


@njit(nogil=True, cache=True)
def ht_accumulate_shared(keys, values, base, p1, p2, strategy, k, v):
    """Like :func:`ht_accumulate`, but safe when several workers insert into
    the same table: slots are claimed with compare-and-swap and values are
    added atomically."""
    r = k % p2
    i, di = _probe_start(strategy, k, p1, p2)
    max_retries = 4 * p1
    sweep_from = max_retries - p1
    for t in range(max_retries):
        if t == sweep_from:
            strategy = LINEAR
            di = 1 % p1
        s = base + i
        cur = atomic_load(keys, s)
        if cur == k or cur == EMPTY:
            old = atomic_cas(keys, s, EMPTY, k)
            if old == EMPTY or old == k:
                atomic_add(values, s, v)
                return True
        i, di = _probe_next(strategy, i, di, r, p1)
    return False


@njit(nogil=True, cache=True)
def ht_max_key(keys, values, base, p1):
    """Key with the largest value, smaller key on ties; ``EMPTY`` if none."""
    best_k = EMPTY
    best_v = 0.0
    for s in range(base, base + p1):
        k = keys[s]
        if k == EMPTY:
            continue
        v = values[s]
        if best_k == EMPTY or v > best_v or (v == best_v and k < best_k):
            best_k = k
            best_v = v
    return best_k, best_v


@njit(nogil=True, cache=True)
def accumulate_workloads(keys, values, bases, p1s, p2s, starts, ins_keys, ins_vals,
                         strategy, shared, worker, n_workers):
    """Replay many independent insertion workloads; one table per workload.

    Workload ``w`` inserts ``ins_*[starts[w]:starts[w+1]]`` into the table at
    ``bases[w]``. Unshared: worker ``t`` owns whole tables ``w % n_workers == t``.
    Shared: every table's insertions are interleaved across all workers.
    Returns the number of failed insertions seen by this worker.
    """
    failed = 0
    for w in range(len(bases)):
        if not shared and w % n_workers != worker:
            continue
        base, p1, p2 = bases[w], p1s[w], p2s[w]
        first = starts[w]
        if shared:
            first += (worker - first) % n_workers
            step = n_workers
        else:
            step = 1
        for j in range(first, starts[w + 1], step):
            if shared:
                ok = ht_accumulate_shared(keys, values, base, p1, p2, strategy,
                                          ins_keys[j], ins_vals[j])
            else:
                ok = ht_accumulate(keys, values, base, p1, p2, strategy,
                                   ins_keys[j], ins_vals[j])
            if not ok:
                failed += 1
    return failed


class HtArena:
    """Key/value buffers holding every vertex's hashtable.

    ``keys`` is int32 with ``EMPTY`` marking a free slot; ``values`` is
    float32 or float64 depending on ``precision``.
    """

    def __init__(self, size: int, precision: int = 32):
        self.keys = np.full(size, EMPTY, dtype=np.int32)
        self.values = np.zeros(size, dtype=value_dtype(precision))

    @classmethod
    def for_graph(cls, graph, precision: int = 32) -> "HtArena":
        return cls(2 * graph.m2, precision)

    def __len__(self):
        return len(self.keys)

    def clear(self, geo: HtGeometry) -> None:
        ht_clear(self.keys, self.values, geo.offset, geo.p1)

    def accumulate(self, geo: HtGeometry, k: int, v: float,
                   strategy=ProbeStrategy.QUADRATIC_DOUBLE, shared: bool = False) -> bool:
        code = ProbeStrategy.parse(strategy).code
        fn = ht_accumulate_shared if shared else ht_accumulate
        return bool(fn(self.keys, self.values, geo.offset, geo.p1, geo.p2, code,
                       np.int32(k), self.values.dtype.type(v)))

    def max_key(self, geo: HtGeometry):
        k, v = ht_max_key(self.keys, self.values, geo.offset, geo.p1)
        if k == EMPTY:
            return None
        return int(k), float(v)

    def contents(self, geo: HtGeometry) -> dict:
        ks = self.keys[geo.offset:geo.offset + geo.p1]
        vs = self.values[geo.offset:geo.offset + geo.p1]
        used = ks != EMPTY
        return {int(k): float(v) for k, v in zip(ks[used], vs[used])}
