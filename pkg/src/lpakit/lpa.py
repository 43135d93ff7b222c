"""Asynchronous label propagation with community-swap mitigation.

Each pass visits the vertices still marked unprocessed, tallies the weight of
every neighbouring label in the vertex's own hashtable, and adopts the
heaviest label in place. A vertex that changes label re-arms its neighbours.

Two mitigations break label-swap cycles:

* pick-less (PL), every ``pl_period`` passes: a vertex may only move to a
  smaller label id;
* cross-check (CC), every ``cc_period`` passes: a move to label ``c`` is
  undone unless vertex ``c`` itself still carries ``c``.

Vertices with degree below ``switch_degree`` are processed end to end by a
single worker with plain hashtable updates. Higher-degree vertices are
processed by the whole worker team at once, splitting the neighbour scan and
updating a shared hashtable with atomics.
"""
from __future__ import annotations

import enum
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

from ._atomics import atomic_add, atomic_cas
from .errors import InvariantViolation, ValidationError
from .graph import CsrGraph
from .hashtable import (
    EMPTY,
    HtArena,
    ProbeStrategy,
    ht_accumulate,
    ht_accumulate_shared,
    ht_clear,
    ht_max_key,
    table_geometry,
    value_dtype,
)

__all__ = [
    "ExecMode",
    "LpaConfig",
    "RunStats",
    "lpa",
    "lpa_move",
    "new_flags",
    "partition_by_degree",
    "cross_check",
    "warmup",
]

# returned by the scan kernels when a hashtable insertion fails
_FAILED = -2

# scalar-path vertices handed out per work request
_LOW_CHUNK = 256
# team-path vertices are grouped into batches of at least this many edges
_TEAM_BATCH_EDGES = 1 << 15


class ExecMode(str, enum.Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"
    SYNCHRONOUS = "synchronous"

    @classmethod
    def parse(cls, value) -> "ExecMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("parallel-async", "async"):
            v = "parallel"
        return cls(v)


@dataclass
class LpaConfig:
    tolerance: float = 0.05
    max_iterations: int = 20
    pl_period: int = 4
    cc_period: int = 0
    strategy: ProbeStrategy = ProbeStrategy.QUADRATIC_DOUBLE
    switch_degree: int = 32
    precision: int = 32
    exec_mode: ExecMode = ExecMode.PARALLEL
    workers: Optional[int] = None
    seed: int = 0
    order: str = "random"

    def __post_init__(self):
        if self.order not in ("random", "ascending"):
            raise ValidationError(f"order must be 'random' or 'ascending', got {self.order!r}")
        self.strategy = ProbeStrategy.parse(self.strategy)
        self.exec_mode = ExecMode.parse(self.exec_mode)
        self.precision = int(self.precision)
        value_dtype(self.precision)
        if not (0.0 < self.tolerance <= 1.0):
            raise ValidationError(f"tolerance must be in (0, 1], got {self.tolerance}")
        if self.max_iterations < 0:
            raise ValidationError("max_iterations must be >= 0")
        if self.pl_period < 0 or self.cc_period < 0:
            raise ValidationError("mitigation periods must be >= 0")
        if self.switch_degree < 2:
            raise ValidationError("switch_degree must be >= 2")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @property
    def n_workers(self) -> int:
        if self.exec_mode is not ExecMode.PARALLEL:
            return 1
        return self.workers or os.cpu_count() or 1

    def visiting_order(self, n: int) -> np.ndarray:
        """Vertex visiting order: a permutation drawn from ``seed``, or ascending ids."""
        if self.order == "ascending":
            return np.arange(n, dtype=np.int64)
        return np.random.default_rng(self.seed).permutation(n).astype(np.int64)

    def is_pick_less(self, iteration: int) -> bool:
        return self.pl_period > 0 and iteration % self.pl_period == 0

    def is_cross_check(self, iteration: int) -> bool:
        return self.cc_period > 0 and iteration % self.cc_period == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        d["exec_mode"] = self.exec_mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LpaConfig":
        return cls(**d)


@dataclass
class RunStats:
    iterations: int = 0
    delta_n: List[int] = field(default_factory=list)
    reverted: List[int] = field(default_factory=list)
    converged: bool = False
    elapsed: float = 0.0
    pl_iterations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def new_flags(graph: CsrGraph) -> np.ndarray:
    """Processed flags for a fresh run; isolated vertices start processed."""
    return (graph.degrees() == 0).astype(np.uint8)


def partition_by_degree(graph, switch_degree: int = 32):
    """Split vertex ids into ``(low, high)`` by ``degree < switch_degree``.

    ``graph`` may also be a plain array of vertex degrees. Both lists are in
    ascending id order.
    """
    if switch_degree < 2:
        raise ValidationError("switch_degree must be >= 2")
    deg = graph.degrees() if isinstance(graph, CsrGraph) else np.asarray(graph)
    low = np.flatnonzero(deg < switch_degree).astype(np.int64)
    high = np.flatnonzero(deg >= switch_degree).astype(np.int64)
    return low, high


# --- kernels -----------------------------------------------------------------

@njit(nogil=True, cache=True)
def _best_label(i, offsets, targets, weights, labels, keys, values, strategy, shared):
    """Heaviest neighbour label of ``i`` (ties to the smaller id).

    Returns ``EMPTY`` when ``i`` has no neighbours besides itself and
    ``_FAILED`` if a hashtable insertion fails.
    """
    base, p1, p2 = table_geometry(offsets, i)
    ht_clear(keys, values, base, p1)
    for e in range(offsets[i], offsets[i + 1]):
        j = targets[e]
        if j == i:
            continue
        if shared:
            ok = ht_accumulate_shared(keys, values, base, p1, p2, strategy, labels[j], weights[e])
        else:
            ok = ht_accumulate(keys, values, base, p1, p2, strategy, labels[j], weights[e])
        if not ok:
            return _FAILED
    c, _ = ht_max_key(keys, values, base, p1)
    return c


@njit(nogil=True, cache=True)
def _adopt(i, c, labels, processed, offsets, targets, pick_less):
    ci = labels[i]
    if c < 0 or c == ci:
        return False
    if pick_less and c > ci:
        return False
    labels[i] = c
    for e in range(offsets[i], offsets[i + 1]):
        processed[targets[e]] = 0
    return True


@njit(nogil=True, cache=True)
def _move_sequential(offsets, targets, weights, labels, processed, keys, values,
                     strategy, switch_degree, pick_less, order, status):
    changed = 0
    for i in order:
        if processed[i]:
            continue
        processed[i] = 1
        shared = offsets[i + 1] - offsets[i] >= switch_degree
        c = _best_label(i, offsets, targets, weights, labels, keys, values, strategy, shared)
        if c == _FAILED:
            status[0] = i
            return changed
        if _adopt(i, c, labels, processed, offsets, targets, pick_less):
            changed += 1
    return changed


@njit(nogil=True, cache=True)
def _move_synchronous(offsets, targets, weights, labels, processed, keys, values,
                      strategy, switch_degree, pick_less, snapshot, candidate, status):
    n = len(offsets) - 1
    snapshot[:] = labels
    for i in range(n):
        candidate[i] = EMPTY
        if processed[i]:
            continue
        processed[i] = 1
        shared = offsets[i + 1] - offsets[i] >= switch_degree
        c = _best_label(i, offsets, targets, weights, snapshot, keys, values, strategy, shared)
        if c == _FAILED:
            status[0] = i
            return 0
        candidate[i] = c
    changed = 0
    for i in range(n):
        if _adopt(i, candidate[i], labels, processed, offsets, targets, pick_less):
            changed += 1
    return changed


@njit(nogil=True, cache=True)
def _move_low_worker(offsets, targets, weights, labels, processed, keys, values,
                     strategy, pick_less, low, cursor, counter, status):
    # vertices are claimed in chunks from a shared cursor
    changed = 0
    n_low = len(low)
    while True:
        first = atomic_add(cursor, 0, _LOW_CHUNK)
        if first >= n_low:
            break
        for idx in range(first, min(first + _LOW_CHUNK, n_low)):
            i = low[idx]
            if processed[i]:
                continue
            processed[i] = 1
            c = _best_label(i, offsets, targets, weights, labels, keys, values, strategy, False)
            if c == _FAILED:
                status[0] = i
                continue
            if _adopt(i, c, labels, processed, offsets, targets, pick_less):
                changed += 1
    atomic_add(counter, 0, changed)


@njit(nogil=True, cache=True)
def _team_claim(offsets, processed, keys, values, high, active, lo, hi, worker, n_workers):
    for idx in range(lo + worker, hi, n_workers):
        i = high[idx]
        if processed[i]:
            active[idx] = 0
            continue
        processed[i] = 1
        active[idx] = 1
        base, p1, _ = table_geometry(offsets, i)
        ht_clear(keys, values, base, p1)


@njit(nogil=True, cache=True)
def _team_scan(offsets, targets, weights, labels, keys, values, strategy,
               high, active, lo, hi, worker, n_workers, status):
    for idx in range(lo, hi):
        if not active[idx]:
            continue
        i = high[idx]
        a, b = offsets[i], offsets[i + 1]
        span = b - a
        e0 = a + span * worker // n_workers
        e1 = a + span * (worker + 1) // n_workers
        base, p1, p2 = table_geometry(offsets, i)
        for e in range(e0, e1):
            j = targets[e]
            if j == i:
                continue
            if not ht_accumulate_shared(keys, values, base, p1, p2, strategy, labels[j], weights[e]):
                status[0] = i


@njit(nogil=True, cache=True)
def _team_commit(offsets, targets, labels, processed, keys, values,
                 high, active, lo, hi, worker, n_workers, pick_less):
    changed = 0
    for idx in range(lo + worker, hi, n_workers):
        if not active[idx]:
            continue
        i = high[idx]
        base, p1, _ = table_geometry(offsets, i)
        c, _ = ht_max_key(keys, values, base, p1)
        if _adopt(i, c, labels, processed, offsets, targets, pick_less):
            changed += 1
    return changed


@njit(nogil=True, cache=True)
def _cross_check_range(offsets, targets, labels, prev, processed, worker, n_workers):
    reverted = 0
    n = len(labels)
    for i in range(worker, n, n_workers):
        c = labels[i]
        if c == prev[i] or labels[c] == c:
            continue
        # only the higher-id side of a swap reverts
        if i > c and atomic_cas(labels, i, c, prev[i]) == c:
            reverted += 1
            for e in range(offsets[i], offsets[i + 1]):
                processed[targets[e]] = 0
    return reverted


@njit(nogil=True, cache=True)
def _combine(counter, value):
    atomic_add(counter, 0, value)


# --- drivers -----------------------------------------------------------------

def _team_batches(graph: CsrGraph, high: np.ndarray) -> np.ndarray:
    """Batch boundaries over ``high`` so each batch spans enough edges to
    amortise the team barriers."""
    if len(high) == 0:
        return np.zeros(1, dtype=np.int64)
    deg = graph.degrees()[high]
    cum = np.cumsum(deg)
    bounds = [0]
    target = _TEAM_BATCH_EDGES
    for idx in np.searchsorted(cum, np.arange(target, cum[-1] + target, target), side="left"):
        nxt = min(int(idx) + 1, len(high))
        if nxt > bounds[-1]:
            bounds.append(nxt)
    if bounds[-1] != len(high):
        bounds.append(len(high))
    return np.asarray(bounds, dtype=np.int64)


class _Mover:
    """Holds per-run state (arena, partitions, worker pool) for repeated passes."""

    def __init__(self, graph: CsrGraph, config: LpaConfig, arena: Optional[HtArena] = None):
        self.graph = graph
        self.config = config
        self.mode = config.exec_mode
        self.workers = config.n_workers
        self.arena = arena if arena is not None else HtArena.for_graph(graph, config.precision)
        self.weights = graph.weights.astype(self.arena.values.dtype)
        self.strategy = config.strategy.code
        self.status = np.full(1, -1, dtype=np.int64)
        self.pool = None
        if self.mode is ExecMode.SEQUENTIAL:
            self.order = config.visiting_order(graph.n)
        elif self.mode is ExecMode.SYNCHRONOUS:
            self.snapshot = np.empty(graph.n, dtype=np.int32)
            self.candidate = np.empty(graph.n, dtype=np.int32)
        elif self.mode is ExecMode.PARALLEL:
            low, high = partition_by_degree(graph, config.switch_degree)
            # each partition is visited in the global visiting order
            rank = np.empty(graph.n, dtype=np.int64)
            rank[config.visiting_order(graph.n)] = np.arange(graph.n)
            self.low = low[np.argsort(rank[low], kind="stable")]
            self.high = high[np.argsort(rank[high], kind="stable")]
            self.batches = _team_batches(graph, self.high)
            self.active = np.zeros(len(self.high), dtype=np.uint8)
            self.pool = ThreadPoolExecutor(self.workers, thread_name_prefix="lpa")

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _check(self):
        if self.status[0] >= 0:
            v = int(self.status[0])
            raise InvariantViolation(
                f"hashtable of vertex {v} (degree {self.graph.degree(v)}) ran out of slots")

    def move(self, labels: np.ndarray, processed: np.ndarray, pick_less: bool) -> int:
        g, a = self.graph, self.arena
        if self.mode is ExecMode.SEQUENTIAL:
            dn = _move_sequential(g.offsets, g.targets, self.weights, labels, processed,
                                  a.keys, a.values, self.strategy, self.config.switch_degree,
                                  pick_less, self.order, self.status)
        elif self.mode is ExecMode.SYNCHRONOUS:
            dn = _move_synchronous(g.offsets, g.targets, self.weights, labels, processed,
                                   a.keys, a.values, self.strategy, self.config.switch_degree,
                                   pick_less, self.snapshot, self.candidate, self.status)
        else:
            dn = self._move_parallel(labels, processed, pick_less)
        self._check()
        return int(dn)

    def _move_parallel(self, labels, processed, pick_less) -> int:
        g, a, W = self.graph, self.arena, self.workers
        counter = np.zeros(1, dtype=np.int64)
        cursor = np.zeros(1, dtype=np.int64)
        futures = [self.pool.submit(_move_low_worker, g.offsets, g.targets, self.weights,
                                    labels, processed, a.keys, a.values, self.strategy,
                                    pick_less, self.low, cursor, counter, self.status)
                   for _ in range(W)]
        for f in futures:
            f.result()
        if len(self.high):
            barrier = threading.Barrier(W)
            futures = [self.pool.submit(self._team_worker, t, barrier, labels, processed,
                                        pick_less, counter)
                       for t in range(W)]
            for f in futures:
                f.result()
        return int(counter[0])

    def _team_worker(self, t, barrier, labels, processed, pick_less, counter):
        g, a, W = self.graph, self.arena, self.workers
        changed = 0
        try:
            for b in range(len(self.batches) - 1):
                lo, hi = self.batches[b], self.batches[b + 1]
                _team_claim(g.offsets, processed, a.keys, a.values, self.high, self.active,
                            lo, hi, t, W)
                barrier.wait()
                _team_scan(g.offsets, g.targets, self.weights, labels, a.keys, a.values,
                           self.strategy, self.high, self.active, lo, hi, t, W, self.status)
                barrier.wait()
                changed += _team_commit(g.offsets, g.targets, labels, processed, a.keys,
                                        a.values, self.high, self.active, lo, hi, t, W,
                                        pick_less)
        except threading.BrokenBarrierError:
            return
        except BaseException:
            barrier.abort()
            raise
        _combine(counter, changed)

    def cross_check(self, labels, prev, processed) -> int:
        g = self.graph
        if self.mode is not ExecMode.PARALLEL or self.workers == 1:
            return int(_cross_check_range(g.offsets, g.targets, labels, prev, processed, 0, 1))
        futures = [self.pool.submit(_cross_check_range, g.offsets, g.targets, labels, prev,
                                    processed, t, self.workers)
                   for t in range(self.workers)]
        return int(sum(f.result() for f in futures))


def lpa_move(graph: CsrGraph, labels: np.ndarray, flags: np.ndarray, arena: HtArena,
             pick_less: bool, config: Optional[LpaConfig] = None) -> int:
    """Run one pass over the unprocessed vertices; returns the number of
    vertices whose label changed. ``labels`` and ``flags`` are updated in place."""
    config = config or LpaConfig()
    _check_labels(graph, labels)
    with _Mover(graph, config, arena) as mover:
        return mover.move(labels, flags, pick_less)


def cross_check(graph: CsrGraph, labels: np.ndarray, prev: np.ndarray,
                flags: Optional[np.ndarray] = None) -> int:
    """Undo label changes that did not join a leader vertex.

    A change of vertex ``i`` to ``c = labels[i] != prev[i]`` is kept when
    ``labels[c] == c``. Otherwise it is reverted, but only for ``i > c`` so
    that one side of a two-vertex swap stays put. Reverted vertices re-arm
    their neighbours in ``flags`` when given. Returns the number of reverts.
    """
    _check_labels(graph, labels)
    if flags is None:
        flags = np.ones(graph.n, dtype=np.uint8)
    return int(_cross_check_range(graph.offsets, graph.targets, labels,
                                  np.asarray(prev, dtype=np.int32), flags, 0, 1))


def _check_labels(graph, labels):
    if not isinstance(labels, np.ndarray) or labels.dtype != np.int32 or len(labels) != graph.n:
        raise ValidationError("labels must be an int32 array of length n")


def lpa(graph: CsrGraph, config: Optional[LpaConfig] = None, **overrides):
    """Detect communities; returns ``(labels, RunStats)``.

    ``overrides`` are applied on top of ``config`` (or the defaults).
    The wall time in the stats covers the iterations only, not arena setup.
    """
    if config is None:
        config = LpaConfig(**overrides)
    elif overrides:
        config = LpaConfig(**{**config.to_dict(), **overrides})
    if graph.n == 0:
        raise ValidationError("graph has no vertices")

    labels = np.arange(graph.n, dtype=np.int32)
    processed = new_flags(graph)
    stats = RunStats()
    n = graph.n
    with _Mover(graph, config) as mover:
        t0 = time.perf_counter()
        for it in range(config.max_iterations):
            pick_less = config.is_pick_less(it)
            prev = labels.copy() if config.is_cross_check(it) else None
            dn = mover.move(labels, processed, pick_less)
            reverted = mover.cross_check(labels, prev, processed) if prev is not None else 0
            dn -= reverted
            stats.iterations += 1
            stats.delta_n.append(dn)
            stats.reverted.append(reverted)
            stats.pl_iterations += pick_less
            # with pl_period == 1 every pass is pick-less, so those passes count
            if (not pick_less or config.pl_period == 1) and dn / n < config.tolerance:
                stats.converged = True
                break
        stats.elapsed = time.perf_counter() - t0
    return labels, stats


def warmup(config: Optional[LpaConfig] = None) -> None:
    """Compile the kernels ``config`` will use by running a tiny graph.

    Call before timing a run so JIT compilation is not measured.
    """
    from .generators import star
    from .graph import build_csr

    config = config or LpaConfig()
    # a star wider than the switch degree exercises both execution paths
    g = build_csr(star(max(config.switch_degree, 2) + 1))
    lpa(g, LpaConfig(**{**config.to_dict(), "max_iterations": 2, "cc_period": 1}))
