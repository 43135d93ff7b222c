"""Modularity, delta-modularity and community statistics.

All sums are accumulated in float64 regardless of the hashtable precision
used during detection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .errors import ValidationError
from .graph import CsrGraph

__all__ = ["CommunityStats", "modularity", "delta_modularity", "community_stats"]


@dataclass
class CommunityStats:
    """Per-community totals, aligned with the sorted array ``labels``.

    ``sigma[c]`` is the weight of stored edges with both ends in ``c`` (each
    undirected edge counted in both directions); ``Sigma[c]`` is the total
    weighted degree of ``c``.
    """

    count: int
    labels: np.ndarray
    members: np.ndarray
    sizes: Dict[int, int]
    sigma: np.ndarray
    Sigma: np.ndarray

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "sizes": {str(k): v for k, v in sorted(self.sizes.items())},
            "largest": int(self.members.max()) if self.count else 0,
            "total_sigma": float(self.sigma.sum()),
            "total_Sigma": float(self.Sigma.sum()),
        }


def _compact(graph: CsrGraph, labels) -> tuple:
    labels = np.asarray(labels)
    if labels.shape != (graph.n,):
        raise ValidationError(f"expected {graph.n} labels, got {labels.shape}")
    uniq, comm = np.unique(labels, return_inverse=True)
    return uniq, comm.ravel()


def _totals(graph: CsrGraph, comm: np.ndarray, k: int):
    src = graph.sources()
    dst = graph.targets
    inside = comm[src] == comm[dst]
    sigma = np.bincount(comm[src[inside]], weights=graph.weights[inside], minlength=k)
    Sigma = np.bincount(comm[src], weights=graph.weights, minlength=k)
    return sigma, Sigma


def community_stats(graph: CsrGraph, labels) -> CommunityStats:
    uniq, comm = _compact(graph, labels)
    k = len(uniq)
    members = np.bincount(comm, minlength=k)
    sizes, counts = np.unique(members, return_counts=True)
    sigma, Sigma = _totals(graph, comm, k)
    return CommunityStats(
        count=k,
        labels=uniq,
        members=members,
        sizes={int(s): int(c) for s, c in zip(sizes, counts)},
        sigma=sigma,
        Sigma=Sigma,
    )


def modularity(graph: CsrGraph, labels) -> float:
    """Newman modularity of the partition given by ``labels``.

    ``Q = sum_c [sigma_c / 2m - (Sigma_c / 2m)^2]``.
    """
    m2 = graph.total_weight_2m
    if m2 <= 0:
        raise ValidationError("modularity is undefined for a graph without edges")
    uniq, comm = _compact(graph, labels)
    sigma, Sigma = _totals(graph, comm, len(uniq))
    return float(np.sum(sigma / m2 - (Sigma / m2) ** 2))


def delta_modularity(m, K_i, K_i_to_c, K_i_to_d, Sigma_c, Sigma_d) -> float:
    """Modularity change for moving a vertex from community ``d`` to ``c``.

    ``m`` is the undirected total edge weight (half of the stored sum),
    ``K_i`` the vertex's weighted degree, ``K_i_to_*`` its edge weight into
    each community (self-loop excluded), ``Sigma_*`` the community totals
    with the vertex still counted in ``d``.
    """
    if m <= 0:
        raise ValidationError("m must be positive")
    return (K_i_to_c - K_i_to_d) / m - K_i / (2.0 * m * m) * (K_i + Sigma_c - Sigma_d)
