"""Multi-index bookkeeping for the auxiliary-matrix hierarchy.

Every auxiliary matrix is labelled by a tuple (n_1, ..., n_N) of non-negative
integers, one per site, with tier = sum(n_m) <= n_max. Indices are ordered
tier-major (lexicographic within a tier) so the matrices of the truncation
tier are contiguous. Raise/lower neighbor positions are precomputed into flat
tables because the propagation kernel is bandwidth-bound; the tuple lookup
map is only used during construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: raise-neighbor sentinel: target would exceed the truncation tier
TRUNCATED = -1
#: lower-neighbor sentinel: the source index has n_m = 0 at that site
ABSENT = -2

# neighbor tables are int32
_MAX_INDEX = np.iinfo(np.int32).max


def hierarchy_size(n_sites: int, n_max: int) -> int:
    """Number of multi-indices with tier <= n_max: C(n_sites + n_max, n_sites)."""
    return math.comb(n_sites + n_max, n_sites)


def _compositions(total: int, parts: int):
    """All tuples of `parts` non-negative ints summing to `total`, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


@dataclass(frozen=True)
class HierarchyGraph:
    """Immutable enumeration of the truncated hierarchy and its neighbor links."""

    n_sites: int
    n_max: int
    indices: np.ndarray   # (n_tot, n_sites) int32, tier-major lexicographic
    tiers: np.ndarray     # (n_tot,) int32
    plus: np.ndarray      # (n_tot, n_sites) int32, position of n_m+1 or TRUNCATED
    minus: np.ndarray     # (n_tot, n_sites) int32, position of n_m-1 or ABSENT
    lookup: dict = field(repr=False)

    @property
    def n_tot(self) -> int:
        return self.indices.shape[0]


def enumerate_hierarchy(n_sites: int, n_max: int) -> HierarchyGraph:
    """Enumerate all multi-indices with tier <= n_max and resolve neighbor links."""
    if n_sites < 1:
        raise ValueError("need at least one site")
    if n_max < 0:
        raise ValueError("truncation tier must be >= 0")
    n_tot = hierarchy_size(n_sites, n_max)
    if n_tot > _MAX_INDEX:
        raise ValueError(
            f"hierarchy with {n_tot} indices exceeds the supported index range"
        )

    rows = []
    tiers = []
    for tier in range(n_max + 1):
        for comp in _compositions(tier, n_sites):
            rows.append(comp)
            tiers.append(tier)
    indices = np.array(rows, dtype=np.int32)
    assert indices.shape[0] == n_tot

    lookup = {tuple(row): k for k, row in enumerate(rows)}
    plus = np.full((n_tot, n_sites), TRUNCATED, dtype=np.int32)
    minus = np.full((n_tot, n_sites), ABSENT, dtype=np.int32)
    for k, row in enumerate(rows):
        for m in range(n_sites):
            if tiers[k] < n_max:
                up = row[:m] + (row[m] + 1,) + row[m + 1:]
                plus[k, m] = lookup[up]
            if row[m] > 0:
                down = row[:m] + (row[m] - 1,) + row[m + 1:]
                minus[k, m] = lookup[down]

    indices.setflags(write=False)
    plus.setflags(write=False)
    minus.setflags(write=False)
    tiers_arr = np.array(tiers, dtype=np.int32)
    tiers_arr.setflags(write=False)
    return HierarchyGraph(
        n_sites=n_sites,
        n_max=n_max,
        indices=indices,
        tiers=tiers_arr,
        plus=plus,
        minus=minus,
        lookup=lookup,
    )


def index_of(graph: HierarchyGraph, multi_index) -> int:
    """Position of a multi-index tuple; KeyError if outside the truncated set."""
    key = tuple(int(n) for n in multi_index)
    try:
        return graph.lookup[key]
    except KeyError:
        raise KeyError(f"multi-index {key} not in hierarchy (n_max={graph.n_max})") from None
