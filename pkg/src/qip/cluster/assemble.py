"""Turn per-member keep probabilities into a flat clustering.

Plain mode: every member whose probability reaches the threshold is
linked to its center and connected components are the clusters.

With ``max_cluster_size`` set, components above the cap are re-split by
raising the link threshold toward 1 (``th += (1 - th) * step``) on the
edges inside them, repeating until every component fits or the threshold
saturates. This is the size-constrained propagation used by k-NN
linkage clustering; a single spurious link otherwise merges two classes.

With ``mutual`` set, an edge's score is the smaller of the two directed
probabilities, and a pair proposed in only one direction scores 0. The
exception is a tie: if a is exactly as similar to b as b's farthest
proposed member, b only missed a through the lower-index tie-break, and
the one proposed direction's probability is used.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..gap import normalize_rows
from .knn import ClusterProposal

TIE_TOL = 1e-12


def _reach(proposals: list[ClusterProposal]):
    """Per center: unit feature and cosine similarity to its farthest member."""
    unit, reach = {}, {}
    for p in proposals:
        f = normalize_rows(np.asarray(p.member_features, dtype=np.float64))[0]
        c = int(p.center_index)
        unit[c] = f[0]
        reach[c] = float(np.min(f[1:] @ f[0])) if len(f) > 1 else np.inf
    return unit, reach


def edge_scores(proposals: list[ClusterProposal], keep_probs, mutual: bool = False):
    """Undirected edges as (i, j, score) arrays with i < j, sorted."""
    if len(keep_probs) != len(proposals):
        raise ValueError("need one keep-probability vector per proposal")
    directed: dict[tuple[int, int], float] = {}
    for prop, probs in zip(proposals, keep_probs):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (len(prop.member_indices),):
            raise ValueError("keep probabilities must match the proposal size")
        c = int(prop.center_index)
        for j, p in zip(np.asarray(prop.member_indices).tolist(), probs.tolist()):
            if j != c:
                directed[(c, j)] = max(p, directed.get((c, j), -np.inf))
    if mutual:
        unit, reach = _reach(proposals)
    undirected: dict[tuple[int, int], float] = {}
    for (a, b), p in directed.items():
        key = (min(a, b), max(a, b))
        if key in undirected:
            continue
        back = directed.get((b, a))
        if mutual:
            if back is None:
                tied = b in reach and float(unit[a] @ unit[b]) >= reach[b] - TIE_TOL
                score = p if tied else 0.0
            else:
                score = min(p, back)
        else:
            score = p if back is None else max(p, back)
        undirected[key] = score
    keys = sorted(undirected)
    src = np.array([k[0] for k in keys], dtype=np.int64)
    dst = np.array([k[1] for k in keys], dtype=np.int64)
    return src, dst, np.array([undirected[k] for k in keys], dtype=np.float64)


def _components(n: int, src, dst) -> np.ndarray:
    graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def relabel_first_seen(labels) -> np.ndarray:
    """Renumber ids 0, 1, ... in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


def assemble_clusters(
    proposals: list[ClusterProposal],
    keep_probs,
    threshold: float = 0.5,
    n_samples: int | None = None,
    max_cluster_size: int | None = None,
    mutual: bool = False,
    step: float = 0.1,
) -> np.ndarray:
    """Predicted cluster ids, numbered by first appearance in sample order."""
    if n_samples is None:
        n_samples = 1 + max((int(np.max(p.member_indices)) for p in proposals), default=-1)
    if max_cluster_size is not None and max_cluster_size < 1:
        raise ValueError("max_cluster_size must be positive")
    src, dst, score = edge_scores(proposals, keep_probs, mutual)

    labels = np.full(n_samples, -1, dtype=np.int64)
    active = np.arange(n_samples)
    th, next_id = threshold, 0
    while len(active):
        local = np.full(n_samples, -1, dtype=np.int64)
        local[active] = np.arange(len(active))
        keep = (score >= th) & (local[src] >= 0) & (local[dst] >= 0)
        comp = _components(len(active), local[src[keep]], local[dst[keep]])
        oversized = []
        for c in range(comp.max() + 1):
            members = active[comp == c]
            if max_cluster_size is None or len(members) <= max_cluster_size or th >= 1.0:
                labels[members] = next_id
                next_id += 1
            else:
                oversized.append(members)
        active = np.concatenate(oversized) if oversized else active[:0]
        nxt = th + (1.0 - th) * step
        th = 1.0 if nxt - th < 1e-12 else nxt
    return relabel_first_seen(labels)
