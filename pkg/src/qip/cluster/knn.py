from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..gap import normalize_rows


@dataclass
class ClusterProposal:
    center_index: int
    member_indices: np.ndarray  # center first, then neighbors by decreasing similarity
    member_features: np.ndarray


def cosine_similarity(features: np.ndarray) -> np.ndarray:
    unit, _ = normalize_rows(np.asarray(features, dtype=np.float64))
    return unit @ unit.T


def knn_clusters(features: np.ndarray, k: int) -> list[ClusterProposal]:
    """Exact cosine k-NN proposal for every sample.

    Ties are broken by lower sample index; the center always comes first.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if not 2 <= k <= n:
        raise ConfigurationError(f"k must be in [2, {n}], got {k}")
    if not np.all(np.isfinite(features)):
        raise ConfigurationError("features must be finite")
    sims = cosine_similarity(features)
    np.fill_diagonal(sims, np.inf)  # center sorts first
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    return [ClusterProposal(i, order[i], features[order[i]]) for i in range(n)]
