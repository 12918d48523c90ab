"""k-NN cluster proposals, the PQC attention refiner, assembly and scores."""
from .assemble import assemble_clusters, edge_scores, relabel_first_seen
from .knn import ClusterProposal, cosine_similarity, knn_clusters
from .metrics import BCubedScore, PairwiseScore, bcubed_f, pairwise_f
from .refiner import (
    RefinerModel,
    membership_targets,
    refine,
    refine_batch,
    token_inputs,
    train_refiner,
)

__all__ = [
    "BCubedScore",
    "ClusterProposal",
    "PairwiseScore",
    "RefinerModel",
    "assemble_clusters",
    "bcubed_f",
    "cosine_similarity",
    "edge_scores",
    "knn_clusters",
    "membership_targets",
    "pairwise_f",
    "refine",
    "refine_batch",
    "relabel_first_seen",
    "token_inputs",
    "train_refiner",
]
