"""Experiment building blocks shared by the command line and the acceptance suite."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qsim
from .cluster import (
    RefinerModel,
    assemble_clusters,
    bcubed_f,
    knn_clusters,
    pairwise_f,
    refine_batch,
    train_refiner,
)
from .config import Config
from .data import SyntheticSpec, class_disjoint_split, generate_blobs, load_idx, stratified_split
from .encode import EncodingSpec, encode
from .gap import gap_pair
from .observe import ObservableSpec, quantum_map_batch
from .train import AdamWConfig, TrainState, fit

SPACES = ("classical", "quantum")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray


def build_dataset(cfg: Config, seed: int) -> Dataset:
    d = cfg.data
    if d.images:
        X, y = load_idx(d.images, d.labels)
    else:
        spec = SyntheticSpec(d.n_classes, d.samples_per_class, d.input_dim, d.class_center_scale, d.noise_sigma, seed)
        X, y = generate_blobs(spec)
    if d.split == "class_disjoint":
        tr, te = class_disjoint_split(y)
    else:
        tr, te = stratified_split(y, d.train_fraction, seed)
    return Dataset(X, y, tr, te)


def make_encoder(cfg: Config) -> EncodingSpec:
    dim, kind = cfg.model.feature_dim, cfg.quantum.encoder
    if kind == "amplitude":
        spec = EncodingSpec.amplitude(dim)
        if cfg.quantum.n_qubits and cfg.quantum.n_qubits != spec.n_qubits:
            spec = EncodingSpec("amplitude", cfg.quantum.n_qubits, dim)  # raises with a clear message
        return spec
    if kind == "phase":
        return EncodingSpec.phase(dim, cfg.n_qubits())
    return EncodingSpec.u3(dim, cfg.n_qubits())


def make_state(cfg: Config, seed: int, lam: float | None = None, n_classes: int | None = None) -> TrainState:
    t, q = cfg.train, cfg.quantum
    dims = [cfg.data.input_dim, *cfg.model.hidden, cfg.model.feature_dim]
    return TrainState.create(
        dims,
        n_classes if n_classes is not None else cfg.data.n_classes,
        make_encoder(cfg),
        ObservableSpec.parse(q.observable),
        seed,
        lam=t.lam if lam is None else lam,
        scale=t.scale,
        normalize_quantum=q.normalize_quantum,
        detach_targets=q.detach_targets,
        base_lr=t.lr,
        adam=AdamWConfig(t.beta1, t.beta2, t.eps, t.weight_decay),
    )


def train_model(cfg: Config, data: Dataset, seed: int, lam: float | None = None):
    """Fit on the training split. Labels are remapped to 0..C'-1 for the class-disjoint protocol."""
    y_tr = data.y[data.train_idx]
    classes, y_local = np.unique(y_tr, return_inverse=True)
    X_tr = data.X[data.train_idx]
    if X_tr.shape[1] != cfg.data.input_dim:
        raise ValueError(f"data has {X_tr.shape[1]} input dims, config says {cfg.data.input_dim}")
    state = make_state(cfg, seed, lam, n_classes=len(classes))
    return fit(state, X_tr, y_local, cfg.train.epochs, cfg.train.batch_size)


def space_features(state: TrainState, X: np.ndarray) -> dict[str, np.ndarray]:
    V = state.features(X)
    return {"classical": V, "quantum": quantum_map_batch(V, state.enc, state.obs)}


def clustering_metrics(pred, true) -> dict:
    fp = pairwise_f(pred, true)
    fb = bcubed_f(pred, true)
    return {
        "F_P": fp.f_score,
        "pairwise_precision": fp.precision,
        "pairwise_recall": fp.recall,
        "fowlkes_mallows": fp.fowlkes_mallows,
        "pairwise_degenerate": fp.degenerate,
        "F_B": fb.f_score,
        "bcubed_precision": fb.precision,
        "bcubed_recall": fb.recall,
        "n_clusters": int(len(np.unique(pred))),
    }


def assemble(cfg: Config, proposals, keep_probs, n_samples: int) -> np.ndarray:
    c = cfg.cluster
    return assemble_clusters(
        proposals,
        keep_probs,
        c.threshold,
        n_samples,
        max_cluster_size=c.max_cluster_size or None,
        mutual=c.mutual,
    )


def similarity_keep_probs(proposals) -> list[np.ndarray]:
    """Cosine similarity to the center, clipped to [0, 1]: the unrefined scores."""
    out = []
    for p in proposals:
        f = np.asarray(p.member_features, dtype=np.float64)
        unit = f / np.maximum(np.linalg.norm(f, axis=1, keepdims=True), 1e-12)
        out.append(np.clip(unit @ unit[0], 0.0, 1.0))
    return out


def fit_refiner(cfg: Config, features: np.ndarray, labels: np.ndarray, seed: int) -> RefinerModel:
    r = cfg.refiner
    model = RefinerModel.create(features.shape[1], r.hidden, r.n_qubits, ObservableSpec.parse(r.observable), seed)
    proposals = knn_clusters(features, min(cfg.cluster.k, len(features)))
    model, _ = train_refiner(model, proposals, labels, r.epochs, r.batch_size, r.lr, seed)
    return model


def cluster_features(
    cfg: Config,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    refiner: RefinerModel | None = None,
    token_features: np.ndarray | None = None,
):
    """k-NN proposals, optional refinement, assembly and scores.

    ``token_features`` lets the refiner read different features (e.g. the
    classical ones) from those the neighbors were found in.
    Returns (predicted labels, metrics dict, keep probabilities).
    """
    k = min(cfg.cluster.k, len(test_features))
    proposals = knn_clusters(test_features, k)
    if refiner is None:
        keep = similarity_keep_probs(proposals)
    else:
        tokens = proposals
        if token_features is not None:
            tokens = [
                type(p)(p.center_index, p.member_indices, token_features[p.member_indices]) for p in proposals
            ]
        keep = list(refine_batch(refiner, tokens))
    pred = assemble(cfg, proposals, keep, len(test_features))
    return pred, clustering_metrics(pred, test_labels), keep


def evaluate_state(cfg: Config, state: TrainState, data: Dataset, seed: int, spaces=SPACES) -> dict:
    """Cluster the held-out split in each requested feature space."""
    tr, te = data.train_idx, data.test_idx
    feats_tr = space_features(state, data.X[tr])
    feats_te = space_features(state, data.X[te])
    out = {}
    for space in spaces:
        token_space = space if cfg.cluster.refiner_tokens == "space" else "classical"
        refiner = None
        if cfg.cluster.refine:
            refiner = fit_refiner(cfg, feats_tr[token_space], data.y[tr], seed)
        _, metrics, _ = cluster_features(cfg, feats_te[space], data.y[te], refiner, feats_te[token_space])
        out[space] = metrics
    return out


def run_point(cfg: Config, seed: int, lam: float, spaces=SPACES):
    """Train at one lambda and cluster; returns (state, history, metrics by space)."""
    data = build_dataset(cfg, seed)
    state, history = train_model(cfg, data, seed, lam)
    return state, history, evaluate_state(cfg, state, data, seed, spaces)


# ---------------------------------------------------------------------------
# information-gap suite over random state pairs

def random_state(n: int, rng: np.random.Generator) -> qsim.StateVector:
    """Haar-distributed pure state (normalized complex Gaussian vector)."""
    z = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return qsim.StateVector(n, z / np.linalg.norm(z))


def _state_source(kind: str, n: int, rng: np.random.Generator):
    if kind == "haar":
        return lambda: random_state(n, rng)
    if kind == "amplitude":
        spec = EncodingSpec.amplitude(2**n)
    elif kind == "phase":
        spec = EncodingSpec.phase(2 * n, n)
    else:
        spec = EncodingSpec.u3(2 * n, n, rng=rng)
    dim = spec.dim
    return lambda: encode(rng.uniform(-math.pi, math.pi, dim) if kind != "amplitude" else rng.standard_normal(dim), spec)


def prop1_suite(qubits, observables, pairs: int, states: str = "haar", seed: int = 0, gap_tol: float = 1e-3) -> dict:
    """Per (n, observable): gap fraction, max witness residual, max |tr(A)|/n for distinct states."""
    results = {}
    for n in qubits:
        for axis in observables:
            rng = np.random.default_rng([seed, n, "XYZ".index(axis)])
            draw = _state_source(states, n, rng)
            obs = ObservableSpec.parse(axis)
            gaps, residuals = [], []
            for _ in range(pairs):
                rep = gap_pair(draw(), draw(), obs)
                gaps.append(rep.abs_gap)
                residuals.append(rep.witness_residual)
            gaps = np.array(gaps)
            results[f"n{n}_{axis}"] = {
                "n_qubits": n,
                "observable": axis,
                "pairs": pairs,
                "gap_fraction": float(np.mean(gaps > gap_tol)),
                "min_abs_gap": float(gaps.min()),
                "max_witness_residual": float(max(residuals)),
            }
    return results


# ---------------------------------------------------------------------------
# Refiner benefit on proposals with injected errors

def inject_cross_class(proposals, features: np.ndarray, labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """Replace ``round(fraction * (k - 1))`` non-center members of every
    proposal with random samples from other classes."""
    labels = np.asarray(labels)
    out = []
    for p in proposals:
        members = np.array(p.member_indices)
        n_bad = int(round(fraction * (len(members) - 1)))
        if n_bad:
            slots = 1 + rng.choice(len(members) - 1, size=n_bad, replace=False)
            others = np.flatnonzero((labels != labels[p.center_index]) & ~np.isin(np.arange(len(labels)), members))
            members[slots] = rng.choice(others, size=n_bad, replace=False)
        out.append(type(p)(p.center_index, members, features[members]))
    return out


def refiner_benefit(cfg: Config, seed: int, fraction: float = 0.2) -> dict:
    """F_P of assembly from noisy proposals, with and without the refiner.

    Proposals are k-NN groups over the raw synthetic inputs with a
    fraction of members swapped for other-class samples. The unrefined
    baseline takes every member at face value (keep probability 1).
    """
    data = build_dataset(cfg, seed)
    rng = np.random.default_rng([seed, 8])
    k = cfg.cluster.k
    parts = {}
    for name, idx in (("train", data.train_idx), ("test", data.test_idx)):
        F, y = data.X[idx], data.y[idx]
        parts[name] = (inject_cross_class(knn_clusters(F, k), F, y, fraction, rng), y)
    r = cfg.refiner
    model = RefinerModel.create(data.X.shape[1], r.hidden, r.n_qubits, ObservableSpec.parse(r.observable), seed)
    model, _ = train_refiner(model, parts["train"][0], parts["train"][1], r.epochs, r.batch_size, r.lr, seed)
    proposals, y = parts["test"]
    unrefined = assemble(cfg, proposals, [np.ones(len(p.member_indices)) for p in proposals], len(y))
    refined = assemble(cfg, proposals, list(refine_batch(model, proposals)), len(y))
    return {"unrefined": clustering_metrics(unrefined, y), "refined": clustering_metrics(refined, y)}
