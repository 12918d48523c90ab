"""Run configuration: flat ``section.key = value`` text files.

Blank lines and ``#`` comments are ignored. Every key must name a field
below; values are converted to the field's type. Lists are comma
separated. Validation happens before any work is done.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigurationError
from .observe import ObservableSpec


@dataclass
class DataConfig:
    n_classes: int = 10
    samples_per_class: int = 200
    input_dim: int = 8
    class_center_scale: float = 3.0
    noise_sigma: float = 1.0
    train_fraction: float = 0.7
    split: str = "stratified"  # or "class_disjoint"
    images: str = ""  # optional IDX pair replaces the synthetic blobs
    labels: str = ""


@dataclass
class ModelConfig:
    hidden: list = field(default_factory=lambda: [32, 32])
    feature_dim: int = 16


@dataclass
class QuantumConfig:
    encoder: str = "amplitude"
    n_qubits: int = 0  # 0 = derived (ceil(log2 d) for amplitude, 4 otherwise)
    observable: str = "Z"
    normalize_quantum: bool = True
    detach_targets: bool = True


@dataclass
class TrainConfig:
    lam: float = 0.5
    scale: float = 16.0
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class ClusterConfig:
    k: int = 10
    threshold: float = 0.5
    max_cluster_size: int = 100  # 0 = plain connected components
    mutual: bool = True
    refine: bool = True
    refiner_tokens: str = "space"  # "space" (features being clustered) or "classical"


@dataclass
class RefinerConfig:
    hidden: int = 8
    n_qubits: int = 3
    observable: str = "Z"
    epochs: int = 5
    batch_size: int = 64
    lr: float = 1e-2


@dataclass
class RunConfig:
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    prop1_pairs: int = 1000
    prop1_qubits: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    prop1_observables: list = field(default_factory=lambda: ["Z", "X", "Y"])
    prop1_states: str = "haar"  # or an encoder kind: amplitude, phase, u3


@dataclass
class SweepConfig:
    lambdas: list = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0])


@dataclass
class Config:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    quantum: QuantumConfig = field(default_factory=QuantumConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    refiner: RefinerConfig = field(default_factory=RefinerConfig)
    run: RunConfig = field(default_factory=RunConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> Config:
        d, q, t, c, r = self.data, self.quantum, self.train, self.cluster, self.refiner
        checks = [
            (d.n_classes >= 2, "data.n_classes must be >= 2"),
            (d.samples_per_class >= 1 and d.input_dim >= 1, "data sizes must be positive"),
            (d.class_center_scale > 0 and d.noise_sigma >= 0, "data.class_center_scale > 0, noise_sigma >= 0"),
            (0 < d.train_fraction < 1, "data.train_fraction must be in (0, 1)"),
            (d.split in ("stratified", "class_disjoint"), f"unknown data.split {d.split!r}"),
            (bool(d.images) == bool(d.labels), "data.images and data.labels go together"),
            (all(h >= 1 for h in self.model.hidden) and self.model.feature_dim >= 1, "model dims must be positive"),
            (q.encoder in ("amplitude", "phase", "u3"), f"unknown quantum.encoder {q.encoder!r}"),
            (q.n_qubits >= 0, "quantum.n_qubits must be >= 0"),
            (t.lam >= 0 and math.isfinite(t.lam), "train.lam must be >= 0"),
            (t.scale > 0, "train.scale must be > 0"),
            (t.epochs >= 0 and t.batch_size >= 1, "train.epochs >= 0 and train.batch_size >= 1"),
            (t.lr > 0 and t.weight_decay >= 0, "train.lr > 0 and train.weight_decay >= 0"),
            (c.k >= 2, "cluster.k must be >= 2"),
            (0 <= c.threshold <= 1, "cluster.threshold must be in [0, 1]"),
            (c.max_cluster_size >= 0, "cluster.max_cluster_size must be >= 0"),
            (c.refiner_tokens in ("space", "classical"), f"unknown cluster.refiner_tokens {c.refiner_tokens!r}"),
            (r.hidden >= 1 and r.n_qubits >= 1 and r.epochs >= 0 and r.batch_size >= 1, "refiner sizes"),
            (len(self.run.seeds) >= 1, "run.seeds must not be empty"),
            (self.run.prop1_pairs >= 1, "run.prop1_pairs must be positive"),
            (all(1 <= n <= 14 for n in self.run.prop1_qubits), "run.prop1_qubits must lie in [1, 14]"),
            (self.run.prop1_states in ("haar", "amplitude", "phase", "u3"), "unknown run.prop1_states"),
            (len(self.sweep.lambdas) >= 1 and all(x >= 0 for x in self.sweep.lambdas), "sweep.lambdas"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        # raises ConfigurationError on bad strings
        ObservableSpec.parse(q.observable)
        ObservableSpec.parse(r.observable)
        for text in self.run.prop1_observables:
            if len(ObservableSpec.parse(text).passes) != 1:
                raise ConfigurationError("run.prop1_observables must be single axes")
        return self

    def n_qubits(self) -> int:
        if self.quantum.n_qubits:
            return self.quantum.n_qubits
        if self.quantum.encoder == "amplitude":
            return max(1, math.ceil(math.log2(self.model.feature_dim)))
        return 4


_SCALAR = {int: int, float: float, str: str}


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, list):
            items = [item.strip() for item in raw.split(",") if item.strip()]
            kind = type(default[0]) if default else str
            return [_SCALAR[kind](item) for item in items]
        return _SCALAR[type(default)](raw)
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = base or Config()
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    updates: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'section.key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in sections or name not in {f.name for f in fields(sections[section])}:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        updates.setdefault(section, {})[name] = _convert(raw, getattr(sections[section], name), key)
    for section, values in updates.items():
        sections[section] = replace(sections[section], **values)
    return Config(**sections).validate()


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
