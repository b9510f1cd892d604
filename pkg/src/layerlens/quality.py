"""Quality metrics for trained stacks.

* a supervised labeler over visible-space samples (so generated samples can
  be assigned labels without any external classifier), gated on measured
  validation error;
* generation ability: the inverse Kullback-Leibler divergence between the
  training label distribution P and the generated label distribution Q;
* per-layer classification error: the fraction of samples whose true label
  differs from the majority label of their hidden state.
"""

import dataclasses

import numpy as np

from . import dbn
from .errors import LabelerError
from .seeding import child_seed

#: Relative divergences below this are treated as P == Q ("unbounded" ability).
KL_ZERO_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class LabelDistribution:
    """Probabilities over a fixed label alphabet, optionally with the sample
    count they were estimated from (needed for smoothing)."""

    probs: np.ndarray
    total_count: int | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("probs must be a non-empty vector")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n_labels(self):
        return self.probs.size

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise ValueError("counts must contain at least one observation")
        return cls(probs=counts / total, total_count=int(total))

    @classmethod
    def from_labels(cls, labels, n_labels):
        counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_labels)
        return cls.from_counts(counts)


@dataclasses.dataclass(frozen=True)
class AbilityResult:
    """1 / D(P||Q); ``unbounded`` marks D below tolerance (P == Q), in which
    case ``ability`` is None and must not be used in arithmetic."""

    divergence: float
    ability: float | None
    unbounded: bool


def generation_ability(p, q):
    """Inverse KL divergence between training labels P and generated labels Q.

    Q is additively smoothed with epsilon = 1 / (10 * M_generated) before the
    divergence when its sample count is known (a single empty label bin would
    otherwise destroy the metric); distributions constructed without counts
    are used as-is.
    """
    if p.n_labels != q.n_labels:
        raise ValueError(f"label alphabets differ: {p.n_labels} vs {q.n_labels}")
    q_probs = q.probs
    if q.total_count:
        eps = 1.0 / (10.0 * q.total_count)
        q_probs = (q_probs + eps) / (1.0 + eps * q.n_labels)
    support = p.probs > 0
    if (q_probs[support] <= 0).any():
        divergence = float("inf")
    else:
        divergence = float(
            (p.probs[support] * np.log(p.probs[support] / q_probs[support])).sum()
        )
        divergence = max(divergence, 0.0)
    if divergence < KL_ZERO_TOLERANCE:
        return AbilityResult(divergence=divergence, ability=None, unbounded=True)
    return AbilityResult(divergence=divergence, ability=1.0 / divergence, unbounded=False)


def classification_error(state_set, true_labels):
    """Fraction of samples whose label is not their state's majority label.

    Ties in the majority vote break toward the smallest label index; the
    error count itself is tie-invariant (tied labels match equally many
    samples).
    """
    if isinstance(state_set, dbn.StateSet):
        states = state_set.states
    else:
        states = np.asarray(state_set, dtype=np.uint8)
    labels = np.asarray(true_labels, dtype=np.int64)
    if labels.shape != (states.shape[0],):
        raise ValueError(
            f"got {labels.shape[0]} labels for {states.shape[0]} states"
        )
    packed = np.packbits(states, axis=1)
    _, group = np.unique(packed, axis=0, return_inverse=True)
    n_groups = int(group.max()) + 1
    n_labels = int(labels.max()) + 1
    table = np.zeros((n_groups, n_labels), dtype=np.int64)
    np.add.at(table, (group, labels), 1)
    matched = table.max(axis=1).sum()
    return float(labels.size - matched) / labels.size


class ConstantLabeler:
    """Degenerate classifier for single-class training data."""

    def __init__(self, label):
        self.label = int(label)

    def predict(self, samples):
        return np.full(np.asarray(samples).shape[0], self.label, dtype=np.int64)


@dataclasses.dataclass(frozen=True)
class LabelerConfig:
    kind: str = "svm"
    seed: int = 0
    max_validation_error: float = 0.05

    def __post_init__(self):
        if self.kind not in ("svm", "mlp"):
            raise ValueError(f"unknown labeler kind {self.kind!r}")


@dataclasses.dataclass(frozen=True)
class LabelerModel:
    """Trained classifier plus the held-out error measured at training time."""

    classifier: object
    kind: str
    validation_error: float
    n_labels: int

    def predict(self, samples):
        return np.asarray(self.classifier.predict(np.asarray(samples)), dtype=np.int64)


def _build_classifier(kind, seed):
    if kind == "svm":
        from sklearn.svm import SVC

        return SVC(C=10.0, kernel="rbf", gamma="scale", cache_size=500)
    from sklearn.neural_network import MLPClassifier

    return MLPClassifier(
        hidden_layer_sizes=(256,),
        max_iter=120,
        random_state=seed % (2**32),
        early_stopping=False,
    )


def train_labeler(train_dataset, validation_dataset, config=LabelerConfig()):
    """Fit a label classifier on raw visible samples and gate on accuracy.

    Refuses to finalize (raises LabelerError) when the measured validation
    error exceeds ``config.max_validation_error`` — downstream label
    statistics would be meaningless.
    """
    if train_dataset.labels is None or validation_dataset.labels is None:
        raise ValueError("labeler needs labeled train and validation datasets")
    y_train = train_dataset.labels.astype(np.int64)
    classes = np.unique(y_train)
    n_labels = int(y_train.max()) + 1

    if classes.size == 1:
        model = ConstantLabeler(classes[0])
    else:
        model = _build_classifier(config.kind, config.seed)
        model.fit(train_dataset.samples, y_train)

    predictions = np.asarray(model.predict(validation_dataset.samples), dtype=np.int64)
    error = float((predictions != validation_dataset.labels.astype(np.int64)).mean())
    if error > config.max_validation_error:
        raise LabelerError(
            f"labeler validation error {error:.4f} exceeds the "
            f"{config.max_validation_error:.2%} quality gate",
            error_rate=error,
        )
    return LabelerModel(
        classifier=model, kind=config.kind, validation_error=error, n_labels=n_labels
    )


@dataclasses.dataclass(frozen=True)
class GenerationEvalConfig:
    n_chains: int = 60000
    n_steps: int = 10000
    mode: str = "mean_field"
    seed: int = 0
    preview_samples: int = 64


@dataclasses.dataclass(frozen=True)
class LayerGeneration:
    layer_index: int
    result: AbilityResult
    label_counts: np.ndarray
    preview: np.ndarray


def evaluate_generation(model, labeler, dataset, config=GenerationEvalConfig()):
    """Per layer: equilibrate chains, generate visibles, label them, and
    score the label distribution against the training distribution."""
    if dataset.labels is None:
        raise ValueError("evaluation needs a labeled dataset")
    n_labels = labeler.n_labels
    p = LabelDistribution.from_labels(dataset.labels, n_labels)
    out = []
    for layer in range(1, model.depth + 1):
        states = dbn.gibbs_equilibrate(
            model,
            layer,
            n_steps=config.n_steps,
            n_chains=config.n_chains,
            seed=child_seed(config.seed, "equilibrate", layer),
        )
        visible = dbn.generate_visible(
            model, states, mode=config.mode, seed=child_seed(config.seed, "generate", layer)
        )
        labels = labeler.predict(visible)
        counts = np.bincount(labels, minlength=n_labels)
        q = LabelDistribution.from_counts(counts)
        out.append(
            LayerGeneration(
                layer_index=layer,
                result=generation_ability(p, q),
                label_counts=counts,
                preview=visible[: config.preview_samples].copy(),
            )
        )
    return out
