"""Multiclass probabilistic cell classifiers.

The main model is a multinomial logistic regression without intercept,
trained either by plain stochastic gradient descent (fixed learning rate,
fixed example order) or by full-batch adaptive steepest descent with
backtracking step control. A k-nearest-neighbor voter over cosine distance
serves as a baseline.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, DegenerateTrainingError, DivergenceError
from .featurize import (
    FeatureDictionary,
    FeatureVector,
    LabeledExample,
    TokenizationScheme,
    dictionary_from_text,
    dictionary_to_text,
    tokenize,
    vectors_to_csr,
)

MODEL_FORMAT = "fieldalign-model"
MODEL_VERSION = 1

# Steps smaller than this cannot move float64 weights; treat as converged.
_MIN_STEP = 1e-300


@dataclass
class TrainConfig:
    """Hyperparameters for one training method; unrelated fields are ignored."""

    method: str = "asd"
    eta: float = 0.01
    reps: int = 2000
    epsilon: float = 1e-6
    k: int = 3
    l2_penalty: float = 0.0
    max_iters: int = 100000
    seed: int | None = None

    def __post_init__(self):
        if self.method not in ("sgd", "asd", "knn"):
            raise ConfigurationError(f"unknown training method {self.method!r}", module="classify")
        if self.method == "sgd":
            if self.eta <= 0:
                raise ConfigurationError("eta must be positive", module="classify")
            if self.reps < 1:
                raise ConfigurationError("reps must be a positive integer", module="classify")
        elif self.method == "asd":
            if self.epsilon <= 0:
                raise ConfigurationError("epsilon must be positive", module="classify")
        elif self.method == "knn":
            if self.k < 1:
                raise ConfigurationError("k must be a positive integer", module="classify")
        if self.l2_penalty < 0:
            raise ConfigurationError("l2_penalty must be nonnegative", module="classify")


@dataclass(frozen=True)
class PlrmModel:
    """Trained multinomial logistic model over a frozen feature dictionary."""

    classes: tuple[str, ...]
    weights: np.ndarray  # shape (n_classes, n_features)
    scheme: TokenizationScheme
    dictionary: FeatureDictionary
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights.shape != (len(self.classes), len(self.dictionary)):
            raise ConfigurationError(
                f"weights shape {self.weights.shape} does not match "
                f"{len(self.classes)} classes x {len(self.dictionary)} features",
                module="classify",
            )

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_index(self, label: str) -> int:
        return self.classes.index(label)


def _ordered_classes(examples: list[LabeledExample]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for ex in examples:
        seen.setdefault(ex.label, None)
    return tuple(seen)


def _prepare(examples, dictionary):
    if not examples:
        raise DegenerateTrainingError("no training examples")
    classes = _ordered_classes(examples)
    if len(classes) < 2:
        raise DegenerateTrainingError(f"need at least 2 distinct labels, got {len(classes)}")
    dictionary.freeze()
    n_features = len(dictionary)
    for ex in examples:
        if ex.vector.ids and ex.vector.ids[-1] >= n_features:
            raise ConfigurationError(
                "example references feature ids outside the dictionary", module="classify"
            )
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.array([class_index[ex.label] for ex in examples], dtype=np.int64)
    x = vectors_to_csr([ex.vector for ex in examples], n_features)
    return classes, x, y


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(scores: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(scores))


def objective(weights: np.ndarray, x: sparse.csr_matrix, y: np.ndarray, l2: float) -> float:
    """Mean log-likelihood minus l2 times the squared weight norm."""
    log_p = _log_softmax(x @ weights.T)
    fit = log_p[np.arange(len(y)), y].mean()
    return float(fit - l2 * float((weights * weights).sum()))


def objective_gradient(
    weights: np.ndarray, x: sparse.csr_matrix, y: np.ndarray, l2: float
) -> np.ndarray:
    """Gradient of ``objective`` with respect to the weight matrix."""
    prob = softmax(x @ weights.T)
    resid = -prob
    resid[np.arange(len(y)), y] += 1.0
    grad = (x.T @ resid).T / x.shape[0]
    if l2:
        grad -= 2.0 * l2 * weights
    return np.asarray(grad)


def train_sgd(
    examples: list[LabeledExample],
    dictionary: FeatureDictionary,
    scheme: TokenizationScheme,
    eta: float = 0.01,
    reps: int = 2000,
    l2: float = 0.0,
    seed: int | None = None,
) -> PlrmModel:
    """Per-example gradient steps, `reps` passes in fixed example order.

    Passing a seed shuffles the example order once per pass; the default
    (None) keeps the deterministic sequential order.
    """
    classes, x, y = _prepare(examples, dictionary)
    n, n_features = x.shape
    weights = np.zeros((len(classes), n_features))
    rng = np.random.default_rng(seed) if seed is not None else None
    order = np.arange(n)
    # Overflow is detected by the per-pass isfinite check, not by numpy
    # warnings, so the arithmetic itself can run silent.
    with np.errstate(over="ignore", invalid="ignore"):
        return _sgd_passes(
            classes, x, y, weights, eta, reps, l2, rng, order, scheme, dictionary, seed
        )


def _sgd_passes(classes, x, y, weights, eta, reps, l2, rng, order, scheme, dictionary, seed):
    indptr, indices, data = x.indptr, x.indices, x.data
    for rep in range(1, reps + 1):
        if rng is not None:
            rng.shuffle(order)
        for i in order:
            lo, hi = indptr[i], indptr[i + 1]
            ids = indices[lo:hi]
            counts = data[lo:hi]
            scores = weights[:, ids] @ counts
            scores -= scores.max()
            p = np.exp(scores)
            p /= p.sum()
            p = -p
            p[y[i]] += 1.0
            if l2:
                weights *= 1.0 - 2.0 * eta * l2
            weights[:, ids] += eta * np.outer(p, counts)
        if not np.isfinite(weights).all():
            raise DivergenceError("weights became non-finite during sgd", pass_number=rep)
    final = objective(weights, x, y, l2)
    if not np.isfinite(final):
        raise DivergenceError("objective became non-finite during sgd", pass_number=reps)
    meta = {
        "method": "sgd",
        "eta": eta,
        "reps": reps,
        "l2_penalty": l2,
        "seed": seed,
        "final_objective": final,
        "converged": True,
    }
    return PlrmModel(classes, weights, scheme, dictionary, meta)


def train_asd(
    examples: list[LabeledExample],
    dictionary: FeatureDictionary,
    scheme: TokenizationScheme,
    epsilon: float = 1e-6,
    l2: float = 0.0,
    max_iters: int = 100000,
) -> PlrmModel:
    """Full-batch steepest ascent with multiplicative step adaptation.

    Each iteration tries one step along the gradient: accepted steps grow
    the step size by 1.1x, rejected steps shrink it by half and leave the
    weights unchanged. Training stops when the relative improvement of an
    accepted step falls below epsilon, so for fixed data the iterate
    sequence is identical for every epsilon up to its own stopping point.
    """
    classes, x, y = _prepare(examples, dictionary)
    weights = np.zeros((len(classes), x.shape[1]))
    current = objective(weights, x, y, l2)
    step = 1.0
    converged = False
    iters_used = max_iters
    grad = None  # stays valid across rejected steps; weights did not move
    for it in range(1, max_iters + 1):
        if grad is None:
            grad = objective_gradient(weights, x, y, l2)
        candidate = weights + step * grad
        value = objective(candidate, x, y, l2)
        if not np.isfinite(value):
            step *= 0.5
            if step < _MIN_STEP:
                raise DivergenceError("objective is non-finite at any representable step", pass_number=it)
            continue
        if value > current:
            relative = (value - current) / max(abs(current), 1e-12)
            weights, current = candidate, value
            grad = None
            step *= 1.1
            if relative < epsilon:
                converged = True
                iters_used = it
                break
        else:
            step *= 0.5
            if step < _MIN_STEP:
                converged = True  # no representable step improves the objective
                iters_used = it
                break
    meta = {
        "method": "asd",
        "epsilon": epsilon,
        "l2_penalty": l2,
        "max_iters": max_iters,
        "iterations": iters_used,
        "final_objective": current,
        "converged": converged,
    }
    return PlrmModel(classes, weights, scheme, dictionary, meta)


def train(examples, dictionary, scheme, config: TrainConfig) -> PlrmModel:
    if config.method == "sgd":
        return train_sgd(
            examples, dictionary, scheme, config.eta, config.reps, config.l2_penalty, config.seed
        )
    if config.method == "asd":
        return train_asd(
            examples, dictionary, scheme, config.epsilon, config.l2_penalty, config.max_iters
        )
    raise ConfigurationError(f"method {config.method!r} does not produce a weight model", module="classify")


def predict_vector(model: PlrmModel, vector: FeatureVector) -> np.ndarray:
    """Class probabilities for one feature vector, aligned with model.classes.

    A vector with no known features scores zero for every class, which the
    softmax turns into the uniform distribution.
    """
    scores = np.zeros(model.n_classes)
    if vector.ids:
        ids = np.fromiter(vector.ids, dtype=np.int64, count=len(vector.ids))
        counts = np.fromiter(vector.counts, dtype=np.float64, count=len(vector.counts))
        scores = model.weights[:, ids] @ counts
    scores -= scores.max()
    p = np.exp(scores)
    return p / p.sum()


def predict(model: PlrmModel, cell: str) -> np.ndarray:
    vector = tokenize(cell, model.scheme, model.dictionary, frozen=True)
    return predict_vector(model, vector)


def predict_many(model: PlrmModel, vectors: list[FeatureVector]) -> np.ndarray:
    """Row-per-vector probability matrix, rows summing to 1."""
    x = vectors_to_csr(vectors, len(model.dictionary))
    return softmax(x @ model.weights.T)


class KnnModel:
    """Distance-weighted-free voting over the k nearest training examples.

    Distance is cosine distance over raw feature counts; an all-zero vector
    is at distance 1 from everything. Ties at the k-th distance are broken
    in favor of earlier training examples.
    """

    def __init__(self, train: list[LabeledExample], k: int, n_features: int | None = None):
        if not train:
            raise DegenerateTrainingError("knn needs a nonempty training set")
        if k < 1:
            raise ConfigurationError("k must be a positive integer", module="classify")
        if k > len(train):
            raise ConfigurationError(
                f"k={k} exceeds the {len(train)} training examples", module="classify"
            )
        self.k = k
        self.classes = _ordered_classes(train)
        if n_features is None:
            n_features = 1 + max((ex.vector.ids[-1] for ex in train if ex.vector.ids), default=-1)
        self.n_features = n_features
        class_index = {c: i for i, c in enumerate(self.classes)}
        self._y = np.array([class_index[ex.label] for ex in train], dtype=np.int64)
        self._x = vectors_to_csr([ex.vector for ex in train], n_features)
        norms = np.sqrt(np.asarray(self._x.multiply(self._x).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0  # zero rows then yield similarity 0 exactly
        self._inv_norms = 1.0 / norms

    def distances(self, vector: FeatureVector) -> np.ndarray:
        dense = np.zeros(self.n_features)
        for fid, count in zip(vector.ids, vector.counts):
            if fid < self.n_features:
                dense[fid] = count
        norm = np.sqrt((dense * dense).sum())
        if norm == 0:
            return np.ones(self._x.shape[0])
        sims = (self._x @ dense) * self._inv_norms / norm
        return 1.0 - sims

    def predict_vector(self, vector: FeatureVector) -> np.ndarray:
        dist = self.distances(vector)
        nearest = np.lexsort((np.arange(len(dist)), dist))[: self.k]
        probs = np.zeros(len(self.classes))
        for idx in nearest:
            probs[self._y[idx]] += 1.0
        return probs / self.k

    def predict_many(self, vectors: list[FeatureVector]) -> np.ndarray:
        return np.vstack([self.predict_vector(v) for v in vectors])


def knn_predict(train: list[LabeledExample], cell_vector: FeatureVector, k: int) -> np.ndarray:
    """Vote fractions of the k nearest training examples, in first-seen class order."""
    return KnnModel(train, k).predict_vector(cell_vector)


def save_model(model: PlrmModel, path) -> None:
    """Serialize to JSON with weights as base64 little-endian float64 bytes."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "scheme": str(model.scheme),
        "classes": list(model.classes),
        "weights": {
            "dtype": "<f8",
            "shape": list(model.weights.shape),
            "data": base64.b64encode(np.ascontiguousarray(model.weights, dtype="<f8").tobytes()).decode("ascii"),
        },
        "dictionary": dictionary_to_text(model.dictionary),
        "training_meta": model.training_meta,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1)
        handle.write("\n")


def load_model(path) -> PlrmModel:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != MODEL_FORMAT:
        raise ConfigurationError(f"{path} is not a serialized model", module="classify")
    if payload.get("version") != MODEL_VERSION:
        raise ConfigurationError(f"unsupported model version {payload.get('version')}", module="classify")
    scheme = TokenizationScheme.parse(payload["scheme"])
    dictionary = dictionary_from_text(payload["dictionary"], scheme).freeze()
    spec = payload["weights"]
    raw = base64.b64decode(spec["data"])
    weights = np.frombuffer(raw, dtype=spec["dtype"]).reshape(spec["shape"]).copy()
    return PlrmModel(
        classes=tuple(payload["classes"]),
        weights=weights,
        scheme=scheme,
        dictionary=dictionary,
        training_meta=payload["training_meta"],
    )
