"""Aggregation of per-cell class probabilities into column alignment matrices.

Rows of an alignment matrix are the columns of the scored (unlabeled) source,
columns are the columns of the training source. Values are kept in [0,1];
rendering as percentages is a report-layer concern.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classify import PlrmModel, TrainConfig, predict_many, train
from .errors import ConfigurationError, DivisionGuardError
from .featurize import (
    FeatureDictionary,
    TokenizationScheme,
    build_examples,
    tokenize,
)
from .ingest import NUL, Column, DataSource

METHOD_ARITH = "arith"
METHOD_GEOM = "geom"
METHOD_GEOM_EPS = "geom_eps"
METHOD_COSINE_RATIO = "cosine_ratio"
METHOD_SYM1 = "sym1"
METHOD_SYM2 = "sym2"
METHODS = (METHOD_ARITH, METHOD_GEOM, METHOD_GEOM_EPS, METHOD_COSINE_RATIO, METHOD_SYM1, METHOD_SYM2)

COMPARABILITY_FULL = "full"
COMPARABILITY_ROW_ONLY = "row_only"

DEFAULT_GEOM_EPSILON = 1e-6

MATRIX_FORMAT = "fieldalign-alignment"
MATRIX_VERSION = 1


@dataclass(frozen=True)
class CellScoreTable:
    """Per-cell probability vectors, grouped by column of the scored source.

    ``class_names`` are the training-source column names in model class
    order; ``probs[j]`` is an (n_j, n_classes) array for scored column j.
    """

    class_names: tuple[str, ...]
    columns: tuple[str, ...]
    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.columns) != len(self.probs):
            raise ConfigurationError("one probability block per column required", module="align")
        for name, block in zip(self.columns, self.probs):
            if block.ndim != 2 or block.shape[1] != len(self.class_names):
                raise ConfigurationError(f"block for {name!r} has wrong shape", module="align")

    def sizes(self) -> tuple[int, ...]:
        return tuple(block.shape[0] for block in self.probs)

    def mean_by_column(self) -> np.ndarray:
        """Arithmetic aggregate: row j holds the mean probability vector of column j."""
        return np.vstack([block.mean(axis=0) for block in self.probs])


@dataclass(frozen=True)
class AlignmentMatrix:
    """Column-to-column alignment scores of one aggregation method."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray
    method: str
    comparability: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise ConfigurationError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.rows)} rows x {len(self.cols)} cols",
                module="align",
            )
        if self.method not in METHODS and self.method != "js_profile":
            raise ConfigurationError(f"unknown method {self.method!r}", module="align")

    def row(self, name: str) -> np.ndarray:
        return self.values[self.rows.index(name)]

    def value(self, row: str, col: str) -> float:
        return float(self.values[self.rows.index(row), self.cols.index(col)])


def score_cells(
    model: PlrmModel, ds2: DataSource, class_names: tuple[str, ...] | None = None
) -> CellScoreTable:
    """Probability vectors for every cell of ds2 under a frozen model.

    ``class_names`` replaces the model's (qualified) class labels with
    display names, typically the bare training-source column names.
    """
    if class_names is None:
        class_names = model.classes
    elif len(class_names) != model.n_classes:
        raise ConfigurationError("class_names must match model classes", module="align")
    blocks = []
    for col in ds2.columns:
        vectors = [tokenize(cell, model.scheme, model.dictionary, frozen=True) for cell in col.cells]
        blocks.append(predict_many(model, vectors))
    return CellScoreTable(tuple(class_names), ds2.column_names, tuple(blocks))


def _geom_block(block: np.ndarray, epsilon: float | None) -> np.ndarray:
    """Geometric mean down the cell axis; exact zeros survive as exact zeros."""
    if epsilon is None:
        with np.errstate(divide="ignore"):
            logs = np.log(block)
        return np.exp(logs.mean(axis=0))
    return np.exp(np.log(block + epsilon).mean(axis=0))


def aggregate(
    scores: CellScoreTable,
    self_scores: CellScoreTable | None = None,
    method: str = METHOD_ARITH,
    sizes: tuple[int, ...] | None = None,
    epsilon: float | None = None,
) -> AlignmentMatrix:
    """Collapse per-cell probabilities into one alignment value per column pair.

    ``self_scores`` is the training source scored by its own model; it is
    required by cosine_ratio, whose denominators are the self-aggregates
    R(C_i, C_i). ``sizes`` are the per-training-column cell counts and
    default to the self_scores block sizes.
    """
    if method == METHOD_ARITH:
        return AlignmentMatrix(
            scores.columns, scores.class_names, scores.mean_by_column(), method, COMPARABILITY_FULL
        )
    if method == METHOD_GEOM:
        values = np.vstack([_geom_block(block, None) for block in scores.probs])
        return AlignmentMatrix(scores.columns, scores.class_names, values, method, COMPARABILITY_FULL)
    if method == METHOD_GEOM_EPS:
        eps = DEFAULT_GEOM_EPSILON if epsilon is None else epsilon
        if eps <= 0:
            raise ConfigurationError("geom_eps needs epsilon > 0", module="align")
        values = np.vstack([_geom_block(block, eps) for block in scores.probs])
        return AlignmentMatrix(
            scores.columns, scores.class_names, values, method, COMPARABILITY_FULL, {"epsilon": eps}
        )
    if method == METHOD_COSINE_RATIO:
        if self_scores is None:
            raise ConfigurationError("cosine_ratio needs self_scores for R(C_i, C_i)", module="align")
        self_agg = self_scores.mean_by_column()
        self_diag = np.diag(self_agg).copy()
        for name, value in zip(self_scores.columns, self_diag):
            if value == 0:
                raise DivisionGuardError(
                    f"self-aggregate of column {name!r} is 0; ratio undefined", module="align"
                )
        if sizes is None:
            sizes = self_scores.sizes()
        ratios = scores.mean_by_column() / np.sqrt(self_diag)[None, :]
        params: dict = {"sizes_equal": len(set(sizes)) == 1}
        if not params["sizes_equal"]:
            n1_total = float(sum(sizes))
            ratios = ratios * (n1_total / np.sqrt(np.asarray(sizes, dtype=float)))[None, :]
            params["n1_total"] = n1_total
        return AlignmentMatrix(
            scores.columns, scores.class_names, ratios, method, COMPARABILITY_ROW_ONLY, params
        )
    raise ConfigurationError(f"aggregate cannot produce method {method!r}", module="align")


def best_matches(matrix: AlignmentMatrix, top_k: int = 1) -> list[list[tuple[str, float]]]:
    """Per row, the top_k (column name, value) pairs.

    Sorted by descending value; equal values fall back to ascending column
    index so results are deterministic.
    """
    if top_k < 1:
        raise ConfigurationError("top_k must be >= 1", module="align")
    ranked = []
    n_cols = len(matrix.cols)
    for row in matrix.values:
        order = np.lexsort((np.arange(n_cols), -row))[:top_k]
        ranked.append([(matrix.cols[i], float(row[i])) for i in order])
    return ranked


def align_sources(
    ds1: DataSource,
    ds2: DataSource,
    scheme: TokenizationScheme,
    train_cfg: TrainConfig | None = None,
    methods: tuple[str, ...] = (METHOD_ARITH,),
    epsilon: float | None = None,
) -> dict[str, AlignmentMatrix]:
    """Train on ds1, score ds2, and aggregate by each requested method.

    Symmetric methods have their own pipelines (align_sym1/align_sym2) and
    are rejected here.
    """
    for method in methods:
        if method in (METHOD_SYM1, METHOD_SYM2):
            raise ConfigurationError(f"{method} requires its own pipeline", module="align")
        if method not in METHODS:
            raise ConfigurationError(f"unknown method {method!r}", module="align")
    model = train_model(ds1, scheme, train_cfg)
    scores = score_cells(model, ds2, ds1.column_names)
    needs_self = METHOD_COSINE_RATIO in methods
    self_scores = score_cells(model, ds1, ds1.column_names) if needs_self else None
    return {
        method: aggregate(scores, self_scores, method, epsilon=epsilon) for method in methods
    }


def train_model(
    ds: DataSource,
    scheme: TokenizationScheme,
    train_cfg: TrainConfig | None = None,
    qualifier: str | None = None,
) -> PlrmModel:
    """Build a fresh dictionary from ds and train the configured classifier."""
    cfg = train_cfg or TrainConfig()
    dictionary = FeatureDictionary()
    examples = build_examples(ds, scheme, dictionary, qualifier=qualifier)
    return train(examples, dictionary, scheme, cfg)


def _sym_ratio(cross_ab, cross_ba, self_a, self_b, names_a, names_b) -> np.ndarray:
    """sqrt(cross_ab * cross_ba / (self_a x self_b)), clipped into [0,1].

    cross_ab[j, i] = R(A_i | B_j), cross_ba[i, j] = R(B_j | A_i);
    self vectors hold the diagonal aggregates of each source.
    """
    for name, value in zip(names_a, self_a):
        if value == 0:
            raise DivisionGuardError(
                f"self-aggregate of training column {name!r} is 0", module="align"
            )
    for name, value in zip(names_b, self_b):
        if value == 0:
            raise DivisionGuardError(
                f"self-aggregate of scored column {name!r} is 0", module="align"
            )
    product = cross_ab * cross_ba.T / (self_a[None, :] * self_b[:, None])
    return np.clip(np.sqrt(product), 0.0, 1.0)


def align_sym1(
    ds1: DataSource,
    ds2: DataSource,
    scheme: TokenizationScheme,
    train_cfg: TrainConfig | None = None,
) -> AlignmentMatrix:
    """Symmetric alignment from a single model over both sources' columns.

    All M1+M2 columns become classes of one discrimination (labels qualified
    by source role, so same-named columns stay distinct), and every cross
    pair is scored by sqrt(R(C_i|C'_j) R(C'_j|C_i) / (R(C_i|C_i) R(C'_j|C'_j))).
    """
    cfg = train_cfg or TrainConfig()
    dictionary = FeatureDictionary()
    examples = build_examples(ds1, scheme, dictionary, qualifier="DS1")
    examples += build_examples(ds2, scheme, dictionary, qualifier="DS2")
    model = train(examples, dictionary, scheme, cfg)
    m1 = len(ds1.columns)
    scores1 = score_cells(model, ds1)  # blocks over all M1+M2 classes
    scores2 = score_cells(model, ds2)
    agg1 = scores1.mean_by_column()  # (M1, M1+M2)
    agg2 = scores2.mean_by_column()  # (M2, M1+M2)
    cross_ab = agg2[:, :m1]  # R(C_i | C'_j)
    cross_ba = agg1[:, m1:]  # R(C'_j | C_i)
    self_a = np.diag(agg1[:, :m1]).copy()
    self_b = np.diag(agg2[:, m1:]).copy()
    values = _sym_ratio(cross_ab, cross_ba, self_a, self_b, ds1.column_names, ds2.column_names)
    return AlignmentMatrix(
        ds2.column_names, ds1.column_names, values, METHOD_SYM1, COMPARABILITY_FULL
    )


def align_sym2(
    ds1: DataSource,
    ds2: DataSource,
    scheme: TokenizationScheme,
    train_cfg: TrainConfig | None = None,
) -> AlignmentMatrix:
    """Symmetric alignment from two independent models, one per source.

    Model A is trained on ds1 and supplies R(C_i|.), model B on ds2 and
    supplies R'(C'_j|.); the matrix is the normalized geometric cross ratio.
    """
    model_a = train_model(ds1, scheme, train_cfg, qualifier="DS1")
    model_b = train_model(ds2, scheme, train_cfg, qualifier="DS2")
    cross_ab = score_cells(model_a, ds2).mean_by_column()  # (M2, M1): R(C_i | C'_j)
    cross_ba = score_cells(model_b, ds1).mean_by_column()  # (M1, M2): R'(C'_j | C_i)
    self_a = np.diag(score_cells(model_a, ds1).mean_by_column()).copy()
    self_b = np.diag(score_cells(model_b, ds2).mean_by_column()).copy()
    values = _sym_ratio(cross_ab, cross_ba, self_a, self_b, ds1.column_names, ds2.column_names)
    return AlignmentMatrix(
        ds2.column_names, ds1.column_names, values, METHOD_SYM2, COMPARABILITY_FULL
    )


@dataclass(frozen=True)
class FieldProfile:
    """Three content distributions summarizing one column."""

    column: str
    gram1: dict[str, float]
    gram2: dict[str, float]
    lengths: dict[int, float]


def _normalize(counter: Counter, fallback_key) -> dict:
    total = sum(counter.values())
    if total == 0:
        return {fallback_key: 1.0}
    return {key: count / total for key, count in counter.items()}


def field_profile(column: Column) -> FieldProfile:
    """Character 1-gram, 2-gram, and cell-length distributions of a column.

    A NUL cell counts as the empty string: length 0 and no grams. A column
    with no characters at all keeps valid distributions by putting all the
    gram mass on the reserved NUL sentinel.
    """
    gram1: Counter = Counter()
    gram2: Counter = Counter()
    lengths: Counter = Counter()
    for cell in column.cells:
        text = "" if cell == NUL else cell
        lengths[len(text)] += 1
        for ch in text:
            gram1[ch] += 1
        for i in range(len(text) - 1):
            gram2[text[i : i + 2]] += 1
    return FieldProfile(
        column.name,
        _normalize(gram1, NUL),
        _normalize(gram2, NUL),
        _normalize(lengths, 0),
    )


def _js_divergence(p: dict, q: dict) -> float:
    """Jensen-Shannon divergence, natural log, bounded by ln 2."""
    keys = set(p) | set(q)
    total = 0.0
    for key in keys:
        pk = p.get(key, 0.0)
        qk = q.get(key, 0.0)
        mk = 0.5 * (pk + qk)
        if pk > 0:
            total += 0.5 * pk * math.log(pk / mk)
        if qk > 0:
            total += 0.5 * qk * math.log(qk / mk)
    return min(total, math.log(2.0))


def profile_distance(a: FieldProfile, b: FieldProfile) -> float:
    """Mean Jensen-Shannon divergence of the three paired distributions."""
    return (
        _js_divergence(a.gram1, b.gram1)
        + _js_divergence(a.gram2, b.gram2)
        + _js_divergence(a.lengths, b.lengths)
    ) / 3.0


def matrix_to_csv(matrix: AlignmentMatrix) -> str:
    """Plain grid: header row of training columns, one line per scored column."""
    lines = ["," + ",".join(matrix.cols)]
    for name, row in zip(matrix.rows, matrix.values):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def matrix_to_json(matrix: AlignmentMatrix) -> str:
    payload = {
        "format": MATRIX_FORMAT,
        "version": MATRIX_VERSION,
        "method": matrix.method,
        "comparability": matrix.comparability,
        "params": matrix.params,
        "rows": list(matrix.rows),
        "cols": list(matrix.cols),
        "values": [[float(v) for v in row] for row in matrix.values],
    }
    return json.dumps(payload, indent=1) + "\n"


def matrix_from_json(text: str) -> AlignmentMatrix:
    payload = json.loads(text)
    if payload.get("format") != MATRIX_FORMAT:
        raise ConfigurationError("not a serialized alignment matrix", module="align")
    if payload.get("version") != MATRIX_VERSION:
        raise ConfigurationError(
            f"unsupported alignment matrix version {payload.get('version')}", module="align"
        )
    return AlignmentMatrix(
        rows=tuple(payload["rows"]),
        cols=tuple(payload["cols"]),
        values=np.array(payload["values"], dtype=float).reshape(len(payload["rows"]), len(payload["cols"])),
        method=payload["method"],
        comparability=payload["comparability"],
        params=payload.get("params", {}),
    )
