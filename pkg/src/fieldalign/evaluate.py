"""Scoring of alignment matrices: top-k accuracy, confidence, 1-to-1 matching."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .align import AlignmentMatrix, best_matches
from .classify import PlrmModel, predict_many
from .errors import (
    ConfigurationError,
    InfeasibleMatchingError,
    UnknownLabelError,
)
from .featurize import LabeledExample

MODE_SUM = "sum"
MODE_LOG_PRODUCT = "log_product"
MATCHING_MODES = (MODE_SUM, MODE_LOG_PRODUCT)


@dataclass(frozen=True)
class GroundTruth:
    """Correct DS2-column to DS1-column correspondence; many-to-one allowed."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        seen = set()
        for ds2_col, _ in self.pairs:
            if ds2_col in seen:
                raise ConfigurationError(
                    f"ground truth maps column {ds2_col!r} twice", module="evaluate"
                )
            seen.add(ds2_col)

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def load_ground_truth(path) -> GroundTruth:
    """Two-column headerless CSV: ds2_column, ds1_column."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    pairs = []
    for lineno, row in enumerate(rows, start=1):
        if not row:
            continue
        if len(row) != 2:
            raise ConfigurationError(
                f"ground truth line {lineno}: expected 2 columns, got {len(row)}",
                module="evaluate",
            )
        pairs.append((row[0], row[1]))
    if not pairs:
        raise ConfigurationError("ground truth file has no pairs", module="evaluate")
    return GroundTruth(tuple(pairs))


@dataclass(frozen=True)
class TopKReport:
    """How often the correct column appears among the top k candidates."""

    ks: tuple[int, ...]
    counts: tuple[int, ...]
    total: int
    skipped_rows: tuple[str, ...] = ()

    def formatted(self) -> str:
        """The counts joined as "x/y/z"."""
        return "/".join(str(c) for c in self.counts)


def topk_score(matrix: AlignmentMatrix, truth: GroundTruth, ks: tuple[int, ...] = (1, 2, 3)) -> TopKReport:
    """Count rows whose true column ranks within each k, using best_matches order.

    Rows of the matrix missing from the truth are skipped and listed in the
    report. Truth entries for rows outside the matrix are ignored.
    """
    if not truth.pairs:
        raise ConfigurationError("ground truth is empty", module="evaluate")
    if any(k < 1 for k in ks):
        raise ConfigurationError("every k must be >= 1", module="evaluate")
    mapping = truth.as_dict()
    col_set = set(matrix.cols)
    for ds2_col, ds1_col in truth.pairs:
        if ds2_col in matrix.rows and ds1_col not in col_set:
            raise UnknownLabelError(
                f"truth maps {ds2_col!r} to unknown column {ds1_col!r}"
            )
    ranked = best_matches(matrix, top_k=max(ks))
    counts = [0] * len(ks)
    total = 0
    skipped = []
    for row_name, row_ranked in zip(matrix.rows, ranked):
        if row_name not in mapping:
            skipped.append(row_name)
            continue
        total += 1
        names = [name for name, _ in row_ranked]
        try:
            rank = names.index(mapping[row_name]) + 1
        except ValueError:
            continue
        for slot, k in enumerate(ks):
            if rank <= k:
                counts[slot] += 1
    if total == 0:
        raise ConfigurationError("ground truth covers no row of the matrix", module="evaluate")
    return TopKReport(tuple(ks), tuple(counts), total, tuple(skipped))


@dataclass(frozen=True)
class SelfLikelihood:
    """Mean (and mean-log) probability the model assigns to the true class."""

    lin_lik: float
    log_lik: float

    @property
    def saturated(self) -> bool:
        """True when every example was assigned probability 1 (the upper bound)."""
        return self.lin_lik >= 1.0 - 1e-12


def self_likelihood(model: PlrmModel, examples: list[LabeledExample]) -> SelfLikelihood:
    if not examples:
        raise ConfigurationError("no examples to evaluate", module="evaluate")
    index = {c: i for i, c in enumerate(model.classes)}
    try:
        y = np.array([index[ex.label] for ex in examples], dtype=np.int64)
    except KeyError as exc:
        raise UnknownLabelError(f"label {exc.args[0]!r} is not a model class") from None
    probs = predict_many(model, [ex.vector for ex in examples])
    correct = probs[np.arange(len(y)), y]
    with np.errstate(divide="ignore"):
        logs = np.log(correct)
    return SelfLikelihood(float(correct.mean()), float(logs.mean()))


@dataclass(frozen=True)
class MatchingAssignment:
    """Injective row-to-column assignment and its objective value."""

    mapping: tuple[tuple[str, str], ...]
    objective: float
    mode: str

    def as_dict(self) -> dict[str, str]:
        return dict(self.mapping)


def one_to_one_matching(matrix: AlignmentMatrix, mode: str = MODE_SUM) -> MatchingAssignment:
    """Best injective assignment of scored rows to training columns.

    sum mode maximizes the total of the selected values; log_product mode
    maximizes their product, so any selectable zero entry is forbidden.
    """
    if mode not in MATCHING_MODES:
        raise ConfigurationError(f"unknown matching mode {mode!r}", module="evaluate")
    n_rows, n_cols = matrix.values.shape
    if n_rows > n_cols:
        raise InfeasibleMatchingError(
            f"{n_rows} rows cannot map 1-to-1 into {n_cols} columns"
        )
    if mode == MODE_SUM:
        cost = -matrix.values
    else:
        for name, row in zip(matrix.rows, matrix.values):
            if not (row > 0).any():
                raise InfeasibleMatchingError(
                    f"row {name!r} is entirely zero; its product term cannot be positive"
                )
        with np.errstate(divide="ignore"):
            cost = -np.log(matrix.values)
    try:
        row_idx, col_idx = linear_sum_assignment(cost)
    except ValueError:
        raise InfeasibleMatchingError(
            "no assignment avoids zero entries in log_product mode"
        ) from None
    selected = matrix.values[row_idx, col_idx]
    if mode == MODE_LOG_PRODUCT:
        if (selected == 0).any():
            raise InfeasibleMatchingError(
                "no assignment avoids zero entries in log_product mode"
            )
        objective = float(np.log(selected).sum())
    else:
        objective = float(selected.sum())
    mapping = tuple(
        (matrix.rows[r], matrix.cols[c]) for r, c in sorted(zip(row_idx, col_idx))
    )
    return MatchingAssignment(mapping, objective, mode)


@dataclass(frozen=True)
class ConfidenceReport:
    """Self-confidence measures; fields are None when not computed."""

    lin_lik: float | None = None
    log_lik: float | None = None
    l1_to_assignment: float | None = None
    matching: MatchingAssignment | None = None
    normalized: bool = False
    extras: dict = field(default_factory=dict)


def _row_stochastic(matrix: AlignmentMatrix) -> tuple[np.ndarray, bool]:
    """Rows as probability vectors; non-arith matrices get row-normalized."""
    if matrix.method == "arith":
        return matrix.values, False
    values = matrix.values.astype(float).copy()
    sums = values.sum(axis=1)
    uniform = 1.0 / values.shape[1]
    for j, total in enumerate(sums):
        if total <= 0:
            values[j, :] = uniform
        else:
            values[j, :] /= total
    return values, True


def l1_confidence(matrix: AlignmentMatrix, one_to_one: bool = False) -> ConfidenceReport:
    """L1 distance from the (row-stochastic) matrix to the nearest 0/1 assignment.

    Without the 1-to-1 constraint the nearest assignment puts each row's 1
    at its argmax; with it, the assignment comes from one_to_one_matching
    in sum mode, which minimizes the same distance.
    """
    h, normalized = _row_stochastic(matrix)
    n_rows, n_cols = h.shape
    matching = None
    if one_to_one:
        stoch = AlignmentMatrix(
            matrix.rows, matrix.cols, h, "arith", "full", dict(matrix.params)
        )
        matching = one_to_one_matching(stoch, MODE_SUM)
        col_index = {c: i for i, c in enumerate(matrix.cols)}
        q = np.zeros_like(h)
        for row_name, col_name in matching.mapping:
            q[matrix.rows.index(row_name), col_index[col_name]] = 1.0
    else:
        q = np.zeros_like(h)
        q[np.arange(n_rows), h.argmax(axis=1)] = 1.0
    distance = float(np.abs(q - h).sum())
    return ConfidenceReport(
        l1_to_assignment=distance, matching=matching, normalized=normalized
    )


def topk_report_text(method: str, report: TopKReport) -> str:
    """One-line rendering: method name, x/y/z triple, total, skips."""
    text = f"{method}: {report.formatted()} of {report.total}"
    if report.skipped_rows:
        text += f" (skipped: {', '.join(report.skipped_rows)})"
    return text
