"""Command-line pipeline: load two tables, align their columns, report.

Subcommands: align (train/test pair), sym1/sym2 (symmetric pair), eval
(score a saved matrix against ground truth), profile (distribution-level
column comparison without training).

Exit codes: 0 success, 2 usage, 3 data/configuration error, 4 numeric or
infeasibility error. Matrix files keep full float precision; only the
human-readable report rounds (values are shown as percentages there).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import align as al
from . import evaluate as ev
from .align import (
    AlignmentMatrix,
    CellScoreTable,
    aggregate,
    align_sym1,
    align_sym2,
    best_matches,
    field_profile,
    matrix_from_json,
    matrix_to_csv,
    matrix_to_json,
    profile_distance,
    score_cells,
    train_model,
)
from .classify import KnnModel, TrainConfig
from .errors import ConfigurationError, FieldAlignError
from .featurize import FeatureDictionary, TokenizationScheme, build_examples, tokenize
from .ingest import EMPTY_IS_NUL, FORMATS, NUL_POLICIES, DataSource, load_table

OUT_DIR_ENV = "FIELDALIGN_OUT_DIR"

AGG_ALIASES = {"cosine": al.METHOD_COSINE_RATIO}


def parse_classifier(spec: str, seed: int | None = None) -> TrainConfig:
    """Single-token classifier spec: sgd:ETA:REPS[:L2], asd:EPS[:L2], knn:K.

    ``seed`` shuffles the SGD example order per pass; the other methods are
    deterministic and ignore it.
    """
    parts = spec.split(":")
    name = parts[0]
    try:
        if name == "sgd":
            if len(parts) not in (3, 4):
                raise ConfigurationError("sgd spec is sgd:ETA:REPS[:L2]", module="cli")
            return TrainConfig(
                method="sgd",
                eta=float(parts[1]),
                reps=int(parts[2]),
                l2_penalty=float(parts[3]) if len(parts) == 4 else 0.0,
                seed=seed,
            )
        if name == "asd":
            if len(parts) not in (2, 3):
                raise ConfigurationError("asd spec is asd:EPS[:L2]", module="cli")
            return TrainConfig(
                method="asd",
                epsilon=float(parts[1]),
                l2_penalty=float(parts[2]) if len(parts) == 3 else 0.0,
            )
        if name == "knn":
            if len(parts) != 2:
                raise ConfigurationError("knn spec is knn:K", module="cli")
            return TrainConfig(method="knn", k=int(parts[1]))
    except ValueError:
        raise ConfigurationError(f"bad number in classifier spec {spec!r}", module="cli") from None
    raise ConfigurationError(f"unknown classifier {name!r} in {spec!r}", module="cli")


def parse_agg(text: str) -> tuple[str, ...]:
    methods = []
    for raw in text.split(","):
        name = AGG_ALIASES.get(raw.strip(), raw.strip())
        if name not in (al.METHOD_ARITH, al.METHOD_GEOM, al.METHOD_GEOM_EPS, al.METHOD_COSINE_RATIO):
            raise ConfigurationError(f"unknown aggregation method {raw.strip()!r}", module="cli")
        if name not in methods:
            methods.append(name)
    if not methods:
        raise ConfigurationError("no aggregation methods selected", module="cli")
    return tuple(methods)


def write_text_atomic(path: Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_dir(args) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else Path.cwd()


def _load(args, path: str) -> DataSource:
    return load_table(path, format=args.format, nul_policy=args.nul_policy)


def _percent(value: float) -> str:
    return f"{value * 100:.1f}"


def score_cells_knn(
    model: KnnModel,
    scheme: TokenizationScheme,
    dictionary: FeatureDictionary,
    ds: DataSource,
    class_names: tuple[str, ...],
) -> CellScoreTable:
    blocks = []
    for col in ds.columns:
        vectors = [tokenize(cell, scheme, dictionary, frozen=True) for cell in col.cells]
        blocks.append(model.predict_many(vectors))
    return CellScoreTable(class_names, ds.column_names, tuple(blocks))


def _matrix_report_lines(matrix: AlignmentMatrix, top_k: int = 3) -> list[str]:
    lines = [f"method {matrix.method} (comparability: {matrix.comparability})"]
    for row_name, candidates in zip(matrix.rows, best_matches(matrix, top_k)):
        rendered = ", ".join(f"{name} {_percent(value)}" for name, value in candidates)
        lines.append(f"  {row_name}: {rendered}")
    return lines


def _write_matrix(matrix: AlignmentMatrix, out_dir: Path) -> list[Path]:
    csv_path = out_dir / f"alignment_{matrix.method}.csv"
    json_path = out_dir / f"alignment_{matrix.method}.json"
    write_text_atomic(csv_path, matrix_to_csv(matrix))
    write_text_atomic(json_path, matrix_to_json(matrix))
    return [csv_path, json_path]


def _evaluate_matrix(matrix: AlignmentMatrix, truth: ev.GroundTruth, args, lines: list[str]) -> None:
    report = ev.topk_score(matrix, truth)
    lines.append(ev.topk_report_text(matrix.method, report))
    if args.confidence:
        conf = ev.l1_confidence(matrix, one_to_one=args.one_to_one)
        detail = f"l1-to-assignment {conf.l1_to_assignment:.6f}"
        if conf.normalized:
            detail += " (rows renormalized)"
        if conf.matching is not None:
            detail += f"; 1-to-1 objective {conf.matching.objective:.6f}"
        lines.append(f"confidence {matrix.method}: {detail}")


def _cmd_align(args) -> int:
    ds1 = _load(args, args.train)
    ds2 = _load(args, args.test)
    scheme = TokenizationScheme.parse(args.scheme)
    cfg = parse_classifier(args.classifier, seed=args.seed)
    methods = parse_agg(args.agg)
    out_dir = _out_dir(args)
    if cfg.method == "knn":
        dictionary = FeatureDictionary()
        examples = build_examples(ds1, scheme, dictionary)
        dictionary.freeze()
        model = KnnModel(examples, cfg.k, n_features=len(dictionary))
        scores = score_cells_knn(model, scheme, dictionary, ds2, ds1.column_names)
        self_scores = (
            score_cells_knn(model, scheme, dictionary, ds1, ds1.column_names)
            if al.METHOD_COSINE_RATIO in methods
            else None
        )
        matrices = {m: aggregate(scores, self_scores, m, epsilon=args.epsilon) for m in methods}
    else:
        model = train_model(ds1, scheme, cfg)
        scores = score_cells(model, ds2, ds1.column_names)
        self_scores = (
            score_cells(model, ds1, ds1.column_names)
            if al.METHOD_COSINE_RATIO in methods
            else None
        )
        matrices = {m: aggregate(scores, self_scores, m, epsilon=args.epsilon) for m in methods}
    lines = [
        f"train: {ds1.name} ({len(ds1.columns)} columns, {ds1.total_cells} cells)",
        f"test: {ds2.name} ({len(ds2.columns)} columns, {ds2.total_cells} cells)",
        f"scheme: {scheme}  classifier: {args.classifier}",
    ]
    truth = ev.load_ground_truth(args.truth) if args.truth else None
    for method in methods:
        matrix = matrices[method]
        for path in _write_matrix(matrix, out_dir):
            lines.append(f"wrote {path.name}")
        lines.extend(_matrix_report_lines(matrix))
        if truth is not None:
            _evaluate_matrix(matrix, truth, args, lines)
    report = "\n".join(lines) + "\n"
    write_text_atomic(out_dir / "report.txt", report)
    sys.stdout.write(report)
    return 0


def _cmd_sym(args, which: str) -> int:
    ds1 = _load(args, args.first)
    ds2 = _load(args, args.second)
    scheme = TokenizationScheme.parse(args.scheme)
    cfg = parse_classifier(args.classifier, seed=args.seed)
    if cfg.method == "knn":
        raise ConfigurationError("symmetric alignment needs a trained model (sgd or asd)", module="cli")
    runner = align_sym1 if which == "sym1" else align_sym2
    matrix = runner(ds1, ds2, scheme, cfg)
    out_dir = _out_dir(args)
    lines = [
        f"first: {ds1.name} ({len(ds1.columns)} columns)",
        f"second: {ds2.name} ({len(ds2.columns)} columns)",
        f"scheme: {scheme}  classifier: {args.classifier}",
    ]
    for path in _write_matrix(matrix, out_dir):
        lines.append(f"wrote {path.name}")
    lines.extend(_matrix_report_lines(matrix))
    if args.truth:
        truth = ev.load_ground_truth(args.truth)
        _evaluate_matrix(matrix, truth, args, lines)
    report = "\n".join(lines) + "\n"
    write_text_atomic(out_dir / "report.txt", report)
    sys.stdout.write(report)
    return 0


def _cmd_eval(args) -> int:
    with open(args.matrix, "r", encoding="utf-8") as handle:
        matrix = matrix_from_json(handle.read())
    truth = ev.load_ground_truth(args.truth)
    ks = tuple(int(k) for k in args.ks.split(","))
    report = ev.topk_score(matrix, truth, ks)
    lines = [ev.topk_report_text(matrix.method, report)]
    if args.confidence:
        conf = ev.l1_confidence(matrix, one_to_one=args.one_to_one)
        detail = f"l1-to-assignment {conf.l1_to_assignment:.6f}"
        if conf.normalized:
            detail += " (rows renormalized)"
        if conf.matching is not None:
            detail += f"; 1-to-1 objective {conf.matching.objective:.6f}"
            pairs = ", ".join(f"{r}->{c}" for r, c in conf.matching.mapping)
            detail += f"; assignment {pairs}"
        lines.append(f"confidence {matrix.method}: {detail}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _cmd_profile(args) -> int:
    ds1 = _load(args, args.first)
    ds2 = _load(args, args.second)
    profiles1 = [field_profile(col) for col in ds1.columns]
    profiles2 = [field_profile(col) for col in ds2.columns]
    out_dir = _out_dir(args)
    header = "," + ",".join(p.column for p in profiles1)
    lines_csv = [header]
    report_lines = [f"profile distance: {ds2.name} rows vs {ds1.name} columns (lower is closer)"]
    for p2 in profiles2:
        distances = [profile_distance(p1, p2) for p1 in profiles1]
        lines_csv.append(p2.column + "," + ",".join(repr(d) for d in distances))
        order = sorted(range(len(distances)), key=lambda i: (distances[i], i))
        top = ", ".join(f"{profiles1[i].column} {distances[i]:.4f}" for i in order[:3])
        report_lines.append(f"  {p2.column}: {top}")
    csv_path = out_dir / "profile_distance.csv"
    write_text_atomic(csv_path, "\n".join(lines_csv) + "\n")
    report_lines.append(f"wrote {csv_path.name}")
    sys.stdout.write("\n".join(report_lines) + "\n")
    return 0


def _add_common_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=FORMATS, default="csv", help="input table format")
    parser.add_argument(
        "--nul-policy",
        choices=NUL_POLICIES,
        default=EMPTY_IS_NUL,
        help="treat empty cells as the reserved NUL value, or drop them",
    )
    parser.add_argument("--scheme", default="e1-w1-g2", help="tokenization scheme, e.g. e1-w1-g2")
    parser.add_argument(
        "--classifier",
        default="asd:1e-6",
        help="classifier spec: sgd:ETA:REPS[:L2], asd:EPS[:L2], or knn:K",
    )
    parser.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
    parser.add_argument("--truth", default=None, help="ground-truth CSV: ds2_column,ds1_column")
    parser.add_argument("--confidence", action="store_true", help="add confidence measures to the report")
    parser.add_argument("--one-to-one", action="store_true", help="confidence uses the optimal 1-to-1 assignment")
    parser.add_argument("--seed", type=int, default=None, help="per-pass example shuffle for sgd (other classifiers ignore it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldalign",
        description="Content-based column alignment between two tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="train on one table, score another")
    p_align.add_argument("--train", required=True, help="labeled training table")
    p_align.add_argument("--test", required=True, help="table whose columns get aligned")
    p_align.add_argument(
        "--agg",
        default="arith",
        help="comma list of arith,geom,geom_eps,cosine",
    )
    p_align.add_argument("--epsilon", type=float, default=None, help="smoothing for geom_eps")
    _add_common_io(p_align)
    p_align.set_defaults(func=_cmd_align)

    for name in ("sym1", "sym2"):
        p_sym = sub.add_parser(name, help=f"symmetric alignment ({name})")
        p_sym.add_argument("first", help="first table")
        p_sym.add_argument("second", help="second table")
        _add_common_io(p_sym)
        p_sym.set_defaults(func=lambda args, _n=name: _cmd_sym(args, _n))

    p_eval = sub.add_parser("eval", help="score a saved alignment matrix against ground truth")
    p_eval.add_argument("--matrix", required=True, help="alignment matrix JSON file")
    p_eval.add_argument("--truth", required=True, help="ground-truth CSV")
    p_eval.add_argument("--ks", default="1,2,3", help="comma list of k values")
    p_eval.add_argument("--confidence", action="store_true")
    p_eval.add_argument("--one-to-one", action="store_true")
    p_eval.set_defaults(func=_cmd_eval)

    p_prof = sub.add_parser("profile", help="distribution-level column comparison (no training)")
    p_prof.add_argument("first", help="first table")
    p_prof.add_argument("second", help="second table")
    p_prof.add_argument("--format", choices=FORMATS, default="csv")
    p_prof.add_argument(
        "--nul-policy", choices=NUL_POLICIES, default=EMPTY_IS_NUL
    )
    p_prof.add_argument("--out-dir", default=None)
    p_prof.set_defaults(func=_cmd_profile)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FieldAlignError as exc:
        sys.stderr.write(f"{exc.module}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"io: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
