"""Acceptance gate: one test per headline guarantee of the package.

Each test prints a single ``[acceptance] PASS/FAIL <name>`` line so the
whole gate can be read off a ``pytest -s`` run at a glance. Criteria with a
runtime budget fail when they blow it, not just when a value is wrong.
"""

import io
import json
import threading
import time
from contextlib import contextmanager, redirect_stdout

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy import sparse

from fieldalign.align import (
    COMPARABILITY_FULL,
    AlignmentMatrix,
    CellScoreTable,
    aggregate,
    align_sources,
    align_sym1,
    align_sym2,
    score_cells,
    train_model,
)
from fieldalign.classify import TrainConfig, objective_gradient, predict
from fieldalign.cli import main as cli_main
from fieldalign.evaluate import GroundTruth, l1_confidence, one_to_one_matching, topk_score
from fieldalign.featurize import TokenizationScheme
from fieldalign.ingest import Column, DataSource
from fieldalign.service import create_app, replay_log
from fieldalign.synthetic import (
    assumption1_source,
    experiment_half,
    experiment_truth,
    sym_demo_source,
    write_csv,
)

from oracles import brute_force_matching, counting_probabilities, finite_difference_gradient

SCHEME = TokenizationScheme.parse("e1-w1-g0")


@contextmanager
def criterion(name: str, budget: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] FAIL {name}")
        raise
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        print(f"[acceptance] FAIL {name} ({elapsed:.1f}s over its {budget:.0f}s budget)")
        pytest.fail(f"{name} took {elapsed:.1f}s, budget {budget:.0f}s")
    print(f"[acceptance] PASS {name} ({elapsed:.2f}s)")


@pytest.fixture(scope="module")
def halves():
    return experiment_half("march"), experiment_half("april")


def test_criterion_01_counting_probability_recovery():
    # On single-token columns the optimal classifier is occurrence counting,
    # so tightly trained probabilities must land on those fractions.
    with criterion("counting-probability recovery", budget=30.0):
        ds = assumption1_source()
        model = train_model(ds, SCHEME, TrainConfig(method="asd", epsilon=1e-8))
        order = [model.classes.index(f"{ds.name}.{name}") for name in ds.column_names]
        worst = 0.0
        for value, fractions in counting_probabilities(ds).items():
            probs = predict(model, value)[order]
            worst = max(worst, float(np.abs(probs - fractions).max()))
        assert worst < 0.02, f"max abs error {worst:.5f}"


def test_criterion_02_analytic_gradient():
    with criterion("analytic gradient vs finite differences", budget=1.0):
        rng = np.random.default_rng(5)
        x = sparse.csr_matrix(rng.random((12, 5)) * (rng.random((12, 5)) < 0.7))
        y = np.array([i % 3 for i in range(12)])
        weights = rng.normal(size=(3, 5))
        for l2 in (0.0, 0.05):
            analytic = objective_gradient(weights, x, y, l2)
            numeric = finite_difference_gradient(weights, x, y, l2)
            rel = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1.0)
            assert rel < 1e-4, f"relative error {rel:.2e} at l2={l2}"


def test_criterion_03_aggregation_algebra():
    with criterion("aggregation algebra on random score tables", budget=5.0):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n_classes = int(rng.integers(2, 7))
            blocks = []
            for _col in range(int(rng.integers(1, 4))):
                block = rng.dirichlet(np.ones(n_classes), size=int(rng.integers(2, 9)))
                # Zero at most one entry per cell so rows stay normalizable.
                for row in block:
                    if rng.random() < 0.3:
                        row[rng.integers(n_classes)] = 0.0
                        row /= row.sum()
                blocks.append(block)
            table = CellScoreTable(
                tuple(f"k{i}" for i in range(n_classes)),
                tuple(f"c{j}" for j in range(len(blocks))),
                tuple(blocks),
            )
            arith = aggregate(table, method="arith").values
            geom = aggregate(table, method="geom").values
            geom_eps = aggregate(table, method="geom_eps", epsilon=1e-6).values
            assert np.abs(arith.sum(axis=1) - 1.0).max() < 1e-6
            assert (geom <= arith + 1e-12).all()
            assert (geom_eps >= geom - 1e-12).all()
            for j, block in enumerate(blocks):
                annihilated = (block == 0.0).any(axis=0)
                assert (geom[j, annihilated] == 0.0).all()


def test_criterion_04_size_corrected_ratio():
    with criterion("half-sized duplicate column proportionality"):
        ds1 = DataSource(
            "one",
            (
                Column("big", ("x",) * 20),
                Column("half", ("x",) * 10),
                Column("other", ("y",) * 15),
            ),
        )
        ds2 = DataSource("two", (Column("probe", ("x",) * 8),))
        model = train_model(ds1, SCHEME, TrainConfig(method="asd", epsilon=1e-8))
        scores = score_cells(model, ds2, ds1.column_names)
        self_scores = score_cells(model, ds1, ds1.column_names)
        arith = aggregate(scores, method="arith")
        ratio = arith.value("probe", "half") / arith.value("probe", "big")
        assert ratio == pytest.approx(0.5, abs=0.02)
        cosine = aggregate(scores, self_scores, method="cosine_ratio")
        assert cosine.value("probe", "half") == pytest.approx(
            cosine.value("probe", "big"), abs=0.02
        )


def test_criterion_05_symmetric_self_alignment():
    with criterion("symmetric methods on a mirrored source", budget=60.0):
        ds = sym_demo_source()
        cfg = TrainConfig(method="asd", epsilon=1e-8)
        for runner in (align_sym1, align_sym2):
            values = runner(ds, ds, SCHEME, cfg).values
            asym = float(np.abs(values - values.T).max())
            diag = float(np.abs(np.diag(values) - 1.0).max())
            assert asym <= 1e-6, f"{runner.__name__} asymmetry {asym:.2e}"
            assert diag <= 1e-6, f"{runner.__name__} diagonal error {diag:.2e}"


def test_criterion_06_matching_against_exhaustive_search():
    with criterion("1-to-1 matching vs exhaustive search", budget=10.0):
        rng = np.random.default_rng(29)
        rows = tuple(f"r{j}" for j in range(6))
        cols = tuple(f"c{i}" for i in range(6))
        for _ in range(50):
            values = rng.uniform(0.05, 1.0, size=(6, 6))
            matrix = AlignmentMatrix(rows, cols, values, "arith", COMPARABILITY_FULL)
            for mode in ("sum", "log_product"):
                got = one_to_one_matching(matrix, mode)
                expected_cols, expected_obj = brute_force_matching(values, mode)
                assert [c for _, c in got.mapping] == [cols[i] for i in expected_cols]
                assert got.objective == pytest.approx(expected_obj, abs=1e-9)


def test_criterion_07_l1_confidence_closed_form():
    with criterion("L1 confidence closed form"):
        rng = np.random.default_rng(31)
        for _ in range(20):
            n_rows = int(rng.integers(2, 7))
            n_cols = int(rng.integers(2, 7))
            values = rng.dirichlet(np.ones(n_cols), size=n_rows)
            matrix = AlignmentMatrix(
                tuple(f"r{j}" for j in range(n_rows)),
                tuple(f"c{i}" for i in range(n_cols)),
                values,
                "arith",
                COMPARABILITY_FULL,
            )
            closed = 2.0 * float((1.0 - values.max(axis=1)).sum())
            got = l1_confidence(matrix).l1_to_assignment
            assert got == pytest.approx(closed, abs=1e-9)
        perm = np.eye(4)[[2, 0, 3, 1]]
        names = ("p0", "p1", "p2", "p3")
        matrix = AlignmentMatrix(names, names, perm, "arith", COMPARABILITY_FULL)
        assert l1_confidence(matrix).l1_to_assignment == pytest.approx(0.0, abs=1e-9)
        uniform = AlignmentMatrix(
            names, names, np.full((4, 4), 0.25), "arith", COMPARABILITY_FULL
        )
        assert l1_confidence(uniform).l1_to_assignment == pytest.approx(6.0, abs=1e-9)


def test_criterion_08_synthetic_experiment(halves):
    # Same-source alignment should be near perfect; across drifted halves the
    # multiplicative aggregate must beat plain averaging on top-1 hits.
    with criterion("synthetic two-half experiment", budget=120.0):
        march, april = halves
        cfg = TrainConfig(method="asd", epsilon=1e-7)
        truth = GroundTruth(tuple(experiment_truth()))
        self_matrix = align_sources(march, march, SCHEME, cfg, methods=("cosine_ratio",))
        self_report = topk_score(self_matrix["cosine_ratio"], truth)
        assert self_report.counts == (12, 12, 12), f"self {self_report.formatted()}"
        cross = align_sources(march, april, SCHEME, cfg, methods=("arith", "geom"))
        geom_top1 = topk_score(cross["geom"], truth).counts[0]
        arith_top1 = topk_score(cross["arith"], truth).counts[0]
        assert geom_top1 >= 10, f"geom top-1 {geom_top1}/12"
        assert geom_top1 > arith_top1, f"geom {geom_top1} vs arith {arith_top1}"


def test_criterion_09_epsilon_sweep_monotonicity(halves):
    with criterion("convergence-threshold sweep monotonicity"):
        march = halves[0]
        objectives = []
        for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
            model = train_model(march, SCHEME, TrainConfig(method="asd", epsilon=eps))
            objectives.append(model.training_meta["final_objective"])
        for tighter, looser in zip(objectives[1:], objectives):
            assert tighter >= looser - 1e-12, f"objectives not monotone: {objectives}"


def test_criterion_10_cli_determinism(halves, tmp_path):
    with criterion("byte-identical CLI reruns under a fixed seed"):
        march, april = halves
        train_csv = tmp_path / "march.csv"
        test_csv = tmp_path / "april.csv"
        write_csv(march, train_csv)
        write_csv(april, test_csv)
        outs = []
        for name in ("first", "second"):
            out = tmp_path / name
            out.mkdir()
            with redirect_stdout(io.StringIO()):
                code = cli_main(
                    [
                        "align", "--train", str(train_csv), "--test", str(test_csv),
                        "--scheme", "e1-w1-g0", "--classifier", "sgd:0.5:30",
                        "--seed", "3", "--agg", "arith,geom_eps", "--out-dir", str(out),
                    ]
                )
            assert code == 0
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        assert names == sorted(p.name for p in outs[1].iterdir())
        assert any(n.endswith(".json") for n in names)
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def _table_bytes(columns):
    names = list(columns)
    rows = zip(*columns.values())
    return ("\n".join([",".join(names)] + [",".join(r) for r in rows]) + "\n").encode()


def _start_session(client):
    train = _table_bytes({"a": ["red"] * 10, "b": ["blue"] * 10})
    test = _table_bytes(
        {"v": ["red"] * 8 + ["blue"] * 2, "w": ["red"] * 6 + ["blue"] * 4}
    )
    resp = client.post(
        "/v1/sessions",
        files={"train": ("train.csv", train), "test": ("test.csv", test)},
        data={"scheme": "e1-w1-g0", "classifier": "asd:1e-6", "one_to_one": "true"},
    )
    assert resp.status_code == 201
    return resp.json()["session"]["id"]


def test_criterion_11_service_replay_and_single_winner(tmp_path):
    with criterion("review-session replay and conflict arbitration"):
        sessions_dir = tmp_path / "sessions"
        app = create_app(sessions_dir=sessions_dir)
        client = TestClient(app)
        session_id = _start_session(client)
        url = f"/v1/sessions/{session_id}/decisions"
        for body in (
            {"row": "v", "action": "accept", "column": "a"},
            {"row": "w", "action": "reject", "column": "a"},
            {"row": "w", "action": "accept", "column": "b"},
            {"row": "v", "action": "clear"},
            {"row": "v", "action": "accept", "column": "a"},
        ):
            assert client.post(url, json=body).status_code == 200
        doc = json.loads((sessions_dir / f"{session_id}.json").read_text())
        replayed = replay_log(
            doc["decision_log"],
            doc["matrix"]["rows"],
            doc["matrix"]["cols"],
            doc["config"]["one_to_one"],
        )
        assert replayed == doc["decisions"]

        contested = _start_session(client)
        race_url = f"/v1/sessions/{contested}/decisions"
        barrier = threading.Barrier(2)
        results = {}

        def contend(row):
            barrier.wait()
            results[row] = TestClient(app).post(
                race_url, json={"row": row, "action": "accept", "column": "a"}
            )
        threads = [threading.Thread(target=contend, args=(r,)) for r in ("v", "w")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(r.status_code for r in results.values()) == [200, 409]
