import json

import numpy as np
import pytest

from fieldalign.align import matrix_from_json
from fieldalign.cli import OUT_DIR_ENV, main, parse_agg, parse_classifier
from fieldalign.errors import ConfigurationError

TRAIN = "a,b\nred,green\nred,lime\nblue,green\nred,lime\nblue,green\nred,green\n"
TEST = "x,y\nred,green\nblue,lime\nred,green\nred,lime\n"
TRUTH = "x,a\ny,b\n"


@pytest.fixture
def tables(tmp_path):
    train = tmp_path / "train.csv"
    test = tmp_path / "test.csv"
    truth = tmp_path / "truth.csv"
    train.write_text(TRAIN)
    test.write_text(TEST)
    truth.write_text(TRUTH)
    return train, test, truth


def run(*argv):
    return main([str(a) for a in argv])


class TestParsers:
    def test_classifier_grammar(self):
        sgd = parse_classifier("sgd:0.05:300")
        assert (sgd.method, sgd.eta, sgd.reps) == ("sgd", 0.05, 300)
        sgd_l2 = parse_classifier("sgd:0.05:300:0.1")
        assert sgd_l2.l2_penalty == 0.1
        asd = parse_classifier("asd:1e-8")
        assert (asd.method, asd.epsilon) == ("asd", 1e-8)
        knn = parse_classifier("knn:3")
        assert (knn.method, knn.k) == ("knn", 3)

    def test_classifier_grammar_rejects_junk(self):
        for spec in ("", "asd", "sgd:0.1", "knn:3.5", "asd:fast", "boost:1", "sgd:0.1:10:1:9"):
            with pytest.raises(ConfigurationError):
                parse_classifier(spec)

    def test_agg_list(self):
        assert parse_agg("arith,geom") == ("arith", "geom")
        assert parse_agg("cosine") == ("cosine_ratio",)  # short alias
        assert parse_agg("arith,arith") == ("arith",)
        with pytest.raises(ConfigurationError):
            parse_agg("arith,nope")
        with pytest.raises(ConfigurationError):
            parse_agg("")


class TestAlignCommand:
    def test_writes_matrices_and_reports(self, tables, tmp_path, capsys):
        train, test, truth = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run(
            "align", "--train", train, "--test", test,
            "--agg", "arith,geom,cosine", "--truth", truth,
            "--classifier", "asd:1e-8", "--out-dir", out,
        )
        assert code == 0
        for method in ("arith", "geom", "cosine_ratio"):
            assert (out / f"alignment_{method}.csv").exists()
            assert (out / f"alignment_{method}.json").exists()
        report = (out / "report.txt").read_text()
        assert "arith: 2/2/2 of 2" in report
        assert "geom: 2/2/2 of 2" in report
        assert "cosine_ratio: 2/2/2 of 2" in report
        assert capsys.readouterr().out == report

    def test_matrix_json_is_loadable_and_correct(self, tables, tmp_path):
        train, test, truth = tables
        out = tmp_path / "out"
        out.mkdir()
        run(
            "align", "--train", train, "--test", test,
            "--classifier", "asd:1e-8", "--out-dir", out,
        )
        matrix = matrix_from_json((out / "alignment_arith.json").read_text())
        assert matrix.rows == ("x", "y")
        assert matrix.cols == ("a", "b")
        np.testing.assert_allclose(matrix.values.sum(axis=1), 1.0, atol=1e-6)
        assert matrix.value("x", "a") > matrix.value("x", "b")

    def test_byte_identical_reruns(self, tables, tmp_path):
        train, test, truth = tables
        outs = []
        for name in ("out1", "out2"):
            out = tmp_path / name
            out.mkdir()
            code = run(
                "align", "--train", train, "--test", test,
                "--agg", "arith,geom_eps", "--truth", truth,
                "--classifier", "asd:1e-6", "--out-dir", out,
            )
            assert code == 0
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        assert names == sorted(p.name for p in outs[1].iterdir())
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_knn_classifier_path(self, tables, tmp_path):
        train, test, truth = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run(
            "align", "--train", train, "--test", test,
            "--classifier", "knn:2", "--truth", truth, "--out-dir", out,
        )
        assert code == 0
        assert "arith: 2/2/2 of 2" in (out / "report.txt").read_text()

    def test_human_report_rounds_but_csv_keeps_precision(self, tables, tmp_path):
        train, test, _ = tables
        out = tmp_path / "out"
        out.mkdir()
        run(
            "align", "--train", train, "--test", test,
            "--classifier", "asd:1e-8", "--out-dir", out,
        )
        matrix = matrix_from_json((out / "alignment_arith.json").read_text())
        top = matrix.value("x", "a")
        report = (out / "report.txt").read_text()
        assert f"a {top * 100:.1f}" in report
        assert repr(top) in (out / "alignment_arith.csv").read_text()

    def test_env_var_supplies_out_dir(self, tables, tmp_path, monkeypatch):
        train, test, _ = tables
        out = tmp_path / "from-env"
        out.mkdir()
        monkeypatch.setenv(OUT_DIR_ENV, str(out))
        code = run("align", "--train", train, "--test", test, "--classifier", "asd:1e-6")
        assert code == 0
        assert (out / "alignment_arith.json").exists()

    def test_confidence_lines(self, tables, tmp_path):
        train, test, truth = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run(
            "align", "--train", train, "--test", test,
            "--truth", truth, "--confidence", "--one-to-one",
            "--classifier", "asd:1e-8", "--out-dir", out,
        )
        assert code == 0
        report = (out / "report.txt").read_text()
        assert "confidence arith: l1-to-assignment" in report
        assert "1-to-1 objective" in report


class TestSymCommands:
    def test_sym1_self_alignment(self, tables, tmp_path, capsys):
        train, _, _ = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run(
            "sym1", train, train,
            "--classifier", "asd:1e-8", "--scheme", "e1-w1-g0", "--out-dir", out,
        )
        assert code == 0
        matrix = matrix_from_json((out / "alignment_sym1.json").read_text())
        np.testing.assert_allclose(matrix.values, matrix.values.T, atol=1e-6)
        np.testing.assert_allclose(np.diag(matrix.values), 1.0, atol=1e-6)

    def test_sym2_writes_its_own_artifacts(self, tables, tmp_path):
        train, test, _ = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run("sym2", train, test, "--classifier", "asd:1e-6", "--out-dir", out)
        assert code == 0
        assert (out / "alignment_sym2.csv").exists()

    def test_sym_rejects_knn(self, tables, tmp_path, capsys):
        train, _, _ = tables
        code = run("sym1", train, train, "--classifier", "knn:3", "--out-dir", tmp_path)
        assert code == 3
        assert capsys.readouterr().err.startswith("cli:")


class TestEvalCommand:
    def test_scores_saved_matrix(self, tables, tmp_path, capsys):
        train, test, truth = tables
        out = tmp_path / "out"
        out.mkdir()
        run("align", "--train", train, "--test", test, "--classifier", "asd:1e-8", "--out-dir", out)
        capsys.readouterr()
        code = run(
            "eval", "--matrix", out / "alignment_arith.json", "--truth", truth,
            "--ks", "1,2", "--confidence", "--one-to-one",
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "arith: 2/2 of 2" in text
        assert "assignment x->a, y->b" in text


class TestProfileCommand:
    def test_distance_grid(self, tables, tmp_path, capsys):
        train, test, _ = tables
        out = tmp_path / "out"
        out.mkdir()
        code = run("profile", train, test, "--out-dir", out)
        assert code == 0
        grid = (out / "profile_distance.csv").read_text().splitlines()
        assert grid[0] == ",a,b"
        assert grid[1].startswith("x,")
        text = capsys.readouterr().out
        assert "x: a " in text  # x's closest column is a


class TestExitCodes:
    def test_missing_input_is_a_data_error(self, tmp_path, capsys):
        code = run("align", "--train", tmp_path / "absent.csv", "--test", tmp_path / "absent.csv")
        assert code == 3
        err = capsys.readouterr().err
        assert err.startswith("ingest:") or err.startswith("io:")

    def test_bad_classifier_spec(self, tables, capsys):
        train, test, _ = tables
        code = run("align", "--train", train, "--test", test, "--classifier", "asd:fast")
        assert code == 3
        assert capsys.readouterr().err.startswith("cli:")

    def test_divergence_is_a_numeric_error(self, tmp_path, capsys):
        bad = tmp_path / "conflict.csv"
        bad.write_text("a,b\nsame same,same same\nsame same,same same\n")
        code = run(
            "align", "--train", bad, "--test", bad,
            "--classifier", "sgd:1e308:5", "--out-dir", tmp_path,
        )
        assert code == 4
        assert capsys.readouterr().err.startswith("classify:")

    def test_unknown_flag_is_usage_error(self, tables):
        train, test, _ = tables
        with pytest.raises(SystemExit) as err:
            run("align", "--train", train, "--test", test, "--frobnicate")
        assert err.value.code == 2

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            run()
        assert err.value.code == 2
