import json
import subprocess
import sys

import numpy as np
import pytest

from crep.cli import main
from crep.graph import read_edge_list
from crep.io import load_params_document
from crep.metrics import reciprocity

FAST = ["--restarts", "2", "--max-iter", "100"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def graph_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("g") / "net.txt"
    assert main(["generate", "benchmark", "--n", "60", "--k", "2", "--avg-degree", "6",
                 "--eta", "0.5", "--seed", "3", "--out", str(path)]) == 0
    return path


def test_generate_writes_graph_and_truth(graph_file, capsys):
    g = read_edge_list(graph_file)
    doc = load_params_document(open(str(graph_file) + ".truth.json").read())
    assert doc["ground_truth"] and doc["N"] == 60 and doc["eta"] == 0.5
    assert set(g.labels()) <= set(doc["node_labels"])


def test_generate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for p in (a, b):
        code, out, _ = run(capsys, "generate", "benchmark", "--n", 50, "--seed", 4, "--out", p)
        assert code == 0 and out.startswith("M=")
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.txt.truth.json").read_bytes() == (tmp_path / "b.txt.truth.json").read_bytes()


def test_generate_sbm_matches_benchmark_at_eta_zero(tmp_path, capsys):
    a, b = tmp_path / "sbm.txt", tmp_path / "bench.txt"
    run(capsys, "generate", "sbm", "--n", 40, "--eta", 0.7, "--out", a)
    run(capsys, "generate", "benchmark", "--n", 40, "--eta", 0, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_generate_hl(tmp_path, capsys):
    out = tmp_path / "hl.txt"
    code, text, _ = run(capsys, "generate", "hl", "--n", 300, "--p", 0.5, "--alpha", 0,
                        "--seed", 1, "--out", out)
    assert code == 0
    # independent dyads at density 1/2: reciprocity is 1/2 as well
    assert abs(reciprocity(read_edge_list(out)) - 0.5) < 0.02
    truth = json.loads((tmp_path / "hl.txt.truth.json").read_text())
    assert truth["format"] == "crep-hl" and truth["theta"] == pytest.approx(0.0, abs=1e-12)


def test_fit_and_predict(graph_file, tmp_path, capsys):
    fit_path = tmp_path / "fit.json"
    code, out, _ = run(capsys, "fit", graph_file, "--k", 2, *FAST, "--out", fit_path)
    assert code == 0
    keys = [line.split("=")[0] for line in out.splitlines()]
    assert keys == ["eta", "log_pseudo_likelihood", "n_iter", "restart", "cr_ratio"]
    doc = json.loads(fit_path.read_text())
    assert doc["K"] == 2 and doc["ground_truth"] is False

    labels = doc["node_labels"]
    pairs = tmp_path / "pairs.txt"
    pairs.write_text(f"# probes\n{labels[0]} {labels[1]}\n{labels[1]},{labels[0]}\n")
    code, out, _ = run(capsys, "predict", fit_path, "--pairs", pairs, "--graph", graph_file)
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()]
    assert rows[0] == ["src", "dst", "regular", "conditional", "truth"]
    assert len(rows) == 3 and all(float(r[2]) >= 0 for r in rows[1:])
    code, out, _ = run(capsys, "predict", fit_path, "--pairs", pairs)
    assert out.splitlines()[0] == "src\tdst\tregular"


def test_fit_rerun_byte_identical(graph_file, tmp_path, capsys):
    outs = []
    for name in ("a.json", "b.json"):
        code, text, _ = run(capsys, "fit", graph_file, "--k", 2, *FAST, "--out", tmp_path / name)
        outs.append(text)
    assert outs[0] == outs[1]
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_fit_eta0_mode(graph_file, capsys):
    code, out, _ = run(capsys, "fit", graph_file, "--k", 2, "--mode", "eta0", *FAST)
    assert code == 0 and "eta=0\n" in out


def test_cv(graph_file, tmp_path, capsys):
    out_path = tmp_path / "cv.json"
    code, out, _ = run(capsys, "cv", graph_file, "--k-grid", "1,2", "--folds", 3, *FAST,
                       "--out", out_path)
    assert code == 0
    assert "best_k=" in out and "conditional_auc=" in out
    doc = json.loads(out_path.read_text())
    assert len(doc["folds"]) == 6 and doc["config"]["command"] == "cv"


def test_report(graph_file, capsys):
    code, out, _ = run(capsys, "report", graph_file, "--k", 2, "--samples", 2, *FAST)
    assert code == 0 and "weighted reciprocity" in out and "eta_hat" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fit"],
        ["fit", "g.txt"],
        ["fit", "g.txt", "--k", "0"],
        ["fit", "g.txt", "--k", "2", "--seed", "abc"],
        ["fit", "g.txt", "--k", "2", "--mode", "other"],
        ["cv", "g.txt"],
        ["cv", "g.txt", "--k", "2", "--k-grid", "1,2"],
        ["generate", "blob", "--out", "x"],
        ["predict", "fit.json"],
    ],
)
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_semantic_usage_errors(graph_file, tmp_path, capsys):
    assert run(capsys, "generate", "benchmark")[0] == 1
    assert run(capsys, "generate", "benchmark", "--eta", 1.0, "--out", tmp_path / "x")[0] == 1
    assert run(capsys, "fit", graph_file, "--k", 2, "--tol", 0)[0] == 1
    assert run(capsys, "cv", graph_file, "--k", 2, "--folds", 1)[0] == 1
    assert run(capsys, "report", graph_file, "--k", 2, "--samples", 0)[0] == 1


def test_data_errors(tmp_path, capsys):
    code, _, err = run(capsys, "fit", tmp_path / "missing.txt", "--k", 2)
    assert code == 2 and "not found" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("a b\nc\n")
    code, _, err = run(capsys, "fit", bad, "--k", 2)
    assert code == 2 and "line 2" in err
    doc = tmp_path / "doc.json"
    doc.write_text("{}")
    pairs = tmp_path / "p.txt"
    pairs.write_text("a b\n")
    assert run(capsys, "predict", doc, "--pairs", pairs)[0] == 2


def test_predict_unknown_node(graph_file, tmp_path, capsys):
    fit_path = tmp_path / "fit.json"
    run(capsys, "fit", graph_file, "--k", 1, *FAST, "--out", fit_path)
    pairs = tmp_path / "p.txt"
    pairs.write_text("nobody nowhere\n")
    code, _, err = run(capsys, "predict", fit_path, "--pairs", pairs)
    assert code == 2 and "unknown node" in err


def test_numerical_failure_exit(tmp_path, capsys):
    # every pair is an edge: no fold has negatives, so AUC is undefined
    full = tmp_path / "full.txt"
    full.write_text("a b\nb a\na c\nc a\nb c\nc b\n")
    code, _, err = run(capsys, "cv", full, "--k", 1, "--folds", 2, "--restarts", 1)
    assert code == 3 and "numerical" in err


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "default: 10" in out and "default: 1e-4" in out


def test_console_script(graph_file):
    proc = subprocess.run([sys.executable, "-m", "crep.cli", "fit", str(graph_file), "--k", "1",
                           "--restarts", "1", "--max-iter", "20"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("eta=")
