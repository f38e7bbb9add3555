import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cnsmooth.cli import main, read_labels
from cnsmooth.data import DataMatrix, LabelVector, write_csv
from cnsmooth.errors import DataError, EvaluationError, GraphError, SelectionError
from cnsmooth.evaluation import ari, contingency
from oracles import two_blobs


@pytest.fixture
def blob_csv(tmp_path):
    X, y = two_blobs(seed=0)
    p = tmp_path / "blobs.csv"
    write_csv(p, DataMatrix(X), LabelVector(y, 2))
    return p, y


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fit_two_blobs(tmp_path, blob_csv):
    path, y = blob_csv
    out = tmp_path / "labels.csv"
    soft = tmp_path / "soft.csv"
    report = tmp_path / "report.json"
    table = tmp_path / "table.csv"
    code = main(["fit", "--input", str(path), "--label-column", "label", "--labels-out", str(out),
                 "--soft-out", str(soft), "--report-out", str(report), "--table-out", str(table)])
    assert code == 0
    rows = _read_rows(out)
    assert rows[0] == ["row", "label"]
    labels = np.array([int(r[1]) for r in rows[1:]])
    assert len(set(labels)) == 2
    assert ari(contingency(y, labels)) == 1.0

    P = np.array([[float(v) for v in r[1:]] for r in _read_rows(soft)[1:]])
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(P.argmax(axis=1), labels)

    rep = json.loads(report.read_text())
    assert {"config", "criterion", "manifest", "table"} <= set(rep)
    assert rep["config"]["K"] == 2
    assert rep["manifest"]["grids"]["k"] == [5, 10, 15, 20]
    assert "timings" in rep["manifest"]
    assert len(rep["table"]) == len(_read_rows(table)) - 1
    assert _read_rows(table)[0] == ["metric", "k", "lambda", "K", "C", "R", "score", "effective_clusters"]


def test_fit_small_grid_table(tmp_path, blob_csv):
    path, _ = blob_csv
    report = tmp_path / "r.json"
    code = main(["fit", "--input", str(path), "--label-column", "-1", "--k-grid", "5",
                 "--lambda-grid", "0.1", "--kmax", "4", "--labels-out", str(tmp_path / "l.csv"),
                 "--report-out", str(report)])
    assert code == 0
    table = json.loads(report.read_text())["table"]
    assert [(r["k"], r["lambda"], r["K"]) for r in table] == [(5, 0.1, 2), (5, 0.1, 3), (5, 0.1, 4)]


def test_fit_is_byte_deterministic(tmp_path, blob_csv):
    path, _ = blob_csv
    outputs = []
    for run in range(2):
        lab, rep = tmp_path / f"l{run}.csv", tmp_path / f"r{run}.json"
        main(["fit", "--input", str(path), "--label-column", "label", "--metric", "cosine",
              "--labels-out", str(lab), "--report-out", str(rep), "--no-timings"])
        outputs.append((lab.read_bytes(), rep.read_bytes()))
    assert outputs[0] == outputs[1]


def test_report_grids_reproduce_run(tmp_path, blob_csv):
    path, _ = blob_csv
    first = tmp_path / "a.json"
    main(["fit", "--input", str(path), "--label-column", "label", "--labels-out", str(tmp_path / "a.csv"),
          "--report-out", str(first), "--no-timings"])
    rep = json.loads(first.read_text())
    grids = rep["manifest"]["grids"]
    second = tmp_path / "b.json"
    main(["fit", "--input", str(path), "--label-column", "label", "--labels-out", str(tmp_path / "b.csv"),
          "--report-out", str(second), "--no-timings",
          "--k-grid", ",".join(map(str, grids["k"])),
          "--lambda-grid", ",".join(repr(v) for v in grids["lambda"]),
          "--kmax", str(grids["kmax"])])
    again = json.loads(second.read_text())
    assert again["config"] == rep["config"]
    assert again["table"] == rep["table"]


def test_fit_labels_to_stdout(capsys, blob_csv):
    path, _ = blob_csv
    assert main(["fit", "--input", str(path), "--label-column", "label", "--k-grid", "6",
                 "--lambda-grid", "0.2"]) == 0
    out = capsys.readouterr()
    lines = out.out.strip().splitlines()
    assert lines[0] == "row,label" and len(lines) == 201
    assert "selected K=" in out.err


def test_cosine_zero_row_exit_code(tmp_path, capsys):
    p = tmp_path / "z.csv"
    p.write_text("a,b\n1,2\n0,0\n3,1\n2,2\n5,1\n", encoding="utf-8")
    code = main(["fit", "--input", str(p), "--metric", "cosine", "--no-center",
                 "--k-grid", "2", "--lambda-grid", "0.3"])
    assert code == GraphError.exit_code
    assert "zero norm" in capsys.readouterr().err


def test_cosine_zero_row_after_centering(tmp_path, capsys):
    # the third row equals the column means, so it is zero once centred
    p = tmp_path / "z.csv"
    p.write_text("a,b\n0,0\n4,2\n2,1\n1,2\n3,0\n", encoding="utf-8")
    code = main(["fit", "--input", str(p), "--metric", "cosine", "--k-grid", "2", "--lambda-grid", "0.3"])
    assert code == GraphError.exit_code
    assert "observation 2 has zero norm" in capsys.readouterr().err


def test_error_codes_are_distinct(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n", encoding="utf-8")
    assert main(["fit", "--input", str(bad)]) == DataError.exit_code
    good = tmp_path / "g.csv"
    good.write_text("a\n1\n2\n4\n7\n", encoding="utf-8")
    assert main(["fit", "--input", str(good), "--k-grid", "9", "--lambda-grid", "0.5"]) == SelectionError.exit_code
    codes = {DataError.exit_code, GraphError.exit_code, SelectionError.exit_code, EvaluationError.exit_code}
    assert len(codes) == 4
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    help_text = capsys.readouterr().out
    for code in codes:
        assert f"  {code}  " in help_text


def test_eval_identical(tmp_path, capsys):
    p = tmp_path / "l.csv"
    p.write_text("row,label\n0,1\n1,1\n2,0\n3,2\n", encoding="utf-8")
    js = tmp_path / "m.json"
    assert main(["eval", "--pred", str(p), "--truth", str(p), "--json-out", str(js)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].split() == ["100.00", "100.00", "100.00"]
    assert json.loads(js.read_text()) == {"accuracy": 1.0, "ari": 1.0, "ami": 1.0}


def test_eval_singletons_vs_one_class(tmp_path, capsys):
    pred = tmp_path / "p.csv"
    truth = tmp_path / "t.csv"
    pred.write_text("label\n" + "\n".join(str(i) for i in range(6)) + "\n", encoding="utf-8")
    truth.write_text("label\n" + "\n".join("a" for _ in range(6)) + "\n", encoding="utf-8")
    assert main(["eval", "--pred", str(pred), "--truth", str(truth)]) == 0
    assert capsys.readouterr().out.splitlines()[1].split()[1] == "0.00"


def test_eval_matches_oracle_values(tmp_path, capsys):
    from oracles import brute_accuracy, exhaustive_ami, labels_from_table, pair_ari
    rows = [[3, 1], [1, 2], [0, 2]]
    truth, pred = labels_from_table(rows)
    tp, pp = tmp_path / "t.csv", tmp_path / "p.csv"
    tp.write_text("id,label\n" + "".join(f"{i},{v}\n" for i, v in enumerate(truth)), encoding="utf-8")
    pp.write_text("id,label\n" + "".join(f"{i},{v}\n" for i, v in enumerate(pred)), encoding="utf-8")
    assert main(["eval", "--pred", str(pp), "--truth", str(tp)]) == 0
    acc, ari_v, ami_v = (float(v) for v in capsys.readouterr().out.splitlines()[1].split())
    assert abs(acc - 100 * brute_accuracy(rows)) <= 0.01
    assert abs(ari_v - 100 * pair_ari(truth, pred)) <= 0.01
    assert abs(ami_v - 100 * exhaustive_ami(truth, pred)) <= 0.01


def test_eval_length_mismatch(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("label\n0\n1\n", encoding="utf-8")
    b.write_text("label\n0\n1\n1\n", encoding="utf-8")
    assert main(["eval", "--pred", str(a), "--truth", str(b)]) == EvaluationError.exit_code


def test_read_labels_fallbacks(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("7,b\n8,a\n9,b\n", encoding="utf-8")
    assert read_labels(p).tolist() == [0, 1, 0]
    p.write_text("row,cluster,other\n0,2,x\n1,3,y\n", encoding="utf-8")
    assert read_labels(p, "cluster").tolist() == [0, 1]


def _fixture_dir(tmp_path, n_sets=3):
    d = tmp_path / "sets"
    d.mkdir()
    for s in range(n_sets):
        X, y = two_blobs(seed=10 + s, n_per=60, d=4)
        write_csv(d / f"set{s}.csv", DataMatrix(X), LabelVector(y, 2))
    return d


def test_sweep_three_fixtures(tmp_path, capsys):
    d = _fixture_dir(tmp_path)
    out = tmp_path / "res.csv"
    assert main(["sweep", "--data-dir", str(d), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out, newline="")))
    assert [r["dataset"] for r in rows] == ["set0", "set1", "set2"]
    for r in rows:
        for tag in ("CNSe", "CNSc"):
            for m in ("K", "AMI", "ARI", "ACC"):
                assert r[f"{tag}_{m}"] not in ("", "ERR")
        assert r["error"] == ""
    text = capsys.readouterr().out
    assert text.splitlines()[0].split()[:4] == ["dataset", "n", "d", "G"]
    assert len(text.strip().splitlines()) == 4


def test_sweep_empty_directory(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    out = tmp_path / "res.csv"
    assert main(["sweep", "--data-dir", str(d), "--out", str(out)]) == 0
    assert len(_read_rows(out)) == 1
    assert "warning" in capsys.readouterr().err


def test_sweep_isolates_bad_file(tmp_path, capsys):
    d = _fixture_dir(tmp_path, 2)
    (d / "broken.csv").write_text("a,b,label\n1,2,0\n3,oops,1\n", encoding="utf-8")
    out = tmp_path / "res.csv"
    assert main(["sweep", "--data-dir", str(d), "--out", str(out)]) == 0
    rows = {r["dataset"]: r for r in csv.DictReader(open(out, newline=""))}
    assert rows["broken"]["CNSe_AMI"] == "ERR" and "row 3" in rows["broken"]["error"]
    assert rows["set0"]["error"] == "" and rows["set1"]["error"] == ""
    assert "broken" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cnsmooth", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("cnsmooth ")
