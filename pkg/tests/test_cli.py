import csv
import json

import numpy as np
import pytest

from lpakit.cli import DEFAULT_GRIDS, SWEEP_COLUMNS, main, read_membership

TRI2 = "0 1\n1 2\n0 2\n3 4\n4 5\n3 5\n"


@pytest.fixture
def tri2(tmp_path):
    p = tmp_path / "tri2.el"
    p.write_text(TRI2)
    return p


@pytest.fixture
def edge(tmp_path):
    p = tmp_path / "edge.el"
    p.write_text("0 1\n")
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_detect_two_triangles(tri2, tmp_path, capsys):
    member = tmp_path / "m.tsv"
    code, out, _ = run(["detect", "--input", tri2, "--format", "edge-list", "--exec", "sequential",
                        "--out-membership", member], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["communities"] == 2
    assert report["stats"]["converged"] is True
    assert report["graph"]["n"] == 6 and report["graph"]["m"] == 6
    assert report["throughput_edges_per_s"] > 0
    rows = [line.split("\t") for line in member.read_text().splitlines()]
    assert [int(r[0]) for r in rows] == list(range(6))
    labels = [int(r[1]) for r in rows]
    assert labels[0] == labels[1] == labels[2] != labels[3] == labels[4] == labels[5]


def test_detect_oscillation(edge, capsys):
    code, out, _ = run(["detect", "--input", edge, "--pl-period", "0", "--exec", "synchronous"],
                       capsys)
    report = json.loads(out)
    assert code == 0
    assert report["stats"]["converged"] is False
    assert report["stats"]["iterations"] == 20


def test_detect_missing_file(tmp_path, capsys):
    path = tmp_path / "absent.el"
    code, _, err = run(["detect", "--input", path], capsys)
    assert code == 2
    assert str(path) in err


def test_detect_bad_weight(tmp_path, capsys):
    p = tmp_path / "neg.el"
    p.write_text("0 1 -1\n")
    code, _, err = run(["detect", "--input", p], capsys)
    assert code == 2 and "non-positive" in err


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["detect", "--precision", "16", "--input", "x"])
    assert info.value.code == 1


def test_report_round_trip(tmp_path, capsys):
    p = tmp_path / "g.el"
    assert main(["generate", "planted", "--communities", "5", "--size", "20", "--p-in", "0.4",
                 "--p-out", "0.02", "--seed", "2", "--out", str(p)]) == 0
    m1, m2 = tmp_path / "a.tsv", tmp_path / "b.tsv"
    rep = tmp_path / "r.json"
    code, _, _ = run(["detect", "--input", p, "--exec", "sequential", "--seed", "9",
                      "--cc-period", "2", "--probing", "linear", "--out-membership", m1,
                      "--out-report", rep], capsys)
    assert code == 0
    report = json.loads(rep.read_text())
    code, out, _ = run(["detect", "--input", p, *report["argv"], "--out-membership", m2], capsys)
    assert code == 0
    again = json.loads(out)
    assert m1.read_text() == m2.read_text()
    assert again["config"] == report["config"]
    assert again["modularity"] == report["modularity"]
    assert again["stats"]["delta_n"] == report["stats"]["delta_n"]


def test_quality_command(tri2, tmp_path, capsys):
    member = tmp_path / "m.tsv"
    member.write_text("".join(f"{v}\t{0 if v < 3 else 3}\n" for v in range(6)))
    code, out, _ = run(["quality", "--input", tri2, "--membership", member], capsys)
    assert code == 0
    result = json.loads(out)
    assert result["modularity"] == pytest.approx(0.5)
    assert result["count"] == 2


def test_quality_single_community(tmp_path, capsys):
    g = tmp_path / "t.el"
    g.write_text("0 1\n1 2\n0 2\n")
    member = tmp_path / "m.tsv"
    member.write_text("0\t0\n1\t0\n2\t0\n")
    code, out, _ = run(["quality", "--input", g, "--membership", member], capsys)
    assert json.loads(out)["modularity"] == pytest.approx(0.0, abs=1e-15)


def test_quality_identity_single_edge(edge, tmp_path, capsys):
    member = tmp_path / "m.tsv"
    member.write_text("0\t0\n1\t1\n")
    code, out, _ = run(["quality", "--input", edge, "--membership", member], capsys)
    assert json.loads(out)["modularity"] == pytest.approx(-0.5)


def test_quality_missing_vertex(tri2, tmp_path, capsys):
    member = tmp_path / "m.tsv"
    member.write_text("0\t0\n1\t0\n2\t0\n3\t3\n5\t3\n")
    code, _, err = run(["quality", "--input", tri2, "--membership", member], capsys)
    assert code == 2
    assert "first missing id is 4" in err


def test_read_membership_rejects_negative_label(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text("0\t-2\n")
    with pytest.raises(ValueError):
        read_membership(p, 1)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_mitigation_sweep_on_single_edge(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(["sweep", "--generate", "edge", "--dimension", "mitigation",
                      "--exec", "synchronous", "--reps", "1", "--out", out], capsys)
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [r["point"] for r in rows] == DEFAULT_GRIDS["mitigation"]
    for r in rows:
        assert r["converged"] == ("False" if r["point"] == "none" else "True"), r["point"]


@pytest.mark.parametrize("dimension", ["probing", "switch-degree", "precision"])
def test_sweeps_keep_modularity_in_sequential_mode(dimension, tmp_path, capsys):
    out = tmp_path / "s.csv"
    summary = tmp_path / "sum.csv"
    code, _, _ = run(["sweep", "--generate", "planted:8,25,0.3,0.01,4", "--dimension", dimension,
                      "--exec", "sequential", "--precision", "64", "--reps", "2",
                      "--out", out, "--summary", summary], capsys)
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 2 * len(DEFAULT_GRIDS[dimension])
    assert all(r["error"] == "" for r in rows)
    qs = {r["modularity"] for r in rows}
    if dimension == "precision":
        vals = [float(q) for q in qs]
        assert max(vals) - min(vals) < 1e-4
    else:
        assert len(qs) == 1
    assert len(read_csv(summary)) == len(DEFAULT_GRIDS[dimension])


def test_sweep_records_bad_cell_and_continues(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run(["sweep", "--generate", "edge", "--dimension", "switch-degree",
                      "--grid", "1,4", "--reps", "1", "--out", out], capsys)
    assert code == 0
    rows = read_csv(out)
    assert rows[0]["error"] and not rows[1]["error"]


def test_generate_planted_with_truth(tmp_path, capsys):
    g, truth = tmp_path / "g.el", tmp_path / "t.tsv"
    assert main(["generate", "planted", "--communities", "3", "--size", "10",
                 "--out", str(g), "--truth", str(truth)]) == 0
    labels = read_membership(truth, 30)
    assert np.array_equal(np.bincount(labels), [10, 10, 10])
