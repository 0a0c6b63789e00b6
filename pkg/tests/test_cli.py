import json
import sys

import pytest

from rarag.harness import io as rio
from rarag.harness.cli import main


def write_cfg(tmp_path, body="n_sources = 5\nn_trials = 2\nm_est = 50\nm_test = 60\n"):
    path = tmp_path / "run.cfg"
    path.write_text("[experiment]\n" + body)
    return str(path)


def test_gen_estimate_infer(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "n_sources = 6\nm_est = 80\nm_test = 20\nnoise = llama3-tqa\n")
    out = tmp_path / "world"
    assert main(["gen", "--config", cfg, "--seed", "3", "--out", str(out)]) == 0
    for name in ("raw.csv", "filtered.csv", "profiles.csv", "gold.csv"):
        assert (out / name).exists()
    matrix, _ = rio.read_matrix_csv(out / "raw.csv")
    assert matrix.n_sources == 6 and len(matrix.query_ids) == 100

    wdir = tmp_path / "w"
    assert main(["estimate", "--config", cfg, "--matrix", str(out / "raw.csv"), "--out", str(wdir)]) == 0
    weights = rio.weights_from_json((wdir / "weights.json").read_text())
    assert len(weights) == 6
    assert "iterations=" in capsys.readouterr().err

    assert main(["estimate", "--config", cfg, "--matrix", str(out / "raw.csv"), "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("source_id,w_hat,v\n")

    assert main(["infer", "--config", cfg, "--seed", "3", "--weights", str(wdir / "weights.json"),
                 "--query-id", "7"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["query_id"] == 7 and 1 <= doc["probes_made"] <= 6


def test_gen_is_reproducible(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    main(["gen", "--config", cfg, "--seed", "9"])
    first = capsys.readouterr().out
    main(["gen", "--config", cfg, "--seed", "9"])
    assert capsys.readouterr().out == first
    main(["gen", "--config", cfg, "--seed", "10"])
    assert capsys.readouterr().out != first


def test_sweep_and_report(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "run"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    report_text = (out / "report.json").read_text()
    assert (out / "sweep.csv").read_text() == rio.sweep_csv(rio.report_from_json(report_text))
    assert main(["report", str(out / "report.json")]) == 0
    assert "| RA_RAG | 5 |" in capsys.readouterr().out
    assert main(["report", str(out / "report.json"), "--format", "csv"]) == 0
    assert capsys.readouterr().out == (out / "sweep.csv").read_text()
    assert main(["sweep", "--config", cfg, "--format", "csv"]) == 0
    assert capsys.readouterr().out == (out / "sweep.csv").read_text()


def test_exit_code_config_errors(tmp_path, capsys):
    assert main(["sweep", "--config", write_cfg(tmp_path, "kappa = 0\n")]) == 2
    assert "REJECT_RANGE" in capsys.readouterr().err
    assert main(["sweep", "--config", write_cfg(tmp_path, "nonsense = 1\n")]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["bogus"]) == 2
    assert main(["sweep", "--format", "xml"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("query_id,source_id\n")
    assert main(["estimate", "--matrix", str(bad)]) == 2


def test_exit_code_provider_failure(tmp_path, capsys):
    weights = tmp_path / "w.json"
    weights.write_text('{"scale": 3, "w_hat": [0.9, 0.5, 0.2], "v": [1.7, 0.5, -0.4]}')
    cmd = f'{sys.executable} -c "import sys; sys.stdin.readline(); print(\'not json\', flush=True)"'
    code = main(["infer", "--weights", str(weights), "--query-id", "0", "--provider-cmd", cmd])
    assert code == 3
    assert "provider failure" in capsys.readouterr().err


def test_exit_code_invariant_violation(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "run"
    main(["sweep", "--config", cfg, "--out", str(out), "--format", "json"])
    doc = json.loads((out / "report.json").read_text())
    doc["results"][0]["accuracy_mean"] += 0.25
    (out / "report.json").write_text(json.dumps(doc))
    assert main(["report", str(out / "report.json")]) == 4


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        from rarag.harness.cli import build_parser
        build_parser().parse_args(["--version"])
    assert exc.value.code == 0
