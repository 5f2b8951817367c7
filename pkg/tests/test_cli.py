import json
from pathlib import Path

import pytest

from hostpar.cli import main
from hostpar.modelio import (
    bundled_model_path,
    load_bundled,
    load_model,
    params_hash,
    save_model,
)


@pytest.fixture()
def m1_file():
    return str(bundled_model_path("m1"))


# --- model file round trip and hashing --------------------------------------


def test_round_trip(tmp_path):
    m1 = load_bundled("m1")
    out = tmp_path / "copy.json"
    save_model(m1, out)
    again = load_model(out)
    assert again.params == m1.params
    assert params_hash(again) == params_hash(m1)


def test_hash_distinguishes_models():
    assert params_hash(load_bundled("m1")) != params_hash(load_bundled("m2"))


def test_parse_error_names_field(tmp_path):
    bad = tmp_path / "bad.json"
    data = json.loads(bundled_model_path("m1").read_text())
    data["law_B"] = [[1, 1, 0.5], [2, 0, 0.4]]  # mass 0.9
    bad.write_text(json.dumps(data))
    rc = main(["classify", "--model", str(bad)])
    assert rc == 2


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert main(["classify", "--model", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_model_exits_2():
    assert main(["classify", "--model", "/does/not/exist.json"]) == 2


# --- subcommands ------------------------------------------------------------


def test_classify_pretty_and_json(m1_file, capsys):
    assert main(["classify", "--model", m1_file]) == 0
    pretty = capsys.readouterr().out
    assert "bpre_class" in pretty and "supercritical" in pretty

    assert main(["classify", "--model", "m2", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["regime"]["a_parasites_as_extinction"] is True
    assert payload["derived"]["phi_min"] == pytest.approx(0.5)


def test_exact_one_step_rows(tmp_path):
    out = tmp_path / "pmf.csv"
    assert main(["exact", "--model", "m1", "--n", "1", "--k-max", "2",
                 "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "k,probability"
    assert rows[1:] == ["0,0.25", "1,0.4", "2,0.35"]
    meta = json.loads((tmp_path / "pmf.csv.meta.json").read_text())
    assert meta["overflow_mass"] == 0.0
    assert meta["params_hash"] == params_hash(load_bundled("m1"))


def test_simulate_generation_zero(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--model", "m1", "--n-gens", "0", "--seed", "1",
                 "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2  # header + the initial state
    fields = lines[1].split(",")
    # one contaminated A cell carrying one parasite, nothing else
    assert fields[:8] == ["0", "0", "1", "0", "0", "0", "1", "0"]


def test_cell_line_output(tmp_path):
    out = tmp_path / "cl.csv"
    assert main(["cell-line", "--model", "m1", "--n-gens", "4", "--seed", "2",
                 "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,type,Z"
    assert len(lines) == 6
    assert lines[1].startswith("0,A,1")


def test_mc_byte_identical_same_seed(tmp_path):
    args = ["mc", "--model", "m1", "--replicates", "512", "--n-gens", "4",
            "--seed", "9", "--chunk-size", "128"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2), "--workers", "3"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_mc_metadata_embeds_run_info(tmp_path):
    out = tmp_path / "mc.csv"
    assert main(["mc", "--model", "m3", "--replicates", "256", "--n-gens", "3",
                 "--seed", "4", "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "mc.csv.meta.json").read_text())
    assert meta["replicates"] == 256
    assert meta["n_total"] == 256
    assert meta["params_hash"] == params_hash(load_bundled("m3"))


def test_verify_small_budget(capsys):
    assert main(["verify", "--budget", "small"]) == 0
    report = capsys.readouterr().out
    assert "SKIP" in report and "PASS" in report
    assert "FAIL" not in report
