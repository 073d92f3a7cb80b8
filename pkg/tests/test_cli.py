import json
import subprocess
import sys

import pytest

from holokernel import _fixtures as fx
from holokernel.cli import EXIT_DIVERGENCE, EXIT_FAIL, EXIT_OK, EXIT_SCHEMA, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, (json.loads(out) if out else None), err


def test_bundled_fixtures_match_builders():
    for name, data in fx.build_all().items():
        assert (fx.FIXTURE_DIR / name).read_text() == fx.dumps(data), name


def test_forms_verify_default(capsys):
    code, rep, _ = run_json(capsys, "forms-verify", "--samples", "2000")
    assert code == EXIT_OK and rep["verdict"] == "pass"
    ranks = rep["ranks"]
    assert {ranks[k] for k in ranks} >= {7, 21, 14, 8, 6, 1, 43, 35, 12}
    assert ranks["dim8.21"] == 21 and ranks["orbit.dim8"] == 43 and ranks["cayley_locus"] == 12
    assert rep["seed"] and rep["tolerance"]


def test_forms_verify_mutation_fails(capsys):
    code, rep, _ = run_json(capsys, "forms-verify", "--samples", "200", "--mutate")
    assert code == EXIT_FAIL and rep["verdict"] == "fail"
    assert rep["first_failure"]["passed"] is False


def test_model_run_circle(capsys):
    code, rep, _ = run_json(capsys, "model-run", "--samples", "10")
    assert code == EXIT_OK and rep["oracle"] == "agree"
    bettis = [r["betti"] for r in rep["results"]]
    assert bettis[:2] == [[1, 1], [1, 1]]
    assert all(b == [0, 0] for b in bettis[2:])


def test_model_run_torus(capsys):
    path = str(fx.FIXTURE_DIR / "torus.json")
    code, rep, _ = run_json(capsys, "model-run", "--input", path, "--samples", "10")
    assert code == EXIT_OK and rep["results"][0]["betti"] == [1, 2, 1]
    assert all(r["betti"] == [0, 0, 0] for r in rep["results"][2:])


def test_model_run_divergence(capsys):
    path = str(fx.FIXTURE_DIR / "growth.json")
    code, _, err = run(capsys, "model-run", "--input", path, "--alpha", "0.5")
    assert code == EXIT_DIVERGENCE and "growth threshold" in err


def test_model_run_alpha_length_checked(capsys):
    code, _, err = run(capsys, "model-run", "--alpha", "1,2")
    assert code == EXIT_SCHEMA and "lattice rank" in err


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "lattice_rank": 1,\n  "theta": [1.0\n}\n')
    code, _, err = run(capsys, "model-run", "--input", str(bad))
    assert code == EXIT_SCHEMA and "line 4" in err


def test_schema_violation(tmp_path, capsys):
    data = json.loads((fx.FIXTURE_DIR / "circle.json").read_text())
    del data["theta"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "model-run", "--input", str(path))
    assert code == EXIT_SCHEMA and "theta" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "atlas-check", "--input", "/nonexistent/atlas.json")
    assert code == EXIT_SCHEMA


def test_atlas_check(capsys):
    code, rep, _ = run_json(capsys, "atlas-check")
    assert code == EXIT_OK
    assert rep["cocycle"]["verified"] and rep["gauge_invariant"]
    assert rep["bundle"]["ranks"] == [3] * 20


def test_atlas_check_detects_mutation(tmp_path, capsys):
    data = json.loads((fx.FIXTURE_DIR / "wall_atlas.json").read_text())
    fam = next(f for f in data["transitions"] if f["from"] == "A" and f["to"] == "B")
    rec = next(r for r in fam["records"] if r["s"] != r["s_prime"])
    rec["count"] += 1
    path = tmp_path / "atlas.json"
    path.write_text(json.dumps(data))
    code, rep, _ = run_json(capsys, "atlas-check", "--input", str(path))
    assert code == EXIT_FAIL and not rep["cocycle"]["verified"]
    assert rep["cocycle"]["failure"]["triple"] == ["A", "B", "A"]


def test_glue(capsys):
    code, rep, _ = run_json(capsys, "glue")
    assert code == EXIT_OK and rep["chart_independent_exact"]
    assert rep["generating_function"]["terms"] == [{"class": ["4"], "n": "13"}]


def test_glue_cone_violation(tmp_path, capsys):
    data = fx.sections()
    data["second"]["entries"]["S1"] = [{"class": ["-9"], "count": 1}]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "glue", "--sections", str(path))
    assert code == EXIT_FAIL and "cone" in err


def test_slag(capsys):
    code, rep, _ = run_json(capsys, "slag")
    assert code == EXIT_OK and rep["value"] == "2"
    code, rep, _ = run_json(capsys, "slag", "--kappa", "2,2")
    # {2e1 | e1,e1} x {2e2 | e2,e2}
    assert code == EXIT_OK and rep["value"] == "4"


def test_slag_without_positivity(tmp_path, capsys):
    data = fx.slag_weights()
    del data["positivity"]
    path = tmp_path / "w.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "slag", "--input", str(path))
    assert code == EXIT_SCHEMA and "positivity" in err


def test_fueter(capsys):
    code, rep, _ = run_json(capsys, "fueter", "--N", "5")
    assert code == EXIT_OK and rep["kernel_dimension"] == 4
    assert rep["max_square_residual"] <= 1e-12


def test_fueter_even_lattice(capsys):
    code, _, err = run(capsys, "fueter", "--N", "4")
    assert code == EXIT_SCHEMA and "odd" in err


def test_fueter_spectral_flow(tmp_path, capsys):
    path = tmp_path / "fam.json"
    path.write_text(json.dumps({"params": [-1, 1], "matrices": [[[-1]], [[1]]]}))
    code, rep, _ = run_json(capsys, "fueter", "--input", str(path), "--samples", "1")
    assert code == EXIT_OK and rep["spectral_flow"]["flow"] == 1
    path.write_text(json.dumps({"params": [0, 1], "matrices": [[[0]], [[1]]]}))
    code, _, _ = run(capsys, "fueter", "--input", str(path), "--samples", "1")
    assert code == EXIT_SCHEMA


def test_text_report_is_flat(capsys):
    code, out, _ = run(capsys, "slag")
    assert code == EXIT_OK
    assert out.splitlines() == ['command: "slag"', 'kappa: ["2", "1"]', 'value: "2"']


@pytest.mark.parametrize("argv", [
    ["model-run", "--samples", "20"],
    ["atlas-check"],
    ["glue"],
    ["fueter", "--samples", "2"],
    ["forms-verify", "--samples", "300"],
])
def test_double_runs_are_byte_identical(tmp_path, argv):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.txt"
        assert main(argv + ["--seed", "7", "--output", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "holokernel", "slag", "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["value"] == "2"
