import json
import subprocess
import sys

import pytest

from harmindex.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, main, run


def _load(path):
    return json.loads(path.read_text())


def test_certify_energy_identity3(tmp_path):
    status = main(["certify-energy", "--map", "identity3", "--degree", "1", "--seed", "42",
                   "--resolution", "16", "--output", str(tmp_path)])
    assert status == EXIT_OK
    doc = _load(tmp_path / "certificate_energy_identity3.json")
    assert doc["certificate"]["certified_bound"] == 4
    assert doc["config"]["seed"] == 42
    assert doc["resolution"] == 16
    assert set(doc["tolerances"]) == {"algebraic", "quadrature", "finite_difference"}
    assert all(c["verdict"] == "PASS" for c in doc["checks"].values())


def test_verify_identities_degree_two_fails(tmp_path):
    status = main(["verify-identities", "--degree", "2", "--sphere", "2", "--resolution", "16",
                   "--output", str(tmp_path)])
    assert status == EXIT_FAIL
    doc = _load(tmp_path / "identities_S2_k2.json")
    assert doc["checks"]["hessian_identity"]["verdict"] == "FAIL"
    assert doc["checks"]["strong_harmonicity"]["verdict"] == "PASS"
    assert not doc["passed"]


def test_verify_identities_degree_one_passes(tmp_path):
    assert main(["verify-identities", "--sphere", "3", "--resolution", "12", "--output", str(tmp_path)]) == EXIT_OK


def test_flow_decay_clifford(tmp_path):
    status = main(["flow-decay", "--map", "clifford", "--t-max", "0.5", "--resolution", "16",
                   "--output", str(tmp_path)])
    assert status == EXIT_OK
    text = (tmp_path / "flow_clifford_volume.csv").read_text()
    assert text.startswith("t,value\n")
    assert "# verdict: PASS" in text
    assert (tmp_path / "flow_clifford_energy.csv").exists()


def test_certify_volume_equator_declined_is_not_failure(tmp_path):
    assert main(["certify-volume", "--map", "equator23", "--resolution", "12", "--output", str(tmp_path)]) == EXIT_OK
    doc = _load(tmp_path / "certificate_volume_equator23.json")
    assert doc["certificate"]["certified_bound"] == 0
    assert doc["certificate"]["reasons"]


@pytest.mark.parametrize("argv", [
    ["certify-energy", "--resolution", "4"],
    ["certify-energy", "--degree", "0"],
    ["certify-energy", "--map", "sphere9"],
    ["flow-decay", "--t-max", "-1"],
    ["verify-identities", "--sphere", "7"],
])
def test_bad_config_is_usage_error(argv, tmp_path):
    assert main(argv + ["--output", str(tmp_path)]) == EXIT_USAGE


def test_unknown_command_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["launch"])
    assert exc.value.code == 2


def test_output_directory_from_environment(tmp_path):
    out = tmp_path / "env-out"
    main(["certify-volume", "--map", "equator23", "--resolution", "10"], environ={"HARMINDEX_OUTPUT": str(out)})
    assert (out / "certificate_volume_equator23.json").exists()


def test_run_config_validation():
    cfg = RunConfig("report-all", "identity3", 1, 0, 7, 1.0, "x")
    with pytest.raises(ValueError):
        cfg.validate()


def test_report_all_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(RunConfig("report-all", "identity3", 1, 0, 12, 0.5, str(out))) == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = _load(a / "summary.json")
    assert summary["checks"]["all_suites"]["verdict"] == "PASS"
    k2 = _load(a / "identities_S2_k2.json")
    assert k2["checks"]["hessian_identity"]["verdict"] == "XFAIL"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "harmindex", "certify-energy", "--map", "identity2",
                           "--resolution", "10", "--output", str(tmp_path)], capture_output=True)
    assert proc.returncode == EXIT_OK
