"""CLI pipelines over the shared JSON format."""

import json
import subprocess

import pytest


def run(args, stdin_text=None):
    return subprocess.run(["causalproc"] + args, input=stdin_text,
                          capture_output=True, text=True, timeout=600)


@pytest.fixture(scope="module")
def switch_json():
    r = run(["build-switch"])
    assert r.returncode == 0
    return r.stdout


@pytest.fixture(scope="module")
def example2_json():
    r = run(["build-example", "2"])
    assert r.returncode == 0
    return r.stdout


def test_build_switch_then_validate(switch_json):
    r = run(["validate", "--expect", "valid"], switch_json)
    assert r.returncode == 0
    assert "verdict: valid" in r.stdout


def test_validate_json_output(switch_json):
    r = run(["validate", "--json"], switch_json)
    assert r.returncode == 0
    rep = json.loads(r.stdout)
    assert rep["verdict"] is True
    assert max(rep["residuals"].values()) <= 1e-10


def test_check_qccc_expect_infeasible(example2_json):
    r = run(["check-qccc", "--expect", "infeasible"], example2_json)
    assert r.returncode == 0
    assert "infeasible" in r.stdout
    assert "causally nonseparable" in r.stdout


def test_check_qcqc_expect_feasible(switch_json):
    r = run(["check-qcqc", "--expect", "feasible", "--json"], switch_json)
    assert r.returncode == 0
    v = json.loads(r.stdout)
    assert v["status"] == "Feasible"
    assert v["point"]["kind"] == "qcqc"


def test_expect_mismatch_exits_one(example2_json):
    r = run(["check-qccc", "--expect", "feasible"], example2_json)
    assert r.returncode == 1


def test_decompose_pipeline(switch_json, tmp_path):
    pattern = {name: "dephase-z"
               for name in ("P_c", "P_t", "A_I", "A_O", "B_I", "B_O")}
    pfile = tmp_path / "pattern.json"
    pfile.write_text(json.dumps(pattern))
    r1 = run(["apply-pattern", "--pattern", str(pfile)], switch_json)
    assert r1.returncode == 0
    r2 = run(["decompose", "--method", "dephased-all"], r1.stdout)
    assert r2.returncode == 0
    r3 = run(["check-decomposition", "--expect", "valid"], r2.stdout)
    assert r3.returncode == 0
    r4 = run(["decompose", "--method", "qccc-from-qcqc"], r1.stdout)
    assert r4.returncode == 0
    r5 = run(["check-decomposition", "--json"], r4.stdout)
    assert json.loads(r5.stdout)["verdict"] is True


def test_decompose_rejects_coherent_process(switch_json):
    r = run(["decompose", "--method", "dephased-all"], switch_json)
    assert r.returncode == 2
    assert "error:" in r.stderr


def test_malformed_json_diagnostics():
    r = run(["validate"], '{"registry": [,]}')
    assert r.returncode == 2
    assert "line 1" in r.stderr and "column" in r.stderr


def test_bad_process_json_exits_two():
    r = run(["check-qccc"], '{"registry": []}')
    assert r.returncode == 2


def test_dump_system_block_count(example2_json):
    r = run(["dump-system", "--class", "qccc"], example2_json)
    assert r.returncode == 0
    sysd = json.loads(r.stdout)
    assert sysd["kind"] == "qccc"
    assert len(sysd["blocks"]) == 6
    r = run(["dump-system", "--class", "qcqc"], example2_json)
    assert len(json.loads(r.stdout)["blocks"]) == 4


def test_check_writes_system_dump(example2_json, tmp_path):
    out = tmp_path / "system.json"
    r = run(["check-qccc", "--dump-system", str(out)], example2_json)
    assert r.returncode == 0
    assert json.loads(out.read_text())["kind"] == "qccc"


def test_report_on_white_noise(tmp_path):
    # white noise built by round-tripping the switch registry with I/8 entries
    import numpy as np

    from causalproc.hilbert import SpaceRegistry, identity
    from causalproc.serialize import process_to_json
    from causalproc.validity import white_noise_process

    reg = SpaceRegistry([("P", 1), ("A_I", 2), ("A_O", 2),
                         ("B_I", 2), ("B_O", 2), ("F", 1)])
    roles = {"P": "P", "A_I": "I1", "A_O": "O1",
             "B_I": "I2", "B_O": "O2", "F": "F"}
    wn_json = json.dumps(process_to_json(white_noise_process(reg, roles)))
    r = run(["report", "--json"], wn_json)
    assert r.returncode == 0
    rep = json.loads(r.stdout)
    assert rep["validity"]["verdict"] is True
    assert rep["memberships"]["qcqc"]["status"] == "Feasible"
    assert rep["memberships"]["qccc"]["status"] == "Feasible"
    plain = run(["report"], wn_json)
    assert "causally separable" in plain.stdout
