"""Batch differential runs through the command-line entry point."""

import json

from crosscheck.cli import crosscheck_one, main


def test_batch_white_noise_agrees(white_noise_process, tmp_path, capsys):
    manifest = tmp_path / "manifest.txt"
    manifest.write_text(f"{white_noise_process}\n")
    code = main(["batch", str(manifest), "--class", "qccc", "--remodel"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["summary"] == {"total": 1, "disagreements": 0, "errors": 0}
    rec = out["records"][0]
    assert rec["agree"]
    assert rec["primary_status"] == rec["oracle_status"] == "Feasible"
    assert len(rec["digest"]) == 16


def test_batch_empty_manifest(tmp_path, capsys):
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("\n")
    code = main(["batch", str(manifest)])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["summary"]["total"] == 0


def test_corrupted_file_yields_error_record(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    manifest = tmp_path / "manifest.txt"
    manifest.write_text(f"{bad}\n")
    code = main(["batch", str(manifest)])
    out = json.loads(capsys.readouterr().out)
    assert code == 2
    assert out["summary"]["errors"] == 1
    rec = out["records"][0]
    assert not rec["agree"]
    assert rec["error"]


def test_missing_file_yields_error_record(tmp_path):
    rec = crosscheck_one(str(tmp_path / "nope.json"), "qccc")
    assert rec.error and not rec.agree


def test_oracle_subcommand_prints_verdict(example2_process, example2_qccc_dump,
                                          capsys):
    code = main(["oracle", str(example2_process), "--class", "qccc",
                 "--system", str(example2_qccc_dump)])
    verdict = json.loads(capsys.readouterr().out)
    assert code == 0
    assert verdict["status"] == "Infeasible"
