"""Shared fixtures.

Process fixtures come either from the primary CLI (consumed strictly as an
external program over stdin/stdout) or are written from scratch here.
"""

import json
import subprocess

import numpy as np
import pytest


def run_primary(args, stdin_text=None):
    proc = subprocess.run(["causalproc", *args], input=stdin_text,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def white_noise_process(tmp_path_factory):
    """Bipartite white noise on six qubits, written without the primary."""
    names = [("P", "P"), ("A_I", "I1"), ("A_O", "O1"),
             ("B_I", "I2"), ("B_O", "O2"), ("F", "F")]
    d = 2 ** len(names)
    mat = np.eye(d) * (8.0 / d)  # trace d_P * d_O1 * d_O2 = 8
    data = {
        "registry": [{"name": n, "dim": 2, "role": r} for n, r in names],
        "operator": {
            "subsystems": [n for n, _ in names],
            "entries": [[float(z.real), float(z.imag)] for z in mat.ravel()],
        },
    }
    path = tmp_path_factory.mktemp("wn") / "white_noise.json"
    path.write_text(json.dumps(data))
    return path


@pytest.fixture(scope="session")
def example2_process(tmp_path_factory):
    path = tmp_path_factory.mktemp("ex2") / "example2.json"
    path.write_text(run_primary(["build-example", "2"]))
    return path


@pytest.fixture(scope="session")
def example2_qccc_dump(example2_process, tmp_path_factory):
    out = run_primary(["dump-system", "--class", "qccc"],
                      stdin_text=example2_process.read_text())
    path = tmp_path_factory.mktemp("ex2sys") / "example2.qccc.json"
    path.write_text(out)
    return path
