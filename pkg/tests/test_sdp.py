"""Feasibility engine: system assembly, verdicts, and certificates."""

import numpy as np
import pytest

from causalproc.decomp import verify_qccc, verify_qcqc
from causalproc.hilbert import DephasingBasis, SpaceRegistry
from causalproc.sdp import (
    Verdict,
    assemble_qccc_system,
    assemble_qcqc_system,
    qccc_membership,
    qcqc_membership,
    solve_feasibility,
    validate_certificate,
)
from causalproc.validity import (
    random_valid_process,
    white_noise_process,
)


def tripartite_setup():
    reg = SpaceRegistry([("P", 1)] + [(f"{s}{k}", 2) for k in (1, 2, 3)
                                      for s in ("I", "O")] + [("F", 2)])
    roles = {"P": "P", "F": "F"}
    for k in (1, 2, 3):
        roles[f"I{k}"] = f"I{k}"
        roles[f"O{k}"] = f"O{k}"
    return reg, roles


# -- assembly audits -----------------------------------------------------------


def test_qcqc_block_dims_for_switch(switch):
    sys = assemble_qcqc_system(switch)
    dims = sorted(sys.block_dim(labels) for _, labels in sys.blocks)
    assert dims == [8, 8, 32, 32]
    assert sorted(g.name for g in sys.groups) == [
        "layer(1,)", "layer(2,)", "root", "top"]


def test_qcqc_single_slot_degenerate():
    reg = SpaceRegistry([("P", 1), ("A_I", 2), ("A_O", 2), ("F", 1)])
    roles = {"P": "P", "A_I": "I1", "A_O": "O1", "F": "F"}
    wn = white_noise_process(reg, roles)
    sys = assemble_qcqc_system(wn)
    assert len(sys.blocks) == 1
    assert [g.name for g in sys.groups] == ["top", "root"]
    v = solve_feasibility(sys)
    assert v.status == "Feasible"


def test_qcqc_counts_for_three_slots():
    reg, roles = tripartite_setup()
    sys = assemble_qcqc_system(white_noise_process(reg, roles))
    assert len(sys.blocks) == 3 + 6 + 3  # one per (subset, next)
    assert len(sys.groups) == 1 + 3 + 3 + 1  # top, two layer tiers, root


def test_qccc_block_structure_bipartite(switch):
    sys = assemble_qccc_system(switch)
    assert len(sys.blocks) == 6
    full = [labels for key, labels in sys.blocks if key[0] == "terminal"]
    assert len(full) == 2
    assert all(labels == switch.op.subsystems for labels in full)


def test_qccc_counts_for_three_slots():
    reg, roles = tripartite_setup()
    sys = assemble_qccc_system(white_noise_process(reg, roles))
    order = [k for k, _ in sys.blocks if k[0] == "order"]
    term = [k for k, _ in sys.blocks if k[0] == "terminal"]
    assert len(order) == 3 + 6 + 6
    assert len(term) == 6


def test_assembly_rejects_invalid_process(reg6, roles6):
    wn = white_noise_process(reg6, roles6)
    bad = wn.with_op(wn.op * 3)
    with pytest.raises(ValueError):
        assemble_qcqc_system(bad)
    with pytest.raises(ValueError):
        assemble_qccc_system(bad)


# -- verdicts ------------------------------------------------------------------


def test_switch_is_qcqc_feasible(switch):
    v = qcqc_membership(switch)
    assert v.status == "Feasible"
    assert verify_qcqc(switch, v.point, tol=1e-7).verdict


def test_switch_is_not_qccc(switch):
    v = qccc_membership(switch)
    assert v.status == "Infeasible"
    assert v.margin >= 1e-6
    assert "causally nonseparable" in v.note


def test_white_noise_is_qccc_feasible(reg6, roles6):
    wn = white_noise_process(reg6, roles6)
    v = qccc_membership(wn)
    assert v.status == "Feasible"
    assert verify_qccc(wn, v.point, tol=1e-7).verdict


def test_budget_exhaustion_is_undetermined(switch):
    v = solve_feasibility(assemble_qccc_system(switch), max_iter=2)
    assert v.status == "Undetermined"


def test_classes_coincide_for_trivial_future(reg5, roles5):
    for seed in range(4):
        w = random_valid_process(reg5, roles5, seed=seed)
        a = qcqc_membership(w)
        b = qccc_membership(w)
        assert {a.status, b.status} != {"Feasible", "Infeasible"}
        # with d_F = 1 both characterizations accept the same processes
        if "Undetermined" not in (a.status, b.status):
            assert a.status == b.status


def test_feasible_closed_under_dephasing_and_mixing(reg5, roles5):
    wn = white_noise_process(reg5, roles5)
    a = random_valid_process(reg5, roles5, seed=0)
    a = a.with_op((a.op * 0.3 + wn.op * 0.7).hermitize())
    b = random_valid_process(reg5, roles5, seed=1)
    b = b.with_op((b.op * 0.3 + wn.op * 0.7).hermitize())
    assert qccc_membership(a).status == "Feasible"
    assert qccc_membership(b).status == "Feasible"
    deph = a.dephased([DephasingBasis.pauli_x("A_I")])
    assert qccc_membership(deph).status == "Feasible"
    mix = a.with_op((a.op * 0.5 + b.op * 0.5).hermitize())
    assert qccc_membership(mix).status == "Feasible"


# -- certificates --------------------------------------------------------------


def test_certificate_revalidates(switch):
    sys = assemble_qccc_system(switch)
    v = solve_feasibility(sys)
    assert v.status == "Infeasible"
    ok, margin, dual_res = validate_certificate(sys, v.certificate)
    assert ok
    assert margin >= 1e-6
    assert dual_res <= 1e-8


def test_tampered_certificate_rejected(switch):
    sys = assemble_qccc_system(switch)
    v = solve_feasibility(sys)
    flipped = {name: -op for name, op in v.certificate.items()}
    ok, _, _ = validate_certificate(sys, flipped)
    assert not ok
    bumped = dict(v.certificate)
    name, op = next(iter(bumped.items()))
    rng = np.random.default_rng(0)
    noise = rng.normal(size=op.mat.shape) + 1j * rng.normal(size=op.mat.shape)
    from causalproc.hilbert import LabeledOperator
    bumped[name] = LabeledOperator(
        op.registry, op.subsystems,
        op.mat + (noise + noise.conj().T) * op.norm())
    ok, _, dual_res = validate_certificate(sys, bumped)
    assert not ok or dual_res > 1e-8


def test_verdict_json_shape(switch):
    v = qccc_membership(switch)
    data = v.to_json()
    assert data["status"] == "Infeasible"
    assert data["margin"] >= 1e-6
    assert isinstance(data["runtime_s"], float)
