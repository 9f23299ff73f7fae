"""Labeled operator algebra: tensor, traces, dephasing, eigensystems."""

import numpy as np
import pytest

from causalproc.hilbert import (
    DephasingBasis,
    LabeledOperator,
    SpaceRegistry,
    SubsystemError,
    SystemLabel,
    dephase,
    hermitian_eigs,
    identity,
    ket,
    min_eig,
    one_minus,
    outer,
    partial_trace,
    psd_check,
    tensor,
    trace_and_replace,
)
from causalproc.switch import build_example, build_quantum_switch

from helpers import random_hermitian

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture(scope="module")
def reg():
    return SpaceRegistry([("a", 2), ("b", 2), ("c", 2)])


# -- registry and operator basics ---------------------------------------------


def test_registry_rejects_duplicates():
    with pytest.raises(SubsystemError):
        SpaceRegistry([("a", 2), ("a", 3)])


def test_label_rejects_nonpositive_dim():
    with pytest.raises(SubsystemError):
        SystemLabel("a", 0)


def test_operator_shape_must_match(reg):
    with pytest.raises(ValueError):
        LabeledOperator(reg, ("a",), np.eye(3))


def test_operator_is_immutable(reg):
    op = identity(reg, ["a"])
    with pytest.raises(AttributeError):
        op.mat = np.zeros((2, 2))


def test_canonical_reordering_makes_equal_operators(reg):
    # same operator fed with permuted factor order must be stored identically
    m = np.kron(PAULI_X, PAULI_Z)
    direct = LabeledOperator(reg, ("a", "b"), m)
    swapped = LabeledOperator(reg, ("b", "a"), np.kron(PAULI_Z, PAULI_X))
    assert direct.isclose(swapped, atol=0.0)


# -- tensor -------------------------------------------------------------------


def test_tensor_identities(reg):
    t = tensor(identity(reg, ["a"]), identity(reg, ["b"]))
    assert t.subsystems == ("a", "b")
    assert np.array_equal(t.mat, np.eye(4))


def test_tensor_traceless_factor(reg):
    p0 = outer(reg, ["a"], np.array([1, 0], dtype=complex))
    x = LabeledOperator(reg, ("c",), PAULI_X)
    assert abs(tensor(p0, x).trace()) == 0.0


def test_tensor_matches_direct_kronecker(reg):
    a = random_hermitian(reg, ("a",), 1)
    b = random_hermitian(reg, ("c",), 2)
    got = tensor(a, b)
    assert np.allclose(got.mat, np.kron(a.mat, b.mat))
    # tensoring in swapped argument order reaches the same canonical layout
    assert got.isclose(tensor(b, a), atol=1e-14)


def test_tensor_rejects_overlap(reg):
    with pytest.raises(SubsystemError):
        tensor(identity(reg, ["a"]), identity(reg, ["a", "b"]))


# -- partial trace ------------------------------------------------------------


def test_partial_trace_bell_marginal(reg):
    bell = outer(reg, ["a", "b"],
                 np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))
    red = partial_trace(bell, {"b"})
    assert np.allclose(red.mat, np.eye(2) / 2)


def test_partial_trace_of_product_factorizes(reg):
    a = random_hermitian(reg, ("a",), 3)
    b = random_hermitian(reg, ("b",), 4)
    red = partial_trace(tensor(a, b), {"b"})
    assert np.allclose(red.mat, a.mat * b.trace())


def test_partial_trace_preserves_full_trace(reg):
    w = random_hermitian(reg, ("a", "b", "c"), 5)
    assert abs(partial_trace(w, {"a", "c"}).trace() - w.trace()) < 1e-12


def test_partial_trace_unknown_subsystem(reg):
    with pytest.raises(SubsystemError):
        partial_trace(identity(reg, ["a"]), {"b"})


def test_switch_target_marginal_matches_pipeline():
    # the traced, past-projected switch equals the pre-dephasing stage of the
    # first example's pipeline
    from causalproc.hilbert import sandwich
    from causalproc.switch import SlotPattern, apply_pattern

    w = build_quantum_switch()
    e0 = np.array([1, 0], dtype=complex)
    stage = partial_trace(sandwich(w.op, "P_t", e0), {"F_t"})
    pat = SlotPattern({"P_t": e0, "F_t": "trace-out"})
    piped = apply_pattern(w, pat)
    assert np.allclose(stage.mat, piped.op.mat, atol=1e-14)


# -- trace-and-replace and its complement ------------------------------------


def test_trace_and_replace_fixes_identity(reg):
    w = identity(reg, ["a", "b"])
    assert trace_and_replace(w, {"a"}).isclose(w, atol=0.0)


def test_trace_and_replace_is_projector(reg):
    w = random_hermitian(reg, ("a", "b", "c"), 6)
    once = trace_and_replace(w, {"b", "c"})
    assert once.isclose(trace_and_replace(once, {"b", "c"}), atol=1e-13)
    assert abs(once.trace() - w.trace()) < 1e-12


def test_trace_and_replace_is_self_adjoint(reg):
    a = random_hermitian(reg, ("a", "b"), 7)
    b = random_hermitian(reg, ("a", "b"), 8)
    pa = trace_and_replace(a, {"b"})
    pb = trace_and_replace(b, {"b"})
    lhs = np.trace(pa.mat.conj().T @ b.mat)
    rhs = np.trace(a.mat.conj().T @ pb.mat)
    assert abs(lhs - rhs) < 1e-12


def test_one_minus_annihilates_identity(reg):
    w = identity(reg, ["a", "b"])
    assert one_minus(w, {"a"}).norm() == 0.0


def test_one_minus_after_replace_vanishes(reg):
    w = random_hermitian(reg, ("a", "b"), 9)
    assert one_minus(trace_and_replace(w, {"a"}), {"a"}).norm() < 1e-13


def test_switch_satisfies_two_sided_null_condition():
    w = build_quantum_switch()
    x = partial_trace(w.op, {"F_t", "F_c"})
    r = one_minus(one_minus(x, {"A_O"}), {"B_O"})
    assert r.norm() <= 1e-10


def test_switch_one_sided_marginal_condition():
    w = build_quantum_switch()
    x = partial_trace(w.op, {"F_t", "F_c", "B_I", "B_O"})
    assert one_minus(x, {"A_O"}).norm() <= 1e-10


# -- dephasing ----------------------------------------------------------------


def test_dephase_plus_state(reg):
    plus = outer(reg, ["a"], np.array([1, 1], dtype=complex) / np.sqrt(2))
    z = DephasingBasis.computational("a", 2)
    assert np.allclose(dephase(plus, z).mat, np.eye(2) / 2)


def test_dephase_is_idempotent(reg):
    w = random_hermitian(reg, ("a", "b"), 10)
    z = DephasingBasis.computational("a", 2)
    once = dephase(w, z)
    assert once.isclose(dephase(once, z), atol=1e-14)


def test_dephase_unital_and_trace_preserving(reg):
    z = DephasingBasis.pauli_x("b")
    assert dephase(identity(reg, ["a", "b"]), z).isclose(
        identity(reg, ["a", "b"]), atol=1e-14)
    w = random_hermitian(reg, ("a", "b"), 11)
    assert abs(dephase(w, z).trace() - w.trace()) < 1e-12


def test_dephase_preserves_positivity(reg):
    w = random_hermitian(reg, ("a", "b"), 12)
    lo = min_eig(w)
    psd = w - identity(reg, ["a", "b"]) * lo
    assert psd_check(dephase(psd, DephasingBasis.pauli_x("a")))


def test_dephase_commutes_with_partial_trace(reg):
    w = random_hermitian(reg, ("a", "b", "c"), 13)
    z = DephasingBasis.computational("a", 2)
    lhs = partial_trace(dephase(w, z), {"c"})
    rhs = dephase(partial_trace(w, {"c"}), z)
    assert lhs.isclose(rhs, atol=1e-13)


def test_dephase_dimension_mismatch():
    reg = SpaceRegistry([("q", 3)])
    with pytest.raises(ValueError):
        dephase(identity(reg, ["q"]), DephasingBasis.computational("q", 2))


def test_basis_must_be_orthonormal():
    with pytest.raises(ValueError):
        DephasingBasis("a", np.array([[1, 1], [0, 0]], dtype=complex))


def test_x_basis_diagonalizes_pauli_x(reg):
    x = LabeledOperator(reg, ("a",), PAULI_X)
    d = dephase(x, DephasingBasis.pauli_x("a"))
    assert d.isclose(x, atol=1e-14)  # X is already diagonal in its eigenbasis


# -- adjointness --------------------------------------------------------------


def test_tensor_partial_trace_adjointness(reg):
    a = random_hermitian(reg, ("a",), 14)
    w = random_hermitian(reg, ("a", "b"), 15)
    lhs = np.trace(tensor(a, identity(reg, ["b"])).mat @ w.mat)
    rhs = np.trace(a.mat @ partial_trace(w, {"b"}).mat)
    assert abs(lhs - rhs) < 1e-12


# -- eigensystems and PSD -----------------------------------------------------


def test_eigs_pauli_x(reg):
    vals, _ = hermitian_eigs(LabeledOperator(reg, ("a",), PAULI_X))
    assert np.allclose(vals, [-1.0, 1.0])


def test_eigs_identity(reg):
    vals, _ = hermitian_eigs(identity(reg, ["a", "b"]))
    assert np.allclose(vals, np.ones(4))


def test_min_eig_matches_2x2_closed_form(reg):
    w = random_hermitian(reg, ("a",), 16)
    tr = np.real(np.trace(w.mat))
    det = np.real(np.linalg.det(w.mat))
    expected = tr / 2 - np.sqrt(tr * tr / 4 - det)
    assert abs(min_eig(w) - expected) < 1e-10


def test_eigs_reject_non_hermitian(reg):
    op = LabeledOperator(reg, ("a",), np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        hermitian_eigs(op)


def test_psd_check_basics(reg):
    assert psd_check(identity(reg, ["a"]))
    assert not psd_check(LabeledOperator(reg, ("a",), PAULI_Z))


def test_psd_check_second_example():
    assert psd_check(build_example(2).op)


def test_ket_and_outer_consistency(reg):
    v = ket(reg, {"a": 1, "b": 0})
    assert v.shape == (4,)
    assert v[2] == 1.0  # |1>|0> in row-major joint index
    op = outer(reg, ["a", "b"], v)
    assert abs(op.trace() - 1.0) < 1e-15
