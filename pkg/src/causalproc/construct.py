"""Constructive decompositions for dephased processes.

Two algorithms: turning a bipartite process with dephased past and slot
inputs into an explicit QC-QC witness family (via a canonical S/T split and
a min-shift), and turning a fully dephased QC-QC into a QC-CC family by
ratio-splitting each diagonal cell across slot orders (with an induction
over layers in the N-partite case).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Mapping

import numpy as np
import scipy.linalg

from .hilbert import (
    DephasingBasis,
    LabeledOperator,
    _permute_subsystems,
    change_basis,
    dephase,
    identity,
    one_minus,
    partial_trace,
    tensor,
)
from .decomp import QcCcDecomposition, QcQcDecomposition, verify_qcqc
from .validity import ProcessMatrix, check_validity

ZERO_CELL_REL_CUTOFF = 1e-12
DIAGONAL_REL_TOL = 1e-9


class NotDiagonalError(ValueError):
    """Input carries coherences on a system the algorithm needs dephased."""


class SplitPreconditionError(ValueError):
    """The operator fails the two-sided trace-and-replace null condition."""


@dataclass
class STSplit:
    """Tr_F W written as S ⊗ 1^{B_O} + T ⊗ 1^{A_O}; S, T need not be PSD."""

    S: LabeledOperator
    T: LabeledOperator
    reconstruction_residual: float


def _diag_table(op: LabeledOperator) -> np.ndarray:
    return np.real(np.diag(op.mat)).reshape(op.dims)


def _diag_op(registry, names, table: np.ndarray) -> LabeledOperator:
    return LabeledOperator(registry, names, np.diag(table.ravel().astype(complex)))


def _require_diagonal(op: LabeledOperator, systems, what: str):
    scale = max(1.0, float(np.max(np.abs(op.mat))))
    x = op
    for s in systems:
        x = dephase(x, DephasingBasis.computational(s, op.registry.dim(s)))
    mass = float(np.max(np.abs(op.mat - x.mat)))
    if mass > DIAGONAL_REL_TOL * scale:
        raise NotDiagonalError(
            f"{what} has off-diagonal mass {mass:.3e} on {tuple(systems)}")


def _rotation_frames(w: ProcessMatrix, bases: Mapping[str, DephasingBasis] | None):
    """Unitaries taking each declared dephasing basis to the computational one."""
    frames = {}
    if bases:
        for name, b in bases.items():
            if not b.is_computational:
                frames[name] = b.vectors
    return frames


def _rotate_in(op: LabeledOperator, frames) -> LabeledOperator:
    for name, u in frames.items():
        if name in op.subsystems:
            op = change_basis(op, name, u)
    return op


def _rotate_out(op: LabeledOperator, frames) -> LabeledOperator:
    for name, u in frames.items():
        if name in op.subsystems:
            op = change_basis(op, name, u.conj().T)
    return op


def canonical_st_split(x: LabeledOperator, w: ProcessMatrix,
                       tol: float = 1e-9) -> STSplit:
    """Split x = Tr_F W into S ⊗ 1^{B_O} + T ⊗ 1^{A_O} by trace-and-replace.

    Exists whenever {}_{[1-A_O][1-B_O]} x = 0; the split is not unique and
    this picks the closed-form choice S = Tr_{B_O}x/d_{B_O},
    T = Tr_{A_O}x/d_{A_O} - (Tr_{A_OB_O}x) ⊗ 1^{B_O}/(d_{A_O}d_{B_O}).
    """
    a_i, a_o = w.slot_labels(1)
    b_i, b_o = w.slot_labels(2)
    precheck = one_minus(one_minus(x, {a_o}), {b_o}).norm()
    if precheck > tol:
        raise SplitPreconditionError(
            f"trace-and-replace null condition violated: residual {precheck:.3e}")
    d_ao, d_bo = w.d_out(1), w.d_out(2)
    s = partial_trace(x, {b_o}) / d_bo
    t = partial_trace(x, {a_o}) / d_ao - tensor(
        partial_trace(x, {a_o, b_o}), identity(w.registry, [b_o])) / (d_ao * d_bo)
    recon = (tensor(s, identity(w.registry, [b_o]))
             + tensor(t, identity(w.registry, [a_o])) - x).norm()
    if recon > 10 * tol:
        raise SplitPreconditionError(f"split reconstruction residual {recon:.3e}")
    # side conditions inherited from the one-sided validity constraints
    if one_minus(partial_trace(x, {b_i, b_o}), {a_o}).norm() <= tol:
        side = one_minus(partial_trace(s, {b_i}), {a_o}).norm()
        if side > 10 * tol:
            raise SplitPreconditionError(f"S side condition residual {side:.3e}")
    if one_minus(partial_trace(x, {a_i, a_o}), {b_o}).norm() <= tol:
        side = one_minus(partial_trace(t, {a_i}), {b_o}).norm()
        if side > 10 * tol:
            raise SplitPreconditionError(f"T side condition residual {side:.3e}")
    return STSplit(s, t, recon)


def _bipartite_prelude(w: ProcessMatrix, bases, diagonal_systems, tol):
    if w.n_slots != 2:
        raise ValueError("constructor requires a bipartite process")
    frames = _rotation_frames(w, bases)
    wr = w.with_op(_rotate_in(w.op, frames))
    rep = check_validity(wr, tol)
    if not rep.verdict:
        raise ValueError(f"input is not a valid process (max residual "
                         f"{rep.max_residual():.3e}, min eig {rep.psd_min_eig:.3e})")
    _require_diagonal(wr.op, diagonal_systems, "process")
    return wr, frames


def _finish_qcqc(registry, frames, w_ab, w_ba, w_a, w_b) -> QcQcDecomposition:
    wits = {((), 1): w_a, ((), 2): w_b, ((1,), 2): w_ab, ((2,), 1): w_ba}
    return QcQcDecomposition({k: _rotate_out(v, frames) for k, v in wits.items()})


def qcqc_from_dephased_all(w: ProcessMatrix,
                           bases: Mapping[str, DephasingBasis] | None = None,
                           tol: float = 1e-9) -> QcQcDecomposition:
    """QC-QC witnesses for a bipartite process dephased on P and all slot
    systems: scalar coefficient tables with a per-(p,i,j) min-shift."""
    a_i, a_o = w.slot_labels(1)
    b_i, b_o = w.slot_labels(2)
    diag_systems = list(w.past) + [a_i, a_o, b_i, b_o]
    wr, frames = _bipartite_prelude(w, bases, diag_systems, tol)

    x = partial_trace(wr.op, wr.future) if wr.future else wr.op
    split = canonical_st_split(x, wr, tol)
    s_tab = _diag_table(split.S)
    t_tab = _diag_table(split.T)
    ax_ao = split.S.subsystems.index(a_o)
    ax_bo = split.T.subsystems.index(b_o)
    s_min = s_tab.min(axis=ax_ao, keepdims=True)
    s_prime = s_tab - s_min
    cell_min = np.squeeze(s_min, axis=ax_ao)  # indexed by (P.., A_I, B_I)
    t_prime = t_tab + np.expand_dims(cell_min, axis=ax_bo)

    reg = wr.registry
    w_ab = _diag_op(reg, split.S.subsystems, s_prime)
    w_ba = _diag_op(reg, split.T.subsystems, t_prime)

    cell_names = tuple(n for n in split.S.subsystems if n != a_o)
    ax_bi = cell_names.index(b_i)
    ax_ai = cell_names.index(a_i)
    wa_names = tuple(n for n in cell_names if n != b_i)
    wb_names = tuple(n for n in cell_names if n != a_i)
    w_a = (partial_trace(split.S, {a_o, b_i}) / w.d_out(1)
           - _diag_op(reg, wa_names, cell_min.sum(axis=ax_bi)))
    w_b = (partial_trace(split.T, {b_o, a_i}) / w.d_out(2)
           + _diag_op(reg, wb_names, cell_min.sum(axis=ax_ai)))
    return _finish_qcqc(reg, frames, w_ab, w_ba, w_a, w_b)


def _cell_blocks(op: LabeledOperator, block_system: str):
    """View op (diagonal outside block_system) as one block per diagonal cell."""
    names = op.subsystems
    perm = [i for i, n in enumerate(names) if n != block_system]
    perm.append(names.index(block_system))
    mat = _permute_subsystems(op.mat, op.dims, perm)
    d_blk = op.registry.dim(block_system)
    n_cells = op.dim // d_blk
    blocks = [mat[c * d_blk:(c + 1) * d_blk, c * d_blk:(c + 1) * d_blk]
              for c in range(n_cells)]
    cell_names = tuple(n for n in names if n != block_system)
    return cell_names, blocks


def qcqc_from_dephased_inputs(w: ProcessMatrix,
                              bases: Mapping[str, DephasingBasis] | None = None,
                              tol: float = 1e-9) -> QcQcDecomposition:
    """QC-QC witnesses for a bipartite process dephased on P, A_I, B_I only;
    slot outputs may stay coherent.  The shift uses the minimum eigenvalue
    of each output block."""
    a_i, a_o = w.slot_labels(1)
    b_i, b_o = w.slot_labels(2)
    diag_systems = list(w.past) + [a_i, b_i]
    wr, frames = _bipartite_prelude(w, bases, diag_systems, tol)

    x = partial_trace(wr.op, wr.future) if wr.future else wr.op
    split = canonical_st_split(x, wr, tol)
    cell_names, s_blocks = _cell_blocks(split.S, a_o)
    _, t_blocks = _cell_blocks(split.T, b_o)
    d_ao, d_bo = w.d_out(1), w.d_out(2)

    shifts = []
    s_prime, t_prime = [], []
    for sb, tb in zip(s_blocks, t_blocks):
        lo = float(np.linalg.eigvalsh((sb + sb.conj().T) / 2)[0])
        shifts.append(lo)
        s_prime.append(sb - lo * np.eye(d_ao))
        t_prime.append(tb + lo * np.eye(d_bo))

    reg = wr.registry
    w_ab = LabeledOperator(reg, cell_names + (a_o,), scipy.linalg.block_diag(*s_prime))
    w_ba = LabeledOperator(reg, cell_names + (b_o,), scipy.linalg.block_diag(*t_prime))

    cell_dims = reg.dims(cell_names)
    shift_tab = np.array(shifts).reshape(cell_dims)
    ax_bi = cell_names.index(b_i)
    ax_ai = cell_names.index(a_i)
    wa_names = tuple(n for n in cell_names if n != b_i)
    wb_names = tuple(n for n in cell_names if n != a_i)
    w_a = (partial_trace(split.S, {a_o, b_i}) / d_ao
           - _diag_op(reg, wa_names, shift_tab.sum(axis=ax_bi)))
    w_b = (partial_trace(split.T, {b_o, a_i}) / d_bo
           + _diag_op(reg, wb_names, shift_tab.sum(axis=ax_ai)))
    return _finish_qcqc(reg, frames, w_ab, w_ba, w_a, w_b)


def qccc_from_dephased_qcqc(w: ProcessMatrix, d: QcQcDecomposition,
                            bases: Mapping[str, DephasingBasis] | None = None,
                            tol: float = 1e-9) -> QcCcDecomposition:
    """Ratio-split a fully dephased QC-QC (all non-future systems diagonal)
    into per-order QC-CC witnesses, layer by layer."""
    n = w.n_slots
    frames = _rotation_frames(w, bases)
    wr = w.with_op(_rotate_in(w.op, frames))
    dr = d.map(lambda op: _rotate_in(op, frames))
    rep = verify_qcqc(wr, dr, tol)
    if not rep.verdict:
        raise ValueError(f"decomposition fails QC-QC verification (max residual "
                         f"{rep.max_residual():.3e}, min eig {rep.psd_min_eig:.3e})")
    non_future = [s for s in wr.op.subsystems if s not in wr.future]
    _require_diagonal(wr.op, non_future, "process")
    for key, op in dr.witnesses.items():
        _require_diagonal(op, op.subsystems, f"witness {key}")

    reg = wr.registry
    cutoff = ZERO_CELL_REL_CUTOFF * abs(wr.op.trace())

    def ratio_table(num_op: LabeledOperator, den_op: LabeledOperator) -> np.ndarray:
        num = np.real(np.diag(num_op.mat))
        den = np.real(np.diag(den_op.mat))
        return np.where(den > cutoff, num / np.where(den > cutoff, den, 1.0), 0.0)

    order_witnesses: dict[tuple[int, ...], LabeledOperator] = {}
    for k in range(1, n + 1):
        order_witnesses[(k,)] = dr[((), k)]

    for size in range(1, n):
        for subset_key in {tuple(sorted(key[0])) for key in dr.witnesses if len(key[0]) == size}:
            den = None
            for nxt in range(1, n + 1):
                if nxt in subset_key:
                    continue
                t = partial_trace(dr[(subset_key, nxt)], {wr.slot_in(nxt)})
                den = t if den is None else den + t
            for seq in permutations(subset_key):
                num = tensor(order_witnesses[seq],
                             identity(reg, [wr.slot_out(seq[-1])]))
                ratio = ratio_table(num, den)
                scaler = _diag_op(reg, den.subsystems, ratio)
                for nxt in range(1, n + 1):
                    if nxt in subset_key:
                        continue
                    src = dr[(subset_key, nxt)]
                    full_scaler = tensor(scaler, identity(reg, [wr.slot_in(nxt)]))
                    order_witnesses[seq + (nxt,)] = (full_scaler @ src).hermitize()

    den = partial_trace(wr.op, wr.future) if wr.future else wr.op
    terminal: dict[tuple[int, ...], LabeledOperator] = {}
    for seq in permutations(range(1, n + 1)):
        num = tensor(order_witnesses[seq], identity(reg, [wr.slot_out(seq[-1])]))
        ratio = ratio_table(num, den)
        scaler = _diag_op(reg, den.subsystems, ratio)
        if wr.future:
            scaler = tensor(scaler, identity(reg, wr.future))
        terminal[seq] = (scaler @ wr.op).hermitize()

    out = QcCcDecomposition(order_witnesses, terminal)
    return out.map(lambda op: _rotate_out(op, frames))
