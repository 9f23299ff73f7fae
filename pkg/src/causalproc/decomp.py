"""Witness families for quantum/classical control of causal order.

A QC-QC decomposition assigns a PSD witness to every (unordered subset,
next slot) pair; a QC-CC decomposition assigns one to every ordered slot
sequence plus a terminal witness per complete order.  Verification checks
the layered trace equalities and the PSD margins; the membership *search*
lives in the SDP engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Iterable

from .hilbert import (
    DephasingBasis,
    LabeledOperator,
    SubsystemError,
    dephase,
    hermitian_eigs,
    identity,
    partial_trace,
    tensor,
)
from .validity import ProcessMatrix, ValidityReport

SubsetKey = tuple[tuple[int, ...], int]  # (sorted strict subset, next slot)
SequenceKey = tuple[int, ...]


def subsets_of_size(n_slots: int, size: int):
    return combinations(range(1, n_slots + 1), size)


def qcqc_keys(n_slots: int):
    """All (K_n, k_{n+1}) witness indices, layer by layer."""
    for n in range(n_slots):
        for done in subsets_of_size(n_slots, n):
            for nxt in range(1, n_slots + 1):
                if nxt not in done:
                    yield (done, nxt)


def qcqc_witness_labels(w: ProcessMatrix, key: SubsetKey) -> tuple[str, ...]:
    done, nxt = key
    labels = list(w.past)
    for k in done:
        labels.extend(w.slot_labels(k))
    labels.append(w.slot_in(nxt))
    return w.registry.sort(labels)


def qccc_sequence_labels(w: ProcessMatrix, seq: SequenceKey) -> tuple[str, ...]:
    labels = list(w.past)
    for k in seq[:-1]:
        labels.extend(w.slot_labels(k))
    labels.append(w.slot_in(seq[-1]))
    return w.registry.sort(labels)


@dataclass
class QcQcDecomposition:
    """PSD witnesses indexed by (executed subset, next slot)."""

    witnesses: dict[SubsetKey, LabeledOperator]

    def __getitem__(self, key: SubsetKey) -> LabeledOperator:
        return self.witnesses[tuple(sorted(key[0])), key[1]]

    def map(self, fn) -> "QcQcDecomposition":
        return QcQcDecomposition({k: fn(v) for k, v in self.witnesses.items()})


@dataclass
class QcCcDecomposition:
    """PSD witnesses per ordered sequence, plus one per complete order
    retaining the future system."""

    order_witnesses: dict[SequenceKey, LabeledOperator]
    terminal_witnesses: dict[SequenceKey, LabeledOperator]

    def map(self, fn) -> "QcCcDecomposition":
        return QcCcDecomposition(
            {k: fn(v) for k, v in self.order_witnesses.items()},
            {k: fn(v) for k, v in self.terminal_witnesses.items()},
        )


def _psd_floor(ops: Iterable[LabeledOperator]) -> float:
    lo = 0.0
    for op in ops:
        lo = min(lo, float(hermitian_eigs(op)[0][0]))
    return lo


def _check_labels(op: LabeledOperator, labels: tuple[str, ...], what: str):
    if op.subsystems != labels:
        raise SubsystemError(f"witness {what} lives on {op.subsystems}, expected {labels}")


def verify_qcqc(w: ProcessMatrix, d: QcQcDecomposition, tol: float = 1e-9) -> ValidityReport:
    """Residuals of the layered QC-QC equalities plus witness PSD margins."""
    n = w.n_slots
    expected = set(qcqc_keys(n))
    if set(d.witnesses) != expected:
        raise SubsystemError(
            f"witness index set mismatch: missing {expected - set(d.witnesses)}, "
            f"extra {set(d.witnesses) - expected}")
    for key, op in d.witnesses.items():
        _check_labels(op, qcqc_witness_labels(w, key), str(key))

    residuals: dict[str, float] = {}
    top = partial_trace(w.op, w.future) if w.future else w.op
    acc = None
    for k in range(1, n + 1):
        done = tuple(s for s in range(1, n + 1) if s != k)
        term = tensor(d[(done, k)], identity(w.registry, [w.slot_out(k)]))
        acc = term if acc is None else acc + term
    residuals["top"] = (top - acc).norm()

    for size in range(1, n):
        for done in subsets_of_size(n, size):
            lhs = None
            for nxt in range(1, n + 1):
                if nxt in done:
                    continue
                t = partial_trace(d[(done, nxt)], {w.slot_in(nxt)})
                lhs = t if lhs is None else lhs + t
            rhs = None
            for k in done:
                prev = tuple(s for s in done if s != k)
                t = tensor(d[(prev, k)], identity(w.registry, [w.slot_out(k)]))
                rhs = t if rhs is None else rhs + t
            residuals[f"layer{done}"] = (lhs - rhs).norm()

    root = None
    for k in range(1, n + 1):
        t = partial_trace(d[((), k)], {w.slot_in(k)})
        root = t if root is None else root + t
    residuals["root"] = (root - identity(w.registry, w.past)).norm()

    return ValidityReport(residuals, 0.0, _psd_floor(d.witnesses.values()), tol)


def verify_qccc(w: ProcessMatrix, d: QcCcDecomposition, tol: float = 1e-9) -> ValidityReport:
    """Residuals of the per-order QC-CC equalities plus witness PSD margins."""
    n = w.n_slots
    full_orders = set(permutations(range(1, n + 1)))
    expected_orders = {seq for m in range(1, n + 1)
                       for seq in permutations(range(1, n + 1), m)}
    if set(d.order_witnesses) != expected_orders:
        raise SubsystemError("order witness index set mismatch")
    if set(d.terminal_witnesses) != full_orders:
        raise SubsystemError("terminal witness index set mismatch")
    for seq, op in d.order_witnesses.items():
        _check_labels(op, qccc_sequence_labels(w, seq), str(seq))
    for seq, op in d.terminal_witnesses.items():
        _check_labels(op, w.op.subsystems, f"{seq}+F")

    residuals: dict[str, float] = {}
    total = None
    for seq in sorted(full_orders):
        t = d.terminal_witnesses[seq]
        total = t if total is None else total + t
    residuals["full"] = (w.op - total).norm()

    for seq in sorted(full_orders):
        lhs = partial_trace(d.terminal_witnesses[seq], w.future) if w.future \
            else d.terminal_witnesses[seq]
        rhs = tensor(d.order_witnesses[seq],
                     identity(w.registry, [w.slot_out(seq[-1])]))
        residuals[f"terminal{seq}"] = (lhs - rhs).norm()

    for m in range(1, n):
        for seq in permutations(range(1, n + 1), m):
            lhs = None
            for nxt in range(1, n + 1):
                if nxt in seq:
                    continue
                t = partial_trace(d.order_witnesses[seq + (nxt,)], {w.slot_in(nxt)})
                lhs = t if lhs is None else lhs + t
            rhs = tensor(d.order_witnesses[seq],
                         identity(w.registry, [w.slot_out(seq[-1])]))
            residuals[f"layer{seq}"] = (lhs - rhs).norm()

    root = None
    for k in range(1, n + 1):
        t = partial_trace(d.order_witnesses[(k,)], {w.slot_in(k)})
        root = t if root is None else root + t
    residuals["root"] = (root - identity(w.registry, w.past)).norm()

    every = list(d.order_witnesses.values()) + list(d.terminal_witnesses.values())
    return ValidityReport(residuals, 0.0, _psd_floor(every), tol)


def dephase_decomposition(d, basis: DephasingBasis):
    """Apply the dephasing map witness-wise; witnesses not carrying the
    dephased system are left alone."""

    def fn(op: LabeledOperator) -> LabeledOperator:
        if basis.system in op.subsystems:
            return dephase(op, basis)
        return op

    return d.map(fn)


def collapse_to_qcqc(d: QcCcDecomposition) -> QcQcDecomposition:
    """Forget the order information: sum sequence witnesses over all orders
    of their executed set.  The inverse direction of the ratio-splitting
    construction."""
    witnesses: dict[SubsetKey, LabeledOperator] = {}
    for seq, op in d.order_witnesses.items():
        key = (tuple(sorted(seq[:-1])), seq[-1])
        witnesses[key] = op if key not in witnesses else witnesses[key] + op
    return QcQcDecomposition(witnesses)
