"""The quantum switch, slot patterns, and the partially dephased examples.

The switch registry holds eight qubits [P_c, P_t, A_I, A_O, B_I, B_O, F_t,
F_c]; the past and future each split into a control and a target component.
Patterns turn the switch into smaller processes by injecting past states,
tracing future systems and dephasing; the three example processes exist
both as closed forms and as pattern pipelines, which must agree entry-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .hilbert import (
    DephasingBasis,
    LabeledOperator,
    SpaceRegistry,
    SubsystemError,
    dephase,
    identity,
    ket,
    outer,
    partial_trace,
    sandwich,
    tensor,
    tensor_all,
)
from .decomp import QcQcDecomposition
from .validity import ProcessMatrix, ROLE_FUTURE, ROLE_PAST

KEEP = "keep"
DEPHASE_Z = "dephase-z"
DEPHASE_X = "dephase-x"
TRACE_OUT = "trace-out"

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)

SWITCH_ROLES = {
    "P_c": "P", "P_t": "P",
    "A_I": "I1", "A_O": "O1",
    "B_I": "I2", "B_O": "O2",
    "F_t": "F", "F_c": "F",
}


def switch_registry() -> SpaceRegistry:
    return SpaceRegistry([(n, 2) for n in
                          ("P_c", "P_t", "A_I", "A_O", "B_I", "B_O", "F_t", "F_c")])


def build_quantum_switch() -> ProcessMatrix:
    """Rank-1 process coherently controlling whether slot 1 or slot 2 acts
    first on the target qubit; side 256, trace 16."""
    reg = switch_registry()
    vec = np.zeros(256, dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                vec += ket(reg, {"P_c": 0, "P_t": i, "A_I": i, "A_O": j,
                                 "B_I": j, "B_O": k, "F_t": k, "F_c": 0})
                vec += ket(reg, {"P_c": 1, "P_t": i, "B_I": i, "B_O": j,
                                 "A_I": j, "A_O": k, "F_t": k, "F_c": 1})
    op = outer(reg, reg.names, vec)
    return ProcessMatrix(op, SWITCH_ROLES)


def switch_decomposition() -> QcQcDecomposition:
    """The explicit witness family of the switch.

    Each witness is the rank-1 projector onto the corresponding branch
    vector; the family satisfies the layered equalities exactly.
    """
    reg = switch_registry()

    def branch(names, terms):
        names = reg.sort(names)  # ket() emits amplitudes in canonical order
        v = np.zeros(reg.total_dim(names), dtype=complex)
        for t in terms:
            v += ket(reg, t)
        return outer(reg, names, v)

    w_ab = branch(("P_c", "P_t", "A_I", "A_O", "B_I"),
                  [{"P_c": 0, "P_t": i, "A_I": i, "A_O": j, "B_I": j}
                   for i in range(2) for j in range(2)])
    w_ba = branch(("P_c", "P_t", "B_I", "B_O", "A_I"),
                  [{"P_c": 1, "P_t": i, "B_I": i, "B_O": j, "A_I": j}
                   for i in range(2) for j in range(2)])
    w_a = branch(("P_c", "P_t", "A_I"),
                 [{"P_c": 0, "P_t": i, "A_I": i} for i in range(2)])
    w_b = branch(("P_c", "P_t", "B_I"),
                 [{"P_c": 1, "P_t": i, "B_I": i} for i in range(2)])
    return QcQcDecomposition({((1,), 2): w_ab, ((2,), 1): w_ba,
                              ((), 1): w_a, ((), 2): w_b})


@dataclass
class SlotPattern:
    """Per-subsystem action: keep, dephase-z, dephase-x, trace-out, or a
    state vector to inject.  Injection is only allowed on past systems and
    tracing only on future systems."""

    actions: dict


def apply_pattern(w: ProcessMatrix, p: SlotPattern) -> ProcessMatrix:
    """Inject, then trace, then dephase; vanished past/future groups are
    replaced by dim-1 placeholder systems so every output still carries a
    past and a future label."""
    injected, traced, dephasings = [], [], []
    for name, action in p.actions.items():
        if name not in w.op.subsystems:
            raise SubsystemError(f"pattern names unknown subsystem {name!r}")
        role = w.roles[name]
        if isinstance(action, str):
            if action == KEEP:
                continue
            if action == TRACE_OUT:
                if role != ROLE_FUTURE:
                    raise ValueError(f"cannot trace out non-future system {name!r}")
                traced.append(name)
            elif action == DEPHASE_Z:
                dephasings.append(DephasingBasis.computational(name, w.registry.dim(name)))
            elif action == DEPHASE_X:
                if w.registry.dim(name) != 2:
                    raise ValueError(f"X-type dephasing needs a qubit, {name!r} is not")
                dephasings.append(DephasingBasis.pauli_x(name))
            else:
                raise ValueError(f"unknown pattern action {action!r}")
        else:
            if role != ROLE_PAST:
                raise ValueError(f"cannot inject a state into non-past system {name!r}")
            vec = np.asarray(action, dtype=complex)
            n = np.linalg.norm(vec)
            if n == 0:
                raise ValueError(f"zero injection vector for {name!r}")
            injected.append((name, vec / n))

    op = w.op
    for name, vec in injected:
        op = sandwich(op, name, vec)
    if traced:
        op = partial_trace(op, traced)
    for basis in dephasings:
        op = dephase(op, basis)

    gone = {n for n, _ in injected} | set(traced)
    survivors = [s for s in w.op.subsystems if s not in gone]
    roles = {s: w.roles[s] for s in survivors}
    systems = [(s, w.registry.dim(s)) for s in survivors]
    if not any(r == ROLE_PAST for r in roles.values()):
        systems.insert(0, ("P", 1))
        roles["P"] = ROLE_PAST
    if not any(r == ROLE_FUTURE for r in roles.values()):
        systems.append(("F", 1))
        roles["F"] = ROLE_FUTURE
    reg = SpaceRegistry(systems)
    new_op = LabeledOperator(reg, [s for s, _ in systems], op.mat)
    return ProcessMatrix(new_op.hermitize(), roles)


def pattern_for_example(n: int) -> SlotPattern:
    e0 = np.array([1, 0], dtype=complex)
    if n == 1:
        return SlotPattern({"P_t": e0, "A_I": DEPHASE_Z, "A_O": DEPHASE_Z,
                            "B_I": DEPHASE_Z, "B_O": DEPHASE_Z,
                            "F_t": TRACE_OUT, "F_c": DEPHASE_X})
    if n == 2:
        return SlotPattern({"P_c": _PLUS, "P_t": _PLUS, "A_O": DEPHASE_Z,
                            "B_I": DEPHASE_Z, "B_O": DEPHASE_Z,
                            "F_t": TRACE_OUT, "F_c": DEPHASE_X})
    if n == 3:
        return SlotPattern({"P_c": _PLUS, "P_t": e0, "A_I": DEPHASE_Z,
                            "B_I": DEPHASE_Z, "B_O": DEPHASE_Z,
                            "F_t": DEPHASE_X, "F_c": DEPHASE_X})
    raise ValueError(f"no example {n}; choose 1, 2 or 3")


def _proj(reg, name, i) -> LabeledOperator:
    v = np.zeros(reg.dim(name), dtype=complex)
    v[i] = 1.0
    return outer(reg, [name], v)


def _op(reg, name, mat) -> LabeledOperator:
    return LabeledOperator(reg, [name], mat)


def build_example(n: int) -> ProcessMatrix:
    """Closed forms of the three partially dephased switch variants: only
    the past control (n=1), only the first slot input (n=2), or only the
    first slot output (n=3) stays coherent."""
    if n == 1:
        reg = SpaceRegistry([(s, 2) for s in
                             ("P_c", "A_I", "A_O", "B_I", "B_O", "F_c")])
        roles = {"P_c": "P", "A_I": "I1", "A_O": "O1",
                 "B_I": "I2", "B_O": "O2", "F_c": "F"}
        acc = None
        for i in range(2):
            t1 = tensor_all([_proj(reg, "P_c", 0), _proj(reg, "A_I", 0),
                             _proj(reg, "A_O", i), _proj(reg, "B_I", i),
                             identity(reg, ["B_O"]), identity(reg, ["F_c"]) / 2])
            t2 = tensor_all([_proj(reg, "P_c", 1), _proj(reg, "B_I", 0),
                             _proj(reg, "B_O", i), _proj(reg, "A_I", i),
                             identity(reg, ["A_O"]), identity(reg, ["F_c"]) / 2])
            acc = t1 + t2 if acc is None else acc + t1 + t2
        acc = acc + tensor_all([_op(reg, "P_c", _X), _proj(reg, "A_I", 0),
                                _proj(reg, "A_O", 0), _proj(reg, "B_I", 0),
                                _proj(reg, "B_O", 0), _op(reg, "F_c", _X) / 2])
        return ProcessMatrix(acc, roles)

    if n == 2:
        reg = SpaceRegistry([("P", 1)] + [(s, 2) for s in
                                          ("A_I", "A_O", "B_I", "B_O", "F_c")])
        roles = {"P": "P", "A_I": "I1", "A_O": "O1",
                 "B_I": "I2", "B_O": "O2", "F_c": "F"}
        plus_proj = _op(reg, "A_I", np.outer(_PLUS, _PLUS.conj()))
        acc = None
        for i in range(2):
            t1 = tensor_all([plus_proj, _proj(reg, "A_O", i), _proj(reg, "B_I", i),
                             identity(reg, ["B_O"]), identity(reg, ["F_c"]) / 2])
            t2 = tensor_all([identity(reg, ["B_I"]) / 2, _proj(reg, "B_O", i),
                             _proj(reg, "A_I", i), identity(reg, ["A_O"]),
                             identity(reg, ["F_c"]) / 2])
            ai = np.zeros((2, 2), dtype=complex)
            ai[i, i] = 1.0
            t3 = tensor_all([_op(reg, "A_I", ai + _X / 2), _proj(reg, "A_O", i),
                             _proj(reg, "B_I", i), _proj(reg, "B_O", i),
                             _op(reg, "F_c", _X) / 2])
            term = (t1 + t2 + t3) / 2
            acc = term if acc is None else acc + term
        return ProcessMatrix(tensor(identity(reg, ["P"]), acc), roles)

    if n == 3:
        reg = SpaceRegistry([("P", 1)] + [(s, 2) for s in
                                          ("A_I", "A_O", "B_I", "B_O", "F_t", "F_c")])
        roles = {"P": "P", "A_I": "I1", "A_O": "O1",
                 "B_I": "I2", "B_O": "O2", "F_t": "F", "F_c": "F"}
        eye_ao_ft = identity(reg, ["A_O", "F_t"])
        xx = tensor(_op(reg, "A_O", _X), _op(reg, "F_t", _X))
        z1 = tensor(_op(reg, "A_O", _Z), identity(reg, ["F_t"]))
        acc = None
        for i in range(2):
            t1 = tensor_all([_proj(reg, "A_I", 0), _proj(reg, "A_O", i),
                             _proj(reg, "B_I", i), identity(reg, ["B_O"]),
                             identity(reg, ["F_t"]) / 2, identity(reg, ["F_c"]) / 2])
            t2 = tensor_all([_proj(reg, "B_I", 0), _proj(reg, "B_O", i),
                             _proj(reg, "A_I", i), (eye_ao_ft + xx) / 2,
                             identity(reg, ["F_c"]) / 2])
            term = (t1 + t2) / 2
            acc = term if acc is None else acc + term
        t3 = tensor_all([_proj(reg, "B_I", 0), _proj(reg, "B_O", 0),
                         _proj(reg, "A_I", 0), (eye_ao_ft + z1 + xx) / 2,
                         _op(reg, "F_c", _X) / 2]) / 2
        acc = acc + t3
        return ProcessMatrix(tensor(identity(reg, ["P"]), acc), roles)

    raise ValueError(f"no example {n}; choose 1, 2 or 3")
