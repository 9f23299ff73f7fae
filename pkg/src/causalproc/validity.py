"""Process matrices: validity constraints, contraction, instance generators.

A process matrix lives on P ⊗ (slot inputs/outputs) ⊗ F and must be PSD,
correctly normalised, and annihilated by a family of trace-and-replace
projectors (one per nonempty subset of slots, plus one for the past).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hilbert import (
    EPS_HERM,
    DephasingBasis,
    LabeledOperator,
    SpaceRegistry,
    SubsystemError,
    dephase,
    hermitian_eigs,
    identity,
    one_minus,
    partial_trace,
    tensor,
    tensor_all,
    trace_and_replace,
)

ROLE_PAST = "P"
ROLE_FUTURE = "F"


def role_in(k: int) -> str:
    return f"I{k}"


def role_out(k: int) -> str:
    return f"O{k}"


class RoleError(ValueError):
    """Raised when a role map is inconsistent with the operator's labels."""


class ProcessMatrix:
    """A Hermitian labeled operator plus a role for every subsystem.

    Roles are "P", "F", or "I<k>"/"O<k>" for slot k = 1..N.  The past and
    future groups may consist of several labels (composite systems) or of
    dim-1 placeholders.
    """

    __slots__ = ("op", "roles", "n_slots")

    def __init__(self, op: LabeledOperator, roles: Mapping[str, str]):
        roles = dict(roles)
        if set(roles) != set(op.subsystems):
            raise RoleError("role map does not cover exactly the operator's subsystems")
        ins, outs = {}, {}
        for name, role in roles.items():
            if role in (ROLE_PAST, ROLE_FUTURE):
                continue
            kind, num = role[0], role[1:]
            if kind not in ("I", "O") or not num.isdigit():
                raise RoleError(f"bad role {role!r} for subsystem {name!r}")
            k = int(num)
            bucket = ins if kind == "I" else outs
            if k in bucket:
                raise RoleError(f"slot {k} has two {kind!r} subsystems")
            bucket[k] = name
        if set(ins) != set(outs):
            raise RoleError("every slot needs exactly one input and one output subsystem")
        n = len(ins)
        if set(ins) and set(ins) != set(range(1, n + 1)):
            raise RoleError("slot indices must be 1..N")
        if not op.is_hermitian():
            raise RoleError("process matrix must be Hermitian")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "n_slots", n)

    def __setattr__(self, *a):
        raise AttributeError("ProcessMatrix is immutable")

    # -- role accessors -----------------------------------------------------

    @property
    def registry(self) -> SpaceRegistry:
        return self.op.registry

    def labels_with_role(self, role: str) -> tuple[str, ...]:
        return tuple(s for s in self.op.subsystems if self.roles[s] == role)

    @property
    def past(self) -> tuple[str, ...]:
        return self.labels_with_role(ROLE_PAST)

    @property
    def future(self) -> tuple[str, ...]:
        return self.labels_with_role(ROLE_FUTURE)

    def slot_in(self, k: int) -> str:
        return self.labels_with_role(role_in(k))[0]

    def slot_out(self, k: int) -> str:
        return self.labels_with_role(role_out(k))[0]

    def slot_labels(self, k: int) -> tuple[str, str]:
        return self.slot_in(k), self.slot_out(k)

    def d_past(self) -> int:
        return self.registry.total_dim(self.past)

    def d_future(self) -> int:
        return self.registry.total_dim(self.future)

    def d_out(self, k: int) -> int:
        return self.registry.dim(self.slot_out(k))

    def d_in(self, k: int) -> int:
        return self.registry.dim(self.slot_in(k))

    def target_trace(self) -> float:
        t = self.d_past()
        for k in range(1, self.n_slots + 1):
            t *= self.d_out(k)
        return float(t)

    def with_op(self, op: LabeledOperator) -> "ProcessMatrix":
        return ProcessMatrix(op, self.roles)

    def dephased(self, bases: Iterable[DephasingBasis]) -> "ProcessMatrix":
        op = self.op
        for b in bases:
            op = dephase(op, b)
        return self.with_op(op)


@dataclass
class ValidityReport:
    """Residuals of the affine constraints plus the PSD margin."""

    residuals: dict[str, float]
    normalization_gap: float
    psd_min_eig: float
    tol: float

    @property
    def verdict(self) -> bool:
        ok = all(r <= self.tol for r in self.residuals.values())
        return ok and self.normalization_gap <= self.tol and self.psd_min_eig >= -self.tol

    def max_residual(self) -> float:
        vals = list(self.residuals.values()) + [self.normalization_gap]
        return max(vals) if vals else 0.0

    def to_json(self) -> dict:
        return {
            "residuals": dict(self.residuals),
            "normalization_gap": self.normalization_gap,
            "psd_min_eig": self.psd_min_eig,
            "verdict": self.verdict,
        }


def _nonempty_subsets(n: int):
    slots = list(range(1, n + 1))
    for mask in range(1, 1 << n):
        yield tuple(s for i, s in enumerate(slots) if mask >> i & 1)


def validity_projectors(w: ProcessMatrix):
    """The commuting orthogonal projectors whose joint kernel (plus the trace
    condition) is the affine validity subspace.

    Each entry is a function LabeledOperator -> LabeledOperator acting on the
    full space.
    """
    n = w.n_slots
    all_slot_labels = [lbl for k in range(1, n + 1) for lbl in w.slot_labels(k)]
    projectors = []

    def make_subset_projector(subset):
        traced = set(w.future)
        for k in range(1, n + 1):
            if k not in subset:
                traced.update(w.slot_labels(k))
        outs = [w.slot_out(k) for k in subset]

        def proj(x, traced=frozenset(traced), outs=tuple(outs)):
            x = trace_and_replace(x, traced) if traced else x
            for o in outs:
                x = one_minus(x, {o})
            return x

        return proj

    for subset in _nonempty_subsets(n):
        projectors.append((f"slots{subset}", make_subset_projector(subset)))

    if w.past:
        traced = frozenset(list(w.future) + all_slot_labels)

        def past_proj(x, traced=traced, past=tuple(w.past)):
            x = trace_and_replace(x, traced) if traced else x
            return one_minus(x, past)

        projectors.append(("past", past_proj))
    return projectors


def check_validity(w: ProcessMatrix, tol: float = 1e-9) -> ValidityReport:
    """Evaluate every validity constraint and the PSD margin."""
    residuals = {}
    n = w.n_slots
    for k_set in _nonempty_subsets(n):
        traced = set(w.future)
        for k in range(1, n + 1):
            if k not in k_set:
                traced.update(w.slot_labels(k))
        r = partial_trace(w.op, traced) if traced else w.op
        for k in k_set:
            r = one_minus(r, {w.slot_out(k)})
        residuals[f"slots{k_set}"] = r.norm()
    if w.past:
        traced = set(w.future)
        for k in range(1, n + 1):
            traced.update(w.slot_labels(k))
        r = partial_trace(w.op, traced) if traced else w.op
        residuals["past"] = one_minus(r, w.past).norm()
    gap = abs(w.op.trace().real - w.target_trace()) + abs(w.op.trace().imag)
    vals, _ = hermitian_eigs(w.op)
    return ValidityReport(residuals, gap, float(vals[0]), tol)


def bipartite_residuals(w: ProcessMatrix) -> dict[str, float]:
    """The N=2 constraint set written out explicitly.

    Redundant with the generic subset family; kept as an independent code
    path for differential testing.
    """
    if w.n_slots != 2:
        raise RoleError("explicit bipartite constraints need exactly two slots")
    a_i, a_o = w.slot_labels(1)
    b_i, b_o = w.slot_labels(2)
    f = set(w.future)
    out = {}
    r = partial_trace(w.op, f) if f else w.op
    out["slots(1, 2)"] = one_minus(one_minus(r, {a_o}), {b_o}).norm()
    out["slots(1,)"] = one_minus(partial_trace(w.op, f | {b_i, b_o}), {a_o}).norm()
    out["slots(2,)"] = one_minus(partial_trace(w.op, f | {a_i, a_o}), {b_o}).norm()
    if w.past:
        out["past"] = one_minus(
            partial_trace(w.op, f | {a_i, a_o, b_i, b_o}), w.past).norm()
    return out


def contract(w: ProcessMatrix, slots: Sequence[LabeledOperator]) -> LabeledOperator:
    """Plug Choi matrices into the slots; returns the Choi matrix of the
    induced map from P to F:  M = Tr_slots[(A_1⊗…⊗A_N)^T ⊗ 1^{PF} · W]."""
    if len(slots) != w.n_slots:
        raise SubsystemError(f"expected {w.n_slots} slot operators, got {len(slots)}")
    for k, a in enumerate(slots, start=1):
        expected = w.registry.sort(w.slot_labels(k))
        if a.subsystems != expected:
            raise SubsystemError(
                f"slot {k} operator must live on {expected}, got {a.subsystems}")
    pieces = [a.transpose() for a in slots]
    pf = list(w.past) + list(w.future)
    if pf:
        pieces.append(identity(w.registry, pf))
    big = tensor_all(pieces)
    prod = big @ w.op
    slot_labels = {lbl for k in range(1, w.n_slots + 1) for lbl in w.slot_labels(k)}
    return partial_trace(prod, slot_labels)


def white_noise_process(registry: SpaceRegistry, roles: Mapping[str, str]) -> ProcessMatrix:
    """The maximally mixed valid process W = 1 / (Π d_{A_I^k} · d_F)."""
    names = registry.sort(roles)
    probe = ProcessMatrix(identity(registry, names), roles)
    denom = probe.d_future()
    for k in range(1, probe.n_slots + 1):
        denom *= probe.d_in(k)
    return probe.with_op(probe.op / denom)


def project_to_valid_subspace(w: ProcessMatrix, x: LabeledOperator) -> LabeledOperator:
    """Orthogonal (Hilbert-Schmidt) projection of x onto the linear part of
    the validity subspace, composing the commuting kernel projectors."""
    for _, proj in validity_projectors(w):
        x = x - proj(x)
    return x


def random_valid_process(
    registry: SpaceRegistry,
    roles: Mapping[str, str],
    dephased: Iterable[str] = (),
    seed: int = 0,
    margin: float = 1e-6,
) -> ProcessMatrix:
    """Seed-deterministic valid process, exactly diagonal on `dephased`
    (computational basis).

    A random Hermitian perturbation is dephased, projected onto the validity
    subspace, stripped of its trace component, and mixed with white noise at
    the smallest weight giving λ_min ≥ margin.
    """
    wn = white_noise_process(registry, roles)
    d = wn.op.dim
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = LabeledOperator(registry, wn.op.subsystems, (g + g.conj().T) / 2)
    for name in dephased:
        h = dephase(h, DephasingBasis.computational(name, registry.dim(name)))
    h = project_to_valid_subspace(wn, h)
    h = h - identity(registry, wn.op.subsystems) * (h.trace() / d)
    # comparable scale to the white-noise level keeps the mixture non-degenerate
    a = float(wn.op.mat[0, 0].real)
    hn = h.norm()
    if hn > 0:
        h = h * (a / hn)
    candidate = wn.op + h
    lo = float(hermitian_eigs(candidate)[0][0])
    if lo < margin:
        lam = (margin - lo) / (a - lo)
        candidate = candidate * (1 - lam) + wn.op * lam
    return wn.with_op(candidate.hermitize())
