"""Labeled tensor-product operator algebra.

Operators carry an ordered list of named subsystems taken from a shared
registry, so that partial traces, trace-and-replace, dephasing and tensor
products can be written against system names instead of axis bookkeeping.
Everything is dense, double precision, and immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

# Relative tolerances; all closed-form objects in this domain are exact
# rationals or multiples of 1/sqrt(2), so these leave ample headroom.
EPS_HERM = 1e-10
EPS_ORTH = 1e-10
EPS_EIG = 1e-9


class SubsystemError(ValueError):
    """Raised on unknown, duplicate or overlapping subsystem names."""


@dataclass(frozen=True)
class SystemLabel:
    """A named subsystem with its Hilbert-space dimension."""

    name: str
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise SubsystemError(f"dimension of {self.name!r} must be >= 1")


class SpaceRegistry:
    """Ordered collection of subsystems; fixes the canonical tensor order.

    Two operators over the same subsystem set of one registry are always
    stored in the same axis order and therefore comparable entry-wise.
    """

    def __init__(self, systems: Iterable[SystemLabel | tuple[str, int]]):
        labels = []
        for s in systems:
            if not isinstance(s, SystemLabel):
                s = SystemLabel(*s)
            labels.append(s)
        names = [s.name for s in labels]
        if len(set(names)) != len(names):
            raise SubsystemError("duplicate subsystem names in registry")
        self.systems: tuple[SystemLabel, ...] = tuple(labels)
        self._pos = {s.name: i for i, s in enumerate(self.systems)}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.systems)

    def __eq__(self, other) -> bool:
        return isinstance(other, SpaceRegistry) and self.systems == other.systems

    def __hash__(self):
        return hash(self.systems)

    def __contains__(self, name: str) -> bool:
        return name in self._pos

    def position(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise SubsystemError(f"unknown subsystem {name!r}") from None

    def dim(self, name: str) -> int:
        return self.systems[self.position(name)].dim

    def dims(self, names: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.dim(n) for n in names)

    def total_dim(self, names: Sequence[str] | None = None) -> int:
        if names is None:
            names = self.names
        return int(np.prod([self.dim(n) for n in names], dtype=np.int64)) if names else 1

    def sort(self, names: Iterable[str]) -> tuple[str, ...]:
        """Subsystem names in canonical (registry) order."""
        return tuple(sorted(set(names), key=self.position))


def _permute_subsystems(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square matrix; perm[i] = old position of new factor i."""
    n = len(dims)
    if list(perm) == list(range(n)):
        return mat
    t = mat.reshape(tuple(dims) + tuple(dims))
    axes = list(perm) + [p + n for p in perm]
    new_dims = [dims[p] for p in perm]
    d = int(np.prod(new_dims)) if new_dims else 1
    return np.ascontiguousarray(t.transpose(axes)).reshape(d, d)


def _ptrace_raw(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace keeping the factors listed in `keep` (positions)."""
    n = len(dims)
    keep = set(keep)
    t = mat.reshape(tuple(dims) + tuple(dims))
    m = n
    for ax in sorted(set(range(n)) - keep, reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + m)
        m -= 1
    d = int(np.prod([dims[i] for i in sorted(keep)])) if keep else 1
    return t.reshape(d, d)


def _apply_local(mat: np.ndarray, dims: Sequence[int], pos: int, u: np.ndarray) -> np.ndarray:
    """Conjugate a single tensor factor: returns (1⊗u†⊗1) mat (1⊗u⊗1)."""
    d = dims[pos]
    pre = int(np.prod(dims[:pos])) if pos else 1
    post = int(np.prod(dims[pos + 1:])) if pos + 1 < len(dims) else 1
    t = mat.reshape(pre, d, post, pre, d, post)
    t = np.einsum("ax,paqrbs,by->pxqrys", u.conj(), t, u, optimize=True)
    full = pre * d * post
    return t.reshape(full, full)


def _pinch_local(mat: np.ndarray, dims: Sequence[int], pos: int) -> np.ndarray:
    """Zero all entries off-diagonal in the computational index of one factor."""
    d = dims[pos]
    pre = int(np.prod(dims[:pos])) if pos else 1
    post = int(np.prod(dims[pos + 1:])) if pos + 1 < len(dims) else 1
    t = mat.reshape(pre, d, post, pre, d, post).copy()
    mask = np.eye(d).reshape(1, d, 1, 1, d, 1)
    t *= mask
    full = pre * d * post
    return t.reshape(full, full)


@dataclass(frozen=True)
class DephasingBasis:
    """Orthonormal basis of one subsystem; columns of `vectors` are the kets."""

    system: str
    vectors: np.ndarray  # shape (d, d), column i is |i>

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("basis must contain exactly dim vectors of length dim")
        gram = v.conj().T @ v
        if np.max(np.abs(gram - np.eye(v.shape[0]))) > EPS_ORTH:
            raise ValueError(f"basis vectors for {self.system!r} are not orthonormal")

    @staticmethod
    def computational(system: str, dim: int) -> "DephasingBasis":
        return DephasingBasis(system, np.eye(dim, dtype=complex))

    @staticmethod
    def pauli_x(system: str) -> "DephasingBasis":
        """The |±> basis of a qubit (eigenbasis of Pauli X)."""
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        return DephasingBasis(system, h)

    @property
    def is_computational(self) -> bool:
        return bool(np.max(np.abs(self.vectors - np.eye(self.vectors.shape[0]))) == 0)


class LabeledOperator:
    """A square complex matrix over an ordered subset of registry subsystems."""

    __slots__ = ("registry", "subsystems", "mat")

    def __init__(self, registry: SpaceRegistry, subsystems: Sequence[str], mat: np.ndarray):
        subsystems = tuple(subsystems)
        if len(set(subsystems)) != len(subsystems):
            raise SubsystemError("repeated subsystem name")
        for s in subsystems:
            registry.position(s)
        mat = np.asarray(mat, dtype=complex)
        canonical = registry.sort(subsystems)
        if subsystems != canonical:
            dims = registry.dims(subsystems)
            perm = [subsystems.index(s) for s in canonical]
            mat = _permute_subsystems(mat, dims, perm)
            subsystems = canonical
        d = registry.total_dim(subsystems)
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {d}")
        object.__setattr__(self, "registry", registry)
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "mat", mat)

    def __setattr__(self, *a):  # immutable value semantics
        raise AttributeError("LabeledOperator is immutable")

    # -- basic queries ------------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return self.registry.dims(self.subsystems)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def norm(self) -> float:
        """Operator (spectral) norm."""
        if self.dim == 1:
            return float(abs(self.mat[0, 0]))
        return float(np.linalg.norm(self.mat, 2))

    def herm_defect(self) -> float:
        return float(np.linalg.norm(self.mat - self.mat.conj().T, 2))

    def is_hermitian(self, eps: float = EPS_HERM) -> bool:
        return self.herm_defect() <= eps * max(1.0, self.norm())

    def _pos(self, name: str) -> int:
        try:
            return self.subsystems.index(name)
        except ValueError:
            raise SubsystemError(f"operator does not carry subsystem {name!r}") from None

    # -- arithmetic ---------------------------------------------------------

    def _like(self, mat: np.ndarray) -> "LabeledOperator":
        return LabeledOperator(self.registry, self.subsystems, mat)

    def _check_same(self, other: "LabeledOperator"):
        if self.registry != other.registry or self.subsystems != other.subsystems:
            raise SubsystemError("operators live on different subsystem sets")

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        self._check_same(other)
        return self._like(self.mat + other.mat)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        self._check_same(other)
        return self._like(self.mat - other.mat)

    def __mul__(self, scalar) -> "LabeledOperator":
        return self._like(self.mat * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "LabeledOperator":
        return self._like(self.mat / scalar)

    def __neg__(self) -> "LabeledOperator":
        return self._like(-self.mat)

    def __matmul__(self, other: "LabeledOperator") -> "LabeledOperator":
        self._check_same(other)
        return self._like(self.mat @ other.mat)

    def adjoint(self) -> "LabeledOperator":
        return self._like(self.mat.conj().T)

    def transpose(self) -> "LabeledOperator":
        return self._like(self.mat.T)

    def hermitize(self) -> "LabeledOperator":
        return self._like((self.mat + self.mat.conj().T) / 2)

    def isclose(self, other: "LabeledOperator", atol: float = 1e-12) -> bool:
        self._check_same(other)
        return bool(np.max(np.abs(self.mat - other.mat)) <= atol)


# -- constructors -----------------------------------------------------------


def identity(registry: SpaceRegistry, subsystems: Sequence[str]) -> LabeledOperator:
    d = registry.total_dim(registry.sort(subsystems))
    return LabeledOperator(registry, registry.sort(subsystems), np.eye(d, dtype=complex))


def zero(registry: SpaceRegistry, subsystems: Sequence[str]) -> LabeledOperator:
    d = registry.total_dim(registry.sort(subsystems))
    return LabeledOperator(registry, registry.sort(subsystems), np.zeros((d, d), dtype=complex))


def ket(registry: SpaceRegistry, assignment: dict[str, int | np.ndarray]) -> np.ndarray:
    """Product vector over the given subsystems in canonical order.

    Values are either computational indices or explicit amplitude vectors.
    """
    names = registry.sort(assignment)
    vecs = []
    for n in names:
        v = assignment[n]
        if isinstance(v, (int, np.integer)):
            e = np.zeros(registry.dim(n), dtype=complex)
            e[v] = 1.0
            vecs.append(e)
        else:
            vecs.append(np.asarray(v, dtype=complex))
    return reduce(np.kron, vecs, np.ones(1, dtype=complex))


def outer(registry: SpaceRegistry, subsystems: Sequence[str], vec: np.ndarray) -> LabeledOperator:
    vec = np.asarray(vec, dtype=complex)
    return LabeledOperator(registry, subsystems, np.outer(vec, vec.conj()))


# -- the spec operations ----------------------------------------------------


def tensor(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Kronecker product with concatenated labels, re-sorted to canonical order."""
    if a.registry != b.registry:
        raise SubsystemError("operators from different registries")
    if set(a.subsystems) & set(b.subsystems):
        raise SubsystemError(
            f"overlapping subsystems {set(a.subsystems) & set(b.subsystems)}")
    return LabeledOperator(a.registry, a.subsystems + b.subsystems, np.kron(a.mat, b.mat))


def tensor_all(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    return reduce(tensor, ops)


def partial_trace(w: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    over = set(over)
    for s in over:
        w._pos(s)
    keep = [i for i, s in enumerate(w.subsystems) if s not in over]
    mat = _ptrace_raw(w.mat, w.dims, keep)
    names = tuple(s for s in w.subsystems if s not in over)
    return LabeledOperator(w.registry, names, mat)


def trace_and_replace(w: LabeledOperator, x: Iterable[str]) -> LabeledOperator:
    """(Tr_X w) ⊗ 1^X / d_X, on the same subsystem set as w."""
    x = set(x)
    if not x:
        return w
    reduced = partial_trace(w, x)
    d = w.registry.total_dim(w.registry.sort(x))
    return tensor(reduced, identity(w.registry, x)) / d


def one_minus(w: LabeledOperator, x: Iterable[str]) -> LabeledOperator:
    """w - (Tr_X w) ⊗ 1^X/d_X; composable for products of [1-X] factors."""
    return w - trace_and_replace(w, x)


def dephase(w: LabeledOperator, basis: DephasingBasis) -> LabeledOperator:
    """Pinch one subsystem in the given basis: Σ_i ([i]⊗1) w ([i]⊗1)."""
    pos = w._pos(basis.system)
    d = w.dims[pos]
    if basis.vectors.shape[0] != d:
        raise ValueError(
            f"basis dimension {basis.vectors.shape[0]} does not match {basis.system!r} (d={d})")
    if basis.is_computational:
        return w._like(_pinch_local(w.mat, w.dims, pos))
    u = basis.vectors
    m = _apply_local(w.mat, w.dims, pos, u)
    m = _pinch_local(m, w.dims, pos)
    m = _apply_local(m, w.dims, pos, u.conj().T)
    return w._like(m)


def change_basis(w: LabeledOperator, system: str, u: np.ndarray) -> LabeledOperator:
    """Express w in the basis whose kets are the columns of u on one
    subsystem: returns (1⊗u†) w (1⊗u)."""
    pos = w._pos(system)
    return w._like(_apply_local(w.mat, w.dims, pos, np.asarray(u, dtype=complex)))


def sandwich(w: LabeledOperator, system: str, vec: np.ndarray) -> LabeledOperator:
    """⟨v| w |v⟩ on one subsystem (implicit identities elsewhere); the
    subsystem disappears from the result."""
    pos = w._pos(system)
    dims = w.dims
    d = dims[pos]
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (d,):
        raise ValueError(f"vector length {vec.shape} does not match {system!r} (d={d})")
    pre = int(np.prod(dims[:pos])) if pos else 1
    post = int(np.prod(dims[pos + 1:])) if pos + 1 < len(dims) else 1
    t = w.mat.reshape(pre, d, post, pre, d, post)
    out = np.einsum("a,paqrbs,b->pqrs", vec.conj(), t, vec, optimize=True)
    names = tuple(s for s in w.subsystems if s != system)
    return LabeledOperator(w.registry, names, out.reshape(pre * post, pre * post))


def dephase_many(w: LabeledOperator, bases: Iterable[DephasingBasis]) -> LabeledOperator:
    for b in bases:
        w = dephase(w, b)
    return w


def hermitian_eigs(w: LabeledOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvector columns of a Hermitian operator."""
    if not w.is_hermitian():
        raise ValueError(f"operator is not Hermitian (defect {w.herm_defect():.3e})")
    vals, vecs = np.linalg.eigh((w.mat + w.mat.conj().T) / 2)
    return vals, vecs


def min_eig(w: LabeledOperator) -> float:
    return float(hermitian_eigs(w)[0][0])


def psd_check(w: LabeledOperator, tol: float = EPS_EIG) -> bool:
    """True iff λ_min(w) ≥ -tol·max(1, ‖w‖)."""
    vals, _ = hermitian_eigs(w)
    lo = float(vals[0])
    hi = float(max(abs(vals[0]), abs(vals[-1])))
    return lo >= -tol * max(1.0, hi)
