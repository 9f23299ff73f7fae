"""Seed-deterministic generators of diagonal QC-QC instances.

Builds the witness family bottom-up: at every layer the accumulated
right-hand side is split cell-wise across the remaining slots with random
convex weights and spread over the next input system with random
probability vectors, so the layered equalities hold by construction.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .hilbert import LabeledOperator, SpaceRegistry, identity, tensor
from .decomp import QcQcDecomposition, subsets_of_size
from .validity import ProcessMatrix, white_noise_process


def random_diagonal_qcqc(
    registry: SpaceRegistry,
    roles: Mapping[str, str],
    seed: int = 0,
) -> tuple[ProcessMatrix, QcQcDecomposition]:
    """A random fully diagonal QC-QC process together with a witness family
    that satisfies the layered equalities exactly (up to roundoff)."""
    rng = np.random.default_rng(seed)
    probe = white_noise_process(registry, roles)
    n = probe.n_slots

    def diag_op(names, table):
        return LabeledOperator(registry, names, np.diag(table.ravel().astype(complex)))

    witnesses = {}
    for size in range(n):
        for done in subsets_of_size(n, size):
            if size == 0:
                cell_names = registry.sort(probe.past)
                d_cells = registry.total_dim(cell_names)
                rhs = np.ones(d_cells)
            else:
                acc = None
                for k in done:
                    prev = tuple(s for s in done if s != k)
                    t = tensor(witnesses[(prev, k)],
                               identity(registry, [probe.slot_out(k)]))
                    acc = t if acc is None else acc + t
                cell_names = acc.subsystems
                rhs = np.real(np.diag(acc.mat))
            remaining = [k for k in range(1, n + 1) if k not in done]
            weights = rng.dirichlet(np.ones(len(remaining)), size=rhs.shape[0])
            for col, k in enumerate(remaining):
                d_in = probe.d_in(k)
                rho = rng.dirichlet(np.ones(d_in), size=rhs.shape[0])
                vals = rhs[:, None] * weights[:, col:col + 1] * rho
                names = cell_names + (probe.slot_in(k),)
                witnesses[(done, k)] = diag_op(names, vals)

    total = None
    f_names = registry.sort(probe.future)
    d_f = registry.total_dim(f_names)
    for k in range(1, n + 1):
        done = tuple(s for s in range(1, n + 1) if s != k)
        branch = tensor(witnesses[(done, k)], identity(registry, [probe.slot_out(k)]))
        if f_names:
            rho_f = diag_op(f_names, rng.dirichlet(np.ones(d_f)))
            branch = tensor(branch, rho_f)
        total = branch if total is None else total + branch
    return probe.with_op(total.hermitize()), QcQcDecomposition(witnesses)
