"""Test helpers shared across modules."""

import numpy as np

from causalproc.hilbert import LabeledOperator

# acceptance criterion PASS/FAIL lines, echoed in the terminal summary
CRITERION_LINES = []


def random_hermitian(registry, names, seed):
    rng = np.random.default_rng(seed)
    d = registry.total_dim(registry.sort(names))
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return LabeledOperator(registry, registry.sort(names), (g + g.conj().T) / 2)
