"""Independent membership oracle built on cvxpy.

Solves min s subject to the witness-block equalities and X_b + s*1 PSD,
either directly from a constraint-system dump (isolating solver
disagreement) or from a process file re-modelled from scratch (--remodel,
isolating modelling disagreement as well).  All tensor bookkeeping here is
written against the column-major vec convention, deliberately different
from the primary implementation.
"""

from __future__ import annotations

import json
import multiprocessing as mp

import numpy as np
import scipy.sparse as sp
import cvxpy as cp

FEASIBLE_TOL = 1e-7
INFEASIBLE_TOL = 1e-6

# address-space cap per solver child; a runaway factorization aborts fast
SOLVER_MEMORY_LIMIT = 8 * 2**30


def _basis_row(d, t):
    e = np.zeros((1, d))
    e[0, t] = 1.0
    return sp.csr_matrix(e)


def _perm(dims_src, src_names, dst_names):
    """Permutation matrix taking a ket indexed in src factor order to dst
    order (row-major mixed-radix indices)."""
    if not dims_src:
        return sp.identity(1, format="csr")
    total = int(np.prod(dims_src))
    axes = [src_names.index(n) for n in dst_names]
    idx = np.arange(total).reshape(dims_src).transpose(axes).ravel()
    return sp.csr_matrix((np.ones(total), (np.arange(total), idx)),
                         shape=(total, total))


def _conj_pair(q):
    return sp.kron(q, q, format="csr")


def _lift_matrix(dims_of, b_names, l_names):
    """Sparse matrix of vec(X) -> vec((Tr_traced X) tensor 1_ext), both vecs
    column-major, X on b_names and the result on l_names."""
    common = [n for n in b_names if n in set(l_names)]
    traced = [n for n in b_names if n not in set(l_names)]
    ext = [n for n in l_names if n not in set(b_names)]

    q_b = _perm([dims_of[n] for n in b_names], list(b_names), common + traced)
    m = _conj_pair(q_b)
    for n in reversed(traced):
        # trace out the last remaining factor of the current space
        d_t = dims_of[n]
        cur = int(np.sqrt(m.shape[0]))
        d_rest = cur // d_t
        acc = None
        for t in range(d_t):
            a_t = sp.kron(sp.identity(d_rest, format="csr"), _basis_row(d_t, t))
            pair = _conj_pair(a_t)
            acc = pair if acc is None else acc + pair
        m = acc @ m
    for n in ext:
        d_e = dims_of[n]
        cur = int(np.sqrt(m.shape[0]))
        acc = None
        for e in range(d_e):
            a_e = sp.kron(sp.identity(cur, format="csr"), _basis_row(d_e, e).T)
            pair = _conj_pair(a_e)
            acc = pair if acc is None else acc + pair
        m = acc @ m
    q_l = _perm([dims_of[n] for n in common + ext], common + ext, list(l_names))
    return _conj_pair(q_l) @ m


def _rhs_matrix(entry, dims_of, names):
    d = int(np.prod([dims_of[n] for n in names])) if names else 1
    flat = np.array([complex(re, im) for re, im in entry["entries"]])
    return flat.reshape(d, d)


def _solve_once(system: dict, solver: str, time_limit: float):
    """Slack value from one solver, or None if it fails to converge."""
    dims_of = {e["name"]: int(e["dim"]) for e in system["registry"]}
    blocks = {}
    s = cp.Variable(name="slack")
    constraints = []
    for b in system["blocks"]:
        names = tuple(b["subsystems"])
        d = int(np.prod([dims_of[n] for n in names])) if names else 1
        x = cp.Variable((d, d), hermitian=True)
        blocks[json.dumps(b["key"], sort_keys=True)] = (x, names, d)
        constraints.append(x + s * np.eye(d) >> 0)

    for g in system["groups"]:
        l_names = tuple(g["subsystems"])
        d_l = int(np.prod([dims_of[n] for n in l_names])) if l_names else 1
        expr = None
        for t in g["terms"]:
            x, b_names, _ = blocks[json.dumps(t["block"], sort_keys=True)]
            lift = _lift_matrix(dims_of, b_names, l_names)
            term = float(t["coeff"]) * (lift @ cp.vec(x, order="F"))
            expr = term if expr is None else expr + term
        if g["rhs"] is None:
            rhs = np.zeros(d_l * d_l, dtype=complex)
        else:
            rhs = _rhs_matrix(g["rhs"], dims_of, l_names).ravel(order="F")
        constraints.append(expr == rhs)

    prob = cp.Problem(cp.Minimize(s), constraints)
    try:
        kwargs = {}
        if solver == "SCS":
            kwargs = {"time_limit_secs": time_limit, "max_iters": 200000}
        prob.solve(solver=solver, **kwargs)
    except (cp.error.SolverError, ValueError):
        return None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return None
    return float(prob.value), prob.status


def _solver_child(system, solver, time_limit, conn):
    import resource

    try:
        soft, hard = resource.getrlimit(resource.RLIMIT_AS)
        cap = SOLVER_MEMORY_LIMIT
        if hard != resource.RLIM_INFINITY:
            cap = min(cap, hard)
        resource.setrlimit(resource.RLIMIT_AS, (cap, hard))
    except (ValueError, OSError):
        pass
    conn.send(_solve_once(system, solver, time_limit))
    conn.close()


def solve_system(system: dict, solver_order=("CLARABEL", "SCS"),
                 time_limit: float = 600.0) -> dict:
    """Verdict JSON for one constraint-system dump.

    Each solver runs in a child process: a native crash (out-of-memory
    abort in a compiled backend) then counts as a failed attempt instead
    of taking the caller down.
    """
    value = None
    used = None
    prob_status = None
    for name in solver_order:
        if name not in cp.installed_solvers():
            continue
        parent, child = mp.Pipe(duplex=False)
        proc = mp.get_context("fork").Process(
            target=_solver_child, args=(system, name, time_limit, child))
        proc.start()
        child.close()
        result = None
        if parent.poll(time_limit + 60.0):
            try:
                result = parent.recv()
            except EOFError:
                result = None
        proc.join(timeout=10.0)
        if proc.is_alive():
            proc.kill()
            proc.join()
        parent.close()
        if result is not None:
            value, prob_status = result
            used = name
            break
    if value is None:
        return {"status": "Undetermined", "margin": 0.0, "solver": None,
                "slack": None}
    if value <= FEASIBLE_TOL:
        status = "Feasible"
    elif value >= INFEASIBLE_TOL:
        status = "Infeasible"
    else:
        status = "Undetermined"
    if prob_status == cp.OPTIMAL_INACCURATE and status == "Feasible" \
            and value > -FEASIBLE_TOL:
        status = "Undetermined"
    return {"status": status, "margin": abs(value), "solver": used,
            "slack": value}


# -- independent re-modelling from a process file -----------------------------


def _parse_process(process: dict):
    names = [e["name"] for e in process["registry"]]
    dims_of = {e["name"]: int(e["dim"]) for e in process["registry"]}
    roles = {e["name"]: e["role"] for e in process["registry"]}
    slots = {}
    for n, r in roles.items():
        if r[0] in ("I", "O") and r[1:].isdigit():
            slots.setdefault(int(r[1:]), {})[r[0]] = n
    n_slots = len(slots)
    d = int(np.prod([dims_of[n] for n in names]))
    flat = np.array([complex(re, im) for re, im in process["operator"]["entries"]])
    mat = flat.reshape(d, d)
    return names, dims_of, roles, slots, n_slots, mat


def _np_ptrace(mat, names, dims_of, over):
    keep = [n for n in names if n not in set(over)]
    dims = [dims_of[n] for n in names]
    t = mat.reshape(dims + dims)
    nn = len(names)
    for ax in sorted((names.index(n) for n in over), reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + nn)
        nn -= 1
    dk = int(np.prod([dims_of[n] for n in keep])) if keep else 1
    return t.reshape(dk, dk), keep


def _op_json(mat):
    return {"entries": [[float(z.real), float(z.imag)] for z in mat.ravel()]}


def remodel(process: dict, kind: str) -> dict:
    """Re-derive the constraint system from a process file without looking
    at the primary's dump."""
    from itertools import combinations, permutations

    names, dims_of, roles, slots, n, mat = _parse_process(process)
    past = [x for x in names if roles[x] == "P"]
    future = [x for x in names if roles[x] == "F"]

    def sortn(group):
        return [x for x in names if x in set(group)]

    def io(ks):
        out = []
        for k in ks:
            out.extend([slots[k]["I"], slots[k]["O"]])
        return out

    registry = [{"name": x, "dim": dims_of[x]} for x in names]
    blocks, groups = [], []
    top_mat, top_names = _np_ptrace(mat, names, dims_of, future)
    d_p = int(np.prod([dims_of[x] for x in past])) if past else 1

    if kind == "qcqc":
        for m in range(n):
            for done in combinations(range(1, n + 1), m):
                for nxt in range(1, n + 1):
                    if nxt in done:
                        continue
                    labels = sortn(past + io(done) + [slots[nxt]["I"]])
                    blocks.append({"key": {"subset": list(done), "next": nxt},
                                   "subsystems": labels})
        terms = [{"block": {"subset": [s for s in range(1, n + 1) if s != k],
                            "next": k},
                  "coeff": 1.0, "traced": [], "extended": [slots[k]["O"]]}
                 for k in range(1, n + 1)]
        groups.append({"name": "top", "subsystems": top_names,
                       "rhs": _op_json(top_mat), "terms": terms})
        for m in range(1, n):
            for done in combinations(range(1, n + 1), m):
                labels = sortn(past + io(done))
                terms = [{"block": {"subset": list(done), "next": nxt},
                          "coeff": 1.0, "traced": [slots[nxt]["I"]], "extended": []}
                         for nxt in range(1, n + 1) if nxt not in done]
                terms += [{"block": {"subset": [s for s in done if s != k],
                                     "next": k},
                           "coeff": -1.0, "traced": [], "extended": [slots[k]["O"]]}
                          for k in done]
                groups.append({"name": f"layer{done}", "subsystems": labels,
                               "rhs": None, "terms": terms})
        terms = [{"block": {"subset": [], "next": k}, "coeff": 1.0,
                  "traced": [slots[k]["I"]], "extended": []}
                 for k in range(1, n + 1)]
        groups.append({"name": "root", "subsystems": past,
                       "rhs": _op_json(np.eye(d_p)), "terms": terms})
    elif kind == "qccc":
        for m in range(1, n + 1):
            for seq in permutations(range(1, n + 1), m):
                labels = sortn(past + io(seq[:-1]) + [slots[seq[-1]]["I"]])
                blocks.append({"key": {"role": "order", "sequence": list(seq)},
                               "subsystems": labels})
        full = list(permutations(range(1, n + 1)))
        for seq in full:
            blocks.append({"key": {"role": "terminal", "sequence": list(seq)},
                           "subsystems": names})
        groups.append({"name": "full", "subsystems": names, "rhs": _op_json(mat),
                       "terms": [{"block": {"role": "terminal", "sequence": list(seq)},
                                  "coeff": 1.0, "traced": [], "extended": []}
                                 for seq in full]})
        nonf = [x for x in names if x not in set(future)]
        for seq in full:
            groups.append({
                "name": f"terminal{seq}", "subsystems": nonf, "rhs": None,
                "terms": [
                    {"block": {"role": "terminal", "sequence": list(seq)},
                     "coeff": 1.0, "traced": future, "extended": []},
                    {"block": {"role": "order", "sequence": list(seq)},
                     "coeff": -1.0, "traced": [], "extended": [slots[seq[-1]]["O"]]},
                ]})
        for m in range(1, n):
            for seq in permutations(range(1, n + 1), m):
                labels = sortn(past + io(seq))
                terms = [{"block": {"role": "order", "sequence": list(seq) + [nxt]},
                          "coeff": 1.0, "traced": [slots[nxt]["I"]], "extended": []}
                         for nxt in range(1, n + 1) if nxt not in seq]
                terms.append({"block": {"role": "order", "sequence": list(seq)},
                              "coeff": -1.0, "traced": [],
                              "extended": [slots[seq[-1]]["O"]]})
                groups.append({"name": f"layer{seq}", "subsystems": labels,
                               "rhs": None, "terms": terms})
        groups.append({"name": "root", "subsystems": past,
                       "rhs": _op_json(np.eye(d_p)),
                       "terms": [{"block": {"role": "order", "sequence": [k]},
                                  "coeff": 1.0, "traced": [slots[k]["I"]],
                                  "extended": []}
                                 for k in range(1, n + 1)]})
    else:
        raise ValueError(f"unknown class {kind!r}")
    return {"kind": kind, "n_slots": n, "registry": registry,
            "blocks": blocks, "groups": groups}


def oracle_membership(process_path: str, kind: str, remodel_flag: bool = False,
                      system_path: str | None = None,
                      time_limit: float = 600.0) -> dict:
    """Verdict JSON for one process, from its dump or re-modelled."""
    if system_path is not None and not remodel_flag:
        with open(system_path) as fh:
            system = json.load(fh)
    else:
        with open(process_path) as fh:
            process = json.load(fh)
        system = remodel(process, kind)
    return solve_system(system, time_limit=time_limit)
