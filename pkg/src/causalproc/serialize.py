"""JSON schemas shared by the CLI and external cross-checking tools.

Operators serialize as row-major [re, im] entry lists; floats go through
Python's shortest round-trip repr, which preserves every bit of a double.
"""

from __future__ import annotations

import json

import numpy as np

from .hilbert import LabeledOperator, SpaceRegistry
from .decomp import QcCcDecomposition, QcQcDecomposition
from .sdp import ConstraintSystem, EqualityGroup, Term, Verdict
from .switch import SlotPattern
from .validity import ProcessMatrix


def operator_to_json(op: LabeledOperator) -> dict:
    entries = [[float(z.real), float(z.imag)] for z in op.mat.ravel()]
    return {"subsystems": list(op.subsystems), "entries": entries}


def operator_from_json(data: dict, registry: SpaceRegistry) -> LabeledOperator:
    names = tuple(data["subsystems"])
    d = registry.total_dim(names)
    flat = np.array([complex(re, im) for re, im in data["entries"]])
    if flat.size != d * d:
        raise ValueError(f"operator entry count {flat.size} does not match dimension {d}")
    return LabeledOperator(registry, names, flat.reshape(d, d))


def process_to_json(w: ProcessMatrix) -> dict:
    registry = [{"name": s.name, "dim": s.dim, "role": w.roles[s.name]}
                for s in w.registry.systems]
    return {"registry": registry, "operator": operator_to_json(w.op)}


def process_from_json(data: dict) -> ProcessMatrix:
    registry = SpaceRegistry([(e["name"], int(e["dim"])) for e in data["registry"]])
    roles = {e["name"]: e["role"] for e in data["registry"]}
    return ProcessMatrix(operator_from_json(data["operator"], registry), roles)


def _qcqc_index(key) -> dict:
    return {"subset": list(key[0]), "next": key[1]}


def decomposition_to_json(d) -> dict:
    if isinstance(d, QcQcDecomposition):
        wits = [{"index": _qcqc_index(k), "operator": operator_to_json(op)}
                for k, op in sorted(d.witnesses.items())]
        return {"kind": "qcqc", "witnesses": wits}
    if isinstance(d, QcCcDecomposition):
        wits = [{"index": {"sequence": list(seq), "terminal": False},
                 "operator": operator_to_json(op)}
                for seq, op in sorted(d.order_witnesses.items())]
        wits += [{"index": {"sequence": list(seq), "terminal": True},
                  "operator": operator_to_json(op)}
                 for seq, op in sorted(d.terminal_witnesses.items())]
        return {"kind": "qccc", "witnesses": wits}
    raise TypeError(f"not a decomposition: {type(d)!r}")


def decomposition_from_json(data: dict, registry: SpaceRegistry):
    kind = data["kind"]
    if kind == "qcqc":
        wits = {}
        for entry in data["witnesses"]:
            idx = entry["index"]
            key = (tuple(sorted(idx["subset"])), int(idx["next"]))
            wits[key] = operator_from_json(entry["operator"], registry)
        return QcQcDecomposition(wits)
    if kind == "qccc":
        order, term = {}, {}
        for entry in data["witnesses"]:
            idx = entry["index"]
            seq = tuple(int(k) for k in idx["sequence"])
            op = operator_from_json(entry["operator"], registry)
            (term if idx.get("terminal") else order)[seq] = op
        return QcCcDecomposition(order, term)
    raise ValueError(f"unknown decomposition kind {kind!r}")


def pattern_from_json(data: dict) -> SlotPattern:
    actions = {}
    for name, action in data.items():
        if isinstance(action, dict):
            if set(action) != {"inject"}:
                raise ValueError(f"bad pattern action for {name!r}: {action!r}")
            actions[name] = np.array([complex(re, im) for re, im in action["inject"]])
        else:
            actions[name] = action
    return SlotPattern(actions)


def pattern_to_json(p: SlotPattern) -> dict:
    out = {}
    for name, action in p.actions.items():
        if isinstance(action, str):
            out[name] = action
        else:
            out[name] = {"inject": [[float(z.real), float(z.imag)]
                                    for z in np.asarray(action, dtype=complex)]}
    return out


def _block_key_to_json(key) -> dict:
    if key and key[0] in ("order", "terminal"):
        return {"role": key[0], "sequence": list(key[1])}
    return {"subset": list(key[0]), "next": key[1]}


def _block_key_from_json(data: dict):
    if "role" in data:
        return (data["role"], tuple(int(k) for k in data["sequence"]))
    return (tuple(int(k) for k in data["subset"]), int(data["next"]))


def system_to_json(sys: ConstraintSystem) -> dict:
    registry = [{"name": s.name, "dim": s.dim} for s in sys.registry.systems]
    blocks = [{"key": _block_key_to_json(key), "subsystems": list(labels)}
              for key, labels in sys.blocks]
    groups = []
    for g in sys.groups:
        groups.append({
            "name": g.name,
            "subsystems": list(g.labels),
            "rhs": operator_to_json(g.rhs) if g.rhs is not None else None,
            "terms": [{"block": _block_key_to_json(t.block), "coeff": t.coeff,
                       "traced": list(t.traced), "extended": list(t.extended)}
                      for t in g.terms],
        })
    return {"kind": sys.kind, "n_slots": sys.n_slots,
            "registry": registry, "blocks": blocks, "groups": groups}


def system_from_json(data: dict) -> ConstraintSystem:
    registry = SpaceRegistry([(e["name"], int(e["dim"])) for e in data["registry"]])
    blocks = [(_block_key_from_json(b["key"]), tuple(b["subsystems"]))
              for b in data["blocks"]]
    groups = []
    for g in data["groups"]:
        rhs = operator_from_json(g["rhs"], registry) if g["rhs"] is not None else None
        terms = tuple(Term(_block_key_from_json(t["block"]), float(t["coeff"]),
                           tuple(t["traced"]), tuple(t["extended"]))
                      for t in g["terms"])
        groups.append(EqualityGroup(g["name"], tuple(g["subsystems"]), rhs, terms))
    return ConstraintSystem(data["kind"], registry, int(data["n_slots"]), blocks, groups)


def verdict_to_json(v: Verdict) -> dict:
    out = v.to_json()
    if v.certificate is not None:
        out["certificate"] = {name: operator_to_json(op)
                              for name, op in v.certificate.items()}
    else:
        out["certificate"] = None
    if v.point is not None and isinstance(v.point, (QcQcDecomposition, QcCcDecomposition)):
        out["point"] = decomposition_to_json(v.point)
    else:
        out["point"] = None
    return out


def dumps(data: dict) -> str:
    return json.dumps(data, indent=None, separators=(",", ":"))
