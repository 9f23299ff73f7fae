"""Command-line interface over the shared process JSON format.

Processes flow through stdin/stdout so subcommands compose with pipes:

    causalproc build-switch | causalproc validate
    causalproc build-example 2 | causalproc check-qccc --expect infeasible

Exit codes: 0 success (or verdict as expected), 1 verdict mismatch,
2 malformed input or role violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .hilbert import SubsystemError
from .construct import (
    NotDiagonalError,
    qccc_from_dephased_qcqc,
    qcqc_from_dephased_all,
    qcqc_from_dephased_inputs,
)
from .decomp import QcQcDecomposition, verify_qccc, verify_qcqc
from .sdp import assemble_qccc_system, assemble_qcqc_system, solve_feasibility, Verdict
from .serialize import (
    decomposition_from_json,
    decomposition_to_json,
    pattern_from_json,
    process_from_json,
    process_to_json,
    system_to_json,
    verdict_to_json,
)
from .switch import apply_pattern, build_example, build_quantum_switch
from .validity import RoleError, check_validity


class InputError(Exception):
    pass


def _read_json(path: str | None):
    try:
        if path:
            with open(path) as fh:
                return json.load(fh)
        return json.loads(sys.stdin.read())
    except json.JSONDecodeError as e:
        where = path or "stdin"
        raise InputError(f"malformed JSON in {where} at line {e.lineno} "
                         f"column {e.colno}: {e.msg}") from None
    except OSError as e:
        raise InputError(str(e)) from None


def _read_process():
    data = _read_json(None)
    try:
        return process_from_json(data)
    except (KeyError, ValueError, SubsystemError, RoleError) as e:
        raise InputError(f"bad process JSON: {e}") from None


def _emit(data: dict):
    json.dump(data, sys.stdout)
    sys.stdout.write("\n")


def _expect_exit(expected: str | None, actual: str) -> int:
    if expected is None:
        return 0
    return 0 if expected.lower() == actual.lower() else 1


def _cmd_build_switch(args) -> int:
    _emit(process_to_json(build_quantum_switch()))
    return 0


def _cmd_build_example(args) -> int:
    _emit(process_to_json(build_example(args.n)))
    return 0


def _cmd_apply_pattern(args) -> int:
    w = _read_process()
    try:
        p = pattern_from_json(_read_json(args.pattern))
        out = apply_pattern(w, p)
    except (ValueError, SubsystemError) as e:
        raise InputError(str(e)) from None
    _emit(process_to_json(out))
    return 0


def _cmd_validate(args) -> int:
    w = _read_process()
    rep = check_validity(w, tol=args.tol)
    if args.json:
        _emit(rep.to_json())
    else:
        for name, r in sorted(rep.residuals.items()):
            print(f"{name:<16} {r:.3e}")
        print(f"{'normalization':<16} {rep.normalization_gap:.3e}")
        print(f"{'min eigenvalue':<16} {rep.psd_min_eig:.3e}")
        print(f"verdict: {'valid' if rep.verdict else 'invalid'}")
    return _expect_exit(args.expect, "valid" if rep.verdict else "invalid")


def _run_membership(args, kind: str) -> int:
    w = _read_process()
    try:
        sysm = assemble_qcqc_system(w) if kind == "qcqc" else assemble_qccc_system(w)
    except ValueError as e:
        raise InputError(str(e)) from None
    if args.dump_system:
        with open(args.dump_system, "w") as fh:
            json.dump(system_to_json(sysm), fh)
    v = solve_feasibility(sysm, max_iter=args.max_iter, time_budget=args.time_budget)
    if kind == "qccc" and v.status == "Infeasible" and w.n_slots <= 3:
        v.note = (v.note + "; " if v.note else "") + "causally nonseparable"
    if v.status == "Feasible":
        # the returned blocks are re-verified before the verdict is trusted
        if kind == "qcqc":
            d = QcQcDecomposition(dict(v.point))
            ok = verify_qcqc(w, d, tol=1e-7).verdict
        else:
            from .sdp import _point_to_qccc
            d = _point_to_qccc(v)
            ok = verify_qccc(w, d, tol=1e-7).verdict
        if ok:
            v.point = d
        else:
            v = Verdict("Undetermined", 0.0, v.iterations, v.runtime_s,
                        note="solver point failed verification")
    if args.json:
        _emit(verdict_to_json(v))
    else:
        print(f"{kind} membership: {v.status.lower()} "
              f"(margin {v.margin:.3e}, {v.iterations} iterations, "
              f"{v.runtime_s:.1f}s){' - ' + v.note if v.note else ''}")
    return _expect_exit(args.expect, v.status)


def _cmd_check_qcqc(args) -> int:
    return _run_membership(args, "qcqc")


def _cmd_check_qccc(args) -> int:
    return _run_membership(args, "qccc")


def _cmd_dump_system(args) -> int:
    w = _read_process()
    try:
        sysm = (assemble_qcqc_system(w) if args.cls == "qcqc"
                else assemble_qccc_system(w))
    except ValueError as e:
        raise InputError(str(e)) from None
    _emit(system_to_json(sysm))
    return 0


def _cmd_decompose(args) -> int:
    w = _read_process()
    try:
        if args.method == "dephased-all":
            d = qcqc_from_dephased_all(w)
        elif args.method == "dephased-inputs":
            d = qcqc_from_dephased_inputs(w)
        else:  # qccc-from-qcqc
            d = qccc_from_dephased_qcqc(w, qcqc_from_dephased_all(w))
    except (NotDiagonalError, ValueError) as e:
        raise InputError(str(e)) from None
    _emit({"process": process_to_json(w), "decomposition": decomposition_to_json(d)})
    return 0


def _cmd_check_decomposition(args) -> int:
    data = _read_json(None)
    try:
        w = process_from_json(data["process"])
        d = decomposition_from_json(data["decomposition"], w.registry)
    except (KeyError, ValueError, SubsystemError, RoleError) as e:
        raise InputError(f"bad combined JSON: {e}") from None
    kind = data["decomposition"]["kind"]
    rep = (verify_qcqc if kind == "qcqc" else verify_qccc)(w, d, tol=args.tol)
    if args.json:
        _emit(rep.to_json())
    else:
        print(f"{kind} decomposition: {'valid' if rep.verdict else 'invalid'} "
              f"(max residual {rep.max_residual():.3e}, "
              f"min eigenvalue {rep.psd_min_eig:.3e})")
    return _expect_exit(args.expect, "valid" if rep.verdict else "invalid")


def _cmd_report(args) -> int:
    w = _read_process()
    rep = check_validity(w)
    rows = [("valid process", "yes" if rep.verdict else "no",
             f"max residual {rep.max_residual():.2e}")]
    verdicts = {}
    if rep.verdict:
        for kind, assemble in (("qcqc", assemble_qcqc_system),
                               ("qccc", assemble_qccc_system)):
            v = solve_feasibility(assemble(w), max_iter=args.max_iter,
                                  time_budget=args.time_budget)
            verdicts[kind] = v
            rows.append((f"{kind} member", v.status.lower(),
                         f"margin {v.margin:.2e}"))
        if w.n_slots <= 3 and verdicts["qccc"].status != "Undetermined":
            sep = "no" if verdicts["qccc"].status == "Infeasible" else "yes"
            rows.append(("causally separable", sep, "QC-CC coincides for N<=3"))
    if args.json:
        out = {"validity": rep.to_json(),
               "memberships": {k: verdict_to_json(v) for k, v in verdicts.items()}}
        _emit(out)
    else:
        width = max(len(r[0]) for r in rows)
        for name, value, note in rows:
            print(f"{name:<{width}}  {value:<13} {note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalproc", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("build-switch").set_defaults(fn=_cmd_build_switch)

    s = sub.add_parser("build-example")
    s.add_argument("n", type=int, choices=(1, 2, 3))
    s.set_defaults(fn=_cmd_build_example)

    s = sub.add_parser("apply-pattern")
    s.add_argument("--pattern", required=True)
    s.set_defaults(fn=_cmd_apply_pattern)

    s = sub.add_parser("validate")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--json", action="store_true")
    s.add_argument("--expect", choices=("valid", "invalid"))
    s.set_defaults(fn=_cmd_validate)

    for name, fn in (("check-qcqc", _cmd_check_qcqc), ("check-qccc", _cmd_check_qccc)):
        s = sub.add_parser(name)
        s.add_argument("--expect", choices=("feasible", "infeasible", "undetermined"))
        s.add_argument("--json", action="store_true")
        s.add_argument("--dump-system", metavar="FILE")
        s.add_argument("--max-iter", type=int, default=4000)
        s.add_argument("--time-budget", type=float, default=240.0)
        s.set_defaults(fn=fn)

    s = sub.add_parser("dump-system")
    s.add_argument("--class", dest="cls", choices=("qcqc", "qccc"), required=True)
    s.set_defaults(fn=_cmd_dump_system)

    s = sub.add_parser("decompose")
    s.add_argument("--method", required=True,
                   choices=("dephased-all", "dephased-inputs", "qccc-from-qcqc"))
    s.set_defaults(fn=_cmd_decompose)

    s = sub.add_parser("check-decomposition")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--json", action="store_true")
    s.add_argument("--expect", choices=("valid", "invalid"))
    s.set_defaults(fn=_cmd_check_decomposition)

    s = sub.add_parser("report")
    s.add_argument("--json", action="store_true")
    s.add_argument("--max-iter", type=int, default=4000)
    s.add_argument("--time-budget", type=float, default=240.0)
    s.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
