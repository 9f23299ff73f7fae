"""Batch differential checking of membership verdicts.

Runs the primary `causalproc` CLI on each process in a manifest (a
newline-delimited list of process JSON paths), re-solves the same problem
through the external convex stack, and reports any hard disagreement.
Undetermined on either side counts as agreement.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import subprocess
import sys
import tempfile
from dataclasses import asdict, dataclass

from .oracle import oracle_membership, remodel, solve_system


@dataclass
class CrossCheckRecord:
    path: str
    digest: str
    kind: str
    primary_status: str | None
    oracle_status: str | None
    primary_margin: float | None
    oracle_margin: float | None
    agree: bool
    error: str | None = None


def _primary_verdict(process_text: str, kind: str, dump_path: str) -> dict:
    proc = subprocess.run(
        ["causalproc", f"check-{kind}", "--json", "--dump-system", dump_path],
        input=process_text, capture_output=True, text=True)
    if proc.returncode == 2:
        raise RuntimeError(f"primary rejected input: {proc.stderr.strip()}")
    return json.loads(proc.stdout)


def crosscheck_one(path: str, kind: str, remodel_flag: bool = False,
                   time_limit: float = 600.0) -> CrossCheckRecord:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        digest = hashlib.sha256(raw).hexdigest()[:16]
        json.loads(raw)  # fail early on corrupted files
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as tmp:
            dump_path = tmp.name
        primary = _primary_verdict(raw.decode(), kind, dump_path)
        oracle = oracle_membership(path, kind, remodel_flag=remodel_flag,
                                   system_path=dump_path, time_limit=time_limit)
    except (OSError, ValueError, RuntimeError, json.JSONDecodeError) as e:
        return CrossCheckRecord(path, "", kind, None, None, None, None,
                                agree=False, error=str(e))
    statuses = {primary["status"], oracle["status"]}
    agree = "Undetermined" in statuses or primary["status"] == oracle["status"]
    return CrossCheckRecord(path, digest, kind, primary["status"],
                            oracle["status"], primary.get("margin"),
                            oracle.get("margin"), agree)


def batch_crosscheck(manifest_path: str, kind: str, remodel_flag: bool = False,
                     time_limit: float = 600.0) -> list[CrossCheckRecord]:
    with open(manifest_path) as fh:
        paths = [line.strip() for line in fh if line.strip()]
    return [crosscheck_one(p, kind, remodel_flag, time_limit) for p in paths]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="crosscheck", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("oracle", help="verdict for one process file")
    s.add_argument("process")
    s.add_argument("--class", dest="cls", choices=("qcqc", "qccc"), required=True)
    s.add_argument("--remodel", action="store_true")
    s.add_argument("--system", help="constraint-system dump to consume")
    s.add_argument("--time-limit", type=float, default=600.0)

    s = sub.add_parser("batch", help="differential run over a manifest")
    s.add_argument("manifest")
    s.add_argument("--class", dest="cls", choices=("qcqc", "qccc"), default="qccc")
    s.add_argument("--remodel", action="store_true")
    s.add_argument("--time-limit", type=float, default=600.0)

    args = p.parse_args(argv)

    if args.command == "oracle":
        verdict = oracle_membership(args.process, args.cls,
                                    remodel_flag=args.remodel,
                                    system_path=args.system,
                                    time_limit=args.time_limit)
        json.dump(verdict, sys.stdout)
        sys.stdout.write("\n")
        return 0

    records = batch_crosscheck(args.manifest, args.cls, args.remodel,
                               args.time_limit)
    hard = [r for r in records if not r.agree and r.error is None]
    errors = [r for r in records if r.error is not None]
    summary = {"total": len(records), "disagreements": len(hard),
               "errors": len(errors)}
    json.dump({"records": [asdict(r) for r in records], "summary": summary},
              sys.stdout, indent=1)
    sys.stdout.write("\n")
    if errors:
        return 2
    return 1 if hard else 0


if __name__ == "__main__":
    sys.exit(main())
