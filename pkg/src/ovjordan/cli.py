"""Command-line interface and the JSON document format.

An operator document looks like::

    {"schema": "ovjordan/1",
     "lambda": {"a": "0", "b": "1"},
     "partition": ["0", "1/2", "1"],
     "n": 2,
     "entries": [[[cell, cell], ...], ...]}

where ``entries[i][j]`` has one cell function per partition cell and each
cell function is ``{"num": [c0, c1, ...], "den": [c0, ...]}`` with ascending
coefficients.  A coefficient is a rational string such as ``"-3/4"`` or a
``{"re": "...", "im": "..."}`` pair.  Floats are rejected.

Exit codes: 0 ok, 1 invalid input, 2 negative mathematical result with a
witness, 3 unsupported input (characteristic polynomial does not split).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Sequence

from .commutant import conjugate_masi, diagonalize_idempotent_in_commutant, solve_commutant
from .diagonalization import SimilarityCertificate, diagonalize_idempotent
from .errors import (
    NotMaximal,
    OvJordanError,
    SchemaError,
    SpectrumNotSplit,
    Undecided,
)
from .ktheory import K0Class, k0_of_commutant, similar
from .opmatrix import CellMatrix, OpMatrix
from .oracle import (
    ConjugationReport,
    SamplePlan,
    check_conjugation,
    compare_commutant_dim,
)
from .scalar_field import (
    Cell,
    GaussianRational,
    Partition,
    Poly,
    RealRoot,
    cell_to_str,
    reduce_cell,
)
from .structure import CanonicalForm, FrameObstruction, canonical_form

SCHEMA = "ovjordan/1"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NEGATIVE = 2
EXIT_UNSUPPORTED = 3

# stage label printed in text reports, per command
STAGES = {
    "diagonalize-idempotent": "idempotent diagonalization by bounded pivoting",
    "frame": "frame construction from splitting idempotents",
    "canonical": "canonical block form with splitting idempotents",
    "commutant": "commutant basis and forced zero pattern",
    "in-commutant-diagonalize": "idempotent diagonalization inside the commutant",
    "conjugate-masi": "conjugacy of maximal abelian idempotent sets",
    "k0": "local K0 invariant of the commutant",
    "similar": "similarity classification by K0 data and block intertwiners",
    "verify": "pointwise numeric verification",
}


# ---------------------------------------------------------------------------
# parsing


def _rational(value: Any, path: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise SchemaError(path, "coefficients must be rational strings, not floats")
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str):
        raise SchemaError(path, "expected a rational string")
    try:
        return Fraction(value.strip())
    except (ValueError, ZeroDivisionError):
        raise SchemaError(path, f"not a rational number: {value!r}") from None


def _coefficient(value: Any, path: str) -> GaussianRational:
    if isinstance(value, dict):
        extra = set(value) - {"re", "im"}
        if extra:
            raise SchemaError(path, f"unexpected keys {sorted(extra)}")
        re = _rational(value.get("re", "0"), path + ".re")
        im = _rational(value.get("im", "0"), path + ".im")
        return GaussianRational(re, im)
    return GaussianRational(_rational(value, path))


def _poly(value: Any, path: str) -> Poly:
    if not isinstance(value, list):
        raise SchemaError(path, "expected a list of coefficients")
    return Poly([_coefficient(c, f"{path}[{i}]") for i, c in enumerate(value)])


def _cell(value: Any, path: str) -> Cell:
    if not isinstance(value, dict) or "num" not in value:
        raise SchemaError(path, "expected an object with 'num' and 'den'")
    num = _poly(value["num"], path + ".num")
    den = _poly(value.get("den", ["1"]), path + ".den")
    if den.is_zero():
        raise SchemaError(path + ".den", "denominator is zero")
    return reduce_cell(num, den)


def _require(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing")
    return doc[key]


def _check_schema(doc: Any, path: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected a JSON object")
    if "schema" in doc and doc["schema"] != SCHEMA:
        raise SchemaError(path + ".schema", f"unsupported schema {doc['schema']!r}")


def operator_from_json(doc: Any, path: str = "$") -> OpMatrix:
    """Exact OpMatrix from an already decoded operator document."""
    _check_schema(doc, path)
    lam = _require(doc, "lambda", path)
    if not isinstance(lam, dict):
        raise SchemaError(path + ".lambda", "expected {a, b}")
    a = _rational(_require(lam, "a", path + ".lambda"), path + ".lambda.a")
    b = _rational(_require(lam, "b", path + ".lambda"), path + ".lambda.b")
    bps = _require(doc, "partition", path)
    if not isinstance(bps, list) or len(bps) < 2:
        raise SchemaError(path + ".partition", "expected at least two breakpoints")
    bps = [_rational(t, f"{path}.partition[{i}]") for i, t in enumerate(bps)]
    if any(not s < t for s, t in zip(bps, bps[1:])):
        raise SchemaError(path + ".partition", "breakpoints must be strictly increasing")
    if bps[0] != a or bps[-1] != b:
        raise SchemaError(path + ".partition", "endpoints must match lambda.a and lambda.b")
    part = Partition(bps)
    n = _require(doc, "n", path)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError(path + ".n", "expected a positive integer")
    rows = _require(doc, "entries", path)
    if not isinstance(rows, list) or len(rows) != n:
        raise SchemaError(path + ".entries", f"expected {n} rows")
    cells: list[CellMatrix] = [[[None] * n for _ in range(n)] for _ in range(part.ncells)]
    for i, row in enumerate(rows):
        rp = f"{path}.entries[{i}]"
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(rp, f"expected {n} entries")
        for j, entry in enumerate(row):
            ep = f"{rp}[{j}]"
            if not isinstance(entry, list) or len(entry) != part.ncells:
                raise SchemaError(ep, f"expected {part.ncells} cell functions")
            for k, f in enumerate(entry):
                cells[k][i][j] = _cell(f, f"{ep}[{k}]")
    return OpMatrix.from_cells(part, cells)


def parse(data: bytes | str) -> OpMatrix:
    """Parse an operator document (UTF-8 JSON) into an exact OpMatrix."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return operator_from_json(doc)


def certificate_from_json(doc: Any, path: str = "$") -> SimilarityCertificate:
    """Certificate document, or a report whose payload carries one."""
    _check_schema(doc, path)
    if "payload" in doc and isinstance(doc["payload"], dict) and "certificate" in doc["payload"]:
        return certificate_from_json(doc["payload"]["certificate"], path + ".payload.certificate")
    x = operator_from_json(_require(doc, "x", path), path + ".x")
    x_inv = operator_from_json(_require(doc, "x_inv", path), path + ".x_inv")
    return SimilarityCertificate.build(x, x_inv)


# ---------------------------------------------------------------------------
# serialization


def _coeff_json(c: GaussianRational) -> Any:
    if c.im == 0:
        return str(c.re)
    return {"im": str(c.im), "re": str(c.re)}


def cell_json(f: Cell) -> dict:
    num, den = f
    return {"den": [_coeff_json(c) for c in den.coeffs],
            "num": [_coeff_json(c) for c in num.coeffs]}


def _root_json(r: RealRoot) -> dict:
    if r.is_exact:
        return {"exact": str(r.value), "interval": [str(r.value), str(r.value)]}
    return {"exact": None, "interval": [str(r.lo), str(r.hi)]}


def operator_json(m: OpMatrix) -> dict:
    part = m.partition
    n = m.n
    cells = m.cells()
    entries = [[[cell_json(cells[k][i][j]) for k in range(part.ncells)]
                for j in range(n)] for i in range(n)]
    return {"entries": entries,
            "lambda": {"a": str(part.a), "b": str(part.b)},
            "n": n,
            "partition": [str(t) for t in part.breakpoints],
            "schema": SCHEMA}


def certificate_json(cert: SimilarityCertificate) -> dict:
    return {"bounded": cert.bounded, "schema": SCHEMA,
            "x": operator_json(cert.x), "x_inv": operator_json(cert.x_inv)}


def _cellmatrix_json(m: CellMatrix) -> list:
    return [[cell_json(f) for f in row] for row in m]


def _cell_text(m: CellMatrix) -> list:
    return [[cell_to_str(f) for f in row] for row in m]


def _interval(part: Partition, k: int) -> list[str]:
    lo, hi = part.cell(k)
    return [str(lo), str(hi)]


def obstruction_json(obs: FrameObstruction) -> dict:
    q = obs.unbounded_quotient.cells[0]
    return {"cell": obs.cell,
            "narrative": obs.narrative,
            "quotient": cell_json(q),
            "quotient_text": cell_to_str(q),
            "witness": _root_json(obs.witness),
            "witness_point": str(obs.witness_point)}


def form_json(form: CanonicalForm) -> dict:
    part = form.partition
    cells = []
    for k, blocks in enumerate(form.blocks):
        cells.append({"blocks": [{"diagonal": cell_to_str(b.diagonal),
                                  "entries": _cellmatrix_json([list(r) for r in b.entries]),
                                  "offset": b.offset,
                                  "size": b.size,
                                  "superdiagonal": [cell_to_str(f) for f in b.superdiagonal]}
                                 for b in blocks],
                      "interval": _interval(part, k)})
    return {"block_diagonal": operator_json(form.block_diagonal()),
            "cells": cells,
            "certificate": certificate_json(form.total())}


def k0_json(k0: K0Class) -> dict:
    cells = []
    for k, fams in enumerate(k0.families):
        cells.append({"families": [{"blocks": list(f.blocks),
                                    "diagonal": cell_to_str(f.diagonal),
                                    "multiplicity": f.multiplicity,
                                    "size": f.size} for f in fams],
                      "interval": _interval(k0.partition, k),
                      "rank": k0.rank(k)})
    return {"cells": cells,
            "collisions": [{"cell": c.cell, "families": list(c.families),
                            "point": _root_json(c.point)} for c in k0.collisions],
            "ranks": list(k0.ranks)}


def emit(report: dict, fmt: str = "json") -> bytes:
    """Serialize a report; JSON output is key-sorted and byte-stable."""
    if fmt == "json":
        return (json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    return (_text(report) + "\n").encode()


def _text(report: dict) -> str:
    cmd = report["command"]
    lines = [f"command: {cmd}", f"stage: {STAGES.get(cmd, cmd)}", f"status: {report['status']}"]
    if "message" in report:
        lines.append(f"message: {report['message']}")
    payload = report.get("payload", {})
    for key in sorted(payload):
        value = payload[key]
        if key in ("certificate", "block_diagonal", "conjugate", "frame", "witness_operator"):
            lines.append(f"{key}: (exact data in JSON output)")
        elif key == "summary":
            lines.extend(f"  {s}" for s in value)
        else:
            lines.append(f"{key}: {json.dumps(value, sort_keys=True, ensure_ascii=False)}")
    ver = report.get("verification")
    if ver:
        lines.append("stage: " + STAGES["verify"])
        for key in sorted(ver):
            lines.append(f"  {key}: {ver[key]}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands


class _Negative(Exception):
    """A mathematically negative result; carries status and payload."""

    def __init__(self, status: str, payload: dict, message: str):
        super().__init__(message)
        self.status = status
        self.payload = payload


def _verification(rep: ConjugationReport) -> dict:
    return {"flagged": rep.flagged, "max_residual": float(f"{rep.max_residual:.6e}"),
            "passed": rep.passed, "samples": rep.samples, "tolerance": rep.tolerance}


def _plan(mats: Sequence[OpMatrix], flags) -> SamplePlan:
    return SamplePlan.for_matrices(list(mats), flags.samples, seed=flags.seed, tolerance=flags.tol)


def _check(a: OpMatrix, cert: SimilarityCertificate, expected: OpMatrix, flags) -> dict:
    plan = _plan([a, cert.x, cert.x_inv, expected], flags)
    return _verification(check_conjugation(a, cert, expected, plan))


def _cmd_diagonalize_idempotent(docs, flags):
    p = docs[0]
    cert, d = diagonalize_idempotent(p)
    payload = {"certificate": certificate_json(cert), "conjugate": operator_json(d),
               "ranks": list(p.trace_function().values)}
    return payload, _check(p, cert, d, flags)


def _obstruction(obs: FrameObstruction) -> _Negative:
    return _Negative("obstruction", {"obstruction": obstruction_json(obs)},
                     f"no finite frame: unbounded quotient {cell_to_str(obs.unbounded_quotient.cells[0])} "
                     f"at {obs.witness_point}")


def _cmd_frame(docs, flags):
    a = docs[0]
    res = canonical_form(a)
    if isinstance(res, FrameObstruction):
        raise _obstruction(res)
    frame, form = res
    payload = {"frame": [operator_json(e) for e in frame.elements],
               "supports": [list(s) for s in frame.supports]}
    total = form.total()
    return payload, _check(a, total, form.block_diagonal(), flags)


def _cmd_canonical(docs, flags):
    a = docs[0]
    res = canonical_form(a)
    if isinstance(res, FrameObstruction):
        raise _obstruction(res)
    _, form = res
    return form_json(form), _check(a, form.total(), form.block_diagonal(), flags)


def _cmd_commutant(docs, flags):
    a = docs[0]
    mod = solve_commutant(a)
    cells = []
    for k in range(a.partition.ncells):
        cells.append({"basis": [_cellmatrix_json(b) for b in mod.bases[k]],
                      "basis_text": [_cell_text(b) for b in mod.bases[k]],
                      "dimension": mod.dimension(k),
                      "interval": _interval(a.partition, k),
                      "layout": None if mod.layouts[k] is None else [list(x) for x in mod.layouts[k]],
                      "predictions_hold": mod.predictions_hold[k],
                      "zero_pattern": sorted([list(ij) for ij in mod.zero_patterns[k]])})
    plan = SamplePlan.for_matrices([a], min(flags.samples, 20), seed=flags.seed, tolerance=flags.tol)
    rep = compare_commutant_dim(a, [mod.dimension(k) for k in range(a.partition.ncells)], plan)
    ver = {"checked": len(rep.checked), "mismatches": len(rep.mismatches),
           "passed": rep.passed, "skipped": len(rep.skipped)}
    return {"cells": cells}, ver


def _cmd_in_commutant(docs, flags):
    a, p = docs
    cert = diagonalize_idempotent_in_commutant(a, p)
    d = cert.conjugate(p.refine(cert.partition))
    payload = {"certificate": certificate_json(cert), "conjugate": operator_json(d),
               "commutes_with_operator": a.commutes(cert.x)}
    return payload, _check(p, cert, d, flags)


def _cmd_conjugate_masi(docs, flags):
    a = docs[0]
    count = getattr(flags, "p_count", (len(docs) - 1) // 2)
    gp = docs[1:1 + count]
    gq = docs[1 + count:]
    try:
        cert = conjugate_masi(a, gp, gq)
    except NotMaximal as exc:
        raise _Negative("obstruction", {"kind": "not-maximal", "cell": exc.cell,
                                        "witness_operator": operator_json(exc.witness)},
                        str(exc)) from None
    payload = {"certificate": certificate_json(cert),
               "commutes_with_operator": a.commutes(cert.x)}
    ver = _check(a, cert, a.refine(cert.partition), flags)
    return payload, ver


def _cmd_k0(docs, flags):
    k0 = k0_of_commutant(docs[0])
    return k0_json(k0), None


def _cmd_similar(docs, flags):
    a, b = docs
    try:
        verdict = similar(a, b)
    except Undecided as exc:
        raise _Negative("obstruction", {"kind": "undecided"}, str(exc)) from None
    if not verdict.similar:
        payload = {"k0": k0_json(verdict.k0), "witness": verdict.witness,
                   "collisions": [{"cell": c.cell, "point": _root_json(c.point)}
                                  for c in verdict.collisions]}
        raise _Negative("not-similar", payload, verdict.witness or "not similar")
    cert = verdict.certificate
    payload = {"certificate": certificate_json(cert), "k0": k0_json(verdict.k0)}
    return payload, _check(a, cert, b, flags)


def _cmd_verify(docs, flags):
    a, cert, expected = docs
    rep = _check(a, cert, expected, flags)
    exact = cert.verify() and cert.conjugate(a) == expected
    payload = {"exact": exact}
    if not (exact and rep["passed"]):
        raise _Invalid("certificate failed verification", payload, rep)
    return payload, rep


class _Invalid(Exception):
    def __init__(self, message: str, payload: dict | None = None, verification: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}
        self.verification = verification


COMMANDS = {
    "diagonalize-idempotent": (_cmd_diagonalize_idempotent, 1),
    "frame": (_cmd_frame, 1),
    "canonical": (_cmd_canonical, 1),
    "commutant": (_cmd_commutant, 1),
    "in-commutant-diagonalize": (_cmd_in_commutant, 2),
    "conjugate-masi": (_cmd_conjugate_masi, None),
    "k0": (_cmd_k0, 1),
    "similar": (_cmd_similar, 2),
    "verify": (_cmd_verify, 3),
}


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _load(command: str, paths: Sequence[str]) -> list:
    docs = []
    for i, path in enumerate(paths):
        try:
            raw = json.loads(_read(path))
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaError(path, f"cannot read JSON: {exc}") from None
        if command == "verify" and i == 1:
            docs.append(certificate_from_json(raw, path))
        else:
            docs.append(operator_from_json(raw, path))
    return docs


def run(command: str, inputs: Sequence[str], flags) -> tuple[int, dict]:
    """Execute a command on input files; returns exit code and report."""
    report: dict = {"command": command, "schema": SCHEMA}
    fn, arity = COMMANDS[command]
    try:
        if arity is not None and len(inputs) != arity:
            raise _Invalid(f"{command} expects {arity} input file(s), got {len(inputs)}")
        docs = _load(command, inputs)
        payload, ver = fn(docs, flags)
        report.update(status="ok", payload=payload)
        if ver is not None:
            report["verification"] = ver
        return EXIT_OK, report
    except _Negative as neg:
        report.update(status=neg.status, payload=neg.payload, message=str(neg))
        return EXIT_NEGATIVE, report
    except SpectrumNotSplit as exc:
        report.update(status="unsupported", payload={}, message=str(exc))
        return EXIT_UNSUPPORTED, report
    except _Invalid as exc:
        report.update(status="invalid", payload=exc.payload, message=str(exc))
        if exc.verification is not None:
            report["verification"] = exc.verification
        return EXIT_INVALID, report
    except (OvJordanError, ValueError, ZeroDivisionError) as exc:
        report.update(status="invalid", payload={}, message=f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID, report


def default_flags(**overrides) -> argparse.Namespace:
    """Flags as parsed from an empty command line, with overrides."""
    flags = argparse.Namespace(samples=100, tol=1e-8, seed=None, format="json")
    for key, value in overrides.items():
        setattr(flags, key, value)
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovjordan",
        description="Exact similarity and structure computations for matrices of "
                    "piecewise rational functions.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("inputs", nargs="*", help="operator documents ('-' reads stdin)")
    parser.add_argument("--p", dest="p_gen", action="append", default=[],
                        help="conjugate-masi: a generator of the first idempotent set")
    parser.add_argument("--q", dest="q_gen", action="append", default=[],
                        help="conjugate-masi: a generator of the second idempotent set")
    parser.add_argument("--samples", type=int, default=100)
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--seed", type=int, default=None)
    out = parser.add_mutually_exclusive_group()
    out.add_argument("--json", dest="format", action="store_const", const="json")
    out.add_argument("--text", dest="format", action="store_const", const="text")
    parser.set_defaults(format="json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    flags = parser.parse_args(argv)
    inputs = list(flags.inputs)
    flags.p_count = len(flags.p_gen)
    if flags.command == "conjugate-masi":
        if len(inputs) != 1 or not flags.p_gen or not flags.q_gen:
            parser.error("conjugate-masi takes one operator plus --p and --q generator files")
        inputs = inputs + flags.p_gen + flags.q_gen
    code, report = run(flags.command, inputs, flags)
    sys.stdout.buffer.write(emit(report, flags.format))
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
