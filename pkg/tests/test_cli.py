import json
import subprocess
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovjordan.cli import (
    certificate_from_json,
    default_flags,
    emit,
    main,
    operator_json,
    parse,
    run,
)
from ovjordan.errors import SchemaError
from ovjordan.opmatrix import OpMatrix
from ovjordan.scalar_field import GaussianRational, Partition, PiecewiseRational as PR, Poly

SAMPLES = Path(__file__).resolve().parent.parent / "samples"
UNIT = Partition([0, 1])
LAM = PR.variable(UNIT)


def sample(name):
    return str(SAMPLES / f"{name}.json")


def shear_document():
    cell = lambda num: [{"num": num, "den": ["1"]}]
    return {"schema": "ovjordan/1", "lambda": {"a": "0", "b": "1"}, "partition": ["0", "1"],
            "n": 2, "entries": [[cell(["0", "1"]), cell(["1"])], [cell([]), cell(["0", "-2"])]]}


def test_parse_shear_document():
    a = parse(json.dumps(shear_document()))
    assert a == OpMatrix([[LAM, 1], [0, -2 * LAM]], UNIT)
    assert parse(Path(sample("shear_obstruction")).read_bytes()) == a


def test_parse_rejects_empty_entries():
    doc = shear_document()
    doc["entries"] = []
    with pytest.raises(SchemaError) as exc:
        parse(json.dumps(doc))
    assert exc.value.path == "$.entries"


def test_parse_is_exact():
    doc = shear_document()
    doc["entries"][0][1] = [{"num": ["1/3"], "den": ["1"]}]
    a = parse(json.dumps(doc))
    assert a[0, 1](1) == GaussianRational(F(1, 3))


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["entries"][0][0][0].update(num=[0.5]), "$.entries[0][0][0].num[0]"),
    (lambda d: d["entries"][1][1][0].update(den=["0"]), "$.entries[1][1][0].den"),
    (lambda d: d.update(partition=["0", "1/2"]), "$.partition"),
    (lambda d: d.update(partition=["0", "1", "1/2"]), "$.partition"),
    (lambda d: d["entries"][0].pop(), "$.entries[0]"),
    (lambda d: d.update(schema="other/2"), "$.schema"),
    (lambda d: d["entries"][0][0].append({"num": ["1"]}), "$.entries[0][0]"),
])
def test_schema_violations_are_path_addressed(mutate, path):
    doc = shear_document()
    mutate(doc)
    with pytest.raises(SchemaError) as exc:
        parse(json.dumps(doc))
    assert exc.value.path == path


def test_complex_coefficients_round_trip():
    doc = shear_document()
    doc["entries"][0][1] = [{"num": [{"re": "1/2", "im": "-3"}], "den": ["2", "1"]}]
    a = parse(json.dumps(doc))
    assert parse(json.dumps(operator_json(a))) == a


coeff = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.lists(coeff, max_size=4), st.lists(coeff, min_size=1, max_size=3)),
                min_size=4, max_size=4))
def test_round_trip_property(cells):
    entries = []
    for num, den in cells:
        d = Poly(den)
        entries.append(PR(UNIT, [(Poly(num), d) if not d.is_zero() else Poly(num)]))
    a = OpMatrix([entries[:2], entries[2:]], UNIT)
    once = parse(json.dumps(operator_json(a)))
    assert once == a
    assert parse(emit(operator_json(once))) == once


def test_canonical_obstruction_report():
    code, report = run("canonical", [sample("shear_obstruction")], default_flags())
    assert code == 2 and report["status"] == "obstruction"
    obs = report["payload"]["obstruction"]
    assert obs["witness_point"] == "0"
    assert obs["quotient_text"] == "1/(3λ)"


def test_similar_identity_report():
    code, report = run("similar", [sample("jordan_pair")] * 2, default_flags())
    assert code == 0
    cert = certificate_from_json(report)
    assert cert.x.is_identity() and cert.verify()
    assert report["verification"]["passed"]


def test_similar_collision_report():
    code, report = run("similar", [sample("collision_left"), sample("collision_right")],
                       default_flags())
    assert code == 2 and report["status"] == "not-similar"
    points = [c["point"]["exact"] for c in report["payload"]["collisions"]]
    assert points == ["0"]


def test_certificate_round_trip_and_verify(tmp_path):
    code, report = run("similar", [sample("jordan_pair"), sample("jordan_pair_scaled")],
                       default_flags(seed=5))
    assert code == 0
    cert = certificate_from_json(report["payload"]["certificate"])
    a = parse(Path(sample("jordan_pair")).read_bytes())
    b = parse(Path(sample("jordan_pair_scaled")).read_bytes())
    assert cert.conjugate(a) == b
    path = tmp_path / "report.json"
    path.write_bytes(emit(report))
    code, rep = run("verify", [sample("jordan_pair"), str(path), sample("jordan_pair_scaled")],
                    default_flags())
    assert code == 0 and rep["payload"]["exact"]
    code, rep = run("verify", [sample("jordan_pair"), str(path), sample("jordan_pair")],
                    default_flags())
    assert code == 1 and rep["verification"]["flagged"] == 100


def test_reports_are_deterministic():
    flags = default_flags(seed=9)
    first = emit(run("diagonalize-idempotent", [sample("idempotent")], flags)[1])
    second = emit(run("diagonalize-idempotent", [sample("idempotent")], flags)[1])
    assert first == second


def test_text_format_names_stages():
    _, report = run("canonical", [sample("jordan_pair")], default_flags())
    text = emit(report, "text").decode()
    assert "stage: canonical block form with splitting idempotents" in text
    assert "stage: pointwise numeric verification" in text


def test_every_command_runs():
    flags = default_flags(samples=10)
    cases = [
        ("diagonalize-idempotent", ["idempotent"], 0),
        ("frame", ["diagonal_pair"], 0),
        ("frame", ["shear_obstruction"], 2),
        ("commutant", ["diagonal_pair"], 0),
        ("in-commutant-diagonalize", ["diagonal_pair", "first_coordinate"], 0),
        ("k0", ["collision_left"], 0),
        ("k0", ["shear_obstruction"], 1),
        ("diagonalize-idempotent", ["jordan_pair"], 1),
    ]
    for command, names, want in cases:
        code, report = run(command, [sample(n) for n in names], flags)
        assert code == want, (command, report)
        if code == 0 and "verification" in report:
            assert report["verification"]["passed"]


def test_conjugate_masi_command(tmp_path):
    a = OpMatrix.diagonal([LAM] * 3, UNIT)
    path_a = tmp_path / "a.json"
    path_a.write_text(json.dumps(operator_json(a)))
    path_p = tmp_path / "p.json"
    path_p.write_text(json.dumps(operator_json(OpMatrix.diagonal([1, 0, 0], UNIT))))
    flags = default_flags(samples=10, p_count=1)
    code, report = run("conjugate-masi", [str(path_a), str(path_p), str(path_p)], flags)
    assert code == 2 and report["payload"]["kind"] == "not-maximal"
    gens = [OpMatrix.diagonal(d, UNIT) for d in ([1, 0, 0], [0, 1, 0])]
    paths = []
    for i, g in enumerate(gens):
        p = tmp_path / f"g{i}.json"
        p.write_text(json.dumps(operator_json(g)))
        paths.append(str(p))
    flags = default_flags(samples=10, p_count=2)
    code, report = run("conjugate-masi", [str(path_a)] + paths + paths, flags)
    assert code == 0 and report["payload"]["commutes_with_operator"]


def test_unsupported_exit_code(tmp_path):
    path = tmp_path / "rot.json"
    path.write_text(json.dumps(operator_json(OpMatrix([[0, LAM + 1], [1, 0]], UNIT))))
    code, report = run("canonical", [str(path)], default_flags())
    assert code == 3 and report["status"] == "unsupported"


def test_main_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ovjordan", "canonical",
                           sample("shear_obstruction"), "--text"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "1/(3λ)" in proc.stdout


def test_main_reads_stdin(monkeypatch, capsysbinary):
    import io
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(json.dumps(shear_document()).encode())))
    code = main(["frame", "-"])
    out = json.loads(capsysbinary.readouterr().out)
    assert code == 2 and out["status"] == "obstruction"
