import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovjordan.commutant import (
    build_splitting_idempotent,
    canonical_layout,
    conjugate_masi,
    diagonalize_idempotent_in_commutant,
    in_generated_algebra,
    predicted_zero_pattern,
    solve_commutant,
    split_block,
    strip_graded_part,
)
from ovjordan.diagonalization import is_diagonal_projection
from ovjordan.errors import NotInCommutant, NotMaximal
from ovjordan.opmatrix import OpMatrix, cm_identity, cm_mul
from ovjordan.oracle import numeric_commutant_dim
from ovjordan.scalar_field import Partition, PiecewiseRational as PR
from ovjordan.structure import FrameObstruction

from generators import random_canonical, random_commutant_invertible, random_partition

UNIT = Partition([0, 1])
LAM = PR.variable(UNIT)
ONE = PR.one(UNIT)


def paired_jordan(f1, f2):
    return OpMatrix([[LAM, f1, 0, 0], [0, LAM, 0, 0], [0, 0, LAM, f2], [0, 0, 0, LAM]], UNIT)


def as_op(cell_matrix):
    return OpMatrix.from_cells(UNIT, [cell_matrix])


def test_single_block_commutant():
    mod = solve_commutant(OpMatrix([[LAM, 1], [0, LAM]], UNIT))
    assert mod.dimension(0) == 2
    basis = {str(as_op(b)) for b in mod.bases[0]}
    assert basis == {"[[1, 0], [0, 1]]", "[[0, 1], [0, 0]]"}
    assert mod.predictions_hold == (True,)


def test_distinct_diagonals_commutant():
    mod = solve_commutant(OpMatrix.diagonal([LAM, LAM + 1], UNIT))
    assert mod.dimension(0) == 2
    assert mod.zero_patterns[0] == frozenset({(0, 1), (1, 0)})
    assert {str(as_op(b)) for b in mod.bases[0]} == {"[[1, 0], [0, 0]]", "[[0, 0], [0, 1]]"}


@pytest.mark.parametrize("f1,f2", [(LAM, ONE), (LAM + 1, LAM * LAM + 2)])
def test_paired_jordan_commutant_has_eight_parameters(f1, f2):
    a = paired_jordan(f1, f2)
    mod = solve_commutant(a)
    assert mod.dimension(0) == 8
    assert mod.predictions_hold == (True,)
    assert {(1, 0), (1, 2), (3, 0), (3, 2)} <= mod.zero_patterns[0]
    for b in mod.bases[0]:
        assert a.commutes(as_op(b))


def test_zero_pattern_for_unequal_sizes():
    a = random_canonical(random.Random(1), [3, 2], UNIT)
    layout = canonical_layout(a.cell(0))
    assert layout == [(0, 3), (3, 2)]
    zeros = predicted_zero_pattern(a.cell(0), layout)
    mod = solve_commutant(a)
    assert zeros <= mod.zero_patterns[0]
    assert mod.predictions_hold == (True,)


def test_splitting_idempotent_examples():
    p = build_splitting_idempotent(OpMatrix.diagonal([LAM, LAM + 1], UNIT), 1)
    assert p == OpMatrix.diagonal([1, 0], UNIT)
    obs = build_splitting_idempotent(OpMatrix([[LAM, 1], [0, -2 * LAM]], UNIT), 1)
    assert isinstance(obs, FrameObstruction)
    assert obs.witness_point == 0
    assert obs.unbounded_quotient == (3 * LAM).invert()
    p = build_splitting_idempotent(OpMatrix([[LAM, 1], [0, LAM + 1]], UNIT), 1)
    assert p == OpMatrix([[1, -1], [0, 0]], UNIT)


@pytest.mark.parametrize("rows,r", [
    ([[LAM, 1, 0], [0, LAM, 0], [0, 0, LAM]], 2),
    ([[LAM, 0, 1], [0, LAM, 1], [0, 0, LAM]], 1),
    ([[LAM, 1, 1], [0, LAM, 0], [0, 0, LAM]], 2),
])
def test_split_block_examples(rows, r):
    a = OpMatrix(rows, UNIT)
    cert = split_block(a, r)
    assert cert.verify() and cert.bounded
    b = cert.conjugate(a)
    assert canonical_layout(b.cell(0)) is not None
    sizes = sorted(s for _, s in canonical_layout(b.cell(0)))
    assert sizes == [1, 2]
    if rows[1][2] == 0 and rows[0][2] == 0:
        assert cert.x.is_identity()


def test_strip_off_inverse_is_exact():
    a = paired_jordan(LAM, ONE)
    s = random_commutant_invertible(random.Random(3), a)
    p = s @ OpMatrix.diagonal([1, 1, 0, 0], UNIT) @ s.inverse()
    layout = canonical_layout(a.cell(0))
    res = strip_graded_part(a.cell(0), layout, p.cell(0))
    if res is not None:
        x, x_inv, _ = res
        assert cm_mul(x, x_inv) == cm_identity(4)


def test_in_commutant_examples():
    a = paired_jordan(LAM, ONE)
    d = OpMatrix.diagonal([1, 1, 0, 0], UNIT)
    assert diagonalize_idempotent_in_commutant(a, d).x.is_identity()
    rng = random.Random(11)
    for _ in range(3):
        s = random_commutant_invertible(rng, a)
        p = s @ d @ s.inverse()
        cert = diagonalize_idempotent_in_commutant(a, p)
        assert cert.verify() and cert.bounded
        assert a.refine(cert.partition).commutes(cert.x)
        assert is_diagonal_projection(cert.conjugate(p))
    j = OpMatrix([[LAM, 1], [0, LAM]], UNIT)
    jj = OpMatrix.direct_sum(j, j)
    s = random_commutant_invertible(random.Random(2), jj)
    p = s @ OpMatrix.diagonal([0, 0, 1, 1], UNIT) @ s.inverse()
    cert = diagonalize_idempotent_in_commutant(jj, p)
    assert is_diagonal_projection(cert.conjugate(p)) and jj.commutes(cert.x)


def test_in_commutant_rejects_outsiders():
    a = OpMatrix([[LAM, 1], [0, LAM]], UNIT)
    with pytest.raises(NotInCommutant):
        diagonalize_idempotent_in_commutant(a, OpMatrix.diagonal([1, 0], UNIT))


def test_conjugate_masi_examples():
    a = paired_jordan(LAM, ONE)
    gens = [OpMatrix.diagonal([1, 1, 0, 0], UNIT)]
    assert conjugate_masi(a, gens, gens).x.is_identity()
    s = random_commutant_invertible(random.Random(4), a)
    q = [s @ g @ s.inverse() for g in gens]
    cert = conjugate_masi(a, gens, q)
    assert a.commutes(cert.x)
    atoms_q = q + [OpMatrix.identity(4, UNIT) - q[0]]
    assert in_generated_algebra(cert.conjugate(gens[0]), atoms_q)


def test_conjugate_masi_detects_missing_atom():
    a = OpMatrix.diagonal([LAM] * 3, UNIT)
    g = [OpMatrix.diagonal([1, 0, 0], UNIT)]
    with pytest.raises(NotMaximal) as exc:
        conjugate_masi(a, g, g)
    w = exc.value.witness
    assert w.is_idempotent() and w.is_bounded_matrix()
    assert a.refine(w.partition).commutes(w)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_basis_commutes_and_matches_numeric_dimension(seed):
    rng = random.Random(seed)
    part = random_partition(rng, 2)
    sizes = [rng.randint(1, 3) for _ in range(rng.randint(1, 2))]
    a = random_canonical(rng, sizes, part)
    mod = solve_commutant(a)
    for k, (lo, hi) in enumerate(part.cells()):
        for b in mod.bases[k]:
            cells = [b if j == k else mod.element(j, []) for j in range(part.ncells)]
            assert a.commutes(OpMatrix.from_cells(part, cells))
        x = lo + (hi - lo) * F(rng.choice([k for k in range(1, 100) if k != 50]), 100)
        assert numeric_commutant_dim(a, x) == mod.dimension(k)
