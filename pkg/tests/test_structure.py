import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovjordan.errors import NotMinimal, SpectrumNotSplit, SumNotIdentity, UnboundedInput
from ovjordan.opmatrix import OpMatrix
from ovjordan.scalar_field import Partition, PiecewiseRational as PR, cell_to_str
from ovjordan.structure import (
    FrameObstruction,
    canonical_form,
    extract_frame,
    frame_exists,
    validate_frame,
)

from generators import random_jordan_sum, random_partition, random_unipotent

UNIT = Partition([0, 1])
LAM = PR.variable(UNIT)


def shear_operator(part=UNIT):
    lam = PR.variable(part)
    return OpMatrix([[lam, 1], [0, -2 * lam]], part)


def paired_jordan(f1, f2, part=UNIT):
    lam = PR.variable(part)
    return OpMatrix([[lam, f1, 0, 0], [0, lam, 0, 0], [0, 0, lam, f2], [0, 0, 0, lam]], part)


def test_validate_frame_examples():
    a = paired_jordan(LAM, PR.one(UNIT))
    frame = validate_frame(a, [OpMatrix.diagonal([1, 1, 0, 0], UNIT),
                               OpMatrix.diagonal([0, 0, 1, 1], UNIT)])
    assert len(frame) == 2
    with pytest.raises(NotMinimal) as exc:
        validate_frame(OpMatrix.diagonal([LAM, LAM + 1], UNIT), [OpMatrix.identity(2, UNIT)])
    w = exc.value.witness
    assert w.is_idempotent() and not w.is_zero() and not w.is_identity()
    d = OpMatrix.diagonal([1, 0], UNIT)
    with pytest.raises(SumNotIdentity):
        validate_frame(OpMatrix.diagonal([LAM, LAM + 1], UNIT), [d, d])


def test_extract_frame_examples():
    j = OpMatrix([[LAM, 1], [0, LAM]], UNIT)
    frame = extract_frame(j, [OpMatrix.identity(2, UNIT)])
    assert [e.is_identity() for e in frame] == [True]
    a = paired_jordan(LAM, PR.one(UNIT))
    frame = extract_frame(a, [OpMatrix.identity(4, UNIT), OpMatrix.diagonal([1, 1, 0, 0], UNIT)])
    got = {tuple(str(e[i, i]) for i in range(4)) for e in frame}
    assert got == {("1", "1", "0", "0"), ("0", "0", "1", "1")}


def test_extract_frame_cut_by_central_projection():
    half = Partition([0, F(1, 2), 1])
    lam = PR.variable(half)
    a = OpMatrix.diagonal([lam, lam + 1], half)
    chi = PR(half, [1, 0])
    e = OpMatrix.diagonal([chi, chi], half)
    p = OpMatrix.diagonal([chi, 0], half)
    gens = [OpMatrix.identity(2, half), e, p, OpMatrix.diagonal([1, 0], half)]
    frame = extract_frame(a, gens)
    assert len(frame) >= 2
    total = OpMatrix.zero(2, frame.partition)
    for i, x in enumerate(frame):
        total = total + x
        for y in list(frame)[i + 1:]:
            assert (x @ y).is_zero()
    assert total.is_identity()


def test_shear_obstruction():
    res = canonical_form(shear_operator())
    assert isinstance(res, FrameObstruction)
    assert res.witness_point == 0
    assert res.unbounded_quotient == (3 * LAM).invert()
    assert cell_to_str(res.unbounded_quotient.cells[0]) == "1/(3λ)"
    assert frame_exists(shear_operator())[0] is False


def test_single_block():
    j = OpMatrix([[LAM, 1], [0, LAM]], UNIT)
    frame, form = canonical_form(j)
    assert len(frame) == 1 and frame.elements[0].is_identity()
    (block,) = form.blocks[0]
    assert block.size == 2
    assert block.diagonal == LAM.cells[0]
    assert block.superdiagonal == (PR.one(UNIT).cells[0],)


def test_distinct_diagonal_splits():
    a = OpMatrix.diagonal([LAM, LAM + 1], UNIT)
    frame, form = canonical_form(a)
    assert sorted(b.size for b in form.blocks[0]) == [1, 1]
    assert {tuple(str(e[i, i]) for i in range(2)) for e in frame} == {("1", "0"), ("0", "1")}


def test_frame_exists_examples():
    assert frame_exists(paired_jordan(LAM, PR.one(UNIT)))[0]
    ok, frame = frame_exists(OpMatrix.diagonal([LAM] * 3, UNIT))
    assert ok and len(frame) == 3
    assert all(e.trace_function().values == (1,) for e in frame)


def test_rejections():
    with pytest.raises(UnboundedInput):
        canonical_form(OpMatrix([[LAM.invert(), 0], [0, 1]], UNIT))
    with pytest.raises(SpectrumNotSplit):
        canonical_form(OpMatrix([[0, LAM + 1], [1, 0]], UNIT))


def test_scalar_case():
    frame, form = canonical_form(OpMatrix([[LAM * LAM]], UNIT))
    assert len(frame) == 1 and form.blocks[0][0].size == 1


@pytest.mark.parametrize("seed", range(3))
def test_obstruction_survives_refinement(seed):
    rng = random.Random(seed)
    pts = sorted({F(rng.randint(1, 99), 100) for _ in range(rng.randint(1, 3))})
    part = Partition([0, *pts, 1])
    res = canonical_form(shear_operator().refine(part))
    assert isinstance(res, FrameObstruction)
    assert res.witness_point == 0
    assert res.unbounded_quotient.is_bounded() == [False]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_canonical_forms(seed):
    rng = random.Random(seed)
    part = random_partition(rng, 3)
    n = rng.randint(1, 5)
    a, profiles = random_jordan_sum(rng, n, part)
    frame, form = canonical_form(a)
    assert form.reconstruct() == a.refine(form.partition)
    idx = form.partition.coarse_index(part)
    for k, blocks in enumerate(form.blocks):
        assert sum(b.size for b in blocks) == n
        for b in blocks:
            assert all(b.entries[i][i] == b.diagonal for i in range(b.size))
            assert all(not f[0].is_zero() for f in b.superdiagonal)
        want = sorted(size for _, size in profiles[idx[k]])
        assert sorted(b.size for b in blocks) == want
    total = OpMatrix.zero(n, frame.partition)
    for e in frame:
        total = total + e
        assert a.refine(e.partition).commutes(e)
    assert total.is_identity()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_block_data_invariant_under_similarity(seed):
    rng = random.Random(seed)
    part = random_partition(rng, 2)
    n = rng.randint(2, 4)
    a, _ = random_jordan_sum(rng, n, part)
    s = random_unipotent(rng, n, part, factors=2)
    b = s @ a @ s.inverse()
    _, fa = canonical_form(a)
    _, fb = canonical_form(b)
    fine = fa.partition.common_refinement(fb.partition)
    ia, ib = fine.coarse_index(fa.partition), fine.coarse_index(fb.partition)
    for k in range(fine.ncells):
        pa = sorted((repr(d), s_) for d, s_ in fa.profile(ia[k]))
        pb = sorted((repr(d), s_) for d, s_ in fb.profile(ib[k]))
        assert pa == pb
