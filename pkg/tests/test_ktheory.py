import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovjordan.commutant import intertwiner_basis
from ovjordan.errors import DimensionMismatch, NoCanonicalForm, Undecided
from ovjordan.ktheory import (
    k0_equal,
    k0_of_commutant,
    relate_blocks,
    similar,
    strongly_irreducible_blocks,
)
from ovjordan.opmatrix import OpMatrix, cm_bounded, cm_inverse
from ovjordan.scalar_field import Partition, PiecewiseRational as PR, cell_constant, cell_mul, cell_add
from ovjordan.structure import canonical_form

from generators import random_canonical, random_partition, random_unipotent

UNIT = Partition([0, 1])
LAM = PR.variable(UNIT)


def jordan(sup, size=2):
    rows = [[LAM if i == j else (sup if j == i + 1 else 0) for j in range(size)] for i in range(size)]
    return OpMatrix(rows, UNIT)


COLLIDING = OpMatrix.direct_sum(jordan(LAM), jordan(1))
PLAIN = OpMatrix.direct_sum(jordan(1), jordan(1))


def test_single_block_has_one_summand():
    c = k0_of_commutant(jordan(1))
    assert c.ranks == (1,) and c.collisions == ()


def test_unequal_sizes_give_two_summands():
    c = k0_of_commutant(OpMatrix.direct_sum(jordan(1, 3), jordan(1, 2)))
    assert c.ranks == (2,) and c.collisions == ()


def test_collision_example():
    c = k0_of_commutant(COLLIDING)
    assert c.ranks == (2,)
    (col,) = c.collisions
    assert col.point.is_exact and col.point.value == 0
    assert c.idempotent_class(0, [0, 1]) == (1, 1)


def test_k0_equal_examples():
    single = k0_of_commutant(jordan(1))
    assert k0_equal(single, single)
    assert not k0_equal(single, k0_of_commutant(COLLIDING))
    half = Partition([0, "1/2", 1])
    a = OpMatrix.direct_sum(jordan(1, 3), jordan(1, 2))
    assert k0_equal(k0_of_commutant(a), k0_of_commutant(a.refine(half)))


def test_similar_scaled_superdiagonal():
    v = similar(jordan(1), jordan(2))
    assert v.similar
    x = v.certificate.x
    assert x.is_diagonal()
    ratio = x[0, 0] / x[1, 1]
    assert ratio == 2
    assert v.certificate.conjugate(jordan(1)) == jordan(2)


def test_not_similar_collision():
    v = similar(jordan(LAM), jordan(1))
    assert not v.similar and v.certificate is None
    assert [c.point.value for c in v.collisions] == [0]
    v = similar(COLLIDING, PLAIN)
    assert not v.similar
    assert any(c.point.value == 0 for c in v.collisions)


def test_similar_to_itself_is_identity():
    v = similar(COLLIDING, COLLIDING)
    assert v.similar and v.certificate.x.is_identity()


def test_similar_errors():
    with pytest.raises(DimensionMismatch):
        similar(jordan(1), jordan(1, 3))
    shear = OpMatrix([[LAM, 1], [0, -2 * LAM]], UNIT)
    with pytest.raises(Undecided):
        similar(shear, shear)
    with pytest.raises(NoCanonicalForm):
        k0_of_commutant(shear)


def test_relate_blocks_kinds():
    _, fa = canonical_form(jordan(LAM))
    _, fb = canonical_form(jordan(1))
    (ba,), (bb,) = fa.blocks[0], fb.blocks[0]
    rel = relate_blocks(ba, bb, 0, 1)
    assert rel.kind == "collision"
    assert [p.value for p in rel.points] == [0]
    assert relate_blocks(bb, bb, 0, 1).kind == "equivalent"


def test_strong_irreducibility_examples():
    assert strongly_irreducible_blocks(jordan(1)) == [[True]]
    assert strongly_irreducible_blocks(OpMatrix.diagonal([LAM, LAM], UNIT)) == [[True, True]]
    _, form = canonical_form(OpMatrix.diagonal([LAM, LAM + 1], UNIT))
    assert len(form.blocks[0]) == 2
    assert strongly_irreducible_blocks(OpMatrix.diagonal([LAM, LAM + 1], UNIT)) == [[True, True]]


def test_no_certificate_among_small_intertwiners():
    # every combination of the intertwiner basis with small polynomial
    # coefficients fails to be invertible-bounded
    _, fa = canonical_form(jordan(LAM))
    _, fb = canonical_form(jordan(1))
    ma = [list(r) for r in fa.blocks[0][0].entries]
    mb = [list(r) for r in fb.blocks[0][0].entries]
    basis = intertwiner_basis(mb, ma)
    coeffs = [cell_constant(c) for c in (-2, -1, 1, 2)] + [(LAM + 1).cells[0], LAM.cells[0]]
    for combo in itertools.product(coeffs + [cell_constant(0)], repeat=len(basis)):
        m = [[cell_constant(0)] * 2 for _ in range(2)]
        for c, b in zip(combo, basis):
            m = [[cell_add(m[i][j], cell_mul(c, b[i][j])) for j in range(2)] for i in range(2)]
        inv = cm_inverse(m)
        assert inv is None or not (cm_bounded(m, 0, 1) and cm_bounded(inv, 0, 1))


def test_direct_sum_doubles_idempotent_class():
    j = jordan(1)
    c = k0_of_commutant(OpMatrix.direct_sum(j, j))
    assert c.ranks == (1,)
    assert c.idempotent_class(0, [0, 1]) == (2,)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_k0_invariant_under_similarity(seed):
    rng = random.Random(seed)
    part = random_partition(rng, 3)
    sizes = [rng.randint(1, 2) for _ in range(rng.randint(1, 2))]
    a = random_canonical(rng, sizes, part)
    s = random_unipotent(rng, a.n, part, factors=2)
    b = s @ a @ s.inverse()
    assert k0_equal(k0_of_commutant(a), k0_of_commutant(b))
    v = similar(a, b)
    assert v.similar and v.certificate.conjugate(a) == b.refine(v.certificate.partition)
