import itertools
import json
import random
import time
from fractions import Fraction as F
from pathlib import Path

from ovjordan.cli import default_flags, operator_json, parse, run
from ovjordan.commutant import (
    build_splitting_idempotent,
    conjugate_masi,
    in_generated_algebra,
    intertwiner_basis,
    solve_commutant,
)
from ovjordan.diagonalization import SimilarityCertificate, diagonalize_idempotent, is_diagonal_projection
from ovjordan.ktheory import k0_equal, k0_of_commutant, similar, strongly_irreducible_blocks
from ovjordan.opmatrix import OpMatrix, cm_bounded, cm_eq, cm_identity, cm_is_zero, cm_mul
from ovjordan.oracle import (
    SamplePlan,
    check_conjugation,
    compare_commutant_dim,
    compare_profiles,
)
from ovjordan.scalar_field import Partition, PiecewiseRational as PR, Poly, cell_add, cell_constant, cell_mul
from ovjordan.structure import FrameObstruction, canonical_form, frame_exists

from generators import (
    random_canonical,
    random_commutant_invertible,
    random_idempotent,
    random_jordan_sum,
    random_partition,
    random_unipotent,
)

SAMPLES = Path(__file__).resolve().parent.parent / "samples"
UNIT = Partition([0, 1])
LAM = PR.variable(UNIT)
ZERO_CELL = (Poly(()), Poly([1]))


def sample(name):
    return parse((SAMPLES / f"{name}.json").read_bytes())


def corpus():
    """Sample operators with a canonical form plus random Jordan sums."""
    ops = [sample(p.stem) for p in sorted(SAMPLES.glob("*.json")) if p.stem != "shear_obstruction"]
    rng = random.Random(2024)
    for _ in range(30):
        part = random_partition(rng, 3)
        ops.append(random_jordan_sum(rng, rng.randint(1, 5), part)[0])
    return ops


def jordan(sup, size=2):
    rows = [[LAM if i == j else (sup if j == i + 1 else 0) for j in range(size)] for i in range(size)]
    return OpMatrix(rows, UNIT)


def test_idempotent_diagonalization(criterion):
    criterion["label"] = "criterion 1 idempotent diagonalization"
    rng = random.Random(1)
    start = time.perf_counter()
    worst = 0.0
    count = 200
    for i in range(count):
        part = random_partition(rng, 4)
        n = rng.randint(1, 5)
        p, _ = random_idempotent(rng, n, part, max_degree=3)
        cert, d = diagonalize_idempotent(p)
        assert cert.x @ cert.x_inv == OpMatrix.identity(n, cert.partition)
        assert cert.conjugate(p.refine(cert.partition)) == d
        assert is_diagonal_projection(d)
        assert d.trace() == p.trace()
        assert cert.bounded and cert.x.is_bounded_matrix() and cert.x_inv.is_bounded_matrix()
        rep = check_conjugation(p, cert, d, samples=100, seed=i, tolerance=1e-8)
        assert rep.samples >= 100 * part.ncells and rep.passed
        worst = max(worst, rep.max_residual)
    elapsed = time.perf_counter() - start
    criterion["detail"] = f"{count} idempotents, max residual {worst:.1e}, {elapsed:.1f}s"
    assert elapsed <= 60


def test_shear_obstruction(criterion, tmp_path):
    criterion["label"] = "criterion 2 shear obstruction at zero"
    start = time.perf_counter()
    path = SAMPLES / "shear_obstruction.json"
    code, report = run("canonical", [str(path)], default_flags())
    assert code == 2 and report["payload"]["obstruction"]["witness_point"] == "0"
    a = parse(path.read_bytes())
    rng = random.Random(2)
    parts = [UNIT] + [random_partition(rng, 4) for _ in range(3)]
    for part in parts:
        res = canonical_form(a.refine(part))
        assert isinstance(res, FrameObstruction)
        assert res.witness_point == 0
        assert res.unbounded_quotient == (3 * LAM).invert()
        refined = tmp_path / "refined.json"
        refined.write_text(json.dumps(operator_json(a.refine(part))))
        assert run("canonical", [str(refined)], default_flags())[0] == 2
    elapsed = time.perf_counter() - start
    criterion["detail"] = f"{len(parts)} partitions, {elapsed:.2f}s"
    assert elapsed <= 1


def test_canonical_form_soundness(criterion):
    criterion["label"] = "criterion 3 canonical form soundness"
    rng = random.Random(3)
    start = time.perf_counter()
    clean = skipped = 0
    for i in range(100):
        part = random_partition(rng, 3)
        a, _ = random_jordan_sum(rng, rng.randint(1, 6), part)
        res = canonical_form(a)
        assert not isinstance(res, FrameObstruction)
        _, form = res
        assert form.reconstruct() == a.refine(form.partition)
        for blocks in form.blocks:
            for b in blocks:
                assert all(b.entries[k][k] == b.entries[0][0] for k in range(b.size))
                assert all(not s[0].is_zero() for s in b.superdiagonal)
        plan = SamplePlan.build(form.partition, 50, seed=i)
        rep = compare_profiles(a, form, plan)
        assert not rep.mismatches
        clean += rep.clean
        skipped += len(rep.skipped)
    elapsed = time.perf_counter() - start
    criterion["detail"] = f"100 operators, {clean} clean samples, {skipped} skipped, {elapsed:.1f}s"
    assert elapsed <= 300


def test_commutant_structure(criterion):
    criterion["label"] = "criterion 4 commutant structure"
    ops = corpus()
    for i, a in enumerate(ops):
        mod = solve_commutant(a)
        dims = [mod.dimension(k) for k in range(a.partition.ncells)]
        rep = compare_commutant_dim(a, dims, SamplePlan.for_matrices([a], 5, seed=i))
        assert rep.passed and rep.checked
    f = [LAM.cells[0], cell_constant(1)]
    a = OpMatrix([[LAM, LAM, 0, 0], [0, LAM, 0, 0], [0, 0, LAM, 1], [0, 0, 0, LAM]], UNIT)
    mod = solve_commutant(a)
    assert mod.dimension(0) == 8
    for b in mod.bases[0]:
        assert b[0][0] == b[1][1] and b[2][2] == b[3][3]
        assert all(b[r][c][0].is_zero() for r, c in [(1, 0), (1, 2), (3, 0), (3, 2)])
        for i, j in [(0, 1), (1, 0)]:
            lhs = cell_mul(f[i], b[2 * i + 1][2 * j + 1])
            rhs = cell_mul(b[2 * i][2 * j], f[j])
            assert lhs == rhs
    criterion["detail"] = f"{len(ops)} operators, paired block dimension 8"


def _diagonal_set(sizes, part):
    out = []
    off = 0
    n = sum(sizes)
    for s in sizes:
        out.append(OpMatrix.diagonal([1 if off <= i < off + s else 0 for i in range(n)], part))
        off += s
    return out


def test_masi_conjugacy(criterion):
    criterion["label"] = "criterion 5 maximal abelian sets conjugate"
    rng = random.Random(5)
    layouts = [[2, 2], [1, 1, 1], [1, 1], [3, 3], [3, 2], [2, 1], [3, 1], [2, 1, 1]]
    start = time.perf_counter()
    nontrivial = 0
    for i in range(50):
        sizes = layouts[i % len(layouts)]
        part = random_partition(rng, 2)
        a = random_canonical(rng, sizes, part)
        gens = _diagonal_set(sizes, part)
        s = random_commutant_invertible(rng, a)
        nontrivial += not s.is_identity()
        target = [s @ g @ s.inverse() for g in gens]
        cert = conjugate_masi(a, gens, target)
        assert cert.verify() and cert.bounded
        assert a.refine(cert.partition).commutes(cert.x)
        for g in gens:
            assert in_generated_algebra(cert.conjugate(g), target)
        inv = cert.inverse()
        for q in target:
            assert in_generated_algebra(inv.conjugate(q), gens)
    elapsed = time.perf_counter() - start
    criterion["detail"] = f"50 instances, {nontrivial} with nontrivial S, {elapsed:.1f}s"
    assert elapsed <= 120


def test_k0_classification(criterion):
    criterion["label"] = "criterion 6 K0 classification"
    start = time.perf_counter()
    rng = random.Random(6)
    for size in (1, 2, 3):
        part = random_partition(rng, 3)
        c = k0_of_commutant(random_canonical(rng, [size], part))
        assert c.ranks == (1,) * part.ncells
    left, right = sample("collision_left"), sample("collision_right")
    c = k0_of_commutant(left)
    assert c.ranks == (2,)
    assert [col.point.value for col in c.collisions] == [0]
    assert not similar(left, right).similar
    paths = [str(SAMPLES / "collision_left.json"), str(SAMPLES / "collision_right.json")]
    assert run("similar", paths, default_flags())[0] == 2
    v = similar(jordan(1), jordan(2))
    assert v.similar and v.certificate.x.is_diagonal()
    assert v.certificate.x[0, 0] / v.certificate.x[1, 1] == 2
    assert v.certificate.conjugate(jordan(1)) == jordan(2)
    instances = [jordan(1), left, right, random_canonical(rng, [3, 2], random_partition(rng, 2))]
    for a in instances:
        base = k0_of_commutant(a)
        for _ in range(20):
            s = random_unipotent(rng, a.n, a.partition, factors=2)
            assert k0_equal(base, k0_of_commutant(s @ a @ s.inverse()))
    elapsed = time.perf_counter() - start
    criterion["detail"] = f"{len(instances)} x 20 similarities, {elapsed:.1f}s"
    assert elapsed <= 60


def _nontrivial_idempotents(block, lo, hi):
    """Small-coefficient combinations of the block commutant that are bounded idempotents."""
    m = [list(r) for r in block.entries]
    basis = intertwiner_basis(m, m)
    coeffs = [cell_constant(c) for c in (-1, 0, 1, 2)] + [LAM.cells[0]]
    found = []
    eye = cm_identity(block.size)
    for combo in itertools.product(coeffs, repeat=len(basis)):
        p = [[cell_constant(0)] * block.size for _ in range(block.size)]
        for c, b in zip(combo, basis):
            p = [[cell_add(p[i][j], cell_mul(c, b[i][j])) for j in range(block.size)]
                 for i in range(block.size)]
        if cm_is_zero(p) or cm_eq(p, eye):
            continue
        if cm_eq(cm_mul(p, p), p) and cm_bounded(p, lo, hi):
            found.append(p)
    return found


def test_strong_irreducibility(criterion):
    criterion["label"] = "criterion 7 strong irreducibility and locality"
    ops = corpus()
    blocks = 0
    for a in ops:
        assert all(all(row) for row in strongly_irreducible_blocks(a))
        _, form = canonical_form(a)
        for (lo, hi), cell_blocks in zip(form.partition.cells(), form.blocks):
            for b in cell_blocks:
                blocks += 1
                assert _nontrivial_idempotents(b, lo, hi) == []
    shear = sample("shear_obstruction")
    assert frame_exists(shear)[0] is False
    for lo in (F(1, 4), F(1, 24), F(2, 3)):
        r = shear.restrict(lo, 1)
        p = build_splitting_idempotent(r, 1)
        assert isinstance(p, OpMatrix) and p.is_bounded_matrix() and p.is_idempotent()
        assert frame_exists(r)[0] is True
    criterion["detail"] = f"{len(ops)} operators, {blocks} blocks searched"


def _flagged_in(rep, cell):
    return sum(1 for (k, _), r in zip(rep.points, rep.residuals) if k == cell and not r <= rep.tolerance)


def test_fault_injection(criterion):
    criterion["label"] = "criterion 8 fault injection"
    rng = random.Random(8)
    flagged = []
    while len(flagged) < 10:
        part = random_partition(rng, 3)
        p, _ = random_idempotent(rng, rng.randint(2, 4), part)
        cert, d = diagonalize_idempotent(p)
        i, j = rng.randrange(p.n), rng.randrange(p.n)
        cells = [[list(r) for r in c] for c in cert.x.cells()]
        for c in cells:
            c[i][j] = cell_add(c[i][j], cell_constant(1))
        bad = SimilarityCertificate(OpMatrix.from_cells(cert.partition, cells), cert.x_inv, True)
        assert not bad.verify()
        rep = check_conjugation(p, bad, d, samples=100, seed=len(flagged))
        flagged.append(min(_flagged_in(rep, k) for k in range(bad.partition.ncells)))
    while len(flagged) < 20:
        part = random_partition(rng, 2)
        a, _ = random_jordan_sum(rng, rng.randint(2, 5), part)
        _, form = canonical_form(a)
        cells = [[list(r) for r in c] for c in form.block_diagonal().cells()]
        spots = [(k, b.offset) for k, bl in enumerate(form.blocks) for b in bl if b.size > 1]
        if not spots:
            continue
        for k, off in spots[:1]:
            cells[k][off][off + 1] = ZERO_CELL
        wrong = OpMatrix.from_cells(form.partition, cells)
        cert = form.total()
        assert cert.conjugate(a.refine(cert.partition)) != wrong
        rep = check_conjugation(a, cert, wrong, SamplePlan.build(form.partition, 100, seed=len(flagged)))
        flagged.append(_flagged_in(rep, spots[0][0]))
    criterion["detail"] = f"20 faults, fewest flagged {min(flagged)}/100 per cell"
    assert min(flagged) >= 99
