"""The local K₀ invariant of the relative commutant and a similarity classifier.

Canonical blocks on a cell are grouped into families: two blocks share a
family when they have the same size and diagonal function and an intertwiner
between them is bounded with bounded inverse on the closed cell.  For blocks of
equal size and diagonal the bounded intertwiners form a lattice whose best
element has a determinant fixed up to units; its real zeros in the cell are the
collision points, where the two families are glued.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Sequence

from .commutant import intertwiner_basis
from .diagonalization import SimilarityCertificate
from .errors import DimensionMismatch, NoCanonicalForm, Undecided
from .linalg import xgcd
from .opmatrix import (
    CellMatrix,
    OpMatrix,
    cm_add,
    cm_det,
    cm_inverse,
    cm_scale,
    cm_zero,
)
from .scalar_field import (
    POLY_ONE,
    POLY_ZERO,
    Partition,
    RealRoot,
    RootIsolator,
    cell_is_zero,
    real_common_part,
)
from .structure import Block, CanonicalForm, FrameObstruction, canonical_form


# ---------------------------------------------------------------------------
# block intertwiners


@dataclass(frozen=True)
class BlockRelation:
    """How two canonical blocks on one cell relate.

    ``kind`` is ``"unrelated"`` (different size or diagonal), ``"equivalent"``
    (an invertible bounded intertwiner exists, stored in ``intertwiner``) or
    ``"collision"`` (the best bounded intertwiner loses invertibility at
    ``points``).
    """

    kind: str
    intertwiner: CellMatrix | None = None
    points: tuple[RealRoot, ...] = ()


def _block_matrix(b: Block) -> CellMatrix:
    return [list(r) for r in b.entries]


def best_intertwiner(target: Block, source: Block) -> CellMatrix | None:
    """Bounded X with ``target·X = X·source`` whose leading entry generates all others.

    The leading diagonal entries of the bounded intertwiners form the ideal
    generated by their gcd; the returned X attains the gcd, so its determinant
    is the smallest possible up to a unit.
    """
    basis = intertwiner_basis(_block_matrix(target), _block_matrix(source))
    if not basis:
        return None
    lead = [b[0][0][0] for b in basis]
    g, coeffs = POLY_ZERO, [POLY_ZERO] * len(basis)
    for k, p in enumerate(lead):
        if p.is_zero():
            continue
        if g.is_zero():
            g, coeffs[k] = p, POLY_ONE
            continue
        g2, s, t = xgcd(g, p)
        if g2 == g:
            continue
        coeffs = [c * s for c in coeffs]
        coeffs[k] = t
        g = g2
    if g.is_zero():
        return None
    nz = [k for k, c in enumerate(coeffs) if not c.is_zero()]
    if len(nz) == 1 and coeffs[nz[0]].is_constant:
        return basis[nz[0]]
    s = len(basis[0])
    out = cm_zero(s)
    for c, b in zip(coeffs, basis):
        if not c.is_zero():
            out = cm_add(out, cm_scale((c, POLY_ONE), b))
    return out


def _real_zeros(p, lo: Fraction, hi: Fraction) -> list[RealRoot]:
    common = real_common_part(p)
    if len(common) <= 1:
        return []
    return RootIsolator(common).isolate(lo, hi)


def relate_blocks(b1: Block, b2: Block, lo: Fraction, hi: Fraction) -> BlockRelation:
    if b1.size != b2.size or b1.diagonal != b2.diagonal:
        return BlockRelation("unrelated")
    x = best_intertwiner(b1, b2)
    if x is None:
        return BlockRelation("unrelated")
    det = cm_det(x)
    if cell_is_zero(det):
        return BlockRelation("unrelated")
    points = _real_zeros(det[0], lo, hi)
    if points:
        return BlockRelation("collision", x, tuple(points))
    return BlockRelation("equivalent", x)


# ---------------------------------------------------------------------------
# the invariant


@dataclass(frozen=True)
class Family:
    size: int
    diagonal: tuple
    blocks: tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.blocks)

    def signature(self) -> tuple[int, int]:
        return (self.size, self.multiplicity)


@dataclass(frozen=True)
class Collision:
    cell: int
    point: RealRoot
    families: tuple[int, int]


@dataclass(frozen=True)
class K0Class:
    """Ranks of the free summands per cell and the collision gluing data."""

    partition: Partition
    block_index: tuple[tuple[int, ...], ...]
    families: tuple[tuple[Family, ...], ...]
    collisions: tuple[Collision, ...] = field(default=())

    def rank(self, cell: int) -> int:
        return len(self.families[cell])

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(len(f) for f in self.families)

    def collisions_in(self, cell: int) -> list[Collision]:
        return [c for c in self.collisions if c.cell == cell]

    def idempotent_class(self, cell: int, blocks: Sequence[int]) -> tuple[int, ...]:
        """The ℤ^m vector of a diagonal block projection onto the given blocks."""
        out = [0] * self.rank(cell)
        for b in blocks:
            out[self.block_index[cell][b]] += 1
        return tuple(out)

    def refine(self, partition: Partition) -> "K0Class":
        idx = partition.coarse_index(self.partition)
        cols = []
        for k, (lo, hi) in enumerate(partition.cells()):
            for c in self.collisions:
                if c.cell != idx[k]:
                    continue
                a, b = (c.point.value, c.point.value) if c.point.is_exact else (c.point.lo, c.point.hi)
                if b >= lo and a <= hi:
                    cols.append(Collision(k, c.point, c.families))
        return K0Class(partition, tuple(self.block_index[i] for i in idx),
                       tuple(self.families[i] for i in idx), tuple(cols))


def _k0_from_blocks(partition: Partition, blocks: Sequence[Sequence[Block]]) -> K0Class:
    index, fams, cols = [], [], []
    for k, (lo, hi) in enumerate(partition.cells()):
        bl = list(blocks[k])
        label = [-1] * len(bl)
        reps: list[int] = []
        for i, b in enumerate(bl):
            for f, r in enumerate(reps):
                if relate_blocks(bl[r], b, lo, hi).kind == "equivalent":
                    label[i] = f
                    break
            else:
                label[i] = len(reps)
                reps.append(i)
        families = tuple(Family(bl[r].size, bl[r].diagonal,
                                tuple(i for i in range(len(bl)) if label[i] == f))
                         for f, r in enumerate(reps))
        for f in range(len(reps)):
            for g in range(f + 1, len(reps)):
                rel = relate_blocks(bl[reps[f]], bl[reps[g]], lo, hi)
                if rel.kind == "collision":
                    for p in rel.points:
                        cols.append(Collision(k, p, (f, g)))
        index.append(tuple(label))
        fams.append(families)
    return K0Class(partition, tuple(index), tuple(fams), tuple(cols))


def _require_form(a: OpMatrix) -> CanonicalForm:
    res = canonical_form(a)
    if isinstance(res, FrameObstruction):
        raise NoCanonicalForm(res)
    return res[1]


def k0_of_commutant(a: OpMatrix) -> K0Class:
    """The local K₀ invariant of the commutant of ``a``.

    Raises:
        NoCanonicalForm: ``a`` has no finite frame.
    """
    form = _require_form(a)
    return _k0_from_blocks(form.partition, form.blocks)


def _point_key(p: RealRoot) -> tuple:
    return (p.value, p.value) if p.is_exact else (p.lo, p.hi)


def _same_point(p: RealRoot, q: RealRoot) -> bool:
    if p.is_exact and q.is_exact:
        return p.value == q.value
    a1, b1 = _point_key(p)
    a2, b2 = _point_key(q)
    return not (b1 < a2 or b2 < a1)


def _cell_match(f1: Sequence[Family], c1: Sequence[Collision],
                f2: Sequence[Family], c2: Sequence[Collision]) -> bool:
    if sorted(f.signature() for f in f1) != sorted(f.signature() for f in f2):
        return False
    if len(c1) != len(c2):
        return False
    groups: dict = {}
    for i, f in enumerate(f1):
        groups.setdefault(f.signature(), []).append(i)
    targets: dict = {}
    for j, f in enumerate(f2):
        targets.setdefault(f.signature(), []).append(j)
    keys = sorted(groups)

    def search(pos: int, mapping: dict) -> bool:
        if pos == len(keys):
            return _collisions_match(c1, c2, mapping)
        src = groups[keys[pos]]
        for perm in permutations(targets[keys[pos]]):
            mapping.update(zip(src, perm))
            if search(pos + 1, mapping):
                return True
        return False

    return search(0, {})


def _collisions_match(c1: Sequence[Collision], c2: Sequence[Collision], mapping: dict) -> bool:
    left = list(c2)
    for c in c1:
        pair = tuple(sorted((mapping[c.families[0]], mapping[c.families[1]])))
        hit = next((i for i, d in enumerate(left)
                    if tuple(sorted(d.families)) == pair and _same_point(c.point, d.point)), None)
        if hit is None:
            return False
        left.pop(hit)
    return not left


def k0_equal(c1: K0Class, c2: K0Class) -> bool:
    """Equality after common refinement, with families compared up to relabeling."""
    if not c1.partition.same_interval(c2.partition):
        return False
    part = c1.partition.common_refinement(c2.partition)
    r1, r2 = c1.refine(part), c2.refine(part)
    for k in range(part.ncells):
        if not _cell_match(r1.families[k], r1.collisions_in(k),
                           r2.families[k], r2.collisions_in(k)):
            return False
    return True


# ---------------------------------------------------------------------------
# similarity


@dataclass(frozen=True)
class SimilarityVerdict:
    """Outcome of :func:`similar`; carries a certificate or a witness.

    The certificate satisfies ``cert.conjugate(a) == b``.
    """

    similar: bool
    certificate: SimilarityCertificate | None
    witness: str | None
    k0: K0Class
    collisions: tuple[Collision, ...] = ()


def _refine_form(form: CanonicalForm, part: Partition):
    idx = part.coarse_index(form.partition)
    total = form.total().refine(part)
    return total, [form.blocks[i] for i in idx]


def _shift(blocks: Sequence[Block], offset: int) -> list[Block]:
    return [Block(b.offset + offset, b.entries) for b in blocks]


def similar(a: OpMatrix, b: OpMatrix) -> SimilarityVerdict:
    """Decide bounded similarity of two operators with canonical forms.

    Matching joint K₀ data is treated as necessary; similarity is only
    reported together with an exact, verified certificate.

    Raises:
        DimensionMismatch: different matrix sizes.
        Undecided: one side has no canonical form.
    """
    if a.n != b.n:
        raise DimensionMismatch(f"dimension {a.n} vs {b.n}")
    if not a.partition.same_interval(b.partition):
        raise DimensionMismatch("operators live on different intervals")
    try:
        fa, fb = _require_form(a), _require_form(b)
    except NoCanonicalForm as exc:
        raise Undecided("similarity without canonical forms is out of scope") from exc
    part = fa.partition.common_refinement(fb.partition)
    ta, blocks_a = _refine_form(fa, part)
    tb, blocks_b = _refine_form(fb, part)
    n = a.n
    joint = [list(blocks_a[k]) + _shift(blocks_b[k], n) for k in range(part.ncells)]
    k0 = _k0_from_blocks(part, joint)
    ys = []
    for k, (lo, hi) in enumerate(part.cells()):
        na = len(blocks_a[k])
        y = cm_zero(n)
        for f, fam in enumerate(k0.families[k]):
            mine = [i for i in fam.blocks if i < na]
            theirs = [i - na for i in fam.blocks if i >= na]
            if len(mine) != len(theirs):
                reason = (f"cell {k}: block family of size {fam.size} occurs {len(mine)} "
                          f"times in the first operator and {len(theirs)} in the second")
                return SimilarityVerdict(False, None, reason, k0, k0.collisions)
            for i, j in zip(mine, theirs):
                src, dst = blocks_a[k][i], blocks_b[k][j]
                x = relate_blocks(dst, src, lo, hi).intertwiner
                for r in range(src.size):
                    for c in range(src.size):
                        y[dst.offset + r][src.offset + c] = x[r][c]
        ys.append(y)
    yi = [cm_inverse(y) for y in ys]
    y_op = OpMatrix.from_cells(part, ys)
    y_inv = OpMatrix.from_cells(part, yi)
    x = tb.x_inv @ y_op @ ta.x
    x_inv = ta.x_inv @ y_inv @ tb.x
    cert = SimilarityCertificate.build(x, x_inv)
    if not (cert.bounded and cert.verify() and cert.conjugate(a) == b):
        raise Undecided("matched blocks did not yield a bounded certificate")
    return SimilarityVerdict(True, cert, None, k0, k0.collisions)


def strongly_irreducible_blocks(a: OpMatrix) -> list[list[bool]]:
    """Per cell and canonical block: whether the block commutant is free of idempotents.

    Checked on the commutant basis of each block: the block is strongly
    irreducible exactly when every basis element is upper triangular with a
    single repeated diagonal entry, so the commutant is local.
    """
    form = _require_form(a)
    out = []
    for blocks in form.blocks:
        row = []
        for b in blocks:
            m = _block_matrix(b)
            basis = intertwiner_basis(m, m)
            ok = all(all(cell_is_zero(x[i][j]) for i in range(b.size) for j in range(i))
                     and all(x[i][i] == x[0][0] for i in range(b.size)) for x in basis)
            row.append(ok)
        out.append(row)
    return out
