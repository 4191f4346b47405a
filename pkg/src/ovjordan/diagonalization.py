"""Diagonalizing idempotents by bounded similarities.

The construction is the classical one for a single complex matrix, carried
out over the piecewise-rational field so that every conjugating matrix stays
bounded:

1. split the interval by the rank of the idempotent;
2. on each rank-``r`` piece pick a diagonal entry whose modulus is at least
   ``r/n`` (refining the partition where the best entry changes), swap it to
   the pivot position and clear the rest of its column with a unit lower
   triangular matrix;
3. repeat on the trailing block ``r`` times, reaching ``[[I_r, R], [0, 0]]``;
4. finish with the shear ``[[I_r, R], [0, I]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NotIdempotent, PivotTooSmall, UnboundedInput
from .opmatrix import (
    CELL_ONE,
    CellMatrix,
    OpMatrix,
    cm_block,
    cm_identity,
    cm_mul,
    cm_perm_matrix,
    cm_permute,
)
from .scalar_field import (
    Cell,
    Partition,
    RootIsolator,
    _radd,
    _rmul,
    _rtrim,
    cell_neg,
    cell_div,
    cell_is_zero,
    nonnegative_on,
)


@dataclass(frozen=True)
class SimilarityCertificate:
    """An invertible matrix together with its exact inverse."""

    x: OpMatrix
    x_inv: OpMatrix
    bounded: bool

    @classmethod
    def build(cls, x: OpMatrix, x_inv: OpMatrix) -> "SimilarityCertificate":
        bounded = x.is_bounded_matrix() and x_inv.is_bounded_matrix()
        return cls(x, x_inv, bounded)

    @classmethod
    def identity(cls, n: int, partition: Partition) -> "SimilarityCertificate":
        eye = OpMatrix.identity(n, partition)
        return cls(eye, eye, True)

    def verify(self) -> bool:
        """Exact check that x·x_inv = x_inv·x = I."""
        return (self.x @ self.x_inv).is_identity() and (self.x_inv @ self.x).is_identity()

    def conjugate(self, a: OpMatrix) -> OpMatrix:
        """Return x·a·x⁻¹."""
        return self.x @ a @ self.x_inv

    def then(self, outer: "SimilarityCertificate") -> "SimilarityCertificate":
        """Certificate for applying self first and outer second."""
        x = outer.x @ self.x
        x_inv = self.x_inv @ outer.x_inv
        return SimilarityCertificate(x, x_inv, self.bounded and outer.bounded
                                     or x.is_bounded_matrix() and x_inv.is_bounded_matrix())

    def inverse(self) -> "SimilarityCertificate":
        return SimilarityCertificate(self.x_inv, self.x, self.bounded)

    def refine(self, partition: Partition) -> "SimilarityCertificate":
        return SimilarityCertificate(self.x.refine(partition), self.x_inv.refine(partition),
                                     self.bounded)

    @property
    def partition(self) -> Partition:
        return self.x.partition


@dataclass(frozen=True)
class PivotCell:
    lo: Fraction
    hi: Fraction
    step: int
    pivot: int
    permutation: tuple[int, ...]
    bound: Fraction


@dataclass
class PivotPlan:
    """Pivot choices of every elimination step, cell by cell."""

    partition: Partition
    cells: list[PivotCell] = field(default_factory=list)


# ---------------------------------------------------------------------------
# pivot selection


def _abs2(c: Cell) -> tuple[list, list]:
    return c[0].abs2(), c[1].abs2()


def _crossing_points(polys: Iterable[list], lo: Fraction, hi: Fraction,
                     width: Fraction) -> list[Fraction]:
    """Rational points at (or, for irrational roots, within ``width`` of) every root in (lo, hi)."""
    pts = set()
    for p in polys:
        p = _rtrim(list(p))
        if len(p) <= 1:
            continue
        iso = RootIsolator(p)
        for root in iso.isolate(lo, hi):
            if root.value is not None:
                if lo < root.value < hi:
                    pts.add(root.value)
                continue
            r = iso.refine(root, width)
            x = r.value if r.value is not None else (r.lo + r.hi) / 2
            if lo < x < hi:
                pts.add(x)
    return sorted(pts)


def plan_pivots(q: CellMatrix, lo: Fraction, hi: Fraction, rank: int,
                candidates: Sequence[int] | None = None) -> list[tuple[Fraction, Fraction, int, Fraction]]:
    """Split [lo, hi] so that on each piece one diagonal entry dominates.

    Returns ``(lo, hi, index, bound)`` pieces where ``|q[index][index]|² >= bound``
    holds on the closed piece (verified exactly).  The bound is ``(rank/m)²``
    whenever the dominance changes at rational points; at irrational changes a
    rational breakpoint close to the root is used and the verified bound is a
    quarter of that.
    """
    m = len(q)
    idx = list(range(m)) if candidates is None else list(candidates)
    level = Fraction(rank, len(idx)) ** 2
    sq = {i: _abs2(q[i][i]) for i in idx}
    if all(len(n) <= 1 and len(d) <= 1 for n, d in sq.values()):
        vals = {i: (n[0] if n else Fraction(0)) / d[0] for i, (n, d) in sq.items()}
        best = max(idx, key=lambda i: (vals[i], -i))
        if vals[best] < level:
            raise PivotTooSmall(f"no diagonal entry reaches {level} on [{lo}, {hi}]")
        return [(lo, hi, best, level)]
    polys = []
    for a_pos, i in enumerate(idx):
        ni, di = sq[i]
        polys.append(_radd(ni, [-level * c for c in di]))
        for j in idx[a_pos + 1:]:
            nj, dj = sq[j]
            polys.append(_radd(_rmul(ni, dj), [-c for c in _rmul(nj, di)]))
    width = (hi - lo) / 64
    for _ in range(12):
        pts = [lo] + _crossing_points(polys, lo, hi, width) + [hi]
        pieces = []
        ok = True
        for s, t in zip(pts, pts[1:]):
            mid = (s + t) / 2
            vals = {i: _eval_ratio(sq[i], mid) for i in idx}
            best = max(idx, key=lambda i: (vals[i], -i))
            ni, di = sq[best]
            for bound in (level, level / 4):
                if nonnegative_on(_radd(ni, [-bound * c for c in di]), s, t):
                    pieces.append((s, t, best, bound))
                    break
            else:
                ok = False
                break
        if ok:
            merged = [pieces[0]]
            for s, t, i, bound in pieces[1:]:
                ps, _, pi, pb = merged[-1]
                if pi == i:
                    merged[-1] = (ps, t, i, min(pb, bound))
                else:
                    merged.append((s, t, i, bound))
            return merged
        width /= 256
    raise PivotTooSmall(f"could not certify a pivot bound on [{lo}, {hi}]")


def _eval_ratio(nd: tuple[list, list], x: Fraction) -> Fraction:
    n, d = nd
    num = Fraction(0)
    for c in reversed(n):
        num = num * x + c
    den = Fraction(0)
    for c in reversed(d):
        den = den * x + c
    return num / den


# ---------------------------------------------------------------------------
# elimination


def _elimination(q: CellMatrix, k: int) -> tuple[CellMatrix, CellMatrix]:
    """Unit lower-triangular X clearing column k below the (k, k) pivot, and X⁻¹."""
    n = len(q)
    x = cm_identity(n)
    x_inv = cm_identity(n)
    piv = q[k][k]
    for i in range(k + 1, n):
        if cell_is_zero(q[i][k]):
            continue
        ratio = cell_div(q[i][k], piv)
        x[i][k] = cell_neg(ratio)
        x_inv[i][k] = ratio
    return x, x_inv


def _swap_perm(n: int, a: int, b: int) -> list[int]:
    perm = list(range(n))
    perm[a], perm[b] = perm[b], perm[a]
    return perm


def _final_shear(q: CellMatrix, r: int) -> tuple[CellMatrix, CellMatrix]:
    n = len(q)
    s = cm_identity(n)
    s_inv = cm_identity(n)
    for i in range(r):
        for j in range(r, n):
            s[i][j] = q[i][j]
            s_inv[i][j] = cell_neg(q[i][j])
    return s, s_inv


Piece = tuple[Fraction, Fraction, CellMatrix, CellMatrix]


def diagonalize_cell(p: CellMatrix, lo: Fraction, hi: Fraction, rank: int,
                     plan: list | None = None) -> list[Piece]:
    """Diagonalize one cell of an idempotent of known rank.

    Returns pieces ``(lo, hi, X, X⁻¹)`` covering [lo, hi] with
    ``X p X⁻¹ = diag(I_rank, 0)`` on each piece.
    """
    n = len(p)
    if rank == 0 or rank == n:
        return [(lo, hi, cm_identity(n), cm_identity(n))]
    out: list[Piece] = []
    # stack of (lo, hi, step, current matrix, X, X⁻¹, permutation record)
    stack = [(lo, hi, 0, p, cm_identity(n), cm_identity(n))]
    while stack:
        s, t, k, q, x, x_inv = stack.pop()
        if k == rank:
            sh, sh_inv = _final_shear(q, rank)
            out.append((s, t, cm_mul(sh, x), cm_mul(x_inv, sh_inv)))
            continue
        pieces = plan_pivots(q, s, t, rank - k, candidates=range(k, n))
        for a, b, piv, bound in reversed(pieces):
            perm = _swap_perm(n, k, piv)
            u = cm_perm_matrix(perm)
            qs = cm_permute(q, perm) if piv != k else q
            e, e_inv = _elimination(qs, k)
            q_next = cm_mul(cm_mul(e, qs), e_inv)
            x_next = cm_mul(e, cm_mul(u, x)) if piv != k else cm_mul(e, x)
            ut = cm_perm_matrix(perm)  # swaps are involutions
            x_inv_next = cm_mul(cm_mul(x_inv, ut), e_inv) if piv != k else cm_mul(x_inv, e_inv)
            if plan is not None:
                plan.append(PivotCell(a, b, k, piv, tuple(perm), bound))
            stack.append((a, b, k + 1, q_next, x_next, x_inv_next))
    out.sort(key=lambda piece: piece[0])
    return out


def _assemble(partition: Partition, pieces_per_cell: list[list[Piece]], n: int
              ) -> tuple[Partition, OpMatrix, OpMatrix]:
    bps = [partition.a]
    xs, xis = [], []
    for pieces in pieces_per_cell:
        for lo, hi, x, xi in pieces:
            bps.append(hi)
            xs.append(x)
            xis.append(xi)
    part = Partition(bps)
    return part, OpMatrix.from_cells(part, xs), OpMatrix.from_cells(part, xis)


def _require_idempotent(p: OpMatrix) -> None:
    if not p.is_idempotent():
        raise NotIdempotent("input is not idempotent")
    if not p.is_bounded_matrix():
        raise UnboundedInput("input idempotent has unbounded entries")


def eliminate_column(p: OpMatrix) -> tuple[SimilarityCertificate, OpMatrix]:
    """One elimination step at the (1,1) pivot.

    Raises PivotTooSmall if ``|p11|`` drops below ``rank/n`` anywhere on a
    closed cell of positive rank.
    """
    tf = p.trace_function()
    n = p.n
    xs, xis = [], []
    for k, (lo, hi) in enumerate(p.partition.cells()):
        c = p.cell(k)
        r = tf.values[k]
        if r > 0:
            n11, d11 = _abs2(c[0][0])
            level = Fraction(r, n) ** 2
            if not nonnegative_on(_radd(n11, [-level * v for v in d11]), lo, hi):
                raise PivotTooSmall(f"|p11| < {r}/{n} somewhere on cell {k}")
            e, e_inv = _elimination(c, 0)
        else:
            e, e_inv = cm_identity(n), cm_identity(n)
        xs.append(e)
        xis.append(e_inv)
    x = OpMatrix.from_cells(p.partition, xs)
    x_inv = OpMatrix.from_cells(p.partition, xis)
    cert = SimilarityCertificate.build(x, x_inv)
    return cert, cert.conjugate(p)


def diagonalize_idempotent(p: OpMatrix, *, plan: PivotPlan | None = None
                           ) -> tuple[SimilarityCertificate, OpMatrix]:
    """Bounded X with X·p·X⁻¹ = diag(1,…,1,0,…,0) on every cell.

    Args:
        p: a bounded idempotent.
        plan: optional PivotPlan that receives every pivot choice.

    Returns:
        The certificate and the diagonal conjugate.

    Raises:
        NotIdempotent: p² ≠ p.
        UnboundedInput: p has a pole on some closed cell.
    """
    _require_idempotent(p)
    tf = p.trace_function()
    records: list = []
    pieces = [diagonalize_cell(p.cell(k), lo, hi, tf.values[k], records)
              for k, (lo, hi) in enumerate(p.partition.cells())]
    part, x, x_inv = _assemble(p.partition, pieces, p.n)
    if plan is not None:
        plan.partition = part
        plan.cells.extend(records)
    cert = SimilarityCertificate.build(x, x_inv)
    if not cert.bounded:
        raise PivotTooSmall("constructed certificate is unbounded")
    d = cert.conjugate(p.refine(part))
    return cert, d


def frame_diagonalize_cell(ps: Sequence[CellMatrix], ranks: Sequence[int],
                           lo: Fraction, hi: Fraction) -> list[Piece]:
    """Simultaneously diagonalize annihilating idempotents summing to I on one cell.

    The range of the k-th idempotent occupies the k-th consecutive group of
    coordinates.
    """
    n = len(ps[0]) if ps else 0
    if not ps or n == 0:
        return [(lo, hi, cm_identity(n), cm_identity(n))]
    first, rest = ps[0], ps[1:]
    r1 = ranks[0]
    out: list[Piece] = []
    for s, t, x1, x1_inv in diagonalize_cell(first, lo, hi, r1):
        if not rest or r1 == n:
            out.append((s, t, x1, x1_inv))
            continue
        lower = list(range(r1, n))
        qs = [cm_block(cm_mul(cm_mul(x1, q), x1_inv), lower, lower) for q in rest]
        for a, b, y, y_inv in frame_diagonalize_cell(qs, ranks[1:], s, t):
            big = cm_identity(n)
            big_inv = cm_identity(n)
            for i in range(n - r1):
                for j in range(n - r1):
                    big[r1 + i][r1 + j] = y[i][j]
                    big_inv[r1 + i][r1 + j] = y_inv[i][j]
            out.append((a, b, cm_mul(big, x1), cm_mul(x1_inv, big_inv)))
    return out


def diagonalize_frame(a: OpMatrix | None, frame) -> SimilarityCertificate:
    """One bounded X making every frame element a diagonal projection.

    ``frame`` may be a Frame or a plain list of idempotents.  The ranges
    appear in the order of the list.
    """
    elements = list(getattr(frame, "elements", frame))
    if not elements:
        raise ValueError("empty frame")
    parts = [e.partition for e in elements] + ([a.partition] if a is not None else [])
    part = parts[0]
    for q in parts[1:]:
        part = part.common_refinement(q)
    elements = [e.refine(part) for e in elements]
    for e in elements:
        _require_idempotent(e)
    tfs = [e.trace_function() for e in elements]
    n = elements[0].n
    pieces = []
    for k, (lo, hi) in enumerate(part.cells()):
        pieces.append(frame_diagonalize_cell([e.cell(k) for e in elements],
                                             [tf.values[k] for tf in tfs], lo, hi))
    new_part, x, x_inv = _assemble(part, pieces, n)
    cert = SimilarityCertificate.build(x, x_inv)
    if not cert.bounded:
        raise PivotTooSmall("constructed frame certificate is unbounded")
    return cert


def is_diagonal_projection(d: OpMatrix) -> bool:
    return d.is_diagonal() and all(
        cell_is_zero(c[i][i]) or c[i][i] == CELL_ONE
        for c in d.cells() for i in range(d.n))
