"""The relative commutant and idempotents inside it.

The commutant of an operator is computed cell by cell as the exact null space
of the Sylvester map ``B ↦ AB − BA`` over the rational function field.  For an
operator already in canonical block layout, idempotents of the commutant are
brought to diagonal form by similarities that themselves commute with the
operator:

1. the part of the idempotent that raises the position inside a block is
   stripped off with ``2P − I − R``, inverted by a finite Neumann series;
2. a block whose diagonal entry in the idempotent stays away from zero is
   absorbed with two shears built from the block row and block column of the
   idempotent, and the procedure recurses on the remaining blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .diagonalization import SimilarityCertificate, _assemble, plan_pivots
from .errors import (
    DiagonalCollision,
    NotCommuting,
    NotIdempotent,
    NotInCommutant,
    NotMaximal,
    NotMinimal,
    UnboundedInput,
    UnboundedShear,
    Undecided,
)
from .linalg import nullspace, primitive_vector
from .opmatrix import (
    CELL_ONE,
    CELL_ZERO,
    CellMatrix,
    OpMatrix,
    cm_add,
    cm_block,
    cm_bounded,
    cm_eq,
    cm_identity,
    cm_inverse,
    cm_is_identity,
    cm_is_zero,
    cm_mul,
    cm_scale,
    cm_sub,
    cm_zero,
)
from .scalar_field import (
    Cell,
    POLY_ONE,
    Partition,
    PiecewiseRational,
    cell_add,
    cell_constant,
    cell_eval,
    cell_is_constant,
    cell_is_zero,
    cell_mul,
    cell_neg,
    cell_poles,
    cell_sub,
    cell_to_str,
)
from .structure import (
    FrameObstruction,
    _pole_entries,
    _root_key,
    column_shear,
    decompose_nilpotent,
    extract_frame,
    splitting_entries,
)


# ---------------------------------------------------------------------------
# intertwiners and the commutant module


def intertwiner_basis(a: CellMatrix, b: CellMatrix) -> list[CellMatrix]:
    """Basis over the field of all X with ``a·X = X·b``.

    Basis elements are scaled to primitive polynomial matrices, so each one is
    bounded on every cell.
    """
    n, m = len(a), len(b)
    rows: list[list[Cell]] = []
    # unknown X[i][j] sits at index i*m + j
    for i in range(n):
        for j in range(m):
            row = [CELL_ZERO] * (n * m)
            for l in range(n):
                if not cell_is_zero(a[i][l]):
                    row[l * m + j] = cell_add(row[l * m + j], a[i][l])
            for l in range(m):
                if not cell_is_zero(b[l][j]):
                    row[i * m + l] = cell_sub(row[i * m + l], b[l][j])
            rows.append(row)
    out = []
    for vec in nullspace(rows):
        polys = primitive_vector(vec)
        out.append([[(polys[i * m + j], POLY_ONE) if not polys[i * m + j].is_zero()
                     else CELL_ZERO for j in range(m)] for i in range(n)])
    return out


def canonical_layout(a: CellMatrix) -> list[tuple[int, int]] | None:
    """Blocks ``(offset, size)`` when ``a`` is a direct sum of canonical blocks.

    A canonical block is upper triangular with one repeated diagonal function
    and a superdiagonal that is not identically zero.  Blocks are the maximal
    runs of nonzero superdiagonal entries.  Returns None for any other shape.
    """
    n = len(a)
    blocks = []
    start = 0
    for i in range(n):
        if i == n - 1 or cell_is_zero(a[i][i + 1]):
            blocks.append((start, i + 1 - start))
            start = i + 1
    owner = [k for k, (_, s) in enumerate(blocks) for _ in range(s)]
    for i in range(n):
        for j in range(n):
            if cell_is_zero(a[i][j]):
                continue
            if owner[i] != owner[j] or i > j:
                return None
    for off, s in blocks:
        if any(a[off + i][off + i] != a[off][off] for i in range(s)):
            return None
    return blocks


def _positions(blocks: Sequence[tuple[int, int]]) -> list[int]:
    return [i for _, s in blocks for i in range(s)]


def predicted_zero_pattern(a: CellMatrix, blocks: Sequence[tuple[int, int]]) -> set[tuple[int, int]]:
    """Entries forced to vanish in every commutant element of a canonical layout.

    Blocks with different diagonal functions do not talk to each other; between
    two blocks of sizes ``s_k`` and ``s_l`` on one diagonal function, entry
    ``(i, j)`` vanishes when ``i − j > min(0, s_k − s_l)``.
    """
    zeros = set()
    for ok, sk in blocks:
        for ol, sl in blocks:
            same = a[ok][ok] == a[ol][ol]
            for i in range(sk):
                for j in range(sl):
                    if not same or i - j > min(0, sk - sl):
                        zeros.add((ok + i, ol + j))
    return zeros


def _check_predictions(a: CellMatrix, blocks, basis: Sequence[CellMatrix]) -> bool:
    zeros = predicted_zero_pattern(a, blocks)
    for b in basis:
        if any(not cell_is_zero(b[i][j]) for i, j in zeros):
            return False
        for off, s in blocks:
            if any(b[off + i][off + i] != b[off][off] for i in range(s)):
                return False
    return True


@dataclass(frozen=True)
class CommutantModule:
    """Exact basis of the commutant on every cell with its structural summary.

    ``zero_patterns[k]`` holds the entries that vanish in every element on
    cell ``k``.  ``predictions_hold[k]`` is None unless the operator is in
    canonical layout on that cell, in which case it records whether the forced
    zeros and equal block diagonals predicted from the layout were observed.
    """

    partition: Partition
    bases: tuple[tuple[CellMatrix, ...], ...]
    zero_patterns: tuple[frozenset, ...]
    bounded: tuple[tuple[bool, ...], ...]
    layouts: tuple
    predictions_hold: tuple

    def dimension(self, cell: int) -> int:
        return len(self.bases[cell])

    def element(self, cell: int, coeffs: Sequence[Cell]) -> CellMatrix:
        n = len(self.bases[cell][0]) if self.bases[cell] else 0
        out = cm_zero(n)
        for c, b in zip(coeffs, self.bases[cell]):
            if not cell_is_zero(c):
                out = cm_add(out, cm_scale(c, b))
        return out

    def combine(self, coeffs: Sequence[Sequence]) -> OpMatrix:
        """The element with the given coefficients (cells or constants) per cell."""
        cells = []
        for k, cs in enumerate(coeffs):
            cells.append(self.element(k, [c if isinstance(c, tuple) else cell_constant(c)
                                          for c in cs]))
        return OpMatrix.from_cells(self.partition, cells)


def solve_commutant(a: OpMatrix) -> CommutantModule:
    """Exact commutant of ``a`` over the field, one basis per cell."""
    if not a.is_bounded_matrix():
        raise UnboundedInput("operator entries must be bounded on every closed cell")
    n = a.n
    bases, zeros, bounded, layouts, checks = [], [], [], [], []
    for k, (lo, hi) in enumerate(a.partition.cells()):
        c = a.cell(k)
        basis = intertwiner_basis(c, c)
        bases.append(tuple(basis))
        zeros.append(frozenset((i, j) for i in range(n) for j in range(n)
                               if all(cell_is_zero(b[i][j]) for b in basis)))
        bounded.append(tuple(cm_bounded(b, lo, hi) for b in basis))
        layout = canonical_layout(c)
        layouts.append(None if layout is None else tuple(layout))
        checks.append(None if layout is None else _check_predictions(c, layout, basis))
    return CommutantModule(a.partition, tuple(bases), tuple(zeros), tuple(bounded),
                           tuple(layouts), tuple(checks))


# ---------------------------------------------------------------------------
# splitting constructions


def build_splitting_idempotent(a: OpMatrix, r: int) -> OpMatrix | FrameObstruction:
    """The idempotent ``[[I_r, R], [0, 0]]`` commuting with upper triangular ``a``.

    ``R`` solves ``a₁₁·R − R·a₂₂ = a₁₂`` by forward substitution.  When an entry
    of ``R`` has a pole in a closed cell the obstruction is returned instead.

    Raises:
        DiagonalCollision: a leading and a trailing diagonal entry coincide.
    """
    n = a.n
    if not 0 < r < n:
        raise ValueError("split index must satisfy 0 < r < n")
    if not a.is_upper_triangular():
        raise ValueError("operator must be upper triangular on every cell")
    cells = []
    for k, (lo, hi) in enumerate(a.partition.cells()):
        rr = splitting_entries(a.cell(k), r)
        bad = _pole_entries(rr, lo, hi)
        if bad:
            pole, q, (i, j) = min(bad, key=lambda t: _root_key(t[0]))
            text = (f"splitting idempotent entry ({i}, {r + j}) = {cell_to_str(q)} "
                    f"has a non-cancelling pole at {pole}")
            return FrameObstruction(pole, PiecewiseRational(Partition([lo, hi]), [q]), k, text)
        p = cm_zero(n)
        for i in range(r):
            p[i][i] = CELL_ONE
            for j in range(n - r):
                p[i][r + j] = rr[i][j]
        cells.append(p)
    return OpMatrix.from_cells(a.partition, cells)


def split_block(a: OpMatrix, r: int) -> SimilarityCertificate:
    """Bounded similarity splitting an equal-diagonal block at a vanishing superdiagonal.

    ``a`` is upper triangular with one diagonal function per cell and
    ``a[r−1][r]`` identically zero.  The column shear clearing column ``r`` is
    solved first; a pole in it raises :class:`UnboundedShear`.  The returned
    certificate conjugates ``a`` to a direct sum of canonical blocks (the
    identity on cells where ``a`` already is one).
    """
    n = a.n
    if not 0 < r < n:
        raise ValueError("split index must satisfy 0 < r < n")
    xs, xis = [], []
    for k, (lo, hi) in enumerate(a.partition.cells()):
        c = a.cell(k)
        if any(not cell_is_zero(c[i][j]) for i in range(n) for j in range(i)):
            raise ValueError(f"operator is not upper triangular on cell {k}")
        e = c[0][0]
        if any(c[i][i] != e for i in range(n)):
            raise DiagonalCollision(f"diagonal is not constant on cell {k}")
        if not cell_is_zero(c[r - 1][r]):
            raise ValueError(f"superdiagonal entry ({r - 1}, {r}) is not zero on cell {k}")
        if canonical_layout(c) is not None:
            xs.append(cm_identity(n))
            xis.append(cm_identity(n))
            continue
        nil = [[cell_sub(c[i][j], e) if i == j else c[i][j] for j in range(n)] for i in range(n)]
        for q in column_shear(nil, r):
            poles = cell_poles(q, lo, hi)
            if poles:
                raise UnboundedShear(q, poles[0])
        b, b_inv, _ = decompose_nilpotent(nil, lo, hi)
        xs.append(b_inv)
        xis.append(b)
    return SimilarityCertificate.build(OpMatrix.from_cells(a.partition, xs),
                                       OpMatrix.from_cells(a.partition, xis))


# ---------------------------------------------------------------------------
# idempotents inside the commutant of a canonical layout


def strip_graded_part(a: CellMatrix, blocks: Sequence[tuple[int, int]], p: CellMatrix
                      ) -> tuple[CellMatrix, CellMatrix, CellMatrix] | None:
    """Remove the position-raising part ``R`` of an idempotent ``p`` in the commutant.

    Grading every coordinate by its position inside its block, ``p = P₀ + R``
    with ``R`` of positive degree.  When ``R`` commutes with ``a`` the matrix
    ``X = 2p − I − R`` commutes with ``a`` and satisfies ``X·p·X⁻¹ = P₀``.  With
    ``U = 2P₀ − I`` (an involution) ``X = U·(I + U·R)`` and ``U·R`` is
    nilpotent, so ``X⁻¹ = Σ_j (−U·R)^j · U`` is a finite sum.

    Returns ``(X, X⁻¹, P₀)`` or None when the grading does not apply.
    """
    n = len(p)
    pos = _positions(blocks)
    for i in range(n):
        for j in range(n):
            if pos[j] < pos[i] and not cell_is_zero(p[i][j]):
                return None
    r = [[p[i][j] if pos[j] > pos[i] else CELL_ZERO for j in range(n)] for i in range(n)]
    eye = cm_identity(n)
    if cm_is_zero(r):
        return eye, eye, p
    if not cm_eq(cm_mul(a, r), cm_mul(r, a)):
        return None
    p0 = cm_sub(p, r)
    u = cm_sub(cm_scale(cell_constant(2), p0), eye)
    x = cm_add(u, r)
    step = [[cell_neg(v) for v in row] for row in cm_mul(u, r)]
    total = eye
    term = eye
    for _ in range(max(s for _, s in blocks)):
        term = cm_mul(term, step)
        if cm_is_zero(term):
            break
        total = cm_add(total, term)
    x_inv = cm_mul(total, u)
    if not cm_is_identity(cm_mul(x, x_inv)):
        raise Undecided("graded strip-off did not invert exactly")
    return x, x_inv, p0


def _trace_value(p: CellMatrix, coords: Sequence[int]) -> int:
    tr = CELL_ZERO
    for i in coords:
        tr = cell_add(tr, p[i][i])
    v = cell_eval(tr, 0) if cell_is_constant(tr) else None
    if v is None or not v.is_real or v.re.denominator != 1:
        raise NotIdempotent("trace of the idempotent is not a constant integer")
    return int(v.re)


def _absorb_block(p: CellMatrix, off: int, size: int) -> tuple[CellMatrix, CellMatrix]:
    """Shears in the commutant conjugating the sub-idempotent of block ``off`` to its projection.

    With ``J`` the block coordinates and ``P_kk`` the (invertible) diagonal
    block, ``Y⁻¹ = I + (P·J·P_kk⁻¹ − J)·Jᵀ`` moves the range and a row shear
    ``Z = I + J·(Jᵀ·Y·P·Y⁻¹ − Jᵀ)`` then clears the block rows.
    """
    n = len(p)
    idx = range(off, off + size)
    pkk = cm_block(p, idx, idx)
    inv = cm_inverse(pkk)
    u = cm_mul(cm_block(p, range(n), idx), inv)
    y = cm_identity(n)
    y_inv = cm_identity(n)
    for i in range(n):
        if off <= i < off + size:
            continue
        for j in range(size):
            v = u[i][j]
            if not cell_is_zero(v):
                y_inv[i][off + j] = v
                y[i][off + j] = cell_neg(v)
    p1 = cm_mul(cm_mul(y, p), y_inv)
    z = cm_identity(n)
    z_inv = cm_identity(n)
    for i in range(size):
        for j in range(n):
            if off <= j < off + size:
                continue
            w = p1[off + i][j]
            if not cell_is_zero(w):
                z[off + i][j] = w
                z_inv[off + i][j] = cell_neg(w)
    return cm_mul(z, y), cm_mul(y_inv, z_inv)


Piece = tuple[Fraction, Fraction, CellMatrix, CellMatrix, list[int]]


def _eliminate(p: CellMatrix, blocks: Sequence[tuple[int, int]], active: list[int],
               lo: Fraction, hi: Fraction) -> list[Piece]:
    """Pieces ``(lo, hi, Z, Z⁻¹, chosen)`` with ``Z·p·Z⁻¹`` the projection onto ``chosen`` blocks."""
    n = len(p)
    coords = [blocks[k][0] + i for k in active for i in range(blocks[k][1])]
    rank = _trace_value(p, coords)
    if rank == 0:
        return [(lo, hi, cm_identity(n), cm_identity(n), [])]
    if rank == len(coords):
        return [(lo, hi, cm_identity(n), cm_identity(n), list(active))]
    q = cm_zero(len(active))
    for t, k in enumerate(active):
        off, s = blocks[k]
        q[t][t] = cell_mul(cell_constant(s), p[off][off])
    out: list[Piece] = []
    for s, t, idx, _ in plan_pivots(q, lo, hi, rank):
        k = active[idx]
        z, z_inv = _absorb_block(p, *blocks[k])
        p2 = cm_mul(cm_mul(z, p), z_inv)
        rest = [b for b in active if b != k]
        for a2, b2, z2, z2_inv, chosen in _eliminate(p2, blocks, rest, s, t):
            out.append((a2, b2, cm_mul(z2, z), cm_mul(z_inv, z2_inv), [k] + chosen))
    return out


def _diagonalize_atoms_cell(a: CellMatrix, blocks: Sequence[tuple[int, int]],
                            atoms: Sequence[CellMatrix], lo: Fraction, hi: Fraction,
                            active: list[int] | None = None) -> list[Piece]:
    """Simultaneously diagonalize annihilating idempotents of the commutant on one cell."""
    n = len(a)
    if active is None:
        active = list(range(len(blocks)))
    if not atoms:
        return [(lo, hi, cm_identity(n), cm_identity(n), [])]
    first, rest = atoms[0], atoms[1:]
    stripped = strip_graded_part(a, blocks, first)
    if stripped is None:
        x, x_inv, p0 = cm_identity(n), cm_identity(n), first
    else:
        x, x_inv, p0 = stripped
    out: list[Piece] = []
    for s, t, z, z_inv, chosen in _eliminate(p0, blocks, active, lo, hi):
        w = cm_mul(z, x)
        w_inv = cm_mul(x_inv, z_inv)
        left = [k for k in active if k not in chosen]
        moved = [cm_mul(cm_mul(w, q), w_inv) for q in rest]
        for a2, b2, v, v_inv, _ in _diagonalize_atoms_cell(a, blocks, moved, s, t, left):
            out.append((a2, b2, cm_mul(v, w), cm_mul(w_inv, v_inv), chosen))
    return out


def _layouts(a: OpMatrix) -> list[list[tuple[int, int]]]:
    out = []
    for k in range(a.partition.ncells):
        layout = canonical_layout(a.cell(k))
        if layout is None:
            raise ValueError(f"operator is not in canonical block layout on cell {k}")
        out.append(layout)
    return out


def _require_in_commutant(a: OpMatrix, p: OpMatrix, index: int = 0) -> None:
    if not p.is_bounded_matrix():
        raise UnboundedInput(f"idempotent {index} has unbounded entries")
    if not p.is_idempotent():
        raise NotIdempotent(f"matrix {index} is not idempotent")
    if not a.commutes(p):
        raise NotInCommutant(f"matrix {index} does not commute with the operator")


def _diagonalize_atoms(a: OpMatrix, atoms: Sequence[OpMatrix]) -> SimilarityCertificate:
    part = a.partition
    for q in atoms:
        part = part.common_refinement(q.partition)
    a = a.refine(part)
    atoms = [q.refine(part) for q in atoms]
    layouts = _layouts(a)
    pieces = []
    for k, (lo, hi) in enumerate(part.cells()):
        cell_pieces = _diagonalize_atoms_cell(a.cell(k), layouts[k], [q.cell(k) for q in atoms],
                                              lo, hi)
        pieces.append([(s, t, z, z_inv) for s, t, z, z_inv, _ in sorted(cell_pieces,
                                                                        key=lambda c: c[0])])
    _, x, x_inv = _assemble(part, pieces, a.n)
    cert = SimilarityCertificate.build(x, x_inv)
    if not cert.bounded:
        raise Undecided("constructed commutant similarity is unbounded")
    return cert


def diagonalize_idempotent_in_commutant(a: OpMatrix, p: OpMatrix) -> SimilarityCertificate:
    """Bounded Z commuting with ``a`` such that ``Z·p·Z⁻¹`` is a diagonal projection.

    ``a`` must be in canonical block layout on every cell.

    Raises:
        NotIdempotent: p² ≠ p.
        NotInCommutant: p does not commute with a.
    """
    _require_in_commutant(a, p)
    return _diagonalize_atoms(a, [p])


# ---------------------------------------------------------------------------
# maximal abelian sets of idempotents


def _bounded_piece(q: CellMatrix, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """A closed subinterval of the cell on which every entry of q is bounded."""
    poles = [r for row in q for x in row for r in cell_poles(x, lo, hi)]
    if not poles:
        return lo, hi
    marks = [(lo, lo)] + sorted(((r.value, r.value) if r.is_exact else (r.lo, r.hi)
                                  for r in poles)) + [(hi, hi)]
    gaps = [(marks[i][1], marks[i + 1][0]) for i in range(len(marks) - 1)]
    s, t = max(gaps, key=lambda g: g[1] - g[0])
    width = t - s
    return s + width / 4, t - width / 4


def bounded_witness(a: OpMatrix, witness: OpMatrix, cell: int) -> OpMatrix:
    """Cut a field-level witness idempotent down to a subcell where it is bounded."""
    lo, hi = a.partition.cell(cell)
    q = witness.cell(cell)
    s, t = _bounded_piece(q, lo, hi)
    part = a.partition.with_points([s, t])
    cells = []
    for k, (u, v) in enumerate(part.cells()):
        cells.append(q if (u, v) == (s, t) else cm_zero(a.n))
    return OpMatrix.from_cells(part, cells)


def maximal_frame(a: OpMatrix, generators: Sequence[OpMatrix]) -> list[OpMatrix]:
    """Atoms of a generating set, checked to generate a maximal abelian set.

    Raises:
        NotCommuting: a generator does not commute with ``a`` or with another generator.
        NotMaximal: some atom has a nontrivial sub-idempotent in the commutant;
            the witness is bounded on a central cut.
    """
    for i, g in enumerate(generators):
        _require_in_commutant(a, g, i)
        for j in range(i):
            if not generators[j].commutes(g):
                raise NotCommuting(i)
    try:
        frame = extract_frame(a, generators)
    except NotMinimal as exc:
        witness = exc.witness
        cell = exc.cell
        aligned = a.refine(witness.partition)
        raise NotMaximal(bounded_witness(aligned, witness, cell), cell) from None
    return list(frame.elements)


def in_generated_algebra(m: OpMatrix, atoms: Sequence[OpMatrix]) -> bool:
    """Whether m is, cell by cell, a sum of some of the atoms."""
    part = m.partition
    for q in atoms:
        part = part.common_refinement(q.partition)
    m = m.refine(part)
    atoms = [q.refine(part) for q in atoms]
    for k in range(part.ncells):
        mk = m.cell(k)
        total = cm_zero(m.n)
        for q in atoms:
            qk = q.cell(k)
            prod = cm_mul(mk, qk)
            if cm_eq(prod, qk):
                total = cm_add(total, qk)
            elif not cm_is_zero(prod):
                return False
        if not cm_eq(total, mk):
            return False
    return True


def conjugate_masi(a: OpMatrix, gen_p: Sequence[OpMatrix], gen_q: Sequence[OpMatrix]
                   ) -> SimilarityCertificate:
    """Bounded X in the commutant carrying the set generated by ``gen_p`` onto that of ``gen_q``.

    Both sets are conjugated to the diagonal block projections and the two
    similarities are composed.
    """
    atoms_p = maximal_frame(a, gen_p)
    atoms_q = maximal_frame(a, gen_q)
    to_diag_p = _diagonalize_atoms(a, atoms_p)
    to_diag_q = _diagonalize_atoms(a, atoms_q)
    cert = to_diag_p.then(to_diag_q.inverse())
    if not (cert.bounded and a.commutes(cert.x)):
        raise Undecided("composed similarity left the commutant")
    for g in gen_p:
        if not in_generated_algebra(cert.conjugate(g), atoms_q):
            raise Undecided("a generator was not carried into the target set")
    inv = cert.inverse()
    for g in gen_q:
        if not in_generated_algebra(inv.conjugate(g), atoms_p):
            raise Undecided("a target generator was not carried back")
    return cert
