"""Finite frames, frame existence and the canonical local structure.

Every cell of the partition is treated independently with exact arithmetic:

1. the operator is brought to upper triangular form by unimodular
   (polynomial, constant determinant) similarities built from exact
   eigenvector chains, so both the similarity and its inverse stay bounded;
2. groups of equal diagonal functions are separated with the splitting
   idempotent ``[[I, R], [0, 0]]`` whose entries ``R`` are solved by forward
   substitution; an entry with a pole in the closed cell proves that no finite
   frame exists and becomes the obstruction certificate;
3. every equal-diagonal group is decomposed into chains whose superdiagonals
   are nonzero almost everywhere, accepting a chain only when the chain span
   and its invariant complement form a basis with unit determinant.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

from .diagonalization import SimilarityCertificate
from .errors import (
    DiagonalCollision,
    NotAnnihilating,
    NotCommuting,
    NotIdempotent,
    NotMinimal,
    SpectrumNotSplit,
    SumNotIdentity,
    UnboundedInput,
    UnboundedShear,
    Undecided,
)
from .linalg import (
    PolyMatrix,
    cell_eigenvalues,
    clear_denominators,
    column_echelon,
    eigen_sort_key,
    field_rank,
    has_root_in,
    nullspace,
    poly_matrix_mul,
    primitive_vector,
    rref,
    smith_form,
    smith_pairing,
    solve_bounded,
    to_cells,
    unimodular_completion,
)
from .opmatrix import (
    CELL_ONE,
    CELL_ZERO,
    CellMatrix,
    OpMatrix,
    cm_add,
    cm_block,
    cm_bounded,
    cm_det,
    cm_direct_sum,
    cm_eq,
    cm_identity,
    cm_inverse,
    cm_is_identity,
    cm_is_zero,
    cm_mul,
    cm_perm_matrix,
    cm_zero,
)
from .scalar_field import (
    Cell,
    Partition,
    PiecewiseRational,
    POLY_ONE,
    POLY_ZERO,
    RealRoot,
    RootIsolator,
    GaussianRational,
    cell_add,
    cell_constant,
    cell_div,
    cell_is_zero,
    cell_mul,
    cell_neg,
    cell_poles,
    cell_sub,
    cell_to_str,
    real_common_part,
)


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class Frame:
    """Mutually annihilating minimal idempotents of the commutant summing to I."""

    elements: tuple[OpMatrix, ...]
    supports: tuple[tuple[int, ...], ...]

    @property
    def partition(self) -> Partition:
        return self.elements[0].partition

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class Block:
    """One canonical block on one cell, stored as its exact cell matrix."""

    offset: int
    entries: tuple[tuple[Cell, ...], ...]

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def diagonal(self) -> Cell:
        return self.entries[0][0]

    @property
    def superdiagonal(self) -> tuple[Cell, ...]:
        return tuple(self.entries[j][j + 1] for j in range(self.size - 1))

    def key(self) -> tuple:
        return (eigen_sort_key(self.diagonal), self.size)


@dataclass(frozen=True)
class CanonicalForm:
    """Block-diagonal canonical structure with its certificates.

    ``unitary_cert · cert · A · cert⁻¹ · unitary_cert⁻¹`` equals the block
    diagonal matrix returned by :meth:`block_diagonal`.
    """

    cert: SimilarityCertificate
    unitary_cert: SimilarityCertificate
    blocks: tuple[tuple[Block, ...], ...]

    @property
    def partition(self) -> Partition:
        return self.cert.partition

    def block_diagonal(self) -> OpMatrix:
        cells = [cm_direct_sum(*[[list(r) for r in b.entries] for b in blocks])
                 for blocks in self.blocks]
        return OpMatrix.from_cells(self.partition, cells)

    def total(self) -> SimilarityCertificate:
        return self.cert.then(self.unitary_cert)

    def reconstruct(self) -> OpMatrix:
        """The original operator rebuilt from the blocks and certificates."""
        t = self.total()
        return t.x_inv @ self.block_diagonal() @ t.x

    def profile(self, cell: int) -> list[tuple[Cell, int]]:
        return sorted(((b.diagonal, b.size) for b in self.blocks[cell]),
                      key=lambda p: (eigen_sort_key(p[0]), p[1]))

    def diagonal_function(self, cell: int, k: int) -> PiecewiseRational:
        lo, hi = self.partition.cell(cell)
        return PiecewiseRational(Partition([lo, hi]), [self.blocks[cell][k].diagonal])

    def superdiagonal_functions(self, cell: int, k: int) -> list[PiecewiseRational]:
        lo, hi = self.partition.cell(cell)
        part = Partition([lo, hi])
        return [PiecewiseRational(part, [f]) for f in self.blocks[cell][k].superdiagonal]


@dataclass(frozen=True)
class FrameObstruction:
    """Certificate that no finite frame exists: a splitting entry with a pole."""

    witness: RealRoot
    unbounded_quotient: PiecewiseRational
    cell: int
    narrative: str

    @property
    def witness_point(self) -> Fraction:
        if self.witness.is_exact:
            return self.witness.value
        return (self.witness.lo + self.witness.hi) / 2


# ---------------------------------------------------------------------------
# triangularization


def _is_upper(a: CellMatrix) -> bool:
    return all(cell_is_zero(a[i][j]) for i in range(len(a)) for j in range(i))


def _embed(u: PolyMatrix, s: int, n: int) -> CellMatrix:
    out = cm_identity(n)
    for i, row in enumerate(u):
        for j, p in enumerate(row):
            out[s + i][s + j] = (p, POLY_ONE) if not p.is_zero() else CELL_ZERO
    return out


def _pick_vector(basis: list[list[Cell]]) -> list[Cell]:
    def weight(v):
        return sum(x[0].degree + 1 + x[1].degree for x in v if not cell_is_zero(x))
    return min(basis, key=weight)


def triangularize(a: CellMatrix, order: Sequence[Cell]
                  ) -> tuple[CellMatrix, CellMatrix, CellMatrix]:
    """Unimodular X with X·a·X⁻¹ upper triangular, diagonal following ``order``.

    ``order`` lists the eigenvalue functions with multiplicity.  Returns
    ``(X, X⁻¹, T)``.
    """
    n = len(a)
    cur = [list(r) for r in a]
    x = cm_identity(n)
    x_inv = cm_identity(n)
    for s, e in enumerate(order):
        sub = [[cell_sub(cur[s + i][s + j], e) if i == j else cur[s + i][s + j]
                for j in range(n - s)] for i in range(n - s)]
        if all(cell_is_zero(sub[i][0]) for i in range(n - s)):
            continue
        basis = nullspace(sub)
        if not basis:
            raise ValueError("eigenvalue function has no eigenvector")
        v = primitive_vector(_pick_vector(basis))
        u, u_inv = unimodular_completion(v)
        ue, ue_inv = _embed(u, s, n), _embed(u_inv, s, n)
        cur = cm_mul(cm_mul(ue, cur), ue_inv)
        x = cm_mul(ue, x)
        x_inv = cm_mul(x_inv, ue_inv)
    return x, x_inv, cur


# ---------------------------------------------------------------------------
# splitting distinct diagonal groups


def splitting_entries(t: CellMatrix, r: int) -> CellMatrix:
    """Solve t₁₁·R − R·t₂₂ = t₁₂ for upper triangular t by forward substitution.

    ``[[I_r, R], [0, 0]]`` is then an idempotent commuting with ``t`` and the
    shear ``[[I_r, R], [0, I]]`` block-diagonalizes ``t``.
    """
    n = len(t)
    m = n - r
    rr = [[CELL_ZERO] * m for _ in range(r)]
    for j in range(m):
        jj = r + j
        for i in range(r - 1, -1, -1):
            acc = t[i][jj]
            for k in range(i + 1, r):
                if not cell_is_zero(t[i][k]) and not cell_is_zero(rr[k][j]):
                    acc = cell_sub(acc, cell_mul(t[i][k], rr[k][j]))
            for l in range(j):
                if not cell_is_zero(rr[i][l]) and not cell_is_zero(t[r + l][jj]):
                    acc = cell_add(acc, cell_mul(rr[i][l], t[r + l][jj]))
            gap = cell_sub(t[i][i], t[jj][jj])
            if cell_is_zero(gap):
                raise DiagonalCollision(f"diagonal entries {i} and {jj} coincide")
            rr[i][j] = cell_div(acc, gap) if not cell_is_zero(acc) else CELL_ZERO
    return rr




def _shear(rr: CellMatrix, r: int, n: int, sign: int = 1) -> CellMatrix:
    out = cm_identity(n)
    for i in range(r):
        for j in range(n - r):
            x = rr[i][j]
            out[i][r + j] = x if sign > 0 else cell_neg(x)
    return out


def _pole_entries(m: CellMatrix, lo: Fraction, hi: Fraction):
    """(pole, entry, (i, j)) for entries with a pole in the closed cell."""
    out = []
    for i, row in enumerate(m):
        for j, x in enumerate(row):
            for p in cell_poles(x, lo, hi):
                out.append((p, x, (i, j)))
    return out


def _root_key(r: RealRoot) -> Fraction:
    return r.value if r.is_exact else r.lo


# ---------------------------------------------------------------------------
# equal-diagonal groups


def jordan_type(n: CellMatrix) -> list[int]:
    """Generic Jordan block sizes of a nilpotent cell matrix, descending."""
    size = len(n)
    ranks = [size]
    p = cm_identity(size)
    while ranks[-1] > 0:
        p = cm_mul(p, n)
        ranks.append(field_rank(p))
        if ranks[-1] == ranks[-2]:
            raise ValueError("matrix is not nilpotent")
    at_least = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))]
    sizes = []
    for k in range(len(at_least), 0, -1):
        exact = at_least[k - 1] - (at_least[k] if k < len(at_least) else 0)
        sizes.extend([k] * exact)
    return sizes


def poly_kernel(p: PolyMatrix, width: int) -> PolyMatrix:
    """Basis (as columns) of the kernel of p over the polynomial ring."""
    if not p:
        return [[POLY_ONE if i == j else POLY_ZERO for j in range(width)] for i in range(width)]
    reduced, v = column_echelon(p)
    rank = sum(1 for j in range(width) if any(not row[j].is_zero() for row in reduced))
    return [row[rank:] for row in v]


def _transpose(p: PolyMatrix) -> PolyMatrix:
    return [list(r) for r in zip(*p)] if p else []


def _saturate(cols: PolyMatrix, width: int) -> PolyMatrix:
    """Basis of the polynomial vectors in the field span of the given columns."""
    left = _transpose(poly_kernel(_transpose(cols), width))
    return poly_kernel(left, width)


def _poly_power(p: PolyMatrix, k: int) -> PolyMatrix:
    n = len(p)
    out = [[POLY_ONE if i == j else POLY_ZERO for j in range(n)] for i in range(n)]
    for _ in range(k):
        out = poly_matrix_mul(out, p)
    return out


def _is_unit(c: Cell, lo: Fraction, hi: Fraction) -> bool:
    return not cell_is_zero(c) and not has_root_in(c[0], lo, hi) and not has_root_in(c[1], lo, hi)


def _poly_apply(p: PolyMatrix, v: list) -> list:
    return [r[0] for r in poly_matrix_mul(p, [[x] for x in v])]


def _complete_basis(sat: PolyMatrix, m: int) -> PolyMatrix:
    """Columns completing a saturated lattice basis to a unimodular basis."""
    t = len(sat[0])
    _, v = column_echelon(_transpose(sat))
    v_inv = cm_inverse(to_cells(v))
    u_inv = [[v_inv[j][i][0] for j in range(m)] for i in range(m)]
    return [row[t:] for row in u_inv]


def invariant_complement(nc: CellMatrix, sat: PolyMatrix, lo: Fraction, hi: Fraction
                         ) -> CellMatrix | None:
    """Basis [M | C] with C an invariant complement of the invariant lattice M.

    Returns the basis as a cell matrix or None when no complement bounded on
    the cell exists.  With a first complement C₀ the operator reads
    ``[[N_M, X], [0, N_C]]`` and C₀ + M·Y is invariant exactly when
    ``N_M·Y − Y·N_C = −X``; that system is solved over the bounded functions.
    """
    m = len(nc)
    t = len(sat[0])
    if t == m:
        return to_cells(sat)
    c0 = _complete_basis(sat, m)
    b0 = to_cells([sat[i] + c0[i] for i in range(m)])
    b0_inv = cm_inverse(b0)
    conj = cm_mul(cm_mul(b0_inv, nc), b0)
    if not cm_is_zero(cm_block(conj, range(t, m), range(t))):
        return None
    nm = cm_block(conj, range(t), range(t))
    ncc = cm_block(conj, range(t, m), range(t, m))
    x = cm_block(conj, range(t), range(t, m))
    if cm_is_zero(x):
        return b0
    k = m - t
    # unknown Y[i][j] at index i*k + j
    rows: list[list[Cell]] = []
    rhs: list[Cell] = []
    for i in range(t):
        for j in range(k):
            row = [CELL_ZERO] * (t * k)
            for l in range(t):
                if not cell_is_zero(nm[i][l]):
                    row[l * k + j] = cell_add(row[l * k + j], nm[i][l])
            for l in range(k):
                if not cell_is_zero(ncc[l][j]):
                    row[i * k + l] = cell_sub(row[i * k + l], ncc[l][j])
            rows.append(row)
            rhs.append(cell_neg(x[i][j]))
    pm, den = clear_denominators([r + [b] for r, b in zip(rows, rhs)])
    sol = solve_bounded([r[:-1] for r in pm], [r[-1] for r in pm], lo, hi)
    if sol is None:
        return None
    y = [[sol[i * k + j] for j in range(k)] for i in range(t)]
    shift = cm_identity(m)
    for i in range(t):
        for j in range(k):
            shift[i][t + j] = y[i][j]
    return cm_mul(b0, shift)


def _bad_points(np_: PolyMatrix, smax: int, lo: Fraction, hi: Fraction) -> list[Fraction]:
    """Rational points of the cell where some power of the operator drops rank."""
    pts = set()
    pw = np_
    for _ in range(1, smax):
        _, diag, _ = smith_form(pw)
        for d in diag:
            common = real_common_part(d)
            if len(common) > 1:
                for root in RootIsolator(common).isolate(lo, hi):
                    if root.is_exact:
                        pts.add(root.value)
        pw = poly_matrix_mul(pw, np_)
    return sorted(pts)


def _candidate_tops(np_: PolyMatrix, kr: PolyMatrix, t: int, points: list[Fraction]):
    """Chain tops: locally degenerate vectors first, then Smith and basis vectors."""
    m = len(np_)
    width = len(kr[0])
    for c in points:
        at = [[x(c) for x in row] for row in np_]
        base = [[x(c) for x in row] for row in kr]
        power = [[GaussianRational.coerce(1 if i == j else 0) for j in range(m)] for i in range(m)]
        for _ in range(1, t):
            power = [[sum((at[i][l] * power[l][j] for l in range(m)), GaussianRational(0))
                      for j in range(m)] for i in range(m)]
            img = [[sum((power[i][l] * base[l][j] for l in range(m)), GaussianRational(0))
                    for j in range(width)] for i in range(m)]
            for z in nullspace([[cell_constant(x) for x in row] for row in img]):
                yield [sum((kr[i][j].scale(z[j][0].coeffs[0]) for j in range(width)
                            if not cell_is_zero(z[j])), POLY_ZERO) for i in range(m)]
    pw = _poly_power(np_, t - 1)
    mt = poly_matrix_mul(pw, kr)
    if not all(x.is_zero() for r in mt for x in r):
        _, w, _ = smith_pairing(mt)
        yield _poly_apply(kr, w)
    for j in range(width):
        yield [row[j] for row in kr]


def _try_split_chain(nc: CellMatrix, np_: PolyMatrix, t: int, smax: int,
                     points: list[Fraction], lo: Fraction, hi: Fraction):
    m = len(nc)
    if t == smax:
        kr = [[POLY_ONE if i == j else POLY_ZERO for j in range(m)] for i in range(m)]
    else:
        kr = poly_kernel(_poly_power(np_, t), m)
    if not kr or not kr[0]:
        return None
    seen = []
    for w in _candidate_tops(np_, kr, t, points):
        if w in seen:
            continue
        seen.append(w)
        chain = []
        v = w
        for _ in range(t):
            chain.append(v)
            v = _poly_apply(np_, v)
        if any(not x.is_zero() for x in v) or all(x.is_zero() for x in chain[-1]):
            continue
        sat = _saturate(_transpose(chain), m)
        if len(sat[0]) != t:
            continue
        bc = invariant_complement(nc, sat, lo, hi)
        if bc is None:
            continue
        det = cm_det(bc)
        if not _is_unit(det, lo, hi):
            continue
        b_inv = cm_inverse(bc)
        conj = cm_mul(cm_mul(b_inv, nc), bc)
        if m > t and not (cm_is_zero(cm_block(conj, range(t), range(t, m)))
                          and cm_is_zero(cm_block(conj, range(t, m), range(t)))):
            continue
        return bc, b_inv, conj
    return None


def decompose_nilpotent(nc: CellMatrix, lo: Fraction, hi: Fraction
                        ) -> tuple[CellMatrix, CellMatrix, list[int]]:
    """Bounded basis change splitting a nilpotent cell matrix into chains.

    Returns ``(B, B⁻¹, sizes)`` such that ``B⁻¹·nc·B`` is block diagonal, each
    block strictly upper triangular with superdiagonal nonzero almost
    everywhere.  Raises :class:`UnboundedShear` when the column shear of the
    triangular form has a pole and no bounded chain splitting is found.
    """
    m = len(nc)
    if cm_is_zero(nc):
        return cm_identity(m), cm_identity(m), [1] * m
    sizes = jordan_type(nc)
    if len(sizes) == 1:
        x, x_inv, _ = triangularize(nc, [CELL_ZERO] * m)
        return x_inv, x, [m]
    np_, _ = clear_denominators(nc)
    smax = sizes[0]
    points = _bad_points(np_, smax, lo, hi)
    for t in sorted(set(sizes), reverse=True):
        found = _try_split_chain(nc, np_, t, smax, points, lo, hi)
        if found is None:
            continue
        bc, b_inv, conj = found
        top = cm_block(conj, range(t), range(t))
        rest = cm_block(conj, range(t, m), range(t, m))
        tx, tx_inv, _ = triangularize(top, [CELL_ZERO] * t)
        rb, rb_inv, rsizes = decompose_nilpotent(rest, lo, hi)
        inner = cm_direct_sum(tx_inv, rb)
        inner_inv = cm_direct_sum(tx, rb_inv)
        return cm_mul(bc, inner), cm_mul(inner_inv, b_inv), [t] + rsizes
    # no bounded chain splitting: report the column shear of the triangular form
    x, x_inv, tri = triangularize(nc, [CELL_ZERO] * m)
    r = next(k for k in range(1, m) if cell_is_zero(tri[k - 1][k]))
    phi = column_shear(tri, r)
    for i, q in enumerate(phi):
        poles = cell_poles(q, lo, hi)
        if poles:
            raise UnboundedShear(q, poles[0])
    raise Undecided("no bounded splitting of an equal-diagonal group was found")


def column_shear(t: CellMatrix, r: int) -> list[Cell]:
    """Entries φ₀…φ_{r−1} of the shear clearing column ``r`` above the diagonal.

    ``t`` is strictly upper triangular (or has equal diagonal) with
    ``t[r−1][r] = 0`` and nonzero superdiagonal before ``r``; row ``i`` of the
    shear equation reads ``Σ_{i<k<r} t[i][k]·φ_k + t[i][r] = 0``.
    """
    phi = [CELL_ZERO] * r
    for i in range(r - 2, -1, -1):
        acc = t[i][r]
        for k in range(i + 2, r):
            if not cell_is_zero(t[i][k]) and not cell_is_zero(phi[k]):
                acc = cell_add(acc, cell_mul(t[i][k], phi[k]))
        if cell_is_zero(acc):
            continue
        if cell_is_zero(t[i][i + 1]):
            raise DiagonalCollision(f"superdiagonal entry {i} vanishes identically")
        phi[i + 1] = cell_neg(cell_div(acc, t[i][i + 1]))
    return phi


# ---------------------------------------------------------------------------
# one cell


@dataclass
class _CellResult:
    x: CellMatrix
    x_inv: CellMatrix
    perm: list[int]
    blocks: list[Block]
    crossings: list[Fraction]


@dataclass
class _CellObstruction:
    pole: RealRoot
    quotient: Cell
    narrative: str


def _eigen_order(a: CellMatrix, cell: int) -> tuple[list[Cell], bool]:
    """Eigenvalues with multiplicity, and whether ``a`` can be used as it is."""
    n = len(a)
    if _is_upper(a):
        diag = [a[i][i] for i in range(n)]
        seen: list[Cell] = []
        for d in diag:
            if d not in seen:
                seen.append(d)
        grouped = [e for e in seen for d in diag if d == e]
        return grouped, grouped == diag
    roots, left = cell_eigenvalues(a)
    if len(left) > 1:
        raise SpectrumNotSplit(left, cell)
    roots.sort(key=lambda ek: eigen_sort_key(ek[0]))
    return [e for e, k in roots for _ in range(k)], False


def _crossings(eigs: list[Cell], lo: Fraction, hi: Fraction) -> list[Fraction]:
    pts = set()
    distinct = list(dict.fromkeys(eigs))
    for i in range(len(distinct)):
        for j in range(i + 1, len(distinct)):
            diff = cell_sub(distinct[i], distinct[j])
            common = real_common_part(diff[0])
            if len(common) <= 1:
                continue
            for root in RootIsolator(common).isolate(lo, hi):
                if root.is_exact and lo < root.value < hi:
                    pts.add(root.value)
    return sorted(pts)


def canonical_cell(a: CellMatrix, lo: Fraction, hi: Fraction, cell: int = 0
                   ) -> _CellResult | _CellObstruction:
    """Canonical structure of one cell matrix on the closed cell [lo, hi]."""
    n = len(a)
    order, ready = _eigen_order(a, cell)
    if ready:
        x, x_inv, t = cm_identity(n), cm_identity(n), [list(r) for r in a]
    else:
        x, x_inv, t = triangularize(a, order)
    groups: list[tuple[int, int]] = []
    for i, e in enumerate(order):
        if groups and order[groups[-1][0]] == e:
            groups[-1] = (groups[-1][0], groups[-1][1] + 1)
        else:
            groups.append((i, 1))
    # separate the groups with splitting idempotents
    poles = []
    for start, size in groups[:-1]:
        r = size
        sub = cm_block(t, range(start, n), range(start, n))
        rr = splitting_entries(sub, r)
        for p, q, (i, j) in _pole_entries(rr, lo, hi):
            poles.append((p, q, f"splitting idempotent entry ({start + i}, {start + r + j}) "
                                f"= {cell_to_str(q)} has a non-cancelling pole at {p}"))
        m = n - start
        y = cm_identity(n)
        y_inv = cm_identity(n)
        sh, sh_inv = _shear(rr, r, m), _shear(rr, r, m, -1)
        for i in range(m):
            for j in range(m):
                y[start + i][start + j] = sh[i][j]
                y_inv[start + i][start + j] = sh_inv[i][j]
        t = cm_mul(cm_mul(y, t), y_inv)
        x = cm_mul(y, x)
        x_inv = cm_mul(x_inv, y_inv)
    if poles:
        pole, q, text = min(poles, key=lambda p: _root_key(p[0]))
        return _CellObstruction(pole, q, text)
    # decompose every equal-diagonal group into chains
    inner, inner_inv, blocks_meta = [], [], []
    for start, size in groups:
        e = order[start]
        g = cm_block(t, range(start, start + size), range(start, start + size))
        nil = [[cell_sub(g[i][j], e) if i == j else g[i][j] for j in range(size)]
               for i in range(size)]
        try:
            b, b_inv, sizes = decompose_nilpotent(nil, lo, hi)
        except UnboundedShear as exc:
            return _CellObstruction(exc.point, exc.quotient,
                                    f"column shear quotient {cell_to_str(exc.quotient)} "
                                    f"has a non-cancelling pole at {exc.point}")
        inner.append(b_inv)
        inner_inv.append(b)
        off = start
        for s in sizes:
            blocks_meta.append((off, s))
            off += s
    z, z_inv = cm_direct_sum(*inner), cm_direct_sum(*inner_inv)
    x = cm_mul(z, x)
    x_inv = cm_mul(x_inv, z_inv)
    if not (cm_bounded(x, lo, hi) and cm_bounded(x_inv, lo, hi)):
        raise Undecided("constructed similarity is unbounded")
    form = cm_mul(cm_mul(x, a), x_inv)
    raw = [Block(off, tuple(tuple(form[off + i][off + j] for j in range(s)) for i in range(s)))
           for off, s in blocks_meta]
    ordered = sorted(range(len(raw)), key=lambda k: (raw[k].key()[0], -raw[k].size, k))
    perm: list[int] = []
    blocks = []
    for k in ordered:
        b = raw[k]
        blocks.append(Block(len(perm), b.entries))
        perm.extend(range(b.offset, b.offset + b.size))
    return _CellResult(x, x_inv, perm, blocks, _crossings(order, lo, hi))


# ---------------------------------------------------------------------------
# public operations


def _block_projection(n: int, offset: int, size: int) -> CellMatrix:
    out = cm_zero(n)
    for i in range(offset, offset + size):
        out[i][i] = CELL_ONE
    return out


def canonical_form(a: OpMatrix) -> tuple[Frame, CanonicalForm] | FrameObstruction:
    """Canonical local structure of ``a`` or the certificate that none exists."""
    if not a.is_bounded_matrix():
        raise UnboundedInput("operator entries must be bounded on every closed cell")
    n = a.n
    part = a.partition
    results: list[_CellResult] = []
    for k, (lo, hi) in enumerate(part.cells()):
        res = canonical_cell(a.cell(k), lo, hi, k)
        if isinstance(res, _CellObstruction):
            quotient = PiecewiseRational(Partition([lo, hi]), [res.quotient])
            return FrameObstruction(res.pole, quotient, k, res.narrative)
        results.append(res)
    points = [p for r in results for p in r.crossings]
    fine = part.with_points(points) if points else part
    idx = fine.coarse_index(part)
    xs, xis, ps, pis, blocks = [], [], [], [], []
    for k in range(fine.ncells):
        r = results[idx[k]]
        xs.append(r.x)
        xis.append(r.x_inv)
        q = cm_perm_matrix(r.perm)
        ps.append(q)
        pis.append([list(col) for col in zip(*q)])
        blocks.append(tuple(r.blocks))
    cert = SimilarityCertificate(OpMatrix.from_cells(fine, xs), OpMatrix.from_cells(fine, xis), True)
    unitary = SimilarityCertificate(OpMatrix.from_cells(fine, ps), OpMatrix.from_cells(fine, pis), True)
    form = CanonicalForm(cert, unitary, tuple(blocks))
    total = form.total()
    count = max(len(b) for b in blocks)
    elements = []
    supports = []
    for j in range(count):
        cells = []
        sup = []
        for k in range(fine.ncells):
            bl = blocks[k]
            if j < len(bl):
                e = _block_projection(n, bl[j].offset, bl[j].size)
                cells.append(cm_mul(cm_mul(total.x_inv.cell(k), e), total.x.cell(k)))
                sup.append(k)
            else:
                cells.append(cm_zero(n))
        elements.append(OpMatrix.from_cells(fine, cells))
        supports.append(tuple(sup))
    return Frame(tuple(elements), tuple(supports)), form


def frame_exists(a: OpMatrix) -> tuple[bool, Frame | FrameObstruction]:
    res = canonical_form(a)
    if isinstance(res, FrameObstruction):
        return False, res
    return True, res[0]


# ---------------------------------------------------------------------------
# frame validation and extraction


def _align(a: OpMatrix, mats: Sequence[OpMatrix]) -> tuple[OpMatrix, list[OpMatrix]]:
    part = a.partition
    for m in mats:
        part = part.common_refinement(m.partition)
    return a.refine(part), [m.refine(part) for m in mats]


def _range_basis(p: CellMatrix) -> CellMatrix:
    """Columns spanning the range of an idempotent over the field."""
    red, piv = rref([list(col) for col in zip(*p)])
    return [[red[k][i] for k in range(len(piv))] for i in range(len(p))]


def _corner(a: CellMatrix, p: CellMatrix) -> tuple[CellMatrix, CellMatrix, CellMatrix]:
    """Matrix of ``a`` on the range of ``p`` with coordinate maps (in, out)."""
    basis = _range_basis(p)
    k = len(basis[0])
    n = len(p)
    # extend the basis to a square matrix; its inverse gives coordinates
    cols = [[basis[i][j] for i in range(n)] for j in range(k)]
    for c in range(n):
        if len(cols) == n:
            break
        cand = cols + [[CELL_ONE if i == c else CELL_ZERO for i in range(n)]]
        if field_rank(cand) == len(cand):
            cols = cand
    square = [[cols[j][i] for j in range(n)] for i in range(n)]
    inv = cm_inverse(square)
    coords = cm_mul([inv[i] for i in range(k)], p)
    return cm_mul(cm_mul(coords, a), basis), basis, coords


def sub_idempotent_witness(a: CellMatrix, p: CellMatrix) -> CellMatrix | None:
    """A nontrivial idempotent Q ≤ p commuting with ``a`` over the field, if any.

    Such a Q exists exactly when ``a`` restricted to the range of ``p`` has
    more than one eigenvalue or more than one generic Jordan chain.  The
    returned Q is bounded at least on subintervals avoiding its poles, so it
    defeats minimality after a central cut.
    """
    if cm_is_zero(p):
        return None
    ak, basis, coords = _corner(a, p)
    k = len(ak)
    if k == 1:
        return None
    roots, left = cell_eigenvalues(ak)
    if len(left) > 1:
        raise SpectrumNotSplit(left, -1)
    roots.sort(key=lambda ek: eigen_sort_key(ek[0]))
    if len(roots) > 1:
        order = [e for e, m in roots for _ in range(m)]
        x, x_inv, t = triangularize(ak, order)
        r = roots[0][1]
        rr = splitting_entries(t, r)
        e = cm_zero(k)
        for i in range(r):
            e[i][i] = CELL_ONE
            for j in range(k - r):
                e[i][r + j] = rr[i][j]
        local = cm_mul(cm_mul(x_inv, e), x)
    else:
        e0 = roots[0][0]
        nil = [[cell_sub(ak[i][j], e0) if i == j else ak[i][j] for j in range(k)] for i in range(k)]
        if len(jordan_type(nil)) == 1:
            return None
        local = _chain_projection(nil)
    return cm_mul(cm_mul(basis, local), coords)


def _chain_projection(nil: CellMatrix) -> CellMatrix:
    """Field-level idempotent onto one top chain along an invariant complement."""
    m = len(nil)
    sizes = jordan_type(nil)
    s = sizes[0]
    power = cm_identity(m)
    for _ in range(s - 1):
        power = cm_mul(power, nil)
    i, j = next((i, j) for i in range(m) for j in range(m) if not cell_is_zero(power[i][j]))
    w = [CELL_ONE if r == j else CELL_ZERO for r in range(m)]
    f = [CELL_ONE if r == i else CELL_ZERO for r in range(m)]
    chain, rows = [], []
    v, g = w, f
    for _ in range(s):
        chain.append(v)
        rows.append(g)
        v = [_dot(nil[r], v) for r in range(m)]
        g = [_dot(g, [nil[c][col] for c in range(m)]) for col in range(m)]
    chain_m = [[chain[c][r] for c in range(s)] for r in range(m)]
    gram = cm_mul(rows, chain_m)
    return cm_mul(cm_mul(chain_m, cm_inverse(gram)), rows)


def _dot(u: Sequence[Cell], v: Sequence[Cell]) -> Cell:
    acc = CELL_ZERO
    for x, y in zip(u, v):
        if cell_is_zero(x) or cell_is_zero(y):
            continue
        acc = cell_add(acc, cell_mul(x, y))
    return acc


def validate_frame(a: OpMatrix, candidate: Sequence[OpMatrix]) -> Frame:
    """Check the four frame axioms for ``candidate`` and return the Frame."""
    if not candidate:
        raise SumNotIdentity(None)
    a, cands = _align(a, candidate)
    part = a.partition
    n = a.n
    for k, p in enumerate(cands):
        for c in range(part.ncells):
            pc, ac = p.cell(c), a.cell(c)
            if not cm_eq(cm_mul(pc, pc), pc):
                raise NotIdempotent(f"candidate {k} is not idempotent on cell {c}")
            if not cm_eq(cm_mul(ac, pc), cm_mul(pc, ac)):
                raise NotCommuting(k, c)
    for c in range(part.ncells):
        total = cm_zero(n)
        for p in cands:
            total = cm_add(total, p.cell(c))
        if not cm_is_identity(total):
            raise SumNotIdentity(c)
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            for c in range(part.ncells):
                pi, pj = cands[i].cell(c), cands[j].cell(c)
                if not (cm_is_zero(cm_mul(pi, pj)) and cm_is_zero(cm_mul(pj, pi))):
                    raise NotAnnihilating(i, j, c)
    supports = []
    for k, p in enumerate(cands):
        sup = []
        for c in range(part.ncells):
            pc = p.cell(c)
            if cm_is_zero(pc):
                continue
            sup.append(c)
            q = sub_idempotent_witness(a.cell(c), pc)
            if q is not None:
                cells = [q if d == c else cm_zero(n) for d in range(part.ncells)]
                raise NotMinimal(k, OpMatrix.from_cells(part, cells), c)
        supports.append(tuple(sup))
    return Frame(tuple(cands), tuple(supports))


def extract_frame(a: OpMatrix, generators: Sequence[OpMatrix]) -> Frame:
    """Atoms of the boolean algebra generated by commuting idempotents."""
    a, gens = _align(a, generators)
    part = a.partition
    n = a.n
    eye = OpMatrix.identity(n, part)
    gens = [g for g in gens if not g.is_identity()]
    atoms = []
    for signs in product((True, False), repeat=len(gens)):
        atom = eye
        for g, s in zip(gens, signs):
            atom = atom @ (g if s else eye - g)
        if not atom.is_zero():
            atoms.append(atom)
    return validate_frame(a, atoms)
