"""Square matrices over the piecewise-rational field.

An :class:`OpMatrix` keeps all of its entries on one shared partition, so every
algorithm can work cell by cell on plain lists of reduced quotients (the
``CellMatrix`` helpers below) and reassemble the result afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NotIdempotent
from .scalar_field import (
    Cell,
    GR_ZERO,
    GaussianRational,
    Partition,
    PiecewiseRational,
    as_fraction,
    cell_add,
    cell_constant,
    cell_eval,
    cell_has_pole,
    cell_inv,
    cell_is_constant,
    cell_is_one,
    cell_is_zero,
    cell_mul,
    cell_neg,
    cell_sub,
    common_partition,
)

CELL_ZERO = cell_constant(0)
CELL_ONE = cell_constant(1)

CellMatrix = list[list[Cell]]


# ---------------------------------------------------------------------------
# Per-cell matrix helpers


def cm_identity(n: int) -> CellMatrix:
    return [[CELL_ONE if i == j else CELL_ZERO for j in range(n)] for i in range(n)]


def cm_zero(n: int, m: int | None = None) -> CellMatrix:
    return [[CELL_ZERO] * (n if m is None else m) for _ in range(n)]


def cm_copy(a: CellMatrix) -> CellMatrix:
    return [list(row) for row in a]


def cm_mul(a: CellMatrix, b: CellMatrix) -> CellMatrix:
    rows, inner, cols = len(a), len(b), len(b[0]) if b else 0
    out = []
    for i in range(rows):
        ai = a[i]
        row = []
        for j in range(cols):
            acc = CELL_ZERO
            for k in range(inner):
                x = ai[k]
                if cell_is_zero(x):
                    continue
                y = b[k][j]
                if cell_is_zero(y):
                    continue
                acc = cell_add(acc, cell_mul(x, y))
            row.append(acc)
        out.append(row)
    return out


def cm_add(a: CellMatrix, b: CellMatrix) -> CellMatrix:
    return [[cell_add(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def cm_sub(a: CellMatrix, b: CellMatrix) -> CellMatrix:
    return [[cell_sub(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def cm_scale(c: Cell, a: CellMatrix) -> CellMatrix:
    return [[cell_mul(c, x) for x in row] for row in a]


def cm_is_zero(a: CellMatrix) -> bool:
    return all(cell_is_zero(x) for row in a for x in row)


def cm_eq(a: CellMatrix, b: CellMatrix) -> bool:
    return all(x == y for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def cm_is_identity(a: CellMatrix) -> bool:
    return all((cell_is_one(x) if i == j else cell_is_zero(x))
               for i, row in enumerate(a) for j, x in enumerate(row))


def cm_commutator(a: CellMatrix, b: CellMatrix) -> CellMatrix:
    return cm_sub(cm_mul(a, b), cm_mul(b, a))


def cm_permute(a: CellMatrix, perm: Sequence[int]) -> CellMatrix:
    """Return Q a Q⁻¹ where Q sends basis vector perm[i] to position i."""
    return [[a[pi][pj] for pj in perm] for pi in perm]


def cm_perm_matrix(perm: Sequence[int]) -> CellMatrix:
    """Permutation matrix Q with (Q a Q⁻¹)[i][j] = a[perm[i]][perm[j]]."""
    n = len(perm)
    out = cm_zero(n)
    for i, p in enumerate(perm):
        out[i][p] = CELL_ONE
    return out


def cm_inverse(a: CellMatrix) -> CellMatrix | None:
    """Gauss-Jordan inverse over the rational-function field, None if singular."""
    n = len(a)
    m = [list(row) + [CELL_ONE if i == j else CELL_ZERO for j in range(n)]
         for i, row in enumerate(a)]
    for col in range(n):
        piv = None
        best = None
        for r in range(col, n):
            x = m[r][col]
            if cell_is_zero(x):
                continue
            # prefer constant pivots, then low degree, to limit growth
            score = (0 if cell_is_constant(x) else 1, x[0].degree + x[1].degree)
            if best is None or score < best:
                piv, best = r, score
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        inv = cell_inv(m[col][col])
        m[col] = [cell_mul(inv, x) for x in m[col]]
        for r in range(n):
            if r == col:
                continue
            f = m[r][col]
            if cell_is_zero(f):
                continue
            m[r] = [cell_sub(x, cell_mul(f, y)) for x, y in zip(m[r], m[col])]
    return [row[n:] for row in m]


def cm_det(a: CellMatrix) -> Cell:
    n = len(a)
    m = cm_copy(a)
    det = CELL_ONE
    for col in range(n):
        piv = next((r for r in range(col, n) if not cell_is_zero(m[r][col])), None)
        if piv is None:
            return CELL_ZERO
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = cell_neg(det)
        p = m[col][col]
        det = cell_mul(det, p)
        inv = cell_inv(p)
        for r in range(col + 1, n):
            f = m[r][col]
            if cell_is_zero(f):
                continue
            f = cell_mul(f, inv)
            m[r] = [cell_sub(x, cell_mul(f, y)) for x, y in zip(m[r], m[col])]
    return det


def cm_rank(a: CellMatrix) -> int:
    """Rank over the rational-function field."""
    m = cm_copy(a)
    rows = len(m)
    cols = len(m[0]) if m else 0
    rank = 0
    for col in range(cols):
        piv = next((r for r in range(rank, rows) if not cell_is_zero(m[r][col])), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = cell_inv(m[rank][col])
        for r in range(rank + 1, rows):
            f = m[r][col]
            if cell_is_zero(f):
                continue
            f = cell_mul(f, inv)
            m[r] = [cell_sub(x, cell_mul(f, y)) for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def cm_bounded(a: CellMatrix, lo: Fraction, hi: Fraction) -> bool:
    return not any(cell_has_pole(x, lo, hi) for row in a for x in row)


def cm_block(a: CellMatrix, rows: Sequence[int], cols: Sequence[int]) -> CellMatrix:
    return [[a[i][j] for j in cols] for i in rows]


def cm_direct_sum(*blocks: CellMatrix) -> CellMatrix:
    n = sum(len(b) for b in blocks)
    out = cm_zero(n)
    off = 0
    for b in blocks:
        k = len(b)
        for i in range(k):
            for j in range(k):
                out[off + i][off + j] = b[i][j]
        off += k
    return out


# ---------------------------------------------------------------------------
# OpMatrix


@dataclass(frozen=True)
class TraceFunction:
    """Integer rank of an idempotent on each cell."""

    partition: Partition
    values: tuple[int, ...]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TraceFunction):
            return NotImplemented
        if not self.partition.same_interval(other.partition):
            return False
        part = self.partition.common_refinement(other.partition)
        a = [self.values[j] for j in part.coarse_index(self.partition)]
        b = [other.values[j] for j in part.coarse_index(other.partition)]
        return a == b

    def __hash__(self) -> int:
        return hash(self.values)

    def refine(self, partition: Partition) -> "TraceFunction":
        return TraceFunction(partition,
                             tuple(self.values[j] for j in partition.coarse_index(self.partition)))

    def support(self) -> list[int]:
        return [i for i, v in enumerate(self.values) if v > 0]


class OpMatrix:
    """An n×n matrix of :class:`PiecewiseRational` entries on one partition."""

    __slots__ = ("n", "partition", "_cells")

    def __init__(self, entries: Sequence[Sequence], partition: Partition | None = None):
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise DimensionMismatch("entries must form a non-empty square grid")
        funcs = [x for row in entries for x in row if isinstance(x, PiecewiseRational)]
        if partition is None:
            if not funcs:
                raise ValueError("a partition is required for constant entries")
            partition = common_partition(funcs)
        else:
            if funcs:
                partition = partition.common_refinement(common_partition(funcs))
        grid = []
        for row in entries:
            out_row = []
            for x in row:
                if not isinstance(x, PiecewiseRational):
                    x = PiecewiseRational.constant(x, partition)
                out_row.append(x.refine(partition))
            grid.append(out_row)
        self.n = n
        self.partition = partition
        self._cells = tuple(
            [[grid[i][j].cells[k] for j in range(n)] for i in range(n)]
            for k in range(partition.ncells))

    @classmethod
    def from_cells(cls, partition: Partition, cells: Sequence[CellMatrix]) -> "OpMatrix":
        if len(cells) != partition.ncells:
            raise ValueError("one cell matrix per partition cell is required")
        obj = object.__new__(cls)
        obj.n = len(cells[0])
        obj.partition = partition
        obj._cells = tuple([list(row) for row in c] for c in cells)
        return obj

    @classmethod
    def identity(cls, n: int, partition: Partition) -> "OpMatrix":
        return cls.from_cells(partition, [cm_identity(n) for _ in range(partition.ncells)])

    @classmethod
    def zero(cls, n: int, partition: Partition) -> "OpMatrix":
        return cls.from_cells(partition, [cm_zero(n) for _ in range(partition.ncells)])

    @classmethod
    def diagonal(cls, values: Sequence, partition: Partition | None = None) -> "OpMatrix":
        n = len(values)
        return cls([[values[i] if i == j else 0 for j in range(n)] for i in range(n)],
                   partition)

    @classmethod
    def direct_sum(cls, *mats: "OpMatrix") -> "OpMatrix":
        part = common_partition(mats)
        mats = [m.refine(part) for m in mats]
        return cls.from_cells(part, [cm_direct_sum(*[m.cell(k) for m in mats])
                                     for k in range(part.ncells)])

    # access ---------------------------------------------------------------

    def cell(self, k: int) -> CellMatrix:
        """The k-th cell as a fresh list-of-lists of reduced quotients."""
        return [list(row) for row in self._cells[k]]

    def cells(self) -> list[CellMatrix]:
        return [self.cell(k) for k in range(self.partition.ncells)]

    def entry(self, i: int, j: int) -> PiecewiseRational:
        return PiecewiseRational._raw(self.partition, [c[i][j] for c in self._cells])

    def __getitem__(self, ij: tuple[int, int]) -> PiecewiseRational:
        return self.entry(*ij)

    @property
    def entries(self) -> list[list[PiecewiseRational]]:
        return [[self.entry(i, j) for j in range(self.n)] for i in range(self.n)]

    def refine(self, partition: Partition) -> "OpMatrix":
        if partition is self.partition or partition == self.partition:
            return self
        if not partition.refines(self.partition):
            raise ValueError("target partition does not refine the matrix partition")
        idx = partition.coarse_index(self.partition)
        return OpMatrix.from_cells(partition, [self._cells[j] for j in idx])

    def restrict(self, lo, hi) -> "OpMatrix":
        lo, hi = as_fraction(lo), as_fraction(hi)
        part = self.partition.with_points((lo, hi))
        m = self.refine(part)
        keep = [i for i, (s, t) in enumerate(part.cells()) if lo <= s and t <= hi]
        bps = [part.breakpoints[keep[0]]] + [part.breakpoints[i + 1] for i in keep]
        return OpMatrix.from_cells(Partition(bps), [m._cells[i] for i in keep])

    def map_cells(self, fn: Callable[[CellMatrix], CellMatrix]) -> "OpMatrix":
        return OpMatrix.from_cells(self.partition, [fn(self.cell(k))
                                                    for k in range(self.partition.ncells)])

    def simplify(self) -> "OpMatrix":
        """Merge adjacent cells that carry identical matrices."""
        bps = [self.partition.breakpoints[0]]
        cells: list = []
        for k, c in enumerate(self._cells):
            if cells and cm_eq(cells[-1], c):
                bps[-1] = self.partition.breakpoints[k + 1]
            else:
                cells.append(c)
                bps.append(self.partition.breakpoints[k + 1])
        if len(cells) == len(self._cells):
            return self
        return OpMatrix.from_cells(Partition(bps), cells)

    # arithmetic -----------------------------------------------------------

    def _align(self, other: "OpMatrix") -> tuple["OpMatrix", "OpMatrix"]:
        if self.n != other.n:
            raise DimensionMismatch(f"dimension {self.n} vs {other.n}")
        if self.partition == other.partition:
            return self, other
        part = self.partition.common_refinement(other.partition)
        return self.refine(part), other.refine(part)

    def _zip(self, other: "OpMatrix", fn) -> "OpMatrix":
        a, b = self._align(other)
        return OpMatrix.from_cells(a.partition, [fn(x, y) for x, y in zip(a._cells, b._cells)])

    def __matmul__(self, other: "OpMatrix") -> "OpMatrix":
        return self._zip(other, cm_mul)

    def __add__(self, other: "OpMatrix") -> "OpMatrix":
        return self._zip(other, cm_add)

    def __sub__(self, other: "OpMatrix") -> "OpMatrix":
        return self._zip(other, cm_sub)

    def __neg__(self) -> "OpMatrix":
        return self.map_cells(lambda c: [[cell_neg(x) for x in row] for row in c])

    def scale(self, f) -> "OpMatrix":
        if not isinstance(f, PiecewiseRational):
            f = PiecewiseRational.constant(f, self.partition)
        part = self.partition.common_refinement(f.partition)
        a, g = self.refine(part), f.refine(part)
        return OpMatrix.from_cells(part, [cm_scale(c, m) for c, m in zip(g.cells, a._cells)])

    def __mul__(self, f) -> "OpMatrix":
        return self.scale(f)

    __rmul__ = __mul__

    def transpose(self) -> "OpMatrix":
        return self.map_cells(lambda c: [list(r) for r in zip(*c)])

    def adjoint(self) -> "OpMatrix":
        """Conjugate transpose (for real λ)."""
        return self.map_cells(lambda c: [[(x[0].conjugate(), x[1].conjugate()) for x in r]
                                         for r in zip(*c)])

    def permuted(self, perm: Sequence[int]) -> "OpMatrix":
        return self.map_cells(lambda c: cm_permute(c, perm))

    def submatrix(self, rows: Sequence[int], cols: Sequence[int] | None = None) -> "OpMatrix":
        cols = rows if cols is None else cols
        obj = object.__new__(OpMatrix)
        obj.n = len(rows)
        obj.partition = self.partition
        obj._cells = tuple(cm_block(c, rows, cols) for c in self._cells)
        return obj

    def inverse(self) -> "OpMatrix | None":
        cells = []
        for c in self._cells:
            inv = cm_inverse(c)
            if inv is None:
                return None
            cells.append(inv)
        return OpMatrix.from_cells(self.partition, cells)

    def det(self) -> PiecewiseRational:
        return PiecewiseRational._raw(self.partition, [cm_det(c) for c in self._cells])

    def conjugate_by(self, x: "OpMatrix", x_inv: "OpMatrix") -> "OpMatrix":
        return x @ self @ x_inv

    # predicates -----------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, OpMatrix):
            return NotImplemented
        if self.n != other.n or not self.partition.same_interval(other.partition):
            return False
        a, b = self._align(other)
        return all(cm_eq(x, y) for x, y in zip(a._cells, b._cells))

    __hash__ = None

    def is_zero(self) -> bool:
        return all(cm_is_zero(c) for c in self._cells)

    def is_identity(self) -> bool:
        return all(cm_is_identity(c) for c in self._cells)

    def is_diagonal(self) -> bool:
        return all(cell_is_zero(c[i][j]) for c in self._cells
                   for i in range(self.n) for j in range(self.n) if i != j)

    def is_upper_triangular(self) -> bool:
        return all(cell_is_zero(c[i][j]) for c in self._cells
                   for i in range(self.n) for j in range(i))

    def is_idempotent(self) -> bool:
        return all(cm_eq(cm_mul(c, c), c) for c in self._cells)

    def commutes(self, other: "OpMatrix") -> bool:
        a, b = self._align(other)
        return all(cm_is_zero(cm_commutator(x, y)) for x, y in zip(a._cells, b._cells))

    def is_bounded_matrix(self) -> bool:
        return all(cm_bounded(c, lo, hi)
                   for c, (lo, hi) in zip(self._cells, self.partition.cells()))

    def is_invertible_bounded(self) -> bool:
        if not self.is_bounded_matrix():
            return False
        inv = self.inverse()
        return inv is not None and inv.is_bounded_matrix()

    def trace(self) -> PiecewiseRational:
        cells = []
        for c in self._cells:
            acc = CELL_ZERO
            for i in range(self.n):
                acc = cell_add(acc, c[i][i])
            cells.append(acc)
        return PiecewiseRational._raw(self.partition, cells)

    def trace_function(self) -> TraceFunction:
        if not self.is_idempotent():
            raise NotIdempotent("trace function requires an idempotent")
        values = []
        for (n, d) in self.trace().cells:
            if not d.is_one() or n.degree > 0:
                raise NotIdempotent("diagonal sum is not constant on a cell")
            v = n.coeffs[0] if n.coeffs else GR_ZERO
            if v.im or v.re.denominator != 1 or not 0 <= v.re <= self.n:
                raise NotIdempotent(f"diagonal sum {v} is not a rank")
            values.append(int(v.re))
        return TraceFunction(self.partition, tuple(values))

    def is_central_projection(self) -> bool:
        for c in self._cells:
            if cm_is_zero(c):
                continue
            if not cm_is_identity(c):
                return False
        return True

    # evaluation -----------------------------------------------------------

    def evaluate(self, x, cell: int | None = None) -> list[list[GaussianRational]]:
        x = as_fraction(x)
        k = self.partition.locate(x) if cell is None else cell
        return [[cell_eval(e, x) for e in row] for row in self._cells[k]]

    def to_numpy(self, x, cell: int | None = None) -> np.ndarray:
        """Exact evaluation at a rational point, rounded once to complex128."""
        vals = self.evaluate(x, cell)
        return np.array([[complex(v) for v in row] for row in vals], dtype=complex)

    def eval_float(self, x: float, cell: int | None = None) -> np.ndarray:
        """Double-precision evaluation of every entry (Horner in floating point)."""
        k = self.partition.locate(Fraction(x)) if cell is None else cell
        out = np.empty((self.n, self.n), dtype=complex)
        for i, row in enumerate(self._cells[k]):
            for j, (num, den) in enumerate(row):
                out[i, j] = num.eval_float(x) / den.eval_float(x)
        return out

    def max_degree(self) -> int:
        return max(max(x[0].degree, x[1].degree) for c in self._cells for row in c for x in row)

    def __repr__(self) -> str:
        return f"OpMatrix(n={self.n}, partition={self.partition})"

    def __str__(self) -> str:
        rows = []
        for i in range(self.n):
            rows.append("[" + ", ".join(str(self.entry(i, j)) for j in range(self.n)) + "]")
        return "[" + ", ".join(rows) + "]"


# ---------------------------------------------------------------------------
# functional forms


def matmul(a: OpMatrix, b: OpMatrix) -> OpMatrix:
    return a @ b


def add(a: OpMatrix, b: OpMatrix) -> OpMatrix:
    return a + b


def scalar_mul(f, a: OpMatrix) -> OpMatrix:
    return a.scale(f)


def is_idempotent(p: OpMatrix) -> bool:
    return p.is_idempotent()


def trace_function(p: OpMatrix) -> TraceFunction:
    return p.trace_function()


def is_central_projection(e: OpMatrix) -> bool:
    return e.is_central_projection()


def commutes(a: OpMatrix, b: OpMatrix) -> bool:
    return a.commutes(b)


def is_bounded_matrix(a: OpMatrix) -> bool:
    return a.is_bounded_matrix()


def is_invertible_bounded(a: OpMatrix) -> bool:
    return a.is_invertible_bounded()


def op_from_rows(rows: Iterable[Iterable], partition: Partition) -> OpMatrix:
    """Build a matrix whose entries are scalars or coefficient-list polynomials."""
    from .scalar_field import Poly

    out = []
    for row in rows:
        r = []
        for x in row:
            if isinstance(x, PiecewiseRational):
                r.append(x)
            elif isinstance(x, Poly):
                r.append(PiecewiseRational.rational(x, [1], partition))
            elif isinstance(x, (list, tuple)):
                r.append(PiecewiseRational.rational(list(x), [1], partition))
            else:
                r.append(PiecewiseRational.constant(x, partition))
        out.append(r)
    return OpMatrix(out, partition)
