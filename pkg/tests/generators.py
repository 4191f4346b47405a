"""Random instance generators shared by the test modules."""

from __future__ import annotations

import random
from fractions import Fraction

from ovjordan.opmatrix import OpMatrix
from ovjordan.scalar_field import Partition, PiecewiseRational, Poly


def random_partition(rng: random.Random, max_cells: int = 4, a=0, b=1) -> Partition:
    k = rng.randint(1, max_cells)
    inner = set()
    while len(inner) < k - 1:
        inner.add(Fraction(rng.randint(1, 23), 24) * (b - a) + a)
    return Partition([a, *sorted(inner), b])


def random_poly(rng: random.Random, degree: int, lo: int = -2, hi: int = 2) -> Poly:
    return Poly([Fraction(rng.randint(lo, hi), rng.choice((1, 1, 2))) for _ in range(degree + 1)])


def elementary(n: int, i: int, j: int, f: PiecewiseRational, partition: Partition) -> OpMatrix:
    rows = [[1 if r == c else 0 for c in range(n)] for r in range(n)]
    rows[i][j] = f
    return OpMatrix(rows, partition)


def random_unipotent(rng: random.Random, n: int, partition: Partition, factors: int = 2,
                     degree: int = 1) -> OpMatrix:
    """Product of elementary unipotent matrices with polynomial entries, per cell."""
    x = OpMatrix.identity(n, partition)
    if n < 2:
        return x
    for _ in range(factors):
        i, j = rng.sample(range(n), 2)
        cells = [random_poly(rng, rng.randint(0, degree)) for _ in range(partition.ncells)]
        f = PiecewiseRational(partition, cells)
        x = elementary(n, i, j, f, partition) @ x
    return x


def random_idempotent(rng: random.Random, n: int, partition: Partition, max_degree: int = 3
                      ) -> tuple[OpMatrix, OpMatrix]:
    """A bounded idempotent S·D·S⁻¹ whose entries have degree at most ``max_degree``."""
    while True:
        ranks = [rng.randint(0, n) for _ in range(partition.ncells)]
        diag = []
        for i in range(n):
            diag.append(PiecewiseRational(partition, [1 if i < r else 0 for r in ranks]))
        d = OpMatrix.diagonal(diag, partition)
        perm = list(range(n))
        rng.shuffle(perm)
        d = d.permuted(perm)
        s = random_unipotent(rng, n, partition, factors=rng.randint(1, n), degree=1)
        p = s @ d @ s.inverse()
        if p.max_degree() <= max_degree:
            return p, s


def _superdiagonal_choice(rng: random.Random, lo: Fraction, hi: Fraction) -> Poly:
    kind = rng.randint(0, 3)
    if kind == 0:
        return Poly([rng.choice((1, 2, -1))])
    if kind == 1:
        return Poly([rng.choice((1, 2, 3)), 1])
    mid = (lo + hi) / 2
    if kind == 2:
        return Poly([-mid, 1])
    return Poly([-lo, 1])


def random_jordan_blocks(rng: random.Random, n: int, lo: Fraction, hi: Fraction
                         ) -> list[list[list[Poly]]]:
    """Upper triangular blocks with equal diagonals and nonvanishing superdiagonals."""
    sizes = []
    left = n
    while left:
        s = rng.randint(1, min(3, left))
        sizes.append(s)
        left -= s
    diagonals = [random_poly(rng, rng.randint(0, 1)) for _ in range(rng.randint(1, len(sizes)))]
    blocks = []
    for s in sizes:
        e = rng.choice(diagonals)
        b = [[Poly(()) for _ in range(s)] for _ in range(s)]
        for i in range(s):
            b[i][i] = e
            if i + 1 < s:
                b[i][i + 1] = _superdiagonal_choice(rng, lo, hi)
            for j in range(i + 2, s):
                b[i][j] = random_poly(rng, rng.randint(0, 1), -1, 1)
        blocks.append(b)
    return blocks


def random_jordan_sum(rng: random.Random, n: int, partition: Partition, factors: int = 3
                      ) -> tuple[OpMatrix, list[list[tuple[Poly, int]]]]:
    """S·(⊕ blocks)·S⁻¹ for a random unipotent S, with the per-cell block profile."""
    cells = []
    profiles = []
    for lo, hi in partition.cells():
        blocks = random_jordan_blocks(rng, n, lo, hi)
        grid = [[(Poly(()), Poly([1])) for _ in range(n)] for _ in range(n)]
        off = 0
        for b in blocks:
            for i, row in enumerate(b):
                for j, p in enumerate(row):
                    grid[off + i][off + j] = (p, Poly([1]))
            off += len(b)
        cells.append(grid)
        profiles.append(sorted(((b[0][0], len(b)) for b in blocks), key=repr))
    d = OpMatrix.from_cells(partition, cells)
    s = random_unipotent(rng, n, partition, factors=factors, degree=1)
    return s @ d @ s.inverse(), profiles


def random_canonical(rng: random.Random, sizes: list[int], partition: Partition,
                     diagonals: list[Poly] | None = None) -> OpMatrix:
    """Direct sum of upper triangular Jordan-like blocks, cell by cell."""
    n = sum(sizes)
    if diagonals is None:
        diagonals = [Poly([0, 1])] * len(sizes)
    cells = []
    for lo, hi in partition.cells():
        grid = [[(Poly(()), Poly([1])) for _ in range(n)] for _ in range(n)]
        off = 0
        for s, e in zip(sizes, diagonals):
            for i in range(s):
                grid[off + i][off + i] = (e, Poly([1]))
                if i + 1 < s:
                    grid[off + i][off + i + 1] = (_superdiagonal_choice(rng, lo, hi), Poly([1]))
                for j in range(i + 2, s):
                    grid[off + i][off + j] = (random_poly(rng, rng.randint(0, 1), -1, 1), Poly([1]))
            off += s
        cells.append(grid)
    return OpMatrix.from_cells(partition, cells)


def random_commutant_invertible(rng: random.Random, a: OpMatrix, module=None, tries: int = 200
                                ) -> OpMatrix:
    """A random invertible bounded element I + M of the commutant of ``a``."""
    from ovjordan.commutant import solve_commutant

    module = module or solve_commutant(a)
    eye = OpMatrix.identity(a.n, a.partition)
    for _ in range(tries):
        coeffs = []
        for k in range(a.partition.ncells):
            dim = module.dimension(k)
            coeffs.append([rng.randint(-2, 2) if rng.random() < 0.6 else 0 for _ in range(dim)])
        s = eye + module.combine(coeffs)
        if s.is_bounded_matrix() and s.is_invertible_bounded():
            return s
    return eye
