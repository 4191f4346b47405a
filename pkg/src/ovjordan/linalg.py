"""Exact linear algebra over the rational-function field and its polynomial ring.

Helpers shared by the structure, commutant and K-theory modules:

* null spaces over the field of rational functions;
* unimodular (polynomial, constant-determinant) transformations, which are
  bounded with bounded inverse on every interval;
* Smith-style pairings used to split off Jordan chains;
* characteristic polynomials and exact eigenvalue functions obtained by
  power-series lifting from a regular evaluation point.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .opmatrix import CELL_ONE, CELL_ZERO, CellMatrix
from .scalar_field import (
    GR_ZERO,
    Cell,
    GaussianRational,
    POLY_ONE,
    POLY_ZERO,
    Poly,
    RootIsolator,
    cell_add,
    cell_inv,
    cell_is_zero,
    cell_mul,
    cell_neg,
    cell_sub,
    real_common_part,
    reduce_cell,
)

PolyMatrix = list[list[Poly]]


# ---------------------------------------------------------------------------
# field-level elimination


def rref(m: CellMatrix) -> tuple[CellMatrix, list[int]]:
    """Reduced row echelon form over the field; returns (matrix, pivot columns)."""
    a = [list(r) for r in m]
    rows = len(a)
    cols = len(a[0]) if a else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        piv = None
        best = None
        for i in range(r, rows):
            x = a[i][c]
            if cell_is_zero(x):
                continue
            score = x[0].degree + x[1].degree
            if best is None or score < best:
                piv, best = i, score
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = cell_inv(a[r][c])
        a[r] = [cell_mul(inv, x) if not cell_is_zero(x) else x for x in a[r]]
        for i in range(rows):
            if i == r or cell_is_zero(a[i][c]):
                continue
            f = a[i][c]
            a[i] = [cell_sub(x, cell_mul(f, y)) if not cell_is_zero(y) else x
                    for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, pivots


def nullspace(m: CellMatrix) -> list[list[Cell]]:
    """Basis of the right null space over the field (one list per vector)."""
    cols = len(m[0]) if m else 0
    a, pivots = rref(m)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = [CELL_ZERO] * cols
        v[fc] = CELL_ONE
        for row, pc in enumerate(pivots):
            if not cell_is_zero(a[row][fc]):
                v[pc] = cell_neg(a[row][fc])
        basis.append(v)
    return basis


def field_rank(m: CellMatrix) -> int:
    return len(rref(m)[1])


def solve(m: CellMatrix, b: list[Cell]) -> list[Cell] | None:
    """One solution x of m·x = b over the field, or None."""
    aug = [list(r) + [bi] for r, bi in zip(m, b)]
    cols = len(m[0])
    a, pivots = rref(aug)
    if cols in pivots:
        return None
    x = [CELL_ZERO] * cols
    for row, pc in enumerate(pivots):
        x[pc] = a[row][cols]
    return x


# ---------------------------------------------------------------------------
# polynomial vectors and matrices


def to_cells(m: PolyMatrix) -> CellMatrix:
    return [[(p, POLY_ONE) for p in row] for row in m]


def common_denominator(cells: Sequence[Cell]) -> Poly:
    den = POLY_ONE
    for _, d in cells:
        if d.is_one():
            continue
        g = den.gcd(d)
        den = (den * d) // g
    return den


def primitive_vector(vec: Sequence[Cell]) -> list[Poly]:
    """Scale a field vector to polynomial entries without common factor."""
    den = common_denominator(vec)
    polys = []
    for n, d in vec:
        if n.is_zero():
            polys.append(POLY_ZERO)
        else:
            polys.append(n * (den // d))
    g = POLY_ZERO
    for p in polys:
        g = g.gcd(p)
        if g.degree == 0:
            break
    if g.degree > 0:
        polys = [p // g for p in polys]
    lead = next(p for p in polys if not p.is_zero())
    inv = lead.lc.inverse()
    return [p.scale(inv) for p in polys]


def xgcd(a: Poly, b: Poly) -> tuple[Poly, Poly, Poly]:
    """(g, s, t) with s·a + t·b = g, g monic."""
    r0, r1 = a, b
    s0, s1 = POLY_ONE, POLY_ZERO
    t0, t1 = POLY_ZERO, POLY_ONE
    while not r1.is_zero():
        q, r = r0.divmod(r1)
        r0, r1 = r1, r
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if r0.is_zero():
        return r0, s0, t0
    inv = r0.lc.inverse()
    return r0.scale(inv), s0.scale(inv), t0.scale(inv)


def _pm_identity(n: int) -> PolyMatrix:
    return [[POLY_ONE if i == j else POLY_ZERO for j in range(n)] for i in range(n)]


def unimodular_completion(v: Sequence[Poly]) -> tuple[PolyMatrix, PolyMatrix]:
    """Unimodular U with U·v = e₁ for a primitive polynomial vector v.

    Returns (U, U⁻¹); the first column of U⁻¹ is v.
    """
    n = len(v)
    v = list(v)
    u = _pm_identity(n)
    u_inv = _pm_identity(n)
    while True:
        nz = [i for i in range(n) if not v[i].is_zero()]
        if not nz:
            raise ValueError("zero vector has no completion")
        p = min(nz, key=lambda i: (v[i].degree, i))
        others = [i for i in nz if i != p]
        if not others:
            break
        for i in others:
            q = v[i] // v[p]
            if q.is_zero():
                continue
            # row_i -= q row_p
            v[i] = v[i] - q * v[p]
            u[i] = [x - q * y for x, y in zip(u[i], u[p])]
            for r in range(n):
                u_inv[r][p] = u_inv[r][p] + u_inv[r][i] * q
    if v[p].degree != 0:
        raise ValueError("vector is not primitive")
    c = v[p].coeffs[0]
    if p != 0:
        v[0], v[p] = v[p], v[0]
        u[0], u[p] = u[p], u[0]
        for r in range(n):
            u_inv[r][0], u_inv[r][p] = u_inv[r][p], u_inv[r][0]
    inv = c.inverse()
    u[0] = [x.scale(inv) for x in u[0]]
    for r in range(n):
        u_inv[r][0] = u_inv[r][0].scale(c)
    return u, u_inv


def smith_pairing(m: PolyMatrix) -> tuple[list[Poly], list[Poly], Poly]:
    """Vectors f, w with f·m·w = d₁, the monic gcd of all entries of m."""
    rows, cols = len(m), len(m[0])
    a = [list(r) for r in m]
    p = _pm_identity(rows)
    q = _pm_identity(cols)
    if all(x.is_zero() for r in a for x in r):
        raise ValueError("zero matrix")
    while True:
        i0, j0 = min(((i, j) for i in range(rows) for j in range(cols) if not a[i][j].is_zero()),
                     key=lambda ij: (a[ij[0]][ij[1]].degree, ij))
        a[0], a[i0] = a[i0], a[0]
        p[0], p[i0] = p[i0], p[0]
        for r in a:
            r[0], r[j0] = r[j0], r[0]
        for r in q:
            r[0], r[j0] = r[j0], r[0]
        changed = False
        piv = a[0][0]
        for i in range(1, rows):
            if a[i][0].is_zero():
                continue
            t = a[i][0] // piv
            a[i] = [x - t * y for x, y in zip(a[i], a[0])]
            p[i] = [x - t * y for x, y in zip(p[i], p[0])]
            if not a[i][0].is_zero():
                changed = True
        for j in range(1, cols):
            if a[0][j].is_zero():
                continue
            t = a[0][j] // piv
            for r in a:
                r[j] = r[j] - t * r[0]
            for r in q:
                r[j] = r[j] - t * r[0]
            if not a[0][j].is_zero():
                changed = True
        if changed:
            continue
        bad = next(((i, j) for i in range(1, rows) for j in range(1, cols)
                    if not (a[i][j] % piv).is_zero()), None)
        if bad is None:
            break
        i = bad[0]
        a[0] = [x + y for x, y in zip(a[0], a[i])]
        p[0] = [x + y for x, y in zip(p[0], p[i])]
    d = a[0][0]
    inv = d.lc.inverse()
    f = [x.scale(inv) for x in p[0]]
    w = [q[r][0] for r in range(cols)]
    return f, w, d.monic()


def column_echelon(f: PolyMatrix) -> tuple[PolyMatrix, PolyMatrix]:
    """Unimodular V with f·V = [L | 0], L lower triangular; returns (f·V, V)."""
    rows, cols = len(f), len(f[0])
    a = [list(r) for r in f]
    v = _pm_identity(cols)
    c0 = 0
    for i in range(rows):
        if c0 >= cols:
            break
        while True:
            nz = [j for j in range(c0, cols) if not a[i][j].is_zero()]
            if not nz:
                break
            p = min(nz, key=lambda j: (a[i][j].degree, j))
            others = [j for j in nz if j != p]
            if not others:
                if p != c0:
                    for r in a:
                        r[c0], r[p] = r[p], r[c0]
                    for r in v:
                        r[c0], r[p] = r[p], r[c0]
                c0 += 1
                break
            for j in others:
                t = a[i][j] // a[i][p]
                for r in a:
                    r[j] = r[j] - t * r[p]
                for r in v:
                    r[j] = r[j] - t * r[p]
    return a, v


def poly_matrix_mul(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    inner = len(b)
    cols = len(b[0])
    out = []
    for row in a:
        r = []
        for j in range(cols):
            acc = POLY_ZERO
            for k in range(inner):
                if row[k].is_zero() or b[k][j].is_zero():
                    continue
                acc = acc + row[k] * b[k][j]
            r.append(acc)
        out.append(r)
    return out


def clear_denominators(m: CellMatrix) -> tuple[PolyMatrix, Poly]:
    """(P, D) with m = P / D, D monic and P polynomial."""
    den = common_denominator([x for r in m for x in r])
    return [[n * (den // d) if not n.is_zero() else POLY_ZERO for n, d in r] for r in m], den


def has_root_in(p: Poly, lo: Fraction, hi: Fraction) -> bool:
    if p.degree <= 0:
        return p.is_zero()
    common = real_common_part(p)
    if len(common) <= 1:
        return False
    return RootIsolator(common).has_root_closed(lo, hi)


# ---------------------------------------------------------------------------
# characteristic polynomial and eigenvalue functions

BivPoly = list[Poly]  # coefficients in t (ascending), each a polynomial in λ


def charpoly(m: PolyMatrix) -> BivPoly:
    """det(t·I − m) via Faddeev-LeVerrier; ascending in t, monic."""
    n = len(m)
    coeffs = [POLY_ZERO] * (n + 1)
    coeffs[n] = POLY_ONE
    mk = _pm_identity(n)
    for k in range(1, n + 1):
        am = poly_matrix_mul(m, mk)
        tr = POLY_ZERO
        for i in range(n):
            tr = tr + am[i][i]
        c = tr.scale(GaussianRational(Fraction(-1, k)))
        coeffs[n - k] = c
        mk = [[am[i][j] + (c if i == j else POLY_ZERO) for j in range(n)] for i in range(n)]
    return coeffs


def biv_eval_lambda(f: BivPoly, x) -> list[GaussianRational]:
    return [c(x) for c in f]


def biv_derivative_t(f: BivPoly) -> BivPoly:
    return [c.scale(k) for k, c in enumerate(f) if k]


def biv_subs_t(f: BivPoly, e: Poly) -> Poly:
    """f(λ, e(λ)) as a polynomial in λ."""
    acc = POLY_ZERO
    for c in reversed(f):
        acc = acc * e + c
    return acc


def biv_divide_linear(f: BivPoly, e: Poly) -> tuple[BivPoly, Poly]:
    """Divide by (t − e(λ)); returns (quotient, remainder)."""
    n = len(f) - 1
    q = [POLY_ZERO] * n
    carry = POLY_ZERO
    for k in range(n, 0, -1):
        carry = f[k] + carry * e if k < n else f[k]
        q[k - 1] = carry
    rem = f[0] + carry * e
    return q, rem


def _univariate_roots_gaussian_integer(coeffs: list[GaussianRational]) -> list[GaussianRational]:
    """Gaussian-integer roots of a monic polynomial with Gaussian-integer coefficients."""
    p = Poly(coeffs)
    if p.degree <= 0:
        return []
    sqf = p // p.gcd(p.derivative()) if p.degree > 1 else p
    sqf = sqf.monic()
    arr = np.array([complex(c) for c in reversed(sqf.coeffs)])
    out = []
    for z in np.roots(arr) if len(arr) > 1 else []:
        cand = GaussianRational(round(z.real), round(z.imag))
        if not sqf(cand) and cand not in out:
            out.append(cand)
    return out


def _series_root(f: BivPoly, x0: Fraction, e0: GaussianRational, order: int
                 ) -> list[GaussianRational] | None:
    """Power-series root of f(x0 + h, t) through e0, truncated at h^order."""
    shifted = [c.compose_affine(1, x0) for c in f]
    fprime = biv_derivative_t(shifted)
    d0 = Poly([c.coeffs[0] if c.coeffs else GR_ZERO for c in fprime])(e0)
    if not d0:
        return None
    inv = d0.inverse()
    series = [e0]
    for j in range(1, order + 1):
        e = Poly(series)
        val = biv_subs_t(shifted, e)
        cj = val.coeffs[j] if j < len(val.coeffs) else GR_ZERO
        series.append(-cj * inv)
    return series


def eigenvalue_functions(m: PolyMatrix, seed_points: Sequence[int] = (3, -5, 7, 11, -13, 17, 19, 23)
                         ) -> tuple[list[tuple[Poly, int]], BivPoly]:
    """Polynomial eigenvalue functions of a polynomial matrix with multiplicities.

    Returns ``(roots, leftover)`` where ``leftover`` is the monic factor of the
    characteristic polynomial that has no root in the field (degree 0 when the
    spectrum splits).  Every reported root is verified by exact division.
    """
    n = len(m)
    den = 1
    for r in m:
        for p in r:
            for c in p.coeffs:
                den = lcm(den, c.re.denominator, c.im.denominator)
    scaled = [[p.scale(den) for p in r] for r in m]
    chi = charpoly(scaled)
    bound = 0
    for k in range(1, n + 1):
        c = chi[n - k]
        if not c.is_zero():
            bound = max(bound, -(-c.degree // k))
    found: list[tuple[Poly, int]] = []
    remaining = chi
    for x0 in seed_points:
        if len(remaining) <= 1:
            break
        deriv = remaining
        for mult in range(1, len(remaining)):
            vals = biv_eval_lambda(deriv, x0)
            for e0 in _univariate_roots_gaussian_integer(vals):
                series = _series_root(deriv, Fraction(x0), e0, bound)
                if series is None:
                    continue
                e = Poly(series).compose_affine(1, -x0)
                if e.degree > bound:
                    continue
                k = 0
                q = remaining
                while len(q) > 1:
                    q2, rem = biv_divide_linear(q, e)
                    if not rem.is_zero():
                        break
                    q = q2
                    k += 1
                if k:
                    found.append((e, k))
                    remaining = q
            if len(remaining) <= 1:
                break
            deriv = biv_derivative_t(deriv)
            if len(deriv) <= 1:
                break
    inv = GaussianRational(Fraction(1, den))
    roots = {}
    for e, k in found:
        e = e.scale(inv)
        roots[e] = roots.get(e, 0) + k
    left = [c for c in remaining]
    return list(roots.items()), left


def cell_eigenvalues(a: CellMatrix) -> tuple[list[tuple[Cell, int]], BivPoly]:
    """Eigenvalue functions (as reduced quotients) of a cell matrix."""
    pm, den = clear_denominators(a)
    roots, left = eigenvalue_functions(pm)
    out = [(reduce_cell(e, den), k) for e, k in roots]
    return out, left


def eigen_sort_key(c: Cell):
    n, d = c
    const = n.degree <= 0 and d.is_one()
    return (0 if const else 1, d.degree, n.degree,
            tuple((x.re, x.im) for x in n.coeffs), tuple((x.re, x.im) for x in d.coeffs))


def smith_form(m: PolyMatrix) -> tuple[PolyMatrix, list[Poly], PolyMatrix]:
    """Smith normal form: unimodular P, Q and invariant factors with P·m·Q = diag(d)."""
    rows, cols = len(m), len(m[0])
    a = [list(r) for r in m]
    p = _pm_identity(rows)
    q = _pm_identity(cols)
    diag: list[Poly] = []
    for k in range(min(rows, cols)):
        while True:
            nz = [(i, j) for i in range(k, rows) for j in range(k, cols) if not a[i][j].is_zero()]
            if not nz:
                return p, diag, q
            i0, j0 = min(nz, key=lambda ij: (a[ij[0]][ij[1]].degree, ij))
            a[k], a[i0] = a[i0], a[k]
            p[k], p[i0] = p[i0], p[k]
            for r in a:
                r[k], r[j0] = r[j0], r[k]
            for r in q:
                r[k], r[j0] = r[j0], r[k]
            piv = a[k][k]
            dirty = False
            for i in range(k + 1, rows):
                if a[i][k].is_zero():
                    continue
                t = a[i][k] // piv
                a[i] = [x - t * y for x, y in zip(a[i], a[k])]
                p[i] = [x - t * y for x, y in zip(p[i], p[k])]
                dirty = dirty or not a[i][k].is_zero()
            for j in range(k + 1, cols):
                if a[k][j].is_zero():
                    continue
                t = a[k][j] // piv
                for r in a:
                    r[j] = r[j] - t * r[k]
                for r in q:
                    r[j] = r[j] - t * r[k]
                dirty = dirty or not a[k][j].is_zero()
            if dirty:
                continue
            bad = next((i for i in range(k + 1, rows) for j in range(k + 1, cols)
                        if not (a[i][j] % piv).is_zero()), None)
            if bad is None:
                break
            a[k] = [x + y for x, y in zip(a[k], a[bad])]
            p[k] = [x + y for x, y in zip(p[k], p[bad])]
        inv = a[k][k].lc.inverse()
        p[k] = [x.scale(inv) for x in p[k]]
        a[k] = [x.scale(inv) for x in a[k]]
        diag.append(a[k][k])
    return p, diag, q


def solve_bounded(m: PolyMatrix, b: list[Poly], lo: Fraction, hi: Fraction
                  ) -> list[Cell] | None:
    """A solution of m·y = b bounded on [lo, hi], or None when none exists.

    Decided exactly through the Smith normal form: the bounded functions on a
    closed interval form a principal ideal domain in which a polynomial is a
    unit exactly when it has no root in the interval.
    """
    p, diag, q = smith_form(m)
    c = [sum((pi * bi for pi, bi in zip(row, b)), POLY_ZERO) for row in p]
    r = len(diag)
    if any(not c[i].is_zero() for i in range(r, len(c))):
        return None
    z: list[Cell] = []
    for i in range(len(q)):
        if i < r and not c[i].is_zero():
            cell = reduce_cell(c[i], diag[i])
            if cell[1].degree > 0 and has_root_in(cell[1], lo, hi):
                return None
            z.append(cell)
        else:
            z.append(CELL_ZERO)
    out = []
    for row in q:
        acc = CELL_ZERO
        for x, zi in zip(row, z):
            if x.is_zero() or cell_is_zero(zi):
                continue
            acc = cell_add(acc, cell_mul((x, POLY_ONE), zi))
        out.append(acc)
    return out
