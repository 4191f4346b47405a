"""Exact piecewise-rational functions on a partitioned real interval.

A :class:`PiecewiseRational` stores, for every closed cell of a
:class:`Partition`, a reduced quotient of two polynomials with Gaussian
rational coefficients.  Lebesgue measure is the reference measure, so
"almost everywhere" means "outside a finite set of points".  Every decision
(zero sets, support, boundedness) is made with exact rational arithmetic and
Sturm sequences; floating point is never consulted.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from numbers import Rational
from typing import Callable, Iterable, Sequence

from .errors import IdenticallyZeroOnCell, PartitionMismatch

_ZERO = Fraction(0)
_ONE = Fraction(1)


def as_fraction(x) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if type(x) is Fraction:
        return x
    if isinstance(x, (int, Rational, str)):
        return Fraction(x)
    raise TypeError(f"cannot convert {x!r} to an exact rational")


class GaussianRational:
    """A complex number whose real and imaginary parts are rationals."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_fraction(re)
        self.im = as_fraction(im)

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if type(x) is cls:
            return x
        if isinstance(x, complex):
            raise TypeError("floating complex numbers are not exact")
        return cls(x)

    @classmethod
    def _raw(cls, re: Fraction, im: Fraction) -> "GaussianRational":
        obj = object.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def is_real(self) -> bool:
        return not self.im

    def __eq__(self, other) -> bool:
        if type(other) is GaussianRational:
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Rational)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.re, self.im)) if self.im else hash(self.re)

    def __add__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        return GaussianRational._raw(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        return GaussianRational._raw(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        return other - self

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __mul__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b:
            if not d:
                return GaussianRational._raw(a * c, _ZERO)
            return GaussianRational._raw(a * c, a * d)
        if not d:
            return GaussianRational._raw(a * c, b * c)
        return GaussianRational._raw(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        if not self.im:
            return GaussianRational._raw(1 / self.re, _ZERO)
        n = self.re * self.re + self.im * self.im
        return GaussianRational._raw(self.re / n, -self.im / n)

    def __truediv__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = _coerce_gr(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def conjugate(self) -> "GaussianRational":
        return GaussianRational._raw(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        if not self.im:
            return f"GaussianRational({self.re})"
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self) -> str:
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


def _coerce_gr(x):
    if type(x) is GaussianRational:
        return x
    if type(x) is Fraction:
        return GaussianRational._raw(x, _ZERO)
    if isinstance(x, (int, Rational)):
        return GaussianRational._raw(Fraction(x), _ZERO)
    return None


GR_ZERO = GaussianRational(0)
GR_ONE = GaussianRational(1)


# ---------------------------------------------------------------------------
# Polynomials with Gaussian rational coefficients


class Poly:
    """Polynomial in one real variable; ``coeffs`` are in ascending degree."""

    __slots__ = ("coeffs", "_hash")

    def __init__(self, coeffs: Iterable = ()):
        cs = [GaussianRational.coerce(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = tuple(cs)
        self._hash = None

    @classmethod
    def _raw(cls, coeffs: list) -> "Poly":
        while coeffs and not coeffs[-1]:
            coeffs.pop()
        obj = object.__new__(cls)
        obj.coeffs = tuple(coeffs)
        obj._hash = None
        return obj

    @classmethod
    def constant(cls, c) -> "Poly":
        return cls((c,))

    @classmethod
    def x(cls) -> "Poly":
        return cls((0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_one(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 1

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def is_real(self) -> bool:
        return all(not c.im for c in self.coeffs)

    @property
    def lc(self) -> GaussianRational:
        return self.coeffs[-1] if self.coeffs else GR_ZERO

    def __eq__(self, other) -> bool:
        if type(other) is not Poly:
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.coeffs)
        return self._hash

    def __add__(self, other: "Poly") -> "Poly":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = out[i] + c
        return Poly._raw(out)

    def __neg__(self) -> "Poly":
        return Poly._raw([-c for c in self.coeffs])

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return POLY_ZERO
        if len(a) == 1:
            return other.scale(a[0])
        if len(b) == 1:
            return self.scale(b[0])
        out = [GR_ZERO] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if not x:
                continue
            for j, y in enumerate(b):
                out[i + j] = out[i + j] + x * y
        return Poly._raw(out)

    def scale(self, c) -> "Poly":
        c = GaussianRational.coerce(c)
        if not c:
            return POLY_ZERO
        if c == 1:
            return self
        return Poly._raw([x * c for x in self.coeffs])

    def __pow__(self, k: int) -> "Poly":
        out = POLY_ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def divmod(self, other: "Poly") -> tuple["Poly", "Poly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        db = len(other.coeffs) - 1
        if len(rem) - 1 < db:
            return POLY_ZERO, self
        inv = other.coeffs[-1].inverse()
        quot = [GR_ZERO] * (len(rem) - db)
        bc = other.coeffs
        for k in range(len(rem) - 1 - db, -1, -1):
            q = rem[k + db] * inv
            quot[k] = q
            if q:
                for j in range(db + 1):
                    rem[k + j] = rem[k + j] - q * bc[j]
        return Poly._raw(quot), Poly._raw(rem[:db])

    def __floordiv__(self, other: "Poly") -> "Poly":
        return self.divmod(other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return self.divmod(other)[1]

    def monic(self) -> "Poly":
        if not self.coeffs or self.coeffs[-1] == 1:
            return self
        return self.scale(self.coeffs[-1].inverse())

    def gcd(self, other: "Poly") -> "Poly":
        """Monic greatest common divisor (zero only if both are zero)."""
        a, b = self, other
        if a.is_zero():
            return b.monic()
        if b.is_zero():
            return a.monic()
        if a.degree == 0 or b.degree == 0:
            return POLY_ONE
        while not b.is_zero():
            a, b = b, (a % b).monic()
        return a.monic()

    def derivative(self) -> "Poly":
        return Poly._raw([c * k for k, c in enumerate(self.coeffs) if k])

    def conjugate(self) -> "Poly":
        return Poly._raw([c.conjugate() for c in self.coeffs])

    def real_part(self) -> list[Fraction]:
        """Coefficients of Re p(λ) for real λ."""
        return _rtrim([c.re for c in self.coeffs])

    def imag_part(self) -> list[Fraction]:
        return _rtrim([c.im for c in self.coeffs])

    def abs2(self) -> list[Fraction]:
        """Real coefficients of |p(λ)|² for real λ."""
        re, im = self.real_part(), self.imag_part()
        return _radd(_rmul(re, re), _rmul(im, im))

    def __call__(self, x):
        if type(x) is Fraction or isinstance(x, (int, Rational)):
            x = as_fraction(x)
            acc_re, acc_im = _ZERO, _ZERO
            for c in reversed(self.coeffs):
                acc_re = acc_re * x + c.re
                acc_im = acc_im * x + c.im
            return GaussianRational._raw(acc_re, acc_im)
        x = GaussianRational.coerce(x)
        acc = GR_ZERO
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def eval_float(self, x: float) -> complex:
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * x + complex(c)
        return acc

    def compose_affine(self, scale, shift) -> "Poly":
        """Return p(scale*λ + shift)."""
        lin = Poly((shift, scale))
        out = POLY_ZERO
        for c in reversed(self.coeffs):
            out = out * lin + Poly((c,))
        return out

    def __repr__(self) -> str:
        return f"Poly({[str(c) for c in self.coeffs]})"

    def __str__(self) -> str:
        return poly_to_str(self)


POLY_ZERO = Poly(())
POLY_ONE = Poly((1,))
POLY_X = Poly((0, 1))


def poly_to_str(p: Poly, var: str = "λ") -> str:
    if p.is_zero():
        return "0"
    terms = []
    for k in range(len(p.coeffs) - 1, -1, -1):
        c = p.coeffs[k]
        if not c:
            continue
        if k == 0:
            mono = str(c)
        else:
            power = var if k == 1 else f"{var}^{k}"
            if c == 1:
                mono = power
            elif c == -1:
                mono = "-" + power
            elif c.is_real() and c.re.denominator == 1:
                mono = f"{c}{power}"
            else:
                mono = f"{c}*{power}"
        terms.append(mono)
    out = terms[0]
    for t in terms[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


# ---------------------------------------------------------------------------
# Real polynomials (lists of Fractions) and exact root isolation


def _rtrim(p: list) -> list:
    while p and not p[-1]:
        p.pop()
    return p


def _radd(a: list, b: list) -> list:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] += c
    return _rtrim(out)


def _rmul(a: list, b: list) -> list:
    if not a or not b:
        return []
    out = [_ZERO] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _rtrim(out)


def _rrem(a: list, b: list) -> list:
    rem = list(a)
    db = len(b) - 1
    inv = 1 / b[-1]
    for k in range(len(rem) - 1 - db, -1, -1):
        q = rem[k + db] * inv
        if q:
            for j in range(db + 1):
                rem[k + j] -= q * b[j]
    return _rtrim(rem[:db])


def _rquo(a: list, b: list) -> list:
    rem = list(a)
    db = len(b) - 1
    if len(rem) - 1 < db:
        return []
    inv = 1 / b[-1]
    quot = [_ZERO] * (len(rem) - db)
    for k in range(len(rem) - 1 - db, -1, -1):
        q = rem[k + db] * inv
        quot[k] = q
        if q:
            for j in range(db + 1):
                rem[k + j] -= q * b[j]
    return _rtrim(quot)


def _rmonic(a: list) -> list:
    inv = 1 / a[-1]
    return [c * inv for c in a]


def _rgcd(a: list, b: list) -> list:
    a, b = _rtrim(list(a)), _rtrim(list(b))
    if not a:
        return _rmonic(b) if b else []
    if not b:
        return _rmonic(a)
    while b:
        a, b = b, _rrem(a, b)
        if b:
            b = _rmonic(b)
    return _rmonic(a)


def _rderiv(a: list) -> list:
    return _rtrim([c * k for k, c in enumerate(a) if k])


def _reval(a: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = _ZERO
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def primitive_integer(a: Sequence[Fraction]) -> list[int]:
    """Scale a rational polynomial to coprime integer coefficients."""
    if not a:
        return []
    den = reduce(lcm, (c.denominator for c in a), 1)
    ints = [int(c * den) for c in a]
    g = reduce(gcd, ints, 0)
    if ints[-1] < 0:
        g = -g
    return [c // g for c in ints]


def squarefree_part(a: Sequence[Fraction]) -> list[Fraction]:
    a = _rtrim(list(a))
    if len(a) <= 2:
        return _rmonic(a) if a else []
    g = _rgcd(a, _rderiv(a))
    if len(g) == 1:
        return _rmonic(a)
    return _rmonic(_rquo(a, g))


class _Sturm:
    __slots__ = ("chain",)

    def __init__(self, p: list[Fraction]):
        chain = [p, _rderiv(p)]
        while len(chain[-1]) > 1:
            r = _rrem(chain[-2], chain[-1])
            if not r:
                break
            chain.append([-c for c in r])
        self.chain = [c for c in chain if c]

    def variations(self, x: Fraction) -> int:
        count = 0
        prev = 0
        for q in self.chain:
            s = _sign(_reval(q, x))
            if s:
                if prev and s != prev:
                    count += 1
                prev = s
        return count

    def count_half_open(self, lo: Fraction, hi: Fraction) -> int:
        """Number of distinct roots in (lo, hi]."""
        return self.variations(lo) - self.variations(hi)


@dataclass(frozen=True)
class RealRoot:
    """An isolated real root.

    ``lo == hi == value`` when the root is rational; otherwise the root is
    the unique root of the square-free part inside the open interval
    ``(lo, hi)`` and ``value`` is None.
    """

    lo: Fraction
    hi: Fraction
    value: Fraction | None = None

    @property
    def is_exact(self) -> bool:
        return self.value is not None

    def approx(self) -> float:
        if self.value is not None:
            return float(self.value)
        return float((self.lo + self.hi) / 2)

    def __str__(self) -> str:
        if self.value is not None:
            return str(self.value)
        return f"({self.lo}, {self.hi})"


class RootIsolator:
    """Exact root isolation for one real polynomial via Sturm sequences."""

    def __init__(self, p: Sequence[Fraction]):
        self.poly = _rtrim([as_fraction(c) for c in p])
        if not self.poly:
            raise ValueError("the zero polynomial has no isolated roots")
        self.sqf = squarefree_part(self.poly)
        self._sturm = _Sturm(self.sqf) if len(self.sqf) > 1 else None
        self._lc_bound = abs(primitive_integer(self.sqf)[-1]) if len(self.sqf) > 1 else 1

    def value(self, x: Fraction) -> Fraction:
        return _reval(self.poly, x)

    def count_open(self, lo: Fraction, hi: Fraction) -> int:
        if self._sturm is None or lo >= hi:
            return 0
        n = self._sturm.count_half_open(lo, hi)
        if not _reval(self.sqf, hi):
            n -= 1
        return n

    def count_closed(self, lo: Fraction, hi: Fraction) -> int:
        if self._sturm is None:
            return 0
        n = self._sturm.count_half_open(lo, hi)
        if not _reval(self.sqf, lo):
            n += 1
        return n

    def has_root_closed(self, lo: Fraction, hi: Fraction) -> bool:
        return self.count_closed(lo, hi) > 0

    def isolate(self, lo: Fraction, hi: Fraction, *, exact: bool = True) -> list[RealRoot]:
        """All distinct roots in the closed interval ``[lo, hi]``, sorted.

        With ``exact`` set, rational roots are always reported with their
        exact value, using the bound that a rational root p/q of a primitive
        integer polynomial has q dividing the leading coefficient.
        """
        lo, hi = as_fraction(lo), as_fraction(hi)
        if self._sturm is None:
            return []
        out: list[RealRoot] = []
        if not _reval(self.sqf, lo):
            out.append(RealRoot(lo, lo, lo))
        stack = [(lo, hi)]
        found: list[RealRoot] = []
        while stack:
            a, b = stack.pop()
            k = self.count_open(a, b)
            if k == 0:
                continue
            if k == 1:
                found.append(RealRoot(a, b))
                continue
            m = (a + b) / 2
            if not _reval(self.sqf, m):
                found.append(RealRoot(m, m, m))
            stack.append((a, m))
            stack.append((m, b))
        found.sort(key=lambda r: r.lo)
        if exact:
            found = [self._exactify(r) if r.value is None else r for r in found]
        out.extend(found)
        if hi > lo and not _reval(self.sqf, hi):
            out.append(RealRoot(hi, hi, hi))
        return out

    def _exactify(self, r: RealRoot) -> RealRoot:
        a, b = r.lo, r.hi
        bound = self._lc_bound
        target = Fraction(1, bound * bound)
        while b - a >= target:
            cand = ((a + b) / 2).limit_denominator(bound)
            if a < cand < b and not _reval(self.sqf, cand):
                return RealRoot(cand, cand, cand)
            a, b = self.shrink(a, b)
            if a == b:
                return RealRoot(a, a, a)
        cand = ((a + b) / 2).limit_denominator(bound)
        if a < cand < b and not _reval(self.sqf, cand):
            return RealRoot(cand, cand, cand)
        return RealRoot(a, b)

    def shrink(self, a: Fraction, b: Fraction) -> tuple[Fraction, Fraction]:
        """Halve an isolating interval; returns (m, m) if the midpoint is the root."""
        m = (a + b) / 2
        if not _reval(self.sqf, m):
            return m, m
        if self.count_open(a, m):
            return a, m
        return m, b

    def refine(self, r: RealRoot, width: Fraction) -> RealRoot:
        a, b = r.lo, r.hi
        while b - a > width:
            a, b = self.shrink(a, b)
        if a == b:
            return RealRoot(a, a, a)
        return RealRoot(a, b)

    def separate(self, left: RealRoot, right: RealRoot) -> Fraction:
        """A rational strictly between two consecutive distinct roots."""
        l1, h1, l2, h2 = left.lo, left.hi, right.lo, right.hi
        while not h1 < l2:
            if h1 - l1 >= h2 - l2:
                l1, h1 = self.shrink(l1, h1)
            else:
                l2, h2 = self.shrink(l2, h2)
        return (h1 + l2) / 2

    def sign_components(self, lo: Fraction, hi: Fraction) -> list[tuple[Fraction, int]]:
        """Sample point and sign of the polynomial on each root-free piece of [lo, hi]."""
        roots = self.isolate(lo, hi, exact=False)
        pts: list[Fraction] = []
        bounds = [RealRoot(lo, lo, lo)] + roots + [RealRoot(hi, hi, hi)]
        for left, right in zip(bounds, bounds[1:]):
            if left.hi == right.lo and left.is_exact and right.is_exact:
                continue
            pts.append(self.separate(left, right))
        return [(x, _sign(self.value(x))) for x in pts]


def real_roots_closed(p: Sequence[Fraction], lo, hi) -> list[RealRoot]:
    p = _rtrim(list(p))
    if not p:
        raise ValueError("zero polynomial")
    return RootIsolator(p).isolate(as_fraction(lo), as_fraction(hi))


def nonnegative_on(p: Sequence[Fraction], lo, hi) -> bool:
    """Exact test that a real polynomial is >= 0 on the closed interval."""
    p = _rtrim([as_fraction(c) for c in p])
    if not p:
        return True
    iso = RootIsolator(p)
    lo, hi = as_fraction(lo), as_fraction(hi)
    if lo == hi:
        return iso.value(lo) >= 0
    return all(s >= 0 for _, s in iso.sign_components(lo, hi))


def positive_on(p: Sequence[Fraction], lo, hi) -> bool:
    """Exact test that a real polynomial is > 0 on the closed interval."""
    p = _rtrim([as_fraction(c) for c in p])
    if not p:
        return False
    iso = RootIsolator(p)
    lo, hi = as_fraction(lo), as_fraction(hi)
    if iso.has_root_closed(lo, hi):
        return False
    return iso.value(lo) > 0


def real_common_part(p: Poly) -> list[Fraction]:
    """Real polynomial whose real roots are exactly the real roots of ``p``.

    For real λ, p(λ) = 0 iff both Re p and Im p vanish, so the gcd of the two
    real polynomials has the same real zero set as |p|².
    """
    re, im = p.real_part(), p.imag_part()
    if not im:
        return re
    if not re:
        return im
    return _rgcd(re, im)


# ---------------------------------------------------------------------------
# Partitions


class Partition:
    """Closed cells [t_i, t_{i+1}] of an interval with rational breakpoints."""

    __slots__ = ("breakpoints",)

    def __init__(self, breakpoints: Iterable):
        bps = tuple(as_fraction(t) for t in breakpoints)
        if len(bps) < 2:
            raise ValueError("a partition needs at least two breakpoints")
        for s, t in zip(bps, bps[1:]):
            if not s < t:
                raise ValueError("breakpoints must be strictly increasing")
        self.breakpoints = bps

    @classmethod
    def interval(cls, a, b) -> "Partition":
        return cls((a, b))

    @property
    def a(self) -> Fraction:
        return self.breakpoints[0]

    @property
    def b(self) -> Fraction:
        return self.breakpoints[-1]

    @property
    def ncells(self) -> int:
        return len(self.breakpoints) - 1

    def cells(self) -> list[tuple[Fraction, Fraction]]:
        bp = self.breakpoints
        return [(bp[i], bp[i + 1]) for i in range(len(bp) - 1)]

    def cell(self, i: int) -> tuple[Fraction, Fraction]:
        return self.breakpoints[i], self.breakpoints[i + 1]

    def same_interval(self, other: "Partition") -> bool:
        return self.a == other.a and self.b == other.b

    def refines(self, other: "Partition") -> bool:
        return self.same_interval(other) and set(other.breakpoints) <= set(self.breakpoints)

    def common_refinement(self, other: "Partition") -> "Partition":
        if self.breakpoints == other.breakpoints:
            return self
        if not self.same_interval(other):
            raise PartitionMismatch(
                f"intervals differ: [{self.a}, {self.b}] vs [{other.a}, {other.b}]")
        return Partition(sorted(set(self.breakpoints) | set(other.breakpoints)))

    def with_points(self, points: Iterable) -> "Partition":
        pts = {as_fraction(p) for p in points}
        inner = {p for p in pts if self.a < p < self.b}
        if inner <= set(self.breakpoints):
            return self
        return Partition(sorted(set(self.breakpoints) | inner))

    def locate(self, x) -> int:
        """Index of a cell containing x (the left one at interior breakpoints)."""
        x = as_fraction(x) if not isinstance(x, float) else x
        if x < self.a or x > self.b:
            raise ValueError(f"{x} lies outside [{self.a}, {self.b}]")
        i = bisect_left(self.breakpoints, x) - 1
        return min(max(i, 0), self.ncells - 1)

    def cells_containing(self, x) -> list[int]:
        x = as_fraction(x)
        lo = bisect_left(self.breakpoints, x)
        hi = bisect_right(self.breakpoints, x)
        if lo == hi:
            return [lo - 1] if 0 < lo <= self.ncells else []
        return [i for i in (lo - 1, lo) if 0 <= i < self.ncells]

    def coarse_index(self, coarse: "Partition") -> list[int]:
        """For each cell of self (a refinement of coarse), the coarse cell index."""
        out = []
        j = 0
        cb = coarse.breakpoints
        for lo, _ in self.cells():
            while cb[j + 1] <= lo:
                j += 1
            out.append(j)
        return out

    def __eq__(self, other) -> bool:
        return type(other) is Partition and self.breakpoints == other.breakpoints

    def __hash__(self) -> int:
        return hash(self.breakpoints)

    def __repr__(self) -> str:
        return f"Partition({[str(t) for t in self.breakpoints]})"


# ---------------------------------------------------------------------------
# Reduced rational functions (one cell)

Cell = tuple[Poly, Poly]
_CELL_ZERO: Cell = (POLY_ZERO, POLY_ONE)
_CELL_ONE: Cell = (POLY_ONE, POLY_ONE)


def reduce_cell(num: Poly, den: Poly) -> Cell:
    """Cancel common factors and make the denominator monic."""
    if den.is_zero():
        raise ZeroDivisionError("zero denominator")
    if num.is_zero():
        return _CELL_ZERO
    if den.degree == 0:
        if den.coeffs[0] == 1:
            return num, POLY_ONE
        return num.scale(den.coeffs[0].inverse()), POLY_ONE
    g = num.gcd(den)
    if g.degree > 0:
        num = num // g
        den = den // g
    lc = den.coeffs[-1]
    if lc != 1:
        inv = lc.inverse()
        num, den = num.scale(inv), den.scale(inv)
    return num, den


def cell_add(f: Cell, g: Cell) -> Cell:
    fn, fd = f
    gn, gd = g
    if fn.is_zero():
        return g
    if gn.is_zero():
        return f
    if fd.is_one() and gd.is_one():
        return fn + gn, POLY_ONE
    if fd == gd:
        return reduce_cell(fn + gn, fd)
    return reduce_cell(fn * gd + gn * fd, fd * gd)


def cell_neg(f: Cell) -> Cell:
    return -f[0], f[1]


def cell_sub(f: Cell, g: Cell) -> Cell:
    return cell_add(f, cell_neg(g))


def cell_mul(f: Cell, g: Cell) -> Cell:
    fn, fd = f
    gn, gd = g
    if fn.is_zero() or gn.is_zero():
        return _CELL_ZERO
    if fd.is_one() and gd.is_one():
        return fn * gn, POLY_ONE
    if fn.is_constant() and fd.is_one():
        return gn.scale(fn.coeffs[0]), gd
    if gn.is_constant() and gd.is_one():
        return fn.scale(gn.coeffs[0]), fd
    g1 = fn.gcd(gd)
    g2 = gn.gcd(fd)
    if g1.degree > 0:
        fn, gd = fn // g1, gd // g1
    if g2.degree > 0:
        gn, fd = gn // g2, fd // g2
    return reduce_cell(fn * gn, fd * gd)


def cell_inv(f: Cell) -> Cell:
    fn, fd = f
    if fn.is_zero():
        raise ZeroDivisionError("inverse of zero")
    return reduce_cell(fd, fn)


def cell_div(f: Cell, g: Cell) -> Cell:
    return cell_mul(f, cell_inv(g))


def cell_is_zero(f: Cell) -> bool:
    return f[0].is_zero()


def cell_is_one(f: Cell) -> bool:
    return f[1].is_one() and f[0].is_one()


def cell_is_constant(f: Cell) -> bool:
    return f[1].is_one() and f[0].is_constant()


def cell_constant(c) -> Cell:
    c = GaussianRational.coerce(c)
    if not c:
        return _CELL_ZERO
    return Poly._raw([c]), POLY_ONE


def cell_eval(f: Cell, x) -> GaussianRational:
    d = f[1](x)
    if not d:
        raise ZeroDivisionError(f"pole at {x}")
    if f[1].is_one():
        return f[0](x)
    return f[0](x) / d


def cell_has_pole(f: Cell, lo: Fraction, hi: Fraction) -> bool:
    den = f[1]
    if den.degree == 0:
        return False
    common = real_common_part(den)
    if len(common) <= 1:
        return False
    return RootIsolator(common).has_root_closed(lo, hi)


def cell_poles(f: Cell, lo: Fraction, hi: Fraction) -> list[RealRoot]:
    den = f[1]
    if den.degree == 0:
        return []
    common = real_common_part(den)
    if len(common) <= 1:
        return []
    return RootIsolator(common).isolate(lo, hi)


def cell_to_str(f: Cell, var: str = "λ") -> str:
    """Readable form; real quotients are printed with integer coefficients."""
    n, d = f
    if d.is_one():
        return poly_to_str(n, var)
    if n.is_real() and d.is_real():
        nr, dr = n.real_part(), d.real_part()
        ni, di = primitive_integer(nr), primitive_integer(dr)
        c = (nr[-1] / ni[-1]) / (dr[-1] / di[-1])
        n = Poly([c.numerator * x for x in ni])
        d = Poly([c.denominator * x for x in di])
    ns = poly_to_str(n, var)
    ds = poly_to_str(d, var)
    if len([c for c in n.coeffs if c]) > 1:
        ns = f"({ns})"
    if len([c for c in d.coeffs if c]) > 1 or d.degree > 0 and d.lc != 1:
        ds = f"({ds})"
    return f"{ns}/{ds}"


# ---------------------------------------------------------------------------
# Piecewise rational functions


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of a function on one closed cell."""

    whole_cell: bool
    roots: tuple[RealRoot, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.whole_cell and not self.roots


class PiecewiseRational:
    """A reduced rational function on each cell of a partition."""

    __slots__ = ("partition", "cells", "_hash")

    def __init__(self, partition: Partition, cells: Sequence):
        if len(cells) != partition.ncells:
            raise ValueError(
                f"expected {partition.ncells} cell functions, got {len(cells)}")
        out = []
        for c in cells:
            if isinstance(c, tuple) and len(c) == 2 and isinstance(c[0], Poly):
                out.append(reduce_cell(c[0], c[1]))
            elif isinstance(c, Poly):
                out.append((c, POLY_ONE))
            else:
                out.append(cell_constant(c))
        self.partition = partition
        self.cells = tuple(out)
        self._hash = None

    @classmethod
    def _raw(cls, partition: Partition, cells) -> "PiecewiseRational":
        obj = object.__new__(cls)
        obj.partition = partition
        obj.cells = tuple(cells)
        obj._hash = None
        return obj

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, c, partition: Partition) -> "PiecewiseRational":
        cell = cell_constant(c)
        return cls._raw(partition, [cell] * partition.ncells)

    @classmethod
    def zero(cls, partition: Partition) -> "PiecewiseRational":
        return cls._raw(partition, [_CELL_ZERO] * partition.ncells)

    @classmethod
    def one(cls, partition: Partition) -> "PiecewiseRational":
        return cls._raw(partition, [_CELL_ONE] * partition.ncells)

    @classmethod
    def variable(cls, partition: Partition) -> "PiecewiseRational":
        return cls._raw(partition, [(POLY_X, POLY_ONE)] * partition.ncells)

    @classmethod
    def rational(cls, num, den, partition: Partition) -> "PiecewiseRational":
        """The same quotient num/den (coefficient lists or Polys) on every cell."""
        num = num if isinstance(num, Poly) else Poly(num)
        den = den if isinstance(den, Poly) else Poly(den)
        cell = reduce_cell(num, den)
        return cls._raw(partition, [cell] * partition.ncells)

    @classmethod
    def indicator(cls, partition: Partition, on: Iterable[int]) -> "PiecewiseRational":
        on = set(on)
        return cls._raw(partition, [_CELL_ONE if i in on else _CELL_ZERO
                                    for i in range(partition.ncells)])

    # structure ------------------------------------------------------------

    def refine(self, partition: Partition) -> "PiecewiseRational":
        if partition is self.partition or partition == self.partition:
            return self
        if not partition.refines(self.partition):
            raise PartitionMismatch("target partition does not refine the source")
        idx = partition.coarse_index(self.partition)
        return PiecewiseRational._raw(partition, [self.cells[j] for j in idx])

    def simplify(self) -> "PiecewiseRational":
        """Merge adjacent cells carrying the same rational function."""
        bps = [self.partition.breakpoints[0]]
        cells = []
        for i, c in enumerate(self.cells):
            if cells and cells[-1] == c:
                bps[-1] = self.partition.breakpoints[i + 1]
            else:
                cells.append(c)
                bps.append(self.partition.breakpoints[i + 1])
        if len(cells) == len(self.cells):
            return self
        return PiecewiseRational._raw(Partition(bps), cells)

    def restrict(self, lo, hi) -> "PiecewiseRational":
        """Restriction to a sub-interval [lo, hi] of the domain."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        part = self.partition.with_points((lo, hi))
        f = self.refine(part)
        keep = [i for i, (s, t) in enumerate(part.cells()) if lo <= s and t <= hi]
        bps = [part.breakpoints[keep[0]]] + [part.breakpoints[i + 1] for i in keep]
        return PiecewiseRational._raw(Partition(bps), [f.cells[i] for i in keep])

    def _binary(self, other, op: Callable[[Cell, Cell], Cell]) -> "PiecewiseRational":
        if not isinstance(other, PiecewiseRational):
            other = PiecewiseRational.constant(other, self.partition)
        if self.partition is other.partition or self.partition == other.partition:
            return PiecewiseRational._raw(
                self.partition, [op(f, g) for f, g in zip(self.cells, other.cells)])
        part = self.partition.common_refinement(other.partition)
        a, b = self.refine(part), other.refine(part)
        return PiecewiseRational._raw(part, [op(f, g) for f, g in zip(a.cells, b.cells)])

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return self._binary(other, cell_add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, cell_sub)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return PiecewiseRational._raw(self.partition, [cell_neg(c) for c in self.cells])

    def __mul__(self, other):
        return self._binary(other, cell_mul)

    __rmul__ = __mul__

    def invert(self) -> "PiecewiseRational":
        out = []
        for i, c in enumerate(self.cells):
            if cell_is_zero(c):
                raise IdenticallyZeroOnCell(i)
            out.append(cell_inv(c))
        return PiecewiseRational._raw(self.partition, out)

    def __truediv__(self, other):
        if not isinstance(other, PiecewiseRational):
            other = PiecewiseRational.constant(other, self.partition)
        return self * other.invert()

    def __rtruediv__(self, other):
        return self.invert() * other

    def conjugate(self) -> "PiecewiseRational":
        return PiecewiseRational._raw(
            self.partition, [(n.conjugate(), d.conjugate()) for n, d in self.cells])

    def map_cells(self, fn: Callable[[Cell], Cell]) -> "PiecewiseRational":
        return PiecewiseRational._raw(self.partition, [fn(c) for c in self.cells])

    # predicates -----------------------------------------------------------

    def is_zero(self) -> bool:
        return all(cell_is_zero(c) for c in self.cells)

    def is_one(self) -> bool:
        return all(cell_is_one(c) for c in self.cells)

    def is_constant_per_cell(self) -> bool:
        return all(cell_is_constant(c) for c in self.cells)

    def cell_constant_value(self, i: int) -> GaussianRational | None:
        c = self.cells[i]
        if not cell_is_constant(c):
            return None
        return c[0].coeffs[0] if c[0].coeffs else GR_ZERO

    def zero_set(self) -> list[ZeroSet]:
        out = []
        for (lo, hi), (num, _) in zip(self.partition.cells(), self.cells):
            if num.is_zero():
                out.append(ZeroSet(True))
                continue
            common = real_common_part(num)
            if len(common) <= 1:
                out.append(ZeroSet(False))
                continue
            out.append(ZeroSet(False, tuple(RootIsolator(common).isolate(lo, hi))))
        return out

    def is_supported_ae(self) -> list[bool]:
        return [not c[0].is_zero() for c in self.cells]

    def is_bounded(self) -> list[bool]:
        return [not cell_has_pole(c, lo, hi)
                for (lo, hi), c in zip(self.partition.cells(), self.cells)]

    def bounded(self) -> bool:
        return all(self.is_bounded())

    def poles(self) -> list[list[RealRoot]]:
        return [cell_poles(c, lo, hi)
                for (lo, hi), c in zip(self.partition.cells(), self.cells)]

    # evaluation -----------------------------------------------------------

    def __call__(self, x, cell: int | None = None) -> GaussianRational:
        i = self.partition.locate(x) if cell is None else cell
        return cell_eval(self.cells[i], as_fraction(x))

    def eval_float(self, x: float, cell: int | None = None) -> complex:
        i = self.partition.locate(x) if cell is None else cell
        n, d = self.cells[i]
        return n.eval_float(x) / d.eval_float(x)

    def max_degree(self) -> int:
        return max(max(n.degree, d.degree) for n, d in self.cells)

    # comparison -----------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseRational):
            if isinstance(other, (int, Rational, GaussianRational)):
                c = cell_constant(other)
                return all(x == c for x in self.cells)
            return NotImplemented
        if self.partition == other.partition:
            return self.cells == other.cells
        if not self.partition.same_interval(other.partition):
            return False
        part = self.partition.common_refinement(other.partition)
        return self.refine(part).cells == other.refine(part).cells

    def __hash__(self) -> int:
        if self._hash is None:
            s = self.simplify()
            self._hash = hash((s.partition, s.cells))
        return self._hash

    def __repr__(self) -> str:
        return f"PiecewiseRational({self})"

    def __str__(self) -> str:
        s = self.simplify()
        if s.partition.ncells == 1:
            return cell_to_str(s.cells[0])
        parts = [f"{cell_to_str(c)} on [{lo}, {hi}]"
                 for (lo, hi), c in zip(s.partition.cells(), s.cells)]
        return "{" + "; ".join(parts) + "}"


def common_partition(items: Iterable) -> Partition:
    parts = [x.partition for x in items]
    if not parts:
        raise ValueError("no partitions to combine")
    out = parts[0]
    for p in parts[1:]:
        if p is not out and p != out:
            out = out.common_refinement(p)
    return out


# functional aliases used across the package
def add(f: PiecewiseRational, g: PiecewiseRational) -> PiecewiseRational:
    return f + g


def mul(f: PiecewiseRational, g: PiecewiseRational) -> PiecewiseRational:
    return f * g


def invert(f: PiecewiseRational) -> PiecewiseRational:
    return f.invert()


def zero_set(f: PiecewiseRational) -> list[ZeroSet]:
    return f.zero_set()


def is_supported_ae(f: PiecewiseRational) -> list[bool]:
    return f.is_supported_ae()


def is_bounded(f: PiecewiseRational) -> list[bool]:
    return f.is_bounded()


def refine(f: PiecewiseRational, partition: Partition) -> PiecewiseRational:
    return f.refine(partition)
