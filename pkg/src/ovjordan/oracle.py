"""Floating-point cross-checks of exact results by sampling λ.

Every check samples rational points inside each cell, evaluates the exact
matrices there, rounds once to complex128 and runs dense numpy linear algebra.
Nothing computed here is ever fed back into the exact engine.

The optional ``OVJORDAN_THREADS`` environment variable sets how many worker
threads evaluate samples; aggregation is order-independent either way.
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .diagonalization import SimilarityCertificate
from .errors import ClusterAmbiguous, DimensionMismatch
from .opmatrix import OpMatrix
from .scalar_field import (
    Partition,
    RealRoot,
    RootIsolator,
    cell_eval,
    real_common_part,
)
from .structure import CanonicalForm

DEFAULT_TOLERANCE = 1e-8
POLE_MARGIN = Fraction(1, 10**6)
_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# sample placement


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OVJORDAN_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable, items: Sequence) -> list:
    workers = _threads()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def pole_points(mats: Iterable[OpMatrix], partition: Partition) -> list[tuple[Fraction, Fraction]]:
    """Narrow rational intervals around every real pole of the given matrices."""
    out = []
    for m in mats:
        m = m.refine(partition.common_refinement(m.partition))
        for (lo, hi), cell in zip(m.partition.cells(), m.cells()):
            width = hi - lo
            for row in cell:
                for _, den in row:
                    if den.is_constant():
                        continue
                    real = real_common_part(den)
                    if len(real) < 2:
                        continue
                    iso = RootIsolator(real)
                    for r in iso.isolate(lo, hi):
                        if not r.is_exact:
                            r = iso.refine(r, width * POLE_MARGIN / 4)
                        out.append((r.lo, r.hi))
    return out


@dataclass(frozen=True)
class SamplePlan:
    """Rational sample points per cell plus the pass tolerance."""

    partition: Partition
    points: tuple[tuple[Fraction, ...], ...]
    tolerance: float = DEFAULT_TOLERANCE

    @classmethod
    def build(cls, partition: Partition, count: int = 100, *, seed: int | None = None,
              avoid: Iterable[RealRoot | Fraction | tuple[Fraction, Fraction]] = (),
              tolerance: float = DEFAULT_TOLERANCE) -> "SamplePlan":
        """Uniform grid per cell, jittered by ``seed``, kept away from ``avoid``.

        Without a seed each point is the midpoint of its grid slot.
        """
        rng = random.Random(seed)
        bad = [_as_interval(p) for p in avoid]
        cells = []
        for lo, hi in partition.cells():
            width = hi - lo
            margin = width * POLE_MARGIN
            near = [(a - margin, b + margin) for a, b in bad if b >= lo - margin and a <= hi + margin]
            pts = []
            for j in range(count):
                slot_lo = lo + width * j / count
                slot = width / count
                offset = (Fraction(1, 2) if seed is None
                          else Fraction(rng.randint(100, 900), 1000))
                x = _clear_point(slot_lo, slot, offset, near)
                if x is not None:
                    pts.append(x)
            cells.append(tuple(pts))
        return cls(partition, tuple(cells), tolerance)

    @classmethod
    def for_matrices(cls, mats: Sequence[OpMatrix], count: int = 100, *,
                     seed: int | None = None, tolerance: float = DEFAULT_TOLERANCE) -> "SamplePlan":
        """Plan on the common refinement of ``mats`` that avoids all their poles."""
        part = mats[0].partition
        for m in mats[1:]:
            part = part.common_refinement(m.partition)
        return cls.build(part, count, seed=seed, avoid=pole_points(mats, part),
                         tolerance=tolerance)

    def samples(self) -> list[tuple[int, Fraction]]:
        return [(k, x) for k, pts in enumerate(self.points) for x in pts]

    def __len__(self) -> int:
        return sum(len(p) for p in self.points)


def _as_interval(p) -> tuple[Fraction, Fraction]:
    if isinstance(p, RealRoot):
        return p.lo, p.hi
    if isinstance(p, tuple):
        return Fraction(p[0]), Fraction(p[1])
    p = Fraction(p)
    return p, p


def _clear_point(slot_lo: Fraction, slot: Fraction, offset: Fraction,
                 near: list[tuple[Fraction, Fraction]]) -> Fraction | None:
    candidates = [offset] + [Fraction(k, 17) for k in range(1, 17)]
    for off in candidates:
        x = slot_lo + slot * off
        if all(not (a <= x <= b) for a, b in near):
            return x
    return None


# ---------------------------------------------------------------------------
# conjugation residuals


@dataclass(frozen=True)
class ConjugationReport:
    """Pointwise residuals of ``X·A·X⁻¹`` against the expected matrix.

    ``residuals`` lists, per sample, the larger of the relative conjugation
    residual and the residual of the recorded inverse ``X·X_inv − I``.
    """

    residuals: tuple[float, ...]
    points: tuple[tuple[int, Fraction], ...]
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def flagged(self) -> int:
        return sum(1 for r in self.residuals if not r <= self.tolerance)

    @property
    def samples(self) -> int:
        return len(self.residuals)

    @property
    def passed(self) -> bool:
        return self.flagged == 0


def _relative(diff: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(diff, 2) / (1.0 + np.linalg.norm(ref, 2)))


def conjugation_residual(a: OpMatrix, cert: SimilarityCertificate, expected: OpMatrix,
                         x: Fraction) -> float:
    """Residual at a single rational point."""
    xm = cert.x.to_numpy(x)
    xi = cert.x_inv.to_numpy(x)
    am = a.to_numpy(x)
    em = expected.to_numpy(x)
    if not (np.all(np.isfinite(xm)) and np.all(np.isfinite(xi))):
        return float("inf")
    try:
        conj = xm @ np.linalg.solve(xm.T, am.T).T
    except np.linalg.LinAlgError:
        return float("inf")
    eye = np.eye(a.n)
    return max(_relative(conj - em, em), _relative(xm @ xi - eye, eye))


def check_conjugation(a: OpMatrix, cert: SimilarityCertificate, expected: OpMatrix,
                      plan: SamplePlan | None = None, *, samples: int = 100,
                      seed: int | None = None, tolerance: float = DEFAULT_TOLERANCE
                      ) -> ConjugationReport:
    """Compare ``X(λ)A(λ)X(λ)⁻¹`` with ``expected(λ)`` at sampled points."""
    if not (a.n == cert.x.n == cert.x_inv.n == expected.n):
        raise DimensionMismatch("operator, certificate and expected sizes differ")
    if plan is None:
        plan = SamplePlan.for_matrices([a, cert.x, cert.x_inv, expected], samples,
                                       seed=seed, tolerance=tolerance)
    pts = plan.samples()
    res = _map(lambda p: conjugation_residual(a, cert, expected, p[1]), pts)
    return ConjugationReport(tuple(res), tuple(pts), plan.tolerance)


# ---------------------------------------------------------------------------
# commutant dimension


def _sylvester_singular_values(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    eye = np.eye(n)
    op = np.kron(eye, m) - np.kron(m.T, eye)
    return np.linalg.svd(op, compute_uv=False)


def numeric_commutant_dim(a: OpMatrix | np.ndarray, x=None, cell: int | None = None,
                          *, threshold: float = 1e-8) -> int:
    """Null-space dimension of ``M ↦ A(x)M − MA(x)`` from its singular values."""
    m = a if isinstance(a, np.ndarray) else a.to_numpy(x, cell)
    s = _sylvester_singular_values(m)
    if s[0] == 0:
        return len(s)
    return int(np.sum(s <= threshold * s[0]))


@dataclass(frozen=True)
class DimensionReport:
    """Exact commutant dimension against the numeric one at each clean sample."""

    checked: tuple[tuple[int, Fraction, int, int], ...]
    skipped: tuple[tuple[int, Fraction], ...]

    @property
    def mismatches(self) -> list[tuple[int, Fraction, int, int]]:
        return [c for c in self.checked if c[2] != c[3]]

    @property
    def passed(self) -> bool:
        return not self.mismatches


def compare_commutant_dim(a: OpMatrix, dims: Sequence[int], plan: SamplePlan) -> DimensionReport:
    """``dims`` lists the exact dimension per cell of ``plan.partition``.

    A sample is skipped when the singular values have no clear gap around the
    threshold (the operator is numerically near a more degenerate one).
    """
    def one(p):
        k, x = p
        s = _sylvester_singular_values(a.to_numpy(x))
        if s[0] == 0:
            return k, x, len(s), True
        rel = s / s[0]
        d = int(np.sum(rel <= 1e-8))
        above = rel[rel > 1e-8]
        below = rel[rel <= 1e-8]
        clean = (above.size == 0 or above.min() > 1e-6) and (below.size == 0 or below.max() < 1e-10)
        return k, x, d, clean

    checked, skipped = [], []
    for k, x, d, clean in _map(one, plan.samples()):
        if clean:
            checked.append((k, x, dims[k], d))
        else:
            skipped.append((k, x))
    return DimensionReport(tuple(checked), tuple(skipped))


# ---------------------------------------------------------------------------
# Jordan profiles


Profile = list[tuple[complex, tuple[int, ...]]]


def _cluster(ev: np.ndarray, radius: float) -> list[list[complex]]:
    groups: list[list[complex]] = []
    for z in sorted(ev, key=lambda v: (v.real, v.imag)):
        hits = [g for g in groups if min(abs(z - w) for w in g) <= radius]
        merged = [z]
        for g in hits:
            merged.extend(g)
            groups.remove(g)
        groups.append(merged)
    return groups


def _nullity(m: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s <= tol))


def numeric_jordan_profile(a: OpMatrix | np.ndarray, x=None, cell: int | None = None) -> Profile:
    """Eigenvalue clusters with Jordan block sizes, largest first.

    Clusters are formed generously (perturbed defective eigenvalues spread
    like ``eps^(1/k)``) and each is then validated by the nullities of
    ``(A − μI)^j``; an inconsistent rank sequence means two distinct
    eigenvalues were too close to tell apart, and raises ClusterAmbiguous.
    """
    m = a if isinstance(a, np.ndarray) else a.to_numpy(x, cell)
    n = m.shape[0]
    scale = 1.0 + float(np.linalg.norm(m, 2))
    radius = max(1e-6, 10 * (_EPS * n) ** (1.0 / n)) * scale
    groups = _cluster(np.linalg.eigvals(m), radius)
    eye = np.eye(n)
    out = []
    for g in groups:
        mult = len(g)
        mu = complex(np.mean(g))
        shifted = m - mu * eye
        norm = max(float(np.linalg.norm(shifted, 2)), 1e-300)
        nullities = [0]
        power = eye
        for j in range(1, mult + 1):
            power = power @ shifted
            nullities.append(_nullity(power, 1e-9 * n * norm ** j))
        counts = [nullities[j] - nullities[j - 1] for j in range(1, mult + 1)]
        if nullities[-1] != mult or any(c < 0 for c in counts) \
                or any(counts[j] < counts[j + 1] for j in range(len(counts) - 1)):
            raise ClusterAmbiguous(f"eigenvalue cluster near {mu:.6g} has inconsistent ranks")
        sizes = []
        for j in range(1, mult + 1):
            exactly = counts[j - 1] - (counts[j] if j < mult else 0)
            sizes.extend([j] * exactly)
        out.append((mu, tuple(sorted(sizes, reverse=True))))
    return sorted(out, key=lambda p: (round(p[0].real, 9), round(p[0].imag, 9)))


def form_profile(form: CanonicalForm, cell: int, x) -> Profile:
    """The Jordan profile that ``form`` predicts at the point ``x`` of ``cell``."""
    grouped: dict = {}
    for b in form.blocks[cell]:
        grouped.setdefault(cell_eval(b.diagonal, Fraction(x)), []).append(b.size)
    out = [(complex(v), tuple(sorted(s, reverse=True))) for v, s in grouped.items()]
    return sorted(out, key=lambda p: (round(p[0].real, 9), round(p[0].imag, 9)))


def profiles_match(p: Profile, q: Profile, tol: float = 1e-6) -> bool:
    if len(p) != len(q):
        return False
    rest = list(q)
    for value, sizes in p:
        hit = next((i for i, (v, s) in enumerate(rest) if s == sizes and abs(v - value) <= tol * (1 + abs(v))), None)
        if hit is None:
            return False
        rest.pop(hit)
    return True


@dataclass(frozen=True)
class ProfileReport:
    """Numeric Jordan profiles against a canonical form's block data."""

    matched: int
    mismatches: tuple[tuple[int, Fraction], ...]
    skipped: tuple[tuple[int, Fraction], ...]

    @property
    def clean(self) -> int:
        return self.matched + len(self.mismatches)

    @property
    def passed(self) -> bool:
        return not self.mismatches


def compare_profiles(a: OpMatrix, form: CanonicalForm, plan: SamplePlan) -> ProfileReport:
    """Check ``form``'s block multiset against the numeric profile of ``a``.

    ``plan`` must live on a refinement of the form's partition.
    """
    coarse = plan.partition.coarse_index(form.partition)

    def one(p):
        k, x = p
        try:
            num = numeric_jordan_profile(a, x)
        except ClusterAmbiguous:
            return k, x, None
        return k, x, profiles_match(num, form_profile(form, coarse[k], x))

    matched, bad, skipped = 0, [], []
    for k, x, ok in _map(one, plan.samples()):
        if ok is None:
            skipped.append((k, x))
        elif ok:
            matched += 1
        else:
            bad.append((k, x))
    return ProfileReport(matched, tuple(bad), tuple(skipped))
