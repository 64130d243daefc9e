"""Hurwitz stability tests for real and complex polynomials.

Three independent routes are provided: the Routh table for real
coefficients, the Bilherz determinant conditions for complex coefficients,
and explicit root location.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInput
from .poly import ComplexPoly, RealPoly, solve_cubic_complex, solve_quadratic

MARGINAL_EPS = 1e-12
ROUNDOFF = 64 * 2.220446049250313e-16


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    method: str
    witness: Optional[object] = None
    marginal: bool = False

    def __bool__(self):
        return self.stable


def routh_first_column(coeffs):
    """First column of the Routh array for descending coefficients.

    Works elementwise when the coefficients are numpy arrays, which lets
    the oracle test many perturbations at once.
    """
    n = len(coeffs) - 1
    rows = [list(coeffs[0::2]), list(coeffs[1::2])]
    width = len(rows[0])
    for r in rows:
        r.extend([0.0] * (width - len(r)))
    col = [rows[0][0], rows[1][0]]
    for _ in range(n - 1):
        up, lo = rows[-2], rows[-1]
        new = [(lo[0] * up[j + 1] - up[0] * lo[j + 1]) / lo[0] for j in range(width - 1)]
        new.append(0.0 * lo[0])
        rows.append(new)
        col.append(new[0])
    return col[: n + 1]


def routh_hurwitz_stable(p: RealPoly, eps: float = MARGINAL_EPS) -> StabilityVerdict:
    """Routh-Hurwitz test for a real polynomial of degree 1 to 4.

    For degree three and below the conditions are written out, and an entry
    counts as zero (a marginal case, reported as not stable) when it is
    within rounding error of zero.  Degree four uses the Routh table with a
    relative threshold ``eps`` on the frequency-balanced coefficients.
    """
    n = p.degree
    if n == 0:
        return StabilityVerdict(True, "routh")
    if n > 4:
        raise DegenerateInput(f"degree {n} outside 1..4")
    lead = p.coeffs[0]
    if n == 4:
        c = _balanced([x / lead for x in p.coeffs])
        col = routh_first_column(c)
        for i, v in enumerate(col[1:]):
            if abs(v) <= eps:
                return StabilityVerdict(False, "routh", i + 1, True)
            if v < 0:
                return StabilityVerdict(False, "routh", i + 1)
        return StabilityVerdict(True, "routh")
    c = [x / lead for x in p.coeffs]
    size = max(abs(x) for x in c)
    for i, v in enumerate(c[1:]):
        if abs(v) <= ROUNDOFF * size:
            return StabilityVerdict(False, "routh", i + 1, True)
        if v < 0:
            return StabilityVerdict(False, "routh", i + 1)
    if n == 3:
        a3, a2, a1, a0 = c
        hurwitz = a2 * a1 - a3 * a0
        if abs(hurwitz) <= ROUNDOFF * (abs(a2 * a1) + abs(a3 * a0)):
            return StabilityVerdict(False, "routh", 4, True)
        if hurwitz < 0:
            return StabilityVerdict(False, "routh", 4)
    return StabilityVerdict(True, "routh")


def routh_stable_many(coeffs, bounds=None):
    """Vectorized Hurwitz test for real polynomials of degree 1 to 3.

    ``coeffs`` is a list of equal-length numpy arrays in descending degree.
    ``bounds`` optionally gives the absolute rounding error of each
    coefficient; entries within it of zero count as marginal.
    """
    coeffs = [np.asarray(x, dtype=float) for x in coeffs]
    n = len(coeffs) - 1
    if n > 3:
        raise DegenerateInput(f"degree {n} outside 1..3")
    size = np.max(np.abs(np.array(coeffs)), axis=0)
    if bounds is None:
        bounds = [ROUNDOFF * size] * len(coeffs)
    lead = coeffs[0]
    ok = np.abs(lead) > bounds[0]
    sign = np.where(lead >= 0, 1.0, -1.0)
    c = [x * sign for x in coeffs]
    for x, e in zip(c[1:], bounds[1:]):
        ok &= x > e
    if n == 3:
        a3, a2, a1, a0 = c
        h = a2 * a1 - a3 * a0
        ok &= h > ROUNDOFF * (np.abs(a2 * a1) + np.abs(a3 * a0)) + bounds[2] * np.abs(a1) + bounds[1] * np.abs(a2)
    return ok


def _det(m):
    """Determinant by cofactor expansion along the first row."""
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = 0.0
    for j in range(n):
        e = m[0][j]
        if isinstance(e, (int, float)) and e == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = e * _det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _permanent_abs(m):
    """Sum of |terms| in the cofactor expansion; bounds the rounding error of _det."""
    n = len(m)
    if n == 1:
        return abs(m[0][0])
    total = 0.0
    for j in range(n):
        e = m[0][j]
        if isinstance(e, (int, float)) and e == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total = total + abs(e) * _permanent_abs(minor)
    return total


def bilherz_matrix(a, b, i):
    """The (2i-1) x (2i-1) Bilherz matrix for a monic complex polynomial.

    ``a[k]`` and ``b[k]`` are the real and imaginary parts of the
    coefficient of s^(n-k); a[0] = 1 and b[0] = 0.
    """
    n = len(a) - 1

    def A(k):
        return a[k] if 0 <= k <= n else 0.0

    def B(k):
        return b[k] if 1 <= k <= n else 0.0

    rows = []
    for r in range(1, i + 1):
        rows.append([A(2 * j - r) for j in range(1, i + 1)]
                    + [-B(2 * j - r + 1) for j in range(1, i)])
    for r in range(1, i):
        rows.append([B(2 * j - r - 1) for j in range(1, i + 1)]
                    + [A(2 * j - r) for j in range(1, i)])
    return rows


def bilherz_determinants(a, b):
    n = len(a) - 1
    return [_det(bilherz_matrix(a, b, i)) for i in range(1, n + 1)]


def _determinants_with_bounds(a, b):
    n = len(a) - 1
    out = []
    for i in range(1, n + 1):
        m = bilherz_matrix(a, b, i)
        out.append((_det(m), _permanent_abs(m)))
    return out


def _balanced(monic):
    """Rescale s -> lam s so the monic coefficients are of order one.

    Root locations relative to the imaginary axis are unchanged, while the
    marginal thresholds become independent of the frequency scale.
    """
    lam = max(abs(c) ** (1.0 / k) for k, c in enumerate(monic) if k > 0) if len(monic) > 1 else 1.0
    if lam == 0:
        return list(monic)
    return [c / lam ** k for k, c in enumerate(monic)]


def _monic_parts(p: ComplexPoly, eps):
    lead = p.coeffs[0]
    if abs(lead) < eps * max(abs(x) for x in p.coeffs):
        raise DegenerateInput("leading coefficient is ~0")
    c = _balanced([x / lead for x in p.coeffs])
    return [x.real for x in c], [x.imag for x in c]


def bilherz_stable(p: ComplexPoly, eps: float = MARGINAL_EPS) -> StabilityVerdict:
    """Left-half-plane test for a complex polynomial of degree 1 to 3.

    A leading coefficient that is negligible against the others means a root
    near infinity; that case is reported as marginal.
    """
    n = p.degree
    if n == 0:
        return StabilityVerdict(True, "bilherz")
    if n > 3:
        raise DegenerateInput(f"degree {n} outside 1..3")
    if abs(p.coeffs[0]) < eps * max(abs(x) for x in p.coeffs):
        return StabilityVerdict(False, "bilherz", 0, True)
    a, b = _monic_parts(p, eps)
    a[0], b[0] = 1.0, 0.0
    for i, (d, bound) in enumerate(_determinants_with_bounds(a, b), start=1):
        if abs(d) <= ROUNDOFF * bound:
            return StabilityVerdict(False, "bilherz", i, True)
        if d < 0:
            return StabilityVerdict(False, "bilherz", i)
    return StabilityVerdict(True, "bilherz")


def bilherz_stable_many(coeffs, eps: float = MARGINAL_EPS):
    """Vectorized Bilherz test.

    ``coeffs`` is a list of complex numpy arrays (descending degree, all of
    equal length); returns a boolean array.
    """
    coeffs = [np.asarray(c, dtype=complex) for c in coeffs]
    lead = coeffs[0]
    c = [x / lead for x in coeffs]
    lam = np.max(np.array([np.abs(x) ** (1.0 / k) for k, x in enumerate(c) if k > 0]), axis=0)
    lam = np.where(lam > 0, lam, 1.0)
    c = [x / lam ** k for k, x in enumerate(c)]
    a = [x.real for x in c]
    b = [x.imag for x in c]
    a[0] = np.ones_like(a[0])
    b[0] = np.zeros_like(b[0])
    ok = np.abs(lead) >= eps * np.max(np.abs(np.array(coeffs)), axis=0)
    for d, bound in _determinants_with_bounds(a, b):
        ok &= d > ROUNDOFF * bound
    return ok


def complex_roots(p: ComplexPoly):
    n = p.degree
    c = p.coeffs
    if n == 0:
        return []
    if n == 1:
        return [-c[1] / c[0]]
    if n == 2:
        if c[0].imag == c[1].imag == c[2].imag == 0.0:
            return list(solve_quadratic(c[0].real, c[1].real, c[2].real, eps=0.0))
        s = cmath.sqrt(c[1] * c[1] - 4 * c[0] * c[2])
        q = -0.5 * (c[1] + s) if (c[1].conjugate() * s).real >= 0 else -0.5 * (c[1] - s)
        if q == 0:
            return [0j, 0j]
        return [q / c[0], c[2] / q]
    if n == 3:
        return solve_cubic_complex(c)
    raise DegenerateInput(f"degree {n} outside 1..3")


def stable_by_roots(p, eps: float = 0.0) -> StabilityVerdict:
    """Root-location test; stable iff every root has real part < -eps."""
    if isinstance(p, RealPoly):
        p = ComplexPoly.from_real(p)
    roots = complex_roots(p)
    if not roots:
        return StabilityVerdict(True, "roots")
    worst = max(roots, key=lambda r: r.real)
    if worst.real < -eps:
        return StabilityVerdict(True, "roots")
    return StabilityVerdict(False, "roots", worst)
