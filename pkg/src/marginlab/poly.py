"""Low-degree polynomial arithmetic and closed-form root solvers.

Coefficients are stored in descending degree order, so ``coeffs[0]`` is the
leading coefficient.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateLeadingCoefficient, DegenerateInput

RESIDUAL_TOL = 1e-10
COLLAPSE_TOL = 1e-9


def _strip(coeffs):
    coeffs = list(coeffs)
    i = 0
    while i < len(coeffs) - 1 and coeffs[i] == 0:
        i += 1
    return tuple(coeffs[i:])


@dataclass(frozen=True)
class RealPoly:
    coeffs: tuple

    def __init__(self, coeffs: Sequence[float]):
        c = _strip(float(x) for x in coeffs)
        if not c:
            raise DegenerateInput("empty coefficient list")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        c = [complex(lead)]
        for r in roots:
            c = [a - r * b for a, b in zip(c + [0], [0] + c)]
        return cls([x.real for x in c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return evaluate(self, x)

    def scale(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def derivative(self) -> "RealPoly":
        n = self.degree
        if n == 0:
            return RealPoly([0.0])
        return RealPoly([c * (n - i) for i, c in enumerate(self.coeffs[:-1])])

    def __add__(self, other):
        return RealPoly(_add(self.coeffs, other.coeffs))

    def __mul__(self, other):
        if isinstance(other, RealPoly):
            return RealPoly(_mul(self.coeffs, other.coeffs))
        return RealPoly([c * other for c in self.coeffs])

    __rmul__ = __mul__


@dataclass(frozen=True)
class ComplexPoly:
    coeffs: tuple

    def __init__(self, coeffs: Sequence[complex]):
        c = _strip(complex(x) for x in coeffs)
        if not c:
            raise DegenerateInput("empty coefficient list")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_real(cls, p: RealPoly) -> "ComplexPoly":
        return cls(p.coeffs)

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        c = [complex(lead)]
        for r in roots:
            c = [a - r * b for a, b in zip(c + [0], [0] + c)]
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return evaluate(self, x)

    def conjugate(self) -> "ComplexPoly":
        return ComplexPoly([c.conjugate() for c in self.coeffs])

    def is_real(self, tol=0.0) -> bool:
        return all(abs(c.imag) <= tol for c in self.coeffs)

    def real_part(self) -> RealPoly:
        return RealPoly([c.real for c in self.coeffs])


def _add(a, b):
    n = max(len(a), len(b))
    a = [0] * (n - len(a)) + list(a)
    b = [0] * (n - len(b)) + list(b)
    return [x + y for x, y in zip(a, b)]


def _mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def evaluate(p, x):
    """Horner evaluation of ``p`` at ``x``."""
    acc = 0
    for c in p.coeffs:
        acc = acc * x + c
    return acc


def solve_quadratic(a: float, b: float, c: float, eps: float = 1e-14):
    """Both roots of a x^2 + b x + c, largest magnitude first.

    The larger root is formed without cancellation and the smaller one is
    recovered from the product of roots.
    """
    if abs(a) < eps:
        raise DegenerateLeadingCoefficient(f"leading coefficient {a!r} is ~0")
    disc = b * b - 4.0 * a * c
    if disc >= 0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            return complex(0.0), complex(0.0)
        return complex(q / a), complex(c / q)
    re = -b / (2.0 * a)
    im = math.sqrt(-disc) / (2.0 * abs(a))
    return complex(re, im), complex(re, -im)


def _horner2(coeffs, x):
    f = 0.0
    df = 0.0
    for c in coeffs:
        df = df * x + f
        f = f * x + c
    return f, df


def _polish(coeffs, x, iters=2):
    """Newton steps, each kept only if it reduces the residual."""
    f, df = _horner2(coeffs, x)
    for _ in range(iters):
        if f == 0.0 or df == 0.0:
            break
        y = x - f / df
        fy, dfy = _horner2(coeffs, y)
        if abs(fy) >= abs(f):
            break
        x, f, df = y, fy, dfy
    return x


def _cbrt(x):
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def solve_cubic_real_roots(p: RealPoly, polish: bool = True):
    """Sorted real roots of a cubic by Cardano / trigonometric formulas."""
    if p.degree != 3:
        raise DegenerateInput(f"expected a cubic, got degree {p.degree}")
    a3, a2, a1, a0 = p.coeffs
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    # depressed cubic t^3 + P t + Q with x = t - b/3
    P = c - b * b / 3.0
    Q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    half_q = Q / 2.0
    third_p = P / 3.0
    disc = half_q * half_q + third_p ** 3
    scale = half_q * half_q + abs(third_p) ** 3
    if scale == 0.0:
        roots = [shift]
    elif disc > 1e-15 * scale:
        s = math.sqrt(disc)
        u = _cbrt(-half_q + s)
        v = _cbrt(-half_q - s)
        roots = [u + v + shift]
    elif disc >= -1e-15 * scale:
        u = _cbrt(-half_q)
        roots = [2.0 * u + shift, -u + shift]
    else:
        r = 2.0 * math.sqrt(-third_p)
        arg = max(-1.0, min(1.0, 3.0 * Q / (P * r)))
        phi = math.acos(arg) / 3.0
        roots = [r * math.cos(phi - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    norm = (1.0, b, c, d)
    if polish:
        roots = [_polish(norm, x) for x in roots]
    roots = _deflated_roots(p.coeffs, max(roots, key=abs), polish)
    roots.sort()
    out = []
    for x in roots:
        if out and abs(x - out[-1]) <= COLLAPSE_TOL * max(1.0, abs(x)):
            continue
        out.append(x)
    return out


def _deflated_roots(coeffs, r, polish):
    """Real roots given one real root ``r`` of largest magnitude among the real ones.

    r is divided out from the constant term upward when it dominates the
    other roots and from the leading term downward otherwise, which keeps
    the remaining quadratic accurate even for nearly degenerate cubics.
    """
    a3, a2, a1, a0 = coeffs
    if abs(r) ** 3 * abs(a3) <= abs(a0):
        b2 = a3
        b1 = a2 + r * b2
        b0 = a1 + r * b1
    else:
        b0 = -a0 / r
        b1 = (b0 - a1) / r
        b2 = a3
    roots = [r]
    if b2 == 0.0:
        if b1 != 0.0:
            roots.append(-b0 / b1)
    else:
        q1, q2 = solve_quadratic(b2, b1, b0, eps=0.0)
        if q1.imag == 0.0:
            roots += [q1.real, q2.real]
        elif abs(q1.imag) <= 1e-7 * max(abs(q1.real), 1e-300):
            roots += [q1.real, q1.real]
    if polish:
        roots = [_polish(coeffs, x) for x in roots]
    return roots


def solve_cubic_complex(coeffs):
    """All three roots of a complex-coefficient cubic (Cardano)."""
    a3, a2, a1, a0 = (complex(c) for c in coeffs)
    if a3 == 0:
        raise DegenerateLeadingCoefficient("cubic with zero leading coefficient")
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    P = c - b * b / 3.0
    Q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    s = cmath.sqrt(Q * Q / 4.0 + P ** 3 / 27.0)
    w = -Q / 2.0 + s
    if abs(w) < abs(-Q / 2.0 - s):
        w = -Q / 2.0 - s
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    if w == 0:
        return [shift, shift, shift]
    u0 = w ** (1.0 / 3.0)
    roots = []
    for k in range(3):
        u = u0 * omega ** k
        roots.append(u - P / (3.0 * u) + shift)
    out = []
    for x in roots:
        for _ in range(2):
            f = ((x + b) * x + c) * x + d
            df = (3.0 * x + 2.0 * b) * x + c
            if df == 0 or abs(f) < 1e-15:
                break
            x -= f / df
        out.append(x)
    return out


def real_roots(p: RealPoly):
    """Sorted real roots for degree <= 3."""
    n = p.degree
    if n == 0:
        return []
    if n == 1:
        return [-p.coeffs[1] / p.coeffs[0]]
    if n == 2:
        r1, r2 = solve_quadratic(*p.coeffs, eps=0.0)
        if r1.imag != 0.0:
            return []
        return sorted({r1.real, r2.real})
    if n == 3:
        return solve_cubic_real_roots(p)
    raise DegenerateInput(f"degree {n} not supported")


def descartes_positive_root_bound(p: RealPoly) -> int:
    """Number of sign changes in the nonzero coefficient sequence."""
    signs = [c > 0 for c in p.coeffs if c != 0]
    if not signs:
        raise DegenerateInput("zero polynomial")
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)
