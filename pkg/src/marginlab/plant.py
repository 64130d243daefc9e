"""Plants, PID controllers, perturbed closed loops and crossover analysis."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

from .errors import ImproperLoop, InvalidPlant, NotACrossover
from .poly import ComplexPoly, RealPoly, real_roots

KINDS = ("P", "PI", "PD", "PID")
X_TOL = 1e-12


@dataclass(frozen=True)
class RealPoles:
    p1: float
    p2: float

    def __post_init__(self):
        if not (self.p1 > 0 and self.p2 > 0):
            raise InvalidPlant(f"poles must be positive, got {self.p1}, {self.p2}")

    is_complex = False

    @property
    def S(self):
        return self.p1 + self.p2

    @property
    def P(self):
        return self.p1 * self.p2

    @property
    def Q(self):
        return self.p1 ** 2 + self.p2 ** 2

    def roots(self):
        return [complex(self.p1), complex(self.p2)]

    def angle(self, omega):
        """Phase of (jw - p1)(jw - p2)."""
        return math.atan2(omega, -self.p1) + math.atan2(omega, -self.p2)


@dataclass(frozen=True)
class ComplexPoles:
    sigma: float
    nu: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidPlant(f"pole real part must be positive, got {self.sigma}")
        if self.nu <= 0:
            raise InvalidPlant("imaginary part must be positive; use RealPoles for a real pair")

    is_complex = True

    @property
    def S(self):
        return 2.0 * self.sigma

    @property
    def P(self):
        return self.sigma ** 2 + self.nu ** 2

    @property
    def Q(self):
        return 2.0 * (self.sigma ** 2 - self.nu ** 2)

    @property
    def modulus(self):
        return math.hypot(self.sigma, self.nu)

    def roots(self):
        return [complex(self.sigma, self.nu), complex(self.sigma, -self.nu)]

    def angle(self, omega):
        return (math.atan2(omega - self.nu, -self.sigma)
                + math.atan2(omega + self.nu, -self.sigma))


PolePair = Union[RealPoles, ComplexPoles]


@dataclass(frozen=True)
class FirstOrder:
    """(beta0 s + beta1) / (s - p)."""
    beta0: float
    beta1: float
    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise InvalidPlant("p must be positive")
        if self.beta0 < 0:
            raise InvalidPlant("beta0 must be nonnegative")
        if self.beta1 == 0:
            raise InvalidPlant("beta1 must be nonzero")

    def numerator(self):
        return RealPoly([self.beta0, self.beta1])

    def denominator(self):
        return RealPoly([1.0, -self.p])

    @property
    def nonminimum_phase(self):
        return self.beta0 > 0 and self.beta1 < 0

    @property
    def zero(self):
        """The right-half-plane zero |beta1|/beta0, or None."""
        return -self.beta1 / self.beta0 if self.nonminimum_phase else None

    def unstable_poles(self):
        return [complex(self.p)]

    def angle(self, omega):
        return math.atan2(self.beta0 * omega, self.beta1) - math.atan2(omega, -self.p)


@dataclass(frozen=True)
class SecondOrderZero:
    """(s - z) / ((s - p1)(s - p2)) with z > 0 and unstable poles."""
    z: float
    poles: PolePair

    def __post_init__(self):
        if not self.z > 0:
            raise InvalidPlant("z must be positive")

    @classmethod
    def real(cls, z, p1, p2):
        return cls(float(z), RealPoles(float(p1), float(p2)))

    @classmethod
    def complex(cls, z, sigma, nu):
        return cls(float(z), ComplexPoles(float(sigma), float(nu)))

    S = property(lambda self: self.poles.S)
    P = property(lambda self: self.poles.P)
    Q = property(lambda self: self.poles.Q)

    def numerator(self):
        return RealPoly([1.0, -self.z])

    def denominator(self):
        return RealPoly([1.0, -self.S, self.P])

    nonminimum_phase = True

    @property
    def zero(self):
        return self.z

    def unstable_poles(self):
        return self.poles.roots()

    def angle(self, omega):
        return math.atan2(omega, -self.z) - self.poles.angle(omega)


@dataclass(frozen=True)
class SecondOrderMinPhase:
    """(beta0 s + beta1) / ((s - p1)(s - p2)) with beta1 > 0."""
    beta0: float
    beta1: float
    poles: PolePair

    def __post_init__(self):
        if self.beta0 < 0:
            raise InvalidPlant("beta0 must be nonnegative")
        if not self.beta1 > 0:
            raise InvalidPlant("beta1 must be positive")

    S = property(lambda self: self.poles.S)
    P = property(lambda self: self.poles.P)

    def numerator(self):
        return RealPoly([self.beta0, self.beta1])

    def denominator(self):
        return RealPoly([1.0, -self.S, self.P])

    nonminimum_phase = False
    zero = None

    def unstable_poles(self):
        return self.poles.roots()

    def angle(self, omega):
        return math.atan2(self.beta0 * omega, self.beta1) - self.poles.angle(omega)


Plant = Union[FirstOrder, SecondOrderZero, SecondOrderMinPhase]


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    kind: str = "PID"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind == "P" and (self.ki != 0 or self.kd != 0):
            raise ValueError("P controller must have ki = kd = 0")
        if self.kind == "PI" and self.kd != 0:
            raise ValueError("PI controller must have kd = 0")
        if self.kind == "PD" and self.ki != 0:
            raise ValueError("PD controller must have ki = 0")

    @property
    def integral(self):
        return self.kind in ("PI", "PID")

    def replace(self, **kw):
        d = dict(kp=self.kp, ki=self.ki, kd=self.kd, kind=self.kind)
        d.update(kw)
        return PidGains(**d)

    def as_tuple(self):
        return (self.kp, self.ki, self.kd)

    def numerator(self):
        if self.integral:
            return RealPoly([self.kd, self.kp, self.ki])
        return RealPoly([self.kd, self.kp])

    def denominator(self):
        return RealPoly([1.0, 0.0]) if self.integral else RealPoly([1.0])

    def response(self, omega):
        return complex(self.kp, self.kd * omega - self.ki / omega)


@dataclass(frozen=True)
class Gain:
    alpha: float

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError("gain perturbation requires alpha >= 1")

    @property
    def factor(self):
        return complex(self.alpha)


@dataclass(frozen=True)
class Phase:
    theta: float

    def __post_init__(self):
        if not -math.pi < self.theta <= math.pi:
            raise ValueError("theta must lie in (-pi, pi]")

    @property
    def factor(self):
        return cmath.exp(-1j * self.theta)


Perturbation = Union[Gain, Phase]
NOMINAL = Gain(1.0)


def _check_proper(plant, gains):
    if isinstance(plant, FirstOrder) and plant.beta0 != 0 and gains.kd != 0:
        raise ImproperLoop("derivative action on a plant with direct feedthrough")


def loop_polynomials(plant, gains):
    """(numerator, denominator) of L(s) = P(s) K(s) as real polynomials."""
    _check_proper(plant, gains)
    return plant.numerator() * gains.numerator(), plant.denominator() * gains.denominator()


def closed_loop_charpoly(plant, gains, pert=NOMINAL) -> ComplexPoly:
    """Numerator of 1 + w P(s) K(s) with w = alpha or exp(-j theta)."""
    n, d = loop_polynomials(plant, gains)
    w = pert.factor
    k = max(len(n.coeffs), len(d.coeffs))
    nc = [0.0] * (k - len(n.coeffs)) + list(n.coeffs)
    dc = [0.0] * (k - len(d.coeffs)) + list(d.coeffs)
    if isinstance(pert, Gain):
        return ComplexPoly([a + pert.alpha * b for a, b in zip(dc, nc)])
    return ComplexPoly([a + w * b for a, b in zip(dc, nc)])


def loop_response(plant, gains, omega):
    """L(j omega)."""
    n, d = loop_polynomials(plant, gains)
    s = 1j * omega
    return n(s) / d(s)


def _magnitude_poly(f: RealPoly):
    """g with g(w^2) = |f(jw)|^2."""
    c = f.coeffs
    n = f.degree
    # even part and odd part in s: f(jw) = E(-w^2) + j w O(-w^2)
    out = [0.0] * (n + 1)
    for i, a in enumerate(c):
        for j, b in enumerate(c):
            pi, pj = n - i, n - j
            tot = pi + pj
            if tot % 2:
                continue
            # s^pi (-s)^pj at s = jw gives (-1)^pj (j)^(pi+pj) w^(pi+pj)
            sign = (-1) ** pj * (-1) ** (tot // 2)
            out[n - tot // 2] += sign * a * b
    return RealPoly(out[: n + 1])


def crossover_polynomial(plant, gains) -> RealPoly:
    """Polynomial in x = omega^2 whose positive roots are the crossovers."""
    n, d = loop_polynomials(plant, gains)
    return _magnitude_poly(n) + _magnitude_poly(d) * -1.0


def sextic_coefficients(plant: SecondOrderZero, gains):
    """Coefficients of the crossover equation in x = omega^2, written out."""
    kp, ki, kd = gains.as_tuple()
    z, P, Q = plant.z, plant.P, plant.Q
    return (kd * kd - 1.0,
            kp * kp - 2 * ki * kd + z * z * kd * kd - Q,
            z * z * (kp * kp - 2 * ki * kd) + ki * ki - P * P,
            z * z * ki * ki)


def crossover_frequencies(plant, gains, x_tol=X_TOL):
    """Sorted positive frequencies with |L(j omega)| = 1."""
    poly = crossover_polynomial(plant, gains)
    out = []
    for x in real_roots(poly) if poly.degree > 0 else []:
        if x > x_tol:
            w = math.sqrt(x)
            w = _refine_crossover(plant, gains, w)
            out.append(w)
    out.sort()
    return out


def _refine_crossover(plant, gains, w):
    for _ in range(3):
        m = abs(loop_response(plant, gains, w))
        if abs(m - 1.0) < 1e-14:
            break
        h = 1e-7 * w
        dm = (abs(loop_response(plant, gains, w + h)) - abs(loop_response(plant, gains, w - h))) / (2 * h)
        if dm == 0:
            break
        step = (m - 1.0) / dm
        if abs(step) > 1e-3 * w:
            break
        w -= step
    return w


def wrap(angle):
    """Map an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def loop_angle(plant, gains, omega):
    """Angle of L(j omega) summed factor by factor with atan2."""
    k = gains.response(omega)
    return plant.angle(omega) + math.atan2(k.imag, k.real)


def phase_at_crossover(plant, gains, omega, tol=1e-6):
    """phi with angle L(j omega) = pi + phi, wrapped to (-pi, pi]."""
    mag = abs(loop_response(plant, gains, omega))
    if abs(mag - 1.0) > tol:
        raise NotACrossover(f"|L(j{omega})| = {mag}")
    return wrap(loop_angle(plant, gains, omega) - math.pi)


FEASIBLE_KINDS = ("OmegaPlus", "OmegaMinus", "XiPlus", "XiMinus", "Psi")


@dataclass(frozen=True)
class FeasibleSet:
    kind: str
    plant: object
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in FEASIBLE_KINDS:
            raise ValueError(f"unknown set {self.kind!r}")

    def contains(self, gains):
        return feasible_contains(self, gains)


def feasible_contains(fs: FeasibleSet, gains) -> bool:
    a = fs.alpha
    pl = fs.plant
    kp, ki, kd = gains.as_tuple()
    if fs.kind in ("OmegaPlus", "OmegaMinus"):
        b0, b1, p = pl.beta0, pl.beta1, pl.p
        if fs.kind == "OmegaPlus":
            return a * b0 * kp > -1 and a * (b1 * kp + b0 * ki) > p and b1 * ki > 0
        return a * b0 * kp < -1 and a * (b1 * kp + b0 * ki) < p and b1 * ki < 0
    z, S, P = pl.z, pl.S, pl.P
    hurwitz = (a * kp - z * a * kd - S) * (-z * a * kp + a * ki + P) > -z * (1 + a * kd) * a * ki
    if fs.kind == "XiPlus":
        return (a * kp < (a * ki + P) / z and a * ki < 0
                and -1 < a * kd < (a * kp - S) / z and hurwitz)
    if fs.kind == "XiMinus":
        return (a * kp > (a * ki + P) / z and (a * kp - S) / z < a * kd < -1
                and a * ki > 0 and hurwitz)
    return (S < a * kp < (a * ki + P) / z and a * ki < 0
            and (a * kp - S) * (-z * a * kp + a * ki + P) > -z * a * ki)
