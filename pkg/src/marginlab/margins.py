"""Closed-form maximal gain and phase margins.

Gain margins are ratios (>= 1), phase margins are radians in [0, pi].
Every formula here is the published closed form; the ``oracle`` module
checks them by direct search.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ImproperLoop, NotStabilizable, RootNotBracketed
from .plant import (
    FirstOrder,
    PidGains,
    SecondOrderMinPhase,
    SecondOrderZero,
    wrap,
)
from .poly import RealPoly, evaluate, solve_cubic_real_roots, solve_quadratic

log = logging.getLogger(__name__)

ATTAINMENTS = ("attained", "asymptotic_boundary", "infinite", "none")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class MarginReport:
    kind: str
    controller: str
    value: Optional[float]
    branch: str
    optimizing_gains: Optional[PidGains] = None
    attainment: str = "attained"
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("gain", "phase"):
            raise ValueError(self.kind)
        if self.attainment not in ATTAINMENTS:
            raise ValueError(self.attainment)
        if (self.value is None) != (self.attainment == "none"):
            raise ValueError("value is undefined exactly when attainment is none")
        if self.value is not None:
            if (self.value == math.inf) != (self.attainment == "infinite"):
                raise ValueError("value is infinite exactly when attainment is infinite")
            if self.kind == "gain" and self.value < 1:
                raise ValueError(f"gain margin {self.value} < 1")
            if self.kind == "phase" and not 0 <= self.value <= math.pi + 1e-12:
                raise ValueError(f"phase margin {self.value} outside [0, pi]")

    @property
    def defined(self):
        return self.value is not None

    @property
    def db(self):
        if self.kind != "gain" or self.value is None:
            return None
        return math.inf if self.value == math.inf else 20.0 * math.log10(self.value)

    @property
    def degrees(self):
        if self.kind != "phase" or self.value is None:
            return None
        return math.degrees(self.value)

    @property
    def value_display(self):
        return self.db if self.kind == "gain" else self.degrees

    def to_dict(self):
        g = self.optimizing_gains
        return {
            "kind": self.kind,
            "controller": self.controller,
            "value": None if self.value is None else (None if self.value == math.inf else self.value),
            "infinite": self.value == math.inf,
            "display": None if self.value_display in (None, math.inf) else self.value_display,
            "unit": "dB" if self.kind == "gain" else "deg",
            "branch": self.branch,
            "attainment": self.attainment,
            "optimizing_gains": None if g is None else {"kp": g.kp, "ki": g.ki, "kd": g.kd, "kind": g.kind},
        }


def _none(kind, controller, branch, **details):
    return MarginReport(kind, controller, None, branch, None, "none", details)


def _inf(kind, controller, branch, gains=None):
    return MarginReport(kind, controller, math.inf, branch, gains, "infinite")


@dataclass(frozen=True)
class CubicRootCertificate:
    root: float
    bracket: tuple
    residual: float
    polynomial: RealPoly

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo <= self.root <= hi:
            raise ValueError("root outside its bracket")


def _root_in(poly: RealPoly, lo: float, hi: float) -> CubicRootCertificate:
    """The cubic root strictly inside (lo, hi)."""
    lo, hi = min(lo, hi), max(lo, hi)
    roots = solve_cubic_real_roots(poly)
    inside = [r for r in roots if lo < r < hi]
    if not inside:
        span = 1e-8 * max(abs(lo), abs(hi), 1.0)
        near = [r for r in roots if min(abs(r - lo), abs(r - hi)) <= 1e-10 * max(1.0, abs(r))]
        if near:
            lo, hi = lo - span, hi + span
            inside = [r for r in roots if lo < r < hi]
    if len(inside) != 1:
        raise RootNotBracketed(f"{len(inside)} roots of {poly.coeffs} in ({lo}, {hi})")
    r = inside[0]
    return CubicRootCertificate(r, (lo, hi), evaluate(poly, r), poly)


# ----------------------------------------------------------------- first order

def _check_controller(controller):
    if controller not in ("P", "PI", "PD", "PID"):
        raise ValueError(f"unknown controller {controller!r}")


def first_order_margins(plant: FirstOrder, controller: str = "PI"):
    """Maximal (gain, phase) margins for (beta0 s + beta1)/(s - p)."""
    _check_controller(controller)
    b0, b1, p = plant.beta0, plant.beta1, plant.p
    derivative = controller in ("PD", "PID")
    if derivative and b0 > 0:
        raise ImproperLoop("derivative control with beta0 > 0 gives an improper loop")
    if b0 == 0:
        if derivative:
            g = PidGains(2 * p / b1, 0.0, 2.0 / b1, controller)
            return (_inf("gain", controller, "beta0=0", g),
                    MarginReport("phase", controller, math.pi, "beta0=0", g, "attained"))
        return (_inf("gain", controller, "beta0=0"),
                MarginReport("phase", controller, math.pi / 2, "beta0=0", None, "asymptotic_boundary"))
    if b1 > 0:
        g = PidGains(2.0 / min(b0, b1 / p), kind=controller)
        return (_inf("gain", controller, "beta1>0", g),
                MarginReport("phase", controller, math.pi, "beta1>0", g, "attained"))
    z = abs(b1) / b0
    if z == p:
        raise NotStabilizable("zero cancels the unstable pole")
    branch = "z>p" if z > p else "z<p"
    gain = max(z / p, p / z)
    kp_gain = -p / abs(b1) if z > p else -1.0 / b0
    cos_t = 2.0 * math.sqrt(b0 * abs(b1) / p) / (b0 + abs(b1) / p)
    phase = math.acos(min(1.0, cos_t))
    kp_phase = -math.sqrt(p / (b0 * abs(b1)))
    return (MarginReport("gain", controller, gain, branch, PidGains(kp_gain, kind=controller),
                         "asymptotic_boundary"),
            MarginReport("phase", controller, phase, branch, PidGains(kp_phase, kind=controller),
                         "attained"))


@dataclass(frozen=True)
class FirstOrderRelations:
    log_kM: float
    twice_log_kP: float
    theta_M: float
    twice_theta_P: float
    cos_residual: float

    @property
    def gain_residual(self):
        return self.log_kM - self.twice_log_kP

    @property
    def phase_residual(self):
        return self.theta_M - self.twice_theta_P


def first_order_relations(plant: FirstOrder) -> FirstOrderRelations:
    """LTI-optimal margins versus P/PI margins for a nonminimum-phase first-order plant."""
    if not plant.nonminimum_phase:
        raise ValueError("relations need beta0 > 0 and beta1 < 0")
    g, ph = first_order_margins(plant, "PI")
    lg, lph = lti_optimal_margins(plant)
    k = g.value
    cos_rel = math.acos(2.0 * math.sqrt(k) / (1.0 + k))
    return FirstOrderRelations(math.log10(lg.value), 2.0 * math.log10(k),
                               lph.value, 2.0 * ph.value, ph.value - cos_rel)


# ----------------------------------------------------- second order, min-phase

def second_order_minphase_margins(plant: SecondOrderMinPhase, controller: str = "PID"):
    _check_controller(controller)
    b0 = plant.beta0
    if controller in ("P", "PI"):
        if b0 == 0:
            why = "no proportional-type controller stabilizes a relative-degree-two unstable plant"
            return _none("gain", controller, "beta0=0", reason=why), _none("phase", controller, "beta0=0", reason=why)
        return (_inf("gain", controller, "beta0>0"),
                MarginReport("phase", controller, math.pi / 2, "beta0>0", None, "asymptotic_boundary"))
    branch = "beta0=0" if b0 == 0 else "beta0>0"
    phase = math.pi / 2 if b0 == 0 else math.pi
    return (_inf("gain", controller, branch),
            MarginReport("phase", controller, phase, branch, None, "asymptotic_boundary"))


# ------------------------------------------------- second order, NMP zero: gain

def _tie(a, b):
    return abs(a - b) <= TIE_TOL * max(1.0, abs(a), abs(b))


def _require_stabilizable(plant: SecondOrderZero):
    if not plant.poles.is_complex:
        p1, p2, z = plant.poles.p1, plant.poles.p2, plant.z
        if _tie(z, p1) or _tie(z, p2):
            raise NotStabilizable("the zero coincides with an unstable pole: (p1 - z)(p2 - z) = 0")


def gain_branch(plant: SecondOrderZero) -> str:
    z, S, P = plant.z, plant.S, plant.P
    if plant.poles.is_complex:
        dist = math.hypot(plant.poles.sigma - z, plant.poles.nu)
        if dist < z and not _tie(dist, z):
            return "|p-z|<z,z<=|p|" if z <= plant.poles.modulus or _tie(z, plant.poles.modulus) else "|p-z|<z,z>|p|"
        return "|p-z|>=z,z<p1+p2" if z < S and not _tie(z, S) else "|p-z|>=z,z>=p1+p2"
    lo, hi = sorted((plant.poles.p1, plant.poles.p2))
    if z < lo:
        return "z<min(p1,p2)"
    if z > hi:
        return "z>max(p1,p2)"
    root = math.sqrt(P)
    return "min(p1,p2)<z<=sqrt(p1p2)" if z <= root or _tie(z, root) else "sqrt(p1p2)<z<max(p1,p2)"


def pid_gain_margin(plant: SecondOrderZero, controller: str = "PID") -> MarginReport:
    """Maximal gain margin under PID (equivalently PD) control."""
    _require_stabilizable(plant)
    z, S, P = plant.z, plant.S, plant.P
    branch = gain_branch(plant)
    gains = None
    if branch in ("z<min(p1,p2)", "|p-z|<z,z<=|p|", "|p-z|>=z,z<p1+p2"):
        value = P / (z * S - z * z)
        gains = PidGains(S - z, 0.0, -z * (S - z) / P, controller)
    elif branch in ("z>max(p1,p2)", "|p-z|<z,z>|p|"):
        value = z * z / (z * S - P)
        gains = PidGains(P / z, 0.0, (P - z * S) / (z * z), controller)
    elif branch == "min(p1,p2)<z<=sqrt(p1p2)":
        value = (z * S - z * z) / P
    elif branch == "sqrt(p1p2)<z<max(p1,p2)":
        value = (z * S - P) / (z * z)
    else:
        value = (P + z * z) / (z * S)
    return MarginReport("gain", controller, value, branch, gains, "asymptotic_boundary")


# ------------------------------------------------ second order, NMP zero: phase

def kp_cubic(plant: SecondOrderZero) -> RealPoly:
    z, S, P, Q = plant.z, plant.S, plant.P, plant.Q
    return RealPoly([1.0, S - z, (z - S) * P / z, (z * z - Q) * P / z])


def kd_cubic(plant: SecondOrderZero) -> RealPoly:
    z, S, P, Q = plant.z, plant.S, plant.P, plant.Q
    d = (P - S * z) / (z * z)
    return RealPoly([1.0, d, d, (Q - (P / z) ** 2) / (z * z)])


def omega_hat(plant: SecondOrderZero, kp: float) -> float:
    z, P, Q = plant.z, plant.P, plant.Q
    x = (P * P - z * z * kp * kp) / (kp * kp + z * z - Q)
    return math.sqrt(x) if x >= 0 else math.nan


def omega_tilde(plant: SecondOrderZero, kd: float) -> float:
    z, P, Q = plant.z, plant.P, plant.Q
    x = (z * z * kd * kd + (P / z) ** 2 - Q) / (1.0 - kd * kd)
    return math.sqrt(x) if x >= 0 else math.nan


def theta_hat(plant: SecondOrderZero, kp: float) -> float:
    """Phase at the crossover of the boundary gains (kp, 0, -1)."""
    w = omega_hat(plant, kp)
    if not w > 0:
        return 0.0 if w == 0 else math.nan
    return wrap(plant.angle(w) + math.atan2(-w, kp) - math.pi)


def theta_tilde(plant: SecondOrderZero, kd: float) -> float:
    """Phase at the crossover of the boundary gains (p1 p2 / z, 0, kd)."""
    w = omega_tilde(plant, kd)
    if not w > 0:
        return 0.0 if w == 0 else math.nan
    kp = plant.P / plant.z
    return wrap(plant.angle(w) + math.atan2(kd * w, kp) - math.pi)


def theta_hat_literal(plant: SecondOrderZero, kp: float) -> float:
    """theta-hat written with principal-value arctangents, as published."""
    w = omega_hat(plant, kp)
    S, P, z = plant.S, plant.P, plant.z
    return math.atan(S * w / (P - w * w)) - math.atan(w / z) - math.atan(w / kp)


def theta_tilde_literal(plant: SecondOrderZero, kd: float) -> float:
    w = omega_tilde(plant, kd)
    S, P, z = plant.S, plant.P, plant.z
    return math.pi - math.atan(S * w / (w * w - P)) - math.atan(w / z) + math.atan(z * kd * w / P)


def pid_phase_margin(plant: SecondOrderZero, controller: str = "PID"):
    """Maximal phase margin under PID (equivalently PD) control.

    Returns the report and the list of cubic-root certificates used.
    """
    _require_stabilizable(plant)
    z, S, P = plant.z, plant.S, plant.P
    kp_lo, kp_hi = S - z, P / z
    kd_lo, kd_hi = -1.0, P / (z * z) - S / z

    def hat():
        cert = _root_in(kp_cubic(plant), kp_lo, kp_hi)
        return cert, theta_hat(plant, cert.root), PidGains(cert.root, 0.0, -1.0, controller)

    def tilde():
        cert = _root_in(kd_cubic(plant), kd_lo, kd_hi)
        return cert, theta_tilde(plant, cert.root), PidGains(P / z, 0.0, cert.root, controller)

    if plant.poles.is_complex:
        dist = math.hypot(plant.poles.sigma - z, plant.poles.nu)
        if dist < z and not _tie(dist, z):
            use = "hat" if z <= plant.poles.modulus or _tie(z, plant.poles.modulus) else "tilde"
            branch = "|p-z|<z,z<=|p|" if use == "hat" else "|p-z|<z,z>|p|"
        else:
            use, branch = "hat", "|p-z|>=z"
    else:
        lo, hi = sorted((plant.poles.p1, plant.poles.p2))
        if z < lo:
            use, branch = "hat", "z<min(p1,p2)"
        elif z > hi:
            use, branch = "tilde", "z>max(p1,p2)"
        else:
            use, branch = "both", "min(p1,p2)<z<max(p1,p2)"

    details = {}
    if use == "hat":
        cert, th, g = hat()
        value, certs = abs(th), [cert]
        details["theta_hat"] = th
    elif use == "tilde":
        cert, th, g = tilde()
        value, certs = abs(th), [cert]
        details["theta_tilde"] = th
        if th < 0:
            log.warning("theta-tilde is negative (%g) at z=%g; reporting its magnitude", th, z)
    else:
        found = []
        for name, fn in (("theta_hat", hat), ("theta_tilde", tilde)):
            try:
                found.append((name,) + fn())
            except RootNotBracketed as exc:
                details[name + "_missing"] = str(exc)
                log.warning("no bracketed root for %s at z=%g: %s", name, z, exc)
        if not found:
            raise RootNotBracketed(f"neither cubic has a root in its interval at z={z}")
        for name, _, th, _ in found:
            details[name] = th
            if name == "theta_hat" and th < 0:
                log.warning("theta-hat is negative (%g) between the poles at z=%g; "
                            "comparing magnitudes", th, z)
        certs = [c for _, c, _, _ in found]
        _, _, th, g = max(found, key=lambda f: abs(f[2]))
        value = abs(th)
    return MarginReport("phase", controller, value, branch, g, "asymptotic_boundary", details), certs


# ---------------------------------------------------------------------- PI

def pi_condition(plant: SecondOrderZero) -> bool:
    return plant.S < plant.P / plant.z


def q_coefficients(plant: SecondOrderZero):
    """Quadratic in x = omega^2 whose positive root is omega_0^2."""
    z, S, P, Q = plant.z, plant.S, plant.P, plant.Q
    return (S - z, S * (z * z + P) - z * Q, P * z * (z * S - P))


def omega0_closed_form(plant: SecondOrderZero) -> float:
    z, S, P, Q = plant.z, plant.S, plant.P, plant.Q
    diff2 = S * S - 4.0 * P  # (p1 - p2)^2, negative for complex poles
    inner = (z - P / z) ** 2 + diff2 * (1.0 - 2.0 * (z + P / z) / S)
    x = z * S / (2.0 * (S - z)) * (Q / S - z - P / z + math.sqrt(inner))
    return math.sqrt(x)


def theta_bar(plant: SecondOrderZero, omega: float) -> float:
    return math.atan2(omega, plant.z) - math.atan2(plant.S * omega, plant.P - omega * omega)


def pi_margins(plant: SecondOrderZero, controller: str = "PI"):
    """Maximal (gain, phase) margins under PI (equivalently P) control."""
    z, S, P = plant.z, plant.S, plant.P
    if not pi_condition(plant):
        why = "p1 + p2 >= p1 p2 / z"
        return _none("gain", controller, why, reason=why), _none("phase", controller, why, reason=why)
    gain = P / (z * S)
    a, b, c = q_coefficients(plant)
    r1, r2 = solve_quadratic(a, b, c)
    x = max(r1.real, r2.real)
    w0 = math.sqrt(x)
    w0_eq = omega0_closed_form(plant)
    if abs(w0_eq - w0) > 1e-10 * max(1.0, w0):
        log.warning("closed-form omega_0 %r disagrees with the q root %r", w0_eq, w0)
    phase = theta_bar(plant, w0)
    kp = math.sqrt(S / z * (x + P))
    branch = "p1+p2<p1p2/z"
    g_gain = PidGains(S, 0.0, 0.0, controller)
    g_phase = PidGains(kp, 0.0, 0.0, controller)
    return (MarginReport("gain", controller, gain, branch, g_gain, "asymptotic_boundary"),
            MarginReport("phase", controller, phase, branch, g_phase, "attained",
                         {"omega0": w0, "omega0_closed_form": w0_eq}))


# ---------------------------------------------------------------------- LTI

def _gamma_parts(plant):
    """(N, D) with gamma_opt = N / D, products over the unstable poles."""
    if isinstance(plant, FirstOrder):
        z, p = plant.zero, plant.p
        return p + z, abs(p - z)
    z = plant.z
    if plant.poles.is_complex:
        s, v = plant.poles.sigma, plant.poles.nu
        return (s + z) ** 2 + v * v, (s - z) ** 2 + v * v
    p1, p2 = plant.poles.p1, plant.poles.p2
    return (p1 + z) * (p2 + z), abs((p1 - z) * (p2 - z))


def gamma_opt(plant) -> float:
    n, d = _gamma_parts(plant)
    return math.inf if d == 0 else n / d


def lti_optimal_margins(plant):
    """Optimal margins over all LTI controllers."""
    if not plant.nonminimum_phase:
        return (_inf("gain", "LTI", "minimum-phase"),
                MarginReport("phase", "LTI", math.pi, "minimum-phase", None, "attained"))
    n, d = _gamma_parts(plant)
    if d == 0 or (isinstance(plant, SecondOrderZero) and not plant.poles.is_complex
                  and (_tie(plant.z, plant.poles.p1) or _tie(plant.z, plant.poles.p2))):
        raise NotStabilizable("the zero coincides with an unstable pole")
    g = n / d
    km = ((n + d) / (n - d)) ** 2
    th = 2.0 * math.asin(d / n)
    return (MarginReport("gain", "LTI", km, "nonminimum-phase", None, "attained", {"gamma_opt": g}),
            MarginReport("phase", "LTI", th, "nonminimum-phase", None, "attained", {"gamma_opt": g}))


def optimal_gains(plant, controller: str, objective: str) -> Optional[PidGains]:
    """Boundary-optimal gains for ``objective`` in {gain, phase}."""
    idx = 0 if objective == "gain" else 1
    if isinstance(plant, FirstOrder):
        return first_order_margins(plant, controller)[idx].optimizing_gains
    if isinstance(plant, SecondOrderMinPhase):
        return second_order_minphase_margins(plant, controller)[idx].optimizing_gains
    if controller in ("P", "PI"):
        return pi_margins(plant, controller)[idx].optimizing_gains
    if objective == "gain":
        return pid_gain_margin(plant, controller).optimizing_gains
    return pid_phase_margin(plant, controller)[0].optimizing_gains


def margins_for(plant, controller: str):
    """(gain, phase) closed-form reports for any plant and controller class."""
    if isinstance(plant, FirstOrder):
        return first_order_margins(plant, controller)
    if isinstance(plant, SecondOrderMinPhase):
        return second_order_minphase_margins(plant, controller)
    if controller in ("P", "PI"):
        return pi_margins(plant, controller)
    return pid_gain_margin(plant, controller), pid_phase_margin(plant, controller)[0]


# -------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class InequalityCheck:
    name: str
    holds: Optional[bool]
    slack: float
    status: str  # "must_hold" or "conjecture"
    condition: Optional[bool] = None
    note: str = ""


def margin_inequality_report(plant: SecondOrderZero):
    """Corollary-style sandwich inequalities between PID, PI and LTI margins."""
    kpid = pid_gain_margin(plant).value
    try:
        tpid = pid_phase_margin(plant)[0].value
        why = ""
    except RootNotBracketed as exc:
        tpid, why = None, f"theta_pid undefined: {exc}"
    lg, lph = lti_optimal_margins(plant)
    km, tm = lg.value, lph.value
    z, S, P = plant.z, plant.S, plant.P
    out = []
    a, b = math.log10(kpid), math.log10(km)
    out.append(InequalityCheck("log k_pid <= log k_M", a <= b * (1 + 1e-12), b - a, "must_hold"))
    out.append(InequalityCheck("log k_M <= 2 log k_pid", b <= 2 * a * (1 + 1e-12), 2 * a - b, "must_hold"))
    sufficient = None
    if not plant.poles.is_complex and z < min(plant.poles.p1, plant.poles.p2):
        sufficient = S / z <= 4.0 * (P + z * z) / (P + z * (S - z))

    def phase_check(name, lhs, rhs, status, cond=None):
        if tpid is None:
            return InequalityCheck(name, None, math.nan, status, cond, why)
        a, b = lhs(tpid), rhs(tpid)
        return InequalityCheck(name, bool(a <= b), b - a, status, cond)

    out.append(phase_check("theta_pid <= pi/2", lambda t: t, lambda t: math.pi / 2 + 1e-12, "must_hold"))
    out.append(phase_check("theta_pid <= theta_M", lambda t: t, lambda t: tm, "conjecture", sufficient))
    out.append(phase_check("theta_M <= 2 theta_pid", lambda t: tm, lambda t: 2 * t, "conjecture", sufficient))
    if pi_condition(plant):
        gk, gp = pi_margins(plant)
        out.append(InequalityCheck("k_pi < k_pid", gk.value < kpid, kpid - gk.value, "must_hold"))
        out.append(InequalityCheck("k_pid < 2 k_pi", kpid < 2 * gk.value, 2 * gk.value - kpid, "must_hold"))
        cond = S + z <= P / z
        out.append(phase_check("theta_pi < theta_pid", lambda t: gp.value, lambda t: t, "conjecture", cond))
        out.append(phase_check("theta_pid < 2 theta_pi", lambda t: t, lambda t: 2 * gp.value, "conjecture", cond))
    return out
