"""Brute-force margin oracles.

``gain_margin_of`` and ``phase_margin_of`` work straight from the margin
definitions: perturb the loop, test Hurwitz stability, and locate the first
loss of stability.  ``best_margin_search`` maximizes those margins over a
controller class by a grid scan followed by Nelder-Mead refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import AgreementFailure, NotStabilizing
from .plant import (
    FirstOrder,
    Gain,
    PidGains,
    Phase,
    SecondOrderZero,
    closed_loop_charpoly,
    crossover_frequencies,
    loop_polynomials,
    phase_at_crossover,
)
from .stability import (
    ROUNDOFF,
    bilherz_stable,
    bilherz_stable_many,
    routh_hurwitz_stable,
    routh_stable_many,
    stable_by_roots,
)


@dataclass(frozen=True)
class OracleConfig:
    alpha_max_probe: float = 1e4
    bisection_tol: float = 1e-6
    theta_grid: int = 2048
    gain_grid: int = 64
    boundary_eps: float = 1e-4
    sweep_ratio: float = 1.01
    refine_iterations: int = 4000
    ki_eps: float = 1e-9

    def __post_init__(self):
        for name in ("alpha_max_probe", "bisection_tol", "theta_grid", "gain_grid",
                     "boundary_eps", "ki_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.bisection_tol < self.boundary_eps:
            raise ValueError("bisection_tol must be smaller than boundary_eps")
        if not self.sweep_ratio > 1:
            raise ValueError("sweep_ratio must exceed 1")


DEFAULT = OracleConfig()


def is_stabilizing(plant, gains, pert=Gain(1.0), debug=False) -> bool:
    poly = closed_loop_charpoly(plant, gains, pert)
    if isinstance(pert, Gain):
        verdict = routh_hurwitz_stable(poly.real_part())
    else:
        verdict = bilherz_stable(poly)
    if debug:
        other = stable_by_roots(poly)
        if other.stable != verdict.stable and not verdict.marginal:
            raise AgreementFailure(f"{verdict.method} says {verdict.stable}, roots say {other.stable}")
    return verdict.stable


def _coefficient_pair(plant, gains):
    """(d, n) with charpoly(w) = d + w n, padded to equal length."""
    n, d = loop_polynomials(plant, gains)
    k = max(len(n.coeffs), len(d.coeffs))
    nc = np.array([0.0] * (k - len(n.coeffs)) + list(n.coeffs))
    dc = np.array([0.0] * (k - len(d.coeffs)) + list(d.coeffs))
    while len(nc) > 1 and nc[0] == 0 and dc[0] == 0:
        nc, dc = nc[1:], dc[1:]
    return dc, nc


def _stable_alphas(dc, nc, alphas):
    coeffs = [dc[i] + alphas * nc[i] for i in range(len(dc))]
    bounds = [ROUNDOFF * (abs(dc[i]) + alphas * abs(nc[i])) for i in range(len(dc))]
    return routh_stable_many(coeffs, bounds)


def _require_nominal(plant, gains):
    if not is_stabilizing(plant, gains):
        raise NotStabilizing(f"{gains} does not stabilize the nominal loop")


def gain_margin_of(plant, gains, cfg: OracleConfig = DEFAULT) -> float:
    """sup{mu : alpha P is stabilized for every alpha in [1, mu)}."""
    _require_nominal(plant, gains)
    n = int(math.ceil(math.log(cfg.alpha_max_probe) / math.log(cfg.sweep_ratio))) + 1
    alphas = np.minimum(cfg.sweep_ratio ** np.arange(n), cfg.alpha_max_probe)
    dc, nc = _coefficient_pair(plant, gains)
    ok = _stable_alphas(dc, nc, alphas)
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        return math.inf
    k = bad[0]
    lo, hi = float(alphas[k - 1]), float(alphas[k])
    while hi - lo > cfg.bisection_tol * lo:
        mid = 0.5 * (lo + hi)
        if is_stabilizing(plant, gains, Gain(mid)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _one_sided(plant, gains, sign, cfg):
    dc, nc = _coefficient_pair(plant, gains)
    thetas = math.pi * np.arange(1, cfg.theta_grid + 1) / cfg.theta_grid
    w = np.exp(-1j * sign * thetas)
    ok = bilherz_stable_many([dc[i] + w * nc[i] for i in range(len(dc))])
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        return math.pi
    k = bad[0]
    lo = 0.0 if k == 0 else float(thetas[k - 1])
    hi = float(thetas[k])
    while hi - lo > cfg.bisection_tol * max(lo, cfg.bisection_tol):
        mid = 0.5 * (lo + hi)
        if is_stabilizing(plant, gains, Phase(sign * mid)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossover_phase_margin(plant, gains) -> float:
    """min |phi| over the crossover frequencies, or pi if there are none."""
    best = math.pi
    for w in crossover_frequencies(plant, gains):
        best = min(best, abs(phase_at_crossover(plant, gains, w)))
    return best


@dataclass(frozen=True)
class PhaseMarginDetail:
    value: float
    positive_side: float
    negative_side: float
    crossover_value: float


def phase_margin_detail(plant, gains, cfg: OracleConfig = DEFAULT) -> PhaseMarginDetail:
    _require_nominal(plant, gains)
    pos = _one_sided(plant, gains, 1.0, cfg)
    neg = _one_sided(plant, gains, -1.0, cfg)
    value = min(pos, neg)
    cross = crossover_phase_margin(plant, gains)
    if abs(value - cross) > 10 * cfg.bisection_tol * max(1.0, value):
        raise AgreementFailure(f"bisection {value!r} vs crossover {cross!r} for {gains}")
    return PhaseMarginDetail(value, pos, neg, cross)


def phase_margin_of(plant, gains, cfg: OracleConfig = DEFAULT) -> float:
    """sup{nu : exp(-j theta) P is stabilized for every theta in (-nu, nu)}."""
    return phase_margin_detail(plant, gains, cfg).value


# ----------------------------------------------------------- fast objectives

def _first_positive_root(coeffs, lo=1.0):
    """Smallest root > lo of a polynomial of degree <= 2 (descending)."""
    c = [float(x) for x in coeffs]
    while c and c[0] == 0:
        c.pop(0)
    if len(c) <= 1:
        return math.inf
    roots = np.roots(c) if len(c) == 3 else [-c[1] / c[0]]
    best = math.inf
    for r in roots:
        if abs(complex(r).imag) <= 1e-12 * max(1.0, abs(r)) and complex(r).real > lo:
            best = min(best, complex(r).real)
    return best


def fast_gain_margin(plant, gains) -> float:
    """Exact first exit from the Routh region along alpha.

    The perturbed coefficients are affine in alpha and the cubic Hurwitz
    product is quadratic, so the first exit is the smallest root above 1
    among these low-degree polynomials.  Used to rank candidates in search.
    """
    dc, nc = _coefficient_pair(plant, gains)
    if not _stable_alphas(dc, nc, np.array([1.0]))[0]:
        return 0.0
    funcs = [(nc[i], dc[i]) for i in range(len(dc))]
    if len(dc) == 4:
        (n3, d3), (n2, d2), (n1, d1), (n0, d0) = funcs
        funcs.append((n2 * n1 - n3 * n0, n2 * d1 + d2 * n1 - n3 * d0 - d3 * n0, d2 * d1 - d3 * d0))
    elif len(dc) > 4:
        raise ValueError("degree above three")
    return min(_first_positive_root(f) for f in funcs)


def fast_phase_margin(plant, gains) -> float:
    if not is_stabilizing(plant, gains):
        return 0.0
    return crossover_phase_margin(plant, gains)


# ---------------------------------------------------------------- search

@dataclass(frozen=True)
class SearchResult:
    gains: PidGains
    value: float
    evaluations: int = 0
    box: dict = field(default_factory=dict, compare=False)


def _open_grid(lo, hi, n):
    return list(np.linspace(lo, hi, n + 2)[1:-1])


def _log_grid(scale, n, lo_exp=-2.0, hi_exp=3.0):
    mags = list(scale * np.logspace(lo_exp, hi_exp, n // 2))
    return [-m for m in reversed(mags)] + mags


def search_box(plant, controller, cfg: OracleConfig = DEFAULT):
    """Coarse candidate values for (kp, ki, kd) and their region label."""
    n = cfg.gain_grid
    integral = controller in ("PI", "PID")
    derivative = controller in ("PD", "PID")
    if isinstance(plant, SecondOrderZero):
        z, S, P = plant.z, plant.S, plant.P
        ki_scale = [cfg.ki_eps * P, 1e-3 * P, 1e-2 * P] if integral else [0.0]
        if derivative:
            if plant.poles.is_complex or (plant.poles.p1 - z) * (plant.poles.p2 - z) > 0:
                kp = _open_grid(S - z, P / z, n)
                kd = _open_grid(-1.0, P / z ** 2 - S / z, n)
                return "XiPlus", kp, [-k for k in ki_scale], kd
            if (plant.poles.p1 - z) * (plant.poles.p2 - z) < 0:
                kp = _open_grid(P / z, S - z, n)
                kd = _open_grid(P / z ** 2 - S / z, -1.0, n)
                return "XiMinus", kp, ki_scale, kd
            return None
        if not S < P / z:
            return None
        return "Psi", _open_grid(S, P / z, n), [-k for k in ki_scale], [0.0]
    if isinstance(plant, FirstOrder) and derivative and plant.beta0 > 0:
        return None
    if isinstance(plant, FirstOrder) and plant.nonminimum_phase:
        b0, b1, p = plant.beta0, plant.beta1, plant.p
        a, b = -1.0 / b0, -p / abs(b1)
        region = "OmegaPlus" if a < b else "OmegaMinus"
        ki_sign = -1.0 if region == "OmegaPlus" else 1.0
        ki = [ki_sign * k * p / abs(b1) for k in (cfg.ki_eps, 1e-3, 1e-2)] if integral else [0.0]
        return region, _open_grid(min(a, b), max(a, b), n), ki, [0.0]
    if isinstance(plant, FirstOrder):
        kp_scale = plant.p / abs(plant.beta1) + (1.0 / plant.beta0 if plant.beta0 > 0 else 0.0)
        kd_scale = 1.0 / abs(plant.beta1)
    else:
        kp_scale = max(abs(plant.S), math.sqrt(plant.P)) / plant.beta1 * max(1.0, plant.P / plant.beta1)
        kd_scale = max(1.0, plant.S) / plant.beta1
    ki = [s * cfg.ki_eps * kp_scale for s in (-1.0, 1.0)] if integral else [0.0]
    kd = ([0.0] + _log_grid(kd_scale, n)) if derivative else [0.0]
    return "generic", _log_grid(kp_scale, n), ki, kd


def best_margin_search(plant, controller: str, objective: str, cfg: OracleConfig = DEFAULT) -> Optional[SearchResult]:
    """Best margin found over the controller class; a lower bound on the supremum."""
    if objective not in ("gain", "phase"):
        raise ValueError(objective)
    box = search_box(plant, controller, cfg)
    if box is None:
        return None
    region, kps, kis, kds = box
    fast = fast_gain_margin if objective == "gain" else fast_phase_margin
    count = 0

    def score(kp, ki, kd):
        nonlocal count
        count += 1
        try:
            g = PidGains(kp, ki if controller in ("PI", "PID") else 0.0,
                         kd if controller in ("PD", "PID") else 0.0, controller)
            return fast(plant, g)
        except (ValueError, ArithmeticError):
            return 0.0

    cand = []
    for kp in kps:
        for ki in kis:
            for kd in kds:
                v = score(kp, ki, kd)
                if v > 0:
                    cand.append((v, kp, ki, kd))
    if not cand:
        return None
    cand.sort(key=lambda c: -c[0])

    two_d = len(kds) > 1
    lo_p, hi_p = min(kps), max(kps)
    lo_d, hi_d = min(kds), max(kds)
    pad_p = (hi_p - lo_p) / max(1, len(kps) - 1)
    pad_d = (hi_d - lo_d) / max(1, len(kds) - 1)
    best = None

    def inside(x):
        if not lo_p - pad_p < x[0] < hi_p + pad_p:
            return False
        return not two_d or lo_d - pad_d < x[1] < hi_d + pad_d

    for v, kp, ki, kd in cand[:3]:
        def neg(x, ki=ki, kd=kd):
            if not inside(x):
                return 0.0
            return -score(x[0], ki, x[1] if two_d else kd)
        x0 = [kp, kd] if two_d else [kp]
        if math.isinf(v):
            best = (v, kp, ki, kd)
            break
        res = optimize.minimize(neg, x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": cfg.refine_iterations})
        cur = (v, kp, ki, kd)
        if math.isinf(v):
            best = cur
            break
        if -res.fun > v:
            cur = (-res.fun, res.x[0], ki, res.x[1] if two_d else kd)
        if best is None or cur[0] > best[0]:
            best = cur
    v, kp, ki, kd = best
    g = PidGains(kp, ki if controller in ("PI", "PID") else 0.0,
                 kd if controller in ("PD", "PID") else 0.0, controller)
    value = gain_margin_of(plant, g, cfg) if objective == "gain" else phase_margin_of(plant, g, cfg)
    return SearchResult(g, value, count, {"region": region})


# --------------------------------------------------------- integral action

@dataclass(frozen=True)
class DegradationRecord:
    objective: str
    ki_values: tuple
    margins: tuple
    base_gains: Optional[PidGains]
    source: str
    applicable: bool = True
    stabilizing: tuple = ()

    @property
    def nonincreasing(self):
        return all(b <= a for a, b in zip(self.margins, self.margins[1:]))

    @property
    def strictly_decreasing(self):
        return all(b < a for a, b in zip(self.margins, self.margins[1:]))


KI_FRACTIONS = (None, 0.01, 0.05, 0.1)


def _ki_sign(plant):
    if isinstance(plant, SecondOrderZero):
        if not plant.poles.is_complex and (plant.poles.p1 - plant.z) * (plant.poles.p2 - plant.z) < 0:
            return 1.0
        return -1.0
    if isinstance(plant, FirstOrder) and plant.nonminimum_phase:
        return -1.0 if plant.zero > plant.p else 1.0
    return -1.0


def _ki_scale(plant):
    if isinstance(plant, FirstOrder):
        return plant.p / abs(plant.beta1)
    return plant.P


def interior_gains(plant, gains: PidGains, objective: str, eps: float, ki_abs: Optional[float] = None,
                   cfg: OracleConfig = DEFAULT):
    """Best stabilizing gains within relative distance ``eps`` of ``gains``.

    kp and kd are moved by a relative ``eps`` in each direction; a zero
    integral gain is replaced by a small one of the sign that the stabilizing
    set requires.  Returns (gains, margin) or (None, None).
    """
    of = gain_margin_of if objective == "gain" else phase_margin_of
    if ki_abs is None:
        ki_abs = eps * eps * _ki_scale(plant)
    kis = [gains.ki]
    if gains.integral and gains.ki == 0:
        kis = [_ki_sign(plant) * ki_abs, -_ki_sign(plant) * ki_abs]
    kps = [gains.kp * f for f in (1.0, 1.0 + eps, 1.0 - eps)] if gains.kp else [0.0, eps, -eps]
    kds = [0.0]
    if gains.kind in ("PD", "PID"):
        kds = [gains.kd + d * eps * max(1.0, abs(gains.kd)) for d in (0.0, 1.0, -1.0)]
    best = (None, None)
    for ki in kis:
        for kp in kps:
            for kd in kds:
                if kd == -1.0:
                    continue
                g = gains.replace(kp=kp, ki=ki, kd=kd)
                if not is_stabilizing(plant, g):
                    continue
                v = of(plant, g, cfg)
                if best[1] is None or v > best[1]:
                    best = (g, v)
    return best


def ki_degradation_probe(plant, objective: str, cfg: OracleConfig = DEFAULT) -> DegradationRecord:
    """Margins at fixed (kp, kd) for increasing integral gain magnitude."""
    from .margins import optimal_gains

    if not isinstance(plant, SecondOrderZero):
        inf = (math.inf,) * len(KI_FRACTIONS)
        return DegradationRecord(objective, (0.0,) * len(KI_FRACTIONS), inf, None, "not-applicable", False,
                                 (True,) * len(KI_FRACTIONS))
    sign = _ki_sign(plant)
    base, _ = interior_gains(plant, optimal_gains(plant, "PID", objective), objective,
                             cfg.boundary_eps, cfg.ki_eps * plant.P, cfg)
    source = "closed-form"
    if base is None:
        found = best_margin_search(plant, "PID", objective, cfg)
        base = found.gains
        source = "oracle-search"
    base = base.replace(ki=sign * cfg.ki_eps * plant.P)
    kis, vals, stab = [], [], []
    of = gain_margin_of if objective == "gain" else phase_margin_of
    floor = 1.0 if objective == "gain" else 0.0
    for frac in KI_FRACTIONS:
        ki = base.ki if frac is None else sign * frac * plant.P
        g = base.replace(ki=ki)
        ok = is_stabilizing(plant, g)
        kis.append(ki)
        stab.append(ok)
        vals.append(of(plant, g, cfg) if ok else floor)
    return DegradationRecord(objective, tuple(kis), tuple(vals), base, source, True, tuple(stab))
