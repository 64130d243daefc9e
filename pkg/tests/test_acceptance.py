"""One pass/fail check per acceptance criterion, at the stated tolerances."""
import functools
import math
import os
import subprocess
import sys
import time

import numpy as np

from marginlab.cli import sweep_grid, sweep_rows, verify_rows, curve_rows
from marginlab.errors import NotStabilizable, RootNotBracketed
from marginlab.margins import (
    first_order_relations,
    kp_cubic,
    lti_optimal_margins,
    omega0_closed_form,
    pi_condition,
    pi_margins,
    pid_gain_margin,
    pid_phase_margin,
    q_coefficients,
    theta_bar,
)
from marginlab.oracle import best_margin_search, ki_degradation_probe
from marginlab.plant import ComplexPoles, FirstOrder, RealPoles, SecondOrderZero
from marginlab.poly import ComplexPoly, RealPoly, evaluate
from marginlab.stability import bilherz_stable, complex_roots, routh_hurwitz_stable, stable_by_roots

from grid import GRID, plant_for

TOL = 0.02
REF = SecondOrderZero.real(1, 2, 6)


@functools.lru_cache(maxsize=None)
def verification():
    start = time.perf_counter()
    rows = {}
    for kind, z in GRID:
        plant = plant_for(kind, z)
        controllers = ["PID", "PI"] if pi_condition(plant) else ["PID"]
        rows[(kind, z)] = verify_rows(plant, controllers, TOL)
    return rows, time.perf_counter() - start


def _offenders(objective):
    rows, elapsed = verification()
    bad = []
    for key, rs in rows.items():
        for r in rs:
            if r.objective == objective and r.status != "pass":
                bad.append(f"{key} {r.controller}: closed={r.closed_form} oracle={r.oracle} gap={r.gap} {r.note}")
    return bad, elapsed


def test_criterion_1_gain_closed_form_matches_oracle():
    bad, elapsed = _offenders("gain")
    assert not bad, "gain gaps above 2%:\n" + "\n".join(bad)
    assert elapsed < 60


def test_criterion_2_phase_closed_form_matches_oracle():
    bad, _ = _offenders("phase")
    assert not bad, "phase gaps above 2% or undefined:\n" + "\n".join(bad)


def test_criterion_3_reference_point():
    problems = []
    if pid_gain_margin(REF).value != 12 / 7:
        problems.append("k_pid != 12/7")
    g, ph = pi_margins(REF)
    if g.value != 1.5:
        problems.append("k_pi != 1.5")
    if lti_optimal_margins(REF)[0].value != (13 / 8) ** 2:
        problems.append("k_M != (13/8)^2")
    cubic = kp_cubic(REF)
    if cubic.coeffs != (1, 7, -84, -468):
        problems.append(f"kp cubic is {cubic.coeffs}")
    report, certs = pid_phase_margin(REF)
    root = certs[0].root
    if not (7 < root < 12 and abs(evaluate(RealPoly([1, 7, -84, -468]), root)) <= 1e-9):
        problems.append(f"kp root {root} not certified in (7, 12)")
    oracle_pid = best_margin_search(REF, "PID", "phase").value
    if abs(report.value - oracle_pid) > 1e-3:
        problems.append(f"theta_pid {report.value:.6f} vs oracle {oracle_pid:.6f}")
    w0 = omega0_closed_form(REF)
    a, b, c = q_coefficients(REF)
    if abs(evaluate(RealPoly([a, b, c]), w0 * w0)) > 1e-9 or abs(ph.value - theta_bar(REF, w0)) > 1e-3:
        problems.append("theta_pi does not match theta_bar at the q root")
    assert not problems, "; ".join(problems)


def test_criterion_4_corollary_suite():
    problems = []
    for poles in (RealPoles(2, 6), ComplexPoles(4, 1)):
        for z in np.linspace(0.5, 8, 151):
            plant = SecondOrderZero(float(z), poles)
            try:
                k = pid_gain_margin(plant).value
                km = lti_optimal_margins(plant)[0].value
            except NotStabilizable:
                continue
            if not math.log10(k) <= math.log10(km) <= 2 * math.log10(k):
                problems.append(f"{poles} z={z:.3f}: log k_pid={math.log10(k):.6g}, log k_M={math.log10(km):.6g}")
            try:
                t = pid_phase_margin(plant)[0].value
                if not t <= math.pi / 2 + 1e-12:
                    problems.append(f"{poles} z={z:.3f}: theta_pid={t}")
            except RootNotBracketed:
                problems.append(f"{poles} z={z:.3f}: theta_pid undefined")
            if pi_condition(plant):
                kpi = pi_margins(plant)[0].value
                if not kpi < k < 2 * kpi:
                    problems.append(f"{poles} z={z:.3f}: k_pi={kpi}, k_pid={k}")
    rng = np.random.default_rng(2024)
    n = 0
    while n < 100:
        z, p = rng.uniform(0.05, 20, size=2)
        if abs(z - p) < 1e-6:
            continue
        rel = first_order_relations(FirstOrder(1.0, -z, p))
        if max(abs(rel.gain_residual), abs(rel.phase_residual), abs(rel.cos_residual)) > 1e-12:
            problems.append(f"first-order z={z}, p={p}: {rel}")
        n += 1
    assert not problems, f"{len(problems)} violations:\n" + "\n".join(problems)


def test_criterion_5_vanishing_margins():
    rows = sweep_rows(RealPoles(2, 6), sweep_grid(0.5, 8, 151))
    flags = {float(r[0]): r[-1] for r in rows}
    assert flags[2.0] == "false" and flags[6.0] == "false"
    for z in (2 - 1e-3, 2 + 1e-3, 6 - 1e-3, 6 + 1e-3):
        plant = SecondOrderZero.real(z, 2, 6)
        assert pid_gain_margin(plant).db < 0.02
        assert math.degrees(pid_phase_margin(plant)[0].value) < 0.2


def test_criterion_6_integral_action_degrades_margins():
    problems = []
    for objective in ("gain", "phase"):
        r = ki_degradation_probe(REF, objective)
        if not r.strictly_decreasing:
            problems.append(f"{objective}: base gains {r.base_gains.as_tuple()} ({r.source}), ki={r.ki_values}, "
                            f"margins={r.margins}, stabilizing={r.stabilizing}")
    assert not problems, "\n".join(problems)


def test_criterion_7_stability_criteria_equivalence():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    mismatches = []
    for _ in range(10_000):
        deg = int(rng.integers(1, 4))
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        p = ComplexPoly(c)
        roots = complex_roots(p)
        if min(abs(r.real) for r in roots) < 1e-6:
            continue
        if bilherz_stable(p).stable != stable_by_roots(p).stable:
            mismatches.append(("bilherz", c))
    for _ in range(10_000):
        deg = int(rng.integers(1, 5))
        c = rng.normal(size=deg + 1)
        p = RealPoly(c)
        roots = np.roots(c) if deg == 4 else complex_roots(ComplexPoly(c))
        if min(abs(complex(r).real) for r in roots) < 1e-6:
            continue
        truth = all(complex(r).real < 0 for r in roots)
        if routh_hurwitz_stable(p).stable != truth:
            mismatches.append(("routh", c))
    elapsed = time.perf_counter() - start
    assert not mismatches, mismatches[:5]
    assert elapsed < 10


def _unimodal(values):
    slopes = np.sign(np.diff(values))
    slopes = slopes[slopes != 0]
    return int(np.count_nonzero(np.diff(slopes))) == 1


def test_criterion_8_curve_shapes():
    far = SecondOrderZero.real(10, 2, 6)
    rows = curve_rows(far, "theta-kd", 201)
    kd = np.array([float(r[0]) for r in rows])
    th = np.array([float(r[1]) for r in rows])
    pos = kd[th > 0]
    assert len(pos) > 0
    idx = np.nonzero(th > 0)[0]
    assert np.all(np.diff(idx) == 1)
    assert pos.min() > -1 and pos.max() < -0.68 + 0.01
    assert _unimodal(th)
    rows = curve_rows(REF, "theta-kp", 201)
    kp = np.array([float(r[0]) for r in rows])
    th = np.array([float(r[1]) for r in rows])
    assert kp.min() > 7 and kp.max() < 12
    assert np.all(th < 0)
    assert _unimodal(th)


def test_criterion_9_determinism(tmp_path):
    outs = []
    for threads in ("1", "8"):
        path = tmp_path / f"sweep_{threads}.csv"
        env = dict(os.environ, MARGINLAB_THREADS=threads)
        subprocess.run([sys.executable, "-m", "marginlab", "sweep", "--p1", "2", "--p2", "6", "--out", str(path)],
                       check=True, env=env)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
