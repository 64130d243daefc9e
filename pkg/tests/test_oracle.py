import math

import numpy as np
import pytest

from marginlab.errors import NotStabilizing
from marginlab.margins import lti_optimal_margins, pi_margins
from marginlab.oracle import (
    OracleConfig,
    best_margin_search,
    crossover_phase_margin,
    fast_gain_margin,
    gain_margin_of,
    interior_gains,
    is_stabilizing,
    ki_degradation_probe,
    phase_margin_detail,
    phase_margin_of,
)
from marginlab.plant import FirstOrder, Gain, PidGains, Phase, RealPoles, SecondOrderMinPhase, SecondOrderZero

from grid import search

REF = SecondOrderZero.real(1, 2, 6)


def test_config_invariants():
    with pytest.raises(ValueError):
        OracleConfig(bisection_tol=1e-3, boundary_eps=1e-4)
    with pytest.raises(ValueError):
        OracleConfig(theta_grid=0)


def test_is_stabilizing_examples():
    g = PidGains(9, -1e-6, -0.5)
    assert is_stabilizing(REF, g)
    assert not is_stabilizing(REF, g, Gain(10))
    assert is_stabilizing(REF, g, Phase(0.0))
    assert is_stabilizing(REF, g, Phase(0.1), debug=True)


def test_gain_margin_infinite():
    assert gain_margin_of(FirstOrder(0, 1, 1), PidGains(2, kind="P")) == math.inf


def test_gain_margin_soundness():
    cfg = OracleConfig()
    rng = np.random.default_rng(7)
    n = 0
    while n < 25:
        g = PidGains(rng.uniform(7, 12), -rng.uniform(1e-3, 1), rng.uniform(-1, -0.3))
        if not is_stabilizing(REF, g):
            continue
        m = gain_margin_of(REF, g, cfg)
        if math.isinf(m):
            continue
        assert is_stabilizing(REF, g, Gain(max(1.0, m * (1 - 2 * cfg.bisection_tol))))
        assert not is_stabilizing(REF, g, Gain(m * (1 + 2 * cfg.bisection_tol)))
        assert fast_gain_margin(REF, g) == pytest.approx(m, rel=2e-6)
        n += 1


def test_paper_gain_triple_is_not_stabilizing():
    # the closed-form gain-optimal triple lies outside the closure of the stabilizing set
    with pytest.raises(NotStabilizing):
        gain_margin_of(REF, PidGains(7 * (1 + 1e-4), -1e-9, -7 / 12))
    assert interior_gains(REF, PidGains(7, 0, -7 / 12), "gain", 1e-4) == (None, None)


def test_precondition_trap():
    with pytest.raises(NotStabilizing):
        gain_margin_of(REF, PidGains(1, -1, 0))
    with pytest.raises(NotStabilizing):
        phase_margin_of(REF, PidGains(1, -1, 0))


def test_phase_margin_near_kd_minus_one_is_tiny():
    # a high-frequency crossover appears as kd -> -1 and its phase tends to zero
    d = phase_margin_detail(REF, PidGains(8.7397, -1e-6, -1 + 1e-6))
    assert d.value < 1e-3
    assert d.value == pytest.approx(d.crossover_value, abs=1e-5)


def test_phase_margin_first_order():
    f = FirstOrder(1, -4, 1)
    assert phase_margin_of(f, PidGains(-0.5, -1e-9, 0, "PI")) == pytest.approx(math.acos(0.8), abs=1e-3)
    assert phase_margin_of(f, PidGains(-0.3, -1e-9, 0, "PI")) < math.acos(0.8)
    with pytest.raises(NotStabilizing):
        phase_margin_of(f, PidGains(-2, -1e-9, 0, "PI"))


def test_phase_margin_minimum_phase():
    assert phase_margin_of(FirstOrder(0, 1, 1), PidGains(50, kind="P")) == pytest.approx(
        math.atan(math.sqrt(2499)), abs=1e-5)
    assert phase_margin_of(FirstOrder(1, 1, 1), PidGains(100, kind="P")) == math.pi


def test_phase_methods_agree_on_random_gains():
    rng = np.random.default_rng(11)
    n = 0
    while n < 1000:
        g = PidGains(rng.uniform(7, 12), -rng.uniform(1e-4, 2), rng.uniform(-0.99, 0.3))
        if not is_stabilizing(REF, g):
            continue
        d = phase_margin_detail(REF, g)
        assert abs(d.value - d.crossover_value) <= 10 * 1e-6 * max(1, d.value)
        n += 1


def test_search_reference_gain_matches_lti_root():
    r = search("real", 1, "PID", "gain")
    assert r.value == pytest.approx(math.sqrt(lti_optimal_margins(REF)[0].value), rel=1e-4)
    assert r.value <= 12 / 7


def test_search_reference_phase_matches_half_lti():
    r = search("real", 1, "PID", "phase")
    assert r.value == pytest.approx(lti_optimal_margins(REF)[1].value / 2, rel=1e-4)


def test_search_pi_matches_closed_form():
    g, ph = pi_margins(REF)
    assert search("real", 1, "PI", "gain").value == pytest.approx(g.value, rel=1e-4)
    assert search("real", 1, "PI", "phase").value == pytest.approx(ph.value, abs=1e-5)


def test_search_returns_none_when_not_stabilizable():
    assert best_margin_search(SecondOrderZero.real(1.5, 2, 6), "PI", "gain") is None
    assert best_margin_search(SecondOrderMinPhase(0, 1, RealPoles(1, 2)), "P", "gain") is None


def test_search_first_order():
    f = FirstOrder(1, -4, 1)
    assert best_margin_search(f, "P", "gain").value == pytest.approx(4, rel=1e-4)
    assert best_margin_search(f, "PI", "phase").value == pytest.approx(math.acos(0.8), abs=1e-5)


def test_crossover_margin_without_crossing():
    assert crossover_phase_margin(FirstOrder(0, 1, 1), PidGains(2, 0, 2, "PD")) == math.pi


def test_ki_probe_minimum_phase():
    r = ki_degradation_probe(SecondOrderMinPhase(0, 1, RealPoles(1, 2)), "gain")
    assert not r.applicable and all(math.isinf(m) for m in r.margins)


def test_ki_probe_gain_large_ki_degrades():
    r = ki_degradation_probe(REF, "gain")
    assert r.margins[-1] < 12 / 7 - 1e-3
    assert r.nonincreasing
    assert r.source == "oracle-search"
