import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from marginlab.errors import DegenerateInput
from marginlab.poly import ComplexPoly, RealPoly
from marginlab.stability import (
    bilherz_determinants,
    bilherz_matrix,
    bilherz_stable,
    bilherz_stable_many,
    routh_first_column,
    routh_hurwitz_stable,
    routh_stable_many,
    stable_by_roots,
)


def test_routh_cubic_basic():
    assert routh_hurwitz_stable(RealPoly([1, 6, 11, 6])).stable
    assert not routh_hurwitz_stable(RealPoly([1, -6, 11, -6])).stable


def test_routh_marginal_is_flagged():
    v = routh_hurwitz_stable(RealPoly([1, 0, 1]))
    assert not v.stable and v.marginal
    v = routh_hurwitz_stable(RealPoly([1, 1, 1, 1]))
    assert not v.stable and v.marginal
    v = routh_hurwitz_stable(RealPoly([0.5, 1.5, 3, 0]))
    assert not v.stable and v.marginal


def test_routh_negative_leading_coefficient():
    assert routh_hurwitz_stable(RealPoly([-1, -3, -2])).stable


def test_routh_quartic():
    assert routh_hurwitz_stable(RealPoly.from_roots([-1, -2, -3, -4])).stable
    assert not routh_hurwitz_stable(RealPoly.from_roots([-1, -2, 0.5, -4])).stable


def test_routh_degree_limit():
    with pytest.raises(DegenerateInput):
        routh_hurwitz_stable(RealPoly.from_roots([-1] * 5))


def test_routh_first_column_vectorized():
    a = np.array([1.0, 1.0])
    col = routh_first_column([a, np.array([6.0, -6.0]), np.array([11.0, 11.0]), np.array([6.0, -6.0])])
    assert col[1][0] > 0 and col[1][1] < 0


def test_bilherz_matrix_shape_and_first_determinant():
    a = [1.0, 2.0, 3.0, 4.0]
    b = [0.0, 0.5, -1.0, 0.25]
    for i in (1, 2, 3):
        m = bilherz_matrix(a, b, i)
        assert len(m) == 2 * i - 1 and all(len(r) == 2 * i - 1 for r in m)
    assert bilherz_determinants(a, b)[0] == 2.0


def test_bilherz_simple_cases():
    assert bilherz_stable(ComplexPoly([1, 1 + 5j])).stable
    assert not bilherz_stable(ComplexPoly([1, -1 + 5j])).stable
    assert bilherz_stable(ComplexPoly.from_roots([-1 + 3j, -0.1 - 2j, -5 + 0j])).stable
    assert not bilherz_stable(ComplexPoly.from_roots([-1 + 3j, 0.1 - 2j, -5 + 0j])).stable


def test_bilherz_marginal_root_on_axis():
    v = bilherz_stable(ComplexPoly.from_roots([2j, -1, -3 + 1j]))
    assert not v.stable


def test_bilherz_small_stable_root_not_called_marginal():
    roots = [-1.6e-6 + 2e-6j, -1e-3 - 1.17j, -9e-3 + 10.25j]
    assert bilherz_stable(ComplexPoly.from_roots(roots)).stable


def test_bilherz_vanishing_leading_coefficient():
    v = bilherz_stable(ComplexPoly([1e-20, 1, 1]))
    assert not v.stable and v.marginal


def test_bilherz_many_matches_scalar():
    rng = np.random.default_rng(3)
    polys = [ComplexPoly.from_roots(rng.normal(size=3) + 1j * rng.normal(size=3)) for _ in range(200)]
    coeffs = [np.array([p.coeffs[k] for p in polys]) for k in range(4)]
    many = bilherz_stable_many(coeffs)
    assert list(many) == [bilherz_stable(p).stable for p in polys]


def test_routh_many_matches_scalar():
    rng = np.random.default_rng(4)
    polys = [RealPoly.from_roots(list(rng.normal(size=3))) for _ in range(200)]
    coeffs = [np.array([p.coeffs[k] for p in polys]) for k in range(4)]
    assert list(routh_stable_many(coeffs)) == [routh_hurwitz_stable(p).stable for p in polys]


def test_roots_route():
    assert stable_by_roots(RealPoly([1, 3, 2])).stable
    w = stable_by_roots(ComplexPoly([1, -1j - 1]))
    assert not w.stable and w.witness.real > 0


root_st = st.complex_numbers(max_magnitude=10).filter(lambda r: abs(r.real) > 1e-3)


@settings(max_examples=500, deadline=None)
@given(st.lists(root_st, min_size=1, max_size=3))
def test_bilherz_agrees_with_roots(roots):
    p = ComplexPoly.from_roots(roots)
    assert bilherz_stable(p).stable == all(r.real < 0 for r in roots)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3), min_size=1, max_size=2),
       st.lists(st.tuples(st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3), st.floats(0.01, 10)),
                max_size=1))
def test_routh_agrees_with_roots(real, pairs):
    roots = list(real)
    for re, im in pairs:
        roots += [complex(re, im), complex(re, -im)]
    p = RealPoly.from_roots(roots)
    assert routh_hurwitz_stable(p).stable == all(complex(r).real < 0 for r in roots)
