import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdsphere import poly
from qdsphere.errors import EmptyPolynomial, RootFindingFailure


def test_trim_and_degree():
    assert poly.degree([1, 2, 0, 0]) == 1
    assert poly.degree([5]) == 0
    with pytest.raises(EmptyPolynomial):
        poly.trim([])


def test_roots_simple():
    r = np.sort_complex(poly.roots([-1, 0, 1]))
    assert np.allclose(r, [-1, 1], atol=1e-12)


def test_roots_multiple():
    # (z-2)^3
    c = poly.from_roots([2, 2, 2])
    got = poly.roots_with_multiplicity(c)
    assert len(got) == 1
    loc, mult = got[0]
    assert mult == 3
    assert abs(loc - 2) < 1e-6


def test_roots_mixed_cluster():
    c = poly.from_roots([1, 1, -1, 3j])
    got = poly.roots_with_multiplicity(c)
    mults = sorted(m for _, m in got)
    assert mults == [1, 1, 2]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False,
                                   allow_infinity=False), min_size=1, max_size=7))
def test_roots_reproduce_polynomial(root_list):
    # keep roots separated so multiplicities are unambiguous
    kept = []
    for r in root_list:
        if all(abs(r - k) > 1e-2 for k in kept):
            kept.append(r)
    c = poly.from_roots(kept)
    found = poly.roots(c)
    assert len(found) == len(kept)
    for r in kept:
        assert min(abs(found - r)) < 1e-6


def test_deflate():
    c = poly.from_roots([1, 2, 3])
    q = poly.deflate(c, 2.0)
    r = np.sort_complex(poly.roots(q))
    assert np.allclose(r, [1, 3], atol=1e-10)


def test_parse_poly_expr():
    assert np.allclose(poly.parse_poly_expr("z^2-1"), [-1, 0, 1])
    assert np.allclose(poly.parse_poly_expr("2z^3 - 0.5"), [-0.5, 0, 0, 2])
    assert np.allclose(poly.parse_poly_expr("(z-1)(z+1)"), [-1, 0, 1])
    assert np.allclose(poly.parse_poly_expr("z*z - i"), [-1j, 0, 1])
    with pytest.raises(ValueError):
        poly.parse_poly_expr("z^")
    with pytest.raises(ValueError):
        poly.parse_poly_expr("q+1")
