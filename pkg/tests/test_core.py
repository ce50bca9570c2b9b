import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdsphere import core, poly
from qdsphere.core import INFINITY
from qdsphere.errors import (
    NotDoublePole,
    NotFiniteCritical,
    UnreducibleWithinTolerance,
    ZeroDifferential,
)

ARCSINE = {"numerator": [1], "denominator": [-1, 0, 1], "sign": -1}


def inventory_of(doc):
    qd = core.parse_differential(doc)
    return qd, core.critical_inventory(qd)


def test_parse_constant_differential():
    qd, inv = inventory_of({"numerator": [1], "denominator": [1]})
    assert inv.finite_points == ()
    assert inv.infinity_entry.order == 4
    assert inv.balance() == 4


def test_parse_monomial():
    qd, inv = inventory_of({"numerator": [0, 1], "denominator": [1]})
    kinds = {(str(p.location), p.kind, p.order) for p in inv.all_points}
    assert ("0j", "zero", 1) in kinds
    assert ("infinity", "higher-pole", 5) in kinds


def test_parse_arcsine():
    qd, inv = inventory_of(ARCSINE)
    poles = {p.location for p in inv.finite_points}
    assert poles == {(-1 + 0j), (1 + 0j)}
    assert all(p.kind == "simple-pole" for p in inv.finite_points)
    assert inv.infinity_entry.order == 2
    assert inv.balance() == 4


def test_parse_rejects_zero_differential():
    with pytest.raises(ZeroDifferential):
        core.parse_differential({"numerator": [0], "denominator": [1]})


def test_parse_cancels_common_roots():
    # (z-1)(z+2) / (z-1)(z+3)(z-5)(z+5) reduces by (z-1)
    num = poly.from_roots([1, -2])
    den = poly.from_roots([1, -3, 5, -5])
    qd = core.parse_differential({"numerator": list(num.real),
                                  "denominator": list(den.real)})
    assert qd.deg_num == 1
    assert qd.deg_den == 3


def test_parse_near_common_root_raises():
    num = poly.from_roots([1.0000003])
    den = poly.from_roots([1.0, -4.0])
    with pytest.raises(UnreducibleWithinTolerance):
        core.parse_differential({"numerator": list(num.real),
                                 "denominator": list(den.real)})


def test_sphere_balance_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        dn = rng.integers(0, 6)
        dd = rng.integers(0, 6)
        num = rng.normal(size=dn + 1) + 1j * rng.normal(size=dn + 1)
        den = rng.normal(size=dd + 1) + 1j * rng.normal(size=dd + 1)
        qd = core.RationalQD(tuple(num), tuple(den))
        inv = core.critical_inventory(qd)
        assert inv.balance() == 4


def test_sqrt_residue_examples():
    qd = core.parse_differential({"numerator": [1], "denominator": [0, 0, 1],
                                  "sign": -1})
    r = core.sqrt_residue(qd, 0.0)
    assert abs(r.value - 1j) < 1e-12

    qd2 = core.parse_differential(ARCSINE)
    r2 = core.sqrt_residue(qd2, INFINITY)
    assert abs(r2.value - 1j) < 1e-12
    assert abs(r2.square + 1) < 1e-12

    qd3 = core.parse_differential({"numerator": [1], "denominator": [0, 0, 1]})
    r3 = core.sqrt_residue(qd3, 0.0)
    assert abs(r3.value - 1) < 1e-12


def test_sqrt_residue_rejects_non_double():
    qd = core.parse_differential(ARCSINE)
    with pytest.raises(NotDoublePole):
        core.sqrt_residue(qd, 1.0)
    qd2 = core.parse_differential({"numerator": [0, 1], "denominator": [1]})
    with pytest.raises(NotDoublePole):
        core.sqrt_residue(qd2, INFINITY)


def test_sqrt_residue_against_series_oracle():
    sympy = pytest.importorskip("sympy")
    z = sympy.symbols("z")
    rng = np.random.default_rng(3)
    for _ in range(8):
        p = complex(rng.normal(), rng.normal())
        other = complex(rng.normal() + 4, rng.normal())
        dn = int(rng.integers(0, 3))
        num = rng.normal(size=dn + 1) + 1j * rng.normal(size=dn + 1)
        den = poly.from_roots([p, p, other])
        qd = core.RationalQD(tuple(num), tuple(den))
        got = core.sqrt_residue(qd, p).square

        nume = sum(sympy.nsimplify(c, rational=False) * z ** k
                   for k, c in enumerate(num))
        dene = sympy.prod([(z - sympy.nsimplify(p)) ** 2,
                           (z - sympy.nsimplify(other))])
        f = nume / dene
        series = sympy.series(f, z, sympy.nsimplify(p), n=0)
        coeff = complex(series.coeff((z - sympy.nsimplify(p)) ** -2))
        assert abs(got - coeff) <= 1e-10 * max(1.0, abs(coeff))


def test_critical_directions_examples():
    qd, inv = inventory_of({"numerator": [0, 1], "denominator": [1]})
    dirs = core.critical_directions(qd, inv.finite_points[0])
    assert np.allclose(dirs, [0, 2 * math.pi / 3, 4 * math.pi / 3], atol=1e-12)

    qd2, inv2 = inventory_of(ARCSINE)
    plus1 = next(p for p in inv2.finite_points if abs(p.location - 1) < 1e-9)
    assert np.allclose(core.critical_directions(qd2, plus1), [math.pi], atol=1e-12)

    qd3, inv3 = inventory_of({"numerator": [0, 0, 1], "denominator": [1]})
    dirs3 = core.critical_directions(qd3, inv3.finite_points[0])
    assert np.allclose(dirs3, [0, math.pi / 2, math.pi, 3 * math.pi / 2], atol=1e-12)


def test_critical_directions_rejects_higher_pole():
    qd, inv = inventory_of(ARCSINE)
    with pytest.raises(NotFiniteCritical):
        core.critical_directions(qd, inv.infinity_entry)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0))
def test_critical_directions_rotation_equivariance(phi):
    # rotating the differential by z -> e^{i phi} z rotates every ray by -phi
    base = {"numerator": [0, 1], "denominator": [1]}
    qd = core.parse_differential(base)
    inv = core.critical_inventory(qd)
    ref = core.critical_directions(qd, inv.finite_points[0])

    # f(e^{i phi} z) d(e^{i phi} z)^2 = e^{3 i phi} z dz^2 for f(z) = z
    rot = core.RationalQD((0.0, np.exp(3j * phi)), (1.0,))
    rinv = core.critical_inventory(rot)
    got = core.critical_directions(rot, rinv.finite_points[0])
    expect = sorted((th - phi) % (2 * math.pi) for th in ref)
    diffs = [abs((a - b + math.pi) % (2 * math.pi) - math.pi)
             for a, b in zip(sorted(got), expect)]
    assert max(diffs) < 1e-10


def test_inverted_chart_roundtrip():
    qd = core.parse_differential(ARCSINE)
    iq = qd.inverted()
    inv = core.critical_inventory(iq)
    orders = sorted((str(p.location), p.order) for p in inv.all_points)
    # double pole moved to 0; z = +-1 fixed; z = 0 (regular) drops out
    assert (("0j", 2) in orders)
    assert iq.order_at_infinity() == 0
    back = iq.inverted()
    assert back.order_at_infinity() == 2
