import math

import numpy as np
import pytest

from qdsphere import core, tracer
from qdsphere.errors import SeedAtCriticalPoint

ARCSINE = {"numerator": [1], "denominator": [-1, 0, 1], "sign": -1}
CYLINDER = {"numerator": [1], "denominator": [0, 0, 1], "sign": -1}


def setup(doc, **kw):
    qd = core.parse_differential(doc)
    inv = core.critical_inventory(qd)
    budget = tracer.default_budget(inv, qd, **kw)
    return qd, inv, budget


def test_straight_line_trivial():
    qd, inv, b = setup({"numerator": [1], "denominator": [1]}, max_psi=2.0)
    seg = tracer.trace_horizontal(qd, 1j, 1.0, b, inventory=inv)
    assert seg.end_anchor.kind == "budget-exhausted"
    assert abs(seg.w_increment - 2.0) < 1e-9
    assert abs(seg.samples[-1] - (2 + 1j)) < 1e-9


def test_cylinder_circle_closes():
    qd, inv, b = setup(CYLINDER, max_psi=20.0)
    seg = tracer.trace_horizontal(qd, 1.0, 1j, b, inventory=inv)
    assert seg.end_anchor.kind == "closure-to-start"
    assert abs(seg.psi_length - 2 * math.pi) < 1e-8
    assert tracer.recurrence_verdict(seg, b) == "closed"


def test_cylinder_vertical_is_radial():
    qd, inv, b = setup(CYLINDER)
    budget = tracer.TraceBudget(max_psi_length=1.0, hit_radius=b.hit_radius,
                                grid=b.grid)
    seg = tracer.trace_vertical(qd, 1.0, budget, direction=1.0, inventory=inv)
    assert abs(seg.w_increment - 1j) < 1e-9
    assert abs(abs(seg.samples[-1]) - math.e) < 1e-8
    # vertical conservation: real part of the increment vanishes
    assert abs(seg.w_increment.real) < 1e-8 * seg.psi_length


def test_arcsine_segment_length_pi():
    qd, inv, b = setup(ARCSINE)
    segs = tracer.launch_critical(qd, inv, b)
    assert len(segs) == 2
    for seg in segs:
        assert seg.end_anchor.kind == "finite-critical"
        assert abs(seg.psi_length - math.pi) < 1e-5
        assert abs(seg.w_increment.imag) <= 1e-8 * seg.psi_length
        assert abs(abs(seg.w_increment.real) - seg.psi_length) < 1e-6


def test_monomial_three_rays_escape():
    qd, inv, b = setup({"numerator": [0, 1], "denominator": [1]})
    segs = tracer.launch_critical(qd, inv, b)
    assert len(segs) == 3
    for seg in segs:
        assert seg.end_anchor.kind == "infinite-critical"
        assert seg.end_anchor.point is core.INFINITY
        assert tracer.recurrence_verdict(seg, b) == "transient"


def test_launch_completeness_count():
    # zeros contribute order+2 rays, simple poles contribute 1
    qd, inv, b = setup({"numerator": [-1, 0, 0, 0, 1], "denominator": [0, 1]})
    segs = tracer.launch_critical(qd, inv, b)
    zeros = sum(p.order + 2 for p in inv.finite_critical if p.kind == "zero")
    poles = sum(1 for p in inv.finite_critical if p.kind == "simple-pole")
    assert len(segs) == zeros + poles


def test_seed_at_critical_point_rejected():
    qd, inv, b = setup(ARCSINE)
    with pytest.raises(SeedAtCriticalPoint):
        tracer.trace_horizontal(qd, 1.0 + 0j, 1.0, b, inventory=inv)


def test_reversibility():
    qd, inv, b = setup(ARCSINE, max_psi=1.0)
    seg = tracer.trace_horizontal(qd, 0.2 + 0j, 1.0, b, inventory=inv)
    end = complex(seg.samples[-1])
    back = tracer.trace_horizontal(qd, end, -1.0, b, inventory=inv)
    assert abs(complex(back.samples[-1]) - 0.2) < b.hit_radius


def test_step_size_independence():
    qd, inv, b = setup(ARCSINE, max_psi=1.5)
    coarse = tracer.TraceBudget(max_psi_length=1.5, hit_radius=b.hit_radius,
                                grid=b.grid, max_step_dt=0.05)
    fine = tracer.TraceBudget(max_psi_length=1.5, hit_radius=b.hit_radius,
                              grid=b.grid, max_step_dt=0.025)
    s1 = tracer.trace_horizontal(qd, 0.3 + 0.4j, 1.0, coarse, inventory=inv)
    s2 = tracer.trace_horizontal(qd, 0.3 + 0.4j, 1.0, fine, inventory=inv)
    assert abs(s1.w_increment - s2.w_increment) < 1e-6 * abs(s1.w_increment)


def test_horizontal_conservation_on_cross_instance():
    # -z^2 dz^2 / (z^4 - 1): probe circles around the cross keep Im w ~ 0
    qd, inv, b = setup({"numerator": [0, 0, 1], "denominator": [1, 0, 0, 0, -1]})
    seg = tracer.trace_horizontal(qd, 1.5 + 0j, 1j, b, inventory=inv)
    assert seg.end_anchor.kind == "closure-to-start"
    assert abs(seg.w_increment.imag) <= 1e-8 * seg.psi_length


def test_recurrence_flag_on_irrational_winding():
    # generic complex phase on a 4-pole differential produces dense winding
    qd, inv, b = setup({"numerator": [np.exp(0.7j)],
                        "denominator": list(np.convolve([-1, 0, 1], [-4, 0, 1])),
                        "sign": -1}, max_psi=2000.0)
    seg = tracer.trace_horizontal(qd, 0.1 + 0.3j, 1.0, b, inventory=inv)
    assert seg.end_anchor.kind == "recurrence-flag"
    assert tracer.recurrence_verdict(seg, b) == "recurrent-suspect"
    assert seg.flagged_cells


def test_infinity_launch_when_simple_pole_at_infinity():
    # dz^2/z^3: pole of order 3 at 0, simple pole at infinity
    qd, inv, b = setup({"numerator": [1], "denominator": [0, 0, 0, 1]})
    assert inv.infinity_entry.kind == "simple-pole"
    segs = tracer.launch_critical(qd, inv, b)
    assert len(segs) == 1
    assert segs[0].start_anchor.point is core.INFINITY
    assert segs[0].end_anchor.kind == "infinite-critical"
