"""Rational quadratic differentials on the sphere and their local data.

A differential is ``sign * U1(z)/U2(z) * dz^2`` in the affine chart. The
point at infinity is a first-class citizen: its order follows from the
chart change w = 1/z (dz^2 = dw^2 / w^4), so the pole order there is
``4 + deg U1 - deg U2``, negative values meaning a zero.  With that
bookkeeping the sphere balance

    sum of pole orders - sum of zero orders = 4

holds by construction for every reduced differential; it is still
asserted explicitly whenever an inventory is built.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import poly
from .errors import (
    EmptyPolynomial,
    NotDoublePole,
    NotFiniteCritical,
    UnreducibleWithinTolerance,
    ZeroDifferential,
)

__all__ = [
    "INFINITY",
    "RationalQD",
    "CriticalPoint",
    "CriticalInventory",
    "SqrtResidue",
    "parse_differential",
    "critical_inventory",
    "sqrt_residue",
    "critical_directions",
]


class _InfinityPoint:
    """Distinguished symbolic location for the point at infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "infinity"

    def __deepcopy__(self, memo):
        return self


INFINITY = _InfinityPoint()


def is_infinity(loc) -> bool:
    return loc is INFINITY


@dataclass(frozen=True)
class RationalQD:
    """Reduced rational quadratic differential sign * U1/U2 * dz^2.

    Coefficients ascend by degree and share no common root; both leading
    coefficients are nonzero.
    """

    numerator: tuple
    denominator: tuple
    sign: int = 1

    def __post_init__(self):
        num = poly.trim(self.numerator)
        den = poly.trim(self.denominator)
        object.__setattr__(self, "numerator", tuple(num))
        object.__setattr__(self, "denominator", tuple(den))
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def num_array(self) -> np.ndarray:
        return np.asarray(self.numerator, dtype=complex)

    @property
    def den_array(self) -> np.ndarray:
        return np.asarray(self.denominator, dtype=complex)

    @property
    def deg_num(self) -> int:
        return len(self.numerator) - 1

    @property
    def deg_den(self) -> int:
        return len(self.denominator) - 1

    def f(self, z):
        """Coefficient function of dz^2; pole-safe only off the poles."""
        return self.sign * poly.polyval(self.num_array, z) / poly.polyval(self.den_array, z)

    def order_at_infinity(self) -> int:
        """Pole order at infinity (negative = zero of that order)."""
        return 4 + self.deg_num - self.deg_den

    def inverted(self) -> "RationalQD":
        """The same differential in the chart w = 1/z.

        f~(w) = f(1/w) / w^4; the numerator/denominator are the coefficient
        reversals padded by the monomial that carries the order at infinity.
        """
        rn = self.num_array[::-1]
        rd = self.den_array[::-1]
        k = self.deg_den - self.deg_num - 4
        if k >= 0:
            num = np.concatenate([np.zeros(k, dtype=complex), rn])
            den = rd
        else:
            num = rn
            den = np.concatenate([np.zeros(-k, dtype=complex), rd])
        return RationalQD(tuple(num), tuple(den), self.sign)

    def scaled(self, factor: complex) -> "RationalQD":
        num = self.num_array * factor
        return RationalQD(tuple(num), self.denominator, self.sign)


@dataclass(frozen=True)
class CriticalPoint:
    location: object          # complex or INFINITY
    kind: str                 # "zero" | "simple-pole" | "higher-pole"
    order: int                # zero order m >= 1, or pole order >= 1

    @property
    def is_finite_critical(self) -> bool:
        return self.kind in ("zero", "simple-pole")


@dataclass(frozen=True)
class CriticalInventory:
    """All critical points of a differential, infinity included."""

    finite_points: tuple
    infinity_entry: CriticalPoint | None

    @property
    def all_points(self) -> tuple:
        pts = self.finite_points
        if self.infinity_entry is not None:
            pts = pts + (self.infinity_entry,)
        return pts

    @property
    def finite_critical(self) -> tuple:
        """Zeros and simple poles (the trajectory endpoints)."""
        return tuple(p for p in self.all_points if p.is_finite_critical)

    @property
    def infinite_critical(self) -> tuple:
        """Poles of order >= 2."""
        return tuple(p for p in self.all_points if p.kind == "higher-pole")

    def balance(self) -> int:
        pole = sum(p.order for p in self.all_points if p.kind != "zero")
        zero = sum(p.order for p in self.all_points if p.kind == "zero")
        return pole - zero

    def feature_scale(self) -> float:
        locs = [p.location for p in self.finite_points]
        if len(locs) < 2:
            return 1.0 + max((abs(l) for l in locs), default=0.0)
        d = max(abs(a - b) for i, a in enumerate(locs) for b in locs[i + 1:])
        return max(d, 1e-12)

    def nearest_other_distance(self, location: complex) -> float:
        ds = [abs(p.location - location) for p in self.finite_points
              if abs(p.location - location) > 1e-13]
        if not ds:
            return 1.0 + abs(location)
        return min(ds)


@dataclass(frozen=True)
class SqrtResidue:
    """Residue of sqrt(Psi) at a double pole, defined up to sign.

    ``value`` is the representative with nonnegative imaginary part
    (ties broken toward nonnegative real part); consumers must treat it
    as the pair +-value.  ``value**2`` is the branch-free invariant: the
    coefficient of (z-p)^-2 in the Laurent expansion of f.
    """

    pole: object
    value: complex

    @property
    def square(self) -> complex:
        return self.value ** 2


def _normalize_sqrt(c: complex) -> complex:
    v = cmath.sqrt(c)
    if v.imag < 0 or (v.imag == 0 and v.real < 0):
        v = -v
    return v


def parse_differential(doc) -> RationalQD:
    """Build a reduced RationalQD from the structured input document.

    ``doc`` is a mapping with keys ``numerator``, ``denominator`` (lists of
    [re, im] pairs or plain numbers, ascending degree) and optional
    ``sign`` (+1/-1, default +1).  Common roots within 1e-8 of the root
    scale are cancelled; root pairs closer than 1e-6 but not within the
    cancellation tolerance raise UnreducibleWithinTolerance instead of
    guessing either way.
    """
    num = _coeffs_from_doc(doc.get("numerator"))
    den = _coeffs_from_doc(doc.get("denominator"))
    sign = int(doc.get("sign", 1))
    num = poly.trim(num)
    den = poly.trim(den)
    if np.all(num == 0):
        raise ZeroDifferential("numerator is identically zero")
    if np.all(den == 0):
        raise ZeroDifferential("denominator is identically zero")
    num, den = _reduce(num, den)
    return RationalQD(tuple(num), tuple(den), sign)


def _coeffs_from_doc(entry) -> np.ndarray:
    if entry is None or (hasattr(entry, "__len__") and len(entry) == 0):
        raise EmptyPolynomial("missing or empty coefficient array")
    out = []
    for item in entry:
        if isinstance(item, (list, tuple)):
            re, im = (list(item) + [0.0])[:2]
            out.append(complex(re, im))
        else:
            out.append(complex(item))
    return np.asarray(out, dtype=complex)


def _reduce(num: np.ndarray, den: np.ndarray):
    if len(num) == 1 or len(den) == 1:
        return num, den
    rn = poly.roots(num)
    rd = poly.roots(den)
    scale = 1.0 + max(
        float(np.abs(rn).max()) if len(rn) else 0.0,
        float(np.abs(rd).max()) if len(rd) else 0.0,
    )
    cancel_tol = 1e-8 * scale
    suspect_tol = 1e-6 * scale

    used_d: set[int] = set()
    cancel_n: list[int] = []
    for i, u in enumerate(rn):
        dists = [(abs(u - v), j) for j, v in enumerate(rd) if j not in used_d]
        if not dists:
            continue
        d, j = min(dists)
        if d <= cancel_tol:
            cancel_n.append(i)
            used_d.add(j)
        elif d <= suspect_tol:
            raise UnreducibleWithinTolerance(
                f"roots {u:.12g} and {rd[j]:.12g} are {d:.3e} apart: too close "
                f"to keep, too far to cancel")
    if not cancel_n:
        return num, den
    keep_n = [r for i, r in enumerate(rn) if i not in cancel_n]
    keep_d = [r for j, r in enumerate(rd) if j not in used_d]
    new_num = poly.from_roots(keep_n, lead=num[-1])
    new_den = poly.from_roots(keep_d, lead=den[-1])
    return new_num, new_den


def critical_inventory(qd: RationalQD, rng=None) -> CriticalInventory:
    """Locate every zero and pole, attach orders, and assert the balance."""
    pts: list[CriticalPoint] = []
    if qd.deg_num > 0:
        for loc, mult in poly.roots_with_multiplicity(qd.num_array, rng=rng):
            pts.append(CriticalPoint(loc, "zero", mult))
    if qd.deg_den > 0:
        for loc, mult in poly.roots_with_multiplicity(qd.den_array, rng=rng):
            kind = "simple-pole" if mult == 1 else "higher-pole"
            pts.append(CriticalPoint(loc, kind, mult))

    k = qd.order_at_infinity()
    inf_entry = None
    if k > 0:
        kind = "simple-pole" if k == 1 else "higher-pole"
        inf_entry = CriticalPoint(INFINITY, kind, k)
    elif k < 0:
        inf_entry = CriticalPoint(INFINITY, "zero", -k)

    inv = CriticalInventory(tuple(pts), inf_entry)
    bal = inv.balance()
    if bal != 4:
        raise AssertionError(f"sphere balance violated: {bal} != 4")
    return inv


def local_coefficient(qd: RationalQD, point: CriticalPoint) -> complex:
    """Leading Laurent coefficient c with f(z) ~ c (z-p)^m near the point.

    m is the zero order (positive) or minus the pole order.  For the
    point at infinity the coefficient is taken in the w = 1/z chart.
    """
    if is_infinity(point.location):
        inv_qd = qd.inverted()
        return local_coefficient(
            inv_qd, CriticalPoint(0.0 + 0.0j, point.kind, point.order))
    p = point.location
    if point.kind == "zero":
        m = point.order
        num_defl = poly.deflate(qd.num_array, p, m)
        return qd.sign * poly.polyval(num_defl, p) / poly.polyval(qd.den_array, p)
    m = point.order
    den_defl = poly.deflate(qd.den_array, p, m)
    return qd.sign * poly.polyval(qd.num_array, p) / poly.polyval(den_defl, p)


def sqrt_residue(qd: RationalQD, pole) -> SqrtResidue:
    """Sign-normalized residue of sqrt(Psi) at a double pole.

    ``pole`` may be a complex location or INFINITY.  The squared value is
    the local Laurent coefficient; its sign/realness is what downstream
    predicates consume (a circle of closed trajectories surrounds the
    pole exactly when the square is real and negative).
    """
    if is_infinity(pole):
        if qd.order_at_infinity() != 2:
            raise NotDoublePole(
                f"infinity has order {qd.order_at_infinity()}, not 2")
        c = qd.sign * qd.num_array[-1] / qd.den_array[-1]
        return SqrtResidue(INFINITY, _normalize_sqrt(c))
    p = complex(pole)
    den = qd.den_array
    # order check: p must be a root of multiplicity exactly 2
    d1 = poly.polyval(den, p)
    scale = poly.coeff_scale(den) * max(1.0, abs(p)) ** qd.deg_den
    defl1 = poly.deflate(den, p, 1)
    defl2 = poly.deflate(den, p, 2)
    if abs(d1) > 1e-6 * scale or abs(poly.polyval(defl1, p)) > 1e-6 * scale:
        raise NotDoublePole(f"{p} is not a double pole")
    if len(defl2) > 1 and abs(poly.polyval(defl2, p)) <= 1e-9 * scale:
        raise NotDoublePole(f"{p} has pole order > 2")
    c = qd.sign * poly.polyval(qd.num_array, p) / poly.polyval(defl2, p)
    return SqrtResidue(p, _normalize_sqrt(c))


def critical_directions(qd: RationalQD, point: CriticalPoint) -> list[float]:
    """Angles (radians in [0, 2pi)) of the trajectory rays at a finite
    critical point: m + 2 equally spaced rays at a zero of order m, one
    ray at a simple pole.  Each angle solves
    arg(c) + (m + 2) * theta = 0  (mod 2pi) for the local coefficient c.

    For the point at infinity the angles are reported in the w = 1/z chart.
    """
    if not point.is_finite_critical:
        raise NotFiniteCritical(f"{point.location} is not a finite critical point")
    m = point.order if point.kind == "zero" else -1
    c = local_coefficient(qd, point)
    k = m + 2
    base = -cmath.phase(c) / k
    return sorted((base + 2 * math.pi * j / k) % (2 * math.pi) for j in range(k))
