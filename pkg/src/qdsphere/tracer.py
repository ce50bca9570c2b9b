"""Trajectory tracing in the canonical coordinate.

Horizontal trajectories solve dz/dt = 1/s(z) where s is a continuously
tracked branch of sqrt(f); vertical ones use dz/dt = i/s(z).  Unit speed
in the canonical coordinate makes the integration parameter t equal to
the traversed metric length, so length bookkeeping is exact by
construction and the independent quadrature of s dz along the sample
polyline serves as a conservation check (Im must vanish on horizontal
traces).

Termination near a finite critical point uses the local normal form: at
a point of order m with leading coefficient c, the canonical distance of
z to the point is rho = (2/(m+2)) |c|^(1/2) |z-p|^((m+2)/2) and the
trajectory through z misses the point by rho * |sin((m+2) dtheta / 2)|
where dtheta is the angular gap to the nearest trajectory ray.  Entering
trajectories have a miss many orders of magnitude below any flyby, so
the test is a clean threshold rather than a heuristic race.  The gap
between the stopping sample and the critical point itself is integrated
with Gauss-Jacobi quadrature matched to the |z-p|^(m/2) singularity, so
reported lengths do not suffer the stop-offset error.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import INFINITY, CriticalInventory, CriticalPoint, RationalQD, is_infinity
from .errors import (
    BranchContinuationFailure,
    SeedAtCriticalPoint,
    StepSizeUnderflow,
)

__all__ = [
    "TraceBudget",
    "Anchor",
    "TrajectorySegment",
    "trace_horizontal",
    "trace_vertical",
    "launch_critical",
    "recurrence_verdict",
    "launch_offset",
    "hit_radius_at",
    "default_budget",
]

# Dormand-Prince 5(4) tableau
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
       187 / 2100, 1 / 40)

_GAUSS4_X = (0.0694318442029737, 0.3300094782075719,
             0.6699905217924281, 0.9305681557970263)
_GAUSS4_W = (0.1739274225687269, 0.3260725774312731,
             0.3260725774312731, 0.1739274225687269)


@dataclass(frozen=True)
class RecurrenceGrid:
    x0: float
    y0: float
    x1: float
    y1: float
    cells: int = 64
    crossing_cap: int = 16

    def cell_of(self, z: complex):
        if not (self.x0 <= z.real <= self.x1 and self.y0 <= z.imag <= self.y1):
            return None
        i = min(int((z.real - self.x0) / (self.x1 - self.x0) * self.cells),
                self.cells - 1)
        j = min(int((z.imag - self.y0) / (self.y1 - self.y0) * self.cells),
                self.cells - 1)
        return i, j


@dataclass(frozen=True)
class TraceBudget:
    """Caps and detection radii for a single trace.

    ``max_step_dt`` bounds the step length so sampled polylines stay
    geometrically faithful; when ``cap_box`` is set the bound only applies
    inside that (x0, y0, x1, y1) region, letting far-field stretches run
    at full adaptive speed.
    """

    max_psi_length: float
    max_steps: int = 200_000
    hit_radius: float = 1e-3
    grid: RecurrenceGrid | None = None
    rtol: float = 1e-11
    atol: float = 1e-13
    max_step_dt: float = math.inf
    cap_box: tuple | None = None
    escape_radius: float = 1e6

    def __post_init__(self):
        if self.max_psi_length <= 0 or self.max_steps <= 0 or self.hit_radius <= 0:
            raise ValueError("budget quantities must be positive")

    def step_cap(self, z: complex) -> float:
        if self.cap_box is not None:
            x0, y0, x1, y1 = self.cap_box
            if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
                return math.inf
        return self.max_step_dt


@dataclass(frozen=True)
class Anchor:
    kind: str               # finite-critical | infinite-critical | closure-to-start
    #                       # | budget-exhausted | recurrence-flag | seed
    point: object = None    # critical point location (complex or INFINITY)


@dataclass
class TrajectorySegment:
    kind: str                      # "horizontal" | "vertical"
    seed: complex
    direction: complex
    samples: np.ndarray            # complex polyline, integration nodes
    t: np.ndarray                  # cumulative canonical length at samples
    branch: np.ndarray             # tracked sqrt(f) value at samples
    w_increment: complex           # quadrature of s dz along the path + gaps
    psi_length: float              # total canonical length incl. endpoint gaps
    start_anchor: Anchor
    end_anchor: Anchor
    start_gap: float = 0.0
    end_gap: float = 0.0
    cell_counts: dict = field(default_factory=dict)
    flagged_cells: tuple = ()
    closure_mismatch: float = math.inf

    @property
    def closed(self) -> bool:
        return self.end_anchor.kind == "closure-to-start"

    def polyline(self) -> np.ndarray:
        """Samples extended by exact endpoint locations when known."""
        pts = [self.samples]
        if (self.start_anchor.kind == "finite-critical"
                and not is_infinity(self.start_anchor.point)):
            pts.insert(0, np.array([self.start_anchor.point]))
        if (self.end_anchor.kind == "finite-critical"
                and not is_infinity(self.end_anchor.point)):
            pts.append(np.array([self.end_anchor.point]))
        return np.concatenate(pts)

    def metric_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(length, point) interpolation table extended by exact endpoints."""
        ts = [self.t]
        zs = [self.samples]
        if (self.start_anchor.kind == "finite-critical"
                and not is_infinity(self.start_anchor.point) and self.start_gap > 0):
            ts.insert(0, np.array([0.0]))
            zs.insert(0, np.array([self.start_anchor.point]))
        if (self.end_anchor.kind == "finite-critical"
                and not is_infinity(self.end_anchor.point) and self.end_gap > 0):
            ts.append(np.array([self.psi_length]))
            zs.append(np.array([self.end_anchor.point]))
        return np.concatenate(ts), np.concatenate(zs)

    def point_at(self, tq: float) -> complex:
        """Linear interpolation of the polyline at canonical length tq."""
        tt, zz = self.metric_table()
        re = np.interp(tq, tt, zz.real)
        im = np.interp(tq, tt, zz.imag)
        return complex(re, im)


class _LocalModel:
    """Local data of one finite critical point used in hit detection."""

    def __init__(self, qd: RationalQD, pt: CriticalPoint, inventory: CriticalInventory):
        self.point = pt
        self.m = pt.order if pt.kind == "zero" else -1
        self.c = core.local_coefficient(qd, pt)
        self.directions = core.critical_directions(qd, pt)
        self.hit_radius_scale = inventory.nearest_other_distance(pt.location) \
            if not is_infinity(pt.location) else 1.0

    def rho(self, r: float) -> float:
        k = (self.m + 2) / 2.0
        return (abs(self.c) ** 0.5) * (r ** k) / k

    def miss(self, z: complex) -> float:
        dz = z - self.point.location
        r = abs(dz)
        ang = cmath.phase(dz)
        gap = min(abs(_wrap(ang - th)) for th in self.directions)
        return self.rho(r) * abs(math.sin((self.m + 2) * gap / 2.0))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def launch_offset(inventory: CriticalInventory, location: complex) -> float:
    """Seed offset: 1e-4 times the distance to the nearest other critical point."""
    return 1e-4 * inventory.nearest_other_distance(location)


def hit_radius_at(inventory: CriticalInventory, location: complex) -> float:
    return 10.0 * launch_offset(inventory, location)


def default_budget(inventory: CriticalInventory, qd: RationalQD | None = None,
                   max_psi: float | None = None, **overrides) -> TraceBudget:
    """Scale-aware budget: grid over the 3x-inflated critical bounding box,
    offsets tied to critical spacing, and a length cap large enough that
    outbound trajectories actually reach the escape radius."""
    scale = inventory.feature_scale()
    locs = [p.location for p in inventory.finite_points]
    if locs:
        xs = [l.real for l in locs]
        ys = [l.imag for l in locs]
        cx, cy = (max(xs) + min(xs)) / 2, (max(ys) + min(ys)) / 2
        hx = max((max(xs) - min(xs)) / 2, scale / 4) * 3
        hy = max((max(ys) - min(ys)) / 2, scale / 4) * 3
    else:
        cx = cy = 0.0
        hx = hy = 3 * scale
    grid = RecurrenceGrid(cx - hx, cy - hy, cx + hx, cy + hy)
    hit = min((hit_radius_at(inventory, p.location)
               for p in inventory.finite_points
               if not is_infinity(p.location)), default=1e-3 * scale)
    r_esc = 20.0 * (1.0 + max((abs(l) for l in locs), default=1.0))
    step_cap = overrides.pop("max_step_dt", 0.02 * (1.0 + scale))
    if max_psi is None:
        max_psi = 60.0 * (1 + scale)
        if qd is not None and qd.order_at_infinity() >= 3:
            # canonical length to push past the escape radius: integral of
            # |lead|^(1/2) r^((k-4)/2) out to r_esc
            k = qd.order_at_infinity()
            lead = abs(qd.num_array[-1] / qd.den_array[-1]) ** 0.5
            r0 = 1.0 + scale
            p = (k - 2) / 2.0
            psi_esc = lead * (r_esc ** p - r0 ** p) / p
            max_psi = max(max_psi, 2.0 * psi_esc + 20.0 * scale)
    kw = dict(
        max_psi_length=max_psi,
        hit_radius=hit,
        grid=grid,
        escape_radius=r_esc,
        max_step_dt=step_cap,
        cap_box=(grid.x0, grid.y0, grid.x1, grid.y1),
    )
    kw.update(overrides)
    return TraceBudget(**kw)


class _Tracer:
    """One trace run; holds per-run state (branch, grids, hit bookkeeping)."""

    def __init__(self, qd: RationalQD, inventory: CriticalInventory,
                 budget: TraceBudget, unit: complex):
        self.qd = qd
        self.inv = inventory
        self.budget = budget
        self.unit = unit
        self.models = [
            _LocalModel(qd, p, inventory)
            for p in inventory.finite_critical if not is_infinity(p.location)
        ]
        self.pole_list = [
            p for p in inventory.infinite_critical if not is_infinity(p.location)
        ]
        self.inf_entry = inventory.infinity_entry
        self.eps_pole = 1e-3 * inventory.feature_scale()

    def sqrtf(self, z: complex, ref: complex) -> complex:
        v = cmath.sqrt(self.qd.f(z))
        return v if abs(v - ref) <= abs(v + ref) else -v

    def run(self, seed: complex, s0: complex, detect_closure: bool = True,
            skip_start_model=None) -> dict:
        b = self.budget
        z, t = complex(seed), 0.0
        s = s0
        dt = min(0.01 * (1 + abs(seed)), b.step_cap(z))
        samples = [z]
        ts = [0.0]
        branches = [s]
        w_inc = 0.0 + 0.0j

        inside = {i: False for i in range(len(self.models))}
        if skip_start_model is not None:
            inside[skip_start_model] = True
        pole_run: dict[int, int] = {}
        esc_run = 0
        last_abs = abs(z)
        cell_counts: dict = {}
        flagged: list = []
        grid = b.grid
        cur_cell = grid.cell_of(z) if grid else None
        if cur_cell is not None:
            cell_counts[cur_cell] = 1
        closure_armed = False
        direction = self.unit / s

        end = None
        end_gap = 0.0
        w_gap_end = 0.0 + 0.0j
        closure_mismatch = math.inf

        steps = 0
        while True:
            if t >= b.max_psi_length or steps >= b.max_steps:
                end = Anchor("budget-exhausted")
                break
            dt = min(dt, b.max_psi_length - t + 1e-12, b.step_cap(z))
            ok, z_new, s_new, err, reason = self._step(z, s, dt)
            if not ok:
                dt *= 0.5
                if dt < 1e-14 * (1 + abs(z)):
                    hit = self._nearest_model(z)
                    if hit is not None:
                        end, end_gap, w_gap_end = self._finish_at_model(z, s, hit)
                        break
                    if reason == "branch":
                        raise BranchContinuationFailure(
                            f"square-root branch wound around a critical point "
                            f"near z={z}")
                    raise StepSizeUnderflow(f"step underflow at z={z}")
                continue
            tol = b.atol + b.rtol * max(abs(z), abs(z_new))
            if err > tol:
                dt *= max(0.2, 0.9 * (tol / err) ** 0.2)
                if dt < 1e-16 * (1 + abs(z)):
                    raise StepSizeUnderflow(f"step underflow at z={z}")
                continue

            # accepted
            w_inc += self._step_w(z, s, z_new, s_new, dt)
            z_prev, s_prev = z, s
            z, s, t = z_new, s_new, t + dt
            steps += 1
            samples.append(z)
            ts.append(t)
            branches.append(s)
            if err > 0:
                dt = dt * min(5.0, 0.9 * (tol / err) ** 0.2)
            else:
                dt *= 2.0

            # --- recurrence grid ---
            if grid is not None:
                cell = grid.cell_of(z)
                if cell != cur_cell:
                    cur_cell = cell
                    if cell is not None:
                        n = cell_counts.get(cell, 0) + 1
                        cell_counts[cell] = n
                        if n > grid.crossing_cap:
                            flagged.append(cell)
                            end = Anchor("recurrence-flag")
                            break

            # --- finite-critical hits ---
            stop = None
            for i, mod in enumerate(self.models):
                r = abs(z - mod.point.location)
                hr = 10.0 * 1e-4 * mod.hit_radius_scale
                if inside[i]:
                    if r > 2 * hr:
                        inside[i] = False
                    continue
                if r < hr:
                    inside[i] = True
                    rho = mod.rho(r)
                    if mod.miss(z) <= 1e-3 * rho:
                        stop = i
                        break
            if stop is not None:
                end, end_gap, w_gap_end = self._finish_at_model(z, s, stop)
                break

            # --- higher-order pole capture ---
            hit_pole = None
            for j, p in enumerate(self.pole_list):
                r = abs(z - p.location)
                if r < self.eps_pole:
                    prev = pole_run.get(j, (math.inf, 0))
                    run = prev[1] + 1 if r < prev[0] else 0
                    pole_run[j] = (r, run)
                    if run >= 3:
                        hit_pole = p
                        break
                else:
                    pole_run.pop(j, None)
            if hit_pole is not None:
                end = Anchor("infinite-critical", hit_pole.location)
                break

            # --- escape toward infinity ---
            a = abs(z)
            if a > b.escape_radius:
                esc_run = esc_run + 1 if a > last_abs else 0
                if esc_run >= 3 and self.inf_entry is not None:
                    if self.inf_entry.is_finite_critical:
                        end = Anchor("finite-critical", INFINITY)
                        end_gap, w_gap_end = self._gap_at_infinity(z, s)
                    else:
                        end = Anchor("infinite-critical", INFINITY)
                    break
            else:
                esc_run = 0
            last_abs = a

            # --- closure to the seed ---
            if detect_closure:
                d_seed = abs(z - seed)
                if not closure_armed:
                    if d_seed > 2 * b.hit_radius:
                        closure_armed = True
                elif d_seed < b.hit_radius:
                    m_new = self.unit / s
                    ang = abs(_wrap(cmath.phase(m_new) - cmath.phase(direction)))
                    if ang < 1e-3:
                        t_star, z_star = self._refine_closure(
                            z_prev, s_prev, z, s, dt, t, seed, direction)
                        closure_mismatch = abs(z_star - seed)
                        t = t_star
                        samples[-1] = z_star
                        ts[-1] = t_star
                        end = Anchor("closure-to-start")
                        break

        return dict(
            samples=np.array(samples), t=np.array(ts),
            branch=np.array(branches),
            w_inc=w_inc + w_gap_end, t_total=t + end_gap,
            end=end, end_gap=end_gap,
            cells=cell_counts, flagged=tuple(flagged),
            closure_mismatch=closure_mismatch,
        )

    # -- single RK step -------------------------------------------------

    def _rhs(self, z: complex, ref: complex) -> tuple[complex, complex]:
        s = self.sqrtf(z, ref)
        if s == 0:
            raise ZeroDivisionError
        return self.unit / s, s

    def _step(self, z, s, dt):
        try:
            k = []
            for i in range(7):
                zi = z + dt * sum(a * kk for a, kk in zip(_A[i], k))
                di, si = self._rhs(zi, s)
                # branch sanity inside one step
                if abs(cmath.phase(si / s)) > 0.5 * math.pi:
                    return False, z, s, math.inf, "branch"
                k.append(di)
            z5 = z + dt * sum(b * kk for b, kk in zip(_B5, k))
            z4 = z + dt * sum(b * kk for b, kk in zip(_B4, k))
            s5 = self.sqrtf(z5, s)
        except (ZeroDivisionError, OverflowError, ValueError):
            return False, z, s, math.inf, "singular"
        return True, z5, s5, abs(z5 - z4), None

    def _step_w(self, z0, s0, z1, s1, dt) -> complex:
        """Quadrature of s dz over one step along the cubic Hermite path."""
        d0 = dt * self.unit / s0
        d1 = dt * self.unit / s1
        acc = 0.0 + 0.0j
        ref = s0
        for x, w in zip(_GAUSS4_X, _GAUSS4_W):
            h00 = 2 * x ** 3 - 3 * x ** 2 + 1
            h10 = x ** 3 - 2 * x ** 2 + x
            h01 = -2 * x ** 3 + 3 * x ** 2
            h11 = x ** 3 - x ** 2
            g = h00 * z0 + h10 * d0 + h01 * z1 + h11 * d1
            dg = ((6 * x ** 2 - 6 * x) * z0 + (3 * x ** 2 - 4 * x + 1) * d0
                  + (-6 * x ** 2 + 6 * x) * z1 + (3 * x ** 2 - 2 * x) * d1)
            sg = self.sqrtf(g, ref)
            ref = sg
            acc += w * sg * dg
        return acc

    # -- endpoint handling ------------------------------------------------

    def _nearest_model(self, z):
        best, bi = math.inf, None
        for i, mod in enumerate(self.models):
            r = abs(z - mod.point.location)
            if r < best:
                best, bi = r, i
        if bi is not None and best < 10 * 1e-4 * self.models[bi].hit_radius_scale * 2:
            return bi
        return None

    def _finish_at_model(self, z, s, i):
        mod = self.models[i]
        gap, w_gap = _singular_gap(self.qd, mod, z, s, self.unit)
        return Anchor("finite-critical", mod.point.location), gap, w_gap

    def _gap_at_infinity(self, z, s):
        iqd = self.qd.inverted()
        iinv = core.critical_inventory(iqd)
        entry = next(p for p in iinv.finite_points if abs(p.location) < 1e-9)
        mod = _LocalModel(iqd, entry, iinv)
        w = 1.0 / z
        # unit speed transfers: sqrt(f~) dw/dt = sqrt(f) dz/dt, dw = -dz/z^2
        target = -z * z * s
        s_w = cmath.sqrt(iqd.f(w))
        if abs(s_w - target) > abs(s_w + target):
            s_w = -s_w
        return _singular_gap(iqd, mod, w, s_w, self.unit)

    def _refine_closure(self, z0, s0, z1, s1, dt, t1, seed, direction):
        """Newton on the Hermite dense output for the crossing of the normal
        plane through the seed."""
        d0 = dt * self.unit / s0
        d1 = dt * self.unit / s1

        def gamma(x):
            h00 = 2 * x ** 3 - 3 * x ** 2 + 1
            h10 = x ** 3 - 2 * x ** 2 + x
            h01 = -2 * x ** 3 + 3 * x ** 2
            h11 = x ** 3 - x ** 2
            g = h00 * z0 + h10 * d0 + h01 * z1 + h11 * d1
            dg = ((6 * x ** 2 - 6 * x) * z0 + (3 * x ** 2 - 4 * x + 1) * d0
                  + (-6 * x ** 2 + 6 * x) * z1 + (3 * x ** 2 - 2 * x) * d1)
            return g, dg

        x = 1.0
        for _ in range(20):
            g, dg = gamma(x)
            val = ((g - seed) * direction.conjugate()).real
            der = (dg * direction.conjugate()).real
            if der == 0:
                break
            x_new = x - val / der
            if not -0.5 <= x_new <= 1.5:
                break
            if abs(x_new - x) < 1e-15:
                x = x_new
                break
            x = x_new
        g, _ = gamma(x)
        return t1 - dt + x * dt, g


def _singular_gap(qd: RationalQD, mod: _LocalModel, z: complex, s: complex,
                  unit: complex) -> tuple[float, complex]:
    """Length and w-increment of the straight run from z into the critical
    point.

    The substitution u = v^(2/(m+2)) flattens the |z-p|^(m/2) endpoint
    singularity exactly for the local model, and geometrically graded
    Gauss panels absorb the analytic correction, so the result is
    quadrature-grade regardless of how close the integrator stopped.
    The returned w increment follows the direction of motion (z toward
    the critical point) with the branch continued from ``s``.
    """
    p = mod.point.location
    dz = z - p
    r = abs(dz)
    if r == 0:
        return 0.0, 0.0j
    q = 2.0 / (mod.m + 2)
    panels = [(0.5 ** (k + 1), 0.5 ** k) for k in range(12)]
    panels.append((0.0, 0.5 ** 12))
    ref = s
    w_gap = 0.0 + 0.0j
    length = 0.0
    for lo, hi in panels:
        for x, wq in zip(_GAUSS4_X, _GAUSS4_W):
            v = lo + (hi - lo) * x
            u = v ** q
            zz = p + u * dz
            val = cmath.sqrt(qd.f(zz))
            val = val if abs(val - ref) <= abs(val + ref) else -val
            ref = val
            jac = q * v ** (q - 1.0)
            w_gap += wq * (hi - lo) * val * (-dz) * jac
            length += wq * (hi - lo) * abs(val) * r * jac
    return length, w_gap


def _branch_for_direction(qd: RationalQD, seed: complex, direction: complex,
                          unit: complex) -> complex:
    try:
        f = qd.f(seed)
    except ZeroDivisionError:
        raise SeedAtCriticalPoint(f"f is singular at seed {seed}") from None
    if f == 0 or not np.isfinite(f.real) or not np.isfinite(f.imag):
        raise SeedAtCriticalPoint(f"f is singular at seed {seed}")
    s = cmath.sqrt(f)
    m_plus = (unit / s) * direction.conjugate()
    return s if m_plus.real > 0 else -s


def _make_segment(kind, seed, direction, res, start_anchor, start_gap, w_gap_start):
    return TrajectorySegment(
        kind=kind, seed=seed, direction=direction,
        samples=res["samples"], t=res["t"] + start_gap, branch=res["branch"],
        w_increment=res["w_inc"] + w_gap_start,
        psi_length=res["t_total"] + start_gap,
        start_anchor=start_anchor, end_anchor=res["end"],
        start_gap=start_gap, end_gap=res["end_gap"],
        cell_counts=res["cells"], flagged_cells=res["flagged"],
        closure_mismatch=res["closure_mismatch"],
    )


def trace_horizontal(qd: RationalQD, seed: complex, direction: complex,
                     budget: TraceBudget, inventory: CriticalInventory | None = None,
                     detect_closure: bool = True) -> TrajectorySegment:
    """Trace the horizontal trajectory through ``seed``.

    ``direction`` selects which way to run along the trajectory; the
    actual initial tangent is the projection of the direction onto the
    local line field, i.e. the branch of 1/sqrt(f) nearest to it.
    """
    if inventory is None:
        inventory = core.critical_inventory(qd)
    direction = direction / abs(direction)
    tr = _Tracer(qd, inventory, budget, 1.0 + 0.0j)
    s0 = _branch_for_direction(qd, seed, direction, 1.0 + 0.0j)
    res = tr.run(seed, s0, detect_closure=detect_closure)
    return _make_segment("horizontal", seed, direction, res, Anchor("seed"), 0.0, 0.0j)


def trace_vertical(qd: RationalQD, seed: complex, budget: TraceBudget,
                   direction: complex = 1j,
                   inventory: CriticalInventory | None = None,
                   detect_closure: bool = True) -> TrajectorySegment:
    """Trace the vertical trajectory through ``seed`` (toward ``direction``)."""
    if inventory is None:
        inventory = core.critical_inventory(qd)
    direction = direction / abs(direction)
    tr = _Tracer(qd, inventory, budget, 1.0j)
    s0 = _branch_for_direction(qd, seed, direction, 1.0j)
    res = tr.run(seed, s0, detect_closure=detect_closure)
    return _make_segment("vertical", seed, direction, res, Anchor("seed"), 0.0, 0.0j)


def launch_critical(qd: RationalQD, inventory: CriticalInventory,
                    budget: TraceBudget) -> list[TrajectorySegment]:
    """One horizontal trace per trajectory ray of every finite critical point.

    Results are ordered by (critical point index, ray angle). Launches are
    seeded at the scale-aware offset along each ray with the matched
    branch, and the seed-to-vertex gap is folded into the reported length.
    """
    out = []
    unit = 1.0 + 0.0j
    for idx, pt in enumerate(inventory.finite_critical):
        if is_infinity(pt.location):
            out.extend(_launch_from_infinity(qd, inventory, budget))
            continue
        tr = _Tracer(qd, inventory, budget, unit)
        models = {m.point.location: i for i, m in enumerate(tr.models)}
        mi = models[pt.location]
        mod = tr.models[mi]
        delta = launch_offset(inventory, pt.location)
        for theta in core.critical_directions(qd, pt):
            seed = pt.location + delta * cmath.exp(1j * theta)
            s0 = _branch_for_direction(qd, seed, cmath.exp(1j * theta), unit)
            gap, w_gap = _singular_gap(qd, mod, seed, s0, unit)
            # the gap quadrature integrates inward; the launch runs outward
            w_gap = -w_gap
            res = tr.run(seed, s0, detect_closure=False, skip_start_model=mi)
            out.append(_make_segment(
                "horizontal", seed, cmath.exp(1j * theta), res,
                Anchor("finite-critical", pt.location), gap, w_gap))
    return out


def _launch_from_infinity(qd, inventory, budget):
    """Launches out of a finite-critical point at infinity, seeded in the
    1/z chart and traced in the main chart."""
    iqd = qd.inverted()
    iinv = core.critical_inventory(iqd)
    entry = next(p for p in iinv.finite_points if abs(p.location) < 1e-9)
    mod = _LocalModel(iqd, entry, iinv)
    delta = launch_offset(iinv, 0.0)
    out = []
    unit = 1.0 + 0.0j
    tr = _Tracer(qd, inventory, budget, unit)
    for theta in core.critical_directions(iqd, entry):
        w_seed = delta * cmath.exp(1j * theta)
        z_seed = 1.0 / w_seed
        dir_z = -cmath.exp(-1j * theta)
        s0 = _branch_for_direction(qd, z_seed, dir_z, unit)
        s0w = cmath.sqrt(iqd.f(w_seed))
        gap, w_gap = _singular_gap(iqd, mod, w_seed, s0w, unit)
        res = tr.run(z_seed, s0, detect_closure=False)
        out.append(_make_segment(
            "horizontal", z_seed, dir_z, res,
            Anchor("finite-critical", INFINITY), gap, -w_gap))
    return out


def recurrence_verdict(segment: TrajectorySegment,
                       budget: TraceBudget) -> str:
    """Classify a completed trace: closed, recurrent-suspect, or transient.

    A recurrent-suspect verdict is evidence of a dense trajectory closure
    (cell crossings above the cap without closing up), not a proof; report
    consumers must label it as such.
    """
    if segment.end_anchor.kind == "closure-to-start":
        return "closed"
    if segment.end_anchor.kind == "recurrence-flag":
        return "recurrent-suspect"
    cap = budget.grid.crossing_cap if budget.grid else 16
    if segment.cell_counts and max(segment.cell_counts.values()) > cap:
        return "recurrent-suspect"
    return "transient"
