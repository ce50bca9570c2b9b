"""Critical graph, ribbon structure, and the metric Reeb graph.

The critical graph is assembled by pairing launched traces end to end; a
trajectory traced from both of its endpoints is one edge, and rays into
higher-order poles stay as half-edges of infinite canonical length.

Each connected component carries a ribbon (fat-graph) structure: the
counterclockwise cyclic order sigma0 of edge-ends around every vertex and
the end-swapping involution sigma1.  Orbits of sigma0 o sigma1 walk the
boundaries of the complement domains with the domain on the RIGHT of the
direction of travel (a consequence of sigma0 being counterclockwise; the
triangle test in the suite pins this orientation).  Half-edge ends are
punctures: their walks are maximal chains entering from a pole and
leaving into one.

The Reeb graph has one vertex per component and one edge per complement
domain.  Domains are discovered by probing: a horizontal probe just off a
boundary orbit either closes up (ring or circle domain, its length is the
domain width) or runs pole to pole (strip or end); a vertical probe
seeded on the boundary itself measures the domain height as the vertical
increment to the first crossing of another critical edge, infinite when
the probe falls into a pole instead.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import core, tracer
from .core import INFINITY, CriticalInventory, RationalQD, is_infinity
from .errors import (
    ChaoticInput,
    GluingAmbiguity,
    NoFiniteCritical,
    ProbeInconsistency,
)

__all__ = [
    "CriticalGraph",
    "FatGraph",
    "BoundaryOrbit",
    "ReebGraph",
    "ReebEdge",
    "build_critical_graph",
    "fat_graph",
    "build_reeb",
]

LEFT = +1
RIGHT = -1


@dataclass(frozen=True)
class CGVertex:
    id: int
    location: object              # complex or INFINITY
    point: core.CriticalPoint
    directions: tuple             # trajectory ray angles (chart at the vertex)


@dataclass
class CGEdge:
    id: int
    tail: int
    head: int | None              # None: open half-edge into a pole
    tail_angle: float
    head_angle: float | None
    pole_end: object = None       # pole location for open half-edges
    psi_length: float = math.inf
    segment: tracer.TrajectorySegment | None = None

    @property
    def is_closed(self) -> bool:
        return self.head is not None


@dataclass
class CriticalGraph:
    vertices: list
    edges: list

    def components(self) -> list[frozenset]:
        parent = {v.id: v.id for v in self.vertices}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            if e.is_closed:
                parent[find(e.tail)] = find(e.head)
        groups: dict[int, set] = {}
        for v in self.vertices:
            groups.setdefault(find(v.id), set()).add(v.id)
        return [frozenset(g) for g in
                sorted(groups.values(), key=lambda g: min(g))]

    def edge_point(self, edge: CGEdge, tq: float) -> complex:
        return edge.segment.point_at(tq)

    def all_segment_arrays(self):
        """Concatenated sample chords of every edge, for crossing tests."""
        p0, p1, ids = [], [], []
        for e in self.edges:
            z = e.segment.samples
            if len(z) >= 2:
                p0.append(z[:-1])
                p1.append(z[1:])
                ids.append(np.full(len(z) - 1, e.id))
        if not p0:
            return (np.zeros(0, complex), np.zeros(0, complex),
                    np.zeros(0, int))
        return np.concatenate(p0), np.concatenate(p1), np.concatenate(ids)


@dataclass(frozen=True)
class Flag:
    vertex: int
    edge: int
    end: int          # 0 = tail end, 1 = head end
    angle: float      # outgoing ray angle at the vertex


@dataclass
class BoundaryOrbit:
    id: int
    component: int
    flag_seq: tuple            # indices into FatGraph.flags, in walk order
    entering_edge: int | None  # open walks: edge whose pole side enters first
    compact: bool
    total_length: float
    sides: tuple               # ((edge_id, side), ...) bounded by this orbit


@dataclass
class FatGraph:
    component: int
    vertex_ids: tuple
    edge_ids: tuple
    flags: tuple               # Flag records
    sigma0: dict               # flag index -> flag index (ccw at vertex)
    sigma1: dict               # flag index -> flag index (closed edges only)
    boundary_orbits: tuple
    genus: int | None

    def orbit_count(self) -> int:
        return len(self.boundary_orbits)


@dataclass
class ReebEdge:
    id: int
    kind: str                  # ring | circle | strip | end
    length: float
    width: float
    ends: tuple                # (component, component) or (component, None)
    orbit_ids: tuple           # orbit at ends[0], optionally orbit at ends[1]
    leaf_pole: object = None   # pole behind the leaf end (circle/end)

    @property
    def is_leaf_edge(self) -> bool:
        return self.ends[1] is None


@dataclass
class ReebGraph:
    vertices: list             # component ids 0..n-1 (index = id)
    members: list              # frozenset of critical-graph vertex ids each
    edges: list
    fat_graphs: list
    orbit_lookup: dict         # orbit id -> BoundaryOrbit
    side_orbit: dict           # (edge_id, side) -> orbit id
    orbit_to_reeb: dict = field(default_factory=dict)  # orbit id -> (edge id, end)

    def edge_incidences(self, cg_edge_id: int):
        """The (reeb edge, end) attachments of the two sides of a critical
        edge; a side bounded by the same orbit twice appears twice."""
        out = []
        for side in (LEFT, RIGHT):
            orbit = self.side_orbit[(cg_edge_id, side)]
            out.append(self.orbit_to_reeb[orbit])
        return out

    def finite_edges(self):
        return [e for e in self.edges if math.isfinite(e.length)]


# --------------------------------------------------------------------------
# critical graph assembly
# --------------------------------------------------------------------------

def build_critical_graph(segments: list, inventory: CriticalInventory,
                         qd: RationalQD | None = None) -> CriticalGraph:
    """Glue launched trajectory segments into the embedded critical graph.

    Two traces that run the same trajectory from opposite ends are merged
    into a single edge; the merge requires reciprocal endpoint slots and
    canonical lengths agreeing to 1e-6 relative, anything else raises
    GluingAmbiguity.
    """
    verts = []
    slot_of = {}
    for pt in inventory.finite_critical:
        dirs = tuple(core.critical_directions(qd, pt)) if qd is not None else ()
        vid = len(verts)
        verts.append(CGVertex(vid, pt.location, pt, dirs))
        slot_of[_loc_key(pt.location)] = vid

    by_slot: dict[tuple, tracer.TrajectorySegment] = {}
    for seg in segments:
        if seg.end_anchor.kind in ("budget-exhausted", "recurrence-flag"):
            raise GluingAmbiguity(
                f"launch from {seg.start_anchor.point} ended "
                f"{seg.end_anchor.kind}; cannot assemble the critical graph")
        vid = slot_of[_loc_key(seg.start_anchor.point)]
        slot = _direction_slot(verts[vid], _launch_angle(verts[vid], seg))
        key = (vid, slot)
        if key in by_slot:
            raise GluingAmbiguity(f"two launches share ray slot {key}")
        by_slot[key] = seg

    for v in verts:
        want = len(v.directions)
        got = sum(1 for (vid, _s) in by_slot if vid == v.id)
        if got != want:
            raise GluingAmbiguity(
                f"vertex {v.location}: {got} launches for {want} rays")

    edges = []
    consumed = set()
    for key in sorted(by_slot):
        if key in consumed:
            continue
        seg = by_slot[key]
        vid, slot = key
        theta = verts[vid].directions[slot]
        anchor = seg.end_anchor
        if anchor.kind == "infinite-critical":
            edges.append(CGEdge(
                id=len(edges), tail=vid, head=None,
                tail_angle=theta, head_angle=None,
                pole_end=anchor.point, psi_length=math.inf, segment=seg))
            consumed.add(key)
            continue
        wid = slot_of[_loc_key(anchor.point)]
        wslot = _direction_slot(verts[wid], _arrival_angle(verts[wid], seg))
        back_key = (wid, wslot)
        if back_key == key:
            raise GluingAmbiguity(
                f"trace from {key} arrives back along its own ray")
        if back_key in consumed:
            raise GluingAmbiguity(f"slot {back_key} matched twice")
        back = by_slot.get(back_key)
        if back is None:
            raise GluingAmbiguity(f"no reverse launch at {back_key}")
        if back.end_anchor.kind != "finite-critical" or \
                _loc_key(back.end_anchor.point) != _loc_key(verts[vid].location):
            raise GluingAmbiguity(
                f"launches {key} and {back_key} are not reciprocal")
        rel = abs(seg.psi_length - back.psi_length) / max(seg.psi_length, 1e-300)
        if rel > 1e-6:
            raise GluingAmbiguity(
                f"paired traces disagree on length by {rel:.2e} relative")
        edges.append(CGEdge(
            id=len(edges), tail=vid, head=wid,
            tail_angle=theta, head_angle=verts[wid].directions[wslot],
            psi_length=0.5 * (seg.psi_length + back.psi_length), segment=seg))
        consumed.add(key)
        consumed.add(back_key)

    return CriticalGraph(verts, edges)


def _loc_key(loc) -> tuple:
    if is_infinity(loc):
        return ("inf",)
    return (round(loc.real, 9), round(loc.imag, 9))


def _chart_point(vertex: CGVertex, z: complex) -> complex:
    """Displacement from the vertex in the chart its ray angles live in."""
    if is_infinity(vertex.location):
        return 1.0 / z
    return z - vertex.location


def _launch_angle(vertex: CGVertex, seg) -> float:
    return cmath.phase(_chart_point(vertex, complex(seg.samples[0])))


def _arrival_angle(vertex: CGVertex, seg) -> float:
    return cmath.phase(_chart_point(vertex, complex(seg.samples[-1])))


def _direction_slot(vertex: CGVertex, angle: float) -> int:
    gaps = [abs(_wrap(angle - th)) for th in vertex.directions]
    slot = int(np.argmin(gaps))
    if gaps[slot] > 0.2:
        raise GluingAmbiguity(
            f"angle {angle:.4f} matches no ray of vertex {vertex.location} "
            f"(directions {vertex.directions})")
    return slot


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


# --------------------------------------------------------------------------
# fat graphs and boundary walks
# --------------------------------------------------------------------------

def fat_graph(cg: CriticalGraph, component: frozenset,
              component_id: int = 0) -> FatGraph:
    """Ribbon structure of one connected component of the critical graph."""
    edge_ids = tuple(sorted(
        e.id for e in cg.edges if e.tail in component
        or (e.head is not None and e.head in component)))
    flags: list[Flag] = []
    for eid in edge_ids:
        e = cg.edges[eid]
        flags.append(Flag(e.tail, e.id, 0, e.tail_angle))
        if e.is_closed:
            flags.append(Flag(e.head, e.id, 1, e.head_angle))

    by_vertex: dict[int, list[int]] = {}
    for i, fl in enumerate(flags):
        by_vertex.setdefault(fl.vertex, []).append(i)
    sigma0 = {}
    for vid, idxs in by_vertex.items():
        idxs = sorted(idxs, key=lambda i: flags[i].angle)
        for a, b in zip(idxs, idxs[1:] + idxs[:1]):
            sigma0[a] = b

    sigma1 = {}
    end_of = {}
    for i, fl in enumerate(flags):
        end_of[(fl.edge, fl.end)] = i
    for eid in edge_ids:
        e = cg.edges[eid]
        if e.is_closed:
            a, b = end_of[(eid, 0)], end_of[(eid, 1)]
            sigma1[a] = b
            sigma1[b] = a

    orbits = _boundary_walks(cg, flags, sigma0, sigma1, component_id)

    nv = len(by_vertex)
    ne = len(edge_ids)
    genus = None
    if all(cg.edges[eid].is_closed for eid in edge_ids):
        chi = nv - ne + len(orbits)
        if chi % 2 != 0 or chi > 2:
            raise GluingAmbiguity(
                f"component {component_id}: V-E+B = {chi} is not 2-2g")
        genus = (2 - chi) // 2

    return FatGraph(
        component=component_id,
        vertex_ids=tuple(sorted(by_vertex)),
        edge_ids=edge_ids,
        flags=tuple(flags),
        sigma0=sigma0,
        sigma1=sigma1,
        boundary_orbits=tuple(orbits),
        genus=genus,
    )


def _flag_side(cg: CriticalGraph, fl: Flag) -> int:
    """Polyline side of the domain bounded by this traversal (domain on the
    right of travel; travel from the tail runs the stored direction)."""
    return RIGHT if fl.end == 0 else LEFT


def _boundary_walks(cg, flags, sigma0, sigma1, component_id):
    n = len(flags)
    nxt = {i: sigma0[sigma1[i]] for i in range(n) if i in sigma1}
    starts = [sigma0[i] for i in range(n) if i not in sigma1]

    orbits = []
    visited = set()

    def walk_from(s, entering_edge):
        seq = [s]
        visited.add(s)
        cur = s
        while cur in nxt:
            cur = nxt[cur]
            if cur in seq and cur == s:
                break
            seq.append(cur)
            visited.add(cur)
        return seq

    for s in starts:
        seq = []
        cur = s
        while True:
            seq.append(cur)
            visited.add(cur)
            if cur not in nxt:       # open end: escape to the pole
                break
            cur = nxt[cur]
        entering = _entering_edge(flags, sigma0, s)
        sides = [(flags[i].edge, _flag_side(cg, flags[i])) for i in seq]
        sides.append((entering, _entering_side(cg)))
        orbits.append(BoundaryOrbit(
            id=-1, component=component_id, flag_seq=tuple(seq),
            entering_edge=entering, compact=False, total_length=math.inf,
            sides=tuple(sides)))

    for i in range(n):
        if i in visited:
            continue
        seq = [i]
        visited.add(i)
        cur = nxt[i]
        while cur != i:
            seq.append(cur)
            visited.add(cur)
            cur = nxt[cur]
        total = sum(cg.edges[flags[j].edge].psi_length for j in seq)
        sides = tuple((flags[j].edge, _flag_side(cg, flags[j])) for j in seq)
        orbits.append(BoundaryOrbit(
            id=-1, component=component_id, flag_seq=tuple(seq),
            entering_edge=None, compact=True, total_length=total,
            sides=sides))
    return orbits


def _entering_edge(flags, sigma0, start):
    # start = sigma0(y) for exactly one open flag y at the same vertex
    for i, fl in enumerate(flags):
        if sigma0.get(i) == start and True:
            if i not in ():
                pass
    for i in sigma0:
        if sigma0[i] == start:
            return flags[i].edge
    raise AssertionError("walk start without predecessor")


def _entering_side(cg) -> int:
    # entering traversal runs pole -> vertex, i.e. against the stored
    # direction of the half-edge, putting the domain on its left side
    return LEFT


# --------------------------------------------------------------------------
# Reeb graph
# --------------------------------------------------------------------------

def build_reeb(qd: RationalQD, cg: CriticalGraph,
               budget: tracer.TraceBudget,
               inventory: CriticalInventory | None = None,
               flags_recurrent: bool = False) -> ReebGraph:
    """Quotient of the complement domains with lengths, widths, and kinds.

    Raises NoFiniteCritical for the closed-form degenerate differentials
    (no finite critical points) and ChaoticInput when the trace suite
    carries recurrence evidence.
    """
    if flags_recurrent:
        raise ChaoticInput("trace suite carries recurrence flags")
    if not cg.vertices:
        raise NoFiniteCritical("empty critical graph")
    if inventory is None:
        inventory = core.critical_inventory(qd)

    comps = cg.components()
    fgs = [fat_graph(cg, comp, i) for i, comp in enumerate(comps)]

    orbits = []
    side_orbit = {}
    for fg in fgs:
        for ob in fg.boundary_orbits:
            ob.id = len(orbits)
            orbits.append(ob)
            for key in ob.sides:
                if key in side_orbit:
                    raise GluingAmbiguity(
                        f"edge side {key} claimed by two boundary walks")
                side_orbit[key] = ob.id
    for e in cg.edges:
        for side in (LEFT, RIGHT):
            if (e.id, side) not in side_orbit:
                raise GluingAmbiguity(f"edge side {(e.id, side)} unclaimed")

    probes = [_probe_orbit(qd, cg, inventory, budget, ob) for ob in orbits]

    reeb_edges = []
    orbit_to_reeb = {}
    linked = set()
    for ob in orbits:
        if ob.id in linked:
            continue
        pr = probes[ob.id]
        if pr["far_side_key"] is None:
            kind = "circle" if pr["closed"] else "end"
            width = ob.total_length if pr["closed"] else math.inf
            if pr["closed"]:
                _check_width(pr, ob, None)
            eid = len(reeb_edges)
            reeb_edges.append(ReebEdge(
                id=eid, kind=kind, length=math.inf, width=width,
                ends=(ob.component, None), orbit_ids=(ob.id,),
                leaf_pole=pr["leaf_pole"]))
            orbit_to_reeb[ob.id] = (eid, 0)
            linked.add(ob.id)
            continue

        other = orbits[side_orbit[pr["far_side_key"]]]
        pr2 = probes[other.id]
        if pr2["far_orbit"] != ob.id:
            raise ProbeInconsistency(
                f"orbits {ob.id} and {other.id} disagree on their domain")
        if pr2["closed"] != pr["closed"]:
            raise ProbeInconsistency(
                f"probe kinds disagree across domain {ob.id}/{other.id}")
        length = 0.5 * (pr["length"] + pr2["length"])
        if abs(pr["length"] - pr2["length"]) > 1e-3 * max(length, 1e-12):
            raise ProbeInconsistency(
                f"domain height mismatch {pr['length']} vs {pr2['length']}")
        if pr["closed"]:
            kind = "ring"
            _check_width(pr, ob, other)
            width = 0.5 * (ob.total_length + other.total_length)
        else:
            kind = "strip"
            width = math.inf
        eid = len(reeb_edges)
        reeb_edges.append(ReebEdge(
            id=eid, kind=kind, length=length, width=width,
            ends=(ob.component, other.component),
            orbit_ids=(ob.id, other.id)))
        orbit_to_reeb[ob.id] = (eid, 0)
        orbit_to_reeb[other.id] = (eid, 1)
        linked.add(ob.id)
        linked.add(other.id)

    return ReebGraph(
        vertices=list(range(len(comps))),
        members=[set(c) for c in comps],
        edges=reeb_edges,
        fat_graphs=fgs,
        orbit_lookup={ob.id: ob for ob in orbits},
        side_orbit=side_orbit,
        orbit_to_reeb=orbit_to_reeb,
    )


def _check_width(pr, ob, other):
    for o in (ob, other):
        if o is None or not math.isfinite(o.total_length):
            continue
        rel = abs(pr["width"] - o.total_length) / max(o.total_length, 1e-300)
        if rel > 1e-4:
            raise ProbeInconsistency(
                f"probe width {pr['width']:.6g} vs boundary length "
                f"{o.total_length:.6g} of orbit {o.id} ({rel:.1e} relative)")


def _probe_orbit(qd, cg, inventory, budget, orbit) -> dict:
    """Classify the domain on one side of a boundary orbit."""
    edge, side = _probe_site(cg, orbit)
    seg = cg.edges[edge].segment
    tt, zz = seg.metric_table()
    if math.isfinite(cg.edges[edge].psi_length):
        t_mid = 0.5 * float(tt[-1])
    else:
        t_mid = min(2.0 * inventory.feature_scale(), 0.5 * float(tt[-1]))
    m = seg.point_at(t_mid)
    h = min(1e-3, 0.25 * float(tt[-1]))
    tau = seg.point_at(min(t_mid + h, float(tt[-1]))) - \
        seg.point_at(max(t_mid - h, 0.0))
    tau /= abs(tau)
    if side == LEFT:
        nu = 1j * tau
    else:
        nu = -1j * tau
    offset = 1e-3 * min(abs(m - v.location) for v in cg.vertices
                        if not is_infinity(v.location))

    horiz = tracer.trace_horizontal(qd, m + offset * nu, tau, budget,
                                    inventory=inventory)
    closed = horiz.end_anchor.kind == "closure-to-start"
    width = horiz.psi_length if closed else math.inf
    if not closed:
        if horiz.end_anchor.kind not in ("infinite-critical",):
            raise ProbeInconsistency(
                f"horizontal probe of orbit {orbit.id} ended "
                f"{horiz.end_anchor.kind}")
        back = tracer.trace_horizontal(qd, m + offset * nu, -tau, budget,
                                       inventory=inventory)
        if back.end_anchor.kind not in ("infinite-critical",):
            raise ProbeInconsistency(
                f"reverse horizontal probe of orbit {orbit.id} ended "
                f"{back.end_anchor.kind}")

    vert = tracer.trace_vertical(qd, m, budget, direction=nu,
                                 inventory=inventory, detect_closure=False)
    cross = _first_crossing(cg, vert, skip_edge=edge, skip_center=m,
                            skip_radius=2 * offset)
    if cross is None:
        if vert.end_anchor.kind not in ("infinite-critical",):
            raise ProbeInconsistency(
                f"vertical probe of orbit {orbit.id} found no far boundary "
                f"and ended {vert.end_anchor.kind}")
        return dict(closed=closed, width=width, length=math.inf,
                    far_side_key=None, leaf_pole=vert.end_anchor.point)
    t_star, far_edge, q, d_probe = cross
    far_side = _arrival_side(cg.edges[far_edge], q, d_probe)
    return dict(closed=closed, width=width, length=t_star,
                far_side_key=(far_edge, far_side), leaf_pole=None)


def _probe_site(cg, orbit):
    """Pick a traversal to probe from: prefer long finite edges."""
    best = None
    for eid, side in orbit.sides:
        L = cg.edges[eid].psi_length
        score = L if math.isfinite(L) else 0.5
        if best is None or score > best[0]:
            best = (score, eid, side)
    return best[1], best[2]


def _first_crossing(cg, probe_seg, skip_edge, skip_center, skip_radius):
    """First intersection of the probe polyline with any critical edge.

    Returns (t_at_crossing, edge_id, point, probe_direction) or None.
    """
    p0, p1, ids = cg.all_segment_arrays()
    if len(p0) == 0:
        return None
    z = probe_seg.samples
    t = probe_seg.t
    d_edge = p1 - p0
    for k in range(len(z) - 1):
        a, b = z[k], z[k + 1]
        d = b - a
        denom = _cross(d, d_edge)
        rel = p0 - a
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = _cross(rel, d_edge) / denom
            uu = _cross(rel, d) / denom
        mask = (denom != 0) & (tt >= 0) & (tt <= 1) & (uu >= 0) & (uu <= 1)
        if not mask.any():
            continue
        cand = np.flatnonzero(mask)
        # earliest along the probe chord
        order = np.argsort(tt[cand])
        for idx in cand[order]:
            q = a + tt[idx] * d
            if ids[idx] == skip_edge and abs(q - skip_center) < skip_radius:
                continue
            t_star = t[k] + tt[idx] * (t[k + 1] - t[k])
            if t_star < 1e-12:
                continue
            return float(t_star), int(ids[idx]), complex(q), complex(d / abs(d))
    return None


def _cross(a, b):
    return (np.conj(a) * b).imag


def _arrival_side(edge: CGEdge, q: complex, d_probe: complex) -> int:
    """Side of the edge from which a crossing probe arrives."""
    z = edge.segment.samples
    k = int(np.argmin(np.abs(z - q)))
    k = min(max(k, 1), len(z) - 2)
    tau = z[k + 1] - z[k - 1]
    tau /= abs(tau)
    s = _cross(tau, -d_probe)
    return LEFT if s > 0 else RIGHT
