"""1D system specifications, Reeb graph construction, projection and periods.

Two families of models are supported:

* flat multi-well: a particle moves freely on [q_1, q_n] between
  instantaneous wall reflections; interior walls block only trajectories
  whose speed does not exceed the wall height,
* general potential: motion in a smooth potential F on [a_1, a_2] with a
  single interior maximum and hard walls at the endpoints.

Collapsing connected components of energy level sets produces a tree whose
edges carry an energy coordinate H; a phase point projects to (H, K) where
K is the edge id.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "PhasePoint",
    "FlatModelSpec",
    "PotentialSpec",
    "GraphEdge",
    "GraphVertex",
    "ReebGraph",
    "GraphPoint",
    "build_graph",
    "project",
    "period",
    "make_potential",
]


class ModelError(ValueError):
    """Invalid model specification or out-of-domain query."""


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float

    @property
    def speed(self):
        return abs(self.p)


def _as_coeff(c):
    """Accept either a constant or a callable coefficient of speed/energy."""
    if callable(c):
        return c
    cval = float(c)
    return lambda _v, cval=cval: cval


@dataclass(frozen=True)
class FlatModelSpec:
    """Flat multi-well model: walls at fixed positions, free flight between.

    wall_positions : strictly increasing positions q_1 < ... < q_n.
    wall_heights   : blocking speeds of the n-2 interior walls (exterior
                     walls block every speed).
    restitution    : per-wall coefficient c_k, a positive constant or a
                     callable of the impact speed; the same coefficient is
                     used for both faces of an interior wall.
    """

    wall_positions: tuple
    wall_heights: tuple
    restitution: tuple

    def __post_init__(self):
        qs = np.asarray(self.wall_positions, float)
        hs = np.asarray(self.wall_heights, float)
        if qs.ndim != 1 or len(qs) < 2:
            raise ModelError("need at least two walls")
        if not np.all(np.diff(qs) > 0):
            raise ModelError("wall positions must be strictly increasing")
        if len(hs) != len(qs) - 2:
            raise ModelError("one height per interior wall expected")
        if np.any(hs <= 0):
            raise ModelError("interior wall heights must be positive")
        if len(self.restitution) != len(qs):
            raise ModelError("one restitution coefficient per wall expected")
        object.__setattr__(self, "wall_positions", tuple(qs))
        object.__setattr__(self, "wall_heights", tuple(hs))

    @property
    def n_walls(self):
        return len(self.wall_positions)

    @property
    def n_wells(self):
        return len(self.wall_positions) - 1

    def blocking_speed(self, wall):
        """Speed up to which wall `wall` (0-based) reflects; inf if exterior."""
        if wall == 0 or wall == self.n_walls - 1:
            return np.inf
        return self.wall_heights[wall - 1]

    def coeff(self, wall, speed):
        return _as_coeff(self.restitution[wall])(speed)

    def constant_coeffs(self):
        """Per-wall coefficient array, or None if any coefficient is a callable."""
        if any(callable(c) for c in self.restitution):
            return None
        return np.asarray(self.restitution, float)

    def contains(self, x: PhasePoint):
        return self.wall_positions[0] <= x.q <= self.wall_positions[-1]


@dataclass(frozen=True)
class PotentialSpec:
    """Smooth potential on [a1, a2] with a single interior maximum at a0.

    c1, c2 are the endpoint restitution coefficients, constants or callables
    of the energy H.
    """

    F: object
    F_prime: object
    a1: float
    a2: float
    a0: float
    c1: object = 1.0
    c2: object = 1.0

    def __post_init__(self):
        if not (self.a1 < self.a0 < self.a2):
            raise ModelError("interior maximum must lie strictly inside [a1, a2]")
        if self.F_prime(self.a1) <= 0 or self.F_prime(self.a2) >= 0:
            raise ModelError("potential must push inward at the walls")
        # reject potentials with more than one interior maximum: F' must have
        # a single sign change on a scan grid
        qs = np.linspace(self.a1, self.a2, 2001)[1:-1]
        signs = np.sign([self.F_prime(q) for q in qs])
        signs = signs[signs != 0]
        if np.count_nonzero(np.diff(signs)) != 1:
            raise ModelError("potential must have exactly one interior maximum")

    def energy(self, x: PhasePoint):
        return 0.5 * x.p**2 + self.F(x.q)

    def coeff(self, wall, H):
        c = self.c1 if wall == 1 else self.c2
        return _as_coeff(c)(H)

    def barrier(self):
        return float(self.F(self.a0))

    def well_minimum(self, well):
        lo, hi = (self.a1, self.a0) if well == 1 else (self.a0, self.a2)
        res = optimize.minimize_scalar(self.F, bounds=(lo, hi), method="bounded")
        return min(float(res.fun), float(self.F(lo)), float(self.F(hi)))

    def turning_point(self, H, side):
        """Root of F(q) = H on the given side ('left'/'right') of a0."""
        lo, hi = (self.a1, self.a0) if side == "left" else (self.a0, self.a2)
        g = lambda q: self.F(q) - H
        if side == "left":
            return optimize.brentq(g, lo, hi - 1e-14 * max(1, abs(hi)), xtol=1e-14)
        return optimize.brentq(g, lo + 1e-14 * max(1, abs(lo)), hi, xtol=1e-14)

    def contains(self, x: PhasePoint):
        return self.a1 <= x.q <= self.a2


@dataclass(frozen=True)
class GraphEdge:
    edge_id: int
    h_lo: float          # energy at the lower end
    h_hi: float          # energy at the upper end (inf for the top edge)
    q_lo: float          # spatial span of the underlying free interval
    q_hi: float
    wells: tuple         # 1-based base-well ids merged into this edge
    walls: tuple         # 0-based indices of the bounding walls

    @property
    def width(self):
        return self.q_hi - self.q_lo

    def contains_energy(self, H):
        return self.h_lo < H <= self.h_hi or (np.isinf(self.h_hi) and H > self.h_lo)


@dataclass(frozen=True)
class GraphVertex:
    vertex_id: int
    energy: float
    edge_above: int
    edge_below_left: int
    edge_below_right: int


@dataclass(frozen=True)
class ReebGraph:
    edges: tuple
    vertices: tuple

    def edge(self, edge_id) -> GraphEdge:
        return self.edges[edge_id - 1]

    def vertex_below(self, edge_id):
        """Vertex at the lower end of an edge, or None if the edge is a leaf."""
        for v in self.vertices:
            if v.edge_above == edge_id:
                return v
        return None

    def vertex_above(self, edge_id):
        for v in self.vertices:
            if edge_id in (v.edge_below_left, v.edge_below_right):
                return v
        return None

    @property
    def top_edge(self) -> GraphEdge:
        return max(self.edges, key=lambda e: e.h_hi)


@dataclass(frozen=True)
class GraphPoint:
    H: float
    K: int


def build_graph(spec) -> ReebGraph:
    """Construct the Reeb graph of a flat or potential model.

    Interior vertices sit at the separating energies (interior wall tops for
    the flat model, the potential maximum otherwise); the result is a tree
    with 2 * n_interior_vertices + 1 edges.
    """
    if isinstance(spec, FlatModelSpec):
        return _build_flat_graph(spec)
    if isinstance(spec, PotentialSpec):
        return _build_potential_graph(spec)
    raise ModelError(f"unsupported spec type {type(spec)!r}")


def _build_flat_graph(spec: FlatModelSpec) -> ReebGraph:
    qs = spec.wall_positions
    n_wells = spec.n_wells
    # component per base well; merge bottom-up by interior wall height
    comps = {
        w: dict(wells=(w + 1,), q_lo=qs[w], q_hi=qs[w + 1], h_lo=0.0,
                walls=(w, w + 1))
        for w in range(n_wells)
    }
    owner = list(range(n_wells))          # well -> current component key

    heights = np.asarray(spec.wall_heights, float)
    if len(heights) != len(np.unique(heights)):
        raise ModelError("interior wall heights must be distinct")
    order = np.argsort(heights, kind="stable")

    merge_events = []                      # (left comp, right comp, merged, H)
    closed_at = {}                         # id(comp) -> energy where it merged
    next_key = n_wells
    for k in order:
        wall = int(k) + 1                 # 0-based index of this interior wall
        h = spec.wall_heights[k] ** 2 / 2.0
        left, right = owner[wall - 1], owner[wall]
        cl, cr = comps[left], comps[right]
        merged = dict(
            wells=cl["wells"] + cr["wells"],
            q_lo=cl["q_lo"], q_hi=cr["q_hi"], h_lo=h,
            walls=(cl["walls"][0], cr["walls"][-1]),
        )
        merge_events.append((cl, cr, merged, h))
        closed_at[id(cl)] = h
        closed_at[id(cr)] = h
        comps[next_key] = merged
        for w in range(n_wells):
            if owner[w] in (left, right):
                owner[w] = next_key
        del comps[left], comps[right]
        next_key += 1

    # edge numbering: leaf edges by well position first, then merged edges in
    # ascending separating energy, so the top edge comes last
    all_comps = [c for pair in merge_events for c in pair[:2]]
    all_comps.append(comps[max(comps)])    # the surviving root component
    leaves = sorted((c for c in all_comps if len(c["wells"]) == 1),
                    key=lambda c: c["wells"][0])
    internal = sorted((c for c in all_comps if len(c["wells"]) > 1),
                      key=lambda c: c["h_lo"])

    edges, edge_ids = [], {}
    for i, comp in enumerate(leaves + internal, start=1):
        h_hi = closed_at.get(id(comp), np.inf)
        edge_ids[comp["wells"]] = i
        edges.append(GraphEdge(i, comp["h_lo"], h_hi, comp["q_lo"],
                               comp["q_hi"], comp["wells"], comp["walls"]))

    vertices = []

    for vid, (cl, cr, merged, h) in enumerate(merge_events, start=1):
        vertices.append(GraphVertex(
            vid, h,
            edge_above=edge_ids[merged["wells"]],
            edge_below_left=edge_ids[cl["wells"]],
            edge_below_right=edge_ids[cr["wells"]],
        ))

    return ReebGraph(tuple(edges), tuple(vertices))


def _build_potential_graph(spec: PotentialSpec) -> ReebGraph:
    hO = spec.barrier()
    e1 = GraphEdge(1, spec.well_minimum(1), hO, spec.a1, spec.a0, (1,), (1,))
    e2 = GraphEdge(2, spec.well_minimum(2), hO, spec.a0, spec.a2, (2,), (2,))
    e3 = GraphEdge(3, hO, np.inf, spec.a1, spec.a2, (1, 2), (1, 2))
    v = GraphVertex(1, hO, edge_above=3, edge_below_left=1, edge_below_right=2)
    return ReebGraph((e1, e2, e3), (v,))


def project(spec, x: PhasePoint, graph: ReebGraph | None = None) -> GraphPoint:
    """Project a phase point to graph coordinates (H, K)."""
    if graph is None:
        graph = build_graph(spec)
    if not spec.contains(x):
        raise ModelError(f"point {x} outside the configured interval")
    if isinstance(spec, FlatModelSpec):
        H = 0.5 * x.p**2
        for e in graph.edges:
            if e.q_lo <= x.q <= e.q_hi and e.contains_energy(H):
                return GraphPoint(H, e.edge_id)
        raise ModelError(f"no edge contains {x}")
    H = spec.energy(x)
    if H > spec.barrier():
        return GraphPoint(H, 3)
    return GraphPoint(H, 1 if x.q < spec.a0 else 2)


def period(spec, edge_id, H, graph: ReebGraph | None = None, eta=1e-10):
    """Oscillation period on an edge at energy H.

    Flat model: closed form 2 * width / sqrt(2H).  General potential:
    adaptive quadrature with a singularity-absorbing substitution at the
    turning points.  Near a vertex energy the quadrature is evaluated at
    H clipped to at least vertex_energy + eta * energy_scale.
    """
    if graph is None:
        graph = build_graph(spec)
    edge = graph.edge(edge_id)
    if H < edge.h_lo or (H == edge.h_lo and isinstance(spec, FlatModelSpec)
                         and edge.h_lo <= 0.0):
        raise ModelError(f"H={H} below the lower end of edge {edge_id}")
    if np.isfinite(edge.h_hi) and H > edge.h_hi:
        raise ModelError(f"H={H} above edge {edge_id}")
    if isinstance(spec, FlatModelSpec):
        return 2.0 * edge.width / np.sqrt(2.0 * H)
    return _potential_period(spec, edge_id, H, eta)


def _potential_period(spec: PotentialSpec, edge_id, H, eta):
    hO = spec.barrier()
    scale = max(abs(hO), 1.0)
    if edge_id == 3:
        H = max(H, hO + eta * scale)
        return _orbit_time(spec, H, spec.a1, spec.a2, False, False)
    H = min(H, hO - eta * scale)
    if edge_id == 1:
        if H > spec.F(spec.a1):
            return _orbit_time(spec, H, spec.a1, spec.turning_point(H, "left"),
                               False, True)
        lo = optimize.brentq(lambda q: spec.F(q) - H, spec.a1,
                             _argmin(spec, 1), xtol=1e-14)
        return _orbit_time(spec, H, lo, spec.turning_point(H, "left"), True, True)
    if edge_id == 2:
        if H > spec.F(spec.a2):
            return _orbit_time(spec, H, spec.turning_point(H, "right"), spec.a2,
                               True, False)
        hi = optimize.brentq(lambda q: spec.F(q) - H, _argmin(spec, 2),
                             spec.a2, xtol=1e-14)
        return _orbit_time(spec, H, spec.turning_point(H, "right"), hi, True, True)
    raise ModelError(f"unknown edge {edge_id}")


def _argmin(spec, well):
    lo, hi = (spec.a1, spec.a0) if well == 1 else (spec.a0, spec.a2)
    res = optimize.minimize_scalar(spec.F, bounds=(lo, hi), method="bounded")
    return float(res.x)


def _orbit_time(spec, H, lo, hi, sing_lo, sing_hi):
    """Full period 2 * int_lo^hi dq / sqrt(2 (H - F)).

    sing_lo/sing_hi flag inverse-square-root singularities (turning points);
    those ends are handled with the substitution q = end -/+ span * u^2,
    which removes the singularity when F' does not vanish there.
    """
    mid = 0.5 * (lo + hi)
    total = _half_integral(spec, H, lo, mid, sing_lo, left_end=True)
    total += _half_integral(spec, H, mid, hi, sing_hi, left_end=False)
    return 2.0 * total


def _half_integral(spec, H, a, b, singular, left_end):
    F = spec.F
    if not singular:
        f = lambda q: 1.0 / np.sqrt(max(2.0 * (H - F(q)), 1e-300))
        val, _ = integrate.quad(f, a, b, limit=200)
        return val
    span = b - a
    end = a if left_end else b
    sgn = 1.0 if left_end else -1.0

    def g(u):
        q = end + sgn * span * u * u
        return 2.0 * span * u / np.sqrt(max(2.0 * (H - F(q)), 1e-300))

    val, _ = integrate.quad(g, 0.0, 1.0, limit=200)
    return val


# built-in barrier shapes: a single interior maximum with monotone sides,
# so that every orbit reaches a wall
_BUILTIN_POTENTIALS = {
    "quadratic": (lambda q, k=1.0: -k * q * q, lambda q, k=1.0: -2.0 * k * q),
    "quartic": (lambda q, a=1.0: -a * q**4, lambda q, a=1.0: -4.0 * a * q**3),
    "cosine": (
        lambda q, a=1.0: a * np.cos(q),
        lambda q, a=1.0: -a * np.sin(q),
    ),
}


def make_potential(name, a1, a2, a0=None, c1=1.0, c2=1.0, coeffs=None, **params):
    """Build a PotentialSpec from a named built-in or polynomial coefficients.

    coeffs, when given, are polynomial coefficients in numpy order
    (highest degree first) and override the named form.
    """
    if coeffs is not None:
        poly = np.polynomial.Polynomial(np.asarray(coeffs, float)[::-1])
        dpoly = poly.deriv()
        F, Fp = (lambda q: float(poly(q))), (lambda q: float(dpoly(q)))
    else:
        try:
            base_F, base_Fp = _BUILTIN_POTENTIALS[name]
        except KeyError:
            raise ModelError(f"unknown potential {name!r}") from None
        F = lambda q: float(base_F(q, **params))
        Fp = lambda q: float(base_Fp(q, **params))
    if a0 is None:
        res = optimize.minimize_scalar(lambda q: -F(q), bounds=(a1, a2),
                                       method="bounded")
        a0 = float(res.x)
    return PotentialSpec(F=F, F_prime=Fp, a1=a1, a2=a2, a0=a0, c1=c1, c2=c2)
