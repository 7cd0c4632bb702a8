"""Limiting slow dynamics on the graph: deterministic decay within edges,
random branching at interior vertices.

In rescaled time the energy decays along each edge at the averaged rate

    dH/dt = - (per-period energy loss) / (period),

which for the flat model has the closed form
H(t) = (H0^{-1/2} + (c_L + c_R) t / (sqrt(2) w))^{-2}.  When the flow
reaches a vertex it continues onto one of the two lower edges with
probabilities proportional to the wall loss rates just above the vertex.
"""

import heapq
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model1d import FlatModelSpec, ModelError, PotentialSpec, build_graph, period

__all__ = [
    "EdgeFlow",
    "hitting_time",
    "branching_probability",
    "GraphPath",
    "sample_limit_path",
    "path_distance",
    "path_distance_sup",
]


class EdgeFlow:
    """Averaged energy decay along a single edge."""

    def __init__(self, spec, edge_id, graph=None):
        self.spec = spec
        self.graph = graph if graph is not None else build_graph(spec)
        self.edge = self.graph.edge(edge_id)
        self.edge_id = edge_id
        if isinstance(spec, FlatModelSpec):
            self._consts = spec.constant_coeffs()
        else:
            self._consts = None

    def loss_rate(self, H):
        """Energy lost per period at energy H (positive)."""
        spec, e = self.spec, self.edge
        if isinstance(spec, FlatModelSpec):
            v = np.sqrt(2.0 * H)
            return 2.0 * H * sum(spec.coeff(w, v) for w in e.walls)
        total = 0.0
        for w in e.walls:
            a_w = spec.a1 if w == 1 else spec.a2
            total += 2.0 * spec.coeff(w, H) * (H - spec.F(a_w))
        return total

    def rate(self, H):
        """dH/dt along the edge (negative).

        H is clipped into the edge's energy range so that adaptive ODE
        solvers may probe slightly past the lower vertex.
        """
        e = self.edge
        lo = e.h_lo + 1e-12 * max(abs(e.h_lo), 1.0)
        H = min(max(H, lo), e.h_hi)
        return -self.loss_rate(H) / period(self.spec, self.edge_id, H,
                                           self.graph)

    def _flat_closed_form(self):
        if self._consts is None:
            return None
        cl = self._consts[self.edge.walls[0]] + self._consts[self.edge.walls[1]]
        return cl / (np.sqrt(2.0) * self.edge.width)

    def energy(self, t, H0):
        """Energy after rescaled time t starting from H0 on this edge."""
        k = self._flat_closed_form()
        if k is not None:
            return (H0 ** -0.5 + k * np.asarray(t, float)) ** -2.0
        t = np.atleast_1d(np.asarray(t, float))
        sol = integrate.solve_ivp(lambda _t, y: [self.rate(y[0])],
                                  (0.0, float(t.max()) if t.size else 0.0),
                                  [H0], t_eval=np.sort(t),
                                  rtol=1e-10, atol=1e-12, method="Radau")
        if not sol.success:
            raise RuntimeError(f"edge flow integration failed: {sol.message}")
        out = np.empty_like(t)
        out[np.argsort(t)] = sol.y[0]
        return out if out.size > 1 else float(out[0])

    def hitting_time(self, H0, H_target):
        """Rescaled time to decay from H0 to H_target on this edge."""
        if not H_target < H0:
            raise ValueError("target energy must be below the start energy")
        k = self._flat_closed_form()
        if k is not None:
            return (H_target ** -0.5 - H0 ** -0.5) / k
        val, _ = integrate.quad(lambda H: 1.0 / -self.rate(H),
                                H_target, H0, limit=200)
        return val


def hitting_time(spec, edge_id, H0, H_target, graph=None):
    """Time for the averaged flow to reach H_target from H0 on one edge."""
    return EdgeFlow(spec, edge_id, graph).hitting_time(H0, H_target)


def branching_probability(spec, vertex, graph=None, delta=0.0,
                          mean_noise=None):
    """Probability of continuing onto the lower-LEFT edge at a vertex.

    The weights are the wall loss rates on the edge just above the vertex;
    with perturbed collisions the mean perturbation shifts each wall's
    effective coefficient by delta * mean_noise[wall].
    """
    if graph is None:
        graph = build_graph(spec)
    e_up = graph.edge(vertex.edge_above)
    H = vertex.energy
    weights = []
    for w in e_up.walls:
        if isinstance(spec, FlatModelSpec):
            c = spec.coeff(w, np.sqrt(2.0 * H))
            base = c * H
            shift = delta * (mean_noise[w] if mean_noise is not None else 0.0) * H
        else:
            a_w = spec.a1 if w == 1 else spec.a2
            c = spec.coeff(w, H)
            base = c * (H - spec.F(a_w))
            shift = delta * (mean_noise[w] if mean_noise is not None else 0.0) \
                * (H - spec.F(a_w))
        weights.append(base + shift)
    return weights[0] / (weights[0] + weights[1])


@dataclass(frozen=True)
class PathSegment:
    t_start: float
    t_end: float
    edge_id: int
    H_start: float
    flow: EdgeFlow

    def energy_at(self, t):
        return self.flow.energy(np.asarray(t, float) - self.t_start,
                                self.H_start)


class GraphPath:
    """Realization of the limit process: a sequence of edge segments."""

    def __init__(self, segments, graph):
        self.segments = list(segments)
        self.graph = graph

    @property
    def horizon(self):
        return self.segments[-1].t_end

    def state_at(self, t):
        """(H, K) at rescaled time t (clamped to the path horizon)."""
        t = float(t)
        for seg in self.segments:
            if t <= seg.t_end or seg is self.segments[-1]:
                return float(seg.energy_at(min(t, seg.t_end))), seg.edge_id
        raise RuntimeError("unreachable")  # pragma: no cover

    @property
    def vertex_times(self):
        return [seg.t_end for seg in self.segments[:-1]]

    @property
    def edge_ids(self):
        return [seg.edge_id for seg in self.segments]


def sample_limit_path(spec, H0, K0, horizon, rng, graph=None,
                      delta=0.0, mean_noise=None) -> GraphPath:
    """Sample one trajectory of the limit process up to the rescaled horizon."""
    if graph is None:
        graph = build_graph(spec)
    t, H, K = 0.0, float(H0), int(K0)
    segments = []
    while True:
        flow = EdgeFlow(spec, K, graph)
        vertex = graph.vertex_below(K)
        floor = vertex.energy if vertex is not None else graph.edge(K).h_lo
        if vertex is None:
            # leaf edge: the flow decays forever without reaching the end
            segments.append(PathSegment(t, horizon, K, H, flow))
            break
        t_hit = t + flow.hitting_time(H, floor)
        if t_hit >= horizon:
            segments.append(PathSegment(t, horizon, K, H, flow))
            break
        segments.append(PathSegment(t, t_hit, K, H, flow))
        p_left = branching_probability(spec, vertex, graph, delta, mean_noise)
        K = vertex.edge_below_left if rng.random() < p_left \
            else vertex.edge_below_right
        t, H = t_hit, floor
    return GraphPath(segments, graph)


def _edge_adjacency(graph):
    """Vertex-to-vertex adjacency through edges: {v_id: [(v_id2, length, edge)]}."""
    adj = {v.vertex_id: [] for v in graph.vertices}
    for e in graph.edges:
        below = graph.vertex_below(e.edge_id)
        above = graph.vertex_above(e.edge_id)
        if below is not None and above is not None:
            w = above.energy - below.energy
            adj[below.vertex_id].append((above.vertex_id, w))
            adj[above.vertex_id].append((below.vertex_id, w))
    return adj


def path_distance(graph, point1, point2):
    """Tree distance between (H, K) points: total |dH| along the unique path."""
    (H1, K1), (H2, K2) = point1, point2
    if K1 == K2:
        return abs(H1 - H2)
    adj = _edge_adjacency(graph)
    # attach the two points as extra nodes
    extra = {}
    for label, (H, K) in (("p1", (H1, K1)), ("p2", (H2, K2))):
        e = graph.edge(K)
        below, above = graph.vertex_below(K), graph.vertex_above(K)
        links = []
        if below is not None:
            links.append((below.vertex_id, H - below.energy))
        if above is not None:
            links.append((above.vertex_id, above.energy - H))
        extra[label] = links
    nodes = list(adj) + ["p1", "p2"]
    full = {n: list(adj.get(n, [])) for n in nodes}
    for label, links in extra.items():
        for v, w in links:
            full[label].append((v, w))
            full[v].append((label, w))
    dist = {n: np.inf for n in nodes}
    dist["p1"] = 0.0
    heap = [(0.0, 0, "p1")]
    tie = 1
    while heap:
        d, _, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == "p2":
            return d
        for v, w in full[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, tie, v))
                tie += 1
    raise ModelError("points not connected in the graph")  # pragma: no cover


def path_distance_sup(graph, sim_path, limit_path: GraphPath, ts,
                      vertex_window=0.0):
    """Sup of the tree distance between two paths over the times ts.

    Times at which the limit energy lies within vertex_window of a vertex
    energy are skipped: the branching instant itself carries an O(1)
    discrepancy with probability O(eps) and is excluded from the sup.
    """
    vertex_energies = [v.energy for v in graph.vertices]
    worst = 0.0
    for t in np.asarray(ts, float):
        H_lim, K_lim = limit_path.state_at(t)
        if any(abs(H_lim - hv) <= vertex_window for hv in vertex_energies):
            continue
        H_sim = float(sim_path.energy_at(t))
        K_sim = int(sim_path.edge_at(t))
        worst = max(worst, path_distance(graph, (H_sim, K_sim), (H_lim, K_lim)))
    return worst
