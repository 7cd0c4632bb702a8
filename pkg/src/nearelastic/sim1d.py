"""Event-driven simulation of the nearly-elastic 1D dynamics.

Flat model: free flight between walls, computed in closed form so that
no discretization error enters; every collision multiplies the speed by
(1 - eps*c - eps*delta*nu).  General potential: composed velocity-Verlet
(4th order) flight with bisection-refined wall-hit detection.

All times in the collision logs are physical; the slow paths are reported
in rescaled time t_resc = eps * t_phys.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .model1d import (FlatModelSpec, ModelError, PhasePoint, PotentialSpec,
                      build_graph, project)

__all__ = [
    "CollisionRecord",
    "CollisionLog",
    "SlowPath",
    "SimResult",
    "SimulationError",
    "simulate_flat",
    "simulate_potential",
    "piecewise_linear_energy",
    "max_energy_jump",
]


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CollisionRecord:
    t: float
    wall: int
    pre_speed: float
    post_speed: float
    energy_after: float


class CollisionLog:
    """Column-oriented collision log: t, wall, pre_speed, post_speed, energy_after."""

    def __init__(self, t, wall, pre_speed, post_speed, energy_after):
        self.t = np.asarray(t, float)
        self.wall = np.asarray(wall, int)
        self.pre_speed = np.asarray(pre_speed, float)
        self.post_speed = np.asarray(post_speed, float)
        self.energy_after = np.asarray(energy_after, float)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> CollisionRecord:
        return CollisionRecord(self.t[i], int(self.wall[i]), self.pre_speed[i],
                               self.post_speed[i], self.energy_after[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "wall", "pre_speed", "post_speed", "energy_after"])
            for i in range(len(self)):
                w.writerow([repr(self.t[i]), int(self.wall[i]),
                            repr(self.pre_speed[i]), repr(self.post_speed[i]),
                            repr(self.energy_after[i])])


class SlowPath:
    """Piecewise-linear trajectory t -> (H, K) in rescaled time.

    H interpolates linearly between breakpoints; K is constant on each
    segment (value at the segment's left breakpoint).
    """

    def __init__(self, times, H, K):
        self.times = np.asarray(times, float)
        self.H = np.asarray(H, float)
        self.K = np.asarray(K, int)
        if np.any(np.diff(self.times) < 0):
            raise ValueError("breakpoint times must be non-decreasing")

    def __len__(self):
        return len(self.times)

    @property
    def horizon(self):
        return self.times[-1]

    def energy_at(self, t):
        return np.interp(t, self.times, self.H)

    def edge_at(self, t):
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1,
                      0, len(self.times) - 1)
        return self.K[idx]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "H", "K"])
            for t, h, k in zip(self.times, self.H, self.K):
                w.writerow([repr(t), repr(h), int(k)])


@dataclass
class SimResult:
    log: CollisionLog
    slow_path: SlowPath
    final_well: int | None
    status: str                       # 'well' | 'stop_energy' | 'horizon' | 'collision_limit' | 'rest'


def _first_blocking_wall(spec, q, p, coming_from=None):
    """Index of the next wall hit from position q with velocity p."""
    qs = spec.wall_positions
    n = len(qs)
    if p > 0:
        start = coming_from + 1 if coming_from is not None else \
            int(np.searchsorted(qs, q, side="right"))
        for j in range(start, n):
            if j == n - 1 or spec.blocking_speed(j) >= abs(p):
                return j
    else:
        start = coming_from - 1 if coming_from is not None else \
            int(np.searchsorted(qs, q, side="left")) - 1
        for j in range(start, -1, -1):
            if j == 0 or spec.blocking_speed(j) >= abs(p):
                return j
    raise SimulationError("no blocking wall found")  # pragma: no cover


def _enclosing_wells(spec, wall, p):
    """Bounding blocked walls around a particle leaving `wall` with velocity p.

    Returns (left_wall, right_wall); the particle is in a base well when the
    two are adjacent.
    """
    n = spec.n_walls
    speed = abs(p)
    if p > 0:
        left = wall
        right = next(j for j in range(wall + 1, n)
                     if j == n - 1 or spec.blocking_speed(j) >= speed)
    else:
        right = wall
        left = next(j for j in range(wall - 1, -1, -1)
                    if j == 0 or spec.blocking_speed(j) >= speed)
    return left, right


def simulate_flat(spec: FlatModelSpec, x0: PhasePoint, eps,
                  horizon=np.inf, stop_energy=0.0, noise=None, delta=0.0,
                  stop_at_well=True, collision_limit=None,
                  max_collisions=10**8, graph=None):
    """Run the flat-model event loop.

    noise(wall, k) supplies the k-th perturbation variate for `wall`
    (1-based hit count); the post-collision speed is
    pre * (1 - eps*c - eps*delta*noise).  The run ends at the rescaled
    horizon, at stop_energy, or on entry into a base well, whichever
    comes first.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    if not spec.contains(x0):
        raise ModelError("start point outside the interval")
    if graph is None:
        graph = build_graph(spec)

    qs = spec.wall_positions
    q, p, t = x0.q, x0.p, 0.0
    ts, walls, pres, posts, energies = [], [], [], [], []
    final_well = None
    status = "horizon"
    hits = np.zeros(spec.n_walls, dtype=int)
    wall = None

    if p == 0:
        return _flat_result(spec, graph, x0, eps, ts, walls, pres, posts,
                            energies, None, "rest")

    while True:
        j = _first_blocking_wall(spec, q, p, coming_from=wall)
        t += (qs[j] - q) / p
        q = qs[j]
        wall = j
        if eps * t > horizon:
            status = "horizon"
            break
        pre = abs(p)
        hits[j] += 1
        c = spec.coeff(j, pre)
        factor = 1.0 - eps * c
        if noise is not None and delta != 0.0:
            factor -= eps * delta * noise(j, hits[j])
        if factor <= 0:
            raise SimulationError("restitution factor not positive; "
                                  "eps or noise too large")
        post = pre * factor
        p = -np.sign(p) * post
        ts.append(t)
        walls.append(j)
        pres.append(pre)
        posts.append(post)
        energies.append(0.5 * post * post)

        if energies[-1] <= stop_energy:
            status = "stop_energy"
            break
        left, right = _enclosing_wells(spec, j, p)
        if right == left + 1 and final_well is None:
            final_well = left + 1
            if stop_at_well:
                status = "well"
                break
        if collision_limit is not None and len(ts) >= collision_limit:
            status = "collision_limit"
            break
        if len(ts) >= max_collisions:
            raise SimulationError(f"exceeded {max_collisions} collisions")

    return _flat_result(spec, graph, x0, eps, ts, walls, pres, posts,
                        energies, final_well, status)


def _flat_result(spec, graph, x0, eps, ts, walls, pres, posts, energies,
                 final_well, status):
    log = CollisionLog(ts, walls, pres, posts, energies)
    path = piecewise_linear_energy(spec, log, eps, x0=x0, graph=graph)
    return SimResult(log, path, final_well, status)


def _flat_edge_id(spec, graph, wall, speed, direction):
    """Edge containing the state just after a collision at `wall`."""
    left, right = _enclosing_wells(spec, wall, direction * speed)
    H = 0.5 * speed * speed
    for e in graph.edges:
        if e.walls == (left, right) and e.contains_energy(H):
            return e.edge_id
    raise ModelError("no edge for post-collision state")  # pragma: no cover


def piecewise_linear_energy(spec, log: CollisionLog, eps, x0=None, graph=None):
    """Linear interpolation of the rescaled energy jumps through the log.

    The sup distance between the underlying step function and this path is
    bounded by the largest single-collision energy loss.
    """
    if graph is None:
        graph = build_graph(spec)
    times = [0.0]
    if x0 is not None:
        if isinstance(spec, FlatModelSpec):
            H0 = 0.5 * x0.p**2
        else:
            H0 = spec.energy(x0)
        K0 = project(spec, x0, graph).K
    elif len(log):
        H0 = 0.5 * log.pre_speed[0] ** 2
        K0 = 0
    else:
        raise ValueError("empty log and no start point")
    Hs, Ks = [H0], [K0]
    for i in range(len(log)):
        times.append(eps * log.t[i])
        Hs.append(log.energy_after[i])
        if isinstance(spec, FlatModelSpec):
            direction = 1.0 if log.wall[i] == 0 else \
                (-1.0 if log.wall[i] == spec.n_walls - 1 else _post_dir(log, i))
            Ks.append(_flat_edge_id(spec, graph, int(log.wall[i]),
                                    log.post_speed[i], direction))
        else:
            Ks.append(0)
    if x0 is None and len(Ks) > 1:
        Ks[0] = Ks[1]
    return SlowPath(times, Hs, Ks)


def _post_dir(log, i):
    # interior-wall hit: the particle reverses, so it leaves opposite to the
    # side it came from; infer from the next flight if present, else from the
    # previous wall
    if i + 1 < len(log):
        return 1.0 if log.wall[i + 1] > log.wall[i] else -1.0
    if i > 0:
        return -1.0 if log.wall[i - 1] < log.wall[i] else 1.0
    return 1.0


def max_energy_jump(log: CollisionLog):
    """Largest single-collision energy loss; bounds the step/linear sup gap."""
    if not len(log):
        return 0.0
    pre_H = 0.5 * log.pre_speed**2
    return float(np.max(pre_H - log.energy_after))


# ---------------------------------------------------------------------------
# general potential: composed Verlet flight with event detection

_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
_YOSHIDA = (_W1, _W0, _W1)


def _verlet(F_prime, q, p, h):
    a = -F_prime(q)
    p_half = p + 0.5 * h * a
    q = q + h * p_half
    p = p_half + 0.5 * h * (-F_prime(q))
    return q, p


def yoshida_step(F_prime, q, p, h):
    """One 4th-order composition step of the velocity-Verlet map."""
    for w in _YOSHIDA:
        q, p = _verlet(F_prime, q, p, w * h)
    return q, p


def simulate_potential(spec: PotentialSpec, x0: PhasePoint, eps,
                       horizon=np.inf, stop_energy=-np.inf, noise=None,
                       delta=0.0, step=1e-3, stop_at_well=True,
                       collision_limit=None, max_collisions=10**6,
                       event_rtol=1e-12, graph=None):
    """Integrate the nearly-elastic motion in a smooth potential.

    Flight obeys q'' = -F'(q); wall hits at a1/a2 are located by bisecting
    the one-step integrator map and the state is snapped exactly onto the
    wall before the speed is reduced by the restitution factor.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    if not spec.contains(x0):
        raise ModelError("start point outside the interval")
    if graph is None:
        graph = build_graph(spec)
    Fp = spec.F_prime
    a1, a2, a0 = spec.a1, spec.a2, spec.a0
    span = a2 - a1
    q, p, t = float(x0.q), float(x0.p), 0.0
    ts, walls, pres, posts, energies = [], [], [], [], []
    hits = np.zeros(3, dtype=int)
    final_well = None
    status = "horizon"
    barrier = spec.barrier()
    n_steps = 0

    while True:
        q_new, p_new = yoshida_step(Fp, q, p, step)
        n_steps += 1
        if a1 <= q_new <= a2:
            q, p, t = q_new, p_new, t + step
            if eps * t > horizon:
                status = "horizon"
                break
            if n_steps > 10**9:
                raise SimulationError("step budget exhausted")
            continue

        wall_q = a1 if q_new < a1 else a2
        wall_i = 1 if q_new < a1 else 2
        # bisect the step fraction tau: q(tau) crosses wall_q in (0, step]
        lo, hi = 0.0, step
        while hi - lo > event_rtol * step:
            mid = 0.5 * (lo + hi)
            qm, _ = yoshida_step(Fp, q, p, mid)
            if (qm - wall_q) * (q_new - wall_q) > 0:
                hi = mid
            else:
                lo = mid
        tau = 0.5 * (lo + hi)
        _, p_hit = yoshida_step(Fp, q, p, tau)
        t += tau
        q = wall_q                          # snap exactly onto the wall
        pre = abs(p_hit)
        H_pre = 0.5 * pre * pre + spec.F(q)
        hits[wall_i] += 1
        c = spec.coeff(wall_i, H_pre)
        factor = 1.0 - eps * c
        if noise is not None and delta != 0.0:
            factor -= eps * delta * noise(wall_i, hits[wall_i])
        if factor <= 0:
            raise SimulationError("restitution factor not positive")
        post = pre * factor
        p = np.sign(a0 - q) * post          # reflected back inward
        H = 0.5 * post * post + spec.F(q)
        ts.append(t)
        walls.append(wall_i)
        pres.append(pre)
        posts.append(post)
        energies.append(H)

        if eps * t > horizon:
            status = "horizon"
            break
        if H <= stop_energy:
            status = "stop_energy"
            break
        if H < barrier and final_well is None:
            final_well = 1 if q < a0 else 2
            if stop_at_well:
                status = "well"
                break
        if collision_limit is not None and len(ts) >= collision_limit:
            status = "collision_limit"
            break
        if len(ts) >= max_collisions:
            raise SimulationError(f"exceeded {max_collisions} collisions")

    log = CollisionLog(ts, walls, pres, posts, energies)
    times = [0.0] + [eps * ti for ti in ts]
    Hs = [spec.energy(x0)] + energies
    Ks = [project(spec, x0, graph).K]
    for i, H in enumerate(energies):
        if H > barrier:
            Ks.append(3)
        else:
            Ks.append(1 if walls[i] == 1 else 2)
    path = SlowPath(times, Hs, Ks)
    if final_well is None and energies and energies[-1] < barrier:
        final_well = 1 if q < a0 else 2
    return SimResult(log, path, final_well, status)
