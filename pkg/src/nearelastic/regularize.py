"""Stochastic regularizations of the branching at interior vertices.

Deterministic nearly-elastic dynamics select a well through a fragile
strip structure of initial conditions.  Two regularizations give robust
limits:

* initial-condition noise: smear the start point over a small ball; the
  well frequencies converge (along most eps sequences) to the ratios of
  the wall restitution coefficients,
* dynamics noise: perturb every collision's restitution factor; the well
  frequencies converge for every eps sequence, with the mean perturbation
  shifting the effective coefficients.

Also provided: the explicit strip decomposition for the flat two-well
system, and a three-well configuration whose initial-condition-noise
frequencies oscillate along a computable sequence of eps values while
the dynamics-noise frequencies stay put.
"""

from dataclasses import dataclass

import numpy as np

from . import _fast
from .model1d import FlatModelSpec, ModelError, PhasePoint
from .rngs import substream

__all__ = [
    "BranchingResult",
    "bump_sampler",
    "simulate_with_init_noise",
    "simulate_with_dyn_noise",
    "final_well_deterministic",
    "strip_boundaries",
    "strip_ratio",
    "sensitive_three_well",
    "aligned_eps",
    "wilson_interval",
]


def wilson_interval(k, n, z=3.0):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half


@dataclass(frozen=True)
class BranchingResult:
    wells: np.ndarray            # per-replica final well (1-based), -1 if none
    n_replicas: int

    def count(self, well):
        return int(np.sum(self.wells == well))

    def frequency(self, well):
        return self.count(well) / self.n_replicas

    def conditional_frequency(self, well, among):
        """Frequency of `well` among runs that ended in one of `among`."""
        total = sum(self.count(w) for w in among)
        if total == 0:
            raise ValueError("no runs ended in the conditioning set")
        return self.count(well) / total

    def interval(self, well, z=3.0):
        return wilson_interval(self.count(well), self.n_replicas, z)

    def conditional_interval(self, well, among, z=3.0):
        total = sum(self.count(w) for w in among)
        return wilson_interval(self.count(well), total, z)


def bump_sampler(delta):
    """Sampler of offsets in (-delta, delta) with density prop. to (1-(r/d)^2)^2.

    A smooth, compactly supported law; sampled by rejection from the
    uniform proposal.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")

    def sample(rng, size):
        out = np.empty(size)
        filled = 0
        while filled < size:
            u = rng.uniform(-1.0, 1.0, size - filled)
            acc = rng.random(size - filled) < (1.0 - u * u) ** 2
            took = u[acc]
            out[filled:filled + took.size] = took
            filled += took.size
        return delta * out

    return sample


def _flat_arrays(spec: FlatModelSpec):
    coeffs = spec.constant_coeffs()
    if coeffs is None:
        raise ModelError("compiled runs need constant restitution coefficients")
    q = np.asarray(spec.wall_positions, float)
    block = np.array([spec.blocking_speed(j) for j in range(spec.n_walls)])
    return q, block, coeffs


_EMPTY_NOISE = np.zeros((1, 0))


def _run_kernel(q, block, coeffs, q0, p0, eps, delta=0.0, noise=None,
                stop_energy=0.0, max_collisions=10**8):
    nz = _EMPTY_NOISE if noise is None else noise
    well, ncol, status = _fast.flat_final_well(
        q, block, coeffs, q0, p0, eps, delta, nz, stop_energy, max_collisions)
    if status == _fast.FLAT_MAX_COLLISIONS:
        raise RuntimeError("collision budget exhausted")
    return well, ncol, status


def final_well_deterministic(spec, x0, eps):
    """Final well of the unperturbed dynamics (compiled event loop)."""
    q, block, coeffs = _flat_arrays(spec)
    well, _, status = _run_kernel(q, block, coeffs, x0.q, x0.p, eps)
    return int(well) if status == _fast.FLAT_OK else None


def simulate_with_init_noise(spec, x0, eps, delta, n_replicas, seed,
                             experiment="init-noise", replicas=None,
                             noise_sampler=None) -> BranchingResult:
    """Final-well frequencies with the start speed smeared over a delta-ball.

    Each replica draws an offset from the bump law (or noise_sampler) from
    its own keyed stream and runs the deterministic event loop.
    """
    q, block, coeffs = _flat_arrays(spec)
    sampler = noise_sampler if noise_sampler is not None else bump_sampler(delta)
    if replicas is None:
        replicas = range(n_replicas)
    wells = np.full(n_replicas, -1, dtype=np.int64)
    for rep in replicas:
        rng = substream(seed, experiment, rep)
        p0 = x0.p + float(sampler(rng, 1)[0])
        well, _, status = _run_kernel(q, block, coeffs, x0.q, p0, eps)
        if status == _fast.FLAT_OK:
            wells[rep] = well
    return BranchingResult(wells, n_replicas)


def simulate_with_dyn_noise(spec, x0, eps, delta, laws, n_replicas, seed,
                            experiment="dyn-noise", replicas=None,
                            initial_block=4096) -> BranchingResult:
    """Final-well frequencies with every collision factor perturbed.

    laws: per-wall (lo, hi) of the uniform perturbation, either one pair
    for all walls or a sequence of n_walls pairs.  The k-th hit of wall j
    uses the k-th variate of the stream keyed (seed, experiment, replica,
    j), so results do not depend on scheduling.
    """
    q, block, coeffs = _flat_arrays(spec)
    n_walls = spec.n_walls
    laws = np.asarray(laws, float)
    if laws.ndim == 1:
        laws = np.tile(laws, (n_walls, 1))
    if laws.shape != (n_walls, 2):
        raise ValueError("need one (lo, hi) pair per wall")
    if replicas is None:
        replicas = range(n_replicas)
    wells = np.full(n_replicas, -1, dtype=np.int64)
    for rep in replicas:
        m = initial_block
        while True:
            noise = np.empty((n_walls, m))
            for j in range(n_walls):
                rng = substream(seed, experiment, rep, j)
                noise[j] = rng.uniform(laws[j, 0], laws[j, 1], m)
            well, _, status = _run_kernel(q, block, coeffs, x0.q, x0.p,
                                          eps, delta, noise)
            if status != _fast.FLAT_NOISE_OVERFLOW:
                break
            m *= 2
        if status == _fast.FLAT_OK:
            wells[rep] = well
    return BranchingResult(wells, n_replicas)


# ---------------------------------------------------------------------------
# strip structure of the two-well system

def strip_boundaries(spec: FlatModelSpec, eps, first_wall, n_strips):
    """Initial-speed strips of constant final well for the flat two-well model.

    A particle started on the top edge hits the two exterior walls
    alternately (first_wall first) until its speed drops to the interior
    wall height; the parity of that collision count decides the well.
    Returns (boundaries, wells): boundaries[k] is the largest start speed
    needing exactly k collisions (ascending), and speeds in
    (boundaries[k], boundaries[k+1]] end in wells[k].
    """
    if spec.n_wells != 2:
        raise ModelError("strip decomposition applies to the two-well system")
    coeffs = spec.constant_coeffs()
    if coeffs is None:
        raise ModelError("strip decomposition needs constant coefficients")
    p_O = spec.wall_heights[0]
    last, other = (0, 2) if first_wall == 0 else (2, 0)
    boundaries = [p_O]
    wells = []
    p_bound = p_O
    for k in range(n_strips):
        wall = last if k % 2 == 0 else other
        p_bound /= 1.0 - eps * coeffs[wall]
        boundaries.append(p_bound)
        # trapped after a collision at this wall: well 1 borders wall 0
        wells.append(1 if wall == 0 else 2)
    return np.asarray(boundaries), np.asarray(wells, dtype=np.int64)


def strip_ratio(spec, eps, first_wall=0, n_pairs=50):
    """Mean ratio of adjacent strip widths (well-1 width over well-2 width)."""
    bounds, wells = strip_boundaries(spec, eps, first_wall, 2 * n_pairs + 1)
    widths = np.diff(bounds)
    w1 = widths[:-1][wells[:-1] == 1]
    w2 = widths[:-1][wells[:-1] == 2]
    n = min(w1.size, w2.size)
    return float(np.mean(w1[:n] / w2[:n]))


# ---------------------------------------------------------------------------
# sensitivity of initial-condition smoothing: a three-well configuration

def sensitive_three_well(c_left=2.0, c=1.0, h_high=1.0, h_low=0.6):
    """Three wells whose second branching is decided by a collision count.

    The interior wall heights satisfy h_high > h_low, so a particle
    trapped between the first interior wall and the right exterior wall
    performs a nearly deterministic number of collisions before it is
    trapped again; the parity of that number selects the middle or the
    right well and flips along the eps values returned by aligned_eps.
    """
    if not h_low < h_high:
        raise ModelError("need h_high > h_low")
    return FlatModelSpec((0.0, 1.0, 2.0, 3.0), (h_high, h_low),
                         (c_left, c, c, c))


def aligned_eps(spec: FlatModelSpec, nu):
    """eps at which the inter-wall stage takes exactly nu collisions.

    Solves nu * (-ln(1 - eps*c)) = ln(h_high / h_low), with c the common
    coefficient of the walls bounding the intermediate stage; at these
    eps every entry speed gives the same collision count nu, so the
    conditional well-2 frequency is 0 or 1 according to the parity of nu.
    """
    coeffs = spec.constant_coeffs()
    c = coeffs[1]
    if not (coeffs[1] == coeffs[3] == c):
        raise ModelError("the intermediate stage walls must share one coefficient")
    lam = np.log(spec.wall_heights[0] / spec.wall_heights[1])
    return (1.0 - np.exp(-lam / nu)) / c
