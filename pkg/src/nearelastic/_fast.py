"""Compiled inner loops for large Monte Carlo runs.

The kernels mirror the pure-Python event loops exactly; randomness is
passed in as pregenerated arrays (or an explicit seed) so that results
are reproducible regardless of threading.
"""

import numpy as np
from numba import njit

__all__ = ["flat_final_well", "disk_run", "disk_chain_thetas",
           "FLAT_OK", "FLAT_STOP_ENERGY", "FLAT_NOISE_OVERFLOW",
           "FLAT_MAX_COLLISIONS", "DISK_THRESHOLD", "DISK_STOP_ENERGY",
           "DISK_HORIZON", "DISK_RECORD_FULL"]

FLAT_OK = 0
FLAT_STOP_ENERGY = 1
FLAT_NOISE_OVERFLOW = 2
FLAT_MAX_COLLISIONS = 3


@njit(cache=True)
def flat_final_well(q_walls, block_speed, coeffs, q0, p0, eps, delta,
                    noise, stop_energy, max_collisions):
    """Run the flat-model event loop until the particle enters a base well.

    q_walls     : wall positions (sorted)
    block_speed : per-wall blocking speed (inf for exterior walls)
    coeffs      : per-wall restitution constants
    noise       : (n_walls, m) pregenerated perturbation variates; the k-th
                  hit of wall j consumes noise[j, k-1].  Ignored when
                  delta == 0.
    Returns (well, n_collisions, status); well is 1-based, -1 if the run
    did not end in a base well.
    """
    n = q_walls.shape[0]
    hits = np.zeros(n, dtype=np.int64)
    m = noise.shape[1]
    q = q0
    p = p0
    ncol = 0
    wall = -1

    while True:
        # next blocking wall in the direction of motion
        speed = abs(p)
        if p > 0.0:
            if wall >= 0:
                j = wall + 1
            else:
                j = 0
                while j < n and q_walls[j] <= q:
                    j += 1
            while j < n - 1 and block_speed[j] < speed:
                j += 1
        else:
            if wall >= 0:
                j = wall - 1
            else:
                j = n - 1
                while j >= 0 and q_walls[j] >= q:
                    j -= 1
            while j > 0 and block_speed[j] < speed:
                j -= 1
        q = q_walls[j]
        wall = j

        hits[j] += 1
        factor = 1.0 - eps * coeffs[j]
        if delta != 0.0:
            if hits[j] > m:
                return -1, ncol, FLAT_NOISE_OVERFLOW
            factor -= eps * delta * noise[j, hits[j] - 1]
        post = speed * factor
        if p > 0.0:
            p = -post
        else:
            p = post
        ncol += 1

        if 0.5 * post * post <= stop_energy:
            return -1, ncol, FLAT_STOP_ENERGY

        # enclosing blocked walls after the reflection
        if p > 0.0:
            left = j
            right = j + 1
            while right < n - 1 and block_speed[right] < post:
                right += 1
        else:
            right = j
            left = j - 1
            while left > 0 and block_speed[left] < post:
                left -= 1
        if right == left + 1:
            return left + 1, ncol, FLAT_OK

        if ncol >= max_collisions:
            return -1, ncol, FLAT_MAX_COLLISIONS


DISK_THRESHOLD = 0
DISK_STOP_ENERGY = 1
DISK_HORIZON = 2
DISK_RECORD_FULL = 3

_TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _angle_noise(theta, duration, h, a_const):
    """Reflected angle diffusion run for a physical duration.

    Internal Euler clock h; physical time accrues at rate sin(theta)
    (trapezoid), matching the invariant density sin(theta).
    """
    t = 0.0
    sig = np.sqrt(a_const * h)
    while t < duration:
        s_prev = np.sin(theta)
        theta += sig * np.random.normal()
        theta = theta % _TWO_PI
        if theta > np.pi:
            theta = _TWO_PI - theta
        t += 0.5 * (s_prev + np.sin(theta)) * h
    return theta


@njit(cache=True)
def disk_run(seed, s0, th0, H0, eps, c_left, c_right, threshold, stop_energy,
             horizon, a_const, noise_h, fixed_duration, rec_t, rec_H):
    """Decaying unit-disk billiard with angle noise.

    The loss coefficient is c_left on the half boundary with cos(s) < 0
    and c_right elsewhere.  The angle diffuses between collisions for the
    flight duration (or `fixed_duration` if positive).  Collision times
    (rescaled) and post-collision energies are written into rec_t/rec_H.
    Returns (n_recorded, region, status); region is 1 (left) or 2 (right)
    at the collision where the energy first drops to `threshold`, else -1.
    """
    np.random.seed(seed)
    s = s0
    th = th0
    H = H0
    t = 0.0
    cap = rec_t.shape[0]
    n = 0
    if cap > 0:
        rec_t[0] = 0.0
        rec_H[0] = H0
        n = 1
    while True:
        ell = 2.0 * np.sin(th)
        flight = ell / np.sqrt(2.0 * H)
        if eps * (t + flight) > horizon:
            return n, -1, DISK_HORIZON
        t += flight
        s = (s + 2.0 * th) % _TWO_PI
        c = c_left if np.cos(s) < 0.0 else c_right
        H_new = H - eps * c
        if H_new < 0.0:
            H_new = 0.0
        crossed = H > threshold and H_new <= threshold
        H = H_new
        if n < cap:
            rec_t[n] = eps * t
            rec_H[n] = H
            n += 1
        elif cap > 0:
            return n, -1, DISK_RECORD_FULL
        if crossed:
            region = 1 if np.cos(s) < 0.0 else 2
            return n, region, DISK_THRESHOLD
        if H <= stop_energy:
            return n, -1, DISK_STOP_ENERGY
        dur = fixed_duration if fixed_duration > 0.0 else flight
        th = _angle_noise(th, dur, noise_h, a_const)


@njit(cache=True)
def disk_chain_thetas(seed, s0, th0, n_steps, duration, noise_h, a_const,
                      out_s, out_theta):
    """Iterate the unit-disk section chain (map + angle noise) n_steps times."""
    np.random.seed(seed)
    s = s0
    th = th0
    for i in range(n_steps):
        s = (s + 2.0 * th) % _TWO_PI
        th = _angle_noise(th, duration, noise_h, a_const)
        out_s[i] = s
        out_theta[i] = th
