"""Planar convex billiard with nearly-elastic boundary and angle noise.

The boundary section is parameterized by arc length s and the outgoing
angle theta in (0, pi) measured from the counterclockwise tangent.  The
elastic billiard map preserves the measure sin(theta) ds dtheta, whose
total mass is 2L and which integrates the chord length to 2 pi A
(L = perimeter, A = area).

Energy is lost at collisions, H -> max(H - eps * c(x), 0), with a
position-dependent loss coefficient c on the boundary; between
collisions the outgoing angle diffuses (generator (a(theta) theta')'/2,
reflected at 0 and pi, run in the sin(theta) clock so that the invariant
density is preserved).  As eps -> 0 the rescaled energy decays
deterministically and the boundary region absorbing the motion is chosen
with probabilities proportional to the arc integrals of c against the
invariant measure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, optimize

from .model1d import ModelError

__all__ = [
    "ConvexDomain",
    "billiard_map",
    "chord_length",
    "check_integral_geometry",
    "jacobian_identity_defect",
    "reflected_diffusion_step",
    "section_chain_step",
    "simulate_billiard",
    "BilliardPath",
]

_TABLE_N = 40001


class ConvexDomain:
    """Smooth strictly convex domain with an arc-length boundary chart."""

    def __init__(self, kind, params):
        self.kind = kind
        self.params = dict(params)
        if kind == "circle":
            R = float(params["R"])
            if R <= 0:
                raise ModelError("radius must be positive")
            self.perimeter = 2.0 * np.pi * R
            self.area = np.pi * R * R
        elif kind == "ellipse":
            a, b = float(params["a"]), float(params["b"])
            if a <= 0 or b <= 0:
                raise ModelError("semi-axes must be positive")
            self.area = np.pi * a * b
            self._build_tables()
        elif kind == "polar":
            r = params["r"]
            dr = params["dr"]
            if not callable(r) or not callable(dr):
                raise ModelError("polar domains need callables r(phi), dr(phi)")
            self._build_tables()
            # area by the polar formula
            val, _ = integrate.quad(lambda t: 0.5 * r(t) ** 2, 0.0,
                                    2.0 * np.pi, limit=200)
            self.area = val
        else:
            raise ModelError(f"unknown domain kind {kind!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def circle(cls, R=1.0):
        return cls("circle", {"R": R})

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", {"a": a, "b": b})

    @classmethod
    def polar(cls, r, dr):
        """Domain {radius < r(phi)} for a smooth 2 pi-periodic r."""
        return cls("polar", {"r": r, "dr": dr})

    # -- chart in the internal parameter u ---------------------------------

    def _point_u(self, u):
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            return np.stack([a * np.cos(u), b * np.sin(u)], axis=-1)
        u1 = np.atleast_1d(u)
        r = np.asarray([self.params["r"](x) for x in u1])
        out = np.stack([r * np.cos(u1), r * np.sin(u1)], axis=-1)
        return out[0] if np.ndim(u) == 0 else out

    def _dpoint_u(self, u):
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            return np.stack([-a * np.sin(u), b * np.cos(u)], axis=-1)
        u1 = np.atleast_1d(u)
        r = np.asarray([self.params["r"](x) for x in u1])
        dr = np.asarray([self.params["dr"](x) for x in u1])
        dx = dr * np.cos(u1) - r * np.sin(u1)
        dy = dr * np.sin(u1) + r * np.cos(u1)
        out = np.stack([dx, dy], axis=-1)
        return out[0] if np.ndim(u) == 0 else out

    def _build_tables(self):
        us = np.linspace(0.0, 2.0 * np.pi, _TABLE_N)
        speeds = np.linalg.norm(np.atleast_2d(self._dpoint_u(us)), axis=-1)
        ss = integrate.cumulative_simpson(speeds, x=us, initial=0.0)
        self.perimeter = float(ss[-1])
        self._s_of_u = interpolate.CubicSpline(us, ss, bc_type="natural")
        self._u_of_s = interpolate.CubicSpline(ss, us, bc_type="natural")

    def param_of_arclength(self, s):
        s = np.mod(s, self.perimeter)
        if self.kind == "circle":
            return s / self.params["R"]
        return self._u_of_s(s)

    def arclength_of_param(self, u):
        u = np.mod(u, 2.0 * np.pi)
        if self.kind == "circle":
            return u * self.params["R"]
        return self._s_of_u(u)

    # -- chart in arc length ------------------------------------------------

    def point(self, s):
        if self.kind == "circle":
            R = self.params["R"]
            u = np.asarray(s) / R
            return np.stack([R * np.cos(u), R * np.sin(u)], axis=-1)
        return self._point_u(self.param_of_arclength(s))

    def tangent(self, s):
        """Unit tangent, counterclockwise orientation."""
        if self.kind == "circle":
            u = np.asarray(s) / self.params["R"]
            return np.stack([-np.sin(u), np.cos(u)], axis=-1)
        d = self._dpoint_u(self.param_of_arclength(s))
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def inward_normal(self, s):
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def contains(self, xy):
        x, y = xy
        if self.kind == "circle":
            return np.hypot(x, y) <= self.params["R"]
        if self.kind == "ellipse":
            return (x / self.params["a"]) ** 2 + (y / self.params["b"]) ** 2 <= 1
        return np.hypot(x, y) <= self.params["r"](np.arctan2(y, x))


def billiard_map(domain: ConvexDomain, s, theta):
    """Elastic section map (s, theta) -> (s', theta').  Vectorized.

    theta must lie strictly inside (0, pi): tangential chords are not
    defined.
    """
    s = np.asarray(s, float)
    theta = np.asarray(theta, float)
    if np.any((theta <= 1e-12) | (theta >= np.pi - 1e-12)):
        raise ModelError("outgoing angle must lie strictly inside (0, pi)")
    if domain.kind == "circle":
        R = domain.params["R"]
        return np.mod(s + 2.0 * theta * R, domain.perimeter), theta + 0.0 * s

    P0 = domain.point(s)
    t_hat = domain.tangent(s)
    n_hat = domain.inward_normal(s)
    d = (np.cos(theta)[..., None] * t_hat + np.sin(theta)[..., None] * n_hat)

    if domain.kind == "ellipse":
        a, b = domain.params["a"], domain.params["b"]
        A = (d[..., 0] / a) ** 2 + (d[..., 1] / b) ** 2
        B = 2.0 * (P0[..., 0] * d[..., 0] / a**2 + P0[..., 1] * d[..., 1] / b**2)
        t_star = -B / A
        P1 = P0 + t_star[..., None] * d
        u1 = np.arctan2(P1[..., 1] / b, P1[..., 0] / a)
        s1 = domain.arclength_of_param(u1)
    else:
        s1 = _polar_hit(domain, np.atleast_1d(s), np.atleast_1d(theta),
                        np.atleast_2d(P0), np.atleast_2d(d))
        if s.ndim == 0:
            s1 = s1[0]
    t1 = domain.tangent(s1)
    n1 = domain.inward_normal(s1)
    d_ref = d - 2.0 * np.sum(d * n1, axis=-1, keepdims=True) * n1
    theta1 = np.arctan2(np.sum(d_ref * n1, axis=-1), np.sum(d_ref * t1, axis=-1))
    return s1, theta1


def _polar_hit(domain, s, theta, P0, d):
    """Far boundary intersection of the rays P0 + t d, by bracketed root find."""
    r = domain.params["r"]
    out = np.empty(s.shape)
    for i in range(s.size):
        p0, di = P0[i], d[i]

        def g(t):
            x, y = p0[0] + t * di[0], p0[1] + t * di[1]
            return np.hypot(x, y) - r(np.arctan2(y, x))

        t_hi = 2.0 * max(np.hypot(*p0), 1.0) + 2.0
        ts = np.linspace(1e-9, 2.0 * t_hi, 256)
        vals = np.array([g(t) for t in ts])
        pos = np.nonzero(vals > 0)[0]
        if pos.size == 0:
            raise ModelError("ray does not exit the domain")
        k = pos[0]
        t_star = optimize.brentq(g, ts[k - 1] if k else 1e-9, ts[k], xtol=1e-14)
        x, y = p0[0] + t_star * di[0], p0[1] + t_star * di[1]
        out[i] = domain.arclength_of_param(np.arctan2(y, x))
    return out


def chord_length(domain, s, theta):
    """Length of the chord issued from (s, theta)."""
    s1, _ = billiard_map(domain, s, theta)
    P0, P1 = domain.point(s), domain.point(s1)
    return np.linalg.norm(P1 - P0, axis=-1)


def check_integral_geometry(domain, n_s=400, n_theta=200):
    """Gauss-Legendre evaluation of the two invariant-measure integrals.

    Returns (mass, chord_integral): the exact values are 2L and 2 pi A.
    """
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    ss = 0.5 * domain.perimeter * (xs + 1.0)
    ths = 0.5 * np.pi * (xt + 1.0)
    w2 = 0.25 * domain.perimeter * np.pi * np.outer(ws, wt)
    S, T = np.meshgrid(ss, ths, indexing="ij")
    sin_t = np.sin(T)
    mass = float(np.sum(w2 * sin_t))
    chords = chord_length(domain, S.ravel(), T.ravel()).reshape(S.shape)
    chord_int = float(np.sum(w2 * sin_t * chords))
    return mass, chord_int


def jacobian_identity_defect(domain, s, theta, h=1e-6):
    """|det DF| sin(theta') / sin(theta) - 1 by central differences."""
    def F(x):
        return np.asarray(billiard_map(domain, x[0], x[1]), float)

    x = np.array([s, theta], float)
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        hi, lo = F(x + e), F(x - e)
        ds = hi[0] - lo[0]
        # unwrap the periodic arc-length coordinate
        ds = (ds + 0.5 * domain.perimeter) % domain.perimeter \
            - 0.5 * domain.perimeter
        J[0, j] = ds / (2 * h)
        J[1, j] = (hi[1] - lo[1]) / (2 * h)
    _, theta1 = billiard_map(domain, s, theta)
    return abs(np.linalg.det(J)) * np.sin(theta1) / np.sin(theta) - 1.0


def reflected_diffusion_step(theta, duration, rng, a_fn=None, a_const=1.0,
                             h=None):
    """Advance the outgoing angle by the reflected diffusion for a physical
    duration.

    The angle evolves by Euler steps of the generator (a theta')'/2 in an
    internal clock and physical time accrues at rate sin(theta)
    (trapezoidal accumulation), so the invariant density sin(theta) of
    the physical-time process is respected.
    """
    if h is None:
        h = min(1e-3, duration / 100.0)
    t = 0.0
    sqrt_h = np.sqrt(h)
    while t < duration:
        s_prev = np.sin(theta)
        if a_fn is not None:
            a = a_fn(theta)
            da = (a_fn(theta + 1e-6) - a_fn(theta - 1e-6)) / 2e-6
            theta = theta + 0.5 * da * h + np.sqrt(a) * sqrt_h * rng.standard_normal()
        else:
            theta = theta + np.sqrt(a_const) * sqrt_h * rng.standard_normal()
        theta = np.mod(theta, 2.0 * np.pi)
        if theta > np.pi:
            theta = 2.0 * np.pi - theta
        t += 0.5 * (s_prev + np.sin(theta)) * h
    return theta


def section_chain_step(domain, s, theta, duration, rng, a_fn=None, a_const=1.0):
    """One step of the noisy section chain: billiard map, then angle noise."""
    s1, th1 = billiard_map(domain, s, theta)
    th1 = reflected_diffusion_step(float(th1), duration, rng, a_fn, a_const)
    return float(s1), th1


@dataclass
class BilliardPath:
    times: np.ndarray            # rescaled collision times
    H: np.ndarray                # energy after each collision
    s: np.ndarray                # collision arc positions
    theta: np.ndarray            # outgoing angles
    final_region: int | None     # classifier value at the threshold crossing
    status: str

    def energy_at(self, t):
        return np.interp(t, self.times, self.H)


def simulate_billiard(domain, s0, theta0, H0, eps, loss, rng,
                      horizon=np.inf, stop_energy=0.0, threshold=None,
                      classifier=None, a_const=1.0, noise_duration=None,
                      max_collisions=10**7):
    """Simulate the decaying billiard; reference (pure Python) loop.

    loss(s) is the per-collision energy loss coefficient; the energy
    update is H -> max(H - eps * loss(s), 0).  When the energy first
    drops to `threshold`, classifier(s) of the crossing collision is
    recorded as the selected region.  noise_duration defaults to the
    flight time of each chord.
    """
    s, th, H = float(s0), float(theta0), float(H0)
    t = 0.0
    ts, Hs, ss, thetas = [0.0], [H], [s], [th]
    region, status = None, "horizon"
    for _ in range(max_collisions):
        ell = float(chord_length(domain, s, th))
        flight = ell / np.sqrt(2.0 * H)
        if eps * (t + flight) > horizon:
            status = "horizon"
            break
        t += flight
        s, th = (float(v) for v in billiard_map(domain, s, th))
        H_new = max(H - eps * float(loss(s)), 0.0)
        crossed = threshold is not None and H > threshold >= H_new
        H = H_new
        ts.append(eps * t)
        Hs.append(H)
        ss.append(s)
        thetas.append(th)
        if crossed and region is None:
            region = classifier(s) if classifier is not None else 0
            status = "threshold"
            break
        if H <= stop_energy:
            status = "stop_energy"
            break
        dur = noise_duration if noise_duration is not None else flight
        th = reflected_diffusion_step(th, dur, rng, a_const=a_const)
    else:
        status = "collision_limit"
    return BilliardPath(np.asarray(ts), np.asarray(Hs), np.asarray(ss),
                        np.asarray(thetas), region, status)
