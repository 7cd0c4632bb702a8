"""Random walks with alternating step laws and level-crossing parity.

A walk takes positive steps drawn alternately from two laws (xi on odd
steps, eta on even steps) and stops the first time its running sum
exceeds a threshold.  As the threshold grows, the probability that the
stopping step is even tends to E[eta] / (E[xi] + E[eta]): levels are
crossed proportionally to the mean sizes of the two step types.

The same walk describes which wall a decelerating particle is facing
when its log-speed first drops below a fixed level, with steps given by
the per-collision log-speed losses.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParityResult",
    "stopping_parity",
    "parity_probability_numeric",
    "log_loss_sampler",
    "uniform_sampler",
]


@dataclass(frozen=True)
class ParityResult:
    threshold: float
    n_walks: int
    n_even: int
    mean_steps: float

    @property
    def p_even(self):
        return self.n_even / self.n_walks

    @property
    def p_odd(self):
        return 1.0 - self.p_even


def uniform_sampler(lo, hi):
    """Sampler (rng, size) -> Uniform(lo, hi) draws."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    return lambda rng, size: rng.uniform(lo, hi, size)


def log_loss_sampler(eps, c, delta, noise_sampler=None):
    """Sampler of per-collision log-speed losses -ln(1 - eps*c - eps*delta*nu) / eps.

    With noise_sampler None the loss is deterministic (nu = 0).
    """
    if noise_sampler is None:
        val = -np.log1p(-eps * c) / eps
        return lambda rng, size: np.full(size, val)

    def sample(rng, size):
        nu = noise_sampler(rng, size)
        arg = 1.0 - eps * c - eps * delta * nu
        if np.any(arg <= 0):
            raise ValueError("speed-loss factor not positive")
        return -np.log(arg) / eps

    return sample


def stopping_parity(xi_sampler, eta_sampler, threshold, n_walks, rng,
                    max_pairs=10**7) -> ParityResult:
    """Monte Carlo estimate of the parity of the first level-crossing step.

    xi_sampler / eta_sampler: callables (rng, size) -> positive step arrays.
    All walks advance in lockstep; finished walks stop drawing.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    S = np.zeros(n_walks)
    active = np.arange(n_walks)
    steps_taken = np.zeros(n_walks, dtype=np.int64)
    even = np.zeros(n_walks, dtype=bool)

    for pair in range(max_pairs):
        for is_even, sampler in ((False, xi_sampler), (True, eta_sampler)):
            draw = np.asarray(sampler(rng, active.size), float)
            if np.any(draw <= 0):
                raise ValueError("walk steps must be positive")
            S[active] += draw
            steps_taken[active] += 1
            crossed = S[active] > threshold
            if np.any(crossed):
                done = active[crossed]
                even[done] = is_even
                active = active[~crossed]
            if active.size == 0:
                return ParityResult(threshold, n_walks, int(even.sum()),
                                    float(steps_taken.mean()))
    raise RuntimeError("walks did not cross the threshold "
                       f"within {max_pairs} step pairs")


def parity_probability_numeric(xi_pdf, eta_pdf, threshold, support, dx=None,
                               tol=1e-12):
    """Exact (lattice-convolution) probability that the crossing step is even.

    xi_pdf / eta_pdf: densities on [0, support] (support must cover both
    laws).  The sub-threshold law of the running sum is propagated on a
    uniform grid; crossing mass is accumulated by parity.  Returns
    (p_even, mass_defect).
    """
    if dx is None:
        dx = min(support, threshold) / 4000.0
    xs = np.arange(0.0, support + dx, dx)
    fxi = np.asarray([xi_pdf(x) for x in xs], float)
    feta = np.asarray([eta_pdf(x) for x in xs], float)
    fxi /= fxi.sum() * dx
    feta /= feta.sum() * dx

    n_grid = int(np.floor(threshold / dx)) + 1
    density = np.zeros(n_grid)
    density[0] = 1.0 / dx                # point mass at the origin
    p_cross = [0.0, 0.0]                 # [odd, even]
    while density.sum() * dx > tol:
        for parity, f in ((0, fxi), (1, feta)):
            full = np.convolve(density, f) * dx
            p_cross[parity] += full[n_grid:].sum() * dx
            density = full[:n_grid]
    total = p_cross[0] + p_cross[1]
    return p_cross[1] / total, 1.0 - total
