import numpy as np
import pytest

from nearelastic.rngs import substream
from nearelastic.walk import (log_loss_sampler, parity_probability_numeric,
                              stopping_parity, uniform_sampler)


class TestStoppingParity:
    def test_limit_is_mean_ratio(self):
        xi = uniform_sampler(1.0, 2.0)     # mean 1.5
        eta = uniform_sampler(0.5, 1.5)    # mean 1.0
        rng = substream(7, "walk")
        res = stopping_parity(xi, eta, 500.0, 20_000, rng)
        assert res.p_even == pytest.approx(0.4, abs=0.02)
        assert res.p_odd == pytest.approx(0.6, abs=0.02)

    def test_mean_steps(self):
        xi = uniform_sampler(1.0, 2.0)
        eta = uniform_sampler(0.5, 1.5)
        rng = substream(8, "walk")
        res = stopping_parity(xi, eta, 500.0, 5_000, rng)
        # pairs advance by ~2.5 per two steps
        assert res.mean_steps == pytest.approx(2 * 500 / 2.5, rel=0.01)

    def test_deterministic_steps(self):
        # xi = 2, eta = 1: threshold 10 is crossed at step 7 (odd)
        xi = lambda rng, size: np.full(size, 2.0)
        eta = lambda rng, size: np.full(size, 1.0)
        rng = substream(9, "walk")
        res = stopping_parity(xi, eta, 10.0, 10, rng)
        assert res.p_even == 0.0 and res.mean_steps == 7.0

    def test_validation(self):
        rng = substream(1, "walk")
        with pytest.raises(ValueError):
            stopping_parity(uniform_sampler(1, 2), uniform_sampler(1, 2),
                            -1.0, 10, rng)
        bad = lambda rng, size: np.full(size, -1.0)
        with pytest.raises(ValueError):
            stopping_parity(bad, uniform_sampler(1, 2), 10.0, 10, rng)

    def test_reproducible(self):
        xi, eta = uniform_sampler(1, 2), uniform_sampler(2, 4)
        r1 = stopping_parity(xi, eta, 100.0, 1000, substream(3, "w"))
        r2 = stopping_parity(xi, eta, 100.0, 1000, substream(3, "w"))
        assert r1.n_even == r2.n_even


class TestNumericOracle:
    def test_matches_monte_carlo(self):
        xi_pdf = lambda x: 1.0 if 1.0 <= x <= 2.0 else 0.0
        eta_pdf = lambda x: 0.5 if 2.0 <= x <= 4.0 else 0.0
        p, defect = parity_probability_numeric(xi_pdf, eta_pdf, 60.0, 4.0)
        assert defect < 1e-10
        res = stopping_parity(uniform_sampler(1, 2), uniform_sampler(2, 4),
                              60.0, 100_000, substream(5, "oracle"))
        se = np.sqrt(p * (1 - p) / res.n_walks)
        assert abs(res.p_even - p) < 3 * se + 2e-3

    def test_approaches_mean_ratio(self):
        xi_pdf = lambda x: 1.0 if 1.0 <= x <= 2.0 else 0.0
        eta_pdf = lambda x: 0.5 if 2.0 <= x <= 4.0 else 0.0
        p, _ = parity_probability_numeric(xi_pdf, eta_pdf, 200.0, 4.0)
        assert p == pytest.approx(2.0 / 3.0, abs=0.005)


class TestLogLossSampler:
    def test_deterministic_value(self):
        s = log_loss_sampler(1e-3, 2.0, 0.0)
        vals = s(None, 4)
        assert np.allclose(vals, -np.log1p(-1e-3 * 2.0) / 1e-3)
        assert vals[0] == pytest.approx(2.0, rel=2e-3)

    def test_noise_shifts_mean(self):
        rng = substream(11, "loss")
        s = log_loss_sampler(1e-3, 2.0, 0.1, lambda r, n: r.uniform(1, 2, n))
        vals = s(rng, 200_000)
        assert np.mean(vals) == pytest.approx(2.0 + 0.1 * 1.5, rel=2e-3)

    def test_invalid_factor(self):
        s = log_loss_sampler(0.5, 1.0, 1.0, lambda r, n: np.full(n, 2.0))
        with pytest.raises(ValueError):
            s(substream(1, "x"), 3)
