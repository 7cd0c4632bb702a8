import numpy as np
import pytest
from scipy import special, stats

from nearelastic.billiard2d import (BilliardPath, ConvexDomain, billiard_map,
                                    chord_length, check_integral_geometry,
                                    jacobian_identity_defect,
                                    reflected_diffusion_step,
                                    section_chain_step, simulate_billiard)
from nearelastic.model1d import ModelError
from nearelastic.rngs import substream


@pytest.fixture(scope="module")
def disk():
    return ConvexDomain.circle(1.0)


@pytest.fixture(scope="module")
def ellipse():
    return ConvexDomain.ellipse(2.0, 1.0)


@pytest.fixture(scope="module")
def blob():
    r = lambda t: 1.0 + 0.1 * np.cos(t)
    dr = lambda t: -0.1 * np.sin(t)
    return ConvexDomain.polar(r, dr)


class TestDomainGeometry:
    def test_circle_constants(self, disk):
        assert disk.perimeter == pytest.approx(2.0 * np.pi, abs=1e-14)
        assert disk.area == pytest.approx(np.pi, abs=1e-14)

    def test_ellipse_perimeter_oracle(self, ellipse):
        # complete elliptic integral of the second kind, m = 1 - (b/a)^2
        exact = 4.0 * 2.0 * special.ellipe(1.0 - 0.25)
        assert ellipse.perimeter == pytest.approx(exact, rel=1e-10)
        assert ellipse.area == pytest.approx(2.0 * np.pi, abs=1e-14)

    def test_polar_area(self, blob):
        # A = pi (1 + d^2 / 2) for r = 1 + d cos(t)
        assert blob.area == pytest.approx(np.pi * (1.0 + 0.005), rel=1e-10)

    def test_arclength_roundtrip(self, ellipse, blob):
        for dom in (ellipse, blob):
            ss = np.linspace(0.1, dom.perimeter - 0.1, 13)
            back = dom.arclength_of_param(dom.param_of_arclength(ss))
            assert np.allclose(back, ss, atol=1e-10)

    def test_points_on_boundary(self, ellipse):
        ss = np.linspace(0.0, ellipse.perimeter, 17)
        P = ellipse.point(ss)
        vals = (P[:, 0] / 2.0) ** 2 + P[:, 1] ** 2
        assert np.allclose(vals, 1.0, atol=1e-10)

    def test_normal_points_inward(self, ellipse, blob):
        for dom in (ellipse, blob):
            for s in np.linspace(0.2, dom.perimeter, 9):
                P = dom.point(s) + 1e-3 * dom.inward_normal(s)
                assert dom.contains(P)

    def test_tangent_is_unit(self, ellipse):
        ss = np.linspace(0.0, ellipse.perimeter, 11)
        assert np.allclose(np.linalg.norm(ellipse.tangent(ss), axis=-1), 1.0,
                           atol=1e-12)

    def test_invalid_domains(self):
        with pytest.raises(ModelError):
            ConvexDomain.circle(-1.0)
        with pytest.raises(ModelError):
            ConvexDomain.ellipse(1.0, 0.0)
        with pytest.raises(ModelError):
            ConvexDomain("square", {})


class TestBilliardMap:
    def test_circle_closed_form(self, disk):
        s1, th1 = billiard_map(disk, 0.3, 1.0)
        assert s1 == pytest.approx(2.3)
        assert th1 == pytest.approx(1.0)

    def test_circle_diameter_chord(self, disk):
        assert chord_length(disk, 0.7, np.pi / 2) == pytest.approx(2.0,
                                                                   abs=1e-12)
        assert chord_length(disk, 0.0, np.pi / 6) == pytest.approx(1.0,
                                                                   abs=1e-12)

    def test_time_reversal(self, ellipse, blob):
        for dom in (ellipse, blob):
            s0, th0 = 1.1, 0.8
            s1, th1 = billiard_map(dom, s0, th0)
            s2, th2 = billiard_map(dom, s1, np.pi - th1)
            assert float(s2) == pytest.approx(s0, abs=1e-8)
            assert np.pi - float(th2) == pytest.approx(th0, abs=1e-8)

    def test_endpoints_on_boundary(self, ellipse):
        ss = np.linspace(0.1, ellipse.perimeter - 0.1, 25)
        ths = np.linspace(0.2, np.pi - 0.2, 25)
        s1, th1 = billiard_map(ellipse, ss, ths)
        P = ellipse.point(s1)
        assert np.allclose((P[:, 0] / 2.0) ** 2 + P[:, 1] ** 2, 1.0,
                           atol=1e-8)
        assert np.all((th1 > 0) & (th1 < np.pi))

    def test_rejects_tangential_angle(self, disk):
        with pytest.raises(ModelError):
            billiard_map(disk, 0.0, 0.0)
        with pytest.raises(ModelError):
            billiard_map(disk, 0.0, np.pi)

    def test_chords_are_interior(self, blob):
        rng = substream(1, "chords")
        for _ in range(20):
            s = rng.uniform(0, blob.perimeter)
            th = rng.uniform(0.1, np.pi - 0.1)
            s1, _ = billiard_map(blob, s, th)
            mid = 0.5 * (blob.point(s) + blob.point(float(s1)))
            assert blob.contains(mid)


class TestInvariantMeasure:
    def test_integral_geometry_disk(self, disk):
        mass, chord_int = check_integral_geometry(disk)
        assert mass == pytest.approx(2.0 * disk.perimeter, rel=1e-12)
        assert chord_int == pytest.approx(2.0 * np.pi * disk.area, rel=1e-10)

    def test_integral_geometry_ellipse(self, ellipse):
        mass, chord_int = check_integral_geometry(ellipse)
        assert mass == pytest.approx(2.0 * ellipse.perimeter, rel=1e-10)
        assert chord_int == pytest.approx(2.0 * np.pi * ellipse.area,
                                          rel=1e-6)

    def test_jacobian_identity(self, ellipse, blob):
        rng = substream(2, "jac")
        for dom in (ellipse, blob):
            for _ in range(10):
                s = rng.uniform(0, dom.perimeter)
                th = rng.uniform(0.3, np.pi - 0.3)
                assert abs(jacobian_identity_defect(dom, s, th, h=1e-5)) < 1e-5


class TestAngleNoise:
    def test_stays_in_range(self):
        rng = substream(3, "noise")
        th = 0.1
        for _ in range(200):
            th = reflected_diffusion_step(th, 0.05, rng)
            assert 0.0 <= th <= np.pi

    def test_short_duration_small_move(self):
        rng = substream(4, "noise")
        moves = [abs(reflected_diffusion_step(np.pi / 2, 1e-4, rng)
                     - np.pi / 2) for _ in range(200)]
        # displacement scale ~ sqrt(duration / sin(theta))
        assert np.mean(moves) < 5e-2

    def test_invariant_density(self):
        # a long single chain should equilibrate to density sin(theta) / 2
        rng = substream(5, "noise")
        th, out = 1.0, []
        for _ in range(4000):
            th = reflected_diffusion_step(th, 0.3, rng)
            out.append(th)
        cdf = lambda x: 0.5 * (1.0 - np.cos(x))
        d = stats.kstest(out, cdf).statistic
        assert d < 0.04

    def test_variable_coefficient_runs(self):
        rng = substream(6, "noise")
        a_fn = lambda th: 1.0 + 0.5 * np.sin(th)
        th = reflected_diffusion_step(1.0, 0.05, rng, a_fn=a_fn)
        assert 0.0 <= th <= np.pi

    def test_section_chain_step(self, disk):
        rng = substream(7, "chain")
        s, th = section_chain_step(disk, 0.3, 1.0, 0.1, rng)
        assert isinstance(s, float) and isinstance(th, float)
        assert 0.0 <= s < disk.perimeter and 0.0 < th < np.pi


class TestSimulateBilliard:
    def test_elastic_keeps_energy(self, disk):
        rng = substream(8, "bill")
        path = simulate_billiard(disk, 0.0, 1.0, 2.0, 0.0, lambda s: 1.0,
                                 rng, horizon=0.0, noise_duration=0.0,
                                 max_collisions=500)
        assert np.all(path.H == 2.0)
        assert path.status in ("horizon", "collision_limit")

    def test_collision_count_scales_inversely_with_eps(self, disk):
        counts = {}
        for eps in (2e-2, 2e-3):
            rng = substream(9, "bill", str(eps))
            path = simulate_billiard(disk, 0.0, 1.0, 2.0, eps, lambda s: 1.0,
                                     rng, stop_energy=1.0, noise_duration=0.0)
            counts[eps] = len(path.H)
        assert counts[2e-3] / counts[2e-2] == pytest.approx(10.0, rel=0.05)

    def test_threshold_classification(self, disk):
        rng = substream(10, "bill")
        classify = lambda s: 1 if np.cos(s) < 0 else 2
        path = simulate_billiard(disk, 0.0, 1.2, 1.0, 1e-2, lambda s: 1.0,
                                 rng, threshold=0.5, classifier=classify,
                                 noise_duration=0.05)
        assert path.status == "threshold"
        assert path.final_region in (1, 2)
        assert path.H[-1] <= 0.5 < path.H[-2]

    def test_decay_matches_averaged_rate(self, disk):
        # constant loss on the unit disk: sqrt(H) decreases linearly in
        # rescaled time with slope sqrt(2) / pi
        rng = substream(11, "bill")
        path = simulate_billiard(disk, 0.0, 1.0, 2.0, 1e-3, lambda s: 1.0,
                                 rng, horizon=1.0, noise_duration=0.1)
        ts = np.linspace(0.0, 1.0, 50)
        target = (np.sqrt(2.0) - ts * np.sqrt(2.0) / np.pi) ** 2
        assert np.max(np.abs(path.energy_at(ts) - target)) / 2.0 < 0.05

    def test_stop_energy(self, disk):
        rng = substream(12, "bill")
        path = simulate_billiard(disk, 0.0, 1.0, 1.0, 5e-2, lambda s: 1.0,
                                 rng, stop_energy=0.2, noise_duration=0.0)
        assert path.status == "stop_energy"
        assert path.H[-1] <= 0.2

    def test_energy_never_negative(self, disk):
        rng = substream(13, "bill")
        path = simulate_billiard(disk, 0.0, 1.0, 0.05, 0.5, lambda s: 1.0,
                                 rng, stop_energy=0.0, noise_duration=0.0,
                                 max_collisions=50)
        assert np.all(path.H >= 0.0)
