import numpy as np
import pytest
from scipy.integrate import quad

from nearelastic.model1d import (FlatModelSpec, ModelError, PhasePoint,
                                 PotentialSpec, build_graph, make_potential,
                                 period, project)


@pytest.fixture(scope="module")
def two_well():
    return FlatModelSpec((-1.0, 0.0, 1.0), (1.0,), (1.0, 1.0, 1.0))


@pytest.fixture(scope="module")
def cosine_pot():
    return make_potential("cosine", -2.5, 2.5)


class TestFlatSpec:
    def test_validation(self):
        with pytest.raises(ModelError):
            FlatModelSpec((0.0, 1.0, 0.5), (1.0,), (1.0, 1.0, 1.0))
        with pytest.raises(ModelError):
            FlatModelSpec((0.0, 1.0, 2.0), (), (1.0, 1.0, 1.0))
        with pytest.raises(ModelError):
            FlatModelSpec((0.0, 1.0, 2.0), (-1.0,), (1.0, 1.0, 1.0))
        with pytest.raises(ModelError):
            FlatModelSpec((0.0, 1.0, 2.0), (1.0,), (1.0, 1.0))

    def test_blocking_speeds(self, two_well):
        assert np.isinf(two_well.blocking_speed(0))
        assert two_well.blocking_speed(1) == 1.0
        assert np.isinf(two_well.blocking_speed(2))

    def test_callable_coefficient(self):
        spec = FlatModelSpec((0.0, 1.0), (), (lambda v: 2.0 * v, 1.0))
        assert spec.coeff(0, 3.0) == 6.0
        assert spec.coeff(1, 3.0) == 1.0
        assert spec.constant_coeffs() is None

    def test_duplicate_heights_rejected(self):
        spec = FlatModelSpec((0.0, 1.0, 2.0, 3.0), (1.0, 1.0), (1.0,) * 4)
        with pytest.raises(ModelError):
            build_graph(spec)


class TestGraphConstruction:
    def test_single_well(self):
        g = build_graph(FlatModelSpec((0.0, 1.0), (), (1.0, 1.0)))
        assert len(g.edges) == 1 and len(g.vertices) == 0
        assert np.isinf(g.edge(1).h_hi)

    def test_two_well(self, two_well):
        g = build_graph(two_well)
        assert len(g.edges) == 3 and len(g.vertices) == 1
        assert g.edge(1).wells == (1,) and g.edge(1).q_hi == 0.0
        assert g.edge(2).wells == (2,) and g.edge(2).q_lo == 0.0
        assert g.edge(3).wells == (1, 2)
        v = g.vertices[0]
        assert v.energy == 0.5
        assert (v.edge_above, v.edge_below_left, v.edge_below_right) == (3, 1, 2)

    def test_five_well_nested(self):
        spec = FlatModelSpec(tuple(float(i) for i in range(6)),
                             (1.0, 3.0, 2.0, 1.5), (1.0,) * 6)
        g = build_graph(spec)
        assert len(g.edges) == 9 and len(g.vertices) == 4
        # leaves first, ordered by well position
        for i in range(1, 6):
            assert g.edge(i).wells == (i,)
        # merged edges in ascending separating energy, top edge last
        merged = [g.edge(i) for i in range(6, 10)]
        assert [e.wells for e in merged] == [(1, 2), (4, 5), (3, 4, 5),
                                             (1, 2, 3, 4, 5)]
        assert [e.h_lo for e in merged] == [0.5, 1.125, 2.0, 4.5]
        assert np.isinf(g.top_edge.h_hi) and g.top_edge.edge_id == 9

    def test_edge_count_formula(self):
        for heights in [(1.0,), (1.0, 2.0), (2.0, 1.0, 3.0)]:
            n = len(heights) + 1
            spec = FlatModelSpec(tuple(float(i) for i in range(n + 1)),
                                 heights, (1.0,) * (n + 1))
            g = build_graph(spec)
            assert len(g.edges) == 2 * len(g.vertices) + 1

    def test_vertex_navigation(self, two_well):
        g = build_graph(two_well)
        assert g.vertex_below(3).vertex_id == 1
        assert g.vertex_below(1) is None
        assert g.vertex_above(1).vertex_id == 1
        assert g.vertex_above(3) is None


class TestProjection:
    def test_flat(self, two_well):
        g = build_graph(two_well)
        assert project(two_well, PhasePoint(-0.5, 0.5), g).K == 1
        assert project(two_well, PhasePoint(0.5, -0.9), g).K == 2
        p = project(two_well, PhasePoint(0.5, 2.0), g)
        assert p.K == 3 and p.H == 2.0

    def test_out_of_domain(self, two_well):
        with pytest.raises(ModelError):
            project(two_well, PhasePoint(5.0, 1.0))

    def test_potential(self, cosine_pot):
        g = build_graph(cosine_pot)
        assert project(cosine_pot, PhasePoint(-1.0, 0.1), g).K == 1
        assert project(cosine_pot, PhasePoint(1.0, 0.1), g).K == 2
        assert project(cosine_pot, PhasePoint(0.5, 2.0), g).K == 3


class TestPeriods:
    def test_flat_closed_form(self, two_well):
        g = build_graph(two_well)
        assert period(two_well, 3, 2.0, g) == pytest.approx(2.0, abs=1e-14)
        assert period(two_well, 1, 0.25, g) == pytest.approx(
            2.0 / np.sqrt(0.5), abs=1e-13)

    def test_flat_domain_checks(self, two_well):
        g = build_graph(two_well)
        with pytest.raises(ModelError):
            period(two_well, 1, 0.7, g)       # above the leaf edge
        with pytest.raises(ModelError):
            period(two_well, 3, 0.3, g)       # below the top edge

    def test_potential_top_edge_oracle(self, cosine_pot):
        g = build_graph(cosine_pot)
        T = period(cosine_pot, 3, 2.0, g)
        val, _ = quad(lambda q: 1 / np.sqrt(2 * (2.0 - np.cos(q))),
                      -2.5, 2.5, limit=200)
        assert T == pytest.approx(2 * val, rel=1e-10)

    def test_potential_leaf_oracle(self, cosine_pot):
        g = build_graph(cosine_pot)
        H = 0.5
        qs = -np.arccos(H)
        gsub = lambda u: 2 * u / np.sqrt(2 * (H - np.cos(qs - u * u)))
        val, _ = quad(gsub, 0, np.sqrt(qs + 2.5), limit=200)
        assert period(cosine_pot, 1, H, g) == pytest.approx(2 * val, rel=1e-9)
        # symmetric potential: both leaf edges share the period
        assert period(cosine_pot, 2, H, g) == pytest.approx(
            period(cosine_pot, 1, H, g), rel=1e-12)

    def test_near_vertex_clipping(self, cosine_pot):
        g = build_graph(cosine_pot)
        assert np.isfinite(period(cosine_pot, 3, cosine_pot.barrier(), g))

    def test_period_grows_near_separatrix(self, cosine_pot):
        g = build_graph(cosine_pot)
        T_far = period(cosine_pot, 3, 3.0, g)
        T_near = period(cosine_pot, 3, 1.0 + 1e-6, g)
        assert T_near > T_far


class TestMakePotential:
    def test_builtins(self):
        for name in ("quadratic", "quartic"):
            spec = make_potential(name, -1.0, 2.0)
            assert spec.a1 < spec.a0 < spec.a2
            assert spec.barrier() == pytest.approx(0.0, abs=1e-9)

    def test_polynomial(self):
        # -q^2 + 1 on [-2, 3]
        spec = make_potential(None, -2.0, 3.0, coeffs=[-1.0, 0.0, 1.0])
        assert spec.a0 == pytest.approx(0.0, abs=1e-6)
        assert spec.barrier() == pytest.approx(1.0, abs=1e-9)

    def test_unknown_name(self):
        with pytest.raises(ModelError):
            make_potential("nope", -1.0, 1.0)

    def test_double_hump_rejected(self):
        with pytest.raises(ModelError):
            # two interior maxima
            make_potential(None, -2.0, 2.0,
                           coeffs=[-1.0, 0.0, 2.0, 0.0, 0.0])

    def test_coefficients(self):
        spec = make_potential("cosine", -2.5, 2.5, c1=2.0,
                              c2=lambda H: 1.0 + H)
        assert spec.coeff(1, 0.7) == 2.0
        assert spec.coeff(2, 0.5) == 1.5
