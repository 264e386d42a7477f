"""Atlases, transitions, and the metric zoo wiring."""

import math

import numpy as np
import pytest

from finslergbc.errors import InvalidMetricError, ValidationError
from finslergbc.manifolds import install_metric


class TestSphereAtlas:
    def test_transition_round_trip(self, sphere):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.uniform(-1.5, 1.5, 2)
            if np.hypot(*a) < 0.3:
                continue
            b = sphere.transition("south", "north", a)
            back = sphere.transition("north", "south", b)
            assert np.max(np.abs(back - a)) < 1e-12

    def test_transition_orientation_preserving(self, sphere):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = rng.uniform(-1.0, 1.0, 2)
            if np.hypot(*a) < 0.3:
                continue
            J = sphere.transition_jacobian("south", "north", a)
            assert np.linalg.det(J) > 0.0

    def test_jacobian_matches_fd(self, sphere):
        a = np.array([0.7, -0.4])
        J = sphere.transition_jacobian("south", "north", a)
        h = 1e-6
        for k in range(2):
            e = np.eye(2)[k] * h
            fd = (
                sphere.transition("south", "north", a + e)
                - sphere.transition("south", "north", a - e)
            ) / (2 * h)
            assert np.max(np.abs(J[:, k] - fd)) < 1e-8

    def test_embedding_consistency_on_overlap(self, sphere):
        """Both charts embed an overlap point to the same R^3 location."""
        rng = np.random.default_rng(3)
        for _ in range(30):
            a = rng.uniform(-1.4, 1.4, 2)
            if not 0.4 < np.hypot(*a) < 1.4:
                continue
            b = sphere.transition("south", "north", a)
            pa = sphere.embed("south", a)
            pb = sphere.embed("north", b)
            assert np.max(np.abs(pa - pb)) < 1e-12

    def test_embedding_on_unit_sphere(self, sphere):
        rng = np.random.default_rng(4)
        a = rng.uniform(-1.0, 1.0, (20, 2))
        p = sphere.embed("south", (a[:, 0], a[:, 1]))
        assert np.allclose(np.linalg.norm(p, axis=-1), 1.0, atol=1e-12)

    def test_chi(self, sphere, torus):
        assert sphere.chi == 2
        assert torus.chi == 0


class TestSphereArea:
    def test_round_area_4pi(self, sphere, round_metric):
        """Chartwise area of the unit round sphere: two half-areas of 2 pi
        each from the conformal factor, quadrature vs closed form."""
        from finslergbc.quadrature import base_integral_excised, FormField, PointwiseForm

        def area_form(pts):
            x1, x2 = pts.coords
            lam = 4.0 / (1.0 + x1 ** 2 + x2 ** 2) ** 2
            return PointwiseForm({(0, 1): lam})

        f = FormField(2, 2, area_form)
        dom = sphere.excised_domain([])
        total = base_integral_excised(f, dom, order=48)
        assert total == pytest.approx(4 * math.pi, abs=1e-6)

    def test_torus_area(self, torus):
        from finslergbc.quadrature import base_integral_excised, FormField, PointwiseForm

        f = FormField(2, 2, lambda pts: PointwiseForm({(0, 1): 1.0 + 0.0 * pts.coords[0]}))
        total = base_integral_excised(f, torus.excised_domain([]), order=24)
        assert total == pytest.approx(4 * math.pi ** 2, rel=1e-12)


class TestMetricZoo:
    def test_metric_transition_compatibility(self, sphere, round_metric, randers_metric):
        """F_south(a, y) = F_north(T(a), J y) on overlap samples to 1e-8."""
        rng = np.random.default_rng(5)
        for met in (round_metric, randers_metric):
            for _ in range(40):
                a = rng.uniform(-1.3, 1.3, 2)
                if not 0.4 < np.hypot(*a) < 1.3:
                    continue
                y = rng.standard_normal(2)
                b = sphere.transition("south", "north", a)
                J = sphere.transition_jacobian("south", "north", a)
                f_s = float(met.F("south", list(a), list(y)))
                f_n = float(met.F("north", list(b), list(J @ y)))
                assert abs(f_s - f_n) < 1e-8 * max(1.0, f_s)

    def test_randers_requires_sphere(self, torus):
        with pytest.raises(ValidationError):
            install_metric(torus, "randers", {"eps": 0.1})

    def test_randers_validity_guard(self, sphere):
        with pytest.raises(InvalidMetricError):
            install_metric(sphere, "randers", {"eps": 1.2})

    def test_unknown_zoo_id(self, sphere):
        with pytest.raises(ValidationError):
            install_metric(sphere, "lorentzian")

    def test_certification_passes_for_zoo(self, sphere, torus):
        """Fail-fast certification runs clean across the whole zoo."""
        install_metric(sphere, "round_sphere")
        install_metric(sphere, "randers", {"eps": 0.1})
        install_metric(torus, "euclidean")
        install_metric(torus, "flat_torus")
        install_metric(torus, "quartic", {"eps": 0.05})
        install_metric(torus, "riemannian", {"G": [[2.0, 0.3], [0.3, 1.0]]})

    def test_certification_rejects_bad_metric(self, torus):
        """A non-convex candidate (raw quartic) fails the axiom sweep."""
        with pytest.raises(InvalidMetricError):
            install_metric(torus, "quartic", {"eps": 0.0})

    def test_randers_axioms_dense_sweep(self, sphere, randers_metric):
        """randers(0.1) passes the Minkowski axioms at 1000 samples (the
        Hessian eigenvalue oracle over both charts)."""
        from finslergbc.manifolds import certify_metric

        certify_metric(sphere, randers_metric, samples=500, seed=99)

    def test_excised_domain_rejects_offcenter(self, sphere):
        with pytest.raises(ValidationError):
            sphere.excised_domain([("south", (0.3, 0.0), 0.1)])
