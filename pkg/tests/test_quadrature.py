"""Form fields, the finite-difference exterior calculus, pullbacks, and
the integration rules with their orientation conventions."""

import math

import numpy as np
import pytest

from finslergbc.quadrature import (
    AnnulusRegion,
    BoxRegion,
    ChartPoints,
    ExcisedDomain,
    FormField,
    PointwiseForm,
    base_integral_excised,
    boundary_circle_integral,
    exterior_derivative,
    extrapolate_to_zero,
    fiber_integral,
    gauss_legendre,
    gauss_panels,
    pullback_by_section,
)


def field_from(fn, dim=3, degree=0):
    return FormField(dim, degree, fn)


class TestGaussRules:
    @pytest.mark.parametrize("order", [4, 8, 16])
    def test_polynomial_exactness(self, order):
        """Order-n Gauss-Legendre integrates degree 2n-1 exactly."""
        x, w = gauss_legendre(-1.0, 3.0, order)
        for p in range(2 * order):
            got = float(np.sum(w * x ** p))
            want = (3.0 ** (p + 1) - (-1.0) ** (p + 1)) / (p + 1)
            assert got == pytest.approx(want, rel=1e-12)

    def test_panels_cover_interval(self):
        x, w = gauss_panels(0.0, 1.0, [0.25, 0.5], 6)
        assert float(np.sum(w)) == pytest.approx(1.0, rel=1e-14)
        assert np.all((x > 0) & (x < 1))

    def test_extrapolation_quadratic(self):
        xs = [0.2, 0.1, 0.05]
        ys = [5.0 + 3.0 * x - 7.0 * x * x for x in xs]
        assert extrapolate_to_zero(xs, ys) == pytest.approx(5.0, abs=1e-12)


class TestExteriorDerivative:
    def test_coordinate_one_form(self):
        """d(x1 dx2) = dx1 ^ dx2."""
        f = FormField(3, 1, lambda p: PointwiseForm({(1,): p.coords[0]}))
        pts = ChartPoints.of("c", [0.3, 1.0], [0.4, -2.0], [0.1, 0.2])
        w = exterior_derivative(f)(pts)
        assert np.allclose(w.get((0, 1)), 1.0, atol=1e-10)
        assert float(np.max(np.abs(np.asarray(w.get((0, 2), 0.0))))) < 1e-10

    def test_d_squared_zero(self):
        def fn(p):
            x1, x2, th = p.coords
            return PointwiseForm({(): np.sin(x1) * np.cos(th) + x2 ** 3})

        f = FormField(3, 0, fn)
        pts = ChartPoints.of("c", [0.5, -0.2], [0.3, 0.9], [1.2, 2.0])
        ddf = exterior_derivative(exterior_derivative(f))(pts)
        assert ddf.max_abs() < 1e-7

    def test_sign_bookkeeping_two_form(self):
        """d(x3 dx1^dx2) = dx3 ^ dx1 ^ dx2 = + dx1 ^ dx2 ^ dx3 ... with the
        insertion sign (-1)^2 from moving dx3 past two factors."""
        f = FormField(3, 2, lambda p: PointwiseForm({(0, 1): p.coords[2]}))
        pts = ChartPoints.of("c", [0.1], [0.2], [0.3])
        w = exterior_derivative(f)(pts)
        assert np.allclose(w.get((0, 1, 2)), 1.0, atol=1e-10)


class TestPullback:
    class Section:
        """theta(x) = a x1 + b x2 with exact gradient."""

        def __init__(self, a=0.7, b=-1.3):
            self.a, self.b = a, b

        def theta(self, chart, x1, x2):
            return self.a * x1 + self.b * x2

        def theta_grad(self, chart, x1, x2):
            return (self.a + 0.0 * x1, self.b + 0.0 * x1)

    def test_constant_section_kills_dtheta(self):
        f = FormField(3, 1, lambda p: PointwiseForm({(2,): 1.0 + 0.0 * p.coords[0]}))
        s = self.Section(0.0, 0.0)
        w = pullback_by_section(f, s)(ChartPoints.of("c", [0.1, 0.5], [0.2, 0.6]))
        assert w.max_abs() < 1e-15

    def test_base_form_unchanged(self):
        f = FormField(3, 2, lambda p: PointwiseForm({(0, 1): 1.0 + 0.0 * p.coords[0]}))
        w = pullback_by_section(f, self.Section())(ChartPoints.of("c", [0.3], [0.4]))
        assert np.allclose(w.get((0, 1)), 1.0)

    def test_substitution_rule(self):
        """Pullback of c(theta) dx1 ^ dtheta: dtheta -> t1 dx1 + t2 dx2."""
        s = self.Section(0.7, -1.3)

        def fn(p):
            return PointwiseForm({(0, 2): p.coords[2] ** 2})

        f = FormField(3, 2, fn)
        pts = ChartPoints.of("c", [0.5], [0.25])
        w = pullback_by_section(f, s)(pts)
        th = 0.7 * 0.5 - 1.3 * 0.25
        assert np.allclose(w.get((0, 1)), th ** 2 * (-1.3))

    def test_leibniz_vs_polynomial_oracle(self):
        """[X]*(f w) = ([X]*f)([X]*w) and linearity, on polynomial data."""
        rng = np.random.default_rng(70)
        s = self.Section(0.4, 0.9)
        for _ in range(20):
            a, b, c = rng.uniform(-1, 1, 3)

            def scalar(p):
                x1, x2, th = p.coords
                return a * x1 + b * th

            def one_form(p):
                x1, x2, th = p.coords
                return PointwiseForm({(0,): c * th, (2,): x2 + 0.0 * x1})

            fw = FormField(3, 1, lambda p: scalar(p) * one_form(p))
            pts = ChartPoints.of("c", rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5))
            lhs = pullback_by_section(fw, s)(pts)
            w = pullback_by_section(FormField(3, 1, one_form), s)(pts)
            x1, x2 = pts.coords
            th = s.theta("c", x1, x2)
            rhs = (a * x1 + b * th) * w
            assert (lhs - rhs).max_abs() < 1e-12


class TestBaseIntegral:
    def test_stokes_no_excision(self):
        """The integral of an exact form over the full closed torus box
        vanishes (periodic seams cancel)."""

        def one_form(p):
            x1, x2 = p.coords
            return PointwiseForm({(0,): np.sin(x1) * np.cos(x2), (1,): np.cos(2 * x2)})

        # d of the 1-form, computed exactly
        def two_form(p):
            x1, x2 = p.coords
            return PointwiseForm({(0, 1): 0.0 * x1 + np.sin(x1) * np.sin(x2)})

        dom = ExcisedDomain([BoxRegion("torus", (0, 2 * math.pi), (0, 2 * math.pi))])
        total = base_integral_excised(FormField(2, 2, two_form), dom, order=24)
        assert abs(total) < 1e-10

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_stokes_with_excisions(self, sphere, seed):
        """Orientation convention: the integral of an exact global 2-form
        over the excised sphere plus the counterclockwise boundary circle
        integrals vanishes (interior chart seams cancel), for random
        smooth global 1-forms built from the embedding scalars."""
        from finslergbc.ad import Dual, partial, value

        rng = np.random.default_rng(seed)
        c = rng.standard_normal(6)

        def omega(chart):
            def fn(p):
                x1, x2 = p.coords
                coeffs = {}
                for axis in range(2):
                    a1 = Dual(x1, 1.0 if axis == 0 else 0.0)
                    a2 = Dual(x2, 1.0 if axis == 1 else 0.0)
                    X, Y, Z = sphere.global_scalars(chart, a1, a2)
                    # (c0 Y + c1 Z^2) dX + (c2 X Z) dY + (c3 + c4 X Y) dZ
                    w = (
                        (c[0] * value(Y) + c[1] * value(Z) ** 2) * value(partial(X))
                        + (c[2] * value(X) * value(Z)) * value(partial(Y))
                        + (c[3] + c[4] * value(X) * value(Y)) * value(partial(Z))
                    )
                    coeffs[(axis,)] = w
                return PointwiseForm(coeffs)

            return fn

        f1 = FormField(2, 1, lambda p: omega(p.chart)(p))
        f2 = exterior_derivative(f1, h=1e-5)
        eps = 0.25
        dom = sphere.excised_domain(
            [("south", (0.0, 0.0), eps), ("north", (0.0, 0.0), eps)]
        )
        total = base_integral_excised(f2, dom, order=32)
        circles = sum(
            boundary_circle_integral(f1, chart, (0.0, 0.0), eps, order=64)
            for chart in ("south", "north")
        )
        assert total + circles == pytest.approx(0.0, abs=1e-5)

    def test_annulus_area(self):
        f = FormField(2, 2, lambda p: PointwiseForm({(0, 1): 1.0 + 0.0 * p.coords[0]}))
        dom = ExcisedDomain([AnnulusRegion("c", (0.0, 0.0), 0.3, 1.0)])
        total = base_integral_excised(f, dom, order=24)
        assert total == pytest.approx(math.pi * (1.0 - 0.09), rel=1e-12)


class TestBoundaryCircle:
    def test_winding_form(self):
        """The angular form d phi / (2 pi) integrates to 1 counterclockwise."""

        def fn(p):
            x1, x2 = p.coords
            r2 = x1 ** 2 + x2 ** 2
            return PointwiseForm({(0,): -x2 / (2 * math.pi * r2), (1,): x1 / (2 * math.pi * r2)})

        f = FormField(2, 1, fn)
        assert boundary_circle_integral(f, "c", (0.0, 0.0), 0.4) == pytest.approx(1.0, abs=1e-12)

    def test_exact_form_zero(self):
        def fn(p):
            x1, x2 = p.coords
            return PointwiseForm({(0,): 2 * x1 * x2, (1,): x1 ** 2})  # d(x1^2 x2)

        f = FormField(2, 1, fn)
        assert abs(boundary_circle_integral(f, "c", (0.1, -0.2), 0.3)) < 1e-14


class TestFiberIntegral:
    def test_volume_recovery(self, randers_metric, cartan_frame_randers):
        """int_fiber d nu = V(x), via the frame form's theta coefficient."""
        from finslergbc.metric import fiber_volume

        fc = cartan_frame_randers

        def fn(p):
            pi = fc.pi(p)
            return PointwiseForm({(2,): pi[0][1][2], (0,): pi[0][1][0], (1,): pi[0][1][1]})

        f = FormField(3, 1, fn)
        x = (0.25, -0.4)
        got = fiber_integral(f, "south", x, order=64)
        assert got == pytest.approx(fiber_volume(randers_metric, x, "south"), abs=1e-9)

    def test_upsilon1_over_v_gives_minus_one_over_2pi(self, randers_metric,
                                                      cartan_frame_randers):
        """int_fiber Upsilon_1 / V = (-1)^{n-1} / vol(S^1) = -1/(2 pi)."""
        from finslergbc.chern_forms import TransgressionForms
        from finslergbc.metric import fiber_volume

        forms = TransgressionForms(randers_metric, cartan_frame_randers, cartan_frame_randers)
        x = (0.3, 0.2)
        V = fiber_volume(randers_metric, x, "south")
        got = fiber_integral(forms.upsilon1(), "south", x, order=64) / V
        assert got == pytest.approx(-1.0 / (2 * math.pi), abs=1e-9)

    def test_phi0_over_factorial_gives_volume(self, randers_metric, cartan_frame_randers):
        from finslergbc.chern_forms import TransgressionForms
        from finslergbc.metric import fiber_volume

        forms = TransgressionForms(randers_metric, cartan_frame_randers, cartan_frame_randers)
        x = (-0.2, 0.5)
        got = fiber_integral(forms.phi(0), "south", x, order=64)
        assert got == pytest.approx(fiber_volume(randers_metric, x, "south"), abs=1e-9)


class TestConvergence:
    def test_doubling_order_stability(self, sphere, round_metric, cartan_frame_round):
        """Doubling the base order moves the reported integral by far less
        than a tenth of the acceptance tolerance."""
        from finslergbc.chern_forms import TransgressionForms
        from finslergbc.topology import rotational_field

        forms = TransgressionForms(round_metric, cartan_frame_round, cartan_frame_round)
        X = rotational_field(sphere)
        f2 = pullback_by_section(forms.gbc_integrand(), X)
        dom = sphere.excised_domain(
            [("south", (0.0, 0.0), 0.2), ("north", (0.0, 0.0), 0.2)]
        )
        i24 = base_integral_excised(f2, dom, order=24)
        i48 = base_integral_excised(f2, dom, order=48)
        assert abs(i48 - i24) < 0.1 * 1e-2
