"""Differential-form fields, finite-difference exterior calculus, and all
numeric integration (fiber circles, boundary circles, excised base domains).

Forms are stored as antisymmetric coefficient tables over ordered axis
subsets of a chart; fields evaluate whole batches of chart points at once,
so every coefficient is a numpy array over the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import merge_sign

__all__ = [
    "ChartPoints",
    "PointwiseForm",
    "FormField",
    "ExcisedDomain",
    "AnnulusRegion",
    "BoxRegion",
    "exterior_derivative",
    "pullback_by_section",
    "base_integral_excised",
    "boundary_circle_integral",
    "fiber_integral",
    "gauss_legendre",
    "gauss_panels",
]

Index = tuple[int, ...]


class QuadratureError(ValueError):
    pass


@dataclass
class ChartPoints:
    """A batch of chart points: 2 coordinate arrays on the base, 3 on the
    sphere bundle (x1, x2, theta).  ``cache`` lets expensive geometry
    evaluations be shared between form fields at the same batch."""

    chart: str
    coords: tuple
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def size(self) -> int:
        return int(np.broadcast(*self.coords).size)

    @classmethod
    def of(cls, chart: str, *coords) -> "ChartPoints":
        arrs = tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in coords)
        arrs = np.broadcast_arrays(*arrs)
        return cls(chart, tuple(arrs))

    def shifted(self, axis: int, h: float) -> "ChartPoints":
        coords = list(self.coords)
        coords[axis] = coords[axis] + h
        return ChartPoints(self.chart, tuple(coords))


class PointwiseForm:
    """Coefficient table of a form at a batch of points.

    coeffs maps ordered axis tuples to arrays; keys of different lengths
    may coexist (mixed degree), though fields only ever produce one degree.
    """

    __array_ufunc__ = None  # keep numpy from absorbing forms into arrays

    def __init__(self, coeffs: dict[Index, np.ndarray] | None = None):
        self.coeffs = coeffs if coeffs is not None else {}

    def get(self, key: Index, default=0.0):
        return self.coeffs.get(tuple(key), default)

    def add_term(self, key, value) -> None:
        key_s, sign = _sort_axes(key)
        if sign == 0:
            return
        prev = self.coeffs.get(key_s)
        term = sign * value
        self.coeffs[key_s] = term if prev is None else prev + term

    def __add__(self, other: "PointwiseForm") -> "PointwiseForm":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return PointwiseForm(out)

    def __sub__(self, other: "PointwiseForm") -> "PointwiseForm":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "PointwiseForm":
        return PointwiseForm({k: scalar * v for k, v in self.coeffs.items()})

    def wedge(self, other: "PointwiseForm") -> "PointwiseForm":
        out = PointwiseForm()
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                merged, sign = merge_sign(k1, k2)
                if sign == 0:
                    continue
                prev = out.coeffs.get(merged)
                term = sign * (v1 * v2)
                out.coeffs[merged] = term if prev is None else prev + term
        return out

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.coeffs.values())


def _sort_axes(key) -> tuple[Index, int]:
    seq = list(key)
    sign = 1
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(seq, seq[1:]):
        if a == b:
            return tuple(seq), 0
    return tuple(seq), sign


class FormField:
    """A degree-k form field on a chart of dimension dim: a pure function
    from ChartPoints to a PointwiseForm coefficient table."""

    def __init__(self, dim: int, degree: int, func):
        self.dim = dim
        self.degree = degree
        self.func = func

    def __call__(self, pts: ChartPoints) -> PointwiseForm:
        return self.func(pts)

    def __add__(self, other: "FormField") -> "FormField":
        if self.degree != other.degree or self.dim != other.dim:
            raise QuadratureError("form degree/dimension mismatch in sum")
        return FormField(self.dim, self.degree, lambda p: self(p) + other(p))

    def __sub__(self, other: "FormField") -> "FormField":
        if self.degree != other.degree or self.dim != other.dim:
            raise QuadratureError("form degree/dimension mismatch in difference")
        return FormField(self.dim, self.degree, lambda p: self(p) - other(p))

    def __rmul__(self, scalar) -> "FormField":
        return FormField(self.dim, self.degree, lambda p: scalar * self(p))

    def scale_by(self, scalar_func) -> "FormField":
        """Multiply by a scalar function of the points (a 0-form)."""
        return FormField(self.dim, self.degree, lambda p: scalar_func(p) * self(p))

    def wedge(self, other: "FormField") -> "FormField":
        return FormField(
            self.dim, self.degree + other.degree, lambda p: self(p).wedge(other(p))
        )

    def d(self, h: float = 1e-4, richardson: bool = True) -> "FormField":
        return exterior_derivative(self, h=h, richardson=richardson)


def exterior_derivative(f: FormField, h: float = 1e-4, richardson: bool = True) -> FormField:
    """Exterior derivative by central differences on the coefficients.

    Each partial is a central difference at step h; with Richardson the
    h and h/2 stencils combine to an O(h^4) estimate.  Coefficients must
    be evaluable in a neighborhood of the batch (charts here are global,
    so displacements never leave the domain).
    """

    def dfunc(pts: ChartPoints) -> PointwiseForm:
        out = PointwiseForm()
        for axis in range(f.dim):
            deriv_by_key = _partial_of_coeffs(f, pts, axis, h, richardson)
            for key, dc in deriv_by_key.items():
                if axis in key:
                    continue
                out.add_term((axis,) + key, dc)
        return out

    return FormField(f.dim, f.degree + 1, dfunc)


def _partial_of_coeffs(f, pts, axis, h, richardson):
    cp = f(pts.shifted(axis, +h)).coeffs
    cm = f(pts.shifted(axis, -h)).coeffs
    keys = set(cp) | set(cm)
    d1 = {k: (cp.get(k, 0.0) - cm.get(k, 0.0)) / (2 * h) for k in keys}
    if not richardson:
        return d1
    cp2 = f(pts.shifted(axis, +h / 2)).coeffs
    cm2 = f(pts.shifted(axis, -h / 2)).coeffs
    out = {}
    for k in keys:
        d2 = (cp2.get(k, 0.0) - cm2.get(k, 0.0)) / h
        out[k] = (4.0 * d2 - d1[k]) / 3.0
    return out


def pullback_by_section(f: FormField, section) -> FormField:
    """Pull a bundle form back to the base along x -> (x, theta(x)).

    ``section`` must provide theta(chart, x1, x2) and theta_grad(chart,
    x1, x2) -> (dtheta/dx1, dtheta/dx2); dtheta substitutes into every
    theta slot of the form.  Result is a base form on 2 axes.
    """
    if f.dim != 3:
        raise QuadratureError("pullback expects a sphere-bundle form")

    def pulled(pts: ChartPoints) -> PointwiseForm:
        x1, x2 = pts.coords
        th = section.theta(pts.chart, x1, x2)
        t1, t2 = section.theta_grad(pts.chart, x1, x2)
        w = f(ChartPoints(pts.chart, (x1, x2, th)))
        out = PointwiseForm()
        subs = {0: ((0,), 1.0), 1: ((1,), 1.0)}
        for key, c in w.coeffs.items():
            # expand dtheta -> t1 dx1 + t2 dx2 in each slot
            expansions = [[]]
            for ax in key:
                if ax < 2:
                    expansions = [e + [(ax, 1.0)] for e in expansions]
                else:
                    expansions = [e + [(0, t1)] for e in expansions] + [
                        e + [(1, t2)] for e in expansions
                    ]
            for combo in expansions:
                axes = tuple(a for a, _ in combo)
                factor = 1.0
                for _, fac in combo:
                    factor = factor * fac
                out.add_term(axes, c * factor)
        return out

    return FormField(2, f.degree, pulled)


# ---------------------------------------------------------------------------
# quadrature rules


def gauss_legendre(a: float, b: float, order: int):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def gauss_panels(a: float, b: float, breakpoints, order: int):
    """Composite Gauss-Legendre over [a,b] split at interior breakpoints."""
    edges = [a] + [r for r in breakpoints if a < r < b] + [b]
    xs, ws = [], []
    for lo, hi in zip(edges, edges[1:]):
        x, w = gauss_legendre(lo, hi, order)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _geometric_breaks(r0: float, r1: float) -> list[float]:
    breaks = []
    r = r0 * 2.0
    while r < r1 * 0.75:
        breaks.append(r)
        r *= 2.0
    return breaks


# ---------------------------------------------------------------------------
# integration domains


@dataclass
class AnnulusRegion:
    """Polar region r in [r_inner, r_outer] around a center in one chart;
    r_inner = 0 is a full disk."""

    chart: str
    center: tuple[float, float]
    r_inner: float
    r_outer: float

    def nodes(self, order: int):
        n_ang = max(8, order)
        breaks = _geometric_breaks(max(self.r_inner, 1e-8), self.r_outer)
        per_panel = max(10, int(round(order / (len(breaks) + 1))))
        r, wr = gauss_panels(self.r_inner, self.r_outer, breaks, per_panel)
        phi, wphi = gauss_legendre(0.0, 2.0 * math.pi, n_ang)
        R, PHI = np.meshgrid(r, phi, indexing="ij")
        WR, WPHI = np.meshgrid(wr, wphi, indexing="ij")
        x1 = self.center[0] + R * np.cos(PHI)
        x2 = self.center[1] + R * np.sin(PHI)
        w = WR * WPHI * R  # dx1 ^ dx2 = r dr ^ dphi
        return x1.ravel(), x2.ravel(), w.ravel()


@dataclass
class BoxRegion:
    """Tensor-product region [a1,b1] x [a2,b2] in one chart."""

    chart: str
    x1_range: tuple[float, float]
    x2_range: tuple[float, float]

    def nodes(self, order: int):
        u, wu = gauss_legendre(*self.x1_range, order)
        v, wv = gauss_legendre(*self.x2_range, order)
        U, V = np.meshgrid(u, v, indexing="ij")
        WU, WV = np.meshgrid(wu, wv, indexing="ij")
        return U.ravel(), V.ravel(), (WU * WV).ravel()


@dataclass
class ExcisedDomain:
    """A chartwise decomposition of the base manifold with the excision
    disks already removed; regions are pairwise disjoint up to measure
    zero and cover M minus the excised disks."""

    regions: list

    def with_inner_radius(self, eps: float) -> "ExcisedDomain":
        out = []
        for reg in self.regions:
            if isinstance(reg, AnnulusRegion) and reg.r_inner > 0.0:
                out.append(AnnulusRegion(reg.chart, reg.center, eps, reg.r_outer))
            else:
                out.append(reg)
        return ExcisedDomain(out)


def base_integral_excised(f: FormField, domain: ExcisedDomain, order: int = 48) -> float:
    """Integrate a base 2-form over the excised domain, region by region."""
    if f.degree != 2 or f.dim != 2:
        raise QuadratureError("excised base integral expects a base 2-form")
    total = 0.0
    for region in domain.regions:
        x1, x2, w = region.nodes(order)
        pts = ChartPoints(region.chart, (x1, x2))
        c = f(pts).get((0, 1))
        total += float(np.sum(w * c))
    return total


def boundary_circle_integral(
    f: FormField, chart: str, center, radius: float, order: int = 64
) -> float:
    """Integrate a base 1-form over a counterclockwise coordinate circle."""
    if f.degree != 1 or f.dim != 2:
        raise QuadratureError("boundary integral expects a base 1-form")
    phi, w = gauss_legendre(0.0, 2.0 * math.pi, max(order, 16))
    x1 = center[0] + radius * np.cos(phi)
    x2 = center[1] + radius * np.sin(phi)
    pts = ChartPoints(chart, (x1, x2))
    form = f(pts)
    p = form.get((0,))
    q = form.get((1,))
    integrand = p * (-radius * np.sin(phi)) + q * (radius * np.cos(phi))
    return float(np.sum(w * integrand))


def extrapolate_to_zero(xs, ys) -> float:
    """Neville polynomial extrapolation of samples (x_k, y_k) to x = 0;
    used for the epsilon -> 0 limits of excised and boundary integrals."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    n = len(xs)
    for k in range(1, n):
        for i in range(n - 1, k - 1, -1):
            ys[i] = ((0.0 - xs[i - k]) * ys[i] - (0.0 - xs[i]) * ys[i - 1]) / (
                xs[i] - xs[i - k]
            )
    return ys[n - 1]


def fiber_integral(f: FormField, chart: str, x, order: int = 64) -> float:
    """Integrate the fiber restriction of a bundle 1-form over one fiber
    circle: only the dtheta coefficient survives the pullback."""
    if f.dim != 3:
        raise QuadratureError("fiber integral expects a sphere-bundle form")
    th, w = gauss_legendre(0.0, 2.0 * math.pi, max(order, 16))
    x1 = np.full_like(th, float(x[0]))
    x2 = np.full_like(th, float(x[1]))
    pts = ChartPoints(chart, (x1, x2, th))
    c = f(pts).get((2,))
    return float(np.sum(w * c))
