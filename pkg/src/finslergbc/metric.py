"""Finsler and Minkowski metric kernels.

Everything here reduces to derivatives of E = F^2 taken with nested dual
numbers: the fundamental tensor is the y-Hessian of E/2, the Cartan
tensor is (F/4) times the third y-derivative, and the indicatrix volume
density comes from the coordinate formula for the fiber volume form.
Evaluations accept numpy arrays in every coordinate slot, so one call
covers a whole batch of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import count

import numpy as np

from . import ad
from .ad import Dual, partial, value
from .errors import DomainError, InvalidMetricError, MetricEvaluationError
from .quadrature import gauss_legendre

__all__ = [
    "MinkowskiNorm",
    "FinslerMetric",
    "FundamentalTensor",
    "CartanTensor",
    "OrthonormalFrame",
    "MetricJets",
    "euclidean_norm",
    "riemannian_norm",
    "randers_norm",
    "quartic_norm",
    "sum_norms",
    "nested_jet",
    "metric_jets",
    "fundamental_tensor",
    "cartan_tensor",
    "indicatrix_param",
    "fiber_volume_form",
    "fiber_volume",
    "orthonormal_frame",
    "norm_orthonormal_frame",
]


# ---------------------------------------------------------------------------
# nested-dual jet extraction


def _eval_wrapped(E, x, y, dirs):
    """Evaluate E(x, y) with one dual layer per entry of dirs.

    dirs is a sequence of ("x"|"y", index) pairs, innermost first.  Both
    argument groups are wrapped at every level so each level carries one
    independent epsilon; mixed partials are read off by peeling.
    """
    xx, yy = list(x), list(y)
    for kind, idx in dirs:
        if kind == "y":
            yy = [Dual(c, 1.0 if k == idx else 0.0) for k, c in enumerate(yy)]
            xx = [Dual(c, 0.0) for c in xx]
        else:
            xx = [Dual(c, 1.0 if k == idx else 0.0) for k, c in enumerate(xx)]
            yy = [Dual(c, 0.0) for c in yy]
    return E(xx, yy)


def nested_jet(E, x, y, dirs):
    """Mixed partial of E(x, y) along the given coordinate directions."""
    r = _eval_wrapped(E, x, y, dirs)
    for _ in dirs:
        r = partial(r)
    return value(r)


# ---------------------------------------------------------------------------
# norms


@dataclass
class MinkowskiNorm:
    """A Minkowski norm on R^n: smooth away from 0, positively
    1-homogeneous, with positive definite y-Hessian of F^2/2."""

    n: int
    fn: callable
    label: str = "norm"

    def __call__(self, y):
        return self.fn(list(y))

    def fundamental(self, y) -> np.ndarray:
        """g_ij = (1/2) d^2 F^2 / dy_i dy_j at y."""
        _require_nonzero(y)
        E = lambda x, yy: self.fn(yy) ** 2
        g = np.empty((self.n, self.n))
        for i in range(self.n):
            for j in range(i, self.n):
                g[i, j] = g[j, i] = 0.5 * nested_jet(E, [], list(y), [("y", j), ("y", i)])
        return g

    def cartan(self, y) -> np.ndarray:
        """A_ijk = (F/4) d^3 F^2 / dy_i dy_j dy_k at y."""
        _require_nonzero(y)
        E = lambda x, yy: self.fn(yy) ** 2
        F = float(self(y))
        A = np.empty((self.n, self.n, self.n))
        for i in range(self.n):
            for j in range(i, self.n):
                for k in range(j, self.n):
                    v = 0.25 * F * nested_jet(
                        E, [], list(y), [("y", k), ("y", j), ("y", i)]
                    )
                    for p in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                        A[p] = v
        return A


def _require_nonzero(y) -> None:
    if float(np.min(sum(np.asarray(c, dtype=float) ** 2 for c in y))) <= 0.0:
        raise DomainError("metric quantities are undefined at y = 0 (slit bundle)")


def euclidean_norm(n: int = 2) -> MinkowskiNorm:
    return MinkowskiNorm(n, lambda y: ad.sqrt(sum(c * c for c in y)), "euclidean")


def riemannian_norm(G) -> MinkowskiNorm:
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if not np.allclose(G, G.T) or np.any(np.linalg.eigvalsh(G) <= 0):
        raise InvalidMetricError("riemannian norm needs a symmetric positive matrix")

    def fn(y):
        return ad.sqrt(sum(G[i, j] * y[i] * y[j] for i in range(n) for j in range(n)))

    return MinkowskiNorm(n, fn, "riemannian")


def randers_norm(b, G=None) -> MinkowskiNorm:
    """alpha + beta norm with alpha = sqrt(y^T G y), beta = b . y."""
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    G = np.eye(n) if G is None else np.asarray(G, dtype=float)
    Ginv = np.linalg.inv(G)
    if float(b @ Ginv @ b) >= 1.0:
        raise InvalidMetricError("randers data rejected: |beta|_alpha >= 1")

    def fn(y):
        alpha2 = sum(G[i, j] * y[i] * y[j] for i in range(n) for j in range(n))
        return ad.sqrt(alpha2) + sum(b[i] * y[i] for i in range(n))

    return MinkowskiNorm(n, fn, "randers")


def quartic_norm(mix: float = 0.05, n: int = 2) -> MinkowskiNorm:
    """F = (sum y_i^4 + mix (sum y_i^2)^2)^{1/4}; mix > 0 restores strict
    convexity on the axes, mix = 0 is the raw quartic (valid off-axis)."""

    def fn(y):
        q = sum(c ** 4 for c in y)
        s = sum(c * c for c in y)
        return (q + mix * s * s) ** 0.25

    return MinkowskiNorm(n, fn, f"quartic({mix})")


def sum_norms(f1: MinkowskiNorm, f2: MinkowskiNorm) -> MinkowskiNorm:
    """Pointwise sum of two Minkowski norms (again a Minkowski norm)."""
    if f1.n != f2.n:
        raise InvalidMetricError("cannot sum norms of different dimensions")
    return MinkowskiNorm(f1.n, lambda y: f1.fn(y) + f2.fn(y), f"{f1.label}+{f2.label}")


# ---------------------------------------------------------------------------
# chart-local Finsler metrics


_METRIC_SEQ = count()


@dataclass
class FinslerMetric:
    """Chart-local Finsler metric on a surface: per-chart F(x, y) with all
    arguments accepting dual numbers (y-derivatives to third order and
    x-derivatives to first order are taken)."""

    atlas_id: str
    charts: dict[str, callable]
    label: str = "metric"
    n: int = 2
    orientation: int = 1
    # distinguishes metric instances in evaluation caches (ids get reused)
    token: int = field(default_factory=lambda: next(_METRIC_SEQ))

    def F(self, chart: str, x, y):
        return self.charts[chart](list(x), list(y))

    def norm_at(self, chart: str, x) -> MinkowskiNorm:
        """Freeze the base point: the fiber Minkowski norm at x."""
        x = [float(c) for c in x]
        return MinkowskiNorm(self.n, lambda y: self.charts[chart](x, list(y)),
                             f"{self.label}@{chart}")


@dataclass
class FundamentalTensor:
    g: np.ndarray
    g_inv: np.ndarray


@dataclass
class CartanTensor:
    A: np.ndarray
    A_raised: np.ndarray


@dataclass
class OrthonormalFrame:
    """Rows of B are the frame vectors e_i in the coordinate frame; the
    last row is the tautological unit section l = y / F."""

    B: np.ndarray
    B_inv: np.ndarray


def fundamental_tensor(metric: FinslerMetric, x, y, chart: str | None = None) -> FundamentalTensor:
    chart = _default_chart(metric, chart)
    _require_nonzero(y)
    E = lambda xx, yy: metric.charts[chart](xx, yy) ** 2
    n = metric.n
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = 0.5 * nested_jet(E, list(x), list(y), [("y", j), ("y", i)])
    if np.any(np.linalg.eigvalsh(g) <= 0):
        raise InvalidMetricError("fundamental tensor is not positive definite")
    return FundamentalTensor(g, np.linalg.inv(g))


def cartan_tensor(metric: FinslerMetric, x, y, chart: str | None = None) -> CartanTensor:
    chart = _default_chart(metric, chart)
    _require_nonzero(y)
    norm = metric.norm_at(chart, x)
    A = norm.cartan(y)
    g_inv = fundamental_tensor(metric, x, y, chart).g_inv
    return CartanTensor(A, np.einsum("il,ljk->ijk", g_inv, A))


def _default_chart(metric: FinslerMetric, chart: str | None) -> str:
    if chart is not None:
        return chart
    if len(metric.charts) == 1:
        return next(iter(metric.charts))
    raise DomainError("metric has several charts; specify one")


# ---------------------------------------------------------------------------
# indicatrix geometry (n = 2)


def indicatrix_param(metric: FinslerMetric, x, chart: str | None = None):
    """Parameterise the indicatrix {F(x, y) = 1}: theta -> y(theta).

    Solves F(x, r u(theta)) = 1 for r by Newton (bisection fallback); by
    positive homogeneity Newton lands in one step, the iteration guards
    against eval functions that are only approximately homogeneous.
    """
    chart = _default_chart(metric, chart)
    if metric.n != 2:
        raise DomainError("indicatrix parameterisation is implemented for n = 2")
    xf = [float(c) for c in x]

    def y_of_theta(theta: float) -> np.ndarray:
        u = [math.cos(theta), math.sin(theta)]
        r = _solve_indicatrix_radius(metric, chart, xf, u)
        return np.array([r * u[0], r * u[1]])

    return y_of_theta


def _solve_indicatrix_radius(metric, chart, x, u) -> float:
    f_of = lambda r: float(value(metric.charts[chart](x, [r * u[0], r * u[1]]))) - 1.0
    f_unit = f_of(1.0) + 1.0
    if not f_unit > 0.0:
        raise MetricEvaluationError("metric not positive along the sampled ray")
    r = 1.0 / f_unit
    lo, hi = 0.0, None
    for _ in range(50):
        fr = f_of(r)
        if abs(fr) < 1e-12:
            return r
        if fr > 0:
            hi = r if hi is None else min(hi, r)
        else:
            lo = max(lo, r)
        rd = Dual(r, 1.0)
        dfr = value(partial(metric.charts[chart](x, [rd * u[0], rd * u[1]])))
        step = fr / dfr if dfr != 0 else None
        nxt = r - step if step is not None else None
        if nxt is None or nxt <= lo or (hi is not None and nxt >= hi):
            nxt = 0.5 * (lo + hi) if hi is not None else 2.0 * r
        r = nxt
    raise MetricEvaluationError("indicatrix radius solve did not converge")


def fiber_volume_form(metric: FinslerMetric, x, theta, chart: str | None = None):
    """Density rho(theta) with  d nu_x = rho(theta) d theta.

    Pulls the coordinate formula
      d nu = sqrt(det g) * sum_i (-1)^{i-1} (y^i/F) d(y^1/F) ^ ... ^ d(y^n/F)
    back along theta -> [u(theta)]; for n = 2 this is
      sqrt(det g) * (l^1 dl^2/dtheta - l^2 dl^1/dtheta).
    """
    chart = _default_chart(metric, chart)
    th = np.asarray(theta, dtype=float)
    x = [np.asarray(c, dtype=float) for c in x]
    # l(theta) and its theta-derivative by one dual layer
    thd = Dual(th, 1.0)
    u = [ad.cos(thd), ad.sin(thd)]
    F = metric.charts[chart]([Dual(c, 0.0) for c in x], u)
    l1, l2 = u[0] / F, u[1] / F
    rho_skew = value(l1) * value(partial(l2)) - value(l2) * value(partial(l1))
    detg = _det_g(metric, chart, x, np.cos(th), np.sin(th))
    return np.sqrt(detg) * rho_skew


def _det_g(metric, chart, x, y1, y2):
    E = lambda xx, yy: metric.charts[chart](xx, yy) ** 2
    y = [y1, y2]
    g00 = 0.5 * nested_jet(E, x, y, [("y", 0), ("y", 0)])
    g01 = 0.5 * nested_jet(E, x, y, [("y", 1), ("y", 0)])
    g11 = 0.5 * nested_jet(E, x, y, [("y", 1), ("y", 1)])
    return g00 * g11 - g01 * g01


def fiber_circle_rule(order: int):
    """Composite Gauss rule on [0, 2 pi]: four panels, order/4 nodes each."""
    panels = 4
    per = max(4, order // panels)
    nodes, weights = [], []
    for k in range(panels):
        a = 2.0 * math.pi * k / panels
        b = 2.0 * math.pi * (k + 1) / panels
        t, w = gauss_legendre(a, b, per)
        nodes.append(t)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def fiber_volume(metric: FinslerMetric, x, chart: str | None = None, order: int = 64) -> float:
    """V(x): Riemannian volume of the indicatrix fiber at x."""
    chart = _default_chart(metric, chart)
    th, w = fiber_circle_rule(order)
    rho = fiber_volume_form(metric, x, th, chart)
    return float(np.sum(w * rho))


def orthonormal_frame(metric: FinslerMetric, x, y, chart: str | None = None) -> OrthonormalFrame:
    """g-orthonormal frame with e_n = l = y/F and positive orientation.

    For n = 2 the first vector is fixed in closed form: w^i = eps^{ij}
    (g l)_j makes (e_1, e_2 = l) positively oriented with no sign branch,
    so the frame is smooth around the whole fiber.
    """
    chart = _default_chart(metric, chart)
    _require_nonzero(y)
    g = fundamental_tensor(metric, x, y, chart).g
    F = float(value(metric.charts[chart](list(x), list(y))))
    l = np.asarray(y, dtype=float) / F
    lhat = g @ l
    w = np.array([lhat[1], -lhat[0]])
    e1 = w / math.sqrt(float(w @ g @ w))
    B = np.vstack([e1, l])
    return OrthonormalFrame(B, np.linalg.inv(B))


def norm_orthonormal_frame(norm: MinkowskiNorm, y, orientation: int = 1) -> OrthonormalFrame:
    """Pointwise g-orthonormal frame of a Minkowski norm at y, any rank.

    Gram-Schmidt against g with the unit ray l placed last; the standard
    basis seeds the remaining vectors and e_1 flips if needed so that the
    frame orientation matches the requested one."""
    _require_nonzero(y)
    n = norm.n
    g = norm.fundamental(y)
    F = float(norm(y))
    l = np.asarray(y, dtype=float) / F
    rows = [l]
    for seed_vec in np.eye(n):
        v = seed_vec.copy()
        for e in rows:
            v = v - float(e @ g @ v) * e
        nv = float(v @ g @ v)
        if nv > 1e-12:
            rows.append(v / math.sqrt(nv))
        if len(rows) == n:
            break
    if len(rows) < n:
        raise InvalidMetricError("degenerate metric: frame completion failed")
    B = np.vstack(rows[1:] + [l])
    if float(np.linalg.det(B)) * orientation < 0:
        B[0] = -B[0]
    return OrthonormalFrame(B, np.linalg.inv(B))


# ---------------------------------------------------------------------------
# batched metric jets for the connection pipeline


@dataclass
class MetricJets:
    """All raw derivative tensors of E = F^2 needed downstream, evaluated
    at a batch of sphere-bundle chart points with representative y =
    (cos theta, sin theta).  Indices are python lists, values arrays."""

    F: np.ndarray
    u: list
    v: list
    T1: list
    T2: list
    T3: list
    X1: list
    X2: list
    X3: list


def metric_jets(metric: FinslerMetric, chart: str, x1, x2, th) -> MetricJets:
    E = lambda xx, yy: metric.charts[chart](xx, yy) ** 2
    x = [np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)]
    th = np.asarray(th, dtype=float)
    u = [np.cos(th), np.sin(th)]
    v = [-np.sin(th), np.cos(th)]
    n = 2

    T1 = [None] * n
    T2 = [[None] * n for _ in range(n)]
    T3 = [[[None] * n for _ in range(n)] for _ in range(n)]
    X1 = [None] * n
    X2 = [[None] * n for _ in range(n)]
    X3 = [[[None] * n for _ in range(n)] for _ in range(n)]

    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                r = _eval_wrapped(E, x, u, [("y", k), ("y", j), ("y", i)])
                d1 = partial(r)
                d2 = partial(d1)
                d3 = partial(d2)
                T1[i] = value(d1)
                T2[i][j] = T2[j][i] = value(d2)
                val3 = value(d3)
                for p in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                    T3[p[0]][p[1]][p[2]] = val3

    for A in range(n):
        for i in range(n):
            for j in range(i, n):
                r = _eval_wrapped(E, x, u, [("y", j), ("y", i), ("x", A)])
                d1 = partial(r)
                d2 = partial(d1)
                d3 = partial(d2)
                X1[A] = value(d1)
                X2[i][A] = value(d2)
                val3 = value(d3)
                X3[i][j][A] = X3[j][i][A] = val3

    F = np.sqrt(np.asarray(value(E(x, u)), dtype=float))
    return MetricJets(F=F, u=u, v=v, T1=T1, T2=T2, T3=T3, X1=X1, X2=X2, X3=X3)

