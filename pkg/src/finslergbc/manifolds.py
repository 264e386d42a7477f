"""Built-in atlases (sphere, torus) and the metric zoo.

The sphere carries two stereographic charts glued along the equator; the
north chart flips one coordinate so the transition b = 1/z (complex) is
orientation preserving.  Integration regions split the manifold at the
equator into the two closed unit disks, so no partition of unity enters
any integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ad
from .errors import InvalidMetricError, ValidationError
from .metric import FinslerMetric, MinkowskiNorm, quartic_norm
from .quadrature import AnnulusRegion, BoxRegion, ExcisedDomain

__all__ = [
    "Atlas",
    "sphere_atlas",
    "torus_atlas",
    "install_metric",
    "certify_metric",
]


@dataclass
class Atlas:
    """Chart bookkeeping for a closed oriented surface."""

    name: str
    chart_ids: tuple
    chi: int

    # --- chart transitions -------------------------------------------------
    def transition(self, src: str, dst: str, x):
        if src == dst:
            return np.asarray(x, dtype=float)
        if self.name == "sphere":
            z1, z2 = x[0], x[1]
            r2 = z1 * z1 + z2 * z2
            # complex reciprocal: both directions use the same formula
            return np.asarray([z1 / r2, -z2 / r2], dtype=float)
        return np.asarray(x, dtype=float)

    def transition_jacobian(self, src: str, dst: str, x):
        if src == dst:
            return np.eye(2)
        if self.name == "sphere":
            z1, z2 = float(x[0]), float(x[1])
            r2 = z1 * z1 + z2 * z2
            # d(1/z)/dz = -1/z^2, written as a real 2x2 matrix
            a = -(z1 * z1 - z2 * z2) / (r2 * r2)
            b = -(-2.0 * z1 * z2) / (r2 * r2)
            return np.array([[a, -b], [b, a]])
        return np.eye(2)

    # --- embeddings (used for cross-chart deduplication) --------------------
    def embed(self, chart: str, x):
        x1 = np.asarray(x[0], dtype=float)
        x2 = np.asarray(x[1], dtype=float)
        if self.name == "sphere":
            r2 = x1 * x1 + x2 * x2
            X = 2.0 * x1 / (1.0 + r2)
            Y = 2.0 * x2 / (1.0 + r2)
            Z = (r2 - 1.0) / (1.0 + r2)
            if chart == "north":
                Y, Z = -Y, -Z
            return np.stack([X, Y, Z], axis=-1)
        return np.stack(
            [np.cos(x1), np.sin(x1), np.cos(x2), np.sin(x2)], axis=-1
        )

    def global_scalars(self, chart: str, x1, x2):
        """Three smooth global functions of the base point, expressed in
        chart coordinates; accept dual/array inputs."""
        if self.name == "sphere":
            r2 = x1 * x1 + x2 * x2
            X = 2.0 * x1 / (1.0 + r2)
            Y = 2.0 * x2 / (1.0 + r2)
            Z = (r2 - 1.0) / (1.0 + r2)
            if chart == "north":
                return X, -1.0 * Y, -1.0 * Z
            return X, Y, Z
        return ad.cos(x1), ad.sin(x1), ad.cos(x2)

    # --- integration regions ------------------------------------------------
    def in_region(self, chart: str, x) -> bool:
        if self.name == "sphere":
            return float(x[0]) ** 2 + float(x[1]) ** 2 <= 1.0 + 1e-12
        return True

    def region_box(self, chart: str):
        if self.name == "sphere":
            return (-1.0, 1.0), (-1.0, 1.0)
        return (0.0, 2.0 * math.pi), (0.0, 2.0 * math.pi)

    def excised_domain(self, excisions) -> ExcisedDomain:
        """Integration regions with per-chart excision disks removed.

        ``excisions`` is a list of (chart, center, radius).  Excised disks
        must sit at the chart center (coordinate-disk excision around the
        built-in zeros); anything else is rejected.
        """
        regions = []
        if self.name == "sphere":
            for chart in self.chart_ids:
                eps = 0.0
                for ch, center, radius in excisions:
                    if ch != chart:
                        continue
                    if math.hypot(*center) > 1e-8:
                        raise ValidationError(
                            "excision disks away from the chart center are not supported"
                        )
                    eps = max(eps, radius)
                regions.append(AnnulusRegion(chart, (0.0, 0.0), eps, 1.0))
            return ExcisedDomain(regions)
        if excisions:
            raise ValidationError("torus scenarios expect zero-free sections")
        return ExcisedDomain(
            [BoxRegion("torus", (0.0, 2.0 * math.pi), (0.0, 2.0 * math.pi))]
        )


def sphere_atlas() -> Atlas:
    return Atlas("sphere", ("south", "north"), chi=2)


def torus_atlas() -> Atlas:
    return Atlas("torus", ("torus",), chi=0)


# ---------------------------------------------------------------------------
# metric zoo


def _conformal_round(x, y):
    r2 = x[0] * x[0] + x[1] * x[1]
    lam_sqrt = 2.0 / (1.0 + r2)
    return lam_sqrt * ad.sqrt(y[0] * y[0] + y[1] * y[1])


def _round_sphere_metric(atlas: Atlas) -> FinslerMetric:
    charts = {c: _conformal_round for c in atlas.chart_ids}
    return FinslerMetric("sphere", charts, label="round_sphere")


def _randers_sphere_metric(atlas: Atlas, eps: float) -> FinslerMetric:
    """Round alpha plus eps times the rotational Killing one-form; the
    alpha-norm of beta is eps * 2|x|/(1+|x|^2) <= eps < 1 globally."""
    if not 0.0 < eps < 1.0:
        raise InvalidMetricError("randers parameter must satisfy 0 < eps < 1")

    def make(chart):
        sign = 1.0 if chart == "south" else -1.0

        def fn(x, y):
            r2 = x[0] * x[0] + x[1] * x[1]
            lam = 4.0 / (1.0 + r2) ** 2
            alpha = ad.sqrt(lam * (y[0] * y[0] + y[1] * y[1]))
            beta = sign * lam * (-x[1] * y[0] + x[0] * y[1])
            return alpha + eps * beta

        return fn

    return FinslerMetric(
        "sphere", {c: make(c) for c in atlas.chart_ids}, label=f"randers({eps})"
    )


def _norm_metric(atlas: Atlas, norm: MinkowskiNorm) -> FinslerMetric:
    charts = {c: (lambda x, y: norm.fn(y)) for c in atlas.chart_ids}
    return FinslerMetric(atlas.name, charts, label=norm.label)


def _riemannian_metric(atlas: Atlas, G) -> FinslerMetric:
    G = np.asarray(G, dtype=float)
    if np.any(np.linalg.eigvalsh(G) <= 0):
        raise InvalidMetricError("riemannian zoo entry needs a positive matrix")

    def fn(x, y):
        return ad.sqrt(
            sum(G[i, j] * y[i] * y[j] for i in range(2) for j in range(2))
        )

    return FinslerMetric(atlas.name, {c: fn for c in atlas.chart_ids}, label="riemannian")


def install_metric(atlas: Atlas, zoo_id: str, params: dict | None = None,
                   certify: bool = True) -> FinslerMetric:
    """Instantiate a zoo metric on the atlas and certify the Minkowski
    axioms on a sample sweep before any pipeline consumes it."""
    params = params or {}
    if zoo_id in ("euclidean", "flat_torus"):
        metric = _norm_metric(atlas, MinkowskiNorm(2, lambda y: ad.sqrt(y[0] * y[0] + y[1] * y[1]), "euclidean"))
    elif zoo_id == "riemannian":
        metric = _riemannian_metric(atlas, params.get("G", np.eye(2)))
    elif zoo_id == "round_sphere":
        if atlas.name != "sphere":
            raise ValidationError("round_sphere lives on the sphere atlas")
        metric = _round_sphere_metric(atlas)
    elif zoo_id == "randers":
        if atlas.name != "sphere":
            raise ValidationError("the randers zoo entry lives on the sphere atlas")
        metric = _randers_sphere_metric(atlas, float(params.get("eps", 0.1)))
    elif zoo_id == "quartic":
        metric = _norm_metric(atlas, quartic_norm(float(params.get("eps", 0.05))))
    else:
        raise ValidationError(f"unknown metric zoo id: {zoo_id!r}")
    if certify:
        certify_metric(atlas, metric)
    return metric


def certify_metric(atlas: Atlas, metric: FinslerMetric, samples: int = 60,
                   seed: int = 7, tol_homog: float = 1e-9) -> None:
    """Fail fast unless F is positive, positively homogeneous and strictly
    convex (positive definite y-Hessian of F^2/2) at random chart samples."""
    rng = np.random.default_rng(seed)
    # axis rays catch norms that degenerate exactly on coordinate directions
    probes = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi]
    for chart in metric.charts:
        (lo1, hi1), (lo2, hi2) = atlas.region_box(chart)
        for k in range(samples):
            x = [rng.uniform(lo1, hi1), rng.uniform(lo2, hi2)]
            th = probes[k] if k < len(probes) else rng.uniform(0.0, 2.0 * math.pi)
            y = [math.cos(th), math.sin(th)]
            F1 = float(metric.F(chart, x, y))
            if not F1 > 0.0:
                raise InvalidMetricError(f"{metric.label}: F not positive at sample")
            lam = rng.uniform(0.1, 10.0)
            Flam = float(metric.F(chart, x, [lam * y[0], lam * y[1]]))
            if abs(Flam - lam * F1) > tol_homog * max(1.0, abs(Flam)):
                raise InvalidMetricError(f"{metric.label}: homogeneity violated")
            norm = metric.norm_at(chart, x)
            g = norm.fundamental(y)
            if np.any(np.linalg.eigvalsh(g) <= 0.0):
                raise InvalidMetricError(f"{metric.label}: Hessian not positive definite")
