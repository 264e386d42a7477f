"""Connections on the pulled-back bundle over the sphere bundle chart.

The chain runs: metric jets -> geodesic-spray Ehresmann coefficients N ->
horizontal (Chern-type) coefficients gamma -> vertical modification rho =
2 A -> natural-frame 1-forms theta -> orthonormal-frame forms varpi ->
curvature by one finite-difference layer.  All coefficients are assembled
from analytically differentiated tensors, so the frame forms carry
AD-exact first derivatives; only the exterior derivative of varpi is
numeric (central differences + Richardson).

Index conventions follow  D s_i = theta_i^j (x) s_j  and  nabla e_i =
varpi_i^j (x) e_j, with matrices stored as m[i][j] = (lower i, upper j);
curvature is  Omega_i^j = d varpi_i^j - varpi_i^k ^ varpi_k^j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import count

import numpy as np

from .ad import Dual, partial, value
from .errors import ValidationError
from .metric import FinslerMetric, MetricJets, metric_jets
from .quadrature import ChartPoints, FormField, PointwiseForm

__all__ = [
    "EhresmannData",
    "ConnectionData",
    "FrameConnection",
    "CurvatureData",
    "ChartTensors",
    "bundle_tensors",
    "spray_connection",
    "explicit_ehresmann",
    "chern_horizontal",
    "chern_connection",
    "cartan_connection",
    "modify",
    "to_orthonormal_frame",
    "frame_transform",
    "curvature",
    "perturb_metric_compatible",
    "connection_family",
    "metric_compat_residual",
]

N_RANK = 2
AXES = 3  # chart coordinates (x1, x2, theta)


# ---------------------------------------------------------------------------
# Ehresmann (nonlinear) connection


_EHRESMANN_SEQ = count()


@dataclass
class EhresmannData:
    """Coefficients N^j_A of a horizontal splitting; ``at`` evaluates the
    matrix at a point, ``table`` (if set) replaces the canonical spray."""

    kind: str
    metric: FinslerMetric | None = None
    table: object = None  # callable(chart, x, y) -> (n, n) of arrays
    token: int = field(default_factory=lambda: next(_EHRESMANN_SEQ))

    def at(self, x, y, chart: str | None = None) -> np.ndarray:
        chart = _chart_of(self.metric, chart) if self.metric else chart
        if self.kind == "explicit":
            return np.asarray(self.table(chart, x, y), dtype=float)
        th = math.atan2(float(y[1]), float(y[0]))
        scale = math.hypot(float(y[0]), float(y[1]))
        jets = metric_jets(self.metric, chart, float(x[0]), float(x[1]), th)
        tens = _derived_tensors(jets)
        # spray N is 1-homogeneous; jets were taken at the unit ray
        return np.array([[float(tens["N"][i][j]) * scale for j in range(N_RANK)]
                         for i in range(N_RANK)])


def spray_connection(metric: FinslerMetric, x=None, y=None, chart: str | None = None):
    """Canonical Ehresmann connection from the geodesic spray,
    N^i_j = dG^i/dy^j.  With x, y supplied returns the matrix directly."""
    data = EhresmannData("spray", metric=metric)
    if x is not None and y is not None:
        return data.at(x, y, chart)
    return data


def explicit_ehresmann(table) -> EhresmannData:
    """General-bundle mode: the caller supplies N^j_A directly."""
    return EhresmannData("explicit", table=table)


def _chart_of(metric: FinslerMetric, chart: str | None) -> str:
    if chart is not None:
        return chart
    return next(iter(metric.charts))


# ---------------------------------------------------------------------------
# pointwise tensor assembly


@dataclass
class ChartTensors:
    """Everything the connection pipeline needs at one batch of sphere
    bundle chart points."""

    chart: str
    jets: MetricJets
    g: list
    ginv: list
    detg: object
    A: list
    Ar: list
    N: list
    gamma_chern: list
    l: list
    dg: list  # dg[i][j][axis]
    dl: list  # dl[i][axis]
    pts: object = None
    frame: dict = field(default_factory=dict)


def _derived_tensors(jets: MetricJets, N_override=None) -> dict:
    n = N_RANK
    T1, T2, T3 = jets.T1, jets.T2, jets.T3
    X1, X2, X3 = jets.X1, jets.X2, jets.X3
    F, u = jets.F, jets.u

    g = [[T2[i][j] * 0.5 for j in range(n)] for i in range(n)]
    detg = g[0][0] * g[1][1] - g[0][1] * g[0][1]
    ginv = [
        [g[1][1] / detg, -g[0][1] / detg],
        [-g[0][1] / detg, g[0][0] / detg],
    ]
    A = [[[F * T3[i][j][k] * 0.25 for k in range(n)] for j in range(n)] for i in range(n)]
    Ar = [
        [
            [sum(ginv[i][l] * A[l][j][k] for l in range(n)) for k in range(n)]
            for j in range(n)
        ]
        for i in range(n)
    ]

    H = [sum(X2[l][k] * u[k] for k in range(n)) - X1[l] for l in range(n)]
    dH = [
        [
            sum(X3[l][j][k] * u[k] for k in range(n)) + X2[l][j] - X2[j][l]
            for j in range(n)
        ]
        for l in range(n)
    ]
    # d(g^{il})/dy^j = -(1/2) g^{ia} T3[a][b][j] g^{bl}
    dginv = [
        [
            [
                -0.5
                * sum(
                    ginv[i][a] * T3[a][b][j] * ginv[b][l]
                    for a in range(n)
                    for b in range(n)
                )
                for j in range(n)
            ]
            for l in range(n)
        ]
        for i in range(n)
    ]
    N = [
        [
            0.25
            * sum(dginv[i][l][j] * H[l] + ginv[i][l] * dH[l][j] for l in range(n))
            for j in range(n)
        ]
        for i in range(n)
    ]
    if N_override is not None:
        N = N_override

    # delta g_ij / delta x^A in the chosen splitting
    dgdx = [
        [
            [
                0.5 * (X3[i][j][Aa] - sum(N[m][Aa] * T3[i][j][m] for m in range(n)))
                for Aa in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    gamma = [
        [
            [
                0.5
                * sum(
                    ginv[i][s] * (dgdx[s][j][Aa] + dgdx[s][Aa][j] - dgdx[j][Aa][s])
                    for s in range(n)
                )
                for Aa in range(n)
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    return {"g": g, "ginv": ginv, "detg": detg, "A": A, "Ar": Ar, "N": N, "gamma": gamma}


def bundle_tensors(metric: FinslerMetric, pts: ChartPoints,
                   ehresmann: EhresmannData | None = None) -> ChartTensors:
    """Cached tensor assembly at a batch of bundle chart points; an
    explicit Ehresmann table replaces the canonical spray coefficients."""
    key = ("tensors", metric.token,
           ehresmann.token if ehresmann is not None else "spray")
    hit = pts.cache.get(key)
    if hit is not None:
        return hit
    x1, x2, th = pts.coords
    jets = metric_jets(metric, pts.chart, x1, x2, th)
    n = N_RANK
    N_override = None
    if ehresmann is not None and ehresmann.kind == "explicit":
        N_override = ehresmann.table(pts.chart, [x1, x2], jets.u)
    der = _derived_tensors(jets, N_override)
    F, u, v = jets.F, jets.u, jets.v
    l = [u[i] / F for i in range(n)]
    F_th = sum(jets.T1[k] * v[k] for k in range(n)) / (2.0 * F)
    dl = [
        [
            -u[i] * jets.X1[0] / (2.0 * F ** 3),
            -u[i] * jets.X1[1] / (2.0 * F ** 3),
            v[i] / F - u[i] * F_th / (F * F),
        ]
        for i in range(n)
    ]
    dg = [
        [
            [
                0.5 * jets.X3[i][j][0],
                0.5 * jets.X3[i][j][1],
                0.5 * sum(jets.T3[i][j][k] * v[k] for k in range(n)),
            ]
            for j in range(n)
        ]
        for i in range(n)
    ]
    tens = ChartTensors(
        chart=pts.chart,
        jets=jets,
        g=der["g"],
        ginv=der["ginv"],
        detg=der["detg"],
        A=der["A"],
        Ar=der["Ar"],
        N=der["N"],
        gamma_chern=der["gamma"],
        l=l,
        dg=dg,
        dl=dl,
        pts=pts,
    )
    pts.cache[key] = tens
    return tens


def chern_horizontal(metric: FinslerMetric, ehresmann, x, y, chart: str | None = None):
    """Horizontal coefficients gamma^i_{jA} of the Chern-type connection,
    solving the partial metric-compatibility + symmetry system at (x, y)
    in the splitting defined by ``ehresmann`` (spray when None)."""
    chart = _chart_of(metric, chart)
    th = math.atan2(float(y[1]), float(y[0]))
    jets = metric_jets(metric, chart, float(x[0]), float(x[1]), th)
    N_override = None
    if ehresmann is not None and getattr(ehresmann, "kind", "spray") == "explicit":
        N_override = ehresmann.table(chart, [float(x[0]), float(x[1])], jets.u)
    der = _derived_tensors(jets, N_override)
    n = N_RANK
    return np.array(
        [[[float(der["gamma"][i][j][Aa]) for Aa in range(n)] for j in range(n)]
         for i in range(n)]
    )


# ---------------------------------------------------------------------------
# connections in the natural frame


@dataclass
class ConnectionData:
    """A connection of the Finsler bundle, split as theta^i_j =
    gamma^i_{jA} dx^A + rho^i_{jk} delta y^k in the natural frame.  The
    coefficient providers consume a ChartTensors batch."""

    label: str
    gamma_of: object  # callable(ChartTensors) -> gamma[i][j][A]
    rho_of: object  # callable(ChartTensors) -> rho[i][j][k]
    frame: str = "natural"


def _zero_rho(tens: ChartTensors):
    z = 0.0
    return [[[z for _ in range(N_RANK)] for _ in range(N_RANK)] for _ in range(N_RANK)]


def _cartan_rho(tens: ChartTensors):
    # vertical Cartan coefficients: the unique multiple of A^i_{jk} that
    # makes the modification metric-compatible (d^V g_ij = 2 A_ijk dy^k/F,
    # matched by rho_{(ij)k} symmetrization = 2 A_ijk)
    return [
        [[tens.Ar[i][j][k] for k in range(N_RANK)] for j in range(N_RANK)]
        for i in range(N_RANK)
    ]


def chern_connection() -> ConnectionData:
    return ConnectionData("chern", lambda t: t.gamma_chern, _zero_rho)


def modify(D: ConnectionData, metric: FinslerMetric | None = None) -> ConnectionData:
    """Keep the horizontal part of D, replace the vertical part by the
    Cartan coefficients built from A^j_{ik}.  Idempotent; the result is
    metric-compatible exactly when D is partially metric-compatible."""
    if D.frame != "natural":
        raise ValidationError("modification applies to natural-frame connection data")
    return ConnectionData(f"mod({D.label})", D.gamma_of, _cartan_rho)


def cartan_connection() -> ConnectionData:
    out = modify(chern_connection())
    out.label = "cartan"
    return out


def theta_chart_forms(tens: ChartTensors, D: ConnectionData):
    """theta[i][j][axis]: the 1-form theta_i^j = gamma^j_{iA} dx^A +
    rho^j_{ik} delta y^k expressed in the chart coframe, pulled back along
    theta -> [u(theta)] (so delta y^k = (v^k dtheta + N^k_A dx^A)/F)."""
    n = N_RANK
    F = tens.jets.F
    v = tens.jets.v
    gamma = D.gamma_of(tens)
    rho = D.rho_of(tens)
    theta = [[[None] * AXES for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            vert = [rho[j][i][k] for k in range(n)]
            for Aa in range(2):
                theta[i][j][Aa] = gamma[j][i][Aa] + sum(
                    vert[k] * tens.N[k][Aa] for k in range(n)
                ) / F
            theta[i][j][2] = sum(vert[k] * v[k] for k in range(n)) / F
    return theta


# ---------------------------------------------------------------------------
# orthonormal frame and its chart derivatives


def _frame_fields(tens: ChartTensors):
    """B, B^{-1} and the AD-exact chart derivatives dB[i][k][axis]; the
    frame is e_2 = l with e_1 the positively oriented g-unit normal."""
    if "B" in tens.frame:
        return tens.frame["B"], tens.frame["Binv"], tens.frame["dB"]
    n = N_RANK
    B_val = None
    Binv_val = None
    dB = [[[None] * AXES for _ in range(n)] for _ in range(n)]
    for axis in range(AXES):
        g_d = [
            [Dual(tens.g[i][j], tens.dg[i][j][axis]) for j in range(n)]
            for i in range(n)
        ]
        l_d = [Dual(tens.l[i], tens.dl[i][axis]) for i in range(n)]
        lhat = [sum(g_d[i][j] * l_d[j] for j in range(n)) for i in range(n)]
        w = [lhat[1], -1.0 * lhat[0]]
        nw = sum(w[i] * g_d[i][j] * w[j] for i in range(n) for j in range(n)) ** 0.5
        e1 = [w[i] / nw for i in range(n)]
        B = [e1, l_d]
        detB = B[0][0] * B[1][1] - B[0][1] * B[1][0]
        Binv = [
            [B[1][1] / detB, -1.0 * B[0][1] / detB],
            [-1.0 * B[1][0] / detB, B[0][0] / detB],
        ]
        for i in range(n):
            for k in range(n):
                dB[i][k][axis] = value(partial(B[i][k]))
        if axis == 0:
            B_val = [[value(B[i][k]) for k in range(n)] for i in range(n)]
            Binv_val = [[value(Binv[i][k]) for k in range(n)] for i in range(n)]
    tens.frame.update(B=B_val, Binv=Binv_val, dB=dB)
    return B_val, Binv_val, dB


def frame_transform(theta, B, dB, Binv):
    """varpi_i^j = (dB_i^k + B_i^m theta_m^k) (B^{-1})_k^j, axis by axis."""
    n = len(B)
    pi = [[[None] * AXES for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for axis in range(AXES):
                acc = 0.0
                for k in range(n):
                    term = dB[i][k][axis] + sum(
                        B[i][m] * theta[m][k][axis] for m in range(n)
                    )
                    acc = acc + term * Binv[k][j]
                pi[i][j][axis] = acc
    return pi


_CONN_SEQ = count()


@dataclass
class FrameConnection:
    """Orthonormal-frame connection forms varpi_i^j as chart coefficient
    functions over batches of bundle points."""

    label: str
    metric: FinslerMetric
    pi_of: object  # callable(ChartPoints) -> pi[i][j][axis]
    n: int = N_RANK
    token: int = field(default_factory=lambda: next(_CONN_SEQ))

    def pi(self, pts: ChartPoints):
        key = ("pi", self.token)
        hit = pts.cache.get(key)
        if hit is None:
            hit = self.pi_of(pts)
            pts.cache[key] = hit
        return hit

    def form(self, i: int, j: int) -> FormField:
        def func(pts: ChartPoints) -> PointwiseForm:
            pi = self.pi(pts)
            return PointwiseForm({(a,): pi[i][j][a] for a in range(AXES)})

        return FormField(AXES, 1, func)


def to_orthonormal_frame(D: ConnectionData, metric: FinslerMetric,
                         ehresmann: EhresmannData | None = None) -> FrameConnection:
    """Express a natural-frame connection in the canonical g-orthonormal
    frame with e_n = l; metric-compatible data yields skew varpi."""

    def pi_of(pts: ChartPoints):
        tens = bundle_tensors(metric, pts, ehresmann)
        theta = theta_chart_forms(tens, D)
        B, Binv, dB = _frame_fields(tens)
        return frame_transform(theta, B, dB, Binv)

    return FrameConnection(D.label, metric, pi_of)


def perturb_metric_compatible(base: FrameConnection, P, validate: bool = True) -> FrameConnection:
    """Add a skew-valued 1-form P (``P(pts) -> P[i][j][axis]``) to the
    frame forms; skewness keeps the connection metric-compatible."""

    def pi_of(pts: ChartPoints):
        pi = base.pi(pts)
        pert = P(pts)
        if validate:
            _require_skew(pert, pts)
        n = base.n
        return [
            [[pi[i][j][a] + pert[i][j][a] for a in range(AXES)] for j in range(n)]
            for i in range(n)
        ]

    return FrameConnection(f"pert({base.label})", base.metric, pi_of)


def _require_skew(P, pts, tol: float = 1e-10) -> None:
    n = N_RANK
    for i in range(n):
        for j in range(i, n):
            for a in range(AXES):
                s = P[i][j][a] + P[j][i][a]
                if float(np.max(np.abs(s))) > tol:
                    raise ValidationError("perturbation is not skew in the frame indices")


def connection_family(D: FrameConnection, nabla: FrameConnection, s: float) -> FrameConnection:
    """D_s = s nabla + (1 - s) D on the level of frame forms."""

    def pi_of(pts: ChartPoints):
        pa = D.pi(pts)
        pb = nabla.pi(pts)
        n = D.n
        return [
            [
                [(1.0 - s) * pa[i][j][a] + s * pb[i][j][a] for a in range(AXES)]
                for j in range(n)
            ]
            for i in range(n)
        ]

    return FrameConnection(f"family({D.label},{nabla.label};{s})", D.metric, pi_of)


# ---------------------------------------------------------------------------
# curvature


@dataclass
class CurvatureData:
    """Omega_i^j as 2-forms on the bundle chart; evaluation returns
    omega[i][j] as {(a, b): coeff} with a < b."""

    conn: FrameConnection
    h: float = 1e-4
    richardson: bool = True

    def omega(self, pts: ChartPoints):
        key = ("omega", self.conn.token, self.h)
        hit = pts.cache.get(key)
        if hit is not None:
            return hit
        out = _curvature_tables(self.conn, pts, self.h, self.richardson)
        pts.cache[key] = out
        return out

    def form(self, i: int, j: int) -> FormField:
        def func(pts: ChartPoints) -> PointwiseForm:
            return PointwiseForm(dict(self.omega(pts)[i][j]))

        return FormField(AXES, 2, func)


def _curvature_tables(conn: FrameConnection, pts: ChartPoints, h: float, richardson: bool):
    n = conn.n
    pi0 = conn.pi(pts)
    dpi = _dpi_tables(conn, pts, h, richardson)
    out = [[{} for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for a in range(AXES):
                for b in range(a + 1, AXES):
                    wedge = sum(
                        pi0[i][k][a] * pi0[k][j][b] - pi0[i][k][b] * pi0[k][j][a]
                        for k in range(n)
                    )
                    out[i][j][(a, b)] = dpi[i][j][(a, b)] - wedge
    return out


def _dpi_tables(conn: FrameConnection, pts: ChartPoints, h: float, richardson: bool):
    n = conn.n
    partials = []
    for axis in range(AXES):
        pp = conn.pi(pts.shifted(axis, +h))
        pm = conn.pi(pts.shifted(axis, -h))
        d1 = _pi_diff(pp, pm, 2.0 * h, n)
        if richardson:
            pp2 = conn.pi(pts.shifted(axis, +0.5 * h))
            pm2 = conn.pi(pts.shifted(axis, -0.5 * h))
            d2 = _pi_diff(pp2, pm2, h, n)
            d1 = [
                [
                    [(4.0 * d2[i][j][a] - d1[i][j][a]) / 3.0 for a in range(AXES)]
                    for j in range(n)
                ]
                for i in range(n)
            ]
        partials.append(d1)
    out = [[{} for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for a in range(AXES):
                for b in range(a + 1, AXES):
                    # (d varpi)_{ab} = d_a varpi_b - d_b varpi_a
                    out[i][j][(a, b)] = partials[a][i][j][b] - partials[b][i][j][a]
    return out


def _pi_diff(pp, pm, denom, n):
    return [
        [[(pp[i][j][a] - pm[i][j][a]) / denom for a in range(AXES)] for j in range(n)]
        for i in range(n)
    ]


def curvature(conn: FrameConnection, h: float = 1e-4, richardson: bool = True) -> CurvatureData:
    return CurvatureData(conn, h, richardson)


# ---------------------------------------------------------------------------
# compatibility diagnostics


def metric_compat_residual(metric: FinslerMetric, D: ConnectionData, pts: ChartPoints,
                           ehresmann: EhresmannData | None = None) -> float:
    """Max residual of  dg_ij - theta_i^k g_kj - theta_j^k g_ik  over the
    batch, all chart axes."""
    tens = bundle_tensors(metric, pts, ehresmann)
    theta = theta_chart_forms(tens, D)
    n = N_RANK
    worst = 0.0
    for i in range(n):
        for j in range(n):
            for a in range(AXES):
                rhs = sum(
                    theta[i][k][a] * tens.g[k][j] + theta[j][k][a] * tens.g[k][i]
                    for k in range(n)
                )
                res = tens.dg[i][j][a] - rhs
                worst = max(worst, float(np.max(np.abs(res))))
    return worst


def frame_skew_residual(conn: FrameConnection, pts: ChartPoints) -> float:
    pi = conn.pi(pts)
    worst = 0.0
    for i in range(conn.n):
        for j in range(conn.n):
            for a in range(AXES):
                worst = max(worst, float(np.max(np.abs(pi[i][j][a] + pi[j][i][a]))))
    return worst


# ---------------------------------------------------------------------------
# a globally defined perturbation profile


def sinusoidal_perturbation(atlas, base: FrameConnection, amplitude: float):
    """A smooth skew perturbation defined globally on the sphere bundle.

    The single independent entry mixes pullbacks of global base functions
    (through the atlas embedding scalars, with AD-exact differentials) and
    the base connection's own frame form, so it carries a genuine
    dtheta-component and the modification of the perturbed connection
    differs from the perturbed modification."""

    def P(pts: ChartPoints):
        x1 = np.asarray(pts.coords[0], dtype=float)
        x2 = np.asarray(pts.coords[1], dtype=float)
        X, Y, Z = atlas.global_scalars(pts.chart, x1, x2)
        dX, dY, dZ = [[None] * AXES for _ in range(3)]
        for axis in range(2):
            a1 = Dual(x1, 1.0 if axis == 0 else 0.0)
            a2 = Dual(x2, 1.0 if axis == 1 else 0.0)
            sx, sy, sz = atlas.global_scalars(pts.chart, a1, a2)
            dX[axis] = value(partial(sx))
            dY[axis] = value(partial(sy))
            dZ[axis] = value(partial(sz))
        dX[2] = dY[2] = dZ[2] = 0.0
        pi = base.pi(pts)
        f1 = np.sin(2.0 * Z + X)
        f2 = np.cos(Y - Z)
        f3 = 0.5 + 0.3 * np.sin(X)
        entry = [
            amplitude * (f1 * dX[a] + f2 * dY[a] + f3 * pi[0][1][a])
            for a in range(AXES)
        ]
        zero = [0.0] * AXES
        return [
            [zero, entry],
            [[-1.0 * e for e in entry], zero],
        ]

    P.token = next(_CONN_SEQ)
    return P


def perturbed_connection_data(atlas, metric: FinslerMetric, base: ConnectionData,
                              P) -> ConnectionData:
    """Natural-frame data of the perturbed connection D' = D + P.

    P is given in the orthonormal frame; conjugation by B moves it to the
    natural frame, and the chart 1-form splits into horizontal and
    vertical coefficients through the scaling-invariant extension of
    dtheta (dtheta = F v_k delta y^k - v_k N^k_A dx^A along y = u)."""

    def gamma_of(tens: ChartTensors):
        gamma = base.gamma_of(tens)
        Q = _natural_perturbation(tens, P)
        n = N_RANK
        v = tens.jets.v
        out = [[[None] * 2 for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for Aa in range(2):
                    shadow = Q[j][i][2] * sum(v[k] * tens.N[k][Aa] for k in range(n))
                    out[i][j][Aa] = gamma[i][j][Aa] + Q[j][i][Aa] - shadow
        return out

    def rho_of(tens: ChartTensors):
        rho = base.rho_of(tens)
        Q = _natural_perturbation(tens, P)
        n = N_RANK
        F = tens.jets.F
        v = tens.jets.v
        return [
            [
                [rho[i][j][k] + Q[j][i][2] * F * v[k] for k in range(n)]
                for j in range(n)
            ]
            for i in range(n)
        ]

    return ConnectionData(f"pert({base.label})", gamma_of, rho_of)


def _natural_perturbation(tens: ChartTensors, P):
    """Q = B^{-1} P B per axis (theta-index layout), cached on the batch."""
    cache = tens.frame.setdefault("Qmap", {})
    token = getattr(P, "token", None) or id(P)
    hit = cache.get(token)
    if hit is not None:
        return hit
    B, Binv, _ = _frame_fields(tens)
    Ptab = P(tens.pts)
    n = N_RANK
    Q = [
        [
            [
                sum(
                    Binv[i][j] * Ptab[j][k][axis] * B[k][m]
                    for j in range(n)
                    for k in range(n)
                )
                for axis in range(AXES)
            ]
            for m in range(n)
        ]
        for i in range(n)
    ]
    cache[token] = Q
    return Q

