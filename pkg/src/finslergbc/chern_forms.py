"""Characteristic and transgression forms on the sphere bundle.

Built from the frame forms of a metric-compatible connection D and its
modification nabla: the contractions Phi_k, the transgression Pi with
d Pi = Omega^nabla, its split Pi = Upsilon_1 + Upsilon_2, the Chern-Weil
interpolation term Upsilon_0, the correction FrakE, and the Gaussian
family U_t whose t = 0 slice is the Pfaffian form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import count, permutations

import numpy as np

from .algebra import (
    BigradedElement,
    SkewMatrixValuedForm,
    berezin,
    exp_truncated,
    pfaffian,
    sort_with_parity,
)
from .connection import AXES, CurvatureData, FrameConnection, curvature
from .errors import ValidationError
from .metric import FinslerMetric, fiber_volume_form
from .quadrature import ChartPoints, FormField, PointwiseForm, gauss_legendre

__all__ = [
    "TransgressionBundle",
    "MathaiQuillenState",
    "phi_k",
    "pi_coefficients",
    "pi_coefficients_display",
    "upsilon1_coefficient",
    "pi_form",
    "omega_pfaffian",
    "transgression_check",
    "chern_weil_upsilon0",
    "frak_e",
    "mathai_quillen_Ut",
    "TransgressionForms",
    "epsilon_constant",
]

IMAG_TOL = 1e-10
_FORMS_SEQ = count()


def epsilon_constant(n: int):
    """1 for even rank, i for odd rank."""
    return 1.0 if n % 2 == 0 else 1.0j


# ---------------------------------------------------------------------------
# coefficient tables


def pi_coefficients(n: int) -> list[float]:
    """Weights c_k with Pi = sum_k c_k Phi_k (gamma-function display)."""
    out = []
    for k in range(0, (n - 1) // 2 + 1):
        c = (
            ((-1.0) ** (n - 1))
            / math.pi ** (n / 2.0)
            * ((-1.0) ** k)
            * math.gamma((n - 2.0 * k) / 2.0)
            / (math.factorial(k) * math.factorial(n - 1 - 2 * k) * 2.0 ** (2 * k + 1))
        )
        out.append(c)
    return out


def _double_factorial(m: int) -> int:
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def pi_coefficients_display(n: int) -> list[float]:
    """The same weights from the explicit even/odd displays; must agree
    with pi_coefficients identically."""
    out = []
    if n % 2 == 0:
        p = n // 2
        for k in range(0, p):
            c = (
                1.0
                / (2.0 * math.pi) ** p
                * ((-1.0) ** (k + 1))
                / (_double_factorial(2 * p - 2 * k - 1) * math.factorial(k) * 2.0 ** k)
            )
            out.append(c)
    else:
        p = (n - 1) // 2
        for k in range(0, p + 1):
            c = (
                1.0
                / (math.pi ** p * 2.0 ** (2 * p + 1) * math.factorial(p))
                * ((-1.0) ** k)
                * math.comb(p, k)
            )
            out.append(c)
    return out


def upsilon1_coefficient(n: int) -> float:
    return (
        ((-1.0) ** (n - 1))
        / (2.0 * math.pi ** (n / 2.0))
        * math.gamma(n / 2.0)
        / math.factorial(n - 1)
    )


# ---------------------------------------------------------------------------
# the Phi_k contractions


def phi_k(curv: CurvatureData, conn: FrameConnection, k: int) -> FormField:
    """Phi_k = sum eps_{a_1..a_{n-1}} Omega^{a_2}_{a_1} ^ ... ^
    varpi^n_{a_{2k+1}} ^ ...: k curvature factors and n-1-2k frame-form
    factors, contracted with the Levi-Civita symbol."""
    n = conn.n
    if not 0 <= k <= (n - 1) // 2:
        raise ValidationError(f"phi_k index k={k} out of range for rank {n}")

    def func(pts: ChartPoints) -> PointwiseForm:
        om = curv.omega(pts) if k > 0 else None
        pi = conn.pi(pts)
        out = PointwiseForm()
        for alpha in permutations(range(n - 1)):
            _, sign = sort_with_parity(alpha)
            factors = []
            for s in range(k):
                factors.append(PointwiseForm(dict(om[alpha[2 * s]][alpha[2 * s + 1]])))
            for s in range(2 * k, n - 1):
                factors.append(
                    PointwiseForm({(a,): pi[alpha[s]][n - 1][a] for a in range(AXES)})
                )
            term = PointwiseForm({(): 1.0})
            for f in factors:
                term = term.wedge(f)
            out = out + float(sign) * term
        return out

    return FormField(AXES, n - 1, func)


def pi_form(curv: CurvatureData, conn: FrameConnection) -> FormField:
    """Pi = sum_k c_k Phi_k; satisfies d Pi = Omega^nabla (transgression)."""
    n = conn.n
    coeffs = pi_coefficients(n)
    out = None
    for k, c in enumerate(coeffs):
        term = c * phi_k(curv, conn, k)
        out = term if out is None else out + term
    return out


def omega_pfaffian(curv: CurvatureData) -> FormField:
    """Omega^nabla = Pf(-Omega)/(2 pi)^{n/2} through the Berezin integral;
    identically zero for odd rank."""
    n = curv.conn.n
    norm = 1.0 / (2.0 * math.pi) ** (n / 2.0)

    def func(pts: ChartPoints) -> PointwiseForm:
        om = curv.omega(pts)
        table = pfaffian(_skew_symmetrized(om, n))
        return PointwiseForm({K: norm * _real_part(c) for K, c in table.items()})

    return FormField(AXES, n, func)


def _real_part(c):
    arr = np.asarray(c)
    if np.iscomplexobj(arr):
        imag = float(np.max(np.abs(arr.imag)))
        if imag > IMAG_TOL:
            raise ValidationError(f"characteristic form has imaginary residue {imag}")
        return arr.real
    return arr


def _skew_symmetrized(om, n: int) -> SkewMatrixValuedForm:
    """Project finite-difference curvature tables onto their skew part;
    the raw tables are skew only to rounding noise (~1e-11)."""
    entries = [[{} for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            keys = set(om[i][j]) | set(om[j][i])
            for K in keys:
                entries[i][j][K] = 0.5 * (om[i][j].get(K, 0.0) - om[j][i].get(K, 0.0))
    return SkewMatrixValuedForm(n, AXES, entries)


# ---------------------------------------------------------------------------
# Chern-Weil interpolation term


def chern_weil_upsilon0(D: FrameConnection, nabla: FrameConnection,
                        s_order: int = 8) -> FormField:
    """Upsilon_0 = int_0^1 B(exp(-Omega_s) . dD_s/ds) ds / (2 pi)^{n/2}
    for the family D_s = s nabla + (1-s) D.

    dD_s/ds = nabla - D embeds in A^{1,2}; exp(-Omega_s) contributes only
    fiber degrees up to n-2 against it, which vanishes below rank 4, so
    the curvature factor is skipped exactly for n = 2, 3."""
    n = D.n
    norm = 1.0 / (2.0 * math.pi) ** (n / 2.0)
    if n >= 4:
        raise ValidationError("upsilon0 with curvature factors needs rank < 4 here")
    s_nodes, s_w = gauss_legendre(0.0, 1.0, s_order)

    def func(pts: ChartPoints) -> PointwiseForm:
        pa = D.pi(pts)
        pb = nabla.pi(pts)
        diff = BigradedElement.zero(n, AXES)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for a in range(AXES):
                    diff.add_term((a,), (i, j), 0.5 * (pb[i][j][a] - pa[i][j][a]))
        table = berezin(diff)
        # the integrand is s-independent once the curvature factor dies
        weight = float(np.sum(s_w))
        return PointwiseForm({K: norm * weight * _real_part(c) for K, c in table.items()})

    return FormField(AXES, n - 1, func)


def transgression_check(curv: CurvatureData, conn: FrameConnection,
                        pts: ChartPoints) -> float:
    """Pointwise residual of d Pi - Omega^nabla over the batch."""
    dpi = pi_form(curv, conn).d()(pts)
    return (dpi - omega_pfaffian(curv)(pts)).max_abs()


def frak_e(upsilon0: FormField, upsilon1: FormField, upsilon2: FormField | None,
           dlogv: FormField, h: float = 1e-4) -> FormField:
    """FrakE = -d Upsilon_0 - d log V ^ Upsilon_1 - d Upsilon_2."""
    out = (-1.0) * upsilon0.d(h=h) - dlogv.wedge(upsilon1)
    if upsilon2 is not None:
        out = out - upsilon2.d(h=h)
    return out


# ---------------------------------------------------------------------------
# Mathai-Quillen family


@dataclass
class MathaiQuillenState:
    t: float
    Theta_t: BigradedElement
    U_t: dict


def mathai_quillen_Ut(t: float, nabla_ell: BigradedElement,
                      Omega: BigradedElement) -> MathaiQuillenState:
    """U_t = B(exp(-(t^2/2 + i t nabla_ell + Omega))); U_0 = Pf(-Omega)."""
    n = nabla_ell.n
    theta = (
        (0.5 * t * t) * BigradedElement.unit(n, nabla_ell.form_dim)
        + (1j * t) * nabla_ell
        + Omega
    )
    U = berezin(exp_truncated((-1.0) * theta))
    return MathaiQuillenState(t, theta, U)


# ---------------------------------------------------------------------------
# bundled pipeline forms


@dataclass
class TransgressionBundle:
    """The named forms of the transgression pipeline at fixed rank."""

    n: int
    Phi: list
    Pi: FormField
    Upsilon0: FormField
    Upsilon1: FormField
    Upsilon2: FormField | None
    FrakE: FormField
    OmegaD: FormField
    OmegaNabla: FormField
    epsilon_n: complex


class TransgressionForms:
    """Builds every pipeline form for one (metric, D, nabla) triple and
    keeps the shared volume functions cached."""

    def __init__(self, metric: FinslerMetric, D: FrameConnection,
                 nabla: FrameConnection, order_fiber: int = 64,
                 h: float = 1e-4, richardson: bool = True,
                 dv_step: float = 1e-3):
        self.metric = metric
        self.D = D
        self.nabla = nabla
        self.n = nabla.n
        self.order_fiber = order_fiber
        self.h = h
        self.richardson = richardson
        self.dv_step = dv_step
        self.token = next(_FORMS_SEQ)
        self.curv_D = curvature(D, h=h, richardson=richardson)
        self.curv_nabla = curvature(nabla, h=h, richardson=richardson)
        self._th_nodes, self._th_weights = gauss_legendre(0.0, 2.0 * math.pi, order_fiber)

    # --- fiber volume -------------------------------------------------------
    def volume(self, pts: ChartPoints) -> np.ndarray:
        key = ("V", self.token)
        hit = pts.cache.get(key)
        if hit is None:
            hit = self._volume_raw(pts.chart, pts.coords[0], pts.coords[1])
            pts.cache[key] = hit
        return hit

    def _volume_raw(self, chart: str, x1, x2) -> np.ndarray:
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))[:, None]
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))[:, None]
        th = self._th_nodes[None, :]
        rho = fiber_volume_form(self.metric, [x1, x2], th, chart)
        rho = np.broadcast_to(rho, (x1.shape[0], self._th_nodes.size))
        return rho @ self._th_weights

    def dlog_volume(self, pts: ChartPoints):
        """(d log V / dx1, d log V / dx2) by central differences with
        Richardson at step dv_step."""
        key = ("dlogV", self.token)
        hit = pts.cache.get(key)
        if hit is None:
            x1 = np.asarray(pts.coords[0], dtype=float)
            x2 = np.asarray(pts.coords[1], dtype=float)
            h = self.dv_step
            out = []
            for axis in range(2):
                def vol_at(delta):
                    if axis == 0:
                        return self._volume_raw(pts.chart, x1 + delta, x2)
                    return self._volume_raw(pts.chart, x1, x2 + delta)

                d1 = (vol_at(+h) - vol_at(-h)) / (2.0 * h)
                d2 = (vol_at(+0.5 * h) - vol_at(-0.5 * h)) / h
                out.append((4.0 * d2 - d1) / 3.0)
            V = self.volume(pts)
            hit = (out[0] / V, out[1] / V)
            pts.cache[key] = hit
        return hit

    def dlogv_field(self) -> FormField:
        def func(pts: ChartPoints) -> PointwiseForm:
            d1, d2 = self.dlog_volume(pts)
            return PointwiseForm({(0,): d1, (1,): d2})

        return FormField(AXES, 1, func)

    # --- named forms ----------------------------------------------------------
    def phi(self, k: int) -> FormField:
        return phi_k(self.curv_nabla, self.nabla, k)

    def pi(self) -> FormField:
        return pi_form(self.curv_nabla, self.nabla)

    def upsilon1(self) -> FormField:
        c = upsilon1_coefficient(self.n)
        return c * self.phi(0)

    def upsilon2(self) -> FormField | None:
        coeffs = pi_coefficients(self.n)
        if len(coeffs) == 1:
            return None  # Pi = Upsilon1 exactly below rank 4
        out = None
        for k in range(1, len(coeffs)):
            term = coeffs[k] * self.phi(k)
            out = term if out is None else out + term
        return out

    def upsilon0(self) -> FormField:
        return chern_weil_upsilon0(self.D, self.nabla)

    def omega_nabla(self) -> FormField:
        return omega_pfaffian(self.curv_nabla)

    def omega_D(self) -> FormField:
        return omega_pfaffian(self.curv_D)

    def frak_e_field(self) -> FormField:
        return frak_e(self.upsilon0(), self.upsilon1(), self.upsilon2(),
                      self.dlogv_field(), h=self.h)

    def bundle(self) -> TransgressionBundle:
        return TransgressionBundle(
            n=self.n,
            Phi=[self.phi(k) for k in range(len(pi_coefficients(self.n)))],
            Pi=self.pi(),
            Upsilon0=self.upsilon0(),
            Upsilon1=self.upsilon1(),
            Upsilon2=self.upsilon2(),
            FrakE=self.frak_e_field(),
            OmegaD=self.omega_D(),
            OmegaNabla=self.omega_nabla(),
            epsilon_n=epsilon_constant(self.n),
        )

    # --- algebra-level elements at sample points -------------------------------
    def nabla_ell_element(self, pts: ChartPoints) -> BigradedElement:
        """nabla l = varpi_n^j (x) e_j as an A^{1,1} element (batched)."""
        pi = self.nabla.pi(pts)
        n = self.n
        out = BigradedElement.zero(n, AXES)
        for j in range(n):
            for a in range(AXES):
                out.add_term((a,), (j,), pi[n - 1][j][a] + 0.0j)
        return out

    def omega_element(self, pts: ChartPoints) -> BigradedElement:
        """Curvature of nabla as an A^{2,2} element (batched)."""
        om = self.curv_nabla.omega(pts)
        n = self.n
        out = BigradedElement.zero(n, AXES)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for K, c in om[i][j].items():
                    out.add_term(K, (i, j), 0.5 * c + 0.0j)
        return out

    def mathai_quillen_field(self, t: float) -> FormField:
        """U_t as a closed n-form field on the bundle chart."""

        def func(pts: ChartPoints) -> PointwiseForm:
            state = mathai_quillen_Ut(t, self.nabla_ell_element(pts),
                                      self.omega_element(pts))
            return PointwiseForm({K: _real_part(c) for K, c in state.U_t.items()})

        return FormField(AXES, self.n, func)

    def mathai_quillen_primitive_field(self, t: float) -> FormField:
        """B(l . exp(-Theta_t)): the (n-1)-form in the t-transgression
        d U_t / dt = -i d [B(l . exp(-Theta_t))]."""

        def func(pts: ChartPoints) -> PointwiseForm:
            n = self.n
            theta = (
                (0.5 * t * t) * BigradedElement.unit(n, AXES)
                + (1j * t) * self.nabla_ell_element(pts)
                + self.omega_element(pts)
            )
            ell = BigradedElement(n, AXES, {((), (n - 1,)): 1.0 + 0.0j})
            table = berezin(ell * exp_truncated((-1.0) * theta))
            return PointwiseForm(dict(table))

        return FormField(AXES, self.n - 1, func)

    # --- fused GBC integrand ---------------------------------------------------
    def gbc_integrand(self) -> FormField:
        """(Omega^D + FrakE) / V as one fused 2-form field.

        One finite-difference sweep serves both the curvature of D and
        d Upsilon_0: every displaced batch evaluates both connections
        once through the shared tensor cache."""
        n = self.n
        norm = 1.0 / (2.0 * math.pi) ** (n / 2.0)
        u1c = upsilon1_coefficient(n)

        def payload(q: ChartPoints) -> dict:
            pa = self.D.pi(q)
            pb = self.nabla.pi(q)
            out = {}
            for i in range(n):
                for j in range(n):
                    for a in range(AXES):
                        out[("piD", i, j, a)] = pa[i][j][a]
            for a in range(AXES):
                out[("u0", a)] = norm * (pb[0][1][a] - pa[0][1][a])
            return out

        def func(pts: ChartPoints) -> PointwiseForm:
            center = payload(pts)
            partials = _stencil_partials(payload, pts, self.h, self.richardson)
            # curvature of D and the pfaffian form
            om_entries = [[{} for _ in range(n)] for _ in range(n)]
            for i in range(n):
                for j in range(n):
                    for a in range(AXES):
                        for b in range(a + 1, AXES):
                            wedge = sum(
                                center[("piD", i, k, a)] * center[("piD", k, j, b)]
                                - center[("piD", i, k, b)] * center[("piD", k, j, a)]
                                for k in range(n)
                            )
                            om_entries[i][j][(a, b)] = (
                                partials[a][("piD", i, j, b)]
                                - partials[b][("piD", i, j, a)]
                                - wedge
                            )
            pf = pfaffian(_skew_symmetrized(om_entries, n))
            omega_D = PointwiseForm({K: norm * _real_part(c) for K, c in pf.items()})
            # d Upsilon0
            d_u0 = PointwiseForm()
            for a in range(AXES):
                for b in range(a + 1, AXES):
                    d_u0.add_term(
                        (a, b), partials[a][("u0", b)] - partials[b][("u0", a)]
                    )
            # d log V ^ Upsilon1
            pb = self.nabla.pi(pts)
            ups1 = PointwiseForm({(a,): u1c * pb[0][1][a] for a in range(AXES)})
            d1, d2 = self.dlog_volume(pts)
            dlogv = PointwiseForm({(0,): d1, (1,): d2})
            frak = (-1.0) * d_u0 - dlogv.wedge(ups1)
            V = self.volume(pts)
            return (1.0 / V) * (omega_D + frak)

        return FormField(AXES, 2, func)


def _stencil_partials(payload, pts: ChartPoints, h: float, richardson: bool):
    """partials[axis][key]: Richardson central differences of every payload
    entry, sharing the displaced batches across all entries."""
    out = []
    for axis in range(AXES):
        pp = payload(pts.shifted(axis, +h))
        pm = payload(pts.shifted(axis, -h))
        d1 = {k: (pp[k] - pm[k]) / (2.0 * h) for k in pp}
        if richardson:
            pp2 = payload(pts.shifted(axis, +0.5 * h))
            pm2 = payload(pts.shifted(axis, -0.5 * h))
            d1 = {
                k: (4.0 * ((pp2[k] - pm2[k]) / h) - d1[k]) / 3.0
                for k in d1
            }
        out.append(d1)
    return out
