"""Finsler geometry chain at a tangent-bundle sample.

Everything is computed numerically from a single truncated-Taylor (jet)
expansion of the Lagrangian L(x, xdot) in the 2n chart coordinates:

    L -> g = (1/2) vertical Hessian        (the L-metric)
      -> spray G^a = (1/4) g^{aq} (xdot^m d_m ddot_q L - d_q L)
      -> nonlinear connection N^a_b = ddot_b G^a
      -> horizontal derivative  delta_a = d_a - N^b_a ddot_b
      -> connection Gamma^a_bc = (1/2) g^{aq}(delta_b g_cq + delta_c g_bq
                                              - delta_q g_bc)
      -> hh-curvature R^c_adb = delta_d Gamma^c_ab - delta_b Gamma^c_ad
                                + Gamma^c_ds Gamma^s_ab
                                - Gamma^c_bs Gamma^s_ad
      -> Ricci R_ab = R^m_amb and its skew part.

Horizontal derivatives of tensors are taken by keeping the tensor jet-valued
and combining its x-derivatives with N times its xdot-derivatives, so no
symbolic differentiation is needed anywhere.

All operations are pure functions of (definition, sample).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as exprmod
from .defs import DslLagrangian, LagrangianDef, TangentSample
from .expr import ExprDomainError
from .jets import DomainError, Jet, powx, seed

TOL_DEGENERATE = 1e-10
TOL_NULL = 1e-10

# Sign resolving the contraction slot of the skew-Ricci identity
# (R_ab - R_ba) = sign * R^c_{d a b} xdot^d C_c with R stored as R[c,a,d,b];
# fixed once by requiring the identity to hold numerically on non-quadratic
# Lagrangians (it is a pure index-convention choice).
SKEW_CONTRACTION_SIGN = -1.0


class DegenerateMetric(Exception):
    """The L-metric is singular at the sample: the point is outside A."""


@dataclass(frozen=True)
class MetricValue:
    g: np.ndarray
    g_inv: np.ndarray
    det: float
    signature: tuple[int, int, int]  # (n_plus, n_minus, n_zero)


@dataclass(frozen=True)
class ConnectionValue:
    spray: np.ndarray  # G^a
    nonlinear: np.ndarray  # N^a_b
    chern_rund: np.ndarray  # Gamma^a_bc, symmetric in bc
    cartan_trace: np.ndarray  # C_a


@dataclass(frozen=True)
class CurvatureValue:
    hh_riemann: np.ndarray  # R[c, a, d, b]
    ricci: np.ndarray  # R_ab = R^m_amb
    skew_ricci: np.ndarray  # (R_ab - R_ba)/2


@dataclass(frozen=True)
class AdmissibilityVerdict:
    in_A: bool
    L_value: Optional[float]
    in_N: bool
    in_A0: bool
    in_T: bool
    failure_reason: Optional[str] = None


# -- jet-matrix helpers ------------------------------------------------------


def matmul_jets(A, B):
    n = len(A)
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            acc = A[i][0] * B[0][j]
            for k in range(1, n):
                acc = acc + A[i][k] * B[k][j]
            out[i, j] = acc
    return out


def invert_jet_matrix(g) -> np.ndarray:
    """Inverse of a jet-valued matrix via Newton iteration in the truncated
    algebra, started from the numeric inverse of the value part."""
    n = len(g)
    space = g[0][0].space
    order = min(g[i][j].order for i in range(n) for j in range(n))
    values = np.array([[g[i][j].value for j in range(n)] for i in range(n)])
    try:
        vinv = np.linalg.inv(values)
    except np.linalg.LinAlgError as err:
        raise DegenerateMetric(str(err)) from err
    X = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            X[i, j] = space.constant(vinv[i, j], order)
    iters, errdeg = 0, 1
    while errdeg <= order:
        iters += 1
        errdeg *= 2
    for _ in range(iters):
        GX = matmul_jets(g, X)
        for i in range(n):
            GX[i, i] = 2.0 - GX[i, i]
            for j in range(n):
                if i != j:
                    GX[i, j] = -GX[i, j]
        X = matmul_jets(X, GX)
    return X


def det_jet_matrix(g):
    """Determinant of a jet-valued matrix by cofactor expansion."""
    n = len(g)
    if n == 1:
        return g[0][0]
    total = None
    for j in range(n):
        minor = [
            [g[i][k] for k in range(n) if k != j] for i in range(1, n)
        ]
        term = g[0][j] * det_jet_matrix(minor)
        if j % 2 == 1:
            term = -term
        total = term if total is None else total + term
    return total


# -- Lagrangian evaluation -----------------------------------------------------


def eval_L_jets(lag: LagrangianDef, coord_jets: Sequence[Jet]) -> Jet:
    """L as a jet, given the 2n seeded coordinate jets (x then xdot)."""
    if isinstance(lag, DslLagrangian):
        return exprmod.eval(lag.ast, coord_jets, lag.params)
    n = lag.dim
    xj = coord_jets[:n]
    vj = coord_jets[n:]
    aval = None
    for a in range(n):
        for b in range(a, n):
            entry = exprmod.eval(lag.alpha[a][b], xj, lag.params)
            if isinstance(entry, (int, float)) and entry == 0.0:
                continue
            weight = 1.0 if a == b else 2.0
            term = (weight * entry) * vj[a] * vj[b]
            aval = term if aval is None else aval + term
    if aval is None:
        raise DegenerateMetric("alpha is identically zero")
    bval = None
    for a in range(n):
        entry = exprmod.eval(lag.beta[a], xj, lag.params)
        if isinstance(entry, (int, float)) and entry == 0.0:
            continue
        term = entry * vj[a]
        bval = term if bval is None else bval + term
    if bval is None:
        bval = xj[0].space.constant(0.0)
    s = bval * bval / aval
    return aval * powx(s, -lag.p) * powx(lag.c + lag.m * s, lag.p + 1.0)


def eval_L(lag: LagrangianDef, sample: TangentSample, order: int = 4) -> Jet:
    """Jet of L at the sample with all mixed (x, xdot) partials to `order`."""
    n = sample.dim
    order = max(1, order)
    cjets = seed(
        list(sample.x) + list(sample.xdot), range(2 * n), order
    )
    return eval_L_jets(lag, cjets)


# -- the chained evaluation ------------------------------------------------------


class _Eval:
    """Lazy evaluation of the geometry chain at one sample.

    Jet validity bookkeeping (seeded order k): g has validity k-2, the spray
    k-2, N and Gamma k-3.  Values need k=3, curvature needs k=4.
    """

    def __init__(self, lag: LagrangianDef, sample: TangentSample, order: int):
        self.lag = lag
        self.sample = sample
        self.order = order
        self.n = sample.dim
        self.cjets = seed(
            list(sample.x) + list(sample.xdot), range(2 * self.n), order
        )
        self.space = self.cjets[0].space
        self.L = eval_L_jets(lag, self.cjets)

    # index helpers: variable a is x^a, variable n+a is xdot^a
    def dx(self, j: Jet, a: int) -> Jet:
        return j.diff(a)

    def dv(self, j: Jet, a: int) -> Jet:
        return j.diff(self.n + a)

    @cached_property
    def g_jets(self) -> np.ndarray:
        n = self.n
        out = np.empty((n, n), dtype=object)
        for a in range(n):
            da = self.dv(self.L, a)
            for b in range(a, n):
                out[a, b] = 0.5 * self.dv(da, b)
                out[b, a] = out[a, b]
        return out

    @cached_property
    def g_values(self) -> np.ndarray:
        n = self.n
        raw = np.array(
            [[self.g_jets[a, b].value for b in range(n)] for a in range(n)]
        )
        return 0.5 * (raw + raw.T)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.g_values)

    def signature(self, tol_degenerate: float = TOL_DEGENERATE) -> tuple[int, int, int]:
        eig = self.eigenvalues
        scale = float(np.max(np.abs(eig)))
        if scale == 0.0:
            return (0, 0, self.n)
        thr = tol_degenerate * scale
        n_plus = int(np.sum(eig > thr))
        n_minus = int(np.sum(eig < -thr))
        return (n_plus, n_minus, self.n - n_plus - n_minus)

    def require_nondegenerate(self, tol_degenerate: float = TOL_DEGENERATE):
        if self.signature(tol_degenerate)[2] > 0:
            raise DegenerateMetric(
                f"L-metric is singular at the sample (eigenvalues {self.eigenvalues})"
            )

    @cached_property
    def g_inv_values(self) -> np.ndarray:
        self.require_nondegenerate()
        return np.linalg.inv(self.g_values)

    @cached_property
    def g_inv_jets(self) -> np.ndarray:
        self.require_nondegenerate()
        return invert_jet_matrix(self.g_jets)

    @cached_property
    def spray_jets(self) -> np.ndarray:
        n = self.n
        bracket = np.empty(n, dtype=object)
        for q in range(n):
            acc = None
            dLq = self.dv(self.L, q)
            for m in range(n):
                term = self.cjets[n + m] * self.dx(dLq, m)
                acc = term if acc is None else acc + term
            bracket[q] = acc - self.dx(self.L, q)
        ginv = self.g_inv_jets
        out = np.empty(n, dtype=object)
        for a in range(n):
            acc = ginv[a, 0] * bracket[0]
            for q in range(1, n):
                acc = acc + ginv[a, q] * bracket[q]
            out[a] = 0.25 * acc
        return out

    @cached_property
    def spray_values(self) -> np.ndarray:
        return np.array([j.value for j in self.spray_jets])

    @cached_property
    def nonlinear_jets(self) -> np.ndarray:
        n = self.n
        out = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                out[a, b] = self.dv(self.spray_jets[a], b)
        return out

    @cached_property
    def nonlinear_values(self) -> np.ndarray:
        n = self.n
        return np.array(
            [[self.nonlinear_jets[a, b].value for b in range(n)] for a in range(n)]
        )

    def delta_of(self, j: Jet) -> list[Jet]:
        """Horizontal derivative of a jet-valued scalar, one jet per index."""
        n = self.n
        out = []
        for a in range(n):
            acc = self.dx(j, a)
            for b in range(n):
                acc = acc - self.nonlinear_jets[b, a] * self.dv(j, b)
            out.append(acc)
        return out

    @cached_property
    def gamma_jets(self) -> np.ndarray:
        n = self.n
        dg = np.empty((n, n, n), dtype=object)  # dg[b, c, q] = delta_b g_cq
        for c in range(n):
            for q in range(c, n):
                cols = self.delta_of(self.g_jets[c, q])
                for b in range(n):
                    dg[b, c, q] = cols[b]
                    dg[b, q, c] = cols[b]
        ginv = self.g_inv_jets
        out = np.empty((n, n, n), dtype=object)
        for b in range(n):
            for c in range(b, n):
                for a in range(n):
                    acc = None
                    for q in range(n):
                        term = ginv[a, q] * (dg[b, c, q] + dg[c, b, q] - dg[q, b, c])
                        acc = term if acc is None else acc + term
                    out[a, b, c] = 0.5 * acc
                    out[a, c, b] = out[a, b, c]
        return out

    @cached_property
    def gamma_values(self) -> np.ndarray:
        n = self.n
        return np.array(
            [
                [[self.gamma_jets[a, b, c].value for c in range(n)] for b in range(n)]
                for a in range(n)
            ]
        )

    @cached_property
    def gamma_x_derivatives(self) -> np.ndarray:
        """dGamma[m, a, b, c] = d Gamma^a_bc / d x^m at fixed xdot."""
        n = self.n
        out = np.empty((n, n, n, n))
        for a in range(n):
            for b in range(n):
                for c in range(b, n):
                    for m in range(n):
                        v = self.gamma_jets[a, b, c].first(m)
                        out[m, a, b, c] = v
                        out[m, a, c, b] = v
        return out

    @cached_property
    def cartan_values(self) -> np.ndarray:
        n = self.n
        out = np.empty((n, n, n))
        for a in range(n):
            da = self.dv(self.L, a)
            for b in range(a, n):
                dab = self.dv(da, b)
                for c in range(b, n):
                    v = 0.25 * self.dv(dab, c).value
                    for idx in {
                        (a, b, c), (a, c, b), (b, a, c),
                        (b, c, a), (c, a, b), (c, b, a),
                    }:
                        out[idx] = v
        return out

    @cached_property
    def cartan_trace(self) -> np.ndarray:
        return np.einsum("mn,amn->a", self.g_inv_values, self.cartan_values)

    @cached_property
    def curvature(self) -> CurvatureValue:
        n = self.n
        gamma = self.gamma_values
        # delta_d Gamma^c_ab = d_d Gamma - N^e_d ddot_e Gamma
        dgam_x = self.gamma_x_derivatives  # [m, c, a, b]
        dgam_v = np.empty((n, n, n, n))
        for c in range(n):
            for a in range(n):
                for b in range(a, n):
                    for e in range(n):
                        v = self.gamma_jets[c, a, b].first(n + e)
                        dgam_v[e, c, a, b] = v
                        dgam_v[e, c, b, a] = v
        delta_gam = dgam_x - np.einsum("ed,ecab->dcab", self.nonlinear_values, dgam_v)
        riem = np.empty((n, n, n, n))
        quad = np.einsum("cds,sab->cadb", gamma, gamma) - np.einsum(
            "cbs,sad->cadb", gamma, gamma
        )
        for c in range(n):
            for a in range(n):
                for d in range(n):
                    for b in range(n):
                        riem[c, a, d, b] = (
                            delta_gam[d, c, a, b] - delta_gam[b, c, a, d]
                        )
        riem += quad
        ricci = np.einsum("mamb->ab", riem)
        skew = 0.5 * (ricci - ricci.T)
        return CurvatureValue(hh_riemann=riem, ricci=ricci, skew_ricci=skew)


# -- public operations ---------------------------------------------------------


def metric(
    lag: LagrangianDef,
    sample: TangentSample,
    tol_degenerate: float = TOL_DEGENERATE,
) -> MetricValue:
    """The L-metric (half the vertical Hessian) with inverse and signature."""
    ev = _Eval(lag, sample, 2)
    sig = ev.signature(tol_degenerate)
    if sig[2] > 0:
        raise DegenerateMetric(
            f"L-metric is singular at the sample (eigenvalues {ev.eigenvalues})"
        )
    return MetricValue(
        g=ev.g_values,
        g_inv=np.linalg.inv(ev.g_values),
        det=float(np.linalg.det(ev.g_values)),
        signature=sig,
    )


def spray(lag: LagrangianDef, sample: TangentSample) -> np.ndarray:
    return _Eval(lag, sample, 2).spray_values


def nonlinear_connection(lag: LagrangianDef, sample: TangentSample) -> np.ndarray:
    return _Eval(lag, sample, 3).nonlinear_values


def chern_rund(lag: LagrangianDef, sample: TangentSample) -> np.ndarray:
    return _Eval(lag, sample, 3).gamma_values


def connection(lag: LagrangianDef, sample: TangentSample) -> ConnectionValue:
    ev = _Eval(lag, sample, 3)
    return ConnectionValue(
        spray=ev.spray_values,
        nonlinear=ev.nonlinear_values,
        chern_rund=ev.gamma_values,
        cartan_trace=ev.cartan_trace,
    )


def hh_curvature(lag: LagrangianDef, sample: TangentSample) -> CurvatureValue:
    return _Eval(lag, sample, 4).curvature


def horizontal_derivative(
    lag: LagrangianDef,
    sample: TangentSample,
    scalar_field: Callable[[Sequence[Jet]], Jet],
) -> np.ndarray:
    """delta_a f for a jet-valued scalar field on TM."""
    ev = _Eval(lag, sample, 3)
    f = scalar_field(ev.cjets)
    n = ev.n
    N = ev.nonlinear_values
    out = np.empty(n)
    for a in range(n):
        acc = f.first(a)
        for b in range(n):
            acc -= N[b, a] * f.first(n + b)
        out[a] = acc
    return out


def vertical_derivative(
    lag: LagrangianDef,
    sample: TangentSample,
    scalar_field: Callable[[Sequence[Jet]], Jet],
) -> np.ndarray:
    """ddot_a f, the fiber derivative of a jet-valued scalar field."""
    ev = _Eval(lag, sample, 3)
    f = scalar_field(ev.cjets)
    return np.array([f.first(ev.n + a) for a in range(ev.n)])


def ricci_skew_from_curvature(
    riem: np.ndarray, xdot: np.ndarray, covector: np.ndarray
) -> np.ndarray:
    """The curvature route of the skew identity: R_ab - R_ba as the
    contraction R^c_{d a b} xdot^d C_c (index placement fixed numerically)."""
    return SKEW_CONTRACTION_SIGN * np.einsum("cdab,d,c->ab", riem, xdot, covector)


def commutator_check(
    lag: LagrangianDef,
    sample: TangentSample,
    scalar_field: Callable[[Sequence[Jet]], Jet],
) -> float:
    """Residual of [delta_a, delta_b] f = R^c_{dab} xdot^d ddot_c f."""
    ev = _Eval(lag, sample, 4)
    n = ev.n
    f = scalar_field(ev.cjets)
    Nv = ev.nonlinear_values
    dd = np.empty((n, n))
    for b in range(n):
        fb = ev.dx(f, b)
        for e in range(n):
            fb = fb - ev.nonlinear_jets[e, b] * ev.dv(f, e)
        for a in range(n):
            acc = fb.diff(a).value
            for c in range(n):
                acc -= Nv[c, a] * fb.diff(n + c).value
            dd[a, b] = acc
    lhs = dd - dd.T
    dvf = np.array([f.first(n + c) for c in range(n)])
    rhs = ricci_skew_from_curvature(ev.curvature.hh_riemann, sample.xdot, dvf)
    return float(np.max(np.abs(lhs - rhs)))


def probe_admissibility(
    lag: LagrangianDef,
    sample: TangentSample,
    convention: str = "+---",
    tol_degenerate: float = TOL_DEGENERATE,
    tol_null: float = TOL_NULL,
) -> AdmissibilityVerdict:
    """Membership in the sets A (smooth, nondegenerate), N (null), A0, T."""
    if convention not in ("+---", "-+++"):
        raise ValueError(f"unknown signature convention {convention!r}")
    try:
        ev = _Eval(lag, sample, 2)
    except (DomainError, ExprDomainError) as err:
        reason = getattr(err, "reason", None) or str(err)
        return AdmissibilityVerdict(
            in_A=False, L_value=None, in_N=False, in_A0=False, in_T=False,
            failure_reason=reason,
        )
    L_value = ev.L.value
    if not math.isfinite(L_value):
        return AdmissibilityVerdict(
            in_A=False, L_value=None, in_N=False, in_A0=False, in_T=False,
            failure_reason="non-finite",
        )
    sig = ev.signature(tol_degenerate)
    in_A = sig[2] == 0
    scale = float(
        np.abs(ev.g_values).dot(np.abs(sample.xdot)).dot(np.abs(sample.xdot))
    )
    in_N = abs(L_value) <= tol_null * max(scale, 1e-300)
    in_A0 = in_A and not in_N
    n = sample.dim
    if convention == "+---":
        lorentzian = sig == (1, n - 1, 0)
        positive = L_value > 0.0
    else:
        lorentzian = sig == (n - 1, 1, 0)
        positive = L_value < 0.0
    in_T = in_A0 and positive and lorentzian
    reason = None if in_A else "degenerate-metric"
    return AdmissibilityVerdict(
        in_A=in_A, L_value=L_value, in_N=in_N, in_A0=in_A0, in_T=in_T,
        failure_reason=reason,
    )


def log_sqrt_det_metric_field(lag: LagrangianDef) -> Callable[[Sequence[Jet]], Jet]:
    """The scalar field ln sqrt|det g| as a jet-valued function on TM."""

    def field(coord_jets: Sequence[Jet]) -> Jet:
        n = len(coord_jets) // 2
        L = eval_L_jets(lag, coord_jets)
        g = [[None] * n for _ in range(n)]
        for a in range(n):
            da = L.diff(n + a)
            for b in range(a, n):
                g[a][b] = 0.5 * da.diff(n + b)
                g[b][a] = g[a][b]
        return 0.5 * abs(det_jet_matrix(g)).ln()

    return field


# -- expression-metric helpers (pseudo-Riemannian reference data) -------------


def eval_metric_exprs(g_exprs, coords, params=None) -> np.ndarray:
    """Evaluate an expression matrix at scalar-like coordinates."""
    n = len(g_exprs)
    out = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            out[a, b] = exprmod.eval(g_exprs[a][b], coords, params)
    return out


def christoffel_jets(g_exprs, x_jets, params=None) -> np.ndarray:
    """Christoffel symbols of an expression metric over seeded base jets."""
    n = len(x_jets)
    space = x_jets[0].space
    g = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            v = exprmod.eval(g_exprs[a][b], x_jets, params)
            g[a, b] = v if isinstance(v, Jet) else space.constant(float(v))
    ginv = invert_jet_matrix(g)
    dg = np.empty((n, n, n), dtype=object)  # dg[m, a, b] = d_m g_ab
    for a in range(n):
        for b in range(n):
            for m in range(n):
                dg[m, a, b] = g[a, b].diff(m)
    gamma = np.empty((n, n, n), dtype=object)
    for b in range(n):
        for c in range(b, n):
            for a in range(n):
                acc = None
                for s in range(n):
                    term = ginv[a, s] * (dg[b, c, s] + dg[c, b, s] - dg[s, b, c])
                    acc = term if acc is None else acc + term
                gamma[a, b, c] = 0.5 * acc
                gamma[a, c, b] = gamma[a, b, c]
    return gamma


def christoffel_values(g_exprs, x: np.ndarray, params=None) -> np.ndarray:
    xj = seed(list(x), range(len(x)), 1)
    gamma = christoffel_jets(g_exprs, xj, params)
    n = len(x)
    return np.array(
        [[[gamma[a, b, c].value for c in range(n)] for b in range(n)] for a in range(n)]
    )
