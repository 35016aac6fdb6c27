"""Berwald detection, the induced affine connection, and metrizability tests.

A geometry is Berwald when the connection coefficients are independent of the
fiber coordinate; the test samples directions inside the admissible cone and
measures the spread of the coefficients.  On a Berwald verdict the extracted
x-dependent connection has an affine Ricci tensor whose skew part is the
metrizability obstruction: a nonzero skew part proves no pseudo-Riemannian
metric has this connection as its Levi-Civita connection.

Connection fields are callables over base coordinates that also accept
first-order jets, so the affine Ricci tensor is assembled from exact
x-derivatives rather than finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import geometry
from .defs import LagrangianDef, TangentSample
from .geometry import DegenerateMetric, _Eval
from .jets import Jet, seed

TOL_BERWALD = 1e-7
TOL_SYM = 1e-7
DEFAULT_DIRECTIONS = 16
DEFAULT_SPREAD = 0.25
MAX_ATTEMPTS = 200


class NotBerwald(RuntimeError):
    """Obstruction diagnostics require a Berwald verdict first."""


class NoAdmissibleDirections(RuntimeError):
    """Direction sampling found fewer than two admissible fiber vectors."""


@dataclass(frozen=True)
class BerwaldVerdict:
    is_berwald: bool
    max_gamma_deviation: float
    affine_connection: np.ndarray  # direction-averaged Gamma^a_bc
    directions_tested: int


@dataclass(frozen=True)
class ObstructionReport:
    ricci: np.ndarray
    skew: np.ndarray
    skew_max_abs: float
    metrizability_necessary_condition_met: bool
    phi_constancy_residual: float


@dataclass(frozen=True)
class NonMetricityReport:
    reference_metric: tuple
    D: np.ndarray  # Gamma - christoffel(g_ref)
    Q: np.ndarray  # Q_abc = nabla_a g_bc
    Q_norm: float


# -- direction sampling --------------------------------------------------------


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def sample_admissible_directions(
    lag: LagrangianDef,
    x: np.ndarray,
    seed_direction: np.ndarray,
    count: int = DEFAULT_DIRECTIONS,
    rng=None,
    spread: float = DEFAULT_SPREAD,
    max_attempts: int = MAX_ATTEMPTS,
) -> list[np.ndarray]:
    """Admissible fiber vectors near `seed_direction`, rejection-sampled.

    The seed direction itself is kept first when admissible; draws landing
    outside the admissible set A are skipped and counted against the attempt
    budget.  Raises NoAdmissibleDirections with fewer than two hits.
    """
    x = np.asarray(x, dtype=float)
    seed_direction = np.asarray(seed_direction, dtype=float)
    gen = _as_rng(rng)
    n = len(x)
    scale = spread * max(1.0, float(np.max(np.abs(seed_direction))))
    dirs: list[np.ndarray] = []
    if geometry.probe_admissibility(lag, TangentSample(x, seed_direction)).in_A:
        dirs.append(seed_direction)
    attempts = 0
    while len(dirs) < count and attempts < max_attempts:
        attempts += 1
        cand = seed_direction + scale * gen.uniform(-1.0, 1.0, size=n)
        if not np.any(cand != 0.0):
            continue
        if geometry.probe_admissibility(lag, TangentSample(x, cand)).in_A:
            dirs.append(cand)
    if len(dirs) < 2:
        raise NoAdmissibleDirections(
            f"found {len(dirs)} admissible directions at x={x} "
            f"after {attempts} attempts"
        )
    return dirs


# -- Berwald detection ---------------------------------------------------------


def _verdict_from_gammas(gammas: Sequence[np.ndarray], tol: float) -> BerwaldVerdict:
    scale = max(1.0, max(float(np.max(np.abs(g))) for g in gammas))
    dev = max(
        (float(np.max(np.abs(g - gammas[0]))) for g in gammas[1:]), default=0.0
    )
    dev /= scale
    return BerwaldVerdict(
        is_berwald=dev < tol,
        max_gamma_deviation=dev,
        affine_connection=np.mean(gammas, axis=0),
        directions_tested=len(gammas),
    )


def detect_berwald(
    lag: LagrangianDef,
    x: np.ndarray,
    seed_direction: np.ndarray,
    count: int = DEFAULT_DIRECTIONS,
    rng=None,
    spread: float = DEFAULT_SPREAD,
    tol_berwald: float = TOL_BERWALD,
) -> BerwaldVerdict:
    """Sample directions at x and decide whether Gamma is fiber-independent."""
    dirs = sample_admissible_directions(lag, x, seed_direction, count, rng, spread)
    gammas = [geometry.chern_rund(lag, TangentSample(x, d)) for d in dirs]
    return _verdict_from_gammas(gammas, tol_berwald)


# -- affine connection fields ---------------------------------------------------


def compose_first_order(
    values: np.ndarray, partials: np.ndarray, x_jets: Sequence[Jet]
) -> np.ndarray:
    """Lift value + gradient data into first-order jets at the given point.

    `partials[m]` holds the derivative of `values` along coordinate m; the
    result is exact through first order for any incoming order-1 jets.
    """
    space = x_jets[0].space
    offsets = [xj - xj.value for xj in x_jets]
    flat_vals = np.asarray(values, dtype=float)
    out = np.empty(flat_vals.shape, dtype=object)
    for idx in np.ndindex(flat_vals.shape):
        acc = space.constant(flat_vals[idx])
        for m, off in enumerate(offsets):
            acc = acc + float(partials[m][idx]) * off
        out[idx] = acc
    return out


class BerwaldConnectionField:
    """The extracted affine connection as a function of the base point.

    Evaluation runs the full tangent-bundle pipeline over the sampled
    admissible directions and averages; the base coordinates are active jet
    variables of that pipeline, so exact x-derivatives come along for free
    and first-order jet arguments are supported.
    """

    def __init__(
        self,
        lag: LagrangianDef,
        seed_direction: np.ndarray,
        count: int = DEFAULT_DIRECTIONS,
        rng_seed=0,
        spread: float = DEFAULT_SPREAD,
    ):
        self.lag = lag
        self.seed_direction = np.asarray(seed_direction, dtype=float)
        self.count = count
        self.rng_seed = rng_seed
        self.spread = spread

    def gamma_stats(self, x: np.ndarray):
        """(mean Gamma, mean dGamma/dx, per-direction order-4 evaluations)."""
        dirs = sample_admissible_directions(
            self.lag, x, self.seed_direction, self.count,
            np.random.default_rng(self.rng_seed), self.spread,
        )
        evals = [_Eval(self.lag, TangentSample(x, d), 4) for d in dirs]
        gamma = np.mean([ev.gamma_values for ev in evals], axis=0)
        dgamma = np.mean([ev.gamma_x_derivatives for ev in evals], axis=0)
        return gamma, dgamma, evals

    def __call__(self, coords):
        if len(coords) and isinstance(coords[0], Jet):
            values = np.array([j.value for j in coords])
            gamma, dgamma, _ = self.gamma_stats(values)
            return compose_first_order(gamma, dgamma, coords)
        gamma, _, _ = self.gamma_stats(np.asarray(coords, dtype=float))
        return gamma


class ChristoffelField:
    """Levi-Civita connection of an expression metric, jet-callable."""

    def __init__(self, g_exprs, params=None):
        self.g_exprs = g_exprs
        self.params = params

    def __call__(self, coords):
        n = len(coords)
        if isinstance(coords[0], Jet):
            values = np.array([j.value for j in coords])
            inner = seed(list(values), range(n), 2)
            gj = geometry.christoffel_jets(self.g_exprs, inner, self.params)
            gamma = np.empty((n, n, n))
            dgamma = np.empty((n, n, n, n))
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        gamma[a, b, c] = gj[a, b, c].value
                        for m in range(n):
                            dgamma[m, a, b, c] = gj[a, b, c].first(m)
            return compose_first_order(gamma, dgamma, coords)
        return geometry.christoffel_values(self.g_exprs, np.asarray(coords), self.params)


# -- affine Ricci ---------------------------------------------------------------


def affine_ricci_from_values(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """R_ab = d_m Gamma^m_ab - d_b Gamma^m_am + Gamma^m_ms Gamma^s_ab
    - Gamma^m_bs Gamma^s_am, with dgamma[m] = d Gamma / d x^m."""
    term1 = np.einsum("mmab->ab", dgamma)
    term2 = np.einsum("bmam->ab", dgamma)
    term3 = np.einsum("mms,sab->ab", gamma, gamma)
    term4 = np.einsum("mbs,sam->ab", gamma, gamma)
    return term1 - term2 + term3 - term4


def ricci_affine(
    gamma_field: Callable, x: np.ndarray
) -> np.ndarray:
    """Affine Ricci tensor of an x-dependent connection field.

    The field is called on first-order jets seeded at x; its x-derivatives
    are read off the returned jets.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    xj = seed(list(x), range(n), 1)
    out = gamma_field(xj)
    gamma = np.empty((n, n, n))
    dgamma = np.empty((n, n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                entry = out[a, b, c]
                if isinstance(entry, Jet):
                    gamma[a, b, c] = entry.value
                    for m in range(n):
                        dgamma[m, a, b, c] = entry.first(m)
                else:
                    raise TypeError(
                        "gamma_field must return jets when called on jets"
                    )
    return affine_ricci_from_values(gamma, dgamma)


# -- the obstruction -------------------------------------------------------------


def obstruction(
    lag: LagrangianDef,
    x: np.ndarray,
    seed_direction: np.ndarray,
    count: int = DEFAULT_DIRECTIONS,
    rng_seed=0,
    spread: float = DEFAULT_SPREAD,
    tol_berwald: float = TOL_BERWALD,
    tol_sym: float = TOL_SYM,
) -> ObstructionReport:
    """Skew part of the affine Ricci tensor at x, plus the fiber-independence
    residual of the curvature-route skew (which must be direction-independent
    on Berwald geometries)."""
    x = np.asarray(x, dtype=float)
    field = BerwaldConnectionField(lag, seed_direction, count, rng_seed, spread)
    gamma, dgamma, evals = field.gamma_stats(x)
    verdict = _verdict_from_gammas([ev.gamma_values for ev in evals], tol_berwald)
    if not verdict.is_berwald:
        raise NotBerwald(
            f"connection varies over directions (deviation "
            f"{verdict.max_gamma_deviation:.3e} >= {tol_berwald:.1e})"
        )
    ricci = affine_ricci_from_values(gamma, dgamma)
    skew = 0.5 * (ricci - ricci.T)
    skew_max = float(np.max(np.abs(skew)))
    phi_res = 0.0
    for ev in evals:
        curv_route = geometry.ricci_skew_from_curvature(
            ev.curvature.hh_riemann, ev.sample.xdot, ev.cartan_trace
        )
        phi_res = max(phi_res, float(np.max(np.abs(curv_route - 2.0 * skew))))
    ricci_scale = max(1.0, float(np.max(np.abs(ricci))))
    return ObstructionReport(
        ricci=ricci,
        skew=skew,
        skew_max_abs=skew_max,
        metrizability_necessary_condition_met=skew_max < tol_sym * ricci_scale,
        phi_constancy_residual=phi_res,
    )


# -- non-metricity decomposition --------------------------------------------------


def nonmetricity(
    gamma: Union[np.ndarray, Callable],
    g_ref_exprs,
    x: np.ndarray,
    params=None,
) -> NonMetricityReport:
    """Decompose Gamma = christoffel(g_ref) + D and report the non-metricity
    Q_abc = nabla_a g_bc = -D^s_ac g_sb - D^s_ab g_sc of the reference metric."""
    x = np.asarray(x, dtype=float)
    if callable(gamma):
        gamma = gamma(x)
    gamma = np.asarray(gamma, dtype=float)
    g_vals_obj = geometry.eval_metric_exprs(g_ref_exprs, list(x), params)
    g_vals = g_vals_obj.astype(float)
    if abs(np.linalg.det(g_vals)) == 0.0:
        raise DegenerateMetric("reference metric is singular at x")
    gamma_ref = geometry.christoffel_values(g_ref_exprs, x, params)
    D = gamma - gamma_ref
    Q = -np.einsum("sac,sb->abc", D, g_vals) - np.einsum("sab,sc->abc", D, g_vals)
    return NonMetricityReport(
        reference_metric=tuple(tuple(row) for row in g_ref_exprs),
        D=D,
        Q=Q,
        Q_norm=float(np.max(np.abs(Q))),
    )
