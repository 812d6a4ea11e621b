"""Boundary-integral mass of radial graphical manifolds over a Kottler base.

A radial graph {t = f(rho)} in the Riemannian cylinder (R x P, V^2 dt^2 + g)
induces on P \\ (interior) the metric g + psi d rho (x) d rho with
psi = (V f')^2.  For such perturbations the static-potential boundary
integrand at the coordinate sphere N_rho reduces to closed 1-D forms
(docs/derivations.md):

    V (div e - d tr e)(nu)  =  (n-1) V^4 psi / rho,
    (tr e) dV(nu)           =   V^3 V' psi,
    -e(grad V, .)(nu)       =  -V^3 V' psi      (the last two cancel),

so the mass evaluated against the mass-m base at finite radius is

    m(rho) = m + c_n theta rho^(n-1) [(n-1) V^4 psi / rho]
           = m + (1/2) rho^(n-2) V^4 psi,       c_n = 1/(2 (n-1) theta),

with m(rho) -> total mass as rho -> oo.  Generic admissible profiles leave a
rho^-2 error term, removed here by Richardson extrapolation after a
decay-validation fit; for the exact Kottler-over-Kottler profile even that
term cancels and the samples converge at O(rho^-n).

The shape operator of the graph has one radial and n-1 equal tangential
principal curvatures,

    k_tan = V^3 f' / (rho sqrt(G)),
    k_rad = (V / sqrt(G)) [ (V^2 f'' + 2 V V' f') / G + V V' f' ],
    G     = 1 + V^4 f'^2,

and S2 = (n-1) k_rad k_tan + (n-1)(n-2)/2 k_tan^2 is half the scalar-
curvature excess R_g + n(n-1) of the induced metric.  Writing the induced
radial metric as d rho^2 / U + rho^2 ghat and U = rho^2 + kappa -
2 mtilde(rho) rho^(2-n) gives S2 = (n-1) mtilde'(rho) rho^(1-n): the
dominant energy condition S2 >= 0 is exactly a nondecreasing interior mass.
The ``mass_profile_graph`` family below exploits this to manufacture
dominant-energy scenarios with closed-form oracles.

The total-mass identity decomposes the mass as

    mass = m + 2 c_n int_M S2 <dt, xi> dV_g + c_n int_Sigma V H dmu,

where <dt, xi> = V / sqrt(1 + V^2 psi) and, for radial graphs, the product
<dt, xi> dV_g collapses to rho^(n-1) d rho d mu_ghat; the inner boundary
Sigma = {rho_inner} x N carries H = (n-1) V(rho_inner) / rho_inner.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from ._util import fit_log_slope, integrate_panels
from .background import (
    SpaceParams,
    _v_squared_prime,
    find_horizon,
    kottler_graph_profile,
    v_squared,
)
from .errors import DecayViolationError, DomainError

__all__ = [
    "RadialGraph",
    "MassEstimate",
    "ShapeRecord",
    "IdentityReport",
    "kottler_pair_graph",
    "mass_profile_graph",
    "graph_from_f_prime",
    "mass_integrand",
    "mass_limit",
    "radial_shape_operator",
    "mass_identity_check",
    "penrose_deficit",
]

DEFAULT_RHO_SCHEDULE = (50.0, 100.0, 200.0)


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Radial graph data over a Kottler base.

    ``psi`` is the radial metric perturbation (V f')^2 in a cancellation-free
    closed form; ``f_prime2`` may be None, in which case a high-order finite
    difference of f' is used where a second derivative is needed.
    ``decay_tau`` is the fitted decay order (psi = O(rho^(-tau-2))).
    """

    base: SpaceParams
    f_prime: object
    f_prime2: object
    psi: object
    rho_inner: float
    decay_tau: float
    horizon_graph: bool
    bulk_cut: float
    oracle: dict = None


def _fitted_tau(psi, n):
    rho = np.geomspace(50.0, 800.0, 7)
    vals = np.abs(np.asarray(psi(rho), dtype=float))
    if np.all(vals < 1e-280):
        return math.inf
    slope = fit_log_slope(rho, vals)
    if slope is None:
        return math.inf
    return -slope - 2.0


def _validated(graph):
    n = graph.base.n
    if graph.decay_tau <= n / 2.0:
        raise DecayViolationError(
            f"decay order tau={graph.decay_tau:.4g} is not > n/2 = {n / 2.0:.4g}; "
            "the mass limit need not exist"
        )
    return graph


def kottler_pair_graph(params, m_graph):
    """The mass-``m_graph`` Kottler space as a radial graph over ``params``."""
    profile = kottler_graph_profile(params.m, m_graph, params)
    tau = _fitted_tau(profile.psi, params.n)
    return _validated(
        RadialGraph(
            base=params,
            f_prime=profile.f_prime,
            f_prime2=profile.f_prime2,
            psi=profile.psi,
            rho_inner=profile.rho_start,
            decay_tau=tau,
            horizon_graph=m_graph > params.m,
            bulk_cut=profile.rho_start + 20.0,
        )
    )


def mass_profile_graph(params, m_horizon, m_total, rate=1.0):
    """Dominant-energy radial graph from a nondecreasing interior mass.

    The induced radial metric is d rho^2 / U + rho^2 ghat with
    U = rho^2 + kappa - 2 mtilde(rho) rho^(2-n) and

        mtilde(rho) = m_total - (m_total - m_horizon) e^(-rate (rho - rho_inner)),

    where rho_inner is the horizon radius of the mass-``m_horizon`` Kottler
    space.  Then S2 = (n-1) mtilde' rho^(1-n) >= 0, the inner boundary is a
    horizon graph, and the total mass is exactly ``m_total``.
    """
    if not params.m < m_horizon <= m_total:
        raise DomainError(
            f"need base m < m_horizon <= m_total, got {params.m}, {m_horizon}, {m_total}"
        )
    n, kappa = params.n, params.kappa
    rho_i = find_horizon(replace(params, m=m_horizon)).rho0
    dm_tot = m_total - m_horizon

    def mtilde(rho):
        return m_total - dm_tot * np.exp(-rate * (rho - rho_i))

    def mtilde_prime(rho):
        return rate * dm_tot * np.exp(-rate * (rho - rho_i))

    def ufun(rho):
        return rho**2 + kappa - 2.0 * mtilde(rho) * rho ** (2 - n)

    def ufun_prime(rho):
        return (
            2.0 * rho
            + 2.0 * (n - 2) * mtilde(rho) * rho ** (1 - n)
            - 2.0 * mtilde_prime(rho) * rho ** (2 - n)
        )

    def psi(rho):
        rho = np.asarray(rho, dtype=float)
        return 2.0 * (mtilde(rho) - params.m) * rho ** (2 - n) / (ufun(rho) * v_squared(params, rho))

    def f_prime(rho):
        rho = np.asarray(rho, dtype=float)
        return np.sqrt(np.maximum(psi(rho), 0.0) / np.maximum(v_squared(params, rho), 1e-300))

    def f_prime2(rho):
        rho = np.asarray(rho, dtype=float)
        vb2 = v_squared(params, rho)
        dvb2 = _v_squared_prime(params, rho)
        dm = mtilde(rho) - params.m
        dlog_psi = mtilde_prime(rho) / dm + (2 - n) / rho - ufun_prime(rho) / ufun(rho) - dvb2 / vb2
        return f_prime(rho) * (0.5 * dlog_psi - 0.5 * dvb2 / vb2)

    return _validated(
        RadialGraph(
            base=params,
            f_prime=f_prime,
            f_prime2=f_prime2,
            psi=psi,
            rho_inner=rho_i,
            decay_tau=_fitted_tau(psi, n),
            horizon_graph=True,
            bulk_cut=rho_i + max(45.0 / rate, 10.0),
            oracle={
                "mtilde": mtilde,
                "mtilde_prime": mtilde_prime,
                "m_total": float(m_total),
                "m_horizon": float(m_horizon),
            },
        )
    )


def graph_from_f_prime(params, f_prime, rho_inner, decay_tau=None, f_prime2=None):
    """Wrap a user profile f'(rho).

    The decay order is fitted from the profile itself; a stated ``decay_tau``
    at or below n/2 is rejected outright, and the fitted value must clear
    n/2 regardless of what was stated.
    """
    if decay_tau is not None and decay_tau <= params.n / 2.0:
        raise DecayViolationError(
            f"stated decay order tau={decay_tau} is not > n/2 = {params.n / 2.0}"
        )

    def psi(rho):
        rho = np.asarray(rho, dtype=float)
        fp = np.asarray(f_prime(rho), dtype=float)
        return v_squared(params, rho) * fp**2

    return _validated(
        RadialGraph(
            base=params,
            f_prime=f_prime,
            f_prime2=f_prime2,
            psi=psi,
            rho_inner=float(rho_inner),
            decay_tau=_fitted_tau(psi, params.n),
            horizon_graph=False,
            bulk_cut=max(4.0 * rho_inner, 200.0),
        )
    )


# ---------------------------------------------------------------------------
# Mass integrand and limit
# ---------------------------------------------------------------------------


def mass_integrand(graph, rho):
    """Finite-radius mass m + c_n * (boundary integrand) * |N_rho|.

    The three displayed pieces are evaluated separately; the potential-
    gradient pair cancels identically for radial perturbations.
    """
    params = graph.base
    rho = float(rho)
    rho0 = find_horizon(params).rho0
    if rho <= max(graph.rho_inner, rho0):
        raise DomainError(
            f"rho={rho:.6g} not beyond max(rho_inner={graph.rho_inner:.6g}, rho0={rho0:.6g})"
        )
    n = params.n
    psi = float(graph.psi(rho))
    v2 = float(v_squared(params, rho))
    v = math.sqrt(v2)
    dv = float(_v_squared_prime(params, rho)) / (2.0 * v)
    term_div = (n - 1) * v2 * v2 * psi / rho
    term_trace = v2 * v * dv * psi
    term_grad = -(v2 * v * dv * psi)
    per_area = term_div + term_trace + term_grad
    return params.m + params.mass_constant * params.theta * rho ** (n - 1) * per_area


@dataclass(frozen=True)
class MassEstimate:
    samples: tuple
    mass: float
    error_estimate: float

    def as_dict(self):
        return {
            "mass": self.mass,
            "error_estimate": self.error_estimate,
            "samples": [[r, v] for r, v in self.samples],
        }


def mass_limit(graph, rho_schedule=DEFAULT_RHO_SCHEDULE):
    """Richardson extrapolation of the finite-radius mass in rho^-2.

    The leading error of generic admissible profiles is O(rho^-2); the
    extrapolation ladder removes rho^-2, rho^-4, ... successively.  Samples
    must already be convergent: increasing |increments| raise a
    decay-violation error, as does a fitted error slope shallower than
    rho^-1.5 (checked only when the errors are above rounding).
    """
    sched = [float(r) for r in rho_schedule]
    if len(sched) < 3 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise DomainError("rho_schedule must be increasing with at least 3 points")
    samples = [(r, mass_integrand(graph, r)) for r in sched]
    vals = np.array([s[1] for s in samples])
    rhos = np.array(sched)

    scale = max(1.0, float(np.max(np.abs(vals))))
    incs = np.abs(np.diff(vals))
    if len(incs) >= 2 and incs[-1] > 2.0 * incs[0] + 1e-13 * scale:
        raise DecayViolationError(
            f"mass samples are not converging: increments {incs.tolist()}"
        )

    level_vals = vals.copy()
    level_rhos = rhos.copy()
    last_diff = 0.0
    power = 2
    while len(level_vals) > 1:
        wts = level_rhos**power
        new_vals = (wts[1:] * level_vals[1:] - wts[:-1] * level_vals[:-1]) / (wts[1:] - wts[:-1])
        last_diff = float(abs(new_vals[-1] - level_vals[-1]))
        level_vals = new_vals
        level_rhos = level_rhos[1:]
        power += 2
    mass = float(level_vals[0])

    errs = np.abs(vals - mass)
    tiny = 1e-11 * scale
    if np.all(errs[:-1] > tiny):
        slope = fit_log_slope(rhos, np.maximum(errs, 1e-300))
        if slope is not None and slope > -1.5:
            raise DecayViolationError(
                f"fitted mass-error slope {slope:.3g} is shallower than rho^-1.5; "
                "the rho^-2 extrapolation model does not apply"
            )
    error_estimate = last_diff + float(errs[-1]) * 1e-2 + 1e-13 * scale
    return MassEstimate(samples=tuple(samples), mass=mass, error_estimate=error_estimate)


# ---------------------------------------------------------------------------
# Shape operator and the mass identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapeRecord:
    kappa_rad: float
    kappa_tan: float
    s2: float


def _f_second(graph, rho):
    if graph.f_prime2 is not None:
        return float(graph.f_prime2(rho))
    h = max(1e-5 * max(1.0, rho), 1e-7)
    h = min(h, 0.25 * (rho - graph.rho_inner)) if rho > graph.rho_inner else h
    fp = graph.f_prime
    return float(
        (float(fp(rho - 2 * h)) - 8 * float(fp(rho - h)) + 8 * float(fp(rho + h)) - float(fp(rho + 2 * h)))
        / (12.0 * h)
    )


def radial_shape_operator(graph, rho):
    """Principal curvatures (radial, tangential) and S2 of the radial graph."""
    params = graph.base
    rho = float(rho)
    if rho <= graph.rho_inner:
        raise DomainError(f"rho={rho:.6g} not beyond rho_inner={graph.rho_inner:.6g}")
    n = params.n
    v2 = float(v_squared(params, rho))
    v = math.sqrt(v2)
    dv = float(_v_squared_prime(params, rho)) / (2.0 * v)
    fp = float(graph.f_prime(rho))
    big_g = 1.0 + v2 * float(graph.psi(rho))
    sqrt_g = math.sqrt(big_g)
    k_tan = v2 * v * fp / (rho * sqrt_g)
    fpp = _f_second(graph, rho)
    k_rad = (v / sqrt_g) * ((v2 * fpp + 2.0 * v * dv * fp) / big_g + v * dv * fp)
    s2 = (n - 1) * k_rad * k_tan + 0.5 * (n - 1) * (n - 2) * k_tan**2
    return ShapeRecord(kappa_rad=k_rad, kappa_tan=k_tan, s2=s2)


def _bulk_energy_integral(graph):
    """2 c_n int_M S2 <dt, xi> dV_g by graded radial quadrature.

    Near the inner boundary the profile gradient blows up like
    (rho - rho_inner)^(-1/2); the substitution rho = rho_inner + zeta^2 keeps
    the integrand smooth (S2 stays bounded there and <dt, xi> -> 0).
    """
    params = graph.base
    n = params.n
    rho_i = graph.rho_inner
    two_cn_theta = 2.0 * params.mass_constant * params.theta  # = 1/(n-1)

    def integrand(rho_arr):
        flat = np.ravel(rho_arr)
        out = np.empty_like(flat)
        for k, rho in enumerate(flat):
            s2 = radial_shape_operator(graph, float(rho)).s2
            v2 = float(v_squared(params, rho))
            psi = float(graph.psi(rho))
            dt_xi = math.sqrt(v2) / math.sqrt(1.0 + v2 * psi)
            vol = rho ** (n - 1) * math.sqrt(1.0 / v2 + psi)
            out[k] = s2 * dt_xi * vol
        return out.reshape(np.shape(rho_arr))

    near = integrate_panels(
        lambda z: integrand(rho_i + z * z) * 2.0 * z, 0.0, 1.0, n_panels=16, order=12
    )
    total = near
    lo = rho_i + 1.0
    hi = max(graph.bulk_cut, lo + 1.0)
    for _ in range(8):
        inc = integrate_panels(
            lambda s: integrand(np.exp(s)) * np.exp(s),
            math.log(lo),
            math.log(hi),
            n_panels=24,
            order=12,
        )
        total += inc
        if abs(inc) < 1e-10 * max(1.0, abs(total)):
            break
        lo, hi = hi, hi * 2.0
    return two_cn_theta * total


@dataclass(frozen=True)
class IdentityReport:
    lhs_mass: float
    rhs_mass: float
    residual: float
    bulk_term: float
    boundary_term: float

    def as_dict(self):
        return {
            "lhs_mass": self.lhs_mass,
            "rhs_mass": self.rhs_mass,
            "residual": self.residual,
            "bulk_term": self.bulk_term,
            "boundary_term": self.boundary_term,
        }


def mass_identity_check(graph, rho_schedule=DEFAULT_RHO_SCHEDULE):
    """Total mass versus base mass + interior energy + horizon flux."""
    if not graph.horizon_graph:
        raise DomainError("mass identity check needs a horizon-type inner boundary")
    params = graph.base
    n = params.n
    rho_i = graph.rho_inner
    v_i = math.sqrt(max(float(v_squared(params, rho_i)), 0.0))
    h_sigma = (n - 1) * v_i / rho_i
    flux = v_i * h_sigma * rho_i ** (n - 1) * params.theta
    boundary = params.mass_constant * flux
    bulk = _bulk_energy_integral(graph)
    lhs = mass_limit(graph, rho_schedule).mass
    rhs = params.m + bulk + boundary
    return IdentityReport(
        lhs_mass=lhs,
        rhs_mass=rhs,
        residual=abs(lhs - rhs),
        bulk_term=bulk,
        boundary_term=boundary,
    )


def penrose_deficit(mass, sigma_area, params):
    """mass - (1/2)[(A/theta)^(n/(n-1)) + kappa (A/theta)^((n-2)/(n-1))]."""
    if sigma_area <= 0.0:
        raise DomainError(f"sigma_area must be positive, got {sigma_area!r}")
    n, kappa, theta = params.n, params.kappa, params.theta
    x = (sigma_area / theta) ** (1.0 / (n - 1))
    return mass - 0.5 * (x**n + kappa * x ** (n - 2))
