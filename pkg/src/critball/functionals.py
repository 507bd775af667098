"""Radial quadrature for norms and energies, the Sobolev constant,
cutoff Talenti bubbles, energy expansion fits and the concentration
integral criterion.

All integrals over the unit ball are reduced to weighted radial form,

    int_B F dx  =  omega_N  int_0^1 F(r) r^{N-1} dr,

with omega_N the area of the unit sphere.  Functions live on a graded
mesh r_i = (i/M)^2 (clustered at the origin, where bubbles concentrate)
as piecewise-linear interpolants; integrals use fixed Gauss quadrature
per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import AccuracyError, DomainError
from .problem import CoefficientModel, NonlinearityModel, ProblemSpec, critical_exponent

__all__ = [
    "RadialMesh",
    "DiscreteRadialFunction",
    "BubbleParams",
    "ExpansionFit",
    "sphere_area",
    "graded_mesh",
    "h1_seminorm_sq",
    "weighted_lp",
    "energy",
    "sobolev_constant",
    "bubble",
    "expansion_check",
    "c30_integral",
]

DEFAULT_MESH_SIZE = 4096
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)
_S01 = 0.5 * (_GAUSS_X + 1.0)  # Gauss nodes mapped to (0, 1)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def graded_mesh(M: int = DEFAULT_MESH_SIZE, r_max: float = 1.0) -> np.ndarray:
    i = np.arange(M + 1, dtype=float)
    return (i / M) ** 2 * r_max


class RadialMesh:
    """Graded mesh on [0, r_max] with per-cell Gauss data for dimension N."""

    def __init__(self, N: int, r: np.ndarray):
        if N < 3:
            raise DomainError("N must be >= 3")
        r = np.asarray(r, dtype=float)
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise DomainError("mesh must start at 0 and increase strictly")
        self.N = int(N)
        self.r = r
        self.omega = sphere_area(N)
        self.h = np.diff(r)
        self.rg = r[:-1, None] + np.outer(self.h, _S01)
        self.wg = 0.5 * np.outer(self.h, _GAUSS_W)
        self.rg_pow = self.rg ** (N - 1)
        # exact per-cell integral of r^{N-1}, used by the stiffness weight
        self.cell_meas = (r[1:] ** N - r[:-1] ** N) / N

    @classmethod
    def unit_ball(cls, N: int, M: int = DEFAULT_MESH_SIZE) -> "RadialMesh":
        return cls(N, graded_mesh(M))

    def __len__(self):
        return len(self.r)

    def at_gauss(self, values: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation of nodal values at the Gauss nodes."""
        return np.outer(values[:-1], 1.0 - _S01) + np.outer(values[1:], _S01)

    def integrate_ball(self, gauss_values: np.ndarray) -> float:
        """omega * int f(r) r^{N-1} dr for f given at the Gauss nodes."""
        return self.omega * float(np.sum(self.wg * self.rg_pow * gauss_values))


@dataclass
class DiscreteRadialFunction:
    """Nodal values of a radial function with piecewise-linear reconstruction."""

    mesh: RadialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.mesh.r.shape:
            raise DomainError("values must match the mesh nodes")

    @classmethod
    def from_callable(cls, fn, mesh: RadialMesh) -> "DiscreteRadialFunction":
        return cls(mesh, np.asarray(fn(mesh.r), dtype=float))

    @classmethod
    def from_profile(cls, profile, mesh: RadialMesh) -> "DiscreteRadialFunction":
        """Resample a shooting profile; the trace value is pinned to 0 when
        the profile reaches r = 1 (Dirichlet membership)."""
        vals = profile(mesh.r)
        vals = np.asarray(vals, dtype=float)
        if profile.covers_ball(tol=1e-9) and mesh.r[-1] >= 1.0 - 1e-12:
            vals[-1] = 0.0
        return cls(mesh, vals)

    def __call__(self, rq):
        return np.interp(rq, self.mesh.r, self.values)

    @property
    def is_zero_trace(self) -> bool:
        return self.values[-1] == 0.0

    def scaled(self, c: float) -> "DiscreteRadialFunction":
        return DiscreteRadialFunction(self.mesh, c * self.values)

    def __add__(self, other):
        return DiscreteRadialFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        return DiscreteRadialFunction(self.mesh, self.values - other.values)


# --------------------------------------------------------------------------
# norms and energy
# --------------------------------------------------------------------------

def h1_seminorm_sq(u: DiscreteRadialFunction) -> float:
    """int_B |grad u|^2, exact for the piecewise-linear reconstruction."""
    mesh = u.mesh
    slopes = np.diff(u.values) / mesh.h
    return mesh.omega * float(np.sum(slopes * slopes * mesh.cell_meas))


def weighted_lp(u: DiscreteRadialFunction, s: float, m: float = 0.0) -> float:
    """int_B |x|^{m s} |u|^s dx in radial form."""
    if s < 1:
        raise DomainError("s must be >= 1")
    if m < 0:
        raise DomainError("m must be >= 0")
    mesh = u.mesh
    ug = np.abs(mesh.at_gauss(u.values)) ** s
    if m != 0.0:
        ug = mesh.rg ** (m * s) * ug
    return mesh.integrate_ball(ug)


def energy(spec: ProblemSpec, u: DiscreteRadialFunction) -> float:
    """I(u) = ||u||^2/2 - int main u_+^{p+1}/(p+1) - lam int k F(u)."""
    mesh = u.mesh
    if spec.N != mesh.N:
        raise DomainError("spec and function live in different dimensions")
    val = 0.5 * h1_seminorm_sq(u)
    ug = mesh.at_gauss(u.values)
    up = np.maximum(ug, 0.0)
    pe = spec.p_main + 1.0
    val -= mesh.integrate_ball(spec.main_coefficient(mesh.rg) * up ** pe) / pe
    if spec.lam != 0.0 and not (spec.k.is_zero() or spec.f.is_zero()):
        val -= spec.lam * mesh.integrate_ball(spec.k(mesh.rg) * spec.f.F(ug))
    return val


def energy_ray(spec: ProblemSpec, u: DiscreteRadialFunction, ts) -> np.ndarray:
    """I(t u) for an array of ray parameters t (one quadrature pass)."""
    mesh = u.mesh
    a = 0.5 * h1_seminorm_sq(u)
    ug = mesh.at_gauss(u.values)
    main_g = spec.main_coefficient(mesh.rg)
    ts = np.asarray(ts, dtype=float)
    pe = spec.p_main + 1.0
    out = np.empty_like(ts)
    with_pert = spec.lam != 0.0 and not (spec.k.is_zero() or spec.f.is_zero())
    kg = spec.k(mesh.rg) if with_pert else None
    for i, t in enumerate(ts):
        up = np.maximum(t * ug, 0.0)
        v = a * t * t - mesh.integrate_ball(main_g * up ** pe) / pe
        if with_pert:
            v -= spec.lam * mesh.integrate_ball(kg * spec.f.F(t * ug))
        out[i] = v
    return out


# --------------------------------------------------------------------------
# Talenti bubbles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleParams:
    """Concentration scale and cutoff radii for the normalized bubble.

    The cutoff is identically 1 on [0, eta] and 0 beyond delta_c; keep
    eps <= eta/10 when fitting expansions (scale separation).
    """

    eps: float
    eta: float = 0.25
    delta_c: float = 0.75

    def __post_init__(self):
        if not (self.eps > 0):
            raise DomainError("eps must be > 0")
        if not (0 < self.eta < self.delta_c <= 1.0):
            raise DomainError("need 0 < eta < delta_c <= 1")

    def with_eps(self, eps: float) -> "BubbleParams":
        return BubbleParams(eps, self.eta, self.delta_c)


def _cutoff(params: BubbleParams, r: np.ndarray) -> np.ndarray:
    """C^2 bump: 1 on [0, eta], 0 past delta_c, quintic smoothstep between."""
    s = np.clip((r - params.eta) / (params.delta_c - params.eta), 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def talenti(N: int, eps: float, r) -> np.ndarray:
    """The concentration family eps^{(N-2)/2} / (eps^2 + r^2)^{(N-2)/2}."""
    e2 = eps * eps
    return eps ** ((N - 2) / 2.0) / (e2 + np.asarray(r) ** 2) ** ((N - 2) / 2.0)


def bubble(params: BubbleParams, N: int,
           mesh: RadialMesh | None = None) -> DiscreteRadialFunction:
    """Cutoff Talenti bubble normalized to unit critical Lebesgue norm."""
    if params.eps > params.eta / 2.0:
        raise DomainError("eps too large for the cutoff inner radius")
    if mesh is None:
        mesh = RadialMesh.unit_ball(N)
    vals = _cutoff(params, mesh.r) * talenti(N, params.eps, mesh.r)
    v = DiscreteRadialFunction(mesh, vals)
    two_star = 2.0 * N / (N - 2.0)
    norm = weighted_lp(v, two_star) ** (1.0 / two_star)
    return v.scaled(1.0 / norm)


# --------------------------------------------------------------------------
# Sobolev constant
# --------------------------------------------------------------------------

_S_CACHE: dict = {}


def sobolev_constant(N: int, tol: float = 1e-5, mesh_size: int = 16384,
                     params: BubbleParams | None = None) -> float:
    """Best constant of the critical embedding, as the eps -> 0 limit of
    the Rayleigh quotient of normalized bubbles.

    The quotient values Q(eps) = S + O(eps^{N-2}) are extrapolated to 0 by
    Neville's scheme in eps; raises AccuracyError (with the partial value)
    when consecutive extrapolants fail to settle within the requested
    relative tolerance.
    """
    key = (N, round(math.log10(tol), 6), mesh_size,
           params.eta if params else None, params.delta_c if params else None)
    if key in _S_CACHE:
        return _S_CACHE[key]
    if params is None:
        params = BubbleParams(0.1)
    mesh = RadialMesh.unit_ball(N, mesh_size)
    eps_ladder = 0.1 * 0.5 ** np.arange(6)
    Q = np.array([h1_seminorm_sq(bubble(params.with_eps(e), N, mesh))
                  for e in eps_ladder])

    x = eps_ladder.copy()
    T = [Q.copy()]
    best, best_inc = Q[-1], math.inf
    for k in range(1, len(x)):
        prev = T[-1]
        cur = np.empty(len(x) - k)
        for j in range(len(cur)):
            xa, xb = x[j], x[j + k]
            cur[j] = (xa * prev[j + 1] - xb * prev[j]) / (xa - xb)
        inc = abs(cur[-1] - prev[-1])
        if inc < best_inc:
            best, best_inc = cur[-1], inc
        T.append(cur)
    S = float(best)
    if best_inc > tol * abs(S):
        raise AccuracyError(
            f"Sobolev extrapolation stalled at increment {best_inc:.3e}",
            partial_value=S)
    _S_CACHE[key] = S
    return S


# --------------------------------------------------------------------------
# expansion fits and the concentration integral
# --------------------------------------------------------------------------

@dataclass
class ExpansionFit:
    """Fitted concentration exponents along an eps ladder."""

    N: int
    gamma: float
    q: float
    eps: np.ndarray
    norm_sq: np.ndarray
    weighted_integral: np.ndarray
    S: float
    slope_norm: float
    slope_weighted: float
    predicted_norm: float
    predicted_weighted: float

    def rows(self):
        for e, ns, wi in zip(self.eps, self.norm_sq, self.weighted_integral):
            yield {"epsilon": float(e), "norm_sq_minus_S": float(ns - self.S),
                   "weighted_integral": float(wi)}


def expansion_check(N: int, gamma: float, q: float, eps_ladder,
                    params: BubbleParams | None = None,
                    mesh_size: int = 16384,
                    S: float | None = None) -> ExpansionFit:
    """Fit the quotient-excess slope (expected N-2) and the weighted-integral
    slope (expected gamma + N - (N-2)(q+1)/2) on a decreasing eps ladder.

    Requires (N-2)(q+1) > gamma + N so the scaled weighted integral
    converges and the fitted exponent is well defined.
    """
    eps_ladder = np.asarray(eps_ladder, dtype=float)
    if len(eps_ladder) < 4 or np.any(np.diff(eps_ladder) >= 0):
        raise DomainError("need a decreasing eps ladder with >= 4 points")
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    if (N - 2) * (q + 1) <= gamma + N:
        raise DomainError("weighted integral does not concentrate: "
                          "need (N-2)(q+1) > gamma + N")
    if params is None:
        params = BubbleParams(eps_ladder[0])
    if S is None:
        S = sobolev_constant(N, tol=1e-5)
    mesh = RadialMesh.unit_ball(N, mesh_size)

    norm_sq = np.empty_like(eps_ladder)
    wint = np.empty_like(eps_ladder)
    for j, e in enumerate(eps_ladder):
        v = bubble(params.with_eps(e), N, mesh)
        norm_sq[j] = h1_seminorm_sq(v)
        vg = np.maximum(mesh.at_gauss(v.values), 0.0)
        wint[j] = mesh.integrate_ball(mesh.rg ** gamma * vg ** (q + 1.0))

    diffs = norm_sq - S
    if np.any(diffs <= 0):
        raise AccuracyError("norm excess non-positive: S estimate too high "
                            "or ladder too deep for the mesh")
    slope_norm = float(np.polyfit(np.log(eps_ladder), np.log(diffs), 1)[0])
    slope_weighted = float(np.polyfit(np.log(eps_ladder), np.log(wint), 1)[0])
    a = gamma + N - (N - 2.0) * (q + 1.0) / 2.0
    return ExpansionFit(N=N, gamma=gamma, q=q, eps=eps_ladder,
                        norm_sq=norm_sq, weighted_integral=wint, S=S,
                        slope_norm=slope_norm, slope_weighted=slope_weighted,
                        predicted_norm=float(N - 2), predicted_weighted=a)


def c30_integral(f_model: NonlinearityModel, gamma: float, N: int,
                 eps: float) -> float:
    """eps^{gamma+2} int_0^{1/eps} F[((1/eps)/(1+r^2))^{(N-2)/2}] r^{gamma+N-1} dr.

    Diverges as eps -> 0 exactly when the nonlinearity grows fast enough;
    see f4_threshold for the pure-power threshold.
    """
    if not (0 < eps < 1):
        raise DomainError("eps must be in (0, 1)")
    if f_model.is_zero():
        return 0.0
    inv = 1.0 / eps
    half = (N - 2.0) / 2.0

    def integrand(r):
        return f_model.F((inv / (1.0 + r * r)) ** half) * r ** (gamma + N - 1.0)

    val, abserr = quad(integrand, 0.0, inv, limit=400,
                       epsabs=0.0, epsrel=1e-10)
    if not math.isfinite(val) or (val != 0 and abserr > 1e-6 * abs(val)):
        raise AccuracyError(f"concentration integral quadrature error {abserr:.3e}",
                            partial_value=val)
    return eps ** (gamma + 2.0) * val
