"""Finite-dimensional mountain-pass machinery.

A discretized path from 0 to a low-energy endpoint is deformed by
steepest descent on its energy maximizer (descent directions taken in
the H^1 inner product, the norm the geometry lemma is stated in); the
path maximum is a non-increasing estimate of the min-max level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .functionals import DiscreteRadialFunction, RadialMesh, h1_seminorm_sq
from .problem import ProblemSpec

__all__ = [
    "EnergyEvaluator",
    "GeometryReport",
    "PathState",
    "MpaReport",
    "TLambdaPoint",
    "verify_mp_geometry",
    "find_endpoint",
    "mpa_level",
    "t_lambda_curve",
]

DEFAULT_MPA_MESH = 1024
OVERFLOW_T = 2.0 ** 60


class EnergyEvaluator:
    """Energy, H^1 inner product and H^1 gradient on a fixed mesh.

    Precomputes coefficient samples and the (tridiagonal) stiffness matrix
    of the weighted radial Dirichlet form; the gradient of I at u solves
    <G, v> = I'(u)[v] with the trace dof pinned to zero.
    """

    def __init__(self, spec: ProblemSpec, mesh: RadialMesh):
        if spec.N != mesh.N:
            raise DomainError("spec and mesh dimensions differ")
        self.spec = spec
        self.mesh = mesh
        self.main_g = spec.main_coefficient(mesh.rg)
        self.with_pert = (spec.lam != 0.0
                          and not (spec.k.is_zero() or spec.f.is_zero()))
        self.k_g = spec.k(mesh.rg) if self.with_pert else None
        self.pe = spec.p_main + 1.0

        w = mesh.omega * mesh.cell_meas / mesh.h ** 2  # cell stiffness
        n = len(mesh.r)
        diag = np.zeros(n)
        diag[:-1] += w
        diag[1:] += w
        self._offdiag = -w
        self._diag = diag
        nf = n - 1  # trace dof excluded
        ab = np.zeros((3, nf))
        ab[0, 1:] = self._offdiag[: nf - 1]
        ab[1, :] = diag[:nf]
        ab[2, :-1] = self._offdiag[: nf - 1]
        self._ab = ab
        self._s = 0.5 * (np.polynomial.legendre.leggauss(8)[0] + 1.0)

    # basics ----------------------------------------------------------------

    def function(self, values) -> DiscreteRadialFunction:
        return DiscreteRadialFunction(self.mesh, values)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self._apply_stiffness(u) @ v)

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def _apply_stiffness(self, u: np.ndarray) -> np.ndarray:
        out = self._diag * u
        out[:-1] += self._offdiag * u[1:]
        out[1:] += self._offdiag * u[:-1]
        return out

    # energy and gradient ----------------------------------------------------

    def energy(self, u: np.ndarray) -> float:
        mesh = self.mesh
        ug = mesh.at_gauss(u)
        val = 0.5 * self.inner(u, u)
        up = np.maximum(ug, 0.0)
        val -= mesh.integrate_ball(self.main_g * up ** self.pe) / self.pe
        if self.with_pert:
            val -= self.spec.lam * mesh.integrate_ball(
                self.k_g * self.spec.f.F(ug))
        return val

    def _nonlinear_load(self, u: np.ndarray) -> np.ndarray:
        """b_i = int (main u_+^p + lam k f(u)) phi_i, the rhs pairing."""
        mesh = self.mesh
        ug = mesh.at_gauss(u)
        vals = self.main_g * np.maximum(ug, 0.0) ** self.spec.p_main
        if self.with_pert:
            vals = vals + self.spec.lam * self.k_g * self.spec.f.f(ug)
        payload = mesh.omega * mesh.wg * mesh.rg_pow * vals
        b = np.zeros_like(u)
        b[:-1] += payload @ (1.0 - self._s)
        b[1:] += payload @ self._s
        return b

    def gradient(self, u: np.ndarray):
        """H^1 gradient of I at u and its H^1 norm."""
        resid = self._apply_stiffness(u) - self._nonlinear_load(u)
        g = np.zeros_like(u)
        g[:-1] = solve_banded((1, 1), self._ab, resid[:-1])
        gn = math.sqrt(max(float(g @ resid), 0.0))
        return g, gn

    def derivative_along(self, u: np.ndarray, v: np.ndarray) -> float:
        """<I'(u), v> without forming the gradient."""
        return float((self._apply_stiffness(u) - self._nonlinear_load(u)) @ v)


# --------------------------------------------------------------------------
# geometry of the functional
# --------------------------------------------------------------------------

@dataclass
class GeometryReport:
    """Sampled evidence for the two mountain-pass geometry conditions."""

    rho: float
    a_estimate: float
    rim_positive: bool
    ray_ok: bool
    samples: int
    seed: int
    ray_t: float


def _random_direction(mesh: RadialMesh, rng, modes: int = 6) -> np.ndarray:
    """Smooth random zero-trace radial function (sinc mode mixture:
    sinc(k r) is 1 at the center and vanishes at r = 1)."""
    r = mesh.r
    u = np.zeros_like(r)
    coeffs = rng.normal(size=modes) / (1.0 + np.arange(modes)) ** 2
    for k, c in enumerate(coeffs, start=1):
        u += c * np.sinc(k * r)
    u[-1] = 0.0
    return u


def verify_mp_geometry(spec: ProblemSpec, rho: float, samples: int = 32,
                       mesh: RadialMesh | None = None,
                       seed: int = 0) -> GeometryReport:
    """Sample the rho-sphere for the rim estimate a = min I and check that
    every sampled ray eventually reaches negative energy.

    An all-nonpositive rim is reported (rim_positive=False), not raised.
    """
    if rho <= 0:
        raise DomainError("rho must be > 0")
    if mesh is None:
        mesh = RadialMesh.unit_ball(spec.N, DEFAULT_MPA_MESH)
    ev = EnergyEvaluator(spec, mesh)
    rng = np.random.default_rng(seed)
    a_est = math.inf
    ray_ok = True
    ray_t = 0.0
    for _ in range(samples):
        u = _random_direction(mesh, rng)
        nu = ev.norm(u)
        if nu == 0.0:
            continue
        u = (rho / nu) * u
        a_est = min(a_est, ev.energy(u))
        t = 1.0
        while ev.energy(t * u) > 0:
            t *= 2.0
            if t > OVERFLOW_T:
                ray_ok = False
                break
        ray_t = max(ray_t, t)
    return GeometryReport(rho=rho, a_estimate=a_est,
                          rim_positive=bool(a_est > 0), ray_ok=ray_ok,
                          samples=samples, seed=seed, ray_t=ray_t)


def find_endpoint(spec: ProblemSpec, direction: DiscreteRadialFunction,
                  evaluator: EnergyEvaluator | None = None) -> DiscreteRadialFunction:
    """Scale the direction by doubling until the energy is nonpositive."""
    ev = evaluator or EnergyEvaluator(spec, direction.mesh)
    u = direction.values
    if ev.norm(u) == 0.0:
        raise DomainError("direction must be nonzero")
    t = 1.0
    while ev.energy(t * u) > 0:
        t *= 2.0
        if t > OVERFLOW_T:
            raise DomainError("ray energy never became nonpositive")
    return DiscreteRadialFunction(direction.mesh, t * u)


# --------------------------------------------------------------------------
# the path algorithm
# --------------------------------------------------------------------------

@dataclass
class PathState:
    """Discretized path from 0 to the endpoint with per-node energies."""

    mesh: RadialMesh
    nodes: np.ndarray      # (P, len(mesh)) nodal values
    energies: np.ndarray   # (P,)

    @property
    def level(self) -> float:
        return float(np.max(self.energies))

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.energies))


@dataclass
class MpaReport:
    """Outcome of the path-deformation run."""

    level: float
    iterations: int
    grad_norm: float
    maximizer: DiscreteRadialFunction
    converged: bool
    trace: list = field(default_factory=list)
    seed: int = 0
    notes: str = ""

    def to_dict(self, include_maximizer: bool = True) -> dict:
        d = {"level": self.level, "iterations": self.iterations,
             "grad_norm": self.grad_norm, "converged": self.converged,
             "trace": [float(x) for x in self.trace], "seed": self.seed,
             "notes": self.notes}
        if include_maximizer:
            d["maximizer"] = {
                "r": [float(x) for x in self.maximizer.mesh.r],
                "values": [float(x) for x in self.maximizer.values]}
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _redistribute(ev: EnergyEvaluator, nodes: np.ndarray) -> np.ndarray:
    """Resample the polyline uniformly in H^1 arc length."""
    P = len(nodes)
    seg = np.array([ev.norm(nodes[j + 1] - nodes[j]) for j in range(P - 1)])
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    if cum[-1] == 0.0:
        return nodes
    targets = np.linspace(0.0, cum[-1], P)
    out = np.empty_like(nodes)
    out[0], out[-1] = nodes[0], nodes[-1]
    for j in range(1, P - 1):
        i = np.clip(np.searchsorted(cum, targets[j], side="right") - 1, 0, P - 2)
        w = (targets[j] - cum[i]) / max(seg[i], 1e-300)
        out[j] = (1.0 - w) * nodes[i] + w * nodes[i + 1]
    return out


def mpa_level(spec: ProblemSpec, e: DiscreteRadialFunction,
              iters: int = 2000, tol: float = 1e-4,
              path_nodes: int = 33, grad_tol: float = 1e-3,
              seed: int = 0) -> MpaReport:
    """Estimate the min-max level by steepest-descent deformation of a
    discretized path from 0 to the endpoint e (which must have I(e) <= 0).

    Per sweep, the path's energy maximizer takes one backtracking descent
    step along the negative H^1 gradient; the path is re-equidistributed in
    H^1 arc length when that does not raise the maximum.  The reported
    level sequence is non-increasing; the run stops when the level stalls
    within ``tol`` (relative) over a sweep window or the gradient at the
    maximizer drops under ``grad_tol``.
    """
    ev = EnergyEvaluator(spec, e.mesh)
    if ev.norm(e.values) == 0.0:
        raise DomainError("endpoint must be a nonzero function")
    energy_e = ev.energy(e.values)
    if energy_e > 0:
        raise DomainError(f"endpoint energy must be <= 0, got {energy_e:.6g}")

    P = max(path_nodes, 5)
    ts = np.linspace(0.0, 1.0, P)
    nodes = np.outer(ts, e.values)
    energies = np.array([ev.energy(n) for n in nodes])

    trace = []
    step = 1.0
    gn = math.inf
    converged = False
    stall_window = 50
    sweeps_done = 0
    for sweep in range(iters):
        sweeps_done = sweep + 1
        j = int(np.argmax(energies))
        level = float(energies[j])
        trace.append(level)

        g, gn = ev.gradient(nodes[j])
        if gn <= grad_tol:
            converged = True
            break

        # backtracking descent on the maximizer
        improved = False
        s = step
        for _ in range(40):
            cand = nodes[j] - s * g
            ec = ev.energy(cand)
            if ec < level - 1e-4 * s * gn * gn:
                nodes[j] = cand
                energies[j] = ec
                step = min(s * 2.0, 1e6)
                improved = True
                break
            s *= 0.5
        if not improved:
            step = max(step * 0.5, 1e-12)

        if sweep % 5 == 4:
            cand_nodes = _redistribute(ev, nodes)
            cand_energies = np.array([ev.energy(n) for n in cand_nodes])
            if np.max(cand_energies) <= np.max(energies) + 1e-12 * (1 + abs(level)):
                nodes, energies = cand_nodes, cand_energies

        if len(trace) > stall_window:
            drop = trace[-stall_window - 1] - trace[-1]
            if drop < tol * (1.0 + abs(trace[-1])):
                converged = True
                break

    j = int(np.argmax(energies))
    _, gn = ev.gradient(nodes[j])
    return MpaReport(level=float(energies[j]), iterations=sweeps_done,
                     grad_norm=gn,
                     maximizer=DiscreteRadialFunction(e.mesh, nodes[j].copy()),
                     converged=converged, trace=trace, seed=seed,
                     notes="level/shooting agreement is a heuristic "
                           "cross-check, not asserted theory")


# --------------------------------------------------------------------------
# the ray maximizer curve
# --------------------------------------------------------------------------

@dataclass
class TLambdaPoint:
    lam: float
    t: float
    level: float
    degenerate: bool = False


def t_lambda_curve(spec: ProblemSpec, u: DiscreteRadialFunction,
                   lam_ladder) -> list:
    """Maximizer t_lam of t -> I(t u) for each perturbation strength.

    Requires u >= 0 (the ray energy then reduces to
    A t^2 - B t^{p+1} - lam C t^{q+1} with positive A, B) and a pure-power
    or zero lower-order term.  For k supported where u lives, C > 0 and
    t_lam is strictly decreasing for large lam.
    """
    if np.any(u.values < 0):
        raise DomainError("t_lambda_curve expects a nonnegative function")
    if spec.f.kind not in ("zero", "power"):
        raise DomainError("closed ray form needs a pure-power nonlinearity")
    mesh = u.mesh
    ug = np.maximum(mesh.at_gauss(u.values), 0.0)
    A = 0.5 * h1_seminorm_sq(u)
    if A == 0.0:
        raise DomainError("u must be nonzero")
    pe = spec.p_main + 1.0
    B = mesh.integrate_ball(spec.main_coefficient(mesh.rg) * ug ** pe) / pe
    if spec.f.kind == "power" and not spec.k.is_zero():
        qe = spec.f.q + 1.0
        C = mesh.integrate_ball(spec.k(mesh.rg) * ug ** qe) / qe
    else:
        qe = 2.0
        C = 0.0

    out = []
    for lam in lam_ladder:
        def neg_ray(t, lam=lam):
            return -(A * t * t - B * t ** pe - lam * C * t ** qe)

        t_hi = 1.0
        while neg_ray(t_hi) < 0:
            t_hi *= 2.0
            if t_hi > OVERFLOW_T:
                break
        res = minimize_scalar(neg_ray, bounds=(0.0, t_hi), method="bounded",
                              options={"xatol": 1e-12})
        t_best = float(res.x)
        level = -float(res.fun)
        degenerate = not (level > 0 and t_best > 0)
        out.append(TLambdaPoint(lam=float(lam), t=t_best, level=level,
                                degenerate=degenerate))
    return out
