"""Pohozaev-type identities on computed profiles and rigorous
nonexistence certificates.

Two identity routes are implemented.  The classical multiplier x . grad u
gives, for Dirichlet solutions of -Delta u = u^p + lam r^beta u^q on the
unit ball,

    (N/(p+1) - (N-2)/2) int u^{p+1}
      + int [ lam beta r^beta/(q+1) + (N/(q+1)-(N-2)/2) lam r^beta ] u^{q+1}
      = (omega/2) |u'(1)|^2 ,

where the main-term bracket vanishes identically at the critical p.  The
general radial route multiplies the equation by r^{N-1} psi u' and
(r^{N-1} psi' - (N-1) r^{N-2} psi) u for a test function psi with
psi(0) = 0; for rhs = sum_j a_j(r) |u|^{s_j - 1} u it yields

    psi(1) u'(1)^2 =
      1/2 int u^2 r^{N-4} { r^3 psi''' - (N-1)(N-3) r psi' + (N-1)(N-3) psi }
      + sum_j 1/(s_j+1) int |u|^{s_j+1} { (s_j+3) a_j r^{N-1} psi'
            - (s_j-1)(N-1) a_j r^{N-2} psi + 2 a_j' r^{N-1} psi } .

Certificates instantiate the sign tests (any lambda at beta = 0 with
critical q; lambda <= 0 below / >= 0 above the perturbed critical power)
or, for beta >= N-2 and 0 <= lambda <= lambda_star, the radial test
function psi = -r^{N-1} + r whose induced h(r) stays nonnegative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .functionals import sphere_area
from .problem import (CoefficientModel, ProblemSpec, critical_exponent,
                      lambda_star, _rhs_vector)
from .shooting import RadialProfile

__all__ = [
    "TestFunctionPsi",
    "Certificate",
    "pov_residual",
    "general_identity_residual",
    "h_function",
    "min_h",
    "certify_nonexistence",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(6)
_S01 = 0.5 * (_GAUSS_X + 1.0)


# --------------------------------------------------------------------------
# test functions
# --------------------------------------------------------------------------

class TestFunctionPsi:
    """Polynomial radial test function with psi(0) = 0.

    Stored as coefficients of r, r^2, ... (no constant term), so psi(0) = 0
    holds exactly and all derivatives are closed-form.
    """

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("need a 1-d coefficient sequence for powers r^1..r^k")
        self._poly = np.polynomial.Polynomial(np.concatenate(([0.0], c)))

    @staticmethod
    def identity() -> "TestFunctionPsi":
        """psi(r) = r, the classical Pohozaev multiplier."""
        return TestFunctionPsi([1.0])

    @staticmethod
    def radial_pair(N: int, a: float, b: float) -> "TestFunctionPsi":
        """psi(r) = a r^{N-1} + b r, the kernel of the u^2 bracket."""
        if N < 3:
            raise DomainError("N must be >= 3")
        c = np.zeros(N - 1)
        c[0] = b
        c[N - 2] = a
        return TestFunctionPsi(c)

    def __call__(self, r):
        return self._poly(r)

    def d1(self, r):
        return self._poly.deriv(1)(r)

    def d3(self, r):
        return self._poly.deriv(3)(r)

    def spot_check(self, rtol: float = 1e-6) -> bool:
        """Finite-difference consistency of the stored derivatives."""
        rs = np.linspace(0.1, 0.9, 7)
        h = 1e-5
        fd1 = (self(rs + h) - self(rs - h)) / (2 * h)
        ok1 = np.allclose(fd1, self.d1(rs), rtol=rtol, atol=1e-8)
        fd3 = (self(rs + 2 * h) - 2 * self(rs + h) + 2 * self(rs - h)
               - self(rs - 2 * h)) / (2 * h ** 3)
        ok3 = np.allclose(fd3, self.d3(rs), rtol=1e-3, atol=1e-4)
        return bool(ok1 and ok3)


# --------------------------------------------------------------------------
# quadrature over profiles
# --------------------------------------------------------------------------

def _profile_gauss(profile: RadialProfile):
    """Gauss nodes per mesh cell with cubic-Hermite values of u."""
    r, u, du = profile.r, profile.u, profile.du
    h = np.diff(r)
    s = _S01
    s2, s3 = s * s, s * s * s
    h00, h10 = 2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s
    h01, h11 = -2 * s3 + 3 * s2, s3 - s2
    rg = r[:-1, None] + np.outer(h, s)
    ug = (h00 * u[:-1, None] + h10 * (h * du[:-1])[:, None]
          + h01 * u[1:, None] + h11 * (h * du[1:])[:, None])
    wg = 0.5 * np.outer(h, _GAUSS_W)
    return rg, ug, wg


def _line_integral(rg, ug, wg, values) -> float:
    """int_0^1 (...) dr of values given at the Gauss nodes."""
    return float(np.sum(wg * values))


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------

def _check_equation(profile, beta, lam, q, rtol=1e-8):
    """The declared perturbation must reproduce the profile's rhs."""
    rhs = _rhs_vector(profile.spec)
    p = profile.spec.p_main
    probes_r = np.array([0.17, 0.43, 0.71, 0.93])
    probes_u = np.array([0.6, 1.3, 0.9, 1.7])
    want = probes_u ** p + lam * probes_r ** beta * probes_u ** q
    got = rhs(probes_r, probes_u)
    scale = np.abs(want) + np.abs(got) + 1.0
    if np.any(np.abs(got - want) > rtol * scale):
        raise DomainError(
            "profile's rhs is not u^p_main + lam r^beta u^q for the "
            "declared (beta, lam, q)")


def pov_residual(profile: RadialProfile, beta: float, lam: float,
                 q: float) -> float:
    """Normalized defect of the x . grad u identity for a Dirichlet
    solution of -Delta u = u^{p_main} + lam r^beta u^q.

    Returns |LHS - RHS| / (|LHS| + |RHS| + eps); the main-term bracket
    (N/(p+1) - (N-2)/2) int u^{p+1} is included, so subcritical main
    exponents are covered (it vanishes identically at the critical one).
    """
    if not profile.covers_ball(tol=1e-9):
        raise DomainError("pov_residual needs a profile covering [0, 1]")
    if beta < 0 or q < 1:
        raise DomainError("need beta >= 0 and q >= 1")
    _check_equation(profile, beta, lam, q)
    spec = profile.spec
    N, p = spec.N, spec.p_main
    omega = sphere_area(N)
    rg, ug, wg = _profile_gauss(profile)
    up = np.maximum(ug, 0.0)
    rN1 = rg ** (N - 1)

    main_bracket = N / (p + 1.0) - (N - 2.0) / 2.0
    lhs = main_bracket * omega * _line_integral(rg, ug, wg, rN1 * up ** (p + 1.0))
    pert_bracket = (lam * beta / (q + 1.0)
                    + (N / (q + 1.0) - (N - 2.0) / 2.0) * lam)
    lhs += pert_bracket * omega * _line_integral(
        rg, ug, wg, rg ** beta * rN1 * up ** (q + 1.0))

    rhs_val = 0.5 * omega * profile.boundary_slope ** 2
    return abs(lhs - rhs_val) / (abs(lhs) + abs(rhs_val) + 1e-300)


def _identity_terms(profile, psi, terms):
    """Right-hand side of the general radial identity for rhs components
    ``terms`` = [(coefficient model a_j, exponent s_j), ...]."""
    N = profile.spec.N
    rg, ug, wg = _profile_gauss(profile)
    psi_g, dpsi_g, d3psi_g = psi(rg), psi.d1(rg), psi.d3(rg)

    u2_kernel = rg ** (N - 4.0) * (
        rg ** 3 * d3psi_g
        - (N - 1.0) * (N - 3.0) * rg * dpsi_g
        + (N - 1.0) * (N - 3.0) * psi_g)
    total = 0.5 * _line_integral(rg, ug, wg, ug * ug * u2_kernel)

    for a_model, s in terms:
        ag = a_model(rg)
        dag = a_model.derivative(rg)
        kernel = ((s + 3.0) * ag * rg ** (N - 1.0) * dpsi_g
                  - (s - 1.0) * (N - 1.0) * ag * rg ** (N - 2.0) * psi_g
                  + 2.0 * dag * rg ** (N - 1.0) * psi_g)
        total += _line_integral(
            rg, ug, wg, np.abs(ug) ** (s + 1.0) * kernel) / (s + 1.0)
    return total


def general_identity_residual(profile: RadialProfile, psi: TestFunctionPsi,
                              g_model: CoefficientModel | None = None,
                              q: float | None = None) -> float:
    """Normalized defect of the psi-multiplier identity on a Dirichlet
    profile whose rhs is main(r) u^{p_main} + g(r) u^q.

    ``g_model``/``q`` default to lam * k and the pure-power exponent of
    the profile's spec.  Tabulated coefficients are rejected (their
    derivative is not defined pointwise).
    """
    if not profile.covers_ball(tol=1e-9):
        raise DomainError("identity needs a profile covering [0, 1]")
    if abs(psi(0.0)) > 0:
        raise DomainError("psi(0) must vanish")
    spec = profile.spec
    if g_model is None:
        if spec.lam == 0.0 or spec.k.is_zero() or spec.f.is_zero():
            g_model = CoefficientModel.zero()
            q = 1.0 if q is None else q
        else:
            if spec.f.kind != "power":
                raise DomainError("cannot derive g u^q from a non-power nonlinearity")
            g_model = spec.k.scaled(spec.lam)
            q = spec.f.q if q is None else q
    elif q is None:
        raise DomainError("q must accompany an explicit g_model")
    for model in (spec.main_coefficient, g_model):
        if model.kind == "tabulated":
            raise DomainError("identity requires differentiable coefficients")

    terms = [(spec.main_coefficient, spec.p_main)]
    if not g_model.is_zero():
        terms.append((g_model, q))
    rhs_val = _identity_terms(profile, psi, terms)
    lhs = psi(1.0) * profile.boundary_slope ** 2
    return abs(lhs - rhs_val) / (abs(lhs) + abs(rhs_val) + 1e-300)


# --------------------------------------------------------------------------
# the h(r) construction
# --------------------------------------------------------------------------

def h_function(N: int, beta: float, lam: float, a: float, b: float, r):
    """h(r) induced by psi = a r^{N-1} + b r in the critical radial identity
    with g = lam r^beta:

        h = r^{2N-3} [ -lam a (N-2)(2(N-1)+beta) r^beta
                       - lam b beta (N-2) r^{beta-N+2} - 2a(N-1)(N-2) ].

    Written with combined powers (all exponents >= N-1), so there is no
    singularity at r = 0 for beta >= 0.
    """
    if N < 3:
        raise DomainError("N must be >= 3")
    if beta < 0:
        raise DomainError("beta must be >= 0")
    r = np.asarray(r, dtype=float)
    c1 = -lam * a * (N - 2.0) * (2.0 * (N - 1.0) + beta)
    c2 = -lam * b * beta * (N - 2.0)
    c3 = -2.0 * a * (N - 1.0) * (N - 2.0)
    out = (c1 * r ** (2.0 * N - 3.0 + beta)
           + c2 * r ** (N - 1.0 + beta)
           + c3 * r ** (2.0 * N - 3.0))
    return out if out.ndim else float(out)


def _h_bracket(N, beta, lam, r):
    """The bracket h / r^{2N-3} with the certificate convention a=-1, b=1."""
    r = np.asarray(r, dtype=float)
    out = (lam * (N - 2.0) * (2.0 * N - 2.0 + beta) * r ** beta
           - lam * beta * (N - 2.0) * r ** (beta - N + 2.0)
           + 2.0 * (N - 1.0) * (N - 2.0))
    return out if out.ndim else float(out)


def min_h(N: int, beta: float, lam: float) -> tuple:
    """Minimum over [0, 1] of the bracket h(r)/r^{2N-3} for psi = -r^{N-1} + r.

    The bracket's sign decides the sign of h on (0, 1] (h itself vanishes
    at the origin for every parameter choice); its stationary point has the
    lambda-independent closed form r^{N-2} = (beta-N+2)/(2N-2+beta).
    Returns (argmin radius, minimum value).
    """
    if N < 3:
        raise DomainError("N must be >= 3")
    if beta < N - 2:
        raise DomainError("the test-function construction needs beta >= N-2")
    if lam < 0 or not math.isfinite(lam):
        raise DomainError("lam must be finite and >= 0")
    const = 2.0 * (N - 1.0) * (N - 2.0)
    if lam == 0.0:
        return 0.0, const
    if beta == N - 2:
        # bracket is increasing; its infimum sits at the origin
        return 0.0, const - lam * beta * (N - 2.0)
    r_star = ((beta - N + 2.0) / (2.0 * N - 2.0 + beta)) ** (1.0 / (N - 2.0))
    candidates = [0.0, 1.0]
    if 0.0 < r_star < 1.0:
        candidates.append(r_star)
    vals = [(float(_h_bracket(N, beta, lam, r)), r) for r in candidates]
    h_min, r_min = min(vals)
    return r_min, h_min


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

@dataclass
class Certificate:
    """Machine-checked instantiation of a nonexistence theorem, or ``none``.

    ``kind`` is ``pohozaev_sign`` (sign of the boundary-flux identity),
    ``radial_test_function`` (h >= 0 construction) or ``none``.  Every
    intermediate quantity is recorded for audit.
    """

    kind: str
    N: int
    beta: float
    lam: float
    q: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def is_nonexistence(self) -> bool:
        return self.kind != "none"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "N": self.N, "beta": self.beta,
                "lambda": self.lam, "q": self.q, "verdict": self.verdict,
                "details": self.details}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @staticmethod
    def from_dict(d: dict) -> "Certificate":
        return Certificate(kind=d["kind"], N=d["N"], beta=d["beta"],
                           lam=d["lambda"], q=d["q"], verdict=d["verdict"],
                           details=d.get("details", {}))


def certify_nonexistence(N: int, beta: float, lam: float, q: float) -> Certificate:
    """Certificate of nonexistence for -Delta u = u_+^{(N+2)/(N-2)} family
    perturbations with g = lam r^beta acting through u^q.

    Issued for the closed-form power-law family only; a ``none`` kind is a
    value (existence may well hold there), not an error.
    """
    if N < 3:
        raise DomainError("N must be >= 3")
    for name, v in (("beta", beta), ("lambda", lam), ("q", q)):
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite")
    if beta < 0 or q < 1:
        raise DomainError("need beta >= 0 and q >= 1")

    crit = critical_exponent(N, 0.0)
    crit_pert = critical_exponent(N, beta)
    sign_value = ((beta + N) / (q + 1.0) - (N - 2.0) / 2.0) * lam
    tol = 1e-12

    if lam <= 0 and q <= crit_pert * (1 + tol):
        return Certificate(
            "pohozaev_sign", N, beta, lam, q,
            "no solution: nonpositive interior term forces zero boundary flux",
            {"case": "i", "sign_value": sign_value, "critical_pert": crit_pert})
    if lam >= 0 and q >= crit_pert * (1 - tol):
        return Certificate(
            "pohozaev_sign", N, beta, lam, q,
            "no solution: nonpositive interior term forces zero boundary flux",
            {"case": "ii", "sign_value": sign_value, "critical_pert": crit_pert})
    if beta == 0 and math.isclose(q, crit, rel_tol=1e-9):
        return Certificate(
            "pohozaev_sign", N, beta, lam, q,
            "no solution: purely critical right-hand side on the ball",
            {"case": "iii", "sign_value": 0.0, "critical_pert": crit_pert})

    if beta >= N - 2 and lam >= 0 and math.isclose(q, crit, rel_tol=1e-9):
        lam_star = lambda_star(N, beta)
        if lam <= lam_star * (1 + 1e-12):
            r_min, h_min = min_h(N, beta, lam)
            if h_min >= -1e-12:
                return Certificate(
                    "radial_test_function", N, beta, lam, q,
                    "no solution: h >= 0 on [0, 1] for psi = -r^{N-1} + r",
                    {"a": -1.0, "b": 1.0, "lambda_star": lam_star,
                     "h_min": h_min, "r_min": r_min})

    return Certificate("none", N, beta, lam, q,
                       "no certificate applies (existence is expected for "
                       "large positive perturbations)",
                       {"sign_value": sign_value, "critical_pert": crit_pert})
