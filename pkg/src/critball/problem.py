"""Equation family, coefficients, nonlinearities and closed-form thresholds.

The right-hand side solved throughout the package is

    -u'' - (N-1)/r u' = main(r) * u_+^p  +  lam * k(r) * f(u),

on the unit ball, where ``main`` is a radial coefficient (typically
``1 + g(r)`` with ``g`` a power law, or ``r^alpha`` in Henon mode), and
``lam * k * f`` is a lower-order perturbation.  Negative parts of ``u``
contribute nothing: both nonlinear terms use the positive part.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError

__all__ = [
    "CoefficientModel",
    "NonlinearityModel",
    "ProblemSpec",
    "AssumptionCheck",
    "AssumptionReport",
    "eval_rhs",
    "validate_assumptions",
    "critical_exponent",
    "lambda_star",
    "f4_threshold",
]


# --------------------------------------------------------------------------
# coefficient models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientModel:
    """Radial coefficient on [0, 1].

    Kinds: ``zero``, ``constant`` (value = amplitude), ``power``
    (value = offset + amplitude * r**exponent) and ``tabulated``
    (piecewise-linear through (radii, values)).
    """

    kind: str
    amplitude: float = 0.0
    exponent: float = 0.0
    offset: float = 0.0
    radii: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "power", "tabulated"):
            raise DomainError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "power" and self.exponent < 0:
            raise DomainError("power-law exponent must be >= 0")
        if self.kind == "tabulated":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.size < 2 or r.size != v.size:
                raise FormatError("tabulated model needs matching radii/values, length >= 2")
            if np.any(np.diff(r) <= 0):
                raise FormatError("tabulated radii must be strictly increasing")
            if r[0] < 0 or r[-1] > 1:
                raise FormatError("tabulated radii must lie in [0, 1]")
            if not np.all(np.isfinite(v)):
                raise FormatError("tabulated values must be finite")
            object.__setattr__(self, "radii", tuple(r))
            object.__setattr__(self, "values", tuple(v))
        for name in ("amplitude", "exponent", "offset"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    # constructors ---------------------------------------------------------

    @staticmethod
    def zero() -> "CoefficientModel":
        return CoefficientModel("zero")

    @staticmethod
    def constant(a: float) -> "CoefficientModel":
        return CoefficientModel("constant", amplitude=a)

    @staticmethod
    def power(a: float, beta: float, offset: float = 0.0) -> "CoefficientModel":
        return CoefficientModel("power", amplitude=a, exponent=beta, offset=offset)

    @staticmethod
    def tabulated(radii, values) -> "CoefficientModel":
        return CoefficientModel("tabulated", radii=tuple(radii), values=tuple(values))

    # evaluation -----------------------------------------------------------

    def __call__(self, r):
        """Evaluate at radius r (scalar or array); power laws extend naturally
        beyond r = 1, tabulated models extend by their end values."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(r)
        elif self.kind == "constant":
            out = np.full_like(r, self.amplitude)
        elif self.kind == "power":
            out = self.offset + self.amplitude * np.power(r, self.exponent)
        else:
            out = np.interp(r, self.radii, self.values)
        return out if out.ndim else float(out)

    def derivative(self, r):
        """Radial derivative; closed form except for tabulated models, which
        use the slope of the containing segment."""
        r = np.asarray(r, dtype=float)
        if self.kind in ("zero", "constant"):
            out = np.zeros_like(r)
        elif self.kind == "power":
            b = self.exponent
            if b == 0:
                out = np.zeros_like(r)
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    out = self.amplitude * b * np.power(r, b - 1.0)
                if b < 1:
                    out = np.where(r == 0, 0.0 if self.amplitude == 0 else np.inf, out)
        else:
            rr = np.asarray(self.radii)
            vv = np.asarray(self.values)
            slopes = np.diff(vv) / np.diff(rr)
            idx = np.clip(np.searchsorted(rr, r, side="right") - 1, 0, len(slopes) - 1)
            out = slopes[idx]
        return out if out.ndim else float(out)

    def min_on_ball(self) -> float:
        """Exact minimum over [0, 1] for closed-form kinds; nodal minimum
        for tabulated ones (linear interpolation attains it at a node)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "power":
            if self.exponent == 0:
                return self.offset + self.amplitude
            return min(self.offset, self.offset + self.amplitude)
        return float(min(self.values))

    def max_on_ball(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "power":
            if self.exponent == 0:
                return self.offset + self.amplitude
            return max(self.offset, self.offset + self.amplitude)
        return float(max(self.values))

    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant":
            return self.amplitude == 0
        if self.kind == "power":
            return self.amplitude == 0 and self.offset == 0
        return all(v == 0 for v in self.values)

    def shifted(self, delta: float) -> "CoefficientModel":
        """The model plus a constant (used to pass between 1+g and g)."""
        if self.kind == "zero":
            return CoefficientModel.constant(delta) if delta else self
        if self.kind == "constant":
            return CoefficientModel.constant(self.amplitude + delta)
        if self.kind == "power":
            return CoefficientModel.power(self.amplitude, self.exponent, self.offset + delta)
        return CoefficientModel.tabulated(self.radii, tuple(v + delta for v in self.values))

    def scaled(self, c: float) -> "CoefficientModel":
        """The model multiplied by a constant."""
        if self.kind == "zero" or c == 0:
            return CoefficientModel.zero()
        if self.kind == "constant":
            return CoefficientModel.constant(c * self.amplitude)
        if self.kind == "power":
            return CoefficientModel.power(c * self.amplitude, self.exponent, c * self.offset)
        return CoefficientModel.tabulated(self.radii, tuple(c * v for v in self.values))

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant":
            return {"kind": "constant", "amplitude": self.amplitude}
        if self.kind == "power":
            d = {"kind": "power", "amplitude": self.amplitude, "exponent": self.exponent}
            if self.offset:
                d["offset"] = self.offset
            return d
        return {"kind": "tabulated", "radii": list(self.radii), "values": list(self.values)}

    @staticmethod
    def from_dict(d: dict) -> "CoefficientModel":
        kind = d.get("kind")
        if kind == "zero":
            return CoefficientModel.zero()
        if kind == "constant":
            return CoefficientModel.constant(float(d["amplitude"]))
        if kind == "power":
            return CoefficientModel.power(
                float(d["amplitude"]), float(d["exponent"]), float(d.get("offset", 0.0))
            )
        if kind == "tabulated":
            return CoefficientModel.tabulated(d["radii"], d["values"])
        raise FormatError(f"unknown coefficient kind {kind!r}")


@dataclass(frozen=True)
class NonlinearityModel:
    """Lower-order nonlinearity f(t); pure power f(t) = t_+^q or zero.

    ``theta`` is the declared superquadraticity constant for the
    f(t) t >= theta F(t) inequality; for a pure power it defaults to q+1,
    which makes the inequality an identity.
    """

    kind: str
    q: float = 1.0
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "power"):
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power":
            if self.q < 1:
                raise DomainError("pure-power exponent must be >= 1")
            if self.theta is None:
                object.__setattr__(self, "theta", self.q + 1.0)
        elif self.theta is None:
            object.__setattr__(self, "theta", 0.0)

    @staticmethod
    def zero() -> "NonlinearityModel":
        return NonlinearityModel("zero")

    @staticmethod
    def pure_power(q: float, theta: float | None = None) -> "NonlinearityModel":
        return NonlinearityModel("power", q=q, theta=theta)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(t)
        else:
            out = np.where(t > 0, np.power(np.maximum(t, 0.0), self.q), 0.0)
        return out if out.ndim else float(out)

    def F(self, t):
        """Primitive of f with F(0) = 0."""
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(t)
        else:
            out = np.power(np.maximum(t, 0.0), self.q + 1.0) / (self.q + 1.0)
        return out if out.ndim else float(out)

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": "power", "q": self.q, "theta": self.theta}

    @staticmethod
    def from_dict(d: dict) -> "NonlinearityModel":
        kind = d.get("kind")
        if kind == "zero":
            return NonlinearityModel.zero()
        if kind == "power":
            return NonlinearityModel.pure_power(float(d["q"]), d.get("theta"))
        raise FormatError(f"unknown nonlinearity kind {kind!r}")


# --------------------------------------------------------------------------
# the problem itself
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Full right-hand side data: dimension, main term and perturbation."""

    N: int
    p_main: float | None = None
    main_coefficient: CoefficientModel = field(default_factory=lambda: CoefficientModel.constant(1.0))
    lam: float = 0.0
    k: CoefficientModel = field(default_factory=CoefficientModel.zero)
    f: NonlinearityModel = field(default_factory=NonlinearityModel.zero)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise DomainError("dimension N must be an integer >= 3")
        object.__setattr__(self, "N", int(self.N))
        if self.p_main is None:
            object.__setattr__(self, "p_main", critical_exponent(self.N, 0.0))
        if not self.p_main > 1:
            raise DomainError("main exponent must be > 1")
        if not math.isfinite(self.lam):
            raise DomainError("lambda must be finite")
        if self.main_coefficient.min_on_ball() < 0:
            raise DomainError("main coefficient must be nonnegative on [0, 1]")

    # common constructions -------------------------------------------------

    @staticmethod
    def pure_power(N: int, p: float | None = None,
                   coefficient: float = 1.0) -> "ProblemSpec":
        """-Δu = coefficient * u^p (critical p by default)."""
        return ProblemSpec(N=N, p_main=p,
                           main_coefficient=CoefficientModel.constant(coefficient))

    @staticmethod
    def with_g(N: int, g: CoefficientModel) -> "ProblemSpec":
        """-Δu = (1 + g(r)) u^{(N+2)/(N-2)}."""
        return ProblemSpec(N=N, main_coefficient=g.shifted(1.0))

    @staticmethod
    def henon(N: int, alpha: float, p: float) -> "ProblemSpec":
        """-Δu = r^alpha u^p."""
        return ProblemSpec(N=N, p_main=p,
                           main_coefficient=CoefficientModel.power(1.0, alpha))

    @staticmethod
    def perturbed(N: int, lam: float, k: CoefficientModel, f: NonlinearityModel,
                  p: float | None = None) -> "ProblemSpec":
        """-Δu = u^p + lam k(r) f(u) (critical p by default)."""
        return ProblemSpec(N=N, p_main=p, lam=lam, k=k, f=f)

    @property
    def g_model(self) -> CoefficientModel:
        """The deviation of the main coefficient from 1 (the g in 1+g)."""
        return self.main_coefficient.shifted(-1.0)

    def is_critical_main(self, rtol: float = 1e-12) -> bool:
        crit = critical_exponent(self.N, 0.0)
        return abs(self.p_main - crit) <= rtol * crit

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dimension": self.N,
            "main_exponent": self.p_main,
            "main_coefficient": self.main_coefficient.to_dict(),
            "lambda": self.lam,
            "k": self.k.to_dict(),
            "f": self.f.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ProblemSpec":
        try:
            return ProblemSpec(
                N=int(d["dimension"]),
                p_main=d.get("main_exponent"),
                main_coefficient=CoefficientModel.from_dict(
                    d.get("main_coefficient", {"kind": "constant", "amplitude": 1.0})),
                lam=float(d.get("lambda", 0.0)),
                k=CoefficientModel.from_dict(d.get("k", {"kind": "zero"})),
                f=NonlinearityModel.from_dict(d.get("f", {"kind": "zero"})),
            )
        except KeyError as e:
            raise FormatError(f"problem config missing key {e}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @staticmethod
    def load(path) -> "ProblemSpec":
        with open(path) as fh:
            return ProblemSpec.from_dict(json.load(fh))


def eval_rhs(spec: ProblemSpec, r: float, u: float) -> float:
    """Right-hand side main(r) u_+^p + lam k(r) f(u) at a single point.

    Raises DomainError for non-finite u or r outside [0, 1].
    """
    if not (math.isfinite(r) and 0.0 <= r <= 1.0):
        raise DomainError(f"radius {r} outside [0, 1]")
    if not math.isfinite(u):
        raise DomainError("u must be finite")
    return _rhs_closure(spec)(r, u)


def _coef_scalar(model: CoefficientModel):
    """Specialized scalar evaluator (hot path of the ODE integrator)."""
    if model.kind == "zero":
        return lambda r: 0.0
    if model.kind == "constant":
        a = model.amplitude
        return lambda r: a
    if model.kind == "power":
        c, a, b = model.offset, model.amplitude, model.exponent
        if b == 0:
            tot = c + a
            return lambda r: tot
        return lambda r: c + a * r ** b
    radii = np.asarray(model.radii)
    values = np.asarray(model.values)
    return lambda r: float(np.interp(r, radii, values))


def _rhs_closure(spec: ProblemSpec):
    """Fast evaluator of the rhs, usable beyond r = 1 for shooting."""
    main_s = _coef_scalar(spec.main_coefficient)
    p = spec.p_main
    lam, k, f = spec.lam, spec.k, spec.f
    if lam == 0.0 or k.is_zero() or f.is_zero():
        def rhs(r, u):
            return main_s(r) * u ** p if u > 0.0 else 0.0
        return rhs

    k_s = _coef_scalar(k)
    if f.kind == "power":
        q = f.q

        def rhs(r, u):
            if u <= 0.0:
                return 0.0
            return main_s(r) * u ** p + lam * k_s(r) * u ** q
        return rhs

    def rhs(r, u):
        if u <= 0.0:
            return 0.0
        return main_s(r) * u ** p + lam * k_s(r) * f.f(u)
    return rhs


def _rhs_vector(spec: ProblemSpec):
    """Vectorized rhs over arrays of radii and values."""
    main = spec.main_coefficient
    p = spec.p_main
    lam, k, f = spec.lam, spec.k, spec.f
    trivial = lam == 0.0 or k.is_zero() or f.is_zero()

    def rhs(r, u):
        up = np.maximum(np.asarray(u, dtype=float), 0.0)
        val = main(r) * up ** p
        if not trivial:
            val = val + lam * k(r) * f.f(u)
        return val

    return rhs


# --------------------------------------------------------------------------
# closed-form thresholds
# --------------------------------------------------------------------------

def critical_exponent(N: int, beta: float = 0.0) -> float:
    """(N+2+2*beta)/(N-2), the radial compactness threshold exponent."""
    if N < 3:
        raise DomainError("N must be >= 3")
    if beta < 0:
        raise DomainError("beta must be >= 0")
    return (N + 2.0 + 2.0 * beta) / (N - 2.0)


def lambda_star(N: int, beta: float) -> float:
    """Largest perturbation strength covered by the radial test-function
    nonexistence certificate, for g(r) = lambda r^beta with beta >= N-2.
    """
    if N < 3:
        raise DomainError("N must be >= 3")
    if beta < N - 2:
        raise DomainError("lambda_star requires beta >= N-2")
    base = 2.0 * (N - 1.0) / (N - 2.0)
    if beta == N - 2:
        return base
    e = (beta - N + 2.0) / (N - 2.0)
    return base * ((2.0 * N - 2.0 + beta) / (beta - N + 2.0)) ** e


def f4_threshold(N: int, gamma: float) -> float:
    """max{1, (2*gamma+6-N)/(N-2)}: the growth power above which the
    concentration integral criterion diverges."""
    if N < 3:
        raise DomainError("N must be >= 3")
    if gamma <= 0:
        raise DomainError("gamma must be > 0")
    return max(1.0, (2.0 * gamma + 6.0 - N) / (N - 2.0))


# --------------------------------------------------------------------------
# assumption checking
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheck:
    """Verdict for one structural assumption.

    ``ok`` is True/False when decided, None when not decidable from the
    model (tabulated growth conditions, declared-only smoothness).
    """

    ok: bool | None
    note: str = ""


@dataclass
class AssumptionReport:
    """Flags k1-k4, f1-f5, g1-g3 with witnesses or counterexamples."""

    checks: dict = field(default_factory=dict)

    def ok(self, name: str) -> bool | None:
        return self.checks[name].ok

    def note(self, name: str) -> str:
        return self.checks[name].note

    def all_true(self, *names) -> bool:
        return all(self.checks[n].ok is True for n in names)

    def to_dict(self) -> dict:
        return {n: {"ok": c.ok, "note": c.note} for n, c in sorted(self.checks.items())}


_SAMPLE_GRID = np.linspace(0.0, 1.0, 257)


def k_assumptions(k: CoefficientModel) -> dict:
    """k1-k4 for a perturbation coefficient."""
    out = {}
    kmin, kmax = k.min_on_ball(), k.max_on_ball()
    nonneg = kmin >= 0
    nontrivial = not k.is_zero()
    out["k1"] = AssumptionCheck(
        bool(nonneg and nontrivial),
        f"min={kmin:.6g}, max={kmax:.6g}" + ("" if nontrivial else ", identically zero"))

    if k.kind == "power":
        beta = k.exponent
        vanishes = k.offset == 0 and beta > 0
        out["k2"] = AssumptionCheck(
            bool(vanishes or k.is_zero()),
            f"k(0)={k(0.0):.6g}" + (f", beta={beta:g}" if vanishes else ""))
        lower = k.offset == 0 and k.amplitude > 0 and beta > 0
        out["k3"] = AssumptionCheck(
            bool(lower), f"gamma=beta={beta:g}" if lower else "no positive power lower bound")
    elif k.kind == "constant":
        out["k2"] = AssumptionCheck(k.amplitude == 0, f"k(0)={k.amplitude:g}")
        out["k3"] = AssumptionCheck(
            k.amplitude > 0,
            "constant lower bound, any gamma works" if k.amplitude > 0 else "k not positive near 0")
    elif k.kind == "zero":
        out["k2"] = AssumptionCheck(True, "k identically zero")
        out["k3"] = AssumptionCheck(False, "k identically zero")
    else:
        v0 = k(0.0)
        out["k2"] = AssumptionCheck(
            True if v0 == 0 else False,
            f"tabulated, k(0)={v0:.6g}; piecewise-linear gives beta=1" if v0 == 0
            else f"tabulated, k(0)={v0:.6g} != 0")
        near = k(_SAMPLE_GRID[1:32])
        out["k3"] = AssumptionCheck(
            None if np.all(near > 0) else False,
            "positive on sampled (0,delta); growth rate not decidable from samples"
            if np.all(near > 0) else
            f"nonpositive sample near 0 at r={_SAMPLE_GRID[1:32][np.argmin(near)]:.4g}")
    out["k4"] = AssumptionCheck(bool(kmax > 0), f"max k = {kmax:.6g}")
    return out


def f_assumptions(f: NonlinearityModel, N: int, beta: float | None,
                  gamma: float | None) -> dict:
    """f1-f5; growth comparisons use beta/gamma from the k model when known."""
    out = {}
    if f.kind == "zero":
        out["f1"] = AssumptionCheck(True, "f identically zero")
        out["f2"] = AssumptionCheck(True, "trivial limits")
        out["f3"] = AssumptionCheck(True, "0 >= theta*0")
        out["f4"] = AssumptionCheck(False, "f/t^p -> 0")
        out["f5"] = AssumptionCheck(False, "f vanishes on (0, c) for every c")
        return out

    q = f.q
    out["f1"] = AssumptionCheck(True, f"t_+^{q:g} is nonnegative, zero for t <= 0")
    if beta is None:
        out["f2"] = AssumptionCheck(
            None if q > 1 else False,
            "f/t -> 0 iff q > 1; upper growth undecidable without beta"
            if q > 1 else "q = 1 gives f(t)/t -> 1 != 0")
    else:
        qc = critical_exponent(N, beta)
        ok = q > 1 and q < qc
        out["f2"] = AssumptionCheck(
            bool(ok), f"need 1 < q < {qc:g}, have q = {q:g}")
    ar_ok = f.theta > 2 and f.theta <= q + 1
    out["f3"] = AssumptionCheck(
        bool(ar_ok),
        f"theta = {f.theta:g}; pure power satisfies f t = (q+1) F with q+1 = {q + 1:g}")
    if gamma is None:
        out["f4"] = AssumptionCheck(None, "gamma unknown, threshold undecidable")
    else:
        p = f4_threshold(N, gamma)
        out["f4"] = AssumptionCheck(bool(q > p), f"need q > {p:g}, have q = {q:g}")
    out["f5"] = AssumptionCheck(True, "t_+^q > 0 for all t > 0")
    return out


def g_assumptions(g: CoefficientModel, N: int) -> dict:
    """g1-g3 for the deviation g of the main factor 1+g."""
    out = {}
    gmin = g.min_on_ball()
    out["g1"] = AssumptionCheck(bool(gmin >= -1), f"min g = {gmin:.6g}")
    g0 = g(0.0)
    if g.kind in ("zero", "constant", "power"):
        out["g2"] = AssumptionCheck(g0 == 0, f"g(0) = {g0:.6g}")
        if g.kind == "power" and g.offset == 0 and g.amplitude > 0 and 0 < g.exponent < N - 2:
            out["g3"] = AssumptionCheck(True, f"gamma = {g.exponent:g} in (0, {N - 2})")
        else:
            out["g3"] = AssumptionCheck(False, "no power lower bound with gamma in (0, N-2)")
    else:
        out["g2"] = AssumptionCheck(g0 == 0, f"tabulated, g(0) = {g0:.6g}")
        near = g(_SAMPLE_GRID[1:32])
        out["g3"] = AssumptionCheck(
            None if np.all(near > 0) else False,
            "positive on sampled (0,delta); growth rate not decidable from samples"
            if np.all(near > 0) else "nonpositive sample near 0")
    return out


def validate_assumptions(spec: ProblemSpec) -> AssumptionReport:
    """Decide every structural flag for the spec's models.

    Power-law and constant models are decided in closed form; tabulated
    models get sign checks only, with growth conditions left undecided.
    """
    report = AssumptionReport()
    report.checks.update(k_assumptions(spec.k))
    beta = spec.k.exponent if (spec.k.kind == "power" and spec.k.offset == 0
                               and spec.k.exponent > 0) else None
    gamma = beta if (beta is not None and spec.k.amplitude > 0) else None
    report.checks.update(f_assumptions(spec.f, spec.N, beta, gamma))
    report.checks.update(g_assumptions(spec.g_model, spec.N))
    return report
