"""Radial kernel profiles and the paired normalization constants.

A profile is a one-dimensional, even, nonnegative function on [0, 1] with
value 0 at 1; the n-dimensional kernel it induces is x -> value(|x|).  The
curvature formulas consume a pair (rho, xi) together with the constants

    C_rho = d * omega_d * int_0^1 rho(r) r^{d-1} dr       (same for xi),

where omega_d is the volume of the d-dimensional unit ball.  Profiles carry
analytic derivatives; finite differences are used only as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotNKPEligible, QuadratureFailure

PAIR_TOKENS = ("tent", "tent-nkp", "exp", "exp-nkp")


def ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d: pi^{d/2} / Gamma(d/2 + 1)."""
    if d == 1:
        return 2.0
    if d == 2:
        return math.pi
    if d == 3:
        return 4.0 * math.pi / 3.0
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _scalar_or_array(out, scalar):
    return float(out) if scalar else out


@dataclass(frozen=True)
class KernelProfile:
    """Radial profile on [0, 1] with analytic derivatives.

    `regularity` is an annotation tag in {"Lipschitz", "W1inf", "W2inf"}
    describing the induced radial kernel; it does not change any computation.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    regularity: str = "Lipschitz"

    def __call__(self, r):
        return self.value(r)


def _tent_value(r):
    r = np.abs(np.asarray(r, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.where(r < 1.0, 1.0 - r, 0.0)
    return _scalar_or_array(out[0] if scalar else out, scalar)


def _tent_derivative(r):
    r = np.abs(np.asarray(r, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.where(r < 1.0, -1.0, 0.0)
    return _scalar_or_array(out[0] if scalar else out, scalar)


def _tent_second(r):
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    out = np.zeros_like(np.atleast_1d(r))
    return _scalar_or_array(out[0] if scalar else out, scalar)


def _exp_parts(r):
    """Masked helpers for the bump profile exp(-1/(1-r^2))."""
    r = np.abs(np.asarray(r, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    mask = r < 1.0
    u = np.empty_like(r)
    u[mask] = 1.0 - r[mask] ** 2
    return r, mask, u, scalar


def _exp_value(r):
    r, mask, u, scalar = _exp_parts(r)
    out = np.zeros_like(r)
    out[mask] = np.exp(-1.0 / u[mask])
    return _scalar_or_array(out[0] if scalar else out, scalar)


def _exp_derivative(r):
    r, mask, u, scalar = _exp_parts(r)
    out = np.zeros_like(r)
    um = u[mask]
    out[mask] = -2.0 * r[mask] / um ** 2 * np.exp(-1.0 / um)
    return _scalar_or_array(out[0] if scalar else out, scalar)


def _exp_second(r):
    r, mask, u, scalar = _exp_parts(r)
    out = np.zeros_like(r)
    rm, um = r[mask], u[mask]
    gpp = -2.0 * (1.0 + 3.0 * rm ** 2) / um ** 3
    gp2 = 4.0 * rm ** 2 / um ** 4
    out[mask] = (gpp + gp2) * np.exp(-1.0 / um)
    return _scalar_or_array(out[0] if scalar else out, scalar)


def make_profile(name: str) -> KernelProfile:
    """Built-in profiles: `tent` (1 - r) and `exp` (exp(-1/(1-r^2)))."""
    if name == "tent":
        return KernelProfile("tent", _tent_value, _tent_derivative, _tent_second,
                             regularity="W1inf")
    if name == "exp":
        return KernelProfile("exp", _exp_value, _exp_derivative, _exp_second,
                             regularity="W2inf")
    raise ValueError(f"unknown profile {name!r}; expected 'tent' or 'exp'")


def nkp(rho: KernelProfile, n: int) -> KernelProfile:
    """Companion profile xi(s) = -s * rho'(s) / n.

    Requires rho monotone nonincreasing on [0, 1] (checked on a grid) with
    analytic first and second derivatives; the returned profile is
    nonnegative and vanishes at 0 and at 1.
    """
    if rho.derivative is None or rho.second_derivative is None:
        raise NotNKPEligible(f"profile {rho.name!r} lacks analytic derivatives")
    grid = np.linspace(0.0, 1.0, 1001)
    vals = np.atleast_1d(rho.value(grid))
    if np.any(np.diff(vals) > 1e-12):
        raise NotNKPEligible(f"profile {rho.name!r} is not monotone nonincreasing")

    d1, d2 = rho.derivative, rho.second_derivative

    def value(s):
        s = np.asarray(s, dtype=float)
        return -s * d1(s) / n

    def derivative(s):
        s = np.asarray(s, dtype=float)
        return -(d1(s) + s * d2(s)) / n

    # The companion of a merely W1inf profile can jump at the support edge;
    # tag it with the weakest class.
    reg = "W1inf" if rho.regularity == "W2inf" else "Lipschitz"
    return KernelProfile(f"{rho.name}-nkp", value, derivative, regularity=reg)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-13,
                     max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature by interval bisection.

    Absolute tolerance `tol`; raises QuadratureFailure when the recursion
    hits `max_depth` without converging.
    """
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        if depth >= max_depth:
            raise QuadratureFailure(f"no convergence on [{a}, {b}] at depth {depth}")
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def _moment(profile: KernelProfile, d: int, tol: float) -> float:
    # evaluate the support edge as a left limit so profiles that jump at 1
    # (companions of merely W1inf profiles) still integrate cleanly
    def f(r):
        return float(profile.value(min(r, _BELOW_ONE))) * r ** (d - 1)

    return adaptive_simpson(f, 0.0, 1.0, tol=tol)


def kernel_constants(rho: KernelProfile, xi: KernelProfile, d: int,
                     tol: float = 1e-13):
    """(C_rho, C_xi) for mass dimension d; quadrature abs tolerance `tol`."""
    if d < 1:
        raise ValueError("mass dimension d must be >= 1")
    w = d * ball_volume(d)
    return w * _moment(rho, d, tol), w * _moment(xi, d, tol)


def normalization_integral(profile: KernelProfile, n: int, tol: float = 1e-13) -> float:
    """n * omega_n * int_0^1 profile(t) t^{n-1} dt.

    Equals 1 exactly when the induced radial kernel integrates to 1 over
    R^n.  The curvature formulas are scale invariant, so profiles are not
    required to be normalized; this is a diagnostic only.
    """
    return n * ball_volume(n) * _moment(profile, n, tol)


@dataclass(frozen=True)
class KernelPair:
    """A (rho, xi) profile pair with its constants for dimensions (d, n)."""

    rho: KernelProfile
    xi: KernelProfile
    C_rho: float
    C_xi: float
    d: int
    n: int
    is_nkp: bool = False

    def __post_init__(self):
        if not (self.C_rho > 0 and self.C_xi > 0):
            raise ValueError("kernel constants must be positive")

    @property
    def name(self) -> str:
        return f"({self.rho.name}, {self.xi.name})"


def make_pair(token: str, d: int, n: int) -> KernelPair:
    """Build a kernel pair from a CLI token: tent, tent-nkp, exp, exp-nkp."""
    if token not in PAIR_TOKENS:
        raise ValueError(f"unknown kernel pair {token!r}; expected one of {PAIR_TOKENS}")
    base = make_profile(token.split("-")[0])
    if token.endswith("-nkp"):
        xi = nkp(base, n)
        is_nkp = True
    else:
        xi = base
        is_nkp = False
    c_rho, c_xi = kernel_constants(base, xi, d)
    return KernelPair(base, xi, c_rho, c_xi, d, n, is_nkp)


def nkp_residual(pair: KernelPair, nodes: int = 1001) -> float:
    """Sup over a grid of |s rho'(s) + d (C_rho/C_xi) xi(s)| * s^{d-1}.

    Vanishes identically (up to quadrature error in the constants) exactly
    when the pair has the companion structure xi = -s rho'/n, because then
    C_rho/C_xi = n/d.
    """
    s = np.linspace(0.0, 1.0, nodes)
    ratio = pair.C_rho / pair.C_xi
    integrand = s * np.atleast_1d(pair.rho.derivative(s)) \
        + pair.d * ratio * np.atleast_1d(pair.xi.value(s))
    weight = np.ones_like(s) if pair.d == 1 else s ** (pair.d - 1)
    return float(np.max(np.abs(integrand) * weight))
