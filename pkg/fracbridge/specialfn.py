# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Special functions and singular quadrature.

The Beta function and the double integral against the fractional Brownian motion kernel
|u - v|^(2H - 2) are needed by every limit constant and by the covariance oracle used in
the tests. Both singularities of the kernel integral (on the diagonal and at the right
endpoint of the interval) are integrable, but they break naive product rules, so the
integral is evaluated with QUADPACK's algebraic-weight rules after a change of variables
which moves each singularity to an endpoint.

"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy import integrate, special


logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """A parameter lies outside the domain of an operation."""

    pass


class QuadratureError(RuntimeError):
    """An adaptive quadrature did not reach the requested tolerance."""

    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature.

    Parameters
    ----------
    abs_tol, rel_tol : float
        Target absolute and relative error, both strictly positive.
    max_refinements : int
        Maximum number of subintervals QUADPACK may create in each integral.

    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_refinements: int = 30

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("Quadrature tolerances must be strictly positive.")
        if self.max_refinements < 1:
            raise DomainError("max_refinements must be at least one.")


@dataclass(frozen=True)
class Weight:
    """A weight function with an optional power singularity at the right endpoint.

    On an interval [0, t] the weight takes the value ``func(u) * (t - u)**exponent``. The
    function itself should be smooth between the given breakpoints; jumps (such as those
    of an indicator function) must be listed in ``breakpoints`` so the quadrature can
    split there.

    """

    func: object
    exponent: float = 0.0
    breakpoints: tuple = field(default=())

    def __post_init__(self):
        if self.exponent <= -1:
            raise DomainError(
                f"Weight exponent {self.exponent} is not integrable (must be > -1)."
            )

    @classmethod
    def coerce(cls, weight):
        """Wrap a plain callable as a weight without singularity."""
        if isinstance(weight, cls):
            return weight
        if not callable(weight):
            raise TypeError(f"Cannot use {weight!r} as a weight function.")
        return cls(weight)

    @classmethod
    def constant(cls, value=1.0):
        return cls(lambda u: value)

    @classmethod
    def indicator(cls, upper):
        """The indicator of [0, upper]."""
        return cls(lambda u: 1.0 if u <= upper else 0.0, breakpoints=(upper,))


def log_beta(a, b):
    """Logarithm of the Beta function.

    Raises
    ------
    DomainError
        Either argument is not strictly positive.

    """
    if not (a > 0 and b > 0):
        raise DomainError(f"Beta function requires a > 0 and b > 0 (got {a}, {b}).")
    return float(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b))


def beta(a, b):
    """The Beta function β(a, b) = ∫₀¹ x^(a-1) (1-x)^(b-1) dx.

    This is evaluated through log-Gamma, which keeps full relative accuracy for the small
    arguments (such as 2 - 2H - α close to zero) that appear in the limit constants.

    Parameters
    ----------
    a, b : float
        Strictly positive arguments.

    Returns
    -------
    float

    Raises
    ------
    DomainError
        Either argument is not strictly positive.

    """
    return math.exp(log_beta(a, b))


def _quad(func, a, b, spec):
    """Internal: a single QUADPACK call with non-convergence turned into an error."""
    result = integrate.quad(
        func,
        a,
        b,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=max(spec.max_refinements, 2),
        full_output=1,
    )
    if len(result) > 3:
        raise QuadratureError(f"Integral over [{a}, {b}] did not converge: {result[3]}")
    return result[0]


def _weighted_quad(func, a, b, left, right, points, spec):
    """Internal: integrate func(x) (x-a)^left (b-x)^right over [a, b].

    The interval is split at the given points. The algebraic weight is handed to QUADPACK
    (QAWS) on the first and last pieces where the corresponding exponent is non-zero; on
    the inner pieces the factors are regular and are multiplied in explicitly.

    """
    cuts = [a, *sorted(p for p in set(points) if a < p < b), b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        wl = left if lo == a else 0.0
        wr = right if hi == b else 0.0

        def integrand(x, wl=wl, wr=wr):
            value = func(x)
            if left and not wl:
                value *= (x - a) ** left
            if right and not wr:
                value *= (b - x) ** right
            return value

        # Regular piece.
        if not (wl or wr):
            total += _quad(integrand, lo, hi, spec)
            continue

        result = integrate.quad(
            integrand,
            lo,
            hi,
            weight="alg",
            wvar=(wl, wr),
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=max(spec.max_refinements, 2),
            full_output=1,
        )
        if len(result) > 3:
            raise QuadratureError(
                f"Weighted integral over [{lo}, {hi}] did not converge: {result[3]}"
            )
        total += result[0]

    return total


def singular_moment(a, b, spec=None):
    """Evaluate ∫₀¹ x^(a-1) (1-x)^(b-1) dx by algebraic-weight quadrature.

    This is the quadrature counterpart of beta() and is used to cross-check it.

    """
    if not (a > 0 and b > 0):
        raise DomainError(f"Moment requires a > 0 and b > 0 (got {a}, {b}).")
    spec = spec or QuadratureSpec()
    return _weighted_quad(lambda x: 1.0, 0.0, 1.0, a - 1, b - 1, (), spec)


def _half_kernel(f, g, hurst, t, spec):
    """Internal: ∫₀ᵗ f(u) ∫ᵤᵗ g(v) (v - u)^(2H-2) dv du.

    With v = u + s (t - u) the inner integral becomes

        (t - u)^(2H - 1 + r_g) ∫₀¹ g̃(u + s (t - u)) s^(2H-2) (1 - s)^(r_g) ds

    where g̃ is the smooth part of g and r_g its endpoint exponent. The remaining outer
    integrand carries the algebraic factor (t - u)^(r_f + 2H - 1 + r_g).

    """
    kernel_exp = 2 * hurst - 2

    def inner(u):
        width = t - u
        if width <= 0:
            return 0.0
        # Breakpoints of g expressed in the inner variable s.
        points = [(p - u) / width for p in g.breakpoints if u < p < t]
        return _weighted_quad(
            lambda s: g.func(u + s * width), 0.0, 1.0, kernel_exp, g.exponent, points, spec
        )

    outer_exp = f.exponent + 2 * hurst - 1 + g.exponent
    if outer_exp <= -1:
        raise DomainError(
            "Kernel integral diverges: combined endpoint exponent "
            f"{outer_exp} must exceed -1."
        )
    points = [*f.breakpoints, *g.breakpoints]
    return _weighted_quad(
        lambda u: f.func(u) * inner(u), 0.0, t, 0.0, outer_exp, points, spec
    )


def fbm_kernel_double_integral(f, g, hurst, interval, spec=None):
    """Covariance of two Wiener integrals against fractional Brownian motion.

    Computes H(2H-1) ∫₀ᵗ∫₀ᵗ f(u) g(v) |u - v|^(2H-2) du dv, which is E[B(f) B(g)] for
    H > 1/2. The square is split along the diagonal into two triangles, each of which is
    integrated with the singularity mapped to an endpoint.

    Parameters
    ----------
    f, g : Weight or callable
        The weight functions. Plain callables are assumed smooth on [0, t].
    hurst : float
        Hurst index in (1/2, 1).
    interval : float or (float, float)
        Either t, or the pair (0, t).
    spec : QuadratureSpec, optional
        Tolerances; the defaults are used if not given.

    Returns
    -------
    float

    Raises
    ------
    DomainError
        H is not in (1/2, 1), or the interval is not of the form [0, t] with t > 0.
    QuadratureError
        The tolerances could not be met within spec.max_refinements subdivisions.

    """
    hurst = float(getattr(hurst, "h", hurst))
    if not (0.5 < hurst < 1):
        raise DomainError(f"Kernel integral requires 1/2 < H < 1 (got H={hurst}).")

    if np.ndim(interval) == 0:
        lo, t = 0.0, float(interval)
    else:
        lo, t = (float(x) for x in interval)
    if lo != 0 or not (t > 0):
        raise DomainError(f"Interval must be [0, t] with t > 0 (got [{lo}, {t}]).")

    f = Weight.coerce(f)
    g = Weight.coerce(g)
    spec = spec or QuadratureSpec()

    # Triangle v > u plus triangle u > v (the second with the roles swapped).
    upper = _half_kernel(f, g, hurst, t, spec)
    lower = upper if f is g else _half_kernel(g, f, hurst, t, spec)
    return hurst * (2 * hurst - 1) * (upper + lower)
