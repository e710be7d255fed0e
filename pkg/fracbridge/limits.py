# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Closed-form limit constants and regime classification.

Depending on α and H the renormalized estimation error α - α̂_t has one of several
limits as t → T:

* R1 (0 < α < 1 - H): in law, a scaled standard Cauchy variable;
* R2 (α = 1 - H): in law, a scaled standard Cauchy variable with a logarithmic rate;
* R3 (1 - H < α < 1/2): almost surely, the path functional (1 - 2α) η_T / ξ_T²;
* R4 (α = 1/2): almost surely, the constant 1/2;
* NC (α > 1/2): no consistency, α̂_t → 1/2.

For standard Brownian motion (H = 1/2) the classical results give a Cauchy limit for
α < 1/2 (B9) and a Gaussian one for α > 1/2 (B11).

"""

from dataclasses import dataclass
import enum
import logging
import math

from .specialfn import DomainError, QuadratureSpec, Weight, beta, fbm_kernel_double_integral


logger = logging.getLogger(__name__)


# Boundaries α = 1 - H and α = 1/2 are matched with this absolute tolerance so that a
# user typing α = 1 - H in floating point lands in the boundary regime.
BOUNDARY_TOLERANCE = 1e-12


class Regime(str, enum.Enum):
    """Asymptotic regime of the least squares estimator."""

    R1_CAUCHY = "R1_cauchy"
    R2_LOG_CAUCHY = "R2_log_cauchy"
    R3_AS_RANDOM = "R3_as_random"
    R4_AS_HALF = "R4_as_half"
    NC_HALF = "NC_half"
    B9_CAUCHY = "B9_cauchy"
    B11_GAUSSIAN = "B11_gaussian"

    @property
    def is_cauchy(self):
        return self in {Regime.R1_CAUCHY, Regime.R2_LOG_CAUCHY, Regime.B9_CAUCHY}

    @property
    def is_almost_sure(self):
        return self in {Regime.R3_AS_RANDOM, Regime.R4_AS_HALF}


@dataclass(frozen=True)
class LimitConstants:
    """The constants describing the limit of the renormalized error in one regime.

    Fields which do not apply to the regime are None.

    """

    regime: Regime
    cauchy_scale: float = None
    as_limit: float = None
    var_xi_T: float = None
    aux_gaussian_scale: float = None
    gaussian_variance: float = None
    note: str = ""

    def __post_init__(self):
        if self.cauchy_scale is not None and not self.cauchy_scale > 0:
            raise DomainError(f"Cauchy scale must be positive (got {self.cauchy_scale}).")
        if self.var_xi_T is not None and not self.var_xi_T > 0:
            raise DomainError(f"Var ξ_T must be positive (got {self.var_xi_T}).")

    def to_dict(self):
        return {
            "regime": self.regime.value,
            "cauchy_scale": self.cauchy_scale,
            "as_limit": self.as_limit,
            "var_xi_T": self.var_xi_T,
            "aux_gaussian_scale": self.aux_gaussian_scale,
            "gaussian_variance": self.gaussian_variance,
            "note": self.note,
        }


def _near(a, b):
    return abs(a - b) <= BOUNDARY_TOLERANCE


def classify(params):
    """Return the regime of the given parameters.

    The boundary α = 1 - H maps to R2 and α = 1/2 to R4. With H = 1/2 the Brownian labels
    B9 (α < 1/2) and B11 (α > 1/2) are returned.

    Raises
    ------
    DomainError
        α is not positive, H is below 1/2, or H = α = 1/2 (whose Brownian limit law has
        no closed form and is not supported).

    """
    params.require_analysis()
    alpha, h = params.alpha, params.h

    if _near(h, 0.5):
        if _near(alpha, 0.5):
            raise DomainError(
                "The Brownian case α = 1/2 has no closed-form limit and is not supported."
            )
        return Regime.B9_CAUCHY if alpha < 0.5 else Regime.B11_GAUSSIAN

    if _near(alpha, 0.5):
        return Regime.R4_AS_HALF
    if alpha > 0.5:
        return Regime.NC_HALF
    if _near(alpha, 1 - h):
        return Regime.R2_LOG_CAUCHY
    if alpha < 1 - h:
        return Regime.R1_CAUCHY
    return Regime.R3_AS_RANDOM


def _require_fractional(params):
    params.require_analysis()
    if not (0.5 < params.h < 1):
        raise DomainError(f"This constant requires 1/2 < H < 1 (got H={params.h}).")


def var_xi_terminal(params):
    """Variance of ξ_T = ∫₀ᵀ (T - s)^-α dB_s.

    Equal to H(2H-1)/(H-α) T^(2H-2α) β(1-α, 2H-1).

    Raises
    ------
    DomainError
        α ≥ H, in which case ξ_t has no limit in L².

    """
    _require_fractional(params)
    alpha, h, T = params.alpha, params.h, params.horizon_T
    if alpha >= h:
        raise DomainError(f"ξ_T exists only for α < H (got α={alpha}, H={h}).")
    return h * (2 * h - 1) / (h - alpha) * T ** (2 * h - 2 * alpha) * beta(
        1 - alpha, 2 * h - 1
    )


def var_xi(params, t, spec=None):
    """Variance of ξ_t for t < T, by the fBm kernel double integral.

    Unlike var_xi_terminal() this is finite for every α, and tends to it as t → T when
    α < H.

    """
    _require_fractional(params)
    T, alpha = params.horizon_T, params.alpha
    if not (0 < t < T):
        raise DomainError(f"t must lie in (0, T) (got t={t}, T={T}).")
    weight = Weight(lambda u: (T - u) ** -alpha)
    return fbm_kernel_double_integral(weight, weight, params.h, t, spec or QuadratureSpec())


def aux_gaussian_scale_r1(params):
    """Scale of the Gaussian numerator of the R1 limit.

    (T-t)^(1-H-α) ∫₀ᵗ (T-u)^(α-1) dB_u tends in law to a centred Gaussian with standard
    deviation √(H(2H-1) β(2-α-2H, 2H-1)/(1-H-α)); the R1 limit is (1 - 2α) times this
    Gaussian divided by ξ_T, and the value returned includes the factor (1 - 2α).

    """
    _require_fractional(params)
    alpha, h = params.alpha, params.h
    if not (0 < alpha < 1 - h) or _near(alpha, 1 - h):
        raise DomainError(f"R1 requires 0 < α < 1 - H (got α={alpha}, H={h}).")
    return (1 - 2 * alpha) * math.sqrt(
        h * (2 * h - 1) * beta(2 - alpha - 2 * h, 2 * h - 1) / (1 - h - alpha)
    )


def aux_gaussian_scale_r2(params):
    """The R2 counterpart of aux_gaussian_scale_r1(): (2H-1)^(3/2) √(2H β(1-H, 2H-1))."""
    _require_fractional(params)
    h = params.h
    if not _near(params.alpha, 1 - h):
        raise DomainError(f"R2 requires α = 1 - H (got α={params.alpha}, H={h}).")
    return (2 * h - 1) ** 1.5 * math.sqrt(2 * h * beta(1 - h, 2 * h - 1))


def cauchy_scale_r1(params):
    """Scale of the Cauchy limit of (T-t)^(α-H) (α - α̂_t) for 0 < α < 1 - H.

    T^(α-H) (1-2α) √((H-α) β(2-2H-α, 2H-1) / ((1-H-α) β(1-α, 2H-1))).

    """
    _require_fractional(params)
    alpha, h, T = params.alpha, params.h, params.horizon_T
    if not (0 < alpha < 1 - h) or _near(alpha, 1 - h):
        raise DomainError(f"R1 requires 0 < α < 1 - H (got α={alpha}, H={h}).")
    ratio = (h - alpha) * beta(2 - 2 * h - alpha, 2 * h - 1)
    ratio /= (1 - h - alpha) * beta(1 - alpha, 2 * h - 1)
    return T ** (alpha - h) * (1 - 2 * alpha) * math.sqrt(ratio)


def cauchy_scale_r2(params):
    """Scale of the Cauchy limit of (T-t)^(1-2H)/√|log(T-t)| (α - α̂_t) for α = 1 - H.

    T^(1-2H) (2H-1)^(3/2) √(2 β(1-H, 2H-1) / β(H, 2H-1)).

    """
    _require_fractional(params)
    h, T = params.h, params.horizon_T
    if not _near(params.alpha, 1 - h):
        raise DomainError(f"R2 requires α = 1 - H (got α={params.alpha}, H={h}).")
    return (
        T ** (1 - 2 * h)
        * (2 * h - 1) ** 1.5
        * math.sqrt(2 * beta(1 - h, 2 * h - 1) / beta(h, 2 * h - 1))
    )


def brownian_constants(alpha, T):
    """Limit constants for the standard Brownian bridge (H = 1/2).

    For α < 1/2, (T-t)^(α-1/2) (α - α̂_t) tends in law to a Cauchy variable with scale
    T^(α-1/2) (1 - 2α). For α > 1/2, √|log(T-t)| (α - α̂_t) tends to N(0, 2α - 1).

    Raises
    ------
    DomainError
        α = 1/2, or α or T not positive.

    """
    if not (alpha > 0 and T > 0):
        raise DomainError(f"α and T must be positive (got α={alpha}, T={T}).")
    if _near(alpha, 0.5):
        raise DomainError(
            "The Brownian case α = 1/2 has no closed-form limit and is not supported."
        )
    if alpha < 0.5:
        return LimitConstants(
            Regime.B9_CAUCHY, cauchy_scale=T ** (alpha - 0.5) * (1 - 2 * alpha)
        )
    return LimitConstants(Regime.B11_GAUSSIAN, gaussian_variance=2 * alpha - 1)


def _finite(alpha, fraction):
    """Internal: (1-2α) ∫₀ᵗ (T-u)^(2α-2) du over (T-t)^(2α-1), with fraction = (T-t)/T."""
    return -math.expm1((1 - 2 * alpha) * math.log(fraction))


def renormalizer(regime, params, remaining):
    """The rate factor applied to α - α̂_t at T - t = remaining.

    The leading powers of the remaining time stand for integrals over [0, t], which are
    used exactly: (T-t)^(2α-1) becomes (1-2α) ∫₀ᵗ (T-u)^(2α-2) du, which is
    (T-t)^(2α-1) - T^(2α-1), and |log(T-t)| becomes log(T/(T-t)). For B11 the rate is
    √((2α-1) E[∫₀ᵗ ξ²(T-u)^(2α-2) du]), in closed form. Each factor is asymptotically
    equivalent to the textbook rate, for example (T-t)^(α-H) in R1.

    For NC the returned factor is 1; the error is then measured relative to the limit
    1/2 by the estimator module.

    Raises
    ------
    DomainError
        remaining does not lie in (0, T).

    """
    alpha, h, T = params.alpha, params.h, params.horizon_T
    if not (0 < remaining < T):
        raise DomainError(f"T - t must lie in (0, T) (got {remaining}, T={T}).")
    log_ratio = math.log(T / remaining)
    regime = Regime(regime)
    if regime is Regime.R1_CAUCHY:
        return remaining ** (alpha - h) * _finite(alpha, remaining / T)
    if regime is Regime.R2_LOG_CAUCHY:
        rate = remaining ** (1 - 2 * h) / math.sqrt(log_ratio)
        return rate * _finite(alpha, remaining / T)
    if regime is Regime.R3_AS_RANDOM:
        return remaining ** (2 * alpha - 1) * _finite(alpha, remaining / T)
    if regime is Regime.R4_AS_HALF:
        return log_ratio
    if regime is Regime.B9_CAUCHY:
        return remaining ** (alpha - 0.5) * _finite(alpha, remaining / T)
    if regime is Regime.B11_GAUSSIAN:
        excess = -math.expm1((2 * alpha - 1) * math.log(remaining / T)) / (2 * alpha - 1)
        return math.sqrt(log_ratio - excess)
    return 1.0


def limit_constants(params):
    """Every constant applicable to the given parameters.

    Returns
    -------
    LimitConstants

    """
    regime = classify(params)
    alpha, h, T = params.alpha, params.h, params.horizon_T

    if regime in {Regime.B9_CAUCHY, Regime.B11_GAUSSIAN}:
        return brownian_constants(alpha, T)

    var_xi_T = var_xi_terminal(params) if alpha < h else None

    if regime is Regime.R1_CAUCHY:
        return LimitConstants(
            regime,
            cauchy_scale=cauchy_scale_r1(params),
            var_xi_T=var_xi_T,
            aux_gaussian_scale=aux_gaussian_scale_r1(params),
        )
    if regime is Regime.R2_LOG_CAUCHY:
        return LimitConstants(
            regime,
            cauchy_scale=cauchy_scale_r2(params),
            var_xi_T=var_xi_T,
            aux_gaussian_scale=aux_gaussian_scale_r2(params),
        )
    if regime is Regime.R3_AS_RANDOM:
        return LimitConstants(
            regime,
            var_xi_T=var_xi_T,
            note="(T-t)^(2α-1)(α-α̂) → (1-2α)η_T/ξ_T² almost surely; no closed-form law.",
        )
    if regime is Regime.R4_AS_HALF:
        return LimitConstants(regime, as_limit=0.5, var_xi_T=var_xi_T)
    return LimitConstants(
        regime,
        as_limit=0.5,
        var_xi_T=var_xi_T,
        note="α̂→½, no rate provided by the theory.",
    )
