# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""The least squares estimator of α along a ladder of times approaching T.

Two independent formulas are evaluated. The direct one discretizes

    α̂_t = -∫₀ᵗ X_u/(T-u) dX_u / ∫₀ᵗ X_u²/(T-u)² du

with a left-point Young sum against dX. The identity formula uses the change of variable
formula to rewrite the numerator in terms of ξ_t and the running denominator only:

    α - α̂_t = ξ_t² / (2 (T-t)^(1-2α) ∫₀ᵗ ξ_u² (T-u)^(2α-2) du) + α - 1/2.

For standard Brownian motion the sums are Itô sums, and the right-hand side loses
Q_t / (2 ∫₀ᵗ ξ_u² (T-u)^(2α-2) du), where Q_t = Σ (T-t_i)^(2α-1) (ξ_{i+1} - ξ_i)² is the
weighted quadratic variation of ξ; it tends to log(T/(T-t)). The two formulas
agree in the limit of grid refinement, which the tests use as a check on the
discretization.

"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .bridge import grid_moments
from .limits import BOUNDARY_TOLERANCE, Regime, classify, renormalizer
from .specialfn import DomainError


logger = logging.getLogger(__name__)


# Denominators below this are treated as degenerate.
DENOMINATOR_FLOOR = 1e-300


class DegeneratePathError(ArithmeticError):
    """The estimator denominator vanishes (t too small, or a broken path)."""

    pass


@dataclass(frozen=True)
class EvalLadder:
    """Evaluation times t_k = T - ε_k approaching the horizon.

    Parameters
    ----------
    horizon_T : float
    epsilons : sequence of float
        Strictly decreasing, positive, and smaller than T.

    """

    horizon_T: float
    epsilons: tuple

    def __post_init__(self):
        epsilons = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", epsilons)
        if not epsilons:
            raise DomainError("The ladder needs at least one time.")
        if any(not (0 < e < self.horizon_T) for e in epsilons):
            raise DomainError(
                f"Ladder offsets must lie in (0, T={self.horizon_T}) (got {epsilons})."
            )
        if any(a <= b for a, b in zip(epsilons[:-1], epsilons[1:])):
            raise DomainError(f"Ladder offsets must be strictly decreasing ({epsilons}).")

    @classmethod
    def geometric(cls, horizon_T, levels=6):
        """The ladder ε_k = T 10^-k for k = 1, ..., levels."""
        return cls(horizon_T, tuple(horizon_T * 10.0**-k for k in range(1, levels + 1)))

    @property
    def times(self):
        return np.array([self.horizon_T - e for e in self.epsilons])

    def __len__(self):
        return len(self.epsilons)

    def snap(self, grid):
        """Grid indices of the ladder times, each the node at or below t_k.

        Raises
        ------
        DomainError
            A ladder time lies beyond the grid.

        """
        return np.array([grid.index_at(t) for t in self.times])

    def check_resolution(self, grid):
        """Check the grid resolves the smallest offset: Δ < min ε / 10."""
        if not grid.delta < self.epsilons[-1] / 10:
            raise DomainError(
                f"Grid spacing {grid.delta:.3g} must be below a tenth of the smallest "
                f"ladder offset {self.epsilons[-1]:.3g}."
            )


@dataclass
class LadderEntry:
    """Estimator values at one ladder time.

    ``t`` is the grid time the ladder time was snapped to, and ``xi`` and ``denom`` hold
    ξ and the estimator denominator there.

    """

    epsilon: float
    t: float
    alpha_hat_direct: float
    alpha_hat_identity: float
    error: float
    xi: float = 0.0
    denom: float = 0.0
    renormalized: dict = field(default_factory=dict)


@dataclass
class EstimatorLadder:
    """Estimator values along a ladder for one path.

    ``terminal_functional`` holds (1 - 2α) η / ξ² at the end of the grid, the almost sure
    limit of the R3 renormalized error (None when ξ vanishes there), and ``xi_terminal``
    holds ξ there.

    """

    params: object
    entries: list
    terminal_functional: float = None
    xi_terminal: float = None

    def column(self, name):
        return np.array([getattr(entry, name) for entry in self.entries])

    def renormalized(self, regime):
        regime = Regime(regime)
        return np.array([entry.renormalized[regime] for entry in self.entries])


def _is_brownian(params):
    return math.isclose(params.h, 0.5, rel_tol=0, abs_tol=BOUNDARY_TOLERANCE)


def _is_half(alpha):
    return math.isclose(alpha, 0.5, rel_tol=0, abs_tol=BOUNDARY_TOLERANCE)


def _direct_sums(times, x, horizon_T):
    """Internal: running numerator and denominator of the direct formula.

    The numerator is the left-point sum Σ X_i/(T - t_i) (X_{i+1} - X_i) and the
    denominator the trapezoidal integral of X²/(T - u)²; entry i covers [t_0, t_i].

    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    remaining = horizon_T - times
    young = np.concatenate([[0.0], np.cumsum(x[:-1] / remaining[:-1] * np.diff(x))])
    integrand = x**2 / remaining**2
    trapezoid = np.concatenate(
        [[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))]
    )
    return young, trapezoid


def _direct_at(young, trapezoid, times, index):
    """Internal: the direct estimate from the running sums."""
    if index == 0 or not trapezoid[index] >= DENOMINATOR_FLOOR:
        raise DegeneratePathError(
            f"Estimator denominator {trapezoid[index]:.3e} at t={times[index]} is "
            "degenerate."
        )
    return -young[index] / trapezoid[index]


def lse_from_samples(times, x, horizon_T, index):
    """The direct least squares estimate from raw samples of X.

    Parameters
    ----------
    times, x : sequence of float
        Uniform grid times and the values of X there.
    horizon_T : float
    index : int
        The grid index of the evaluation time.

    Raises
    ------
    DegeneratePathError
        The denominator is below 1e-300.

    """
    young, trapezoid = _direct_sums(times[: index + 1], x[: index + 1], horizon_T)
    return float(_direct_at(young, trapezoid, times, index))


def _index(paths, t):
    index = paths.grid.index_at(t)
    if index == 0:
        raise DegeneratePathError("The estimator is undefined at t = 0.")
    return index


def alpha_hat_direct(paths, params, t):
    """The direct estimator α̂_t from the Young sum against dX.

    Parameters
    ----------
    paths : BridgePaths
    params : ModelParams
    t : float
        Evaluation time, snapped to the grid node at or below it.

    Raises
    ------
    DegeneratePathError
        The denominator is below 1e-300.

    """
    return lse_from_samples(paths.times, paths.x, params.horizon_T, _index(paths, t))


def _quadratic_variation(paths, params, index):
    """Internal: Σ (T - t_i)^(2α-1) (ξ_{i+1} - ξ_i)² over the steps before a node."""
    remaining = params.horizon_T - paths.times[:index]
    increments = np.diff(paths.xi[: index + 1])
    return float(np.sum(remaining ** (2 * params.alpha - 1) * increments**2))


def _identity_at(paths, params, index):
    """Internal: the identity formula at a grid index."""
    denom = paths.denom[index]
    if not denom >= DENOMINATOR_FLOOR:
        raise DegeneratePathError(
            f"Estimator denominator {denom:.3e} at t={paths.times[index]} is degenerate."
        )
    alpha = params.alpha
    remaining = params.horizon_T - paths.times[index]
    renormalized_denom = remaining ** (1 - 2 * alpha) * denom
    error = paths.xi[index] ** 2 / (2 * renormalized_denom) + alpha - 0.5
    if _is_brownian(params):
        # Itô term of the chain rule; it vanishes for H > 1/2.
        error -= _quadratic_variation(paths, params, index) / (2 * denom)
    return alpha - error


def alpha_hat_identity(paths, params, t):
    """The estimator α̂_t from ξ_t and the running denominator only.

    For Brownian motion the quadratic variation of ξ enters as well.

    Raises
    ------
    DegeneratePathError
        The denominator is below 1e-300.

    """
    return _identity_at(paths, params, _index(paths, t))


def terminal_functional(paths, params):
    """(1 - 2α) η / ξ² at the last grid node, or None if ξ vanishes there."""
    xi = paths.xi[-1]
    if xi == 0:
        return None
    return (1 - 2 * params.alpha) * paths.eta[-1] / xi**2


def _cesaro_target(params, xi_T):
    """Internal: limit of the normalized denominator for α ≤ 1/2."""
    if _is_half(params.alpha):
        return xi_T**2
    return xi_T**2 / (1 - 2 * params.alpha)


def renormalized_denominator(paths, params, t):
    """The normalized running denominator and its almost sure limit.

    As t → T, with ξ_T approximated by ξ at the end of the grid:

    * α < 1/2: (T-t)^(1-2α) ∫₀ᵗ ξ² (T-u)^(2α-2) du → ξ_T² / (1 - 2α);
    * α = 1/2: ∫₀ᵗ ξ²/(T-u) du / log(T/(T-t)) → ξ_T²;
    * 1/2 < α < H: ∫₀ᵗ ξ² (T-u)^(2α-2) du converges; its value at the end of the grid is
      returned as the target.

    Returns
    -------
    value, target : float

    """
    index = _index(paths, t)
    alpha = params.alpha
    remaining = params.horizon_T - paths.times[index]
    denom = paths.denom[index]
    target = _cesaro_target(params, paths.xi[-1])
    if _is_half(alpha):
        return denom / math.log(params.horizon_T / remaining), target
    if alpha < 0.5:
        return remaining ** (1 - 2 * alpha) * denom, target
    if alpha < params.h:
        return denom, paths.denom[-1]
    raise DomainError(f"The denominator has no finite limit for α ≥ H (α={alpha}).")


def renormalized_errors(ladder, params, regime=None, moments=None):
    """Fill in the renormalized errors of each ladder entry.

    * Cauchy regimes and B11: the rate factor of limits.renormalizer() at the snapped
      time multiplies α - α̂_t. Given ``moments`` (a bridge.GridMoments per entry), the
      part of the error fixed by the moments of ξ, ζ and η is removed first; see
      GridMoments.bias(). It is of lower order, but at α = 1 - H it only decays like
      |log(T-t)|^(-1/2).
    * R3 and R4: the rate is replaced by its path-wise equivalent, the denominator over
      the almost sure limit of its normalization (see renormalized_denominator()), so
      (T-t)^(2α-1) becomes (1-2α) denom_t / ξ_T² and |log(T-t)| becomes denom_t / ξ_T².
    * NC: the stored value is 1/2 - α̂_t.

    The identity formula is used as it is exact in ξ and the denominator. The ladder is
    modified in place and returned.

    Raises
    ------
    DegeneratePathError
        ξ vanishes at the end of the grid in R3 or R4.

    """
    regime = Regime(regime) if regime is not None else classify(params)
    if moments is not None and len(moments) != len(ladder.entries):
        raise DomainError(
            f"Got {len(moments)} sets of moments for {len(ladder.entries)} ladder times."
        )
    if regime.is_almost_sure:
        xi_T = ladder.xi_terminal
        if xi_T is None or xi_T == 0:
            raise DegeneratePathError("ξ vanishes at the end of the grid.")
        target = _cesaro_target(params, xi_T)

    for k, entry in enumerate(ladder.entries):
        if regime is Regime.NC_HALF:
            value = 0.5 - entry.alpha_hat_identity
        elif regime.is_almost_sure:
            value = entry.error * entry.denom / target
        else:
            error = entry.error
            if moments is not None:
                error -= moments[k].bias(entry.xi, entry.denom)
            value = renormalizer(regime, params, params.horizon_T - entry.t) * error
        entry.renormalized[regime] = value
    return ladder


def estimate_ladder(paths, params, ladder, regime=None, renormalize=True, moments=None):
    """Evaluate both estimator formulas at every ladder time.

    Parameters
    ----------
    paths : BridgePaths
    params : ModelParams
    ladder : EvalLadder
    regime : Regime, optional
        Defaults to the classification of params.
    renormalize : bool, default True
        Fill in the renormalized errors. Without this the parameters need not lie in
        the domain of the limit theory (α = 0, for example).
    moments : sequence of GridMoments, optional
        The moments at the snapped ladder times, as computed by bridge.grid_moments().
        They only depend on the grid, so repeated runs can share them. They are computed
        here when needed and not given.

    Returns
    -------
    EstimatorLadder

    """
    indices = ladder.snap(paths.grid)

    # Running sums of the direct formula, so each ladder time costs O(1).
    young, trapezoid = _direct_sums(paths.times, paths.x, params.horizon_T)

    entries = []
    for epsilon, index in zip(ladder.epsilons, indices):
        direct = _direct_at(young, trapezoid, paths.times, index)
        identity = _identity_at(paths, params, index)
        entries.append(
            LadderEntry(
                epsilon=float(epsilon),
                t=float(paths.times[index]),
                alpha_hat_direct=float(direct),
                alpha_hat_identity=float(identity),
                error=float(params.alpha - identity),
                xi=float(paths.xi[index]),
                denom=float(paths.denom[index]),
            )
        )

    result = EstimatorLadder(
        params, entries, terminal_functional(paths, params), float(paths.xi[-1])
    )
    if not renormalize:
        return result
    regime = Regime(regime) if regime is not None else classify(params)
    if moments is None and regime.is_cauchy:
        moments = [grid_moments(params, paths.grid, index) for index in indices]
    return renormalized_errors(result, params, regime, moments)
