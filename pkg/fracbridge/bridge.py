# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""The α-fractional bridge and its auxiliary processes.

The bridge dX = -α X/(T - t) dt + dB has the explicit solution X_t = (T - t)^α ξ_t with
ξ_t = ∫₀ᵗ (T - s)^-α dB_s. Together with η_t = ∫₀ᵗ (T - u)^(α-1) ξ_u dB_u these drive
every limit theorem for the least squares estimator. For H > 1/2 the integrals are
Young integrals, realized here as left-point Riemann-Stieltjes sums on the sampling
grid; the integrands are smooth on [0, t_max] since t_max < T.

"""

from dataclasses import dataclass
import logging

import numpy as np
from scipy import integrate, signal

from .fbm import GaussianPath, HurstParam, TimeGrid, fgn_autocovariance
from .specialfn import DomainError


logger = logging.getLogger(__name__)


# The Euler recursion is rescaled whenever its running product spans this many e-folds.
_MAX_LOG_SPAN = 600.0


@dataclass(frozen=True)
class ModelParams:
    """Drift parameter α, horizon T and Hurst index H of the bridge."""

    alpha: float
    horizon_T: float
    hurst: HurstParam

    def __post_init__(self):
        # Allow a bare float for the Hurst index.
        object.__setattr__(self, "hurst", HurstParam.coerce(self.hurst))
        if not (self.horizon_T > 0):
            raise DomainError(f"Horizon T must be positive (got {self.horizon_T}).")
        if self.alpha < 0:
            raise DomainError(f"Drift parameter α must be non-negative (got {self.alpha}).")

    @property
    def h(self):
        return self.hurst.h

    def require_analysis(self):
        """Check the stricter domain α > 0, H in [1/2, 1) used by the limit theory."""
        if not (self.alpha > 0):
            raise DomainError(f"α must be strictly positive (got {self.alpha}).")
        if self.h < 0.5:
            raise DomainError(f"H must be at least 1/2 (got {self.h}).")


@dataclass(frozen=True, eq=False)
class BridgePaths:
    """Trajectories derived from one fBm path, all on the path's grid.

    Attributes
    ----------
    grid : TimeGrid
    xi, eta, x : numpy.ndarray
        ξ, η and X at the grid times.
    denom : numpy.ndarray
        The running integral ∫₀ᵗ ξ_u² (T - u)^(2α-2) du.
    b : numpy.ndarray, optional
        The driving path itself (kept for export).

    """

    grid: TimeGrid
    xi: np.ndarray
    eta: np.ndarray
    x: np.ndarray
    denom: np.ndarray
    b: np.ndarray = None

    @property
    def times(self):
        return self.grid.times


def _check_grid(path, params):
    """Internal: the grid must stop strictly before the horizon."""
    if path.grid.t_max >= params.horizon_T:
        raise DomainError(
            f"Grid end {path.grid.t_max} must be strictly before T={params.horizon_T}."
        )


def _time_to_horizon(grid, params):
    return params.horizon_T - grid.times


def build_xi(path, params):
    """Compute ξ_t = ∫₀ᵗ (T - s)^-α dB_s by left-point sums.

    Raises
    ------
    DomainError
        The grid reaches or passes the horizon.

    """
    _check_grid(path, params)
    # Unit weights.
    if params.alpha == 0:
        return path.values.copy()

    remaining = _time_to_horizon(path.grid, params)
    xi = np.zeros(path.grid.n_steps + 1)
    np.cumsum(remaining[:-1] ** -params.alpha * path.increments, out=xi[1:])
    return xi


def build_eta(path, xi, params):
    """Compute η_t = ∫₀ᵗ (T - u)^(α-1) ξ_u dB_u by left-point sums.

    Raises
    ------
    DomainError
        ξ was built on a different grid, or the grid reaches the horizon.

    """
    _check_grid(path, params)
    if len(xi) != path.grid.n_steps + 1:
        raise DomainError(
            f"ξ has {len(xi)} values but the path grid has {path.grid.n_steps} steps."
        )
    remaining = _time_to_horizon(path.grid, params)
    eta = np.zeros(path.grid.n_steps + 1)
    np.cumsum(
        remaining[:-1] ** (params.alpha - 1) * xi[:-1] * path.increments, out=eta[1:]
    )
    return eta


def build_zeta(path, params):
    """Compute ζ_t = ∫₀ᵗ (T - u)^(α-1) dB_u by left-point sums.

    For α < 1 - H this diverges like (T - t)^(H + α - 1) with a Gaussian limit after
    renormalization, of standard deviation limits.aux_gaussian_scale_r1() / (1 - 2α).

    """
    _check_grid(path, params)
    remaining = _time_to_horizon(path.grid, params)
    zeta = np.zeros(path.grid.n_steps + 1)
    np.cumsum(remaining[:-1] ** (params.alpha - 1) * path.increments, out=zeta[1:])
    return zeta


@dataclass(frozen=True)
class GridMoments:
    """Moments of the left-point sums ξ, ζ and η at one grid node.

    Attributes
    ----------
    var_xi : float
        E[ξ_t²].
    cov_xi_zeta : float
        E[ξ_t ζ_t].
    mean_eta : float
        E[η_t]. This vanishes for H = 1/2, where the sums are Itô sums.

    """

    var_xi: float
    cov_xi_zeta: float
    mean_eta: float

    @property
    def regression(self):
        """The coefficient of ξ_t in the best linear predictor of ζ_t."""
        return self.cov_xi_zeta / self.var_xi

    def bias(self, xi, denom):
        """The part of η_t / denom which is not driven by ζ_t - E[ζ_t | ξ_t].

        By the product rule η = ξ ζ - ∫ ζ dξ. Splitting ζ into its regression on ξ and
        an independent remainder leaves the regression term and the mean of ∫ ζ dξ, both
        fixed by the moments; this returns (β ξ² - E[∫ ζ dξ]) / denom. It vanishes as
        the denominator diverges.

        """
        return (self.regression * xi**2 - (self.cov_xi_zeta - self.mean_eta)) / denom


def grid_moments(params, grid, index):
    """Exact moments of ξ, ζ and η at a node, under the law of the driving path.

    The increments of fractional Brownian motion on a uniform grid have the Toeplitz
    covariance Δ^(2H) γ(|i - j|), with γ the autocovariance of unit fractional Gaussian
    noise, so each moment is a quadratic form in the weights of the left-point sums. The
    forms are evaluated by FFT convolution.

    Parameters
    ----------
    params : ModelParams
    grid : TimeGrid
        Must end strictly before T.
    index : int
        The node, at least 1.

    Returns
    -------
    GridMoments

    """
    if grid.t_max >= params.horizon_T:
        raise DomainError(
            f"Grid end {grid.t_max} must be strictly before T={params.horizon_T}."
        )
    if not 0 < index <= grid.n_steps:
        raise DomainError(f"Node {index} is not in 1, ..., {grid.n_steps}.")
    remaining = params.horizon_T - grid.times[:index]
    g = remaining**-params.alpha
    f = remaining ** (params.alpha - 1)
    gamma = fgn_autocovariance(params.hurst, np.arange(index))
    gamma *= grid.delta ** (2 * params.h)

    # Γ g, with Γ the covariance of the increments.
    symmetric = np.concatenate([gamma[:0:-1], gamma])
    cov_g = signal.fftconvolve(g, symmetric)[index - 1 : 2 * index - 1]
    # Σ_{j<i} Γ_ij g_j, the covariance with the strictly earlier increments.
    causal = np.concatenate([[0.0], gamma[1:]])
    past_g = signal.fftconvolve(g, causal)[:index]

    return GridMoments(float(g @ cov_g), float(f @ cov_g), float(f @ past_g))


def build_bridge(path, params):
    """Construct the bridge X and the auxiliary processes from a sampled path.

    Parameters
    ----------
    path : GaussianPath
        The driving fractional Brownian motion; its grid must end before T.
    params : ModelParams

    Returns
    -------
    BridgePaths
        X is formed as (T - t)^α ξ_t exactly at every node, and the denominator
        ∫ ξ² (T - u)^(2α-2) du is accumulated with the trapezoidal rule.

    """
    xi = build_xi(path, params)
    eta = build_eta(path, xi, params)
    remaining = _time_to_horizon(path.grid, params)
    x = remaining**params.alpha * xi
    denom = integrate.cumulative_trapezoid(
        xi**2 * remaining ** (2 * params.alpha - 2), path.grid.times, initial=0.0
    )
    return BridgePaths(path.grid, xi, eta, x, denom, path.values)


def euler_bridge(path, params):
    """Solve the bridge equation with the Euler-Maruyama scheme.

    X̃_{i+1} = X̃_i (1 - α Δ/(T - t_i)) + (B_{i+1} - B_i), X̃_0 = 0. This is independent of
    the explicit representation and serves to cross-check it. The linear recursion is
    unrolled as X̃_{i+1} = P_i Σ_{j≤i} dB_j / P_j with P_i the running product of the
    step factors, accumulated in logarithms. For large α the product underflows long
    before T, so it is taken relative to the start of blocks over which it changes by
    less than e^600, carrying X̃ across block boundaries.

    Raises
    ------
    DomainError
        The grid reaches the horizon, or is too coarse for the step factors
        1 - α Δ/(T - t_i) to stay positive.

    """
    _check_grid(path, params)
    grid = path.grid
    remaining = _time_to_horizon(grid, params)[:-1]
    ratio = params.alpha * grid.delta / remaining
    if np.any(ratio >= 1):
        raise DomainError(
            f"Grid spacing {grid.delta:.3g} is too coarse near T for α={params.alpha}."
        )

    # No drift: the solution is the driving path itself.
    if params.alpha == 0:
        return path.values.copy()

    log_factors = np.cumsum(np.log1p(-ratio))
    x = np.zeros(grid.n_steps + 1)
    start, anchor = 0, 0.0
    while start < grid.n_steps:
        # -log_factors is non-decreasing.
        stop = int(np.searchsorted(-log_factors, _MAX_LOG_SPAN - anchor, side="right"))
        stop = max(stop, start + 1)
        local = log_factors[start:stop] - anchor
        x[start + 1 : stop + 1] = np.exp(local) * (
            x[start] + np.cumsum(np.exp(-local) * path.increments[start:stop])
        )
        start, anchor = stop, log_factors[stop - 1]
    return x


def chain_rule_residual(paths, params):
    """½(T - t)^(2α-1) ξ_t² - (1 - 2α)/2 ∫ ξ² (T - u)^(2α-2) du - η_t at every node.

    The change of variable formula for Young integrals makes this vanish identically in
    continuous time; on the grid it vanishes under refinement.

    """
    remaining = params.horizon_T - paths.times
    return (
        0.5 * remaining ** (2 * params.alpha - 1) * paths.xi**2
        - 0.5 * (1 - 2 * params.alpha) * paths.denom
        - paths.eta
    )


_CSV_COLUMNS = ("t", "B", "xi", "eta", "x", "denom")


def write_csv(paths, filename):
    """Write the trajectories to a CSV file with 17 significant digits."""
    b = paths.b if paths.b is not None else np.full(len(paths.x), np.nan)
    table = np.column_stack([paths.times, b, paths.xi, paths.eta, paths.x, paths.denom])
    np.savetxt(
        filename, table, fmt="%.17g", delimiter=",", header=",".join(_CSV_COLUMNS),
        comments="",
    )
    logger.debug("Wrote %s", filename)


def read_csv(filename, params):
    """Read trajectories written by write_csv().

    The grid is reconstructed from the time column, which must be uniform.

    """
    table = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    times = table[:, 0]
    grid = TimeGrid(float(times[-1]), len(times) - 1)
    if not np.allclose(times, grid.times, rtol=0, atol=1e-12 * grid.t_max):
        raise DomainError(f"{filename}: time column is not a uniform grid.")
    if grid.t_max >= params.horizon_T:
        raise DomainError(f"{filename}: grid reaches the horizon T={params.horizon_T}.")
    return BridgePaths(
        grid, table[:, 2], table[:, 3], table[:, 4], table[:, 5], table[:, 1]
    )
