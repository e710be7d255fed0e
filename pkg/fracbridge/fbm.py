# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Exact sampling of fractional Brownian motion on a uniform grid.

Two exact samplers are provided: circulant embedding (Davies-Harte), which needs a
power-of-two number of steps and runs in O(n log n), and Hosking's recursive conditional
sampler, which works for any number of steps in O(n²) and is used as a fallback. A dense
Cholesky sampler on arbitrary points serves as the ground-truth oracle in the tests.

All samplers take an explicit random stream. Streams are derived from a global seed and
a replication index with a counter-based construction (see stream()), so a replication
draws the same numbers whatever the order in which replications are run.

"""

from dataclasses import dataclass
import enum
import functools
import logging

import numpy as np
from scipy import linalg

from .specialfn import DomainError


logger = logging.getLogger(__name__)


class EmbeddingError(RuntimeError):
    """The circulant embedding of the increment covariance is not non-negative."""

    pass


class FactorizationError(RuntimeError):
    """A covariance matrix could not be factorized."""

    pass


@dataclass(frozen=True)
class HurstParam:
    """Hurst index of a fractional Brownian motion, in (0, 1).

    The analysis modules further require h > 1/2; h = 1/2 (standard Brownian motion) is
    accepted here so that the samplers and the Brownian limit laws can be checked.

    """

    h: float

    def __post_init__(self):
        if not (0 < self.h < 1):
            raise DomainError(f"Hurst index must lie in (0, 1) (got {self.h}).")

    def __float__(self):
        return float(self.h)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(float(value))


@dataclass(frozen=True)
class TimeGrid:
    """A uniform grid 0 = t_0 < t_1 < ... < t_n = t_max."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not (self.t_max > 0):
            raise DomainError(f"Grid end must be positive (got {self.t_max}).")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"Grid needs at least one step (got {self.n_steps}).")

    @classmethod
    def for_horizon(cls, horizon, n_steps, epsilon):
        """A grid ending at horizon - epsilon, strictly before the horizon."""
        if not (0 < epsilon < horizon):
            raise DomainError(
                f"Grid end offset must lie in (0, T) (got {epsilon} with T={horizon})."
            )
        return cls(horizon - epsilon, n_steps)

    @property
    def delta(self):
        return self.t_max / self.n_steps

    @functools.cached_property
    def times(self):
        times = np.arange(self.n_steps + 1) * self.delta
        # Pin the end exactly.
        times[-1] = self.t_max
        return times

    def index_at(self, t):
        """Index of the grid node at or below time t.

        Raises
        ------
        DomainError
            t is negative or beyond the end of the grid.

        """
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise DomainError(f"Time {t} is outside the grid [0, {self.t_max}].")
        index = int(np.floor(t / self.delta * (1 + 1e-12)))
        return min(index, self.n_steps)

    def coarsen(self, factor):
        """The grid keeping every factor-th node."""
        if self.n_steps % factor:
            raise DomainError(f"{self.n_steps} steps cannot be coarsened by {factor}.")
        return TimeGrid(self.t_max, self.n_steps // factor)


@dataclass(frozen=True, eq=False)
class GaussianPath:
    """A sampled fractional Brownian motion trajectory.

    Attributes
    ----------
    grid : TimeGrid
    values : numpy.ndarray
        B at the grid times, starting with exactly zero.
    hurst : HurstParam
    seed_tag : int
        The 64-bit key of the stream the path was drawn from.

    """

    grid: TimeGrid
    values: np.ndarray
    hurst: HurstParam
    seed_tag: int = 0

    def __post_init__(self):
        if len(self.values) != self.grid.n_steps + 1:
            raise DomainError(
                f"Path has {len(self.values)} values for a grid of "
                f"{self.grid.n_steps} steps."
            )
        if self.values[0] != 0:
            raise DomainError("Paths must start at zero.")

    @property
    def increments(self):
        return np.diff(self.values)

    def scaled(self, factor):
        return GaussianPath(self.grid, self.values * factor, self.hurst, self.seed_tag)

    def coarsen(self, factor):
        """The same trajectory observed on every factor-th node."""
        return GaussianPath(
            self.grid.coarsen(factor), self.values[::factor], self.hurst, self.seed_tag
        )


class Sampler(str, enum.Enum):
    """The exact samplers available for Monte Carlo runs."""

    DAVIES_HARTE = "davies_harte"
    HOSKING = "hosking"


# Stream derivation. SplitMix64 (Steele, Lea & Flood 2014) is used as the finalizer that
# maps (seed, index) to the key of a Philox counter-based generator.
_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value):
    """The SplitMix64 output function applied to a 64-bit integer."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix(global_seed, index):
    """The 64-bit stream key for a replication."""
    return splitmix64(splitmix64(global_seed) + (index + 1) * _GOLDEN_GAMMA)


def stream(global_seed, index):
    """Create the random stream for a replication.

    Returns
    -------
    tag : int
        The stream key, recorded in the sampled path for provenance.
    rng : numpy.random.Generator
        A Philox generator keyed by the tag.

    """
    tag = mix(global_seed, index)
    return tag, np.random.Generator(np.random.Philox(key=tag))


def covariance(hurst, s, t):
    """Covariance of fractional Brownian motion, ½(t^2H + s^2H - |t-s|^2H).

    Works elementwise on arrays.

    """
    two_h = 2 * float(HurstParam.coerce(hurst))
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    result = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return float(result) if result.ndim == 0 else result


def fgn_autocovariance(hurst, k):
    """Autocovariance of unit-spacing fractional Gaussian noise at lag k."""
    two_h = 2 * float(HurstParam.coerce(hurst))
    k = np.abs(np.asarray(k, dtype=float))
    return 0.5 * (np.abs(k + 1) ** two_h - 2 * k**two_h + np.abs(k - 1) ** two_h)


def _to_path(noise, hurst, grid, seed_tag):
    """Internal: scale unit-spacing noise to the grid and integrate it."""
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    np.cumsum(noise * grid.delta**hurst.h, out=values[1:])
    return GaussianPath(grid, values, hurst, seed_tag)


@functools.lru_cache(maxsize=16)
def _circulant_eigenvalues(h, n):
    """Internal: eigenvalues of the size-2n circulant embedding of the fGn covariance."""
    gamma = fgn_autocovariance(h, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eigenvalues = np.fft.fft(row).real

    # Tiny negative values are rounding noise; anything larger means the embedding is
    # not a valid covariance and clipping would change the law.
    largest = eigenvalues.max()
    smallest = eigenvalues.min()
    if smallest < -1e-9 * largest:
        raise EmbeddingError(
            f"Circulant embedding has eigenvalue {smallest:.3e} "
            f"(largest {largest:.3e}) for H={h}, n={n}."
        )
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    eigenvalues.setflags(write=False)
    return eigenvalues


def sample_davies_harte(hurst, grid, rng, seed_tag=0):
    """Sample fractional Brownian motion by circulant embedding.

    The increments of B on the grid are stationary with covariance γ(k) Δ^2H. Embedding
    this Toeplitz covariance in a circulant matrix of size 2n diagonalizes it by the FFT;
    the real part of the transformed complex Gaussian vector then has exactly the
    required law.

    Parameters
    ----------
    hurst : HurstParam or float
    grid : TimeGrid
        Number of steps must be a power of two, at least 2.
    rng : numpy.random.Generator
    seed_tag : int, optional
        Provenance recorded in the returned path.

    Returns
    -------
    GaussianPath

    Raises
    ------
    EmbeddingError
        The embedding has a negative eigenvalue below -1e-9 times the largest one; use
        sample_hosking() instead.

    """
    hurst = HurstParam.coerce(hurst)
    n = grid.n_steps
    if n < 2 or n & (n - 1):
        raise DomainError(f"Circulant embedding needs a power of two steps (got {n}).")

    eigenvalues = _circulant_eigenvalues(hurst.h, n)
    size = 2 * n
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    noise = np.fft.fft(np.sqrt(eigenvalues / size) * z).real[:n]
    return _to_path(noise, hurst, grid, seed_tag)


@functools.lru_cache(maxsize=16)
def _hosking_coefficients(h, n):
    """Internal: Durbin-Levinson prediction coefficients and innovation deviations.

    Returns a list whose k-th entry holds the coefficients φ_k,1..k (applied to the
    previous values, most recent first) and the array of innovation standard deviations.

    """
    gamma = fgn_autocovariance(h, np.arange(n))
    phis = [np.empty(0)]
    variances = np.empty(n)
    variances[0] = gamma[0]
    phi = np.empty(0)
    for k in range(1, n):
        kappa = (gamma[k] - phi @ gamma[k - 1 : 0 : -1]) / variances[k - 1]
        phi = np.concatenate([phi - kappa * phi[::-1], [kappa]])
        variances[k] = variances[k - 1] * (1 - kappa**2)
        phis.append(phi)
    return phis, np.sqrt(variances)


def sample_hosking(hurst, grid, rng, seed_tag=0):
    """Sample fractional Brownian motion by Hosking's recursive method.

    Each increment is drawn from its Gaussian conditional law given all previous ones.
    The conditioning coefficients depend only on (H, n) and are cached.

    Parameters
    ----------
    hurst : HurstParam or float
    grid : TimeGrid
    rng : numpy.random.Generator
    seed_tag : int, optional

    Returns
    -------
    GaussianPath

    """
    hurst = HurstParam.coerce(hurst)
    n = grid.n_steps
    phis, deviations = _hosking_coefficients(hurst.h, n)
    z = rng.standard_normal(n)

    noise = np.empty(n)
    noise[0] = deviations[0] * z[0]
    for k in range(1, n):
        noise[k] = phis[k] @ noise[k - 1 :: -1] + deviations[k] * z[k]
    return _to_path(noise, hurst, grid, seed_tag)


def sample(sampler, hurst, grid, rng, seed_tag=0):
    """Sample with the chosen method, falling back to Hosking if the embedding fails."""
    sampler = Sampler(sampler)
    if sampler is Sampler.HOSKING:
        return sample_hosking(hurst, grid, rng, seed_tag)
    try:
        return sample_davies_harte(hurst, grid, rng, seed_tag)
    except EmbeddingError as e:
        logger.warning("%s Falling back to Hosking's method.", e)
        return sample_hosking(hurst, grid, rng, seed_tag)


def sample_cholesky_oracle(hurst, grid_points, rng):
    """Sample B at arbitrary points by dense factorization of the covariance matrix.

    This is the reference sampler used to check the fast ones.

    Parameters
    ----------
    hurst : HurstParam or float
    grid_points : sequence of float
        Strictly increasing, with a strictly positive first point; at most 4096 points.
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray

    Raises
    ------
    FactorizationError
        The covariance matrix is not numerically positive definite.

    """
    hurst = HurstParam.coerce(hurst)
    points = np.asarray(grid_points, dtype=float)
    if points.ndim != 1 or not len(points):
        raise DomainError("The oracle needs a non-empty one-dimensional set of points.")
    if len(points) > 4096:
        raise DomainError(f"The oracle handles at most 4096 points (got {len(points)}).")
    if points[0] <= 0 or np.any(np.diff(points) <= 0):
        raise DomainError("Oracle points must be positive and strictly increasing.")

    matrix = covariance(hurst, points[:, None], points[None, :])
    try:
        factor = linalg.cholesky(np.atleast_2d(matrix), lower=True)
    except linalg.LinAlgError as e:
        raise FactorizationError(f"Covariance matrix is not positive definite: {e}")
    return factor @ rng.standard_normal(len(points))
