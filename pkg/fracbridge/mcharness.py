# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Monte Carlo replication engine and heavy-tail aware statistics.

A run simulates independent fBm paths, evaluates the estimator ladder on each, and
turns the asymptotic claims into pass/fail checks. Every replication draws from its own
counter-based stream, and results are reduced in replication order, so a run is
bit-for-bit reproducible whatever the number of worker processes.

The limit laws in the Cauchy regimes have no moments, so all summaries are quantile
based: medians, quartiles (type 7 linear interpolation), half interquartile ranges and
Kolmogorov-Smirnov distances.

"""

from dataclasses import dataclass, field
import enum
import functools
import json
import logging
import multiprocessing

import numpy as np
from scipy import stats

from .bridge import build_bridge, grid_moments
from .estimator import DegeneratePathError, EvalLadder, estimate_ladder
from .fbm import Sampler, TimeGrid, sample, stream
from .limits import Regime, brownian_constants, cauchy_scale_r1, cauchy_scale_r2, classify
from .specialfn import DomainError


logger = logging.getLogger(__name__)


SCHEMA_VERSION = 1

# Runs abort when more than this fraction of replications fail.
MAX_FAILURE_RATE = 1e-3

# Seeded shuffles behind the nested fourth moments of the heavy-tail check.
HEAVY_TAIL_DRAWS = 64
HEAVY_TAIL_SEED = 20240917


class ReplicationError(RuntimeError):
    """A single replication failed.

    The index and stream key identify the failing path so it can be reproduced on its
    own with fbm.stream(seed, index).

    """

    def __init__(self, message, index, seed):
        super().__init__(message)
        self.index = index
        self.seed = seed

    def __str__(self):
        return f"Replication {self.index} (stream {self.seed:#018x}): {self.args[0]}"

    def __reduce__(self):
        return (ReplicationError, (self.args[0], self.index, self.seed))


class McRunError(RuntimeError):
    """A Monte Carlo run was aborted."""

    pass


class Check(str, enum.Enum):
    """Pass/fail checks a run can evaluate.

    The KS threshold of 0.05 is meant for 2000 replications, where the 95% band of the
    statistic alone is about 0.030. Distribution checks use the last ladder time.

    """

    FORMULA_AGREEMENT = "formula_agreement"
    CONSISTENCY = "consistency"
    CAUCHY_KS = "cauchy_ks"
    CAUCHY_SCALE = "cauchy_scale"
    GAUSSIAN_KS = "gaussian_ks"
    AS_STABILITY = "as_stability"
    AS_TARGET = "as_target"
    AS_FUNCTIONAL = "as_functional"
    HEAVY_TAIL = "heavy_tail"

    def threshold(self, regime):
        """The pass threshold; statistics at or below it pass."""
        # Outside NC the consistency statistic counts ladder steps where the median
        # error fails to decrease, and none may.
        if self is Check.CONSISTENCY and Regime(regime) is not Regime.NC_HALF:
            return 0.0
        return _THRESHOLDS[self]

    def applies_to(self, regime):
        regimes = _APPLICABLE.get(self)
        return regimes is None or Regime(regime) in regimes


_THRESHOLDS = {
    Check.FORMULA_AGREEMENT: 1e-2,
    Check.CONSISTENCY: 0.05,
    Check.CAUCHY_KS: 0.05,
    Check.CAUCHY_SCALE: 0.10,
    Check.GAUSSIAN_KS: 0.05,
    Check.AS_STABILITY: 0.10,
    Check.AS_TARGET: 0.15,
    Check.AS_FUNCTIONAL: 0.15,
    Check.HEAVY_TAIL: 0.0,
}

_CAUCHY = {Regime.R1_CAUCHY, Regime.R2_LOG_CAUCHY, Regime.B9_CAUCHY}
_APPLICABLE = {
    Check.CAUCHY_KS: _CAUCHY,
    Check.CAUCHY_SCALE: _CAUCHY,
    Check.HEAVY_TAIL: _CAUCHY,
    Check.GAUSSIAN_KS: {Regime.B11_GAUSSIAN},
    Check.AS_STABILITY: {Regime.R3_AS_RANDOM, Regime.R4_AS_HALF},
    Check.AS_TARGET: {Regime.R4_AS_HALF},
    Check.AS_FUNCTIONAL: {Regime.R3_AS_RANDOM},
}


def default_checks(regime):
    """The checks evaluated when a configuration does not name any."""
    regime = Regime(regime)
    if regime in _CAUCHY:
        return (Check.CONSISTENCY, Check.CAUCHY_KS, Check.CAUCHY_SCALE)
    if regime is Regime.R3_AS_RANDOM:
        return (Check.CONSISTENCY, Check.AS_STABILITY, Check.AS_FUNCTIONAL)
    if regime is Regime.R4_AS_HALF:
        return (Check.CONSISTENCY, Check.AS_TARGET)
    if regime is Regime.B11_GAUSSIAN:
        return (Check.CONSISTENCY, Check.GAUSSIAN_KS)
    return (Check.CONSISTENCY,)


@dataclass(frozen=True)
class McConfig:
    """Everything needed to reproduce a Monte Carlo run.

    Parameters
    ----------
    params : ModelParams
    grid_n : int
        Number of grid steps on [0, T - min ε]; a power of two.
    ladder : EvalLadder
    replications : int
        At least 100.
    global_seed : int
    sampler : Sampler
    checks : tuple of Check
        Empty for the regime defaults.
    scale_factor : float
        Multiplies the reference Cauchy scale. Only for testing that a wrong scale is
        rejected.
    workers : int
        Number of worker processes; 1 runs in process.

    """

    params: object
    grid_n: int
    ladder: EvalLadder
    replications: int
    global_seed: int
    sampler: Sampler = Sampler.DAVIES_HARTE
    checks: tuple = ()
    scale_factor: float = 1.0
    workers: int = 1

    min_replications = 100

    def __post_init__(self):
        object.__setattr__(self, "sampler", Sampler(self.sampler))
        object.__setattr__(self, "checks", tuple(Check(c) for c in self.checks))

        n = self.grid_n
        if n < 2 or n & (n - 1):
            raise DomainError(f"grid_n must be a power of two (got {n}).")
        if self.replications < self.min_replications:
            raise DomainError(
                f"At least {self.min_replications} replications are needed "
                f"(got {self.replications})."
            )
        if self.ladder.horizon_T != self.params.horizon_T:
            raise DomainError("The ladder and the model use different horizons.")
        if self.workers < 1:
            raise DomainError(f"Need at least one worker (got {self.workers}).")
        self.ladder.check_resolution(self.grid)

        regime = self.regime
        for check in self.checks:
            if not check.applies_to(regime):
                raise DomainError(f"Check {check.value} does not apply to {regime.value}.")

    @property
    def regime(self):
        return classify(self.params)

    @property
    def grid(self):
        return TimeGrid.for_horizon(
            self.params.horizon_T, self.grid_n, self.ladder.epsilons[-1]
        )

    @property
    def active_checks(self):
        return self.checks or default_checks(self.regime)


@dataclass(frozen=True)
class LadderRow:
    """Quantile summary of the renormalized errors at one ladder time."""

    epsilon: float
    t: float
    median: float
    q25: float
    q75: float
    ks_distance: float
    n_effective: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check; it passes exactly when statistic ≤ threshold."""

    name: str
    statistic: float
    threshold: float

    @property
    def passed(self):
        return bool(self.statistic <= self.threshold)

    def to_dict(self):
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
        }


@dataclass
class McSummary:
    """Aggregated output of a run.

    ``records`` holds the estimator ladder of every successful replication, in
    replication order, for export; it is not part of the JSON summary.

    """

    config: McConfig
    rows: list
    checks: list
    failures: list = field(default_factory=list)
    records: list = field(default_factory=list, repr=False)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def to_dict(self):
        params = self.config.params
        return {
            "schema_version": SCHEMA_VERSION,
            "regime": self.config.regime.value,
            "params": {
                "alpha": params.alpha,
                "hurst": params.h,
                "horizon": params.horizon_T,
            },
            "grid_n": self.config.grid_n,
            "replications": self.config.replications,
            "seed": self.config.global_seed,
            "sampler": self.config.sampler.value,
            "ladder": [row.to_dict() for row in self.rows],
            "checks": [check.to_dict() for check in self.checks],
            "failed_replications": [
                {"index": f.index, "stream": f.seed, "message": str(f)}
                for f in self.failures
            ],
            "pass": self.passed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def renormalized_matrix(self):
        """Renormalized errors as a (replications × ladder) array."""
        regime = self.config.regime
        return np.array([record.renormalized(regime) for _, record in self.records])

    def column_matrix(self, name):
        return np.array([record.column(name) for _, record in self.records])

    def write_records(self, filename):
        """Write one row per (replication, ladder time) with 17 significant digits."""
        regime = self.config.regime
        rows = []
        for index, record in self.records:
            for entry in record.entries:
                rows.append(
                    (
                        index,
                        entry.epsilon,
                        entry.t,
                        entry.alpha_hat_direct,
                        entry.alpha_hat_identity,
                        entry.error,
                        entry.renormalized[regime],
                    )
                )
        header = "replication,epsilon,t,alpha_hat_direct,alpha_hat_identity,error,renormalized"
        np.savetxt(
            filename,
            np.array(rows, dtype=float).reshape(-1, 7),
            fmt=["%d"] + ["%.17g"] * 6,
            delimiter=",",
            header=header,
            comments="",
        )
        logger.debug("Wrote %s", filename)

    def write_error_curve(self, filename):
        """Write plot data: ladder offset against median |α - α̂|."""
        errors = np.abs(self.column_matrix("error"))
        table = np.column_stack([self.config.ladder.epsilons, np.median(errors, axis=0)])
        np.savetxt(filename, table, fmt="%.17g", header="epsilon median_abs_error")
        logger.debug("Wrote %s", filename)


@dataclass(frozen=True)
class RobustScale:
    median: float
    half_iqr: float


@dataclass(frozen=True)
class AsConvergence:
    median_relative_change: float
    median_abs_deviation: float = None


@dataclass(frozen=True)
class HeavyTail:
    ks_cauchy: float
    ks_gaussian: float
    fourth_moments: tuple

    @property
    def moment_decreases(self):
        """The number of steps over which the fourth moment fails to grow."""
        moments = np.asarray(self.fourth_moments)
        return int(np.sum(moments[1:] <= moments[:-1]))

    @property
    def statistic(self):
        """Negative when the tails are heavy.

        This is the KS distance to the scaled Cauchy law minus the one to the best
        Gaussian, plus one for every step over which the fourth moment does not grow;
        distances lie in [0, 1], so any such step makes it positive.

        """
        return self.ks_cauchy - self.ks_gaussian + self.moment_decreases


def _quantiles(sample, probs):
    return np.quantile(np.asarray(sample, dtype=float), probs, method="linear")


def ks_cauchy(sample, scale):
    """Kolmogorov-Smirnov distance between a sample and Cauchy(0, scale)."""
    if not len(sample):
        raise DomainError("The KS distance needs a non-empty sample.")
    if not scale > 0:
        raise DomainError(f"Cauchy scale must be positive (got {scale}).")
    return float(stats.kstest(sample, "cauchy", args=(0.0, scale)).statistic)


def ks_gaussian(sample, variance):
    """Kolmogorov-Smirnov distance between a sample and N(0, variance)."""
    if not len(sample):
        raise DomainError("The KS distance needs a non-empty sample.")
    if not variance > 0:
        raise DomainError(f"Variance must be positive (got {variance}).")
    return float(stats.kstest(sample, "norm", args=(0.0, np.sqrt(variance))).statistic)


def robust_scale(sample):
    """Median and half interquartile range of a sample.

    For a Cauchy(0, c) sample the half interquartile range estimates c.

    """
    if len(sample) < 20:
        raise DomainError(f"Need at least 20 values for quartiles (got {len(sample)}).")
    q25, median, q75 = _quantiles(sample, [0.25, 0.5, 0.75])
    return RobustScale(float(median), float(q75 - q25) / 2)


def as_convergence_check(per_path_ladder, target=None):
    """Per-path stabilization of renormalized errors over the last two ladder times.

    Parameters
    ----------
    per_path_ladder : array of shape (replications, ladder)
    target : float, optional
        The almost sure limit, if deterministic.

    Returns
    -------
    AsConvergence
        The median over paths of the relative change between the last two entries, and
        (with a target) the median absolute deviation of the last entry from it.

    """
    values = np.asarray(per_path_ladder, dtype=float)
    if values.ndim != 2 or values.shape[1] < 3:
        raise DomainError("The ladder must have at least three entries.")
    last, previous = values[:, -1], values[:, -2]
    with np.errstate(divide="ignore", invalid="ignore"):
        change = np.abs(last - previous) / np.abs(last)
    # Identical entries have no change even when both vanish.
    change[last == previous] = 0.0
    deviation = None
    if target is not None:
        deviation = float(np.median(np.abs(last - target)))
    return AsConvergence(float(np.median(change)), deviation)


def fourth_moments(sample, divisors=(16, 8, 4, 1), draws=HEAVY_TAIL_DRAWS):
    """Empirical fourth moments over nested subsamples of growing size.

    For each divisor d the fourth moment of the first n // d values is taken after each of
    a fixed set of seeded shuffles, and the median over the shuffles is returned. For a
    law without a fourth moment the values keep growing with the subsample size; the
    median over shuffles keeps a single extreme value from deciding the trend.

    """
    sample = np.asarray(sample, dtype=float)
    powers = sample**4
    rng = np.random.default_rng(HEAVY_TAIL_SEED)
    orders = [np.arange(len(sample))] + [
        rng.permutation(len(sample)) for _ in range(draws - 1)
    ]
    moments = []
    for d in divisors:
        size = max(1, len(sample) // d)
        values = [np.mean(powers[order[:size]]) for order in orders]
        moments.append(float(np.median(values)))
    return tuple(moments)


def heavy_tail_statistic(sample, scale):
    """Compare a Cauchy fit with the best Gaussian fit, and check the moments diverge.

    See HeavyTail.statistic for how the two are combined.

    """
    sample = np.asarray(sample, dtype=float)
    loc, sd = stats.norm.fit(sample)
    ks_normal = float(stats.kstest(sample, "norm", args=(loc, sd)).statistic)
    return HeavyTail(ks_cauchy(sample, scale), ks_normal, fourth_moments(sample))


def reference_scale(config):
    """The Cauchy scale of the regime, times the configured scale factor."""
    regime = config.regime
    params = config.params
    if regime is Regime.R1_CAUCHY:
        scale = cauchy_scale_r1(params)
    elif regime is Regime.R2_LOG_CAUCHY:
        scale = cauchy_scale_r2(params)
    elif regime is Regime.B9_CAUCHY:
        scale = brownian_constants(params.alpha, params.horizon_T).cauchy_scale
    else:
        return None
    return scale * config.scale_factor


def _gaussian_variance(config):
    params = config.params
    return brownian_constants(params.alpha, params.horizon_T).gaussian_variance


def _replicate(config, moments, index):
    """Internal: one replication; failures are returned rather than raised."""
    tag, rng = stream(config.global_seed, index)
    try:
        path = sample(config.sampler, config.params.hurst, config.grid, rng, tag)
        paths = build_bridge(path, config.params)
        return estimate_ladder(
            paths, config.params, config.ladder, config.regime, moments=moments
        )
    except (DegeneratePathError, FloatingPointError) as e:
        return ReplicationError(str(e), index, tag)


def _simulate(config, moments=None):
    """Internal: run all replications, in order."""
    task = functools.partial(_replicate, config, moments)
    indices = range(config.replications)
    if config.workers == 1:
        return [task(i) for i in indices]
    chunksize = max(1, config.replications // (4 * config.workers))
    with multiprocessing.Pool(processes=config.workers) as pool:
        return pool.map(task, indices, chunksize=chunksize)


def _row(config, k, t, sample):
    sample = sample[np.isfinite(sample)]
    q25, median, q75 = _quantiles(sample, [0.25, 0.5, 0.75])
    regime = config.regime
    ks = None
    if regime.is_cauchy:
        ks = ks_cauchy(sample, reference_scale(config))
    elif regime is Regime.B11_GAUSSIAN:
        ks = ks_gaussian(sample, _gaussian_variance(config))
    return LadderRow(
        epsilon=config.ladder.epsilons[k],
        t=float(t),
        median=float(median),
        q25=float(q25),
        q75=float(q75),
        ks_distance=ks,
        n_effective=int(len(sample)),
    )


def _evaluate(check, summary):
    """Internal: the statistic of one check."""
    config = summary.config
    params = config.params
    regime = config.regime
    renormalized = summary.renormalized_matrix()
    last = renormalized[:, -1]

    if check is Check.FORMULA_AGREEMENT:
        direct = summary.column_matrix("alpha_hat_direct")[:, -1]
        identity = summary.column_matrix("alpha_hat_identity")[:, -1]
        return float(np.median(np.abs(direct - identity)))

    if check is Check.CONSISTENCY:
        alpha_hat = summary.column_matrix("alpha_hat_identity")
        if regime is Regime.NC_HALF:
            return float(np.median(np.abs(alpha_hat[:, -1] - 0.5)))
        medians = np.median(np.abs(alpha_hat - params.alpha), axis=0)
        failures = int(np.sum(medians[1:] >= medians[:-1]))
        return float(failures)

    if check is Check.CAUCHY_KS:
        return ks_cauchy(last, reference_scale(config))

    if check is Check.CAUCHY_SCALE:
        scale = reference_scale(config)
        return abs(robust_scale(last).half_iqr / scale - 1)

    if check is Check.GAUSSIAN_KS:
        return ks_gaussian(last, _gaussian_variance(config))

    if check is Check.AS_STABILITY:
        return as_convergence_check(renormalized).median_relative_change

    if check is Check.AS_TARGET:
        return as_convergence_check(renormalized, target=0.5).median_abs_deviation

    if check is Check.AS_FUNCTIONAL:
        functional = np.array(
            [np.nan if r.terminal_functional is None else r.terminal_functional
             for _, r in summary.records]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            relative = np.abs(last - functional) / np.abs(functional)
        return float(np.nanmedian(relative))

    if check is Check.HEAVY_TAIL:
        return heavy_tail_statistic(last, reference_scale(config)).statistic

    raise DomainError(f"Unknown check {check}.")


def run(config, evaluate=True):
    """Run a Monte Carlo experiment.

    Parameters
    ----------
    config : McConfig
    evaluate : bool, default True
        Evaluate the checks; otherwise only the quantile summary is computed.

    Returns
    -------
    McSummary

    Raises
    ------
    McRunError
        More than 0.1% of the replications failed.

    """
    logger.info(
        "Running %d replications (%s, α=%g, H=%g, seed=%d, workers=%d)",
        config.replications,
        config.regime.value,
        config.params.alpha,
        config.params.h,
        config.global_seed,
        config.workers,
    )
    grid = config.grid
    indices = config.ladder.snap(grid)
    moments = None
    if config.regime.is_cauchy:
        # Shared by every replication; they only depend on the grid.
        moments = tuple(grid_moments(config.params, grid, index) for index in indices)
    results = _simulate(config, moments)

    records, failures = [], []
    for index, result in enumerate(results):
        if isinstance(result, ReplicationError):
            logger.warning("%s", result)
            failures.append(result)
        else:
            records.append((index, result))

    if len(failures) > MAX_FAILURE_RATE * config.replications:
        raise McRunError(
            f"{len(failures)} of {config.replications} replications failed; "
            f"first failure: {failures[0]}"
        )

    regime = config.regime
    matrix = np.array([record.renormalized(regime) for _, record in records])
    rows = [
        _row(config, k, grid.times[index], matrix[:, k])
        for k, index in enumerate(indices)
    ]
    summary = McSummary(config, rows, [], failures, records)

    for check in config.active_checks if evaluate else ():
        result = CheckResult(
            check.value, _evaluate(check, summary), check.threshold(regime)
        )
        logger.info(
            "Check %s: statistic %.4g, threshold %.4g: %s",
            result.name,
            result.statistic,
            result.threshold,
            "pass" if result.passed else "FAIL",
        )
        summary.checks.append(result)

    logger.info(
        "Finished %d replications with %d failures", config.replications, len(failures)
    )
    return summary
