# Copyright 2026 The fracbridge developers
# Distributed under the terms of the BSD license; see pyproject.toml for details.

"""Run configuration files.

A run is described by a flat JSON object with the keys of DEFAULTS. Files must give
every key and no others, so that a typo is reported instead of silently running with a
default. Values are checked, and converted to the types of the other modules, before any
computation starts.

"""

import json
import logging
import math
import os
import pathlib

from .bridge import ModelParams
from .estimator import EvalLadder
from .fbm import HurstParam, Sampler, TimeGrid
from .limits import classify
from .mcharness import Check, McConfig
from .specialfn import DomainError


logger = logging.getLogger(__name__)


DEFAULTS = {
    "hurst": 0.7,
    "alpha": 0.5,
    "horizon": 1.0,
    "grid_n": 2**20,
    "ladder_epsilons": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
    "replications": 1000,
    "seed": 20240501,
    "sampler": "davies_harte",
    "checks": [],
    "out_dir": "fracbridge-out",
}

THREADS_VARIABLE = "FRACBRIDGE_THREADS"


class ConfigError(ValueError):
    """A configuration entry is missing, unknown or invalid.

    The message starts with the name of the offending entry.

    """

    pass


def _checked(key, func, *args):
    """Internal: call func, reporting domain errors against a configuration key."""
    try:
        return func(*args)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: {e}") from None


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class RunConfigParser:
    """Holds the entries of a run configuration and converts them on request."""

    def __init__(self):
        self._values = {}

    def __getitem__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"{key}: not set.") from None

    def clear(self):
        self._values.clear()

    def read_dict(self, values):
        self._values.update(values)

    def read(self, filename):
        """Read configuration entries from a JSON file.

        Unlike read_kwargs(), a file has to give every entry. Unknown entries are
        rejected rather than ignored, giving an early indication that something has been
        misconfigured.

        Raises
        ------
        ConfigError
            The file is not a JSON object, or has missing or unknown entries.

        """
        with open(filename, encoding="utf-8") as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{filename}: not valid JSON ({e}).") from None

        if not isinstance(values, dict):
            raise ConfigError(f"{filename}: expected a JSON object.")

        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            if len(unknown) == 1:
                raise ConfigError(f"{filename}: unknown option {unknown[0]}")
            raise ConfigError(f"{filename}: unknown options {', '.join(unknown)}")

        missing = sorted(set(DEFAULTS) - set(values))
        if missing:
            if len(missing) == 1:
                raise ConfigError(f"{filename}: missing option {missing[0]}")
            raise ConfigError(f"{filename}: missing options {', '.join(missing)}")

        self.read_dict(values)
        logger.debug("Read configuration from %s", filename)
        return filename

    def read_kwargs(self, **kwargs):
        """Override individual configuration entries."""
        for key in kwargs:
            if key not in DEFAULTS:
                raise ConfigError(f"{key}: unknown configuration option.")
        self.read_dict(kwargs)

    def getfloat(self, key):
        value = self[key]
        if not _is_number(value) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a finite number, got {value!r}.")
        return float(value)

    def getint(self, key):
        value = self[key]
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not _is_number(value) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}.")
        return value

    def getepsilons(self, key="ladder_epsilons"):
        value = self[key]
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}.")
        return tuple(float(v) for v in value)

    def getsampler(self, key="sampler"):
        value = self[key]
        try:
            return Sampler(value)
        except ValueError:
            choices = ", ".join(s.value for s in Sampler)
            raise ConfigError(f"{key}: unknown sampler {value!r} (use {choices}).") from None

    def getchecks(self, key="checks"):
        value = self[key]
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list of check names, got {value!r}.")
        try:
            return tuple(Check(v) for v in value)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}.") from None

    def getpath(self, key="out_dir"):
        value = self[key]
        if not isinstance(value, str) or not value.strip():
            raise ConfigError(f"{key}: expected a non-empty path, got {value!r}.")
        return pathlib.Path(value)

    def params(self):
        """The model parameters; α = 0 and H < 1/2 are allowed for simulation."""
        hurst = _checked("hurst", HurstParam, self.getfloat("hurst"))
        horizon = self.getfloat("horizon")
        if not horizon > 0:
            raise ConfigError(f"horizon: must be positive (got {horizon}).")
        alpha = self.getfloat("alpha")
        return _checked("alpha", ModelParams, alpha, horizon, hurst)

    def ladder(self):
        horizon = self.getfloat("horizon")
        return _checked("ladder_epsilons", EvalLadder, horizon, self.getepsilons())

    def grid(self):
        n = self.getint("grid_n")
        if n < 2 or n & (n - 1):
            raise ConfigError(f"grid_n: must be a power of two (got {n}).")
        horizon = self.getfloat("horizon")
        smallest = self.ladder().epsilons[-1]
        return _checked("grid_n", TimeGrid.for_horizon, horizon, n, smallest)

    def seed(self):
        seed = self.getint("seed")
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer (got {seed}).")
        return seed

    def mc_config(self, scale_factor=1.0, workers=None):
        """The complete, validated Monte Carlo configuration.

        Parameters
        ----------
        scale_factor : float, optional
            Passed to McConfig.
        workers : int, optional
            Worker processes; by default from the environment (see worker_count()).

        """
        params = self.params()
        regime = _checked("alpha", classify, params)
        ladder = self.ladder()
        grid = self.grid()
        _checked("grid_n", ladder.check_resolution, grid)

        replications = self.getint("replications")
        if replications < McConfig.min_replications:
            raise ConfigError(
                f"replications: at least {McConfig.min_replications} are needed "
                f"(got {replications})."
            )

        checks = self.getchecks()
        for check in checks:
            if not check.applies_to(regime):
                raise ConfigError(
                    f"checks: {check.value} does not apply to regime {regime.value}."
                )

        if workers is None:
            workers = worker_count()
        return McConfig(
            params=params,
            grid_n=grid.n_steps,
            ladder=ladder,
            replications=replications,
            global_seed=self.seed(),
            sampler=self.getsampler(),
            checks=checks,
            scale_factor=scale_factor,
            workers=min(workers, replications),
        )


def worker_count(environ=None):
    """The number of worker processes, from FRACBRIDGE_THREADS.

    Unset, empty or 0 means one worker per CPU.

    Raises
    ------
    ConfigError
        The variable is not a non-negative integer.

    """
    environ = os.environ if environ is None else environ
    value = environ.get(THREADS_VARIABLE, "").strip()
    try:
        count = int(value or 0)
    except ValueError:
        count = -1
    if count < 0:
        raise ConfigError(
            f"{THREADS_VARIABLE}: expected a non-negative integer, got {value!r}."
        )
    return count or os.cpu_count() or 1


# The current configuration.
_config = RunConfigParser()


def _config_reset():
    """Internal: reset the configuration to the default state."""
    global _config
    _config.clear()
    _config.read_dict(json.loads(json.dumps(DEFAULTS)))


def load(filename=None, **kwargs):
    """Reset the configuration, then read a file and keyword overrides.

    Returns
    -------
    RunConfigParser

    """
    _config_reset()
    if filename is not None:
        _config.read(filename)
    if kwargs:
        _config.read_kwargs(**kwargs)
    return _config


_config_reset()
