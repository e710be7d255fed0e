import json

import numpy as np
import pytest

from fracbridge.config import DEFAULTS


def pytest_itemcollected(item):
    """Use the test docstring (if available) as the node ID.

    The node ID is printed for each test; by default this is in the format
    filename::classname::function. If available, use the docstring instead as
    this is more readable.

    """
    node = item.obj
    item._nodeid = node.__doc__.strip() if node.__doc__ else node.__name__


@pytest.fixture
def rng():
    """A fixed Philox stream for tests which need random numbers."""
    return np.random.Generator(np.random.Philox(key=20240501))


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration file based on the defaults.

    Keyword arguments override entries; an entry given as None is left out. The out_dir
    defaults to a directory below the test's temporary path.

    """

    def write(name="run.json", **kwargs):
        values = dict(DEFAULTS, out_dir=str(tmp_path / "out"))
        values.update(kwargs)
        values = {k: v for k, v in values.items() if v is not None}
        filename = tmp_path / name
        filename.write_text(json.dumps(values), encoding="utf-8")
        return filename

    return write
