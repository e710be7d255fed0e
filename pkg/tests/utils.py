import os
from pathlib import Path
import subprocess
import sys


def run_cli(*args, environment=None, cwd=None):
    """Run the command-line interface in a sub-process.

    Parameters
    ----------
    *args : strings
        The command-line arguments, without the program name.
    environment: dictionary, optional
        If given, any key-value pairs in this dictionary are added to the current
        environment when running the command.
    cwd : path-like, optional
        The working directory to run in.

    Returns
    -------
    result : subprocess.CompletedProcess
        The result of the sub-process. The returncode attribute indicates the exit
        status of the process, while the stdout and stderr attribute have strings
        captured the corresponding stream. These streams are echoed to the main process
        streams.

    """
    # Get any specified paths and add all paths in this process.
    environment = dict(environment or {})
    paths = [p for p in environment.pop("PYTHONPATH", "").split(":") if p]
    paths.extend(str(Path(p).resolve()) for p in sys.path if p)

    # Generate the sub-environment.
    env = dict(os.environ)
    env["PYTHONPATH"] = ":".join(paths)
    env.update(environment)

    res = subprocess.run(
        [sys.executable, "-m", "fracbridge", *(str(arg) for arg in args)],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )

    # Echo the output streams.
    sys.stdout.write(res.stdout)
    sys.stdout.flush()
    sys.stderr.write(res.stderr)
    sys.stderr.flush()

    return res
