"""Koopman/DMD hybrid networks: numerics, DMD fits and the pipeline CLI."""

import json

from ._core import (
    Hybrid,
    Model,
    decision_grid,
    derive_seed,
    eigenvalues,
    fit_dmd,
    generate_yinyang,
    load_dmd,
    pinv,
    run_cli,
    thin_svd,
)

__all__ = [
    "CliError",
    "Hybrid",
    "Model",
    "cli",
    "decision_grid",
    "derive_seed",
    "eigenvalues",
    "fit_dmd",
    "generate_yinyang",
    "load_dmd",
    "pinv",
    "run_cli",
    "thin_svd",
]


class CliError(RuntimeError):
    pass


def cli(*args):
    """Runs a CLI command and returns its parsed JSON summary."""
    code, out, err = run_cli([str(a) for a in args])
    if code != 0:
        raise CliError(err.strip())
    return json.loads(out)
