"""Spin-qudit Bell tests: experiment sweeps, CHSH and CGLMP values, decay fits."""

from ._core import (
    ConfigError,
    FitRejected,
    __version__,
    cglmp_ideal,
    cglmp_value,
    chsh_maximize,
    config_hash,
    fit_decay,
    level_diagram,
    reducibility,
    report,
    run,
)

__all__ = [
    "ConfigError",
    "FitRejected",
    "__version__",
    "cglmp_ideal",
    "cglmp_value",
    "chsh_maximize",
    "config_hash",
    "fit_decay",
    "level_diagram",
    "reducibility",
    "report",
    "run",
]
