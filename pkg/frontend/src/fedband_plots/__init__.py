"""PNG figures from fedband CSV outputs."""

from .plots import (
    DPI,
    FIGSIZE,
    KINDS,
    REGRET_COLUMNS,
    SWEEP_COLUMNS,
    PlotError,
    PlotJob,
    SchemaError,
    build_regret_figure,
    build_sweep_figure,
    plot_alpha_sweep,
    plot_regret,
    read_columns,
    render,
)

__all__ = [
    "DPI",
    "FIGSIZE",
    "KINDS",
    "REGRET_COLUMNS",
    "SWEEP_COLUMNS",
    "PlotError",
    "PlotJob",
    "SchemaError",
    "build_regret_figure",
    "build_sweep_figure",
    "plot_alpha_sweep",
    "plot_regret",
    "read_columns",
    "render",
]
