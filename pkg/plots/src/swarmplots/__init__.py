"""Figure generation for swarm metrics CSVs."""

from .render import (
    DPI,
    FIGSIZE,
    FORMATS,
    METRICS_COLUMNS,
    EmptyInput,
    FigureSpec,
    SchemaError,
    read_metrics,
    render_all,
)

__version__ = "0.1.0"

__all__ = [
    "DPI",
    "FIGSIZE",
    "FORMATS",
    "METRICS_COLUMNS",
    "EmptyInput",
    "FigureSpec",
    "SchemaError",
    "read_metrics",
    "render_all",
    "__version__",
]
