"""Figure rendering for pgames experiment CSVs."""

from .render import (
    PlotSpec,
    SchemaError,
    read_curves,
    read_hitting,
    render_comparison,
    render_convergence,
)

__all__ = [
    "PlotSpec",
    "SchemaError",
    "read_curves",
    "read_hitting",
    "render_comparison",
    "render_convergence",
]

__version__ = "0.1.0"
