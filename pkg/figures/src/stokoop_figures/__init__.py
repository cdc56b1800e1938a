"""Figure rendering for stokoop analysis outputs.

Consumes the documented CSV contracts only; never imports the analysis
package.
"""

__version__ = "0.1.0"

from .readers import (
    SchemaError,
    read_eigs_csv,
    read_forecast_csv,
    read_grid_csv,
    read_matrix_csv,
    read_series_csv,
)
from .render import DEFAULT_LEVELS, FigureRequest, RenderSummary, render
