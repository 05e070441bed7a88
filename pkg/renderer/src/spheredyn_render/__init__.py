"""spheredyn-render: figure rendering from spheredyn CSV artifacts.

A pure view layer: it parses the documented CSV schema (metrics, bands,
snapshots) and draws sphere-snapshot panels or metric curves; no dynamics
or metrics are ever recomputed.
"""

from .figures import FigureSpec, Panel, load_spec, render
from .schema import (
    BandsTable,
    MetricsTable,
    MissingColumnError,
    SchemaMismatchError,
    SnapshotTable,
    load_bands,
    load_metrics,
    load_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "Panel",
    "load_spec",
    "render",
    "BandsTable",
    "MetricsTable",
    "SnapshotTable",
    "MissingColumnError",
    "SchemaMismatchError",
    "load_bands",
    "load_metrics",
    "load_snapshot",
    "__version__",
]
