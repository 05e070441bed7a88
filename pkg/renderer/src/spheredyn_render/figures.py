"""Figure rendering from spheredyn CSV artifacts.

Two figure kinds:

- ``sphere-snapshot``: one 3D orthographic panel per snapshot file, with
  tokens as dots, the dominant-plane intersection with the sphere as an
  orange circle (or orange crosses for a one-dimensional eigenspace), and
  the value-matrix eigendirections as red / dark-red crosses.
- ``curves``: one panel per metrics or bands file; bands files draw the
  mean line with a shaded quantile region, metrics files plain lines. A
  vertical line marks t = log(beta) when beta is finite.

Every data column must be either plotted (``series``) or explicitly
ignored (``ignore``) by the spec, so schema growth cannot silently drop
information. Output is deterministic for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .schema import (
    METRIC_COLUMNS,
    MissingColumnError,
    SchemaMismatchError,
    load_bands,
    load_metrics,
    load_snapshot,
)

MARKER_STYLE = {
    "E": dict(color="tab:orange", label="dominant plane"),
    "F": dict(color="tab:red", label="top value direction"),
    "Fabs": dict(color="darkred", label="top |value| direction"),
}

SERIES_COLORS = {
    "align_E": "tab:orange",
    "align_F": "tab:red",
    "align_Fabs": "darkred",
    "w2_to_target": "tab:blue",
    "v_p": "tab:green",
    "energy": "tab:purple",
}


@dataclass
class Panel:
    path: str
    title: str = ""
    kind: str = "metrics"  # metrics | bands | snapshot
    series: list = field(default_factory=list)
    ignore: list = field(default_factory=list)
    logbeta_marker: bool = True


@dataclass
class FigureSpec:
    kind: str  # "sphere-snapshot" | "curves"
    output: str
    panels: list
    markers: list = field(default_factory=lambda: ["E", "F"])
    view: tuple = (18.0, -72.0)
    dpi: int = 110


def load_spec(path: str) -> FigureSpec:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    panels = []
    for p in doc.get("panels", []):
        if "snapshot" in p:
            panels.append(Panel(path=p["snapshot"], title=p.get("title", ""), kind="snapshot"))
        else:
            kind = "bands" if "bands" in p else "metrics"
            panels.append(
                Panel(
                    path=p.get("bands", p.get("metrics", "")),
                    title=p.get("title", ""),
                    kind=kind,
                    series=list(p.get("series", [])),
                    ignore=list(p.get("ignore", [])),
                    logbeta_marker=bool(p.get("logbeta_marker", True)),
                )
            )
    if not panels:
        raise SchemaMismatchError(f"{path}: figure spec has no panels")
    return FigureSpec(
        kind=str(doc.get("kind", "curves")),
        output=str(doc["output"]),
        panels=panels,
        markers=list(doc.get("markers", ["E", "F"])),
        view=tuple(doc.get("view", (18.0, -72.0))),
        dpi=int(doc.get("dpi", 110)),
    )


def _check_column_coverage(panel: Panel, present: list) -> None:
    accounted = set(panel.series) | set(panel.ignore) | {"time"}
    unlisted = [c for c in present if c not in accounted]
    if unlisted:
        raise SchemaMismatchError(
            f"{panel.path}: columns {unlisted} are neither plotted nor ignored by the spec"
        )
    for name in panel.series:
        if name not in present:
            raise MissingColumnError(f"{panel.path}: spec plots {name!r} but the file lacks it")


def _draw_sphere_panel(ax, table, markers) -> None:
    if table.tokens.shape[1] != 3:
        raise SchemaMismatchError("sphere snapshots need 3-dimensional tokens")
    theta = np.linspace(0.0, 2.0 * math.pi, 61)
    phi = np.linspace(0.0, math.pi, 31)
    ax.plot_wireframe(
        np.outer(np.cos(theta), np.sin(phi)),
        np.outer(np.sin(theta), np.sin(phi)),
        np.outer(np.ones_like(theta), np.cos(phi)),
        color="lightgray",
        linewidth=0.3,
        alpha=0.5,
    )
    for name in markers:
        basis = table.bases.get(name)
        if basis is None:
            continue
        style = MARKER_STYLE[name]
        if basis.shape[1] >= 2:
            circle = np.outer(np.cos(theta), basis[:, 0]) + np.outer(np.sin(theta), basis[:, 1])
            ax.plot(circle[:, 0], circle[:, 1], circle[:, 2], color=style["color"], linewidth=1.6)
        else:
            for sign in (+1.0, -1.0):
                v = sign * basis[:, 0]
                ax.scatter([v[0]], [v[1]], [v[2]], color=style["color"], marker="x", s=60)
    tok = table.tokens
    ax.scatter(tok[:, 0], tok[:, 1], tok[:, 2], s=6, color="tab:blue", alpha=0.8)
    ax.set_box_aspect((1, 1, 1))
    ax.set_proj_type("ortho")
    ax.set_axis_off()


def _draw_curves_panel(ax, panel: Panel) -> None:
    if panel.kind == "bands":
        table = load_bands(panel.path)
        _check_column_coverage(panel, table.metrics)
        for name in panel.series:
            color = SERIES_COLORS.get(name, "black")
            band = table.bands[name]
            ok = ~np.isnan(band["mean"])
            ax.fill_between(table.time[ok], band["lo"][ok], band["hi"][ok], color=color, alpha=0.25, linewidth=0)
            ax.plot(table.time[ok], band["mean"][ok], color=color, label=name)
        beta = table.beta
    else:
        table = load_metrics(panel.path)
        _check_column_coverage(panel, [c for c in table.columns if c != "time"])
        for name in panel.series:
            times, values = table.series(name)
            ax.plot(times, values, color=SERIES_COLORS.get(name, "black"), label=name)
        beta = table.beta
    if panel.logbeta_marker and beta is not None and math.isfinite(beta) and beta > 1.0:
        ax.axvline(math.log(beta), color="gray", linestyle="--", linewidth=1.0)
    ax.set_xlabel("t")
    ax.set_title(panel.title)
    ax.legend(loc="best", fontsize=8)


def render(spec: FigureSpec) -> str:
    """Render the figure and return the output path."""
    n = len(spec.panels)
    if spec.kind == "sphere-snapshot":
        fig = plt.figure(figsize=(3.2 * n, 3.4))
        for idx, panel in enumerate(spec.panels):
            ax = fig.add_subplot(1, n, idx + 1, projection="3d")
            table = load_snapshot(panel.path)
            _draw_sphere_panel(ax, table, spec.markers)
            ax.view_init(elev=spec.view[0], azim=spec.view[1])
            title = panel.title or (f"t = {table.time:g}" if table.time is not None else "")
            ax.set_title(title)
    elif spec.kind == "curves":
        fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 3.2), squeeze=False)
        for ax, panel in zip(axes[0], spec.panels):
            _draw_curves_panel(ax, panel)
        fig.tight_layout()
    else:
        raise SchemaMismatchError(f"unknown figure kind {spec.kind!r}")
    metadata = {"Date": None} if spec.output.endswith(".svg") else None
    fig.savefig(spec.output, dpi=spec.dpi, metadata=metadata)
    plt.close(fig)
    return spec.output
