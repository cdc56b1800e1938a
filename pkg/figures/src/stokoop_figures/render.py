"""Render analysis CSVs into publication-style figures.

Four figure kinds:

  contour  pseudospectrum grid -> epsilon-level contours with eigenvalue
           overlay and the unit circle for orientation
  loglog   convergence sweep -> log-log curves with fitted slopes
  heatmap  matrix CSV -> magnitude heat map
  curves   forecast report -> prediction norm, bound, subspace error vs n

Rendering is read-only over its inputs. Images carry no timestamps, so
re-rendering identical inputs reproduces the file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    read_eigs_csv,
    read_forecast_csv,
    read_grid_csv,
    read_matrix_csv,
    read_series_csv,
    reshape_rectangular,
)

__all__ = ["FigureRequest", "RenderSummary", "render", "main"]

DEFAULT_LEVELS = (0.05, 0.1, 0.2, 0.3, 0.5, 0.8)


@dataclass(frozen=True)
class FigureRequest:
    kind: str
    input_path: str
    output_path: str
    eigs_path: str | None = None
    levels: tuple[float, ...] = DEFAULT_LEVELS
    title: str | None = None

    def __post_init__(self):
        if self.kind not in ("contour", "loglog", "heatmap", "curves"):
            raise ValueError(f"unknown figure kind {self.kind!r}")


@dataclass(frozen=True)
class RenderSummary:
    """What was drawn, for downstream checks without reopening the image."""

    output_path: str
    kind: str
    min_value: float | None = None
    min_point: complex | None = None
    unit_circle_drawn: bool = False
    eigenvalues_overlaid: int = 0
    slopes: dict = field(default_factory=dict)


def _save(fig, path: str) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if out.suffix == ".svg" else None
    fig.savefig(out, dpi=150, bbox_inches="tight", metadata=metadata)
    plt.close(fig)


def _draw_unit_circle(ax) -> None:
    theta = np.linspace(0, 2 * np.pi, 361)
    ax.plot(np.cos(theta), np.sin(theta), color="0.4", lw=0.8, ls="--", zorder=3)


def _render_contour(req: FigureRequest) -> RenderSummary:
    points, values, _, sidecar = read_grid_csv(req.input_path)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    safe = np.maximum(values, 1e-16)
    rect = reshape_rectangular(points, safe)
    levels = sorted(req.levels)
    if rect is not None:
        re, im, mesh = rect
        filled = ax.contourf(re, im, np.log10(mesh), levels=30, cmap="viridis")
        cont = ax.contour(re, im, mesh, levels=levels, colors="w", linewidths=0.7)
    else:
        filled = ax.tricontourf(
            points.real, points.imag, np.log10(safe), levels=30, cmap="viridis"
        )
        cont = ax.tricontour(
            points.real, points.imag, safe, levels=levels, colors="w", linewidths=0.7
        )
    ax.clabel(cont, fontsize=6, fmt="%.2g")
    fig.colorbar(filled, ax=ax, label="log10 minimized residual")

    n_eigs = 0
    if req.eigs_path:
        lam, _, _, _ = read_eigs_csv(req.eigs_path)
        ax.plot(lam.real, lam.imag, "r.", ms=5, zorder=4)
        n_eigs = lam.size
    _draw_unit_circle(ax)
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.set_aspect("equal")
    kind = sidecar.get("kind", "residual")
    ax.set_title(req.title or f"{kind} pseudospectrum")
    _save(fig, req.output_path)

    i_min = int(np.argmin(values))
    return RenderSummary(
        output_path=req.output_path,
        kind="contour",
        min_value=float(values[i_min]),
        min_point=complex(points[i_min]),
        unit_circle_drawn=True,
        eigenvalues_overlaid=n_eigs,
    )


def _render_loglog(req: FigureRequest) -> RenderSummary:
    xname, x, series = read_series_csv(req.input_path)
    if np.any(x <= 0):
        raise SchemaError("log-log sweep needs positive x values")
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    slopes = {}
    for name, y in series.items():
        good = y > 0
        if good.sum() < 2:
            continue
        slope = float(np.polyfit(np.log10(x[good]), np.log10(y[good]), 1)[0])
        slopes[name] = slope
        ax.loglog(x, y, "o-", label=f"{name} (slope {slope:.2f})")
    ax.set_xlabel(xname)
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if req.title:
        ax.set_title(req.title)
    _save(fig, req.output_path)
    return RenderSummary(output_path=req.output_path, kind="loglog", slopes=slopes)


def _render_heatmap(req: FigureRequest) -> RenderSummary:
    m = read_matrix_csv(req.input_path)
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    img = ax.imshow(np.abs(m), cmap="magma", origin="upper")
    fig.colorbar(img, ax=ax, label="|entry|")
    ax.set_title(req.title or "matrix magnitude")
    _save(fig, req.output_path)
    return RenderSummary(
        output_path=req.output_path, kind="heatmap", min_value=float(np.abs(m).min())
    )


def _render_curves(req: FigureRequest) -> RenderSummary:
    n, norm_pred, c_n, delta_n = read_forecast_csv(req.input_path)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.plot(n, norm_pred, "o-", label="prediction norm")
    ax.plot(n, c_n, "s-", label="error bound C_n")
    ax.plot(n, delta_n, "^-", label="subspace error")
    ax.set_xlabel("horizon n")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if req.title:
        ax.set_title(req.title)
    _save(fig, req.output_path)
    return RenderSummary(output_path=req.output_path, kind="curves")


_RENDERERS = {
    "contour": _render_contour,
    "loglog": _render_loglog,
    "heatmap": _render_heatmap,
    "curves": _render_curves,
}


def render(request: FigureRequest) -> RenderSummary:
    """Draw the requested figure and return a summary of what was plotted."""
    return _RENDERERS[request.kind](request)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stokoop-render", description="Render stokoop CSV outputs as figures"
    )
    parser.add_argument("--kind", required=True,
                        choices=["contour", "loglog", "heatmap", "curves"])
    parser.add_argument("--in", dest="input_path", required=True)
    parser.add_argument("--eigs", dest="eigs_path", default=None)
    parser.add_argument("--out", dest="output_path", required=True)
    parser.add_argument("--levels", default=None,
                        help="comma-separated contour levels")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    levels = (
        tuple(float(v) for v in args.levels.split(","))
        if args.levels
        else DEFAULT_LEVELS
    )
    try:
        summary = render(
            FigureRequest(
                kind=args.kind,
                input_path=args.input_path,
                output_path=args.output_path,
                eigs_path=args.eigs_path,
                levels=levels,
                title=args.title,
            )
        )
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {summary.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
