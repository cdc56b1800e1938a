import json
import subprocess
import sys

import numpy as np
import pytest

from stokoop_figures import FigureRequest, SchemaError, render
from stokoop_figures.readers import read_grid_csv, reshape_rectangular


# ---------------------------------------------------------------------------
# Fixtures: synthetic inputs conforming to the CSV contracts
# ---------------------------------------------------------------------------


def _write_grid_csv(path, pts, vals, eps=0.3, kind="variance_residual"):
    lines = ["re(z),im(z),r,flagged"]
    for z, r in zip(pts, vals):
        lines.append("%.17g,%.17g,%.17g,%d" % (z.real, z.imag, r, r < eps))
    path.write_text("\n".join(lines) + "\n")
    path.with_name(path.name + ".json").write_text(
        json.dumps({"kind": kind, "epsilon": eps, "N": 9})
    )


def _rect_points(n=21, lim=1.2):
    re = np.linspace(-lim, lim, n)
    im = np.linspace(-lim, lim, n)
    return (re[None, :] + 1j * im[:, None]).ravel()


def _write_eigs_csv(path, lams):
    lines = ["re(lambda),im(lambda),res_var,res,integrated_variance"]
    for lam in lams:
        lines.append("%.17g,%.17g,0.1,," % (lam.real, lam.imag))
    path.write_text("\n".join(lines) + "\n")


def test_contour_render_synthetic(tmp_path):
    pts = _rect_points()
    vals = np.abs(pts - 1.0)  # basin at z = 1
    grid_csv = tmp_path / "grid.csv"
    eigs_csv = tmp_path / "eigs.csv"
    _write_grid_csv(grid_csv, pts, vals)
    _write_eigs_csv(eigs_csv, [1.0 + 0j, 0.3 + 0.2j])
    out = tmp_path / "fig.png"
    summary = render(
        FigureRequest("contour", str(grid_csv), str(out), eigs_path=str(eigs_csv))
    )
    assert out.exists() and out.stat().st_size > 0
    assert summary.unit_circle_drawn
    assert summary.eigenvalues_overlaid == 2
    assert abs(summary.min_point - 1.0) == np.min(np.abs(pts - 1.0))


def test_contour_disk_grid_falls_back_to_triangulation(tmp_path):
    # disk-lattice points do not form a full rectangle
    pts = np.array([z for z in _rect_points(15) if abs(z) <= 1.2])
    vals = np.abs(pts - 0.5)
    grid_csv = tmp_path / "grid.csv"
    _write_grid_csv(grid_csv, pts, vals)
    out = tmp_path / "fig.png"
    summary = render(FigureRequest("contour", str(grid_csv), str(out)))
    assert out.exists()
    assert abs(summary.min_point - 0.5) == np.min(np.abs(pts - 0.5))


def test_empty_grid_is_schema_error(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("re(z),im(z),r,flagged\n")
    with pytest.raises(SchemaError):
        render(FigureRequest("contour", str(p), str(tmp_path / "f.png")))


def test_wrong_header_is_schema_error(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaError):
        render(FigureRequest("contour", str(p), str(tmp_path / "f.png")))


def test_loglog_slope_annotation(tmp_path):
    # synthetic Monte Carlo sweep with slope ~ -1/2
    m2 = np.array([100, 1000, 10000], dtype=float)
    rng = np.random.default_rng(0)
    p = tmp_path / "sweep.csv"
    lines = ["M2,err_A,err_L"]
    for i, m in enumerate(m2):
        ea = 3.0 / np.sqrt(m) * np.exp(rng.normal(scale=0.05))
        el = 2.0 / np.sqrt(m) * np.exp(rng.normal(scale=0.05))
        lines.append(f"{m:g},{ea:.6g},{el:.6g}")
    p.write_text("\n".join(lines) + "\n")
    out = tmp_path / "conv.png"
    summary = render(FigureRequest("loglog", str(p), str(out)))
    assert out.exists()
    for slope in summary.slopes.values():
        assert -0.65 < slope < -0.35


def test_heatmap_render(tmp_path):
    n = 4
    rng = np.random.default_rng(1)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    header = ",".join(f"re{j+1},im{j+1}" for j in range(n))
    lines = [header]
    for i in range(n):
        parts = []
        for j in range(n):
            parts += ["%.17g" % m[i, j].real, "%.17g" % m[i, j].imag]
        lines.append(",".join(parts))
    p = tmp_path / "C.csv"
    p.write_text("\n".join(lines) + "\n")
    out = tmp_path / "heat.png"
    summary = render(FigureRequest("heatmap", str(p), str(out)))
    assert out.exists()
    assert summary.min_value == pytest.approx(np.abs(m).min())


def test_curves_render(tmp_path):
    p = tmp_path / "forecast.csv"
    lines = ["n,norm_prediction,C_n,delta_n"]
    for n in range(6):
        lines.append(f"{n},{1.0 / (n + 1):.6g},{0.02 * n:.6g},{0.01 * n:.6g}")
    p.write_text("\n".join(lines) + "\n")
    out = tmp_path / "curves.png"
    assert render(FigureRequest("curves", str(p), str(out))).kind == "curves"
    assert out.exists()


def test_rerender_byte_identical(tmp_path):
    pts = _rect_points(9)
    vals = np.abs(pts - 0.2)
    grid_csv = tmp_path / "grid.csv"
    _write_grid_csv(grid_csv, pts, vals)
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render(FigureRequest("contour", str(grid_csv), str(a)))
    render(FigureRequest("contour", str(grid_csv), str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_cli_entry_point(tmp_path):
    pts = _rect_points(9)
    _write_grid_csv(tmp_path / "grid.csv", pts, np.abs(pts - 1.0))
    out = tmp_path / "cli.png"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "stokoop_figures.render",
            "--kind",
            "contour",
            "--in",
            str(tmp_path / "grid.csv"),
            "--out",
            str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


# ---------------------------------------------------------------------------
# Secondary acceptance: render the real circle-map variance-pseudospectrum
# produced by the analysis CLI, basin must sit at the grid point nearest 1.
# ---------------------------------------------------------------------------


def test_acceptance_circle_variance_contour(tmp_path):
    cfg = {
        "seed": 11,
        "system": {"kind": "circle", "c": 0.2, "amp": 0.0795774715459477, "noise_sigma": 1.0},
        "dictionary": {"kind": "fourier", "n": 4, "period": 1.0},
        "sampling": {"M1": 64, "M2": 300, "scheme": "trapezoid"},
        "analysis": {
            "grid": {"kind": "rectangle", "re_range": [-1.2, 1.2],
                     "im_range": [-1.2, 1.2], "steps": [41, 41]},
            "epsilon": 0.3,
        },
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "out"
    for cmd in ("simulate", "eigs", "var-pseudospec"):
        proc = subprocess.run(
            [sys.executable, "-m", "stokoop.cli", cmd,
             "--config", str(cfg_path), "--out", str(out_dir)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr

    image = tmp_path / "var_pseudospec.png"
    summary = render(
        FigureRequest(
            "contour",
            str(out_dir / "var_pseudospec.csv"),
            str(image),
            eigs_path=str(out_dir / "eigs.csv"),
        )
    )
    pts, vals, _, sidecar = read_grid_csv(out_dir / "var_pseudospec.csv")
    nearest_to_one = pts[np.argmin(np.abs(pts - 1.0))]
    ok = (
        image.exists()
        and summary.unit_circle_drawn
        and summary.eigenvalues_overlaid > 0
        and summary.min_point == nearest_to_one
    )
    print(
        f"[{'PASS' if ok else 'FAIL'}] figure rendering: basin at "
        f"{summary.min_point:.3f}, nearest-to-1 grid point {nearest_to_one:.3f}, "
        f"eigs overlaid {summary.eigenvalues_overlaid}"
    )
    assert ok
