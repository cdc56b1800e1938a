"""Pipeline driver: simulate -> assemble -> analyze -> report.

One JSON run-config describes the whole analysis; every subcommand
reads it, checks it against the output directory's manifest, and writes
its files plus an updated manifest. All randomness is derived from the
single root seed through labeled substreams, so reruns with the same
config are byte-identical.

Exit codes: 0 success, 2 config error, 3 capability error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ConcentrationInputs, concentration_bounds, dictionary_constants, estimate_upsilon
from .dictionary import Dictionary, fourier_dictionary, laplacian_rbf_dictionary, pick_centers
from .errors import CapabilityError, ConfigError, InstabilityError, RankError
from .forecast import (
    ForecastBoundInputs,
    deltas_from_reference,
    forecast_error_bound,
    iterate,
    koopman_matrix,
    operator_norm_estimate,
    subspace_error,
)
from .matrices import (
    KoopmanMatrices,
    assemble_batched,
    assemble_unbatched,
    export_matrices_csv,
    export_matrix_csv,
    save_matrices,
)
from .pseudospectra import (
    KIND_RESIDUAL,
    KIND_VARIANCE,
    default_grid,
    pseudospectrum,
    rectangle_grid,
    save_pseudospectrum_csv,
)
from .snapshots import (
    BatchedSnapshotSet,
    BinningSpec,
    SnapshotSet,
    bin_to_batched,
    flatten_batched,
    load_snapshots,
    save_snapshots,
)
from .spectral import (
    RegularizationPolicy,
    covariance_matrix,
    evaluate_residuals,
    gram_whitener,
    solve_eigenpairs,
)
from .systems import (
    CircleMapConfig,
    VdpConfig,
    circle_lipschitz,
    circle_reference_matrices,
    generate_circle_batched,
    generate_circle_iid,
    vdp_batched_from_trajectory,
    vdp_unbatched_from_trajectory,
)

_SUBSTREAMS = {"simulate": 0, "dictionary": 1, "bounds": 2}
_FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for key in ("system", "dictionary"):
        if key not in cfg:
            raise ConfigError(f"config lacks required section {key!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _substream_seed(cfg: dict, label: str) -> int:
    if "seed" not in cfg:
        raise ConfigError("config lacks the root 'seed' required for stochastic stages")
    ss = np.random.SeedSequence(int(cfg["seed"]), spawn_key=(_SUBSTREAMS[label],))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _analysis(cfg: dict) -> dict:
    return cfg.get("analysis", {})


def _reg(cfg: dict) -> RegularizationPolicy:
    return RegularizationPolicy(rel_cutoff=float(_analysis(cfg).get("rel_cutoff", 1e-12)))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _check_and_update_manifest(out: Path, cfg: dict, new_outputs: list[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    mpath = out / "manifest.json"
    h = config_hash(cfg)
    if mpath.exists():
        manifest = json.loads(mpath.read_text())
        if manifest.get("config_hash") != h:
            raise ConfigError(
                "config does not match the manifest in the output directory; "
                "outputs there were produced by a different configuration"
            )
        outputs = set(manifest.get("outputs", []))
    else:
        outputs = set()
    outputs.update(new_outputs)
    manifest = {
        "config_hash": h,
        "outputs": sorted(outputs),
        "versions": {
            "stokoop": __version__,
            "numpy": np.__version__,
            "python": "%d.%d" % sys.version_info[:2],
        },
    }
    mpath.write_text(json.dumps(manifest, sort_keys=True, indent=1))


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def _system_config(cfg: dict):
    sysc = cfg["system"]
    kind = sysc.get("kind")
    if kind == "circle":
        return CircleMapConfig(
            c=float(sysc.get("c", 0.2)),
            amp=float(sysc.get("amp", 1.0 / (4.0 * np.pi))),
            noise_sigma=float(sysc.get("noise_sigma", 1.0)),
            seed=_substream_seed(cfg, "simulate"),
        )
    if kind == "vdp":
        return VdpConfig(
            mu=float(sysc.get("mu", 0.5)),
            delta=float(sysc.get("delta", 0.02)),
            em_step=float(sysc.get("em_step", 3e-3)),
            koopman_dt=float(sysc.get("koopman_dt", 0.3)),
            burn_in=sysc.get("burn_in"),
            seed=_substream_seed(cfg, "simulate"),
        )
    if kind == "file":
        return None
    raise ConfigError(f"unknown system kind {kind!r}")


def _simulate_data(cfg: dict):
    sysc = cfg["system"]
    sampling = cfg.get("sampling")
    if sampling is None:
        raise ConfigError("config lacks the 'sampling' section needed to simulate")
    m1 = int(sampling.get("M1", 0))
    m2 = int(sampling.get("M2", 1))
    if m1 < 1:
        raise ConfigError("sampling.M1 must be a positive integer")
    system = _system_config(cfg)
    if sysc["kind"] == "circle":
        scheme = sampling.get("scheme", "trapezoid")
        if scheme == "trapezoid":
            if m2 < 1:
                raise ConfigError("sampling.M2 must be >= 1")
            return generate_circle_batched(system, m1, m2)
        if scheme == "iid":
            return generate_circle_iid(system, m1)
        raise ConfigError(f"unknown sampling scheme {scheme!r}")
    if sysc["kind"] == "vdp":
        if m2 >= 2:
            return vdp_batched_from_trajectory(system, m1)
        return vdp_unbatched_from_trajectory(system, m1)
    raise ConfigError("system kind 'file' has nothing to simulate")


def cmd_simulate(cfg: dict, out: Path, **_) -> None:
    data = _simulate_data(cfg)
    save_snapshots(data, out / "snapshots.csv")
    prov = {
        "config_hash": config_hash(cfg),
        "system": cfg["system"]["kind"],
        "batched": isinstance(data, BatchedSnapshotSet),
        "M1": data.batch_count if isinstance(data, BatchedSnapshotSet) else data.count,
        "M2": data.realization_count if isinstance(data, BatchedSnapshotSet) else 1,
    }
    (out / "snapshots.provenance.json").write_text(
        json.dumps(prov, sort_keys=True, indent=1)
    )
    _check_and_update_manifest(out, cfg, ["snapshots.csv", "snapshots.provenance.json"])


def _load_data(cfg: dict, out: Path, bin_spec: BinningSpec | None):
    sysc = cfg["system"]
    if sysc.get("kind") == "file":
        path = Path(sysc.get("path", ""))
        if not path.exists():
            raise ConfigError(f"snapshot file {path} does not exist")
    else:
        path = out / "snapshots.csv"
        if not path.exists():
            raise ConfigError(f"{path} not found; run the simulate stage first")
    data = load_snapshots(path)
    if bin_spec is not None and isinstance(data, SnapshotSet):
        data = bin_to_batched(data, bin_spec)
    return data


def _dictionary(cfg: dict, data) -> Dictionary:
    spec = cfg["dictionary"]
    kind = spec.get("kind")
    if kind == "fourier":
        return fourier_dictionary(int(spec.get("n", 10)), float(spec.get("period", 1.0)))
    if kind == "rbf":
        if spec.get("centers_path"):
            centers = np.loadtxt(spec["centers_path"], delimiter=",", ndmin=2)
        else:
            count = int(spec.get("count", 100))
            centers = pick_centers(
                data.states_x, count, seed=_substream_seed(cfg, "dictionary")
            )
        return laplacian_rbf_dictionary(centers, spec.get("scale"))
    raise ConfigError(f"unknown dictionary kind {kind!r}")


def _assemble(cfg: dict, out: Path, bin_spec=None):
    data = _load_data(cfg, out, bin_spec)
    if isinstance(data, BatchedSnapshotSet) and data.realization_count == 1:
        data = flatten_batched(data)
    dictionary = _dictionary(cfg, data)
    if isinstance(data, BatchedSnapshotSet):
        mats = assemble_batched(data, dictionary)
    else:
        mats = assemble_unbatched(data, dictionary)
    return data, dictionary, mats


def cmd_matrices(cfg: dict, out: Path, bin_spec=None, **_) -> None:
    _, _, mats = _assemble(cfg, out, bin_spec)
    save_matrices(mats, out / "matrices.bin")
    written = export_matrices_csv(mats, out)
    names = ["matrices.bin", "matrices.bin.json"] + [p.name for p in written]
    if mats.has_H:
        # covariance export feeds the heat-map figure kind
        export_matrix_csv(covariance_matrix(mats), out / "covariance.csv")
        names.append("covariance.csv")
    _check_and_update_manifest(out, cfg, names)


def _fmt_opt(v) -> str:
    return "" if v is None else _FLOAT_FMT % v


def cmd_eigs(cfg: dict, out: Path, bin_spec=None, **_) -> None:
    _, _, mats = _assemble(cfg, out, bin_spec)
    pairs = evaluate_residuals(solve_eigenpairs(mats, _reg(cfg)), mats)
    lines = ["re(lambda),im(lambda),res_var,res,integrated_variance"]
    for p in pairs:
        lines.append(
            ",".join(
                [
                    _FLOAT_FMT % p.eigenvalue.real,
                    _FLOAT_FMT % p.eigenvalue.imag,
                    _FLOAT_FMT % p.res_var,
                    _fmt_opt(p.res),
                    _fmt_opt(p.integrated_variance),
                ]
            )
        )
    (out / "eigs.csv").write_text("\n".join(lines) + "\n")
    _check_and_update_manifest(out, cfg, ["eigs.csv"])


def _grid(cfg: dict):
    spec = _analysis(cfg).get("grid", {"kind": "default", "N": 4})
    kind = spec.get("kind")
    if kind == "default":
        return default_grid(int(spec.get("N", 4)))
    if kind == "rectangle":
        return rectangle_grid(
            spec.get("re_range", [-1.2, 1.2]),
            spec.get("im_range", [-1.2, 1.2]),
            spec.get("steps", [41, 41]),
        )
    raise ConfigError(f"unknown grid kind {kind!r}")


def _pseudospec(cfg: dict, out: Path, kind: str, filename: str, bin_spec, threads):
    _, dictionary, mats = _assemble(cfg, out, bin_spec)
    eps = float(_analysis(cfg).get("epsilon", 0.3))
    grid = _grid(cfg)
    ps = pseudospectrum(grid, mats, eps, kind, _reg(cfg), threads=threads)
    meta = {
        "N": dictionary.size,
        "dictionary": f"{dictionary.kind}[N={dictionary.size}]",
        "grid": grid.provenance,
    }
    save_pseudospectrum_csv(ps, out / filename, meta)
    _check_and_update_manifest(out, cfg, [filename, filename + ".json"])


def cmd_pseudospec(cfg, out, bin_spec=None, threads=1, **_) -> None:
    _pseudospec(cfg, out, KIND_RESIDUAL, "pseudospec.csv", bin_spec, threads)


def cmd_var_pseudospec(cfg, out, bin_spec=None, threads=1, **_) -> None:
    _pseudospec(cfg, out, KIND_VARIANCE, "var_pseudospec.csv", bin_spec, threads)


def _observable(cfg: dict, data, dictionary, mats, reg) -> np.ndarray:
    spec = _analysis(cfg).get("observable", {"kind": "coordinate", "index": 0})
    kind = spec.get("kind")
    if kind == "dictionary":
        g = np.zeros(dictionary.size, dtype=complex)
        g[int(spec.get("index", 0))] = 1.0
        return g
    if kind == "coeffs":
        re = np.asarray(spec.get("re", []), dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        if re.size != dictionary.size:
            raise ConfigError("observable coefficient length must equal N")
        return re + 1j * im
    if kind == "coordinate":
        idx = int(spec.get("index", 0))
        if not 0 <= idx < data.dimension:
            raise ConfigError("observable coordinate index out of range")
        # Weighted least-squares projection of the coordinate function.
        PX = dictionary.matrix_evaluator(data.states_x)
        target = data.states_x[:, idx]
        rhs = PX.conj().T @ (data.weights * target)
        wh = gram_whitener(mats.G, reg)
        return wh.basis @ (wh.basis.conj().T @ rhs)
    raise ConfigError(f"unknown observable kind {kind!r}")


def cmd_forecast(cfg: dict, out: Path, bin_spec=None, **_) -> None:
    data, dictionary, mats = _assemble(cfg, out, bin_spec)
    if not mats.has_H:
        raise CapabilityError(
            "forecast error bounds need batched data (M2 >= 2) for the "
            "subspace-error estimate; use --bin or simulate batched data"
        )
    ana = _analysis(cfg)
    reg = _reg(cfg)
    K = koopman_matrix(mats, reg)
    g = _observable(cfg, data, dictionary, mats, reg)
    norm_K = ana.get("norm_K")
    norm_K = float(norm_K) if norm_K is not None else operator_norm_estimate(mats, reg)

    reference = ana.get("reference", "none")
    if reference == "analytic":
        sysc = cfg["system"]
        if sysc.get("kind") != "circle" or float(sysc.get("amp", 0.0)) != 0.0:
            raise ConfigError("analytic reference is only available for the amp=0 circle map")
        if dictionary.kind != "fourier":
            raise ConfigError("analytic reference requires the Fourier dictionary")
        ref = circle_reference_matrices(_system_config(cfg), (dictionary.size - 1) // 2)
        delta_G, delta_A = deltas_from_reference(mats, ref, norm_K)
    elif reference == "none":
        delta_G, delta_A = 0.0, 0.0
    else:
        raise ConfigError(f"unknown reference kind {reference!r}")

    horizons = ana.get("horizons", list(range(0, 11)))
    lines = ["n,norm_prediction,C_n,delta_n"]
    for n in horizons:
        n = int(n)
        gn = iterate(K, g, n)
        norm_pred = float(np.sqrt(max(0.0, np.real(gn.conj() @ mats.G @ gn))))
        dn = subspace_error(mats, K, g, n, norm_K)
        cn = forecast_error_bound(
            ForecastBoundInputs(norm_K=norm_K, delta_G=delta_G, delta_A=delta_A, delta_n=dn),
            n,
        )
        lines.append(
            f"{n}," + ",".join(_FLOAT_FMT % v for v in (norm_pred, cn, dn))
        )
    (out / "forecast.csv").write_text("\n".join(lines) + "\n")
    _check_and_update_manifest(out, cfg, ["forecast.csv"])


def cmd_bounds(cfg: dict, out: Path, bin_spec=None, **_) -> None:
    data, dictionary, _ = _assemble(cfg, out, bin_spec)
    ana = _analysis(cfg)
    spec = ana.get("bounds", {})
    alpha, beta = dictionary_constants(dictionary)
    sysc = cfg["system"]

    upsilon = spec.get("upsilon")
    lipschitz_F = spec.get("lipschitz_F")
    if sysc.get("kind") == "circle":
        system = _system_config(cfg)
        if lipschitz_F is None:
            lipschitz_F = circle_lipschitz(system)
        if upsilon is None:
            n_samp = int(spec.get("samples", 20000))
            gen = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(_substream_seed(cfg, "bounds")))
            )
            x = gen.random(n_samp)
            tau = system.noise_sigma * gen.random(n_samp)
            upsilon = estimate_upsilon(np.column_stack([x, tau]))
    if upsilon is None or lipschitz_F is None:
        raise ConfigError(
            "bounds need 'upsilon' and 'lipschitz_F' in analysis.bounds "
            "(only the circle system provides defaults)"
        )
    t = float(spec.get("t", 0.5))
    m_values = spec.get("M_values", [10**3, 10**4, 10**5, 10**6])
    lines = ["M,t,p_A,p_G,p_L,vacuous"]
    for m in m_values:
        cb = concentration_bounds(
            ConcentrationInputs(
                M=int(m),
                N=dictionary.size,
                t=t,
                upsilon=float(upsilon),
                c=float(lipschitz_F),
                alpha=alpha,
                beta=beta,
            )
        )
        vac = int(any(cb.vacuous.values()))
        lines.append(
            f"{int(m)},"
            + ",".join(_FLOAT_FMT % v for v in (t, cb.p_A, cb.p_G, cb.p_L))
            + f",{vac}"
        )
    (out / "bounds.csv").write_text("\n".join(lines) + "\n")
    _check_and_update_manifest(out, cfg, ["bounds.csv"])


def cmd_all(cfg: dict, out: Path, bin_spec=None, threads=1, **_) -> None:
    if cfg["system"].get("kind") != "file":
        cmd_simulate(cfg, out)
    cmd_matrices(cfg, out, bin_spec=bin_spec)
    cmd_eigs(cfg, out, bin_spec=bin_spec)
    cmd_var_pseudospec(cfg, out, bin_spec=bin_spec, threads=threads)
    cmd_pseudospec(cfg, out, bin_spec=bin_spec, threads=threads)
    cmd_forecast(cfg, out, bin_spec=bin_spec)
    cmd_bounds(cfg, out, bin_spec=bin_spec)


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def parse_bin_spec(text: str | None) -> BinningSpec | None:
    if text is None:
        return None
    parts = text.split(":")
    try:
        if parts[0] == "grid" and len(parts) == 3:
            res = [int(r) for r in parts[1].split(",")]
            return BinningSpec("grid", res, int(parts[2]))
        if parts[0] == "centroid" and len(parts) == 3:
            centers = np.loadtxt(parts[1], delimiter=",", ndmin=2)
            return BinningSpec("nearest-centroid", centers, int(parts[2]))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad --bin spec {text!r}: {exc}") from None
    raise ConfigError(
        f"bad --bin spec {text!r}; expected grid:R1[,R2,...]:MIN or centroid:FILE:MIN"
    )


_COMMANDS = {
    "simulate": cmd_simulate,
    "matrices": cmd_matrices,
    "eigs": cmd_eigs,
    "pseudospec": cmd_pseudospec,
    "var-pseudospec": cmd_var_pseudospec,
    "forecast": cmd_forecast,
    "bounds": cmd_bounds,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokoop",
        description="Verified spectral analysis of stochastic Koopman operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run-config JSON path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")
        p.add_argument("--bin", default=None, help="bin unbatched data, e.g. grid:16:2")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](
            cfg,
            out,
            bin_spec=parse_bin_spec(args.bin),
            threads=max(1, args.threads),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 3
    except (RankError, InstabilityError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        # precondition violations from config-derived parameters
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
