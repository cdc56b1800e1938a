"""Assembly of the Galerkin estimate matrices G, A, L and (batched) H.

For snapshot evaluation matrices PX, PY and the diagonal weight matrix
W the unbatched estimators are

    G = PX* W PX,   A = PX* W PY,   L = PY* W PY.

Batched data with realizations PY(1), ..., PY(M2) additionally gives
the cross-batch estimator of K*K,

    H = average over ordered pairs k != k' of PY(k)* W PY(k'),

which is Hermitian by construction and whose diagonal pairs are
statistically independent. A and L average over all realizations, which
leaves their limits unchanged while lowering the estimator variance.

Accumulation is chunked over snapshot rows so million-row datasets
stream through without materializing the full evaluation matrix.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dictionary import Dictionary
from .snapshots import BatchedSnapshotSet, SnapshotSet

__all__ = [
    "KoopmanMatrices",
    "assemble_unbatched",
    "assemble_batched",
    "estimation_error",
    "save_matrices",
    "load_matrices",
    "export_matrices_csv",
]

_CHUNK_ROWS = 1 << 15
_MAGIC = b"RKOOPMX1"


@dataclass(frozen=True)
class KoopmanMatrices:
    """The Hermitian-structured estimator quadruple with assembly metadata.

    G and L are symmetrized after assembly; H, when present, is
    Hermitian by its averaged formula. All four are N x N complex.
    """

    G: np.ndarray
    A: np.ndarray
    L: np.ndarray
    H: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mats = {"G": self.G, "A": self.A, "L": self.L}
        if self.H is not None:
            mats["H"] = self.H
        N = None
        for name, m in mats.items():
            m = np.ascontiguousarray(np.asarray(m, dtype=complex))
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square, got shape {m.shape}")
            if N is None:
                N = m.shape[0]
            elif m.shape[0] != N:
                raise ValueError("all matrices must share the same size N")
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def size(self) -> int:
        return self.G.shape[0]

    @property
    def has_H(self) -> bool:
        return self.H is not None


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _chunks(M: int, size: int = _CHUNK_ROWS):
    for lo in range(0, M, size):
        yield lo, min(lo + size, M)


def assemble_unbatched(data: SnapshotSet, dictionary: Dictionary) -> KoopmanMatrices:
    """Weighted outer-product assembly of G, A, L from plain pairs (H absent)."""
    if data.dimension != dictionary.dimension:
        raise ValueError(
            f"data dimension {data.dimension} does not match "
            f"dictionary dimension {dictionary.dimension}"
        )
    N = dictionary.size
    G = np.zeros((N, N), dtype=complex)
    A = np.zeros((N, N), dtype=complex)
    L = np.zeros((N, N), dtype=complex)
    for lo, hi in _chunks(data.count):
        PX = dictionary.matrix_evaluator(data.states_x[lo:hi])
        PY = dictionary.matrix_evaluator(data.states_y[lo:hi])
        WX = data.weights[lo:hi, None] * PX
        WY = data.weights[lo:hi, None] * PY
        G += PX.conj().T @ WX
        A += PX.conj().T @ WY
        L += PY.conj().T @ WY
    return KoopmanMatrices(
        G=_hermitize(G),
        A=A,
        L=_hermitize(L),
        H=None,
        meta={
            "M": data.count,
            "labels": dictionary.labels,
            "estimator": "unbatched",
        },
    )


def assemble_batched(
    data: BatchedSnapshotSet, dictionary: Dictionary
) -> KoopmanMatrices:
    """Assembly from batched pairs, including the cross-batch matrix H.

    With exactly two realizations this is the literal two-batch scheme;
    with more, A and L are means over all realizations and H is the mean
    over all ordered pairs of distinct realizations, computed via the
    realization-sum identity so cost stays linear in M2.
    """
    if data.dimension != dictionary.dimension:
        raise ValueError(
            f"data dimension {data.dimension} does not match "
            f"dictionary dimension {dictionary.dimension}"
        )
    m2 = data.realization_count
    if m2 < 2:
        raise ValueError("batched assembly needs at least two realizations")
    N = dictionary.size
    G = np.zeros((N, N), dtype=complex)
    A = np.zeros((N, N), dtype=complex)
    Lsum = np.zeros((N, N), dtype=complex)
    Hacc = np.zeros((N, N), dtype=complex)
    for lo, hi in _chunks(data.batch_count):
        w = data.weights[lo:hi, None]
        PX = dictionary.matrix_evaluator(data.states_x[lo:hi])
        G += PX.conj().T @ (w * PX)
        if m2 == 2:
            P1 = dictionary.matrix_evaluator(data.realizations[0][lo:hi])
            P2 = dictionary.matrix_evaluator(data.realizations[1][lo:hi])
            W1, W2 = w * P1, w * P2
            A += PX.conj().T @ (0.5 * (W1 + W2))
            Lsum += P1.conj().T @ W1 + P2.conj().T @ W2
            Hacc += 0.5 * (P1.conj().T @ W2 + P2.conj().T @ W1)
        else:
            Ssum = np.zeros((hi - lo, N), dtype=complex)
            for k in range(m2):
                PY = dictionary.matrix_evaluator(data.realizations[k][lo:hi])
                A += PX.conj().T @ (w * PY)
                Lsum += PY.conj().T @ (w * PY)
                Ssum += PY
            Hacc += Ssum.conj().T @ (w * Ssum)
    if m2 == 2:
        L = Lsum / 2.0
        H = Hacc
    else:
        A = A / m2
        L = Lsum / m2
        H = (Hacc - Lsum) / (m2 * (m2 - 1))
    return KoopmanMatrices(
        G=_hermitize(G),
        A=A,
        L=_hermitize(L),
        H=_hermitize(H),
        meta={
            "M1": data.batch_count,
            "M2": m2,
            "labels": dictionary.labels,
            "estimator": "realization-averaged; H over all ordered pairs",
        },
    )


def estimation_error(
    est: KoopmanMatrices, ref: KoopmanMatrices
) -> dict[str, float]:
    """Frobenius-norm deviations per matrix; includes H when both carry it."""
    if est.size != ref.size:
        raise ValueError("matrix sizes differ")
    out = {
        "G": float(np.linalg.norm(est.G - ref.G, "fro")),
        "A": float(np.linalg.norm(est.A - ref.A, "fro")),
        "L": float(np.linalg.norm(est.L - ref.L, "fro")),
    }
    if est.has_H and ref.has_H:
        out["H"] = float(np.linalg.norm(est.H - ref.H, "fro"))
    return out


# ---------------------------------------------------------------------------
# Serialization: binary container + JSON sidecar, CSV export
# ---------------------------------------------------------------------------


def _meta_jsonable(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def save_matrices(mats: KoopmanMatrices, path) -> Path:
    """Write the binary container; meta goes to a ``.json`` sidecar."""
    path = Path(path)
    flags = 1 if mats.has_H else 0
    blobs = [mats.G, mats.A, mats.L] + ([mats.H] if mats.has_H else [])
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", 1, mats.size, flags))
        for m in blobs:
            fh.write(np.ascontiguousarray(m, dtype="<c16").tobytes())
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(_meta_jsonable(mats.meta), sort_keys=True, indent=1))
    return path


def load_matrices(path) -> KoopmanMatrices:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path} is not a koopman matrix container")
    version, N, flags = struct.unpack("<III", raw[8:20])
    if version != 1:
        raise ValueError(f"unsupported container version {version}")
    nbytes = N * N * 16
    offset = 20
    mats = []
    count = 4 if flags & 1 else 3
    for _ in range(count):
        mats.append(
            np.frombuffer(raw, dtype="<c16", count=N * N, offset=offset).reshape(N, N)
        )
        offset += nbytes
    sidecar = path.with_name(path.name + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    H = mats[3] if flags & 1 else None
    return KoopmanMatrices(G=mats[0], A=mats[1], L=mats[2], H=H, meta=meta)


def export_matrix_csv(matrix: np.ndarray, path) -> Path:
    """Write one complex matrix as CSV with interleaved re/im columns."""
    m = np.asarray(matrix, dtype=complex)
    N = m.shape[0]
    lines = [",".join(f"re{j+1},im{j+1}" for j in range(N))]
    for i in range(N):
        parts = []
        for j in range(N):
            parts.append("%.17g" % m[i, j].real)
            parts.append("%.17g" % m[i, j].imag)
        lines.append(",".join(parts))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def export_matrices_csv(mats: KoopmanMatrices, directory) -> list[Path]:
    """One CSV per matrix, 17 significant digits."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    named = [("G", mats.G), ("A", mats.A), ("L", mats.L)]
    if mats.has_H:
        named.append(("H", mats.H))
    return [export_matrix_csv(m, directory / f"{name}.csv") for name, m in named]
