"""Bias models and code-matrix generation."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import as_generator, check_probability, open_uniform

CODE_MAGIC = b"FPCD"
CODE_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")


@dataclass(frozen=True)
class BiasModel:
    """How the per-position biases are drawn.

    ``kind`` is ``"fixed"`` (every bias equals ``p``), ``"arcsine"``, or
    ``"arcsine_cutoff"`` (arcsine restricted to [delta, 1 - delta] and renormalised).
    """

    kind: str
    p: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            check_probability(self.p, "p", open_interval=True)
        elif self.kind == "arcsine_cutoff":
            if self.delta is None or not 0.0 < float(self.delta) < 0.5:
                raise ValueError(f"cut-off delta must lie in (0, 1/2), got {self.delta}")
        elif self.kind != "arcsine":
            raise ValueError(f"unknown bias model {self.kind!r}")

    @classmethod
    def fixed(cls, p: float) -> "BiasModel":
        return cls("fixed", p=float(p))

    @classmethod
    def arcsine(cls) -> "BiasModel":
        return cls("arcsine")

    @classmethod
    def arcsine_cutoff(cls, delta: float) -> "BiasModel":
        return cls("arcsine_cutoff", delta=float(delta))

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.p is not None:
            out["p"] = self.p
        if self.delta is not None:
            out["delta"] = self.delta
        return out


def default_cutoff(c: int) -> float:
    """Configurable stand-in cut-off delta = 1/(720 c)."""
    return 1.0 / (720.0 * c)


def draw_biases(model: BiasModel, ell: int, rng) -> np.ndarray:
    """``ell`` biases from ``model``. Cut-offs use the inverse CDF of the truncated law."""
    if int(ell) != ell or ell < 1:
        raise ValueError(f"code length must be a positive integer, got {ell}")
    ell = int(ell)
    if model.kind == "fixed":
        return np.full(ell, float(model.p))
    u = open_uniform(as_generator(rng), ell)
    if model.kind == "arcsine_cutoff":
        # map u into [F(delta), F(1 - delta)]; F(1 - delta) = 1 - F(delta)
        lo = 2.0 / math.pi * math.asin(math.sqrt(model.delta))
        u = lo + (1.0 - 2.0 * lo) * u
    p = np.sin(0.5 * math.pi * u) ** 2
    if model.kind == "arcsine_cutoff":
        p = np.clip(p, model.delta, 1.0 - model.delta)
    # keep extreme draws strictly inside (0, 1)
    return np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


@dataclass(frozen=True, eq=False)
class Code:
    """An n x ell binary code matrix bundled with the biases it was drawn from."""

    matrix: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.uint8)
        b = np.asarray(self.biases, dtype=float)
        if m.ndim != 2:
            raise ValueError("code matrix must be two-dimensional")
        if b.ndim != 1 or b.size != m.shape[1]:
            raise ValueError(f"{m.shape[1]} columns but {b.size} biases")
        if ((b <= 0) | (b >= 1)).any():
            raise ValueError("every bias must lie in the open interval (0, 1)")
        if (m > 1).any():
            raise ValueError("code matrix must be binary")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "biases", b)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def ell(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Code):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix) and np.array_equal(self.biases, other.biases)


def generate_code(n: int, biases, rng) -> Code:
    """X[j, i] ~ Bernoulli(biases[i]) independently."""
    if int(n) != n or n < 1:
        raise ValueError(f"number of users must be a positive integer, got {n}")
    b = np.asarray(biases, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("biases must be a non-empty sequence")
    u = open_uniform(as_generator(rng), (int(n), b.size))
    return Code((u < b).astype(np.uint8), b)


def save_code(code: Code, path) -> None:
    """Binary format: header (magic, version, n, ell), float64 biases, row-major packed bits."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CODE_MAGIC, CODE_VERSION, code.n, code.ell))
        fh.write(code.biases.astype("<f8").tobytes())
        fh.write(np.packbits(code.matrix.reshape(-1)).tobytes())


def load_code(path) -> Code:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, ell = _HEADER.unpack_from(data)
    if magic != CODE_MAGIC:
        raise ValueError(f"{path}: not a code file (bad magic {magic!r})")
    if version != CODE_VERSION:
        raise ValueError(f"{path}: unsupported code file version {version}")
    off = _HEADER.size
    nbits = n * ell
    need = off + 8 * ell + (nbits + 7) // 8
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(data)}")
    biases = np.frombuffer(data, dtype="<f8", count=ell, offset=off).astype(float)
    packed = np.frombuffer(data, dtype=np.uint8, offset=off + 8 * ell)
    matrix = np.unpackbits(packed, count=nbits).reshape(n, ell)
    return Code(matrix, biases)


def dump_code(code: Code, max_users: int = 50, max_positions: int = 80) -> str:
    """Human-readable excerpt: bias line followed by one bit string per user."""
    cols = min(code.ell, max_positions)
    lines = [f"# code n={code.n} ell={code.ell}"]
    lines.append("biases " + " ".join(f"{b:.4f}" for b in code.biases[:cols]))
    for j in range(min(code.n, max_users)):
        lines.append(f"{j:>6} " + "".join("1" if v else "0" for v in code.matrix[j, :cols]))
    if code.n > max_users or code.ell > max_positions:
        lines.append("# (truncated)")
    return "\n".join(lines) + "\n"


__all__ = [
    "BiasModel",
    "Code",
    "default_cutoff",
    "draw_biases",
    "dump_code",
    "generate_code",
    "load_code",
    "save_code",
]
