"""Colluder-symmetric collusion channels and their per-position marginals."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import as_generator, binom_expect, check_probability, open_uniform

ATTACKS = ("interleaving", "all1", "majority", "minority", "coinflip")
MAX_COALITION = 10**6

_ALIASES = {
    "int": "interleaving",
    "interleave": "interleaving",
    "all-1": "all1",
    "all_1": "all1",
    "maj": "majority",
    "min": "minority",
    "coin": "coinflip",
    "coin-flip": "coinflip",
}


def canonical_attack(kind: str) -> str:
    k = _ALIASES.get(kind.lower(), kind.lower())
    if k not in ATTACKS:
        raise ValueError(f"unknown attack {kind!r}; expected one of {', '.join(ATTACKS)}")
    return k


class CollusionChannel:
    """Output probabilities theta[z] = P(Y = 1 | z ones among the c colluder symbols).

    Instances are immutable; ``thetas`` is a read-only float array of length c + 1.
    """

    __slots__ = ("c", "thetas", "name")

    def __init__(self, c: int, thetas, name: str = "custom"):
        if int(c) != c or c < 1:
            raise ValueError(f"coalition size must be a positive integer, got {c}")
        if c > MAX_COALITION:
            raise ValueError(f"coalition size {c} exceeds the supported maximum {MAX_COALITION}")
        arr = np.array(thetas, dtype=float)
        if arr.ndim != 1 or arr.size != c + 1:
            raise ValueError(f"expected {c + 1} output probabilities for c={c}, got {arr.size}")
        if np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any():
            raise ValueError("every output probability must lie in [0, 1]")
        if arr[0] != 0.0 or arr[-1] != 1.0:
            raise ValueError(
                f"marking assumption violated: need theta_0 = 0 and theta_c = 1, "
                f"got theta_0 = {arr[0]}, theta_c = {arr[-1]}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "c", int(c))
        object.__setattr__(self, "thetas", arr)
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("CollusionChannel is immutable")

    def __eq__(self, other):
        if not isinstance(other, CollusionChannel):
            return NotImplemented
        return self.c == other.c and np.array_equal(self.thetas, other.thetas)

    def __hash__(self):
        return hash((self.c, self.thetas.tobytes()))

    def __repr__(self):
        if self.c <= 8:
            body = ", ".join(f"{t:g}" for t in self.thetas)
            return f"CollusionChannel({self.name}, c={self.c}, thetas=({body}))"
        return f"CollusionChannel({self.name}, c={self.c})"

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.thetas == 0.0) | (self.thetas == 1.0)))

    @property
    def is_symmetric(self) -> bool:
        """True when theta[c - z] = 1 - theta[z] for every z."""
        return bool(np.allclose(self.thetas[::-1], 1.0 - self.thetas, rtol=0, atol=1e-15))


def make_channel(kind: str, c: int) -> CollusionChannel:
    """One of the five canonical attacks for a coalition of size c."""
    kind = canonical_attack(kind)
    if int(c) != c or c < 1:
        raise ValueError(f"coalition size must be a positive integer, got {c}")
    c = int(c)
    z = np.arange(c + 1)
    if kind == "interleaving":
        thetas = z / c
    elif kind == "all1":
        thetas = (z > 0).astype(float)
    elif kind in ("majority", "minority"):
        if c % 2 == 0:
            raise ValueError(f"{kind} voting needs an odd coalition size, got even c={c}")
        if kind == "majority":
            thetas = (2 * z > c).astype(float)
        else:
            thetas = (2 * z < c).astype(float)
            thetas[0], thetas[c] = 0.0, 1.0
    else:
        thetas = np.full(c + 1, 0.5)
        thetas[0], thetas[c] = 0.0, 1.0
    return CollusionChannel(c, thetas, name=kind)


def custom_channel(c: int, thetas) -> CollusionChannel:
    return CollusionChannel(c, thetas)


def load_channel(path) -> CollusionChannel:
    """Read a channel file: first line c, second line c + 1 whitespace-separated decimals."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: expected two non-empty lines (c, then the probabilities)")
    try:
        c = int(lines[0].strip())
        thetas = [float(tok) for tok in lines[1].split()]
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return CollusionChannel(c, thetas, name=Path(path).stem)


@dataclass(frozen=True)
class ChannelMarginals:
    """Output marginals at bias p.

    ``a`` is P(Y=1); ``a0``/``a1`` condition on one fixed colluder holding 0/1.
    ``delta`` is a1 - a0 and ``a_bar`` is 1 - a, both summed directly rather
    than by subtraction so they keep full relative precision.
    """

    p: float
    a: float
    a0: float
    a1: float
    delta: float
    a_bar: float


def marginals_array(theta: CollusionChannel, p):
    """Vectorised (a, a0, a1, delta, a_bar) over an array of biases."""
    p = np.asarray(p, dtype=float)
    t = theta.thetas
    a, a_bar = np.moveaxis(binom_expect(theta.c, p, np.stack([t, 1.0 - t], axis=1)), -1, 0)
    if theta.c == 1:
        a0 = np.full(p.shape, t[0])
        a1 = np.full(p.shape, t[1])
        delta = a1 - a0
    else:
        a0, a1, delta = np.moveaxis(
            binom_expect(theta.c - 1, p, np.stack([t[:-1], t[1:], np.diff(t)], axis=1)), -1, 0
        )
    clip = lambda v: np.clip(v, 0.0, 1.0)  # noqa: E731
    return clip(a), clip(a0), clip(a1), delta, clip(a_bar)


def channel_marginals(theta: CollusionChannel, p: float) -> ChannelMarginals:
    p = check_probability(p, "p")
    a, a0, a1, delta, a_bar = marginals_array(theta, np.array(p))
    return ChannelMarginals(
        p=p, a=float(a), a0=float(a0), a1=float(a1), delta=float(delta), a_bar=float(a_bar)
    )


def pirate_output(colluder_symbols, theta: CollusionChannel, rng) -> np.ndarray:
    """Pirate word: per position, Y = 1 with probability theta[z], z = ones among the coalition."""
    x = np.atleast_2d(np.asarray(colluder_symbols))
    if x.shape[0] != theta.c:
        raise ValueError(f"coalition has {x.shape[0]} members but the channel expects c={theta.c}")
    z = x.sum(axis=0, dtype=np.int64)
    u = open_uniform(as_generator(rng), z.shape[0])
    return (u < theta.thetas[z]).astype(np.uint8)
