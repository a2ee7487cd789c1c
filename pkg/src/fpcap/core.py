"""Probability and information-theory primitives shared by the rest of the package.

Scores live on the extended real line: ``NEG_INFINITY`` is plain ``-math.inf``,
which already orders below every finite float and absorbs under addition.
Nothing in the package ever produces ``+inf`` scores, so ``-inf + inf`` cannot occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import xlog1py, xlogy

NEG_INFINITY = -math.inf
POS_INFINITY = math.inf
LN2 = math.log(2.0)

# exact integer binomial rows up to this size, saddle-point expansion above
_EXACT_COMB_MAX = 2048


def check_probability(x, name: str = "p", *, open_interval: bool = False) -> float:
    """Validate a scalar probability and return it as a float."""
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a real number, got {x!r}") from None
    if math.isnan(v):
        raise ValueError(f"{name} must not be NaN")
    if open_interval:
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in the open interval (0, 1), got {v}")
    elif not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return v


def _check_array(x, name: str, *, open_interval: bool = False) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError(f"{name} must not contain NaN")
    if open_interval:
        ok = (arr > 0.0) & (arr < 1.0)
    else:
        ok = (arr >= 0.0) & (arr <= 1.0)
    if not ok.all():
        bad = arr[~ok].flat[0]
        interval = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {interval}, got {bad}")
    return arr


def _scalar_or_array(result: np.ndarray, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(result)
    return result


def binary_entropy(x):
    """Binary entropy in bits, with 0 log 0 = 0. Accepts scalars or arrays."""
    arr = _check_array(x, "x")
    # fold onto [0, 1/2]; 1 - x is exact for x >= 1/2, so h(x) == h(1 - x)
    y = np.minimum(arr, 1.0 - arr)
    h = -(xlogy(y, y) + xlog1py(1.0 - y, -y)) / LN2
    return _scalar_or_array(np.clip(h, 0.0, 1.0), x)


def kl_div(x, y):
    """Binary relative entropy d(x || y) in bits; ``+inf`` when y puts zero mass where x does not."""
    xa = _check_array(x, "x")
    ya = _check_array(y, "y")
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(xa > 0, xlogy(xa, xa) - xlogy(xa, ya), 0.0)
        t0 = np.where(xa < 1, xlog1py(1.0 - xa, -xa) - xlog1py(1.0 - xa, -ya), 0.0)
    out = (t1 + t0) / LN2
    out = np.where(np.isnan(out), POS_INFINITY, out)
    return _scalar_or_array(np.maximum(out, 0.0), x, y)


def kl_shift(y, d, y_bar=None):
    """d(y + d || y) in nats, computed from the shift ``d`` to avoid cancellation.

    ``y_bar`` is 1 - y when the caller has it to better precision than the
    subtraction would give.  Callers guarantee ``0 <= y + d <= 1``.  Returns 0
    for d == 0 and ``+inf`` when ``y`` is 0 or 1 and the shifted point is not.
    """
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    y_bar = 1.0 - y if y_bar is None else np.asarray(y_bar, dtype=float)
    x = np.clip(y + d, 0.0, 1.0)
    x_bar = np.clip(y_bar - d, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(x > 0, x * np.log1p(d / y), 0.0)
        t0 = np.where(x_bar > 0, x_bar * np.log1p(-d / y_bar), 0.0)
    out = t1 + t0
    out = np.where(np.isnan(out), POS_INFINITY, out)
    return np.where(d == 0, 0.0, np.maximum(out, 0.0))


@lru_cache(maxsize=64)
def _log_comb_row(c: int) -> np.ndarray:
    """Exact ln C(c, z) for z = 0..c, from integer arithmetic (small c only)."""
    row = np.empty(c + 1)
    comb = 1
    for z in range(c + 1):
        row[z] = math.log(comb)
        comb = comb * (c - z) // (z + 1)
    row.setflags(write=False)
    return row


_STIRLERR_SMALL = np.array(
    [math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - 0.5 * math.log(2 * math.pi) if k else 0.0 for k in range(16)]
)


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """ln n! - [(n + 1/2) ln n - n + ln sqrt(2 pi)] for integers n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = _STIRLERR_SMALL[n[small].astype(np.int64)]
    m = n[~small]
    m2 = m * m
    out[~small] = (1 / 12 - (1 / 360 - (1 / 1260 - (1 / 1680 - 1 / (1188 * m2)) / m2) / m2) / m2) / m
    return out


def _bd0(x: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Deviance x ln(x/mean) + mean - x, stable when x is close to mean."""
    x, mean = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(mean, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(x / mean) + mean - x
    near = np.abs(x - mean) < 0.1 * (x + mean)
    if near.any():
        xs, ms = x[near], mean[near]
        v = (xs - ms) / (xs + ms)
        s = (xs - ms) * v
        ej = 2 * xs * v
        v2 = v * v
        for j in range(1, 60):
            ej = ej * v2
            s = s + ej / (2 * j + 1)
        out[near] = s
    return out


def _log_pmf_saddle(c: int, z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Loader's saddle-point form of the binomial log-pmf for 0 < z < c and 0 < p < 1."""
    q = 1.0 - p
    return (
        _stirlerr(np.array([c]))[0]
        - _stirlerr(z)
        - _stirlerr(c - z)
        - _bd0(z, c * p)
        - _bd0(c - z, c * q)
        + 0.5 * np.log(c / (2 * math.pi * z * (c - z)))
    )


def _log_pmf(c: int, z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Broadcast ln pmf over integer z and real p."""
    z, p = np.broadcast_arrays(z, np.asarray(p, dtype=float))
    if c <= _EXACT_COMB_MAX:
        return _log_comb_row(c)[z] + xlogy(z, p) + xlog1py(c - z, -p)
    out = np.array(xlogy(z, p) + xlog1py(c - z, -p), dtype=float)  # exact at the boundary cases
    inner = (z > 0) & (z < c) & (p > 0) & (p < 1)
    if inner.any():
        out[inner] = _log_pmf_saddle(c, z[inner], p[inner])
    return out


def log_binom_pmf(c: int, z, p):
    """ln[C(c,z) p^z (1-p)^(c-z)], computed in log space; ``-inf`` for exactly zero mass.

    ``z`` and ``p`` broadcast against each other.  Above c = 2048 the binomial
    coefficient is not formed at all: a saddle-point expansion keeps every term
    small, so the result stays accurate to near machine precision at c = 10^6.
    """
    if int(c) != c or c < 1:
        raise ValueError(f"c must be a positive integer, got {c}")
    c = int(c)
    za = np.asarray(z)
    if not np.issubdtype(za.dtype, np.integer):
        if not np.all(za == np.floor(za)):
            raise ValueError("z must be integer valued")
        za = za.astype(np.int64)
    if ((za < 0) | (za > c)).any():
        raise ValueError(f"z must lie in [0, {c}]")
    pa = _check_array(p, "p")
    return _scalar_or_array(_log_pmf(c, za, pa), z, p)


def binom_pmf_rows(c: int, p) -> np.ndarray:
    """Binomial(c, p) pmf over z = 0..c for each p; shape ``p.shape + (c + 1,)``.

    Terms are built in log space and exponentiated, so c up to 10^6 is fine.
    """
    pa = np.asarray(p, dtype=float)[..., None]
    return np.exp(_log_pmf(c, np.arange(c + 1), pa))


def binom_expect(c: int, p, values, *, max_cells: int = 4_000_000) -> np.ndarray:
    """E[values[Z]] for Z ~ Binomial(c, p), for each p; ``values`` has shape (c + 1,) or (c + 1, k).

    Rows are processed in chunks so at most ``max_cells`` pmf cells exist at once.
    """
    pa = np.asarray(p, dtype=float)
    flat = pa.reshape(-1)
    vals = np.asarray(values, dtype=float)
    out = np.empty((flat.size,) + vals.shape[1:])
    step = max(1, max_cells // (c + 1))
    for start in range(0, flat.size, step):
        out[start:start + step] = binom_pmf_rows(c, flat[start:start + step]) @ vals
    return out.reshape(pa.shape + vals.shape[1:])


def arcsine_cdf(p):
    """Arcsine distribution function (2/pi) asin(sqrt(p)) on 0 < p < 1."""
    pa = _check_array(p, "p", open_interval=True)
    return _scalar_or_array(2.0 / math.pi * np.arcsin(np.sqrt(pa)), p)


def arcsine_sample(u):
    """Inverse arcsine CDF: sin^2(pi u / 2) for 0 < u < 1."""
    ua = _check_array(u, "u", open_interval=True)
    return _scalar_or_array(np.sin(0.5 * math.pi * ua) ** 2, u)


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible random stream.

    Streams are keyed by ``(master_seed, stream_index, *path)`` and backed by a
    counter-based Philox generator, so a given key always yields the same
    sequence and sibling keys yield independent ones.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.master_seed, self.stream_index, *self.path):
            if int(v) != v or not 0 <= v < 2**64:
                raise ValueError(f"stream keys must be 64-bit unsigned integers, got {v!r}")

    def substream(self, *keys: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(self.stream_index), *self.path)
        )
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def open_uniform(gen: np.random.Generator, size) -> np.ndarray:
    """Uniform draws strictly inside (0, 1) on the 2^-53 lattice."""
    k = gen.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) * 2.0**-53
