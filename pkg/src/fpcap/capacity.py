"""Simple and joint fingerprinting capacities.

Fully informed capacities maximise the per-position mutual information over a
single bias p; partially informed ones average it over arcsine-distributed
biases.  All information quantities are in bits per code symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channels import ATTACKS, CollusionChannel, canonical_attack, make_channel, marginals_array
from .core import LN2, binary_entropy, binom_expect, kl_shift

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Published asymptotic length constants L / c^k with L = 1/(C ln 2); keyed by
# (attack, mode, side) -> (constant, k).
REFERENCE_CONSTANTS = {
    ("interleaving", "simple", "full"): (2.0, 2.0),
    ("interleaving", "joint", "full"): (2.0, 2.0),
    ("interleaving", "simple", "partial"): (2.0, 2.0),
    ("interleaving", "joint", "partial"): (2.0, 2.0),
    ("all1", "simple", "full"): (2.08, 1.0),
    ("all1", "joint", "full"): (1.44, 1.0),
    ("all1", "simple", "partial"): (1.83, 1.5),
    ("all1", "joint", "partial"): (1.32, 1.5),
    ("majority", "simple", "full"): (3.14, 1.0),
    ("majority", "joint", "full"): (1.44, 1.0),
    ("majority", "simple", "partial"): (2.41, 1.5),
    ("majority", "joint", "partial"): (1.20, 1.5),
    ("minority", "simple", "full"): (2.08, 1.0),
    ("minority", "joint", "full"): (1.44, 1.0),
    ("minority", "simple", "partial"): (0.66, 1.5),
    ("minority", "joint", "partial"): (0.43, 1.5),
    ("coinflip", "simple", "full"): (8.33, 1.0),
    ("coinflip", "joint", "full"): (4.48, 1.0),
    ("coinflip", "simple", "partial"): (5.18, 1.5),
    ("coinflip", "joint", "partial"): (2.32, 1.5),
}


def simple_mi(theta: CollusionChannel, p):
    """I(X1; Y | P = p) in bits: p d(a1 || a) + (1 - p) d(a0 || a). Vectorised over p."""
    pa = np.asarray(p, dtype=float)
    if ((pa <= 0) | (pa >= 1)).any():
        raise ValueError("p must lie in the open interval (0, 1)")
    a, _, _, delta, a_bar = marginals_array(theta, pa)
    # a1 = a + (1 - p) delta, a0 = a - p delta
    nats = pa * kl_shift(a, (1.0 - pa) * delta, a_bar) + (1.0 - pa) * kl_shift(a, -pa * delta, a_bar)
    # I(X1; Y) <= H(Y); the cap also absorbs underflow when a or 1 - a is below 1e-308
    out = np.minimum(nats / LN2, binary_entropy(np.minimum(a, a_bar)))
    return float(out) if np.ndim(p) == 0 else out


def joint_mi_rate(theta: CollusionChannel, p):
    """(1/c) I(Z; Y | P = p) = (h(a) - a_h)/c in bits. Vectorised over p."""
    pa = np.asarray(p, dtype=float)
    if ((pa <= 0) | (pa >= 1)).any():
        raise ValueError("p must lie in the open interval (0, 1)")
    a, _, _, _, a_bar = marginals_array(theta, pa)
    if theta.is_deterministic:
        a_h = np.zeros_like(a)
    else:
        a_h = binom_expect(theta.c, pa, binary_entropy(theta.thetas))
    h_a = binary_entropy(np.minimum(a, a_bar))
    out = np.maximum(h_a - a_h, 0.0) / theta.c
    return float(out) if np.ndim(p) == 0 else out


def payoff_fn(theta: CollusionChannel, mode: str) -> Callable:
    if mode == "simple":
        return lambda p: simple_mi(theta, p)
    if mode == "joint":
        return lambda p: joint_mi_rate(theta, p)
    raise ValueError(f"mode must be 'simple' or 'joint', got {mode!r}")


@dataclass
class CapacityResult:
    capacity_bits: float
    optimal_p: Optional[float]
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def length_constant(self) -> float:
        """L = 1/(C ln 2): code length per ln n."""
        if self.capacity_bits <= 0:
            return math.inf
        return 1.0 / (self.capacity_bits * LN2)


def _evaluate(payoff: Callable, p: np.ndarray) -> np.ndarray:
    vals = np.asarray(payoff(p), dtype=float)
    if vals.shape != p.shape:
        vals = np.array([float(payoff(float(x))) for x in p])
    return vals


def search_grid(c: int, size: int = 400) -> np.ndarray:
    """Log-spaced toward both ends of [1e-3/c, 1 - 1e-3/c], symmetric about 1/2."""
    lo = 1e-3 / c
    half = np.geomspace(lo, 0.5, size // 2 + 1)
    return np.concatenate([half, 1.0 - half[-2::-1]])


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10):
    """Golden-section search for a maximum of a unimodal f on [lo, hi].

    Returns (x, f(x), iterations, final bracket width).
    """
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < 500:
        it += 1
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    if f1 >= f2:
        return x1, f1, it, b - a
    return x2, f2, it, b - a


def maximize_over_p(
    payoff: Callable,
    c: int,
    *,
    grid_size: int = 400,
    ptol: float = 1e-10,
    max_peaks: int = 4,
    tie_rtol: float = 1e-9,
) -> CapacityResult:
    """Global maximum of ``payoff`` over p in [1e-3/c, 1 - 1e-3/c].

    A coarse log-spaced scan locates the local maxima; the best few are refined
    by golden-section search inside their neighbouring brackets.  Maxima equal
    to within ``tie_rtol`` (mirror-image optima of symmetric channels) resolve
    to the smaller p.
    """
    if grid_size < 200:
        raise ValueError("the coarse scan needs at least 200 nodes")
    grid = search_grid(c, grid_size)
    vals = _evaluate(payoff, grid)
    if not np.any(vals > 0):
        return CapacityResult(0.0, None, degenerate=True, diagnostics={"grid_nodes": grid.size})
    padded = np.concatenate([[-np.inf], vals, [-np.inf]])
    peaks = np.flatnonzero((vals >= padded[:-2]) & (vals >= padded[2:]))
    peaks = sorted(peaks, key=lambda i: -vals[i])[:max_peaks]
    best = None
    for k in sorted(peaks):
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        x, fx, iters, width = golden_section_max(lambda q: float(payoff(q)), lo, hi, tol=ptol)
        if vals[k] > fx:
            x, fx = float(grid[k]), float(vals[k])
        if best is None or fx > best[1] * (1.0 + tie_rtol):
            best = (x, fx, iters, width)
    x, fx, iters, width = best
    return CapacityResult(
        float(fx),
        float(x),
        diagnostics={
            "grid_nodes": int(grid.size),
            "iterations": iters,
            "bracket_width": float(width),
            "local_maxima": len(peaks),
        },
    )


def _x_minus_sin_x(x: np.ndarray) -> np.ndarray:
    """x - sin(x) without cancellation for small x."""
    out = x - np.sin(x)
    small = x < 1.0
    if small.any():
        xs = x[small]
        term = xs**3 / 6.0
        acc = term.copy()
        x2 = xs * xs
        for k in range(2, 12):
            term = -term * x2 / ((2 * k) * (2 * k + 1))
            acc += term
        out[small] = acc
    return out


def arcsine_rule(nodes: int = 2000, rule: str = "smoothed"):
    """Nodes and weights (summing to 1) for expectations over the arcsine law.

    ``rule="chebyshev"`` is the plain Gauss-Chebyshev rule p_k = sin^2(pi(2k-1)/(4N))
    with equal weights.  ``rule="smoothed"`` applies the same midpoint rule in the
    arcsine angle after the substitution u -> u - sin(2 pi u)/(2 pi), which
    flattens the endpoints so that p log p behaviour of the payoff near 0 and 1
    no longer limits convergence to O(N^-3).
    """
    if nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    if rule == "chebyshev":
        k = np.arange(1, nodes + 1)
        p = np.sin(math.pi * (2 * k - 1) / (4 * nodes)) ** 2
        return p, np.full(nodes, 1.0 / nodes)
    if rule != "smoothed":
        raise ValueError(f"unknown quadrature rule {rule!r}")
    u = (np.arange(nodes) + 0.5) / nodes
    lower = u <= 0.5
    # psi(u) on the lower half, mirrored: psi(1 - u) = 1 - psi(u)
    v = np.where(lower, u, 1.0 - u)
    psi = _x_minus_sin_x(2.0 * math.pi * v) / (2.0 * math.pi)
    q = np.sin(0.5 * math.pi * psi) ** 2
    p = np.where(lower, q, 1.0 - q)
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    w = 2.0 * np.sin(math.pi * u) ** 2 / nodes
    return p, w


def arcsine_expectation(payoff: Callable, nodes: int = 2000, rule: str = "smoothed") -> float:
    """E[payoff(P)] for P arcsine-distributed, by quadrature with exact arcsine weight."""
    p, w = arcsine_rule(nodes, rule)
    vals = _evaluate(payoff, p)
    return math.fsum(vals * w)


def capacity(theta: CollusionChannel, mode: str = "simple", side: str = "full", *, nodes: int = 2000) -> CapacityResult:
    payoff = payoff_fn(theta, mode)
    if side == "full":
        return maximize_over_p(payoff, theta.c)
    if side == "partial":
        value = arcsine_expectation(payoff, nodes)
        return CapacityResult(value, None, degenerate=value <= 0, diagnostics={"quadrature_nodes": nodes})
    raise ValueError(f"side must be 'full' or 'partial', got {side!r}")


def scaling_exponent(attack: str, side: str) -> float:
    if attack == "interleaving":
        return 2.0
    return 1.0 if side == "full" else 1.5


@dataclass
class CapacityTableRow:
    attack: str
    mode: str
    side: str
    c: int
    result: Optional[CapacityResult]
    exponent: float
    error: Optional[str] = None

    @property
    def L(self) -> float:
        return self.result.length_constant if self.result else math.nan

    @property
    def normalized_L(self) -> float:
        """L / c^k, comparable with the published asymptotic constants."""
        return self.L / self.c**self.exponent

    @property
    def scaled_constant(self) -> float:
        """Capacity times c^k; tends to a constant along the asymptote."""
        return self.result.capacity_bits * self.c**self.exponent if self.result else math.nan

    @property
    def reference(self) -> Optional[float]:
        ref = REFERENCE_CONSTANTS.get((self.attack, self.mode, self.side))
        return ref[0] if ref else None


def capacity_table(
    attacks, c: int, mode: str, side: str, *, nodes: int = 2000, exponent: Optional[float] = None
) -> list[CapacityTableRow]:
    """One row per attack; a failing row records its error and leaves the others intact.

    ``exponent`` overrides the per-attack scaling power, e.g. 1.5 for every
    attack when plotting curves on a common c^(3/2) scale.
    """
    rows = []
    for kind in attacks:
        try:
            kind = canonical_attack(kind)
        except ValueError as exc:
            rows.append(CapacityTableRow(str(kind), mode, side, c, None, math.nan, str(exc)))
            continue
        k = scaling_exponent(kind, side) if exponent is None else float(exponent)
        try:
            theta = make_channel(kind, c)
            result = capacity(theta, mode, side, nodes=nodes)
        except ValueError as exc:
            rows.append(CapacityTableRow(kind, mode, side, c, None, k, str(exc)))
            continue
        rows.append(CapacityTableRow(kind, mode, side, c, result, k))
    return rows


def odd_log_grid(cmin: int, cmax: int, points: int) -> list[int]:
    """Log-spaced odd coalition sizes (odd so majority/minority are defined)."""
    raw = np.geomspace(cmin, cmax, points)
    out = []
    for v in raw:
        k = int(round(v))
        k += 1 - k % 2
        if not out or k > out[-1]:
            out.append(k)
    return out


__all__ = [
    "ATTACKS",
    "CapacityResult",
    "CapacityTableRow",
    "REFERENCE_CONSTANTS",
    "arcsine_expectation",
    "arcsine_rule",
    "capacity",
    "capacity_table",
    "golden_section_max",
    "joint_mi_rate",
    "maximize_over_p",
    "odd_log_grid",
    "payoff_fn",
    "scaling_exponent",
    "search_grid",
    "simple_mi",
]
