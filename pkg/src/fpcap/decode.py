"""Score functions, moment generating functions, scheme parameters and accusation.

Score tables are indexed ``[..., x, y]`` for simple decoders and ``[..., z, y]``
for joint decoders, with leading axes following the bias array.  Scores are
natural-log likelihood ratios; ``-inf`` marks events impossible for a colluder.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .capacity import arcsine_rule
from .channels import CollusionChannel, marginals_array
from .core import NEG_INFINITY, binom_pmf_rows, check_probability
from .encode import Code

DEFAULT_TUPLE_BUDGET = math.comb(40, 4)


class BudgetExceeded(RuntimeError):
    """Joint enumeration refused because C(n, c) exceeds the configured budget."""


# ---------------------------------------------------------------- score models


@dataclass(frozen=True)
class InformedLLR:
    """Matched log-likelihood score for a known channel."""

    theta: CollusionChannel
    joint = False

    @property
    def c(self) -> int:
        return self.theta.c

    def table(self, p):
        return simple_llr_table(self.theta, p)


@dataclass(frozen=True)
class UniversalG:
    """ln(1 + h/c): the log-likelihood score of the interleaving channel."""

    c: int
    joint = False

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 2:
            raise ValueError(f"the universal score needs c >= 2, got {self.c}")

    def table(self, p):
        return _xy_table(lambda x, y, q: universal_score(x, y, q, self.c), p)


@dataclass(frozen=True)
class OosterwijkH:
    """Linear score h = p/(1-p), -1, (1-p)/p."""

    joint = False
    c: Optional[int] = None

    def table(self, p):
        return _xy_table(oosterwijk_score, p)


@dataclass(frozen=True)
class BayesianM:
    """ln(1 + h/n), the prior-weighted relative of the universal score."""

    c: int
    n: int
    joint = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"the Bayesian score needs n >= 2, got {self.n}")

    def table(self, p):
        return _xy_table(lambda x, y, q: bayesian_score(x, y, q, self.n), p)


@dataclass(frozen=True)
class JointLLR:
    """Matched joint log-likelihood score of a c-tuple."""

    theta: CollusionChannel
    joint = True

    @property
    def c(self) -> int:
        return self.theta.c

    def table(self, p):
        return joint_llr_table(self.theta, p)


@dataclass(frozen=True)
class JointUniversal:
    """Joint score ln(z/c) - ln p (y = 1), ln(1 - z/c) - ln(1 - p) (y = 0)."""

    c: int
    joint = True

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 1:
            raise ValueError(f"coalition size must be a positive integer, got {self.c}")

    def table(self, p):
        p = np.asarray(p, dtype=float)
        frac = np.arange(self.c + 1) / self.c
        with np.errstate(divide="ignore"):
            one = np.log(frac) - np.log(p)[..., None]
            zero = np.log1p(-frac) - np.log1p(-p)[..., None]
        return np.stack([zero, one], axis=-1)


ScoreModel = Union[InformedLLR, UniversalG, OosterwijkH, BayesianM, JointLLR, JointUniversal]


# ------------------------------------------------------------ simple scores


def _xy_table(fn, p):
    p = np.asarray(p, dtype=float)
    rows = [[fn(x, y, p) for y in (0, 1)] for x in (0, 1)]
    return np.moveaxis(np.array(rows, dtype=float), (0, 1), (-2, -1))


def _check_open(p):
    pa = np.asarray(p, dtype=float)
    if np.isnan(pa).any() or ((pa <= 0) | (pa >= 1)).any():
        raise ValueError("p must lie in the open interval (0, 1)")
    return pa


def _guilty_zero_cells(theta: CollusionChannel) -> np.ndarray:
    """[x, y] mask of outcomes a colluder holding x can never produce (for 0 < p < 1)."""
    t = theta.thetas
    zero = np.zeros((2, 2), dtype=bool)
    zero[0, 0] = bool(np.all(t[:-1] == 1.0))
    zero[0, 1] = bool(np.all(t[:-1] == 0.0))
    zero[1, 0] = bool(np.all(t[1:] == 1.0))
    zero[1, 1] = bool(np.all(t[1:] == 0.0))
    return zero


def simple_llr_table(theta: CollusionChannel, p):
    """g(x, y) = ln P_g(y | x) / P_i(y) with P_g from (a0, a1) and P_i from a."""
    pa = _check_open(p)
    a, _, _, delta, a_bar = marginals_array(theta, pa)
    if np.any(a <= 0) or np.any(a_bar <= 0):
        raise ValueError("innocent model degenerate: P(Y = 1) is 0 or 1 at this bias")
    # a1 = a + (1 - p) delta and a0 = a - p delta, written as relative shifts
    with np.errstate(divide="ignore", invalid="ignore"):
        g00 = np.log1p(pa * delta / a_bar)
        g01 = np.log1p(-pa * delta / a)
        g10 = np.log1p(-(1.0 - pa) * delta / a_bar)
        g11 = np.log1p((1.0 - pa) * delta / a)
    out = np.stack([np.stack([g00, g01], -1), np.stack([g10, g11], -1)], -2)
    out = np.where(_guilty_zero_cells(theta), NEG_INFINITY, out)
    return out


def oosterwijk_score(x, y, p):
    """h(x, y, p): p/(1-p) for (0,0), -1 on mismatch, (1-p)/p for (1,1)."""
    pa = _check_open(p)
    x = np.asarray(x)
    y = np.asarray(y)
    out = np.where(x != y, -1.0, np.where(x == 1, (1.0 - pa) / pa, pa / (1.0 - pa)))
    return float(out) if out.ndim == 0 else out


def universal_score(x, y, p, c: int):
    """g(x, y, p) = ln(1 + h(x, y, p)/c); finite for c >= 2."""
    if int(c) != c or c < 2:
        raise ValueError(f"the universal score needs c >= 2, got {c}")
    out = np.log1p(np.asarray(oosterwijk_score(x, y, p)) / c)
    return float(out) if out.ndim == 0 else out


def bayesian_score(x, y, p, n: int):
    """m(x, y, p) = ln(1 + h(x, y, p)/n)."""
    if int(n) != n or n < 2:
        raise ValueError(f"the Bayesian score needs n >= 2, got {n}")
    out = np.log1p(np.asarray(oosterwijk_score(x, y, p)) / n)
    return float(out) if out.ndim == 0 else out


def user_scores(code: Code, y, model, *, chunk_cells: int = 4_000_000) -> np.ndarray:
    """S_j = sum_i g(X[j, i], y_i, p_i); a single -inf term makes S_j = -inf."""
    if getattr(model, "joint", False):
        raise ValueError("user_scores needs a simple score model")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (code.ell,):
        raise ValueError(f"pirate output has length {y.size}, code length is {code.ell}")
    if code.ell == 0:
        return np.zeros(code.n)
    tab = model.table(code.biases)
    ty = tab[np.arange(code.ell), :, y]  # (ell, 2) indexed by x
    out = np.empty(code.n)
    step = max(1, chunk_cells // code.ell)
    for start in range(0, code.n, step):
        x = code.matrix[start:start + step]
        vals = np.where(x == 1, ty[:, 1], ty[:, 0])
        out[start:start + step] = vals.sum(axis=1)
    return out


# ------------------------------------------------------------- joint scores


def joint_llr_table(theta: CollusionChannel, p):
    """G(z, y) = ln theta_z / a (y = 1) or ln (1 - theta_z)/(1 - a) (y = 0)."""
    pa = _check_open(p)
    a, _, _, _, a_bar = marginals_array(theta, pa)
    if np.any(a <= 0) or np.any(a_bar <= 0):
        raise ValueError("innocent model degenerate: P(Y = 1) is 0 or 1 at this bias")
    t = theta.thetas
    with np.errstate(divide="ignore"):
        one = np.log(t) - np.log(a)[..., None]
        zero = np.log1p(-t) - np.log(a_bar)[..., None]
    return np.stack([zero, one], axis=-1)


def joint_tuple_score(code: Code, members, y, model) -> float:
    """Sum over positions of G(z_i, y_i, p_i), z_i = ones among the tuple members."""
    members = np.asarray(members, dtype=np.int64)
    if members.size != model.c:
        raise ValueError(f"tuple has {members.size} members, model expects c={model.c}")
    return float(_tuple_scores(code, members[None, :], y, model)[0])


def _tuple_scores(code: Code, tuples: np.ndarray, y, model, chunk_cells: int = 4_000_000) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (code.ell,):
        raise ValueError(f"pirate output has length {y.size}, code length is {code.ell}")
    tab = model.table(code.biases)
    gy = tab[np.arange(code.ell), :, y]  # (ell, c + 1) indexed by z
    cols = np.arange(code.ell)
    out = np.empty(len(tuples))
    step = max(1, chunk_cells // max(code.ell, 1))
    for start in range(0, len(tuples), step):
        z = code.matrix[tuples[start:start + step]].sum(axis=1, dtype=np.int64)
        out[start:start + step] = gy[cols, z].sum(axis=1)
    return out


@dataclass
class AccusationResult:
    accused: list
    scores: np.ndarray
    threshold: float


def accuse_simple(scores, eta: float) -> AccusationResult:
    """Accuse every user whose score is strictly above ``eta``."""
    s = np.asarray(scores, dtype=float)
    accused = [int(j) for j in np.flatnonzero(s > eta)]
    return AccusationResult(accused, s, float(eta))


@dataclass
class JointAccusationResult:
    over_threshold: list
    over_scores: list
    tuples_scored: int
    threshold: float
    all_guilty_flagged: Optional[bool] = None
    any_all_innocent_flagged: Optional[bool] = None
    all_guilty_score: Optional[float] = None
    max_all_innocent_score: Optional[float] = None


def accuse_joint(
    code: Code,
    y,
    model,
    eta: float,
    coalition=None,
    *,
    budget: int = DEFAULT_TUPLE_BUDGET,
) -> JointAccusationResult:
    """Score every c-subset of users and report those strictly above ``eta``.

    With a ground-truth ``coalition`` the result also says whether the all-guilty
    tuple was flagged and whether any tuple made only of innocents was.  Mixed
    tuples are listed but play no part in either flag.
    """
    if not getattr(model, "joint", False):
        raise ValueError("accuse_joint needs a joint score model")
    c = model.c
    count = math.comb(code.n, c)
    if count > budget:
        raise BudgetExceeded(f"joint decoding needs C({code.n},{c}) = {count} tuples, budget is {budget}")
    tuples = np.array(list(itertools.combinations(range(code.n), c)), dtype=np.int64).reshape(count, c)
    scores = _tuple_scores(code, tuples, y, model)
    hit = np.flatnonzero(scores > eta)
    res = JointAccusationResult(
        over_threshold=[tuple(int(u) for u in tuples[k]) for k in hit],
        over_scores=[float(scores[k]) for k in hit],
        tuples_scored=count,
        threshold=float(eta),
    )
    if coalition is not None:
        guilty = np.zeros(code.n, dtype=bool)
        guilty[np.asarray(list(coalition), dtype=np.int64)] = True
        if guilty.sum() != c:
            raise ValueError(f"coalition has {int(guilty.sum())} members, model expects c={c}")
        n_guilty = guilty[tuples].sum(axis=1)
        k_all = int(np.flatnonzero(n_guilty == c)[0])
        innocent = n_guilty == 0
        res.all_guilty_score = float(scores[k_all])
        res.all_guilty_flagged = bool(scores[k_all] > eta)
        res.max_all_innocent_score = float(scores[innocent].max()) if innocent.any() else None
        res.any_all_innocent_flagged = bool(np.any(scores[innocent] > eta))
    return res


# ------------------------------------------------ moment generating functions


def _log_mgf(weights: np.ndarray, logratio: np.ndarray, t: float, zero_mask: np.ndarray) -> np.ndarray:
    """ln sum_k w_k exp(t r_k) over the last axis, where w = P_i and r = ln P_g/P_i."""
    if t <= 0 and zero_mask.any():
        raise ValueError(
            f"M(t) diverges for t = {t} <= 0: some outcome has zero probability for a colluder"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(zero_mask, NEG_INFINITY, np.log(weights) + t * np.where(zero_mask, 0.0, logratio))
    top = np.max(e, axis=-1, keepdims=True)
    return top[..., 0] + np.log(np.sum(np.exp(e - top), axis=-1))


def _simple_log_mgf(theta: CollusionChannel, p: np.ndarray, t: float) -> np.ndarray:
    tab = simple_llr_table(theta, p)
    a, _, _, _, a_bar = marginals_array(theta, p)
    px = np.stack([1.0 - p, p], -1)[..., :, None]
    py = np.stack([a_bar, a], -1)[..., None, :]
    w = (px * py).reshape(p.shape + (4,))
    zero = np.broadcast_to(_guilty_zero_cells(theta).reshape(4), w.shape)
    return _log_mgf(w, tab.reshape(p.shape + (4,)), t, zero)


def _joint_log_mgf(theta: CollusionChannel, p: np.ndarray, t: float) -> np.ndarray:
    # the binomial prefactor is common to P_g and P_i, so only theta_z / a ratios remain
    tab = joint_llr_table(theta, p)
    a, _, _, _, a_bar = marginals_array(theta, p)
    pmf = binom_pmf_rows(theta.c, p)
    w = pmf[..., :, None] * np.stack([a_bar, a], -1)[..., None, :]
    th = theta.thetas
    zero = np.broadcast_to(np.stack([th == 1.0, th == 0.0], -1), w.shape)
    shape = p.shape + (2 * (theta.c + 1),)
    return _log_mgf(w.reshape(shape), tab.reshape(shape), t, zero.reshape(shape))


def moment_fn(theta: CollusionChannel, p, t: float):
    """M(t) = sum_{x,y} P_i(x,y)^(1-t) P_g(x,y)^t for the matched simple score."""
    pa = _check_open(p)
    out = np.exp(_simple_log_mgf(theta, pa, float(t)))
    return float(out) if out.ndim == 0 else out


def joint_moment_fn(theta: CollusionChannel, p, t: float):
    """M(t) over the (z, y) alphabet for the matched joint score."""
    pa = _check_open(p)
    out = np.exp(_joint_log_mgf(theta, pa, float(t)))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------- scheme parameters


@dataclass
class SchemeParams:
    """Threshold and code length guaranteeing the two error bounds.

    ``m_at_point`` is M(1 - sqrt(gamma)); under arcsine biases it is the
    geometric mean exp(E ln M) over the bias law.
    """

    gamma: float
    eta: float
    ell: int
    m_at_point: float
    ell_raw: float
    extra: dict = field(default_factory=dict)


def _log_ratio(n: int, eps1: float, power: int = 1) -> float:
    """ln(n^power / eps1), exact for arbitrarily large integer n."""
    return power * math.log(n) - math.log(eps1)


def _check_scheme_inputs(n, eps1, eps2):
    if int(n) != n or n < 2:
        raise ValueError(f"need at least two users, got n={n}")
    check_probability(eps1, "eps1", open_interval=True)
    check_probability(eps2, "eps2", open_interval=True)


def _scheme(gamma: float, eta: float, log_m: float) -> SchemeParams:
    if not log_m < 0:
        raise ValueError("M(1 - sqrt(gamma)) >= 1: the channel carries no information at this bias")
    sg = math.sqrt(gamma)
    raw = sg * (1.0 + sg) / (-log_m) * eta
    return SchemeParams(gamma, eta, int(math.ceil(raw)), math.exp(log_m), raw)


def _gamma(eps2: float, eta: float, what: str) -> float:
    gamma = -math.log(eps2) / eta
    if gamma >= 1:
        raise ValueError(
            f"eps2 too small relative to {what}: gamma = {gamma:.6g} >= 1, so M(1 - sqrt(gamma)) is undefined"
        )
    return gamma


def _average_log_m(fn, theta, p, t, nodes):
    if p is None:
        q, w = arcsine_rule(nodes)
        return math.fsum(fn(theta, q, t) * w)
    return float(fn(theta, np.asarray(check_probability(p, "p", open_interval=True)), t))


def scheme_params_simple(n: int, eps1: float, eps2: float, theta: CollusionChannel, p=None, *, nodes: int = 2000) -> SchemeParams:
    """gamma, threshold eta = ln(n/eps1) and code length for the matched simple decoder.

    ``p=None`` means arcsine biases: the per-position exponents are averaged.
    """
    _check_scheme_inputs(n, eps1, eps2)
    eta = _log_ratio(n, eps1)
    gamma = _gamma(eps2, eta, "n/eps1")
    return _scheme(gamma, eta, _average_log_m(_simple_log_mgf, theta, p, 1.0 - math.sqrt(gamma), nodes))


def scheme_params_joint(n: int, c: int, eps1: float, eps2: float, theta: CollusionChannel, p=None, *, nodes: int = 2000) -> SchemeParams:
    """As the simple version with n^c tuples: eta = ln(n^c/eps1)."""
    _check_scheme_inputs(n, eps1, eps2)
    if c != theta.c:
        raise ValueError(f"c={c} does not match the channel's coalition size {theta.c}")
    eta = _log_ratio(n, eps1, c)
    gamma = _gamma(eps2, eta, "n^c/eps1")
    return _scheme(gamma, eta, _average_log_m(_joint_log_mgf, theta, p, 1.0 - math.sqrt(gamma), nodes))


__all__ = [
    "AccusationResult",
    "BayesianM",
    "BudgetExceeded",
    "InformedLLR",
    "JointAccusationResult",
    "JointLLR",
    "JointUniversal",
    "OosterwijkH",
    "SchemeParams",
    "ScoreModel",
    "UniversalG",
    "accuse_joint",
    "accuse_simple",
    "bayesian_score",
    "joint_llr_table",
    "joint_moment_fn",
    "joint_tuple_score",
    "moment_fn",
    "oosterwijk_score",
    "scheme_params_joint",
    "scheme_params_simple",
    "simple_llr_table",
    "universal_score",
    "user_scores",
]
