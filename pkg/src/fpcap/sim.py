"""Seeded Monte Carlo trials: encode, attack, decode, and count errors.

Every trial draws from its own substream of the master stream, keyed by the
trial index and then by phase (coalition, biases, code, attack).  Outcomes
therefore depend only on (scenario, trial index, master seed), whatever the
order or degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .capacity import simple_mi
from .channels import CollusionChannel, channel_marginals, make_channel, pirate_output
from .core import RngStream, as_generator, check_probability, open_uniform
from .decode import (
    InformedLLR,
    SchemeParams,
    accuse_joint,
    accuse_simple,
    scheme_params_simple,
    simple_llr_table,
    user_scores,
)
from .encode import BiasModel, draw_biases, generate_code

PHASE_COALITION, PHASE_BIASES, PHASE_CODE, PHASE_ATTACK = range(4)
WILSON_Z = 1.959963984540054


@dataclass(frozen=True)
class Scenario:
    n: int
    c: int
    attack: CollusionChannel
    bias_model: BiasModel
    score_model: object
    eta: float
    ell: int
    mode: str = "simple"
    coalition: Optional[tuple] = None  # fixed coalition instead of a fresh draw per trial

    def __post_init__(self):
        if self.attack.c != self.c:
            raise ValueError(f"attack is for c={self.attack.c}, scenario has c={self.c}")
        model_c = getattr(self.score_model, "c", None)
        if model_c is not None and model_c != self.c:
            raise ValueError(f"score model is for c={model_c}, scenario has c={self.c}")
        if self.mode not in ("simple", "joint"):
            raise ValueError(f"mode must be 'simple' or 'joint', got {self.mode!r}")
        if bool(getattr(self.score_model, "joint", False)) != (self.mode == "joint"):
            raise ValueError(f"score model does not match mode {self.mode!r}")
        if not 1 <= self.c <= self.n:
            raise ValueError(f"need 1 <= c <= n, got c={self.c}, n={self.n}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"code length must be a positive integer, got {self.ell}")
        if self.coalition is not None:
            members = sorted(set(int(j) for j in self.coalition))
            if len(members) != self.c or members[0] < 0 or members[-1] >= self.n:
                raise ValueError("fixed coalition must list c distinct users in [0, n)")


@dataclass
class TrialOutcome:
    trial_index: int
    fp_occurred: bool
    fn_occurred: bool
    accused_guilty_count: int
    accused_count: int
    seed: tuple
    guilty_mean: float = math.nan
    innocent_mean: float = math.nan


def wilson_interval(k: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        return (0.0, 1.0)
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, min(centre - half, phat)), min(1.0, max(centre + half, phat)))


@dataclass
class ErrorEstimate:
    trials: int
    fp_count: int
    fn_count: int
    master_seed: int
    stream_index: int = 0
    mean_accused_guilty: float = 0.0
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def fp_rate(self) -> float:
        return self.fp_count / self.trials

    @property
    def fn_rate(self) -> float:
        return self.fn_count / self.trials

    @property
    def fp_ci(self) -> tuple[float, float]:
        return wilson_interval(self.fp_count, self.trials)

    @property
    def fn_ci(self) -> tuple[float, float]:
        return wilson_interval(self.fn_count, self.trials)

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "fp_count": self.fp_count,
            "fn_count": self.fn_count,
            "fp_rate": self.fp_rate,
            "fn_rate": self.fn_rate,
            "fp_ci95": list(self.fp_ci),
            "fn_ci95": list(self.fn_ci),
            "mean_accused_guilty": self.mean_accused_guilty,
            "master_seed": self.master_seed,
            "stream_index": self.stream_index,
        }


def within_bound(rate: float, bound: float, trials: int, sigmas: float = 3.0) -> bool:
    """rate <= bound + sigmas * sqrt(bound (1 - bound) / trials)."""
    return rate <= bound + sigmas * math.sqrt(bound * (1.0 - bound) / trials)


def trial_artifacts(scenario: Scenario, trial_index: int, master: RngStream):
    """Coalition, code and pirate output for one trial, reproducible from the keys."""
    base = master.substream(trial_index)
    if scenario.coalition is not None:
        coalition = np.array(sorted(int(j) for j in scenario.coalition), dtype=np.int64)
    else:
        gen = base.substream(PHASE_COALITION).generator()
        coalition = np.sort(gen.choice(scenario.n, size=scenario.c, replace=False))
    biases = draw_biases(scenario.bias_model, scenario.ell, base.substream(PHASE_BIASES))
    code = generate_code(scenario.n, biases, base.substream(PHASE_CODE))
    y = pirate_output(code.matrix[coalition], scenario.attack, base.substream(PHASE_ATTACK))
    return coalition, code, y


def run_trial(scenario: Scenario, trial_index: int, master: RngStream) -> TrialOutcome:
    coalition, code, y = trial_artifacts(scenario, trial_index, master)
    guilty = np.zeros(scenario.n, dtype=bool)
    guilty[coalition] = True
    seed = (master.master_seed, master.stream_index, *master.path, int(trial_index))
    if scenario.mode == "simple":
        scores = user_scores(code, y, scenario.score_model)
        acc = accuse_simple(scores, scenario.eta)
        flagged = np.zeros(scenario.n, dtype=bool)
        flagged[acc.accused] = True
        n_guilty = int((flagged & guilty).sum())
        return TrialOutcome(
            trial_index=int(trial_index),
            fp_occurred=bool((flagged & ~guilty).any()),
            fn_occurred=n_guilty == 0,
            accused_guilty_count=n_guilty,
            accused_count=int(flagged.sum()),
            seed=seed,
            guilty_mean=float(scores[guilty].mean()),
            innocent_mean=float(scores[~guilty].mean()) if (~guilty).any() else math.nan,
        )
    res = accuse_joint(code, y, scenario.score_model, scenario.eta, coalition)
    members = {u for t in res.over_threshold for u in t}
    return TrialOutcome(
        trial_index=int(trial_index),
        fp_occurred=bool(res.any_all_innocent_flagged),
        fn_occurred=not res.all_guilty_flagged,
        accused_guilty_count=int(sum(1 for u in members if guilty[u])),
        accused_count=len(res.over_threshold),
        seed=seed,
        guilty_mean=res.all_guilty_score,
    )


def estimate_error_rates(
    scenario: Scenario,
    trials: int,
    master: RngStream,
    *,
    threads: int = 1,
    keep_outcomes: bool = False,
) -> ErrorEstimate:
    """Run trials 0..trials-1 and aggregate FP/FN counts with Wilson intervals."""
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials}")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    indices = range(int(trials))
    if threads == 1:
        outcomes = [run_trial(scenario, k, master) for k in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda k: run_trial(scenario, k, master), indices))
    return ErrorEstimate(
        trials=int(trials),
        fp_count=sum(o.fp_occurred for o in outcomes),
        fn_count=sum(o.fn_occurred for o in outcomes),
        master_seed=master.master_seed,
        stream_index=master.stream_index,
        mean_accused_guilty=sum(o.accused_guilty_count for o in outcomes) / trials,
        outcomes=outcomes if keep_outcomes else [],
    )


# ------------------------------------------------------------- group testing

GROUP_TESTING_ASYMPTOTE = 1.0 / math.log(2.0) ** 2


def group_testing_bias(c: int) -> float:
    """The bias at which the all-1 output is a fair coin: 1 - 2^(-1/c)."""
    return -math.expm1(-math.log(2.0) / c)


@dataclass
class GroupTestingPlan:
    n: int
    c: int
    eps1: float
    eps2: float
    p: float
    params: SchemeParams
    info_bits: float

    @property
    def ratio(self) -> float:
        """Tests per defective per nat of population size: ell / (c ln n)."""
        return self.params.ell / (self.c * math.log(self.n))

    @property
    def capacity_ratio(self) -> float:
        """ell I ln 2 / ln(n/eps1); lies in [1, 1 + O(sqrt(gamma))]."""
        return self.params.ell * self.info_bits * math.log(2.0) / self.params.eta


def group_testing_plan(n: int, c: int, eps1: float, eps2: float) -> GroupTestingPlan:
    """All-1 channel, matched decoder, fixed bias 1 - 2^(-1/c). ``n`` may be a huge int."""
    theta = make_channel("all1", c)
    p = group_testing_bias(c)
    params = scheme_params_simple(n, eps1, eps2, theta, p)
    return GroupTestingPlan(int(n), int(c), eps1, eps2, p, params, simple_mi(theta, p))


@dataclass
class GroupTestingReport:
    plan: GroupTestingPlan
    estimate: ErrorEstimate


def group_testing_scenario(plan: GroupTestingPlan) -> Scenario:
    theta = make_channel("all1", plan.c)
    return Scenario(
        n=plan.n,
        c=plan.c,
        attack=theta,
        bias_model=BiasModel.fixed(plan.p),
        score_model=InformedLLR(theta),
        eta=plan.params.eta,
        ell=plan.params.ell,
    )


def group_testing_run(
    n: int, c: int, eps1: float, eps2: float, master: RngStream, trials: int, *, threads: int = 1
) -> GroupTestingReport:
    plan = group_testing_plan(n, c, eps1, eps2)
    est = estimate_error_rates(group_testing_scenario(plan), trials, master, threads=threads)
    return GroupTestingReport(plan, est)


# ------------------------------------------------------------- innocent probe


def innocent_mgf_probe(
    theta_model: CollusionChannel,
    theta_true: CollusionChannel,
    p: float,
    samples: int = 10**6,
    rng=None,
    *,
    analytic: bool = False,
) -> float:
    """E[exp g_model(X, Y)] with X ~ Bernoulli(p) independent of Y ~ Bernoulli(a_true).

    The analytic variant evaluates the four-term sum; both should give 1.
    """
    p = check_probability(p, "p", open_interval=True)
    g = simple_llr_table(theta_model, p)
    a_true = channel_marginals(theta_true, p).a
    if analytic:
        px = np.array([1.0 - p, p])
        py = np.array([1.0 - a_true, a_true])
        return math.fsum((px[:, None] * py[None, :] * np.exp(g)).ravel())
    if rng is None:
        raise ValueError("sampling mode needs an rng")
    gen = as_generator(rng)
    x = (open_uniform(gen, samples) < p).astype(np.int64)
    y = (open_uniform(gen, samples) < a_true).astype(np.int64)
    return float(np.mean(np.exp(g[x, y])))


__all__ = [
    "ErrorEstimate",
    "GROUP_TESTING_ASYMPTOTE",
    "GroupTestingPlan",
    "GroupTestingReport",
    "Scenario",
    "TrialOutcome",
    "estimate_error_rates",
    "group_testing_bias",
    "group_testing_plan",
    "group_testing_run",
    "group_testing_scenario",
    "innocent_mgf_probe",
    "run_trial",
    "trial_artifacts",
    "wilson_interval",
    "within_bound",
]
