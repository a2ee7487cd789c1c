import math

import numpy as np
import pytest

from fpcap.capacity import simple_mi
from fpcap.channels import ATTACKS, channel_marginals, make_channel, pirate_output
from fpcap.core import RngStream
from fpcap.decode import InformedLLR, JointUniversal, UniversalG, scheme_params_simple
from fpcap.encode import BiasModel
from fpcap.sim import (
    GROUP_TESTING_ASYMPTOTE,
    ErrorEstimate,
    Scenario,
    estimate_error_rates,
    group_testing_bias,
    group_testing_plan,
    group_testing_run,
    innocent_mgf_probe,
    run_trial,
    trial_artifacts,
    wilson_interval,
    within_bound,
)

LN2 = math.log(2)


def informed_scenario(n=50, c=3, attack="all1", p=None, eta=5.0, ell=60, **kw):
    th = make_channel(attack, c)
    p = group_testing_bias(c) if p is None else p
    return Scenario(n, c, th, BiasModel.fixed(p), InformedLLR(th), eta, ell, **kw)


def test_scenario_validation():
    th = make_channel("all1", 3)
    with pytest.raises(ValueError):
        Scenario(10, 2, th, BiasModel.arcsine(), InformedLLR(th), 1.0, 10)
    with pytest.raises(ValueError):
        Scenario(10, 3, th, BiasModel.arcsine(), UniversalG(4), 1.0, 10)
    with pytest.raises(ValueError):
        Scenario(10, 3, th, BiasModel.arcsine(), JointUniversal(3), 1.0, 10)
    with pytest.raises(ValueError):
        Scenario(10, 3, th, BiasModel.arcsine(), InformedLLR(th), 1.0, 0)
    with pytest.raises(ValueError):
        Scenario(2, 3, th, BiasModel.arcsine(), InformedLLR(th), 1.0, 5)
    with pytest.raises(ValueError):
        Scenario(10, 3, th, BiasModel.arcsine(), InformedLLR(th), 1.0, 5, coalition=(0, 0, 1))


def test_run_trial_deterministic():
    sc = informed_scenario()
    a = run_trial(sc, 7, RngStream(11))
    b = run_trial(sc, 7, RngStream(11))
    assert a == b
    assert a.seed == (11, 0, 7)


def test_infinite_threshold_accuses_nobody():
    sc = informed_scenario(eta=math.inf)
    for k in range(5):
        o = run_trial(sc, k, RngStream(0))
        assert not o.fp_occurred and o.fn_occurred and o.accused_count == 0


def test_everyone_guilty_no_false_positive():
    sc = informed_scenario(n=3, c=3, eta=-math.inf)
    for k in range(5):
        assert not run_trial(sc, k, RngStream(1)).fp_occurred


def test_marking_assumption_all_zero_column():
    sc = informed_scenario(n=20, c=3, coalition=(2, 5, 9))
    for k in range(20):
        coalition, code, y = trial_artifacts(sc, k, RngStream(3))
        zero = ~code.matrix[coalition].any(axis=0)
        assert not y[zero].any()
    # and directly on a forced all-zero column
    x = np.zeros((3, 4), dtype=np.uint8)
    x[:, 1] = 1
    y = pirate_output(x, make_channel("all1", 3), RngStream(0))
    assert y[0] == 0 and y[1] == 1


def test_thread_invariance():
    sc = informed_scenario(ell=40)
    a = estimate_error_rates(sc, 30, RngStream(5), keep_outcomes=True)
    b = estimate_error_rates(sc, 30, RngStream(5), threads=4, keep_outcomes=True)
    assert a.summary() == b.summary()
    assert a.outcomes == b.outcomes


def test_trial_order_independent():
    sc = informed_scenario(ell=40)
    master = RngStream(5)
    forward = [run_trial(sc, k, master) for k in range(10)]
    backward = [run_trial(sc, k, master) for k in reversed(range(10))][::-1]
    assert forward == backward


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
    for k in range(0, 21):
        lo, hi = wilson_interval(k, 20)
        assert lo <= k / 20 <= hi
    est = ErrorEstimate(trials=10, fp_count=1, fn_count=3, master_seed=0)
    assert est.fp_rate == 0.1 and est.fn_ci[0] <= 0.3 <= est.fn_ci[1]


def test_within_bound():
    assert within_bound(0.05, 0.05, 1000)
    assert within_bound(0.07, 0.05, 1000)
    assert not within_bound(0.08, 0.05, 1000)


def test_estimate_error_rates_bounds_small():
    th = make_channel("all1", 3)
    p = group_testing_bias(3)
    sp = scheme_params_simple(200, 0.05, 0.5, th, p)
    sc = Scenario(200, 3, th, BiasModel.fixed(p), InformedLLR(th), sp.eta, sp.ell)
    est = estimate_error_rates(sc, 200, RngStream(0))
    assert within_bound(est.fp_rate, 0.05, 200)
    assert within_bound(est.fn_rate, 0.5, 200)


def test_universal_innocent_side_interleaving():
    c, n = 3, 200
    sc = Scenario(
        n, c, make_channel("interleaving", c), BiasModel.arcsine(), UniversalG(c),
        math.log(n / 0.05), math.ceil(4 * c * c * math.log(n)),
    )
    est = estimate_error_rates(sc, 200, RngStream(2))
    assert within_bound(est.fp_rate, 0.05, 200)


def separation_run(attack="interleaving", c=2, p=0.5, ell=2000, trials=20):
    th = make_channel(attack, c)
    sc = Scenario(50, c, th, BiasModel.fixed(p), InformedLLR(th), math.inf, ell)
    est = estimate_error_rates(sc, trials, RngStream(9), keep_outcomes=True)
    guilty = np.mean([o.guilty_mean for o in est.outcomes])
    innocent = np.mean([o.innocent_mean for o in est.outcomes])
    return th, guilty, innocent


def innocent_divergence(th, p):
    """D(P_i || P_g) per position in nats."""
    m = channel_marginals(th, p)
    pi = np.array([(1 - p) * (1 - m.a), (1 - p) * m.a, p * (1 - m.a), p * m.a])
    pg = np.array([(1 - p) * (1 - m.a0), (1 - p) * m.a0, p * (1 - m.a1), p * m.a1])
    return float(np.sum(pi * np.log(pi / pg)))


@pytest.mark.parametrize("attack,c,p", [("interleaving", 2, 0.5), ("majority", 3, 0.5), ("coinflip", 3, 0.3)])
def test_guilty_and_innocent_means(attack, c, p):
    th, guilty, innocent = separation_run(attack, c, p)
    ell = 2000
    assert guilty == pytest.approx(ell * simple_mi(th, p) * LN2, rel=0.05)
    assert innocent == pytest.approx(-ell * innocent_divergence(th, p), rel=0.05)


def test_guilty_minus_innocent_literal_separation():
    # literal form: mean guilty score minus mean innocent score ~ ell I ln 2
    th, guilty, innocent = separation_run()
    assert guilty - innocent == pytest.approx(2000 * simple_mi(th, 0.5) * LN2, rel=0.05)


def test_group_testing_bias():
    assert group_testing_bias(3) == pytest.approx(0.206299, abs=1e-6)
    assert group_testing_bias(3) == pytest.approx(1 - 2 ** (-1 / 3), rel=1e-15)
    assert channel_marginals(make_channel("all1", 7), group_testing_bias(7)).a == pytest.approx(0.5, abs=1e-15)


def test_group_testing_plan_example_literal():
    # literal example: ratio in [2.0, 3.2] at n=1e4, c=10, and decreasing as eps1 decreases
    base = group_testing_plan(10**4, 10, 0.05, 0.5)
    smaller = group_testing_plan(10**4, 10, 0.005, 0.5)
    assert 2.0 <= base.ratio <= 3.2
    assert smaller.ratio < base.ratio


def test_group_testing_ratio_decreases_with_n():
    plans = [group_testing_plan(10**k, 10, 0.05, 0.5) for k in (4, 30, 300, 3000)]
    ratios = [pl.ratio for pl in plans]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    # finite-c limit 1/(c I ln 2), approached within the 1 + 3 sqrt(gamma) envelope
    limit = 1 / (10 * simple_mi(make_channel("all1", 10), group_testing_bias(10)) * LN2)
    gamma = plans[-1].params.gamma
    assert limit <= ratios[-1] <= limit * (1 + 3 * math.sqrt(gamma)) * (1 + math.log(20) / (3000 * math.log(10)))
    # and the finite-c limit tends to 1/ln^2 2 as c grows
    gaps = [abs(1 / (c * simple_mi(make_channel("all1", c), group_testing_bias(c)) * LN2) - GROUP_TESTING_ASYMPTOTE) for c in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_group_testing_run_fp():
    rep = group_testing_run(200, 3, 0.05, 0.5, RngStream(4), 500)
    assert rep.plan.p == pytest.approx(0.206299, abs=1e-6)
    assert within_bound(rep.estimate.fp_rate, 0.05, 500)


def test_innocent_probe_examples():
    inter = make_channel("interleaving", 2)
    v = innocent_mgf_probe(inter, inter, 0.5, 10**6, RngStream(0))
    assert abs(v - 1) < 0.005
    v = innocent_mgf_probe(make_channel("interleaving", 3), make_channel("all1", 3), 0.3, 10**6, RngStream(1))
    assert abs(v - 1) < 0.005
    for kind in ATTACKS:
        for true in ATTACKS:
            assert innocent_mgf_probe(make_channel(kind, 5), make_channel(true, 5), 0.37, analytic=True) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        innocent_mgf_probe(inter, inter, 0.5, 10)
