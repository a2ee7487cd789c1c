import math

import numpy as np
import pytest

from fpcap.channels import (
    ATTACKS,
    CollusionChannel,
    channel_marginals,
    custom_channel,
    load_channel,
    make_channel,
    marginals_array,
    pirate_output,
)
from fpcap.core import RngStream
from oracles import brute_marginals


def test_make_channel_examples():
    assert np.array_equal(make_channel("interleaving", 4).thetas, [0, 0.25, 0.5, 0.75, 1])
    assert np.array_equal(make_channel("minority", 3).thetas, [0, 1, 0, 1])
    assert np.array_equal(make_channel("all1", 3).thetas, [0, 1, 1, 1])
    assert np.array_equal(make_channel("majority", 5).thetas, [0, 0, 0, 1, 1, 1])
    assert np.array_equal(make_channel("coinflip", 3).thetas, [0, 0.5, 0.5, 1])


@pytest.mark.parametrize("kind", ["majority", "minority"])
def test_even_voting_rejected(kind):
    with pytest.raises(ValueError, match="odd"):
        make_channel(kind, 4)


def test_bad_sizes_and_kinds():
    with pytest.raises(ValueError):
        make_channel("interleaving", 0)
    with pytest.raises(ValueError):
        make_channel("shuffle", 3)
    with pytest.raises(ValueError):
        CollusionChannel(10**6 + 1, np.zeros(10**6 + 2))


def test_custom_channel():
    ch = custom_channel(2, (0, 0.5, 1))
    assert ch == make_channel("interleaving", 2) == make_channel("coinflip", 2)
    with pytest.raises(ValueError, match="marking"):
        custom_channel(2, (0.1, 0.5, 1))
    with pytest.raises(ValueError):
        custom_channel(3, (0, 1.2, 0.5, 1))
    with pytest.raises(ValueError):
        custom_channel(3, (0, 0.5, 1))
    assert custom_channel(3, (0, 0.2, 0.9, 1)).c == 3


def test_channel_is_immutable():
    ch = make_channel("all1", 3)
    with pytest.raises(AttributeError):
        ch.c = 4
    with pytest.raises(ValueError):
        ch.thetas[1] = 0.0


@pytest.mark.parametrize("kind", ATTACKS)
@pytest.mark.parametrize("c", [1, 3, 7, 101])
def test_marking_assumption_always_holds(kind, c):
    ch = make_channel(kind, c)
    assert ch.thetas[0] == 0.0 and ch.thetas[-1] == 1.0


def test_marginal_examples():
    for c in (1, 2, 5, 50):
        assert channel_marginals(make_channel("interleaving", c), 0.37).a == pytest.approx(0.37, abs=1e-15)
    m = channel_marginals(make_channel("all1", 2), 0.3)
    assert (m.a, m.a0, m.a1) == pytest.approx((0.51, 0.3, 1.0), abs=1e-15)
    m = channel_marginals(make_channel("interleaving", 2), 0.5)
    assert (m.a, m.a0, m.a1) == pytest.approx((0.5, 0.25, 0.75), abs=1e-15)


def test_marginals_match_enumeration():
    rng = np.random.default_rng(3)
    for c in range(1, 7):
        channels = [make_channel(k, c) for k in ("interleaving", "all1", "coinflip")]
        channels.append(custom_channel(c, np.r_[0, rng.random(c - 1), 1]))
        for ch in channels:
            for p in (0.03, 0.3, 0.5, 0.81):
                m = channel_marginals(ch, p)
                a, a0, a1 = brute_marginals(ch.thetas, p)
                assert m.a == pytest.approx(float(a), abs=1e-12)
                assert m.a0 == pytest.approx(float(a0), abs=1e-12)
                assert m.a1 == pytest.approx(float(a1), abs=1e-12)
                assert m.a_bar == pytest.approx(float(1 - a), abs=1e-12)


def test_marginal_identity_fuzz():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        c = int(rng.integers(1, 40))
        ch = custom_channel(c, np.r_[0, rng.random(c - 1), 1])
        p = float(rng.uniform(1e-4, 1 - 1e-4))
        m = channel_marginals(ch, p)
        assert abs(m.a - (p * m.a1 + (1 - p) * m.a0)) < 1e-12
        assert abs(m.delta - (m.a1 - m.a0)) < 1e-12


@pytest.mark.parametrize("kind,c", [("interleaving", 10), ("majority", 11), ("coinflip", 9), ("interleaving", 300)])
def test_symmetric_channel_marginals(kind, c):
    ch = make_channel(kind, c)
    assert ch.is_symmetric
    p = np.linspace(0.01, 0.99, 99)
    a, *_ = marginals_array(ch, p)
    a_rev, *_ = marginals_array(ch, 1 - p)
    assert np.max(np.abs(a_rev - (1 - a))) < 1e-12


def test_pirate_output_marking_examples():
    rng = RngStream(5)
    for kind in ATTACKS:
        ch = make_channel(kind, 3)
        ones = np.ones((3, 50), dtype=np.uint8)
        zeros = np.zeros((3, 50), dtype=np.uint8)
        assert pirate_output(ones, ch, rng.substream(1)).all()
        assert not pirate_output(zeros, ch, rng.substream(2)).any()
    mixed = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.uint8)
    assert pirate_output(mixed, make_channel("all1", 3), rng).all()


def test_pirate_output_frequency():
    ch = custom_channel(4, (0, 0.2, 0.65, 0.9, 1))
    ell = 10**5
    x = np.zeros((4, ell), dtype=np.uint8)
    x[:2] = 1  # z = 2 in every column
    y = pirate_output(x, ch, RngStream(9))
    se = math.sqrt(0.65 * 0.35 / ell)
    assert abs(y.mean() - 0.65) < 4 * se


def test_pirate_output_size_mismatch():
    with pytest.raises(ValueError):
        pirate_output(np.zeros((2, 5)), make_channel("all1", 3), RngStream(0))


def test_load_channel(tmp_path):
    f = tmp_path / "ch.txt"
    f.write_text("3\n0 0.2 0.9 1\n")
    assert load_channel(f) == custom_channel(3, (0, 0.2, 0.9, 1))
    f.write_text("3\n0.1 0.2 0.9 1\n")
    with pytest.raises(ValueError, match="marking"):
        load_channel(f)
    f.write_text("3\n")
    with pytest.raises(ValueError):
        load_channel(f)
