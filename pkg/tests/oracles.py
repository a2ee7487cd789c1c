"""Independent high-precision and brute-force oracles used across the test suite."""

import itertools

import mpmath as mp

mp.mp.dps = 50


def h2(x):
    x = mp.mpf(x)
    if x == 0 or x == 1:
        return mp.mpf(0)
    return -(x * mp.log(x) + (1 - x) * mp.log1p(-x)) / mp.log(2)


def kl2(x, y):
    x, y = mp.mpf(x), mp.mpf(y)
    out = mp.mpf(0)
    if x > 0:
        out += x * mp.log(x / y, 2)
    if x < 1:
        out += (1 - x) * (mp.log1p(-x) - mp.log1p(-y)) / mp.log(2)
    return out


def binom_pmf(c, z, p):
    p = mp.mpf(p)
    return mp.binomial(c, z) * p**z * (1 - p) ** (c - z)


def _mi(joint):
    """Mutual information in bits from a dict {(u, v): prob}."""
    pu, pv = {}, {}
    for (u, v), w in joint.items():
        pu[u] = pu.get(u, 0) + w
        pv[v] = pv.get(v, 0) + w
    return mp.fsum(w * mp.log(w / (pu[u] * pv[v]), 2) for (u, v), w in joint.items() if w > 0)


def enumerate_patterns(thetas, p):
    """Yield (x vector, y, probability) over all 2^c colluder patterns."""
    c = len(thetas) - 1
    p = mp.mpf(p)
    for x in itertools.product((0, 1), repeat=c):
        z = sum(x)
        wx = p**z * (1 - p) ** (c - z)
        t = mp.mpf(thetas[z])
        yield x, 1, wx * t
        yield x, 0, wx * (1 - t)


def brute_marginals(thetas, p):
    """(a, a0, a1) by enumeration over all coalition patterns."""
    num = {0: mp.mpf(0), 1: mp.mpf(0)}
    den = {0: mp.mpf(0), 1: mp.mpf(0)}
    a = mp.mpf(0)
    for x, y, w in enumerate_patterns(thetas, p):
        den[x[0]] += w
        if y == 1:
            a += w
            num[x[0]] += w
    return a, num[0] / den[0], num[1] / den[1]


def brute_simple_mi(thetas, p):
    joint = {}
    for x, y, w in enumerate_patterns(thetas, p):
        joint[(x[0], y)] = joint.get((x[0], y), 0) + w
    return _mi(joint)


def brute_joint_mi(thetas, p):
    """I(X_1..X_c; Y) over the full pattern alphabet."""
    joint = {}
    for x, y, w in enumerate_patterns(thetas, p):
        joint[(x, y)] = joint.get((x, y), 0) + w
    return _mi(joint)


def brute_simple_mgf(thetas, p, t):
    """sum over (x1, y) of P_i^(1 - t) P_g^t, P_i = P(x1) P(y)."""
    joint = {}
    for x, y, w in enumerate_patterns(thetas, p):
        joint[(x[0], y)] = joint.get((x[0], y), 0) + w
    p = mp.mpf(p)
    a = joint[(0, 1)] + joint[(1, 1)]
    t = mp.mpf(t)
    out = mp.mpf(0)
    for (x1, y), pg in joint.items():
        pi = (p if x1 else 1 - p) * (a if y else 1 - a)
        if pg > 0:
            out += pi ** (1 - t) * pg**t
    return out


def brute_joint_mgf(thetas, p, t):
    """Double sum over (z, y) with the binomial prefactor kept explicit."""
    c = len(thetas) - 1
    p = mp.mpf(p)
    t = mp.mpf(t)
    a = mp.fsum(binom_pmf(c, z, p) * mp.mpf(thetas[z]) for z in range(c + 1))
    out = mp.mpf(0)
    for z in range(c + 1):
        b = binom_pmf(c, z, p)
        th = mp.mpf(thetas[z])
        for y in (0, 1):
            pg = b * (th if y else 1 - th)
            pi = b * (a if y else 1 - a)
            if pg > 0:
                out += pi ** (1 - t) * pg**t
    return out
