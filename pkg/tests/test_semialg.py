import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from superres.multipoly import CPoly, TrigPoly
from superres.phase import rif_indicator_poly
from superres.polydisk import CayleyInner, rif_from_denominator
from superres.semialg import (LambdaProfile, NoAdmissibleIndex, PushforwardPoly, admissible_index, chart_density,
                              chart_map, charts, lambda_decay_check, lambda_fn, predicted_kappa, pushforward_Q,
                              superres_sweep)

MINUS_IM = TrigPoly(np.zeros(2), np.array([0.0, 1.0]))


def test_chart_points():
    assert chart_map(1, 0.0) == pytest.approx(1)
    assert chart_map(1, 1.0) == pytest.approx(1j)
    assert chart_map(2, 0.0) == pytest.approx(-1)


def test_charts_land_on_torus():
    t = np.random.default_rng(0).uniform(-1, 1, (100, 3))
    for j in charts(3):
        assert np.allclose(np.abs(chart_map(j, t)), 1, atol=1e-15)


def test_pushforward_examples():
    assert np.allclose(pushforward_Q(MINUS_IM, 1, 1).coeffs, [0, -2, 0])
    assert np.allclose(pushforward_Q(MINUS_IM, 2, 1).coeffs, [0, 2, 0])
    assert np.allclose(pushforward_Q(TrigPoly(np.array([3.0]), np.array([0.0])), 1, 1).coeffs, [3, 0, 3])


def test_admissible_examples():
    assert admissible_index(pushforward_Q(MINUS_IM, 1, 1)).m == (1,)
    Q = PushforwardPoly(np.array([[0, 0], [1, 0], [0, 1.0]]), (1, 1), 1)
    a = admissible_index(Q)
    assert a.m == (2, 1) and a.sigma == (0, 1)
    with pytest.raises(NoAdmissibleIndex):
        admissible_index(PushforwardPoly(np.array([5.0]), (1,), 0))


def test_admissible_index_dominates_every_term():
    rng = np.random.default_rng(5)
    c = rng.normal(size=(4, 4)) * (rng.random((4, 4)) < 0.5)
    c[0, 1] = 1.0
    a = admissible_index(PushforwardPoly(c, (1, 1), 2))
    for beta in np.argwhere(c != 0):
        beta = tuple(beta)
        if beta != a.m:
            k = next(k for k in a.sigma if a.m[k] != beta[k])
            assert a.m[k] > beta[k]


@pytest.fixture(scope="module")
def line_profile():
    return LambdaProfile(PushforwardPoly(np.array([0, 1.0]), (1,), 0))


def test_lambda_examples(line_profile):
    assert line_profile(0.0) == 0
    for eps in (0.1, 0.2, 0.5):
        assert line_profile(eps) == pytest.approx(eps**2 / 4, rel=1e-2)
    const = LambdaProfile(lambda t: np.full(t.shape[0], 2.0), d=1)
    assert const(0.3) == pytest.approx(0.6)


def test_lambda_range(line_profile):
    with pytest.raises(ValueError):
        line_profile(-0.1)
    with pytest.raises(ValueError):
        line_profile(2.5)


def test_decay_examples(line_profile):
    fit = lambda_decay_check(None, 1, profile=line_profile)
    assert fit.slope == pytest.approx(2, abs=0.05)
    assert fit.c_fit == pytest.approx(0.25, rel=1e-2)
    sq = lambda_decay_check(PushforwardPoly(np.array([0, 0, 1.0]), (1,), 0), 2, eps_grid=np.geomspace(1e-3, 0.1, 8))
    assert sq.slope == pytest.approx(3, abs=0.05)
    flat = lambda_decay_check(lambda t: np.ones(t.shape[0]), 0, d=1)
    assert flat.slope == pytest.approx(1, abs=1e-6)


def _bathtub_closed_form(coef, eps):
    """Exact Lambda for a real polynomial on [-1, 1] via roots of Q = +-s and antiderivatives."""
    anti = npoly.polyint(coef)

    def pieces(s):
        cuts = [-1.0, 1.0]
        for level in (s, -s, 0.0):
            r = npoly.polyroots(npoly.polysub(coef, [level]))
            cuts += [x.real for x in r if abs(x.imag) < 1e-7 and -1 < x.real < 1]
        cuts = np.sort(cuts)
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a and abs(npoly.polyval((a + b) / 2, coef)) <= s:
                yield a, b

    def measure(s):
        return sum(b - a for a, b in pieces(s))

    top = np.max(np.abs(npoly.polyval(np.linspace(-1, 1, 20001), coef))) + 1
    s = brentq(lambda s: measure(s) - eps, 0, top, xtol=1e-14)
    total = 0.0
    for a, b in pieces(s):
        m = (a + b) / 2
        sign = 1 if npoly.polyval(m, coef) >= 0 else -1
        total += sign * (npoly.polyval(b, anti) - npoly.polyval(a, anti))
    return total


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2).map(lambda x: round(x, 3)), min_size=2, max_size=4)
       .map(lambda c: np.trim_zeros(np.array(c), 'b').tolist())
       .filter(lambda c: len(c) > 1 and max(abs(x) for x in c[1:]) > 0.2),
       st.floats(0.05, 1.5))
def test_bathtub_matches_closed_form(coef, eps):
    Q = PushforwardPoly(np.array(coef), (1,), 0)
    assert lambda_fn(Q, eps, log2_samples=18) == pytest.approx(_bathtub_closed_form(coef, eps), rel=1e-2, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2))
def test_lambda_monotone(line_profile, a, b):
    lo, hi = sorted((a, b))
    assert line_profile(lo) <= line_profile(hi)


@pytest.fixture(scope="module")
def rif_P():
    p = CPoly(2, {(0, 0): 2, (1, 0): -1, (0, 1): -1})
    return rif_indicator_poly(p, (0, 0)).P


def test_pushforward_identity_and_degree(rif_P):
    rng = np.random.default_rng(0)
    t = rng.uniform(-1, 1, (1000, 2))
    nabs = 2
    for j in charts(2):
        Q = pushforward_Q(rif_P, j, nabs)
        lhs = np.prod(1 + t**2, axis=-1) ** nabs * rif_P(chart_map(j, t))
        assert np.max(np.abs(lhs - Q(t))) <= 1e-9
        assert Q.total_degree <= 2 * nabs * 2


def test_random_pushforward_degree_bound():
    rng = np.random.default_rng(3)
    for _ in range(10):
        P = TrigPoly(rng.normal(size=(2, 3, 2)), rng.normal(size=(2, 3, 2)))
        nabs = sum(P.degree())
        t = rng.uniform(-1, 1, (200, 3))
        for j in charts(3):
            Q = pushforward_Q(P, j, nabs)
            assert Q.total_degree <= 2 * nabs * 3
            ref = np.prod(1 + t**2, axis=-1) ** nabs * P(chart_map(j, t))
            assert np.max(np.abs(ref - Q(t))) <= 1e-9 * max(1, np.max(np.abs(ref)))


def test_charts_cover_torus_uniformly():
    d, M, bins = 2, 2**15, 4
    rng = np.random.default_rng(11)
    hist = np.zeros((bins,) * d)
    var = np.zeros_like(hist)
    for j in charts(d):
        t = rng.uniform(-1, 1, (M, d))
        w = 2**d * chart_density(t) / M
        th = np.mod(np.angle(chart_map(j, t)), 2 * np.pi)
        idx = tuple(np.minimum((th[:, k] / (2 * np.pi) * bins).astype(int), bins - 1) for k in range(d))
        np.add.at(hist, idx, w)
        np.add.at(var, idx, w**2)
    assert hist.sum() == pytest.approx(1, abs=0.02)
    assert np.all(np.abs(hist - 1 / bins**d) <= 3 * np.sqrt(var))


def test_chart_l1_comparison(rif_P):
    rng = np.random.default_rng(4)
    d = 2
    t = rng.uniform(-1, 1, (20000, d))
    for j in charts(d):
        xi = chart_map(j, t)
        g = (rif_P(xi) > 0).astype(float)
        for _ in range(5):
            u = TrigPoly(rng.normal(size=(2, 2)) * 0.3, rng.normal(size=(2, 2)) * 0.3)
            diff = np.abs(g - u(xi))
            torus_side = 2**d * np.mean(diff * chart_density(t))
            flat_side = 2**d * np.mean(diff)
            assert torus_side <= 2**d * flat_side


def test_kappa_prediction(rif_P):
    kappa, found = predicted_kappa(rif_P, 2)
    assert kappa == pytest.approx(1 / (max(a.order for _, a in found) + 1))
    assert len(found) == 4


def test_sweep_with_zero_perturbation():
    R = CayleyInner(rif_from_denominator(CPoly.constant(1, 1), (1,)))
    rep = superres_sweep(R, ts=[0.0, 0.1], N=2**10)
    zero = rep.rows[0]
    assert zero.delta == 0 and zero.sup_dist == 0 and zero.phase_l1 == 0


def test_sweep_one_variable_mixtures_are_linear():
    R = CayleyInner(rif_from_denominator(CPoly.constant(1, 1), (1,)))
    rep = superres_sweep(R, N=2**12)
    d = np.array([r.delta for r in rep.rows])
    s = np.array([r.sup_dist for r in rep.rows])
    assert np.allclose(s / d, s[0] / d[0], rtol=1e-9)
    assert rep.form_b_holds and rep.monotone
    assert rep.kappa_pred == pytest.approx(0.5)
    assert list(d) == sorted(d)
