import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from geodesic_clt.amplitude import build_table
from geodesic_clt.testfn import make_test_function
from geodesic_clt.trace import (
    WEYL_C1,
    EigenvalueList,
    ExperimentConfig,
    RegimeError,
    TableRangeError,
    _mangoldt_coefficients,
    digamma,
    elliptic_term,
    hyperbolic_sum,
    hyperbolic_sum_naive,
    log_norm,
    mean_density,
    mean_density_derivative,
    mean_term,
    mean_term_derivative,
    read_eigenvalues,
    residual_parts,
    residual_term,
    residual_term_derivative,
    spectral_side,
    trigamma,
    weyl_count,
)

TRI = make_test_function("triangle")
BUMP = make_test_function("bump")


def test_log_norm_reexport():
    assert log_norm(3) == pytest.approx(2 * math.log((3 + math.sqrt(5)) / 2), rel=1e-15)


def test_hyperbolic_sum_vanishes_for_small_L(small_table):
    assert 2 * math.pi * 0.30 < log_norm(3)
    taus = np.random.default_rng(0).uniform(0, 1e4, 50)
    assert np.all(hyperbolic_sum(taus, 0.30, TRI, small_table) == 0.0)


def test_hyperbolic_sum_single_term(small_table):
    L = 0.35
    fh = 1 - log_norm(3) / (2 * math.pi * L)
    expected = 1 / (math.pi * L) * 0.4304089409640 * fh * 2
    assert hyperbolic_sum(0.0, L, TRI, small_table) == pytest.approx(expected, rel=1e-9)
    # the rounded reference value 0.097657 was computed with f_hat = 0.124741
    assert hyperbolic_sum(0.0, L, TRI, small_table) == pytest.approx(0.097657, rel=5e-4)


@given(st.floats(0, 1e6), st.floats(0.5, 3.0))
@settings(max_examples=30)
def test_hyperbolic_sum_even(small_table, tau, L):
    assert hyperbolic_sum(tau, L, TRI, small_table) == pytest.approx(hyperbolic_sum(-tau, L, TRI, small_table), abs=1e-12)


def test_support_cutoff_exact(small_table):
    L = 1.2
    ell = small_table.log_norm
    outside = ell > 2 * math.pi * L
    assert np.all(TRI.f_hat(ell[outside] / (2 * math.pi * L)) == 0.0)
    # a table truncated right after the support gives the same sum
    need = math.ceil(math.exp(math.pi * L))
    short = build_table(need)
    taus = np.linspace(10, 1e5, 37)
    np.testing.assert_array_equal(hyperbolic_sum(taus, L, TRI, short), hyperbolic_sum(taus, L, TRI, small_table))


def test_table_range_error():
    with pytest.raises(TableRangeError):
        hyperbolic_sum(1.0, 2.0, TRI, build_table(100))


def test_blocked_matches_naive(small_table):
    rng = np.random.default_rng(42)
    for _ in range(100):
        tau = rng.uniform(1e3, 2e6)
        L = rng.uniform(0.4, 2.5)
        fast = hyperbolic_sum(tau, L, TRI, small_table)
        slow = hyperbolic_sum_naive(tau, L, TRI, small_table)
        assert abs(fast - slow) <= 1e-9 * max(1.0, abs(slow))


def test_worker_count_does_not_change_results(small_table):
    taus = np.random.default_rng(3).uniform(1e5, 2e5, 3000)
    one = hyperbolic_sum(taus, 2.0, TRI, small_table, workers=1)
    four = hyperbolic_sum(taus, 2.0, TRI, small_table, workers=4)
    np.testing.assert_array_equal(one, four)


def test_experiment_config_regime():
    with pytest.raises(RegimeError):
        ExperimentConfig(T=100.0, L=2.0)
    with pytest.warns(RuntimeWarning):
        ExperimentConfig(T=1e6, L=0.95 * math.log(1e6) / math.pi)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cfg = ExperimentConfig(T=1e6, L=2.5)
    assert cfg.n_levels == pytest.approx(1e6 / 15)


@given(st.complex_numbers(min_magnitude=0, max_magnitude=200).filter(lambda z: z.real > 0.05))
@settings(max_examples=100)
def test_digamma_against_mpmath(z):
    assert abs(digamma(z) - complex(mpmath.digamma(z))) <= 1e-12 * max(1, abs(complex(mpmath.digamma(z))))
    assert abs(trigamma(z) - complex(mpmath.psi(1, z))) <= 1e-12 * max(1, abs(complex(mpmath.psi(1, z))))


def test_mean_density_values():
    gamma = float(mpmath.euler)
    assert mean_density(0.0) == pytest.approx(2 * gamma + 2 * math.log(2), rel=1e-13)
    assert mean_density(0.0) == pytest.approx(2.540726, abs=1e-6)
    # M(r) = (pi/6) r - 2 log r + O(1/r^2)
    for r in (1e3, 1e4):
        assert mean_density(r) - (math.pi / 6 * r - 2 * math.log(r)) == pytest.approx(0, abs=1e-5)
    assert mean_density(1e4) / (math.pi / 6 * 1e4) == pytest.approx(1, rel=1e-2)


@given(st.floats(-500, 500))
def test_mean_density_even(r):
    assert mean_density(r) == pytest.approx(mean_density(-r), rel=1e-14, abs=1e-14)


def test_mean_density_derivative():
    r = np.linspace(-20, 40, 61)
    h = 1e-5
    fd = (mean_density(r + h) - mean_density(r - h)) / (2 * h)
    np.testing.assert_allclose(mean_density_derivative(r), fd, atol=1e-8)


def test_mean_term_leading_order():
    dev = {}
    for tau in (1e3, 1e4):
        m = mean_term(tau, 2.5, TRI)
        dev[tau] = abs(m * 6 * 2.5 / tau - 1)
        assert dev[tau] <= 5 * math.log(tau) / tau
    assert mean_term(1e4, 2.5, TRI) == pytest.approx(666.7, rel=5e-3)


def test_mean_term_scaling_in_L():
    a = mean_term(1e4, 2.0, TRI) * 2.0
    b = mean_term(1e4, 3.0, TRI) * 3.0
    assert a == pytest.approx(b, rel=0.02)


def test_mean_term_at_zero():
    L = 1.5
    val, _ = integrate.quad(lambda r: BUMP.f(L * r) * mean_density(r), -50 / L, 50 / L, limit=400)
    assert mean_term(0.0, L, BUMP) == pytest.approx(val / math.pi, rel=1e-7)


def test_mean_term_matches_r_space_quadrature():
    tau, L = 200.0, 1.5
    h = lambda r: (BUMP.f(L * (r - tau)) + BUMP.f(L * (-r - tau))) * mean_density(r)
    val = sum(integrate.quad(h, c - 50 / L, c + 50 / L, limit=400)[0] for c in (tau, -tau))
    assert mean_term(tau, L, BUMP) == pytest.approx(val / (2 * math.pi), rel=1e-7)


def test_mean_term_rejects_bad_input():
    with pytest.raises(ValueError):
        mean_term(-1.0, 1.0, TRI)
    with pytest.raises(ValueError):
        mean_term(1.0, 0.0, TRI)


def test_residual_constant_part():
    parts = residual_parts(1e3, 1.0, TRI)
    assert parts["constant"] == pytest.approx(math.log(math.pi / 2) / math.pi, rel=1e-15)
    # the rounded reference 0.143735 is off in the sixth digit; log(pi/2)/pi = 0.1437432
    assert parts["constant"] == pytest.approx(0.143735, abs=1e-5)


def test_residual_contains_prime_powers():
    L = 1.0
    freq, coef = _mangoldt_coefficients(L, TRI)
    i = int(np.flatnonzero(np.isclose(freq, 2 * math.log(4)))[0])
    expected = 2 / (math.pi * L) * math.log(2) / 4 * (1 - math.log(4) / (math.pi * L))
    assert coef[i] == pytest.approx(expected, rel=1e-14)
    assert not np.any(np.isclose(freq, 2 * math.log(6)))
    # only n <= e^{pi L} survive the support of f_hat
    assert np.exp(freq.max() / 2) <= math.exp(math.pi * L)


def test_residual_sum_of_parts():
    taus = np.array([10.0, 123.4, 5e3])
    parts = residual_parts(taus, 2.0, TRI)
    total = parts["constant"] + parts["mangoldt"] + parts["elliptic"]
    np.testing.assert_allclose(residual_term(taus, 2.0, TRI), total, rtol=0, atol=0)


def test_elliptic_negligible_for_smooth_f():
    assert abs(elliptic_term(1e3, 2.5, BUMP)) < 1e-10
    assert abs(elliptic_term(1e3, 1.0, BUMP)) < 1e-10


def test_elliptic_decay_for_triangle():
    # f = sinc^2 only decays like x^-2, so the elliptic part decays like tau^-2
    vals = [abs(elliptic_term(t, 2.5, TRI)) for t in (1e2, 1e3)]
    assert vals[1] < vals[0] / 50
    assert vals[1] < 1e-7


def test_elliptic_matches_r_space_quadrature():
    tau, L = 3.0, 1.0
    c2 = 1 / (2 * math.sin(math.pi / 2))
    c3 = 1 / (3 * math.sin(math.pi / 3))

    def kernel(r):
        k = c2 * math.exp(-math.pi * r) / (1 + math.exp(-2 * math.pi * r))
        for kk in (1, 2):
            k += 2 * c3 * math.exp(-2 * math.pi * kk * r / 3) / (1 + math.exp(-2 * math.pi * r))
        return k

    h = lambda r: BUMP.f(L * (r - tau)) + BUMP.f(L * (-r - tau))
    val, _ = integrate.quad(lambda r: h(r) * kernel(r), -30, 30, limit=400, points=[-tau, tau])
    assert elliptic_term(tau, L, BUMP) == pytest.approx(val, rel=1e-7)


def test_mean_plus_residual_smooth():
    tau, L, h = 1e3, 2.0, 1e-3
    F = lambda t: mean_term(t, L, TRI) + residual_term(t, L, TRI)
    fd = (F(tau + h) - F(tau - h)) / (2 * h)
    exact = mean_term_derivative(tau, L, TRI) + residual_term_derivative(tau, L, TRI)
    assert fd == pytest.approx(exact, rel=1e-4)


def test_weyl():
    assert WEYL_C1 == pytest.approx((2 + math.log(math.pi / 2)) / math.pi, rel=1e-15)
    assert WEYL_C1 == pytest.approx(0.780361, abs=5e-6)
    T = 1e6
    assert (weyl_count(T) - weyl_count(T / 2)) / (T * T - T * T / 4) == pytest.approx(1 / 12, rel=1e-3)
    assert weyl_count(100.0) == pytest.approx(100**2 / 12 - 200 / math.pi * math.log(100) + WEYL_C1 * 100, rel=1e-14)
    assert weyl_count(100.0) == pytest.approx(618.2, abs=0.05)
    with pytest.raises(ValueError):
        weyl_count(1.0)


def test_spectral_side_examples():
    L, tau = 2.0, 50.0
    far = EigenvalueList(np.array([1.0, 2.0, 3.0]))
    assert abs(spectral_side(tau, L, BUMP, far)) < 1e-12
    single = EigenvalueList(np.array([tau]))
    assert spectral_side(tau, L, TRI, single) == pytest.approx(1.0 + TRI.f(2 * L * tau))


def test_eigenvalue_file(tmp_path):
    clean = tmp_path / "a.txt"
    clean.write_text("9.53369526\n12.17300832\n13.77975135\n")
    noisy = tmp_path / "b.txt"
    noisy.write_text("# first few\n\n9.53369526   # even\n12.17300832\n\n  13.77975135\n")
    np.testing.assert_array_equal(read_eigenvalues(clean).r_values, read_eigenvalues(noisy).r_values)
    bad = tmp_path / "c.txt"
    bad.write_text("1.0\n\n0.5\n")
    with pytest.raises(ValueError, match=":3:"):
        read_eigenvalues(bad)
    junk = tmp_path / "d.txt"
    junk.write_text("1.0\nabc\n")
    with pytest.raises(ValueError, match=":2:"):
        read_eigenvalues(junk)
    with pytest.raises(ValueError):
        EigenvalueList(np.array([]))
