import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geodesic_clt.quadratic import (
    NotADiscriminant,
    PrecisionError,
    QuadraticForm,
    class_data,
    dirichlet_L1,
    dirichlet_L1_with_bound,
    fundamental_part,
    is_discriminant,
    kronecker_chi,
    kronecker_table,
    nu_count,
    pell_fundamental,
    principal_form,
    reduced_forms,
)

discriminants = st.integers(5, 5000).filter(is_discriminant)


def pell_brute(d):
    u = 1
    while True:
        t2 = d * u * u + 4
        t = math.isqrt(t2)
        if t * t == t2:
            return t, u
        u += 1


def reduced_brute(d):
    """Every (a, b, c) with b^2 - 4ac = d satisfying the reduction inequalities."""
    s = math.sqrt(d)
    out = set()
    for b in range(1, math.isqrt(d) + 1):
        if (b * b - d) % 4:
            continue
        prod = (b * b - d) // 4  # = a c < 0
        for a in range(1, -prod + 1):
            if prod % a:
                continue
            for sa in (a, -a):
                c = prod // sa
                if s - b < 2 * a < s + b and b < s and math.gcd(math.gcd(a, b), abs(c)) == 1:
                    out.add(QuadraticForm(sa, b, c))
    return sorted(out)


def nu_brute(X):
    count = 0
    for x in range(3, math.ceil(X)):
        D = x * x - 4
        for y in range(1, math.isqrt(D) + 1):
            if D % (y * y) == 0 and (D // (y * y)) % 4 in (0, 1):
                count += 1
    return count


@pytest.mark.parametrize("d, expected", [(5, True), (7, False), (16, False), (8, True), (1, False), (12, True)])
def test_is_discriminant(d, expected):
    assert is_discriminant(d) is expected


@pytest.mark.parametrize(
    "d, t, u, log_eps",
    [(5, 3, 1, 0.962424), (8, 6, 2, 1.762747), (13, 11, 3, 2.389526), (40, 38, 6, 3.636893)],
)
def test_pell_examples(d, t, u, log_eps):
    sol = pell_fundamental(d)
    assert (sol.t, sol.u) == (t, u)
    assert sol.check()
    assert sol.log_eps == pytest.approx(log_eps, abs=1e-6)


def test_pell_rejects_non_discriminant():
    with pytest.raises(NotADiscriminant):
        pell_fundamental(7)
    with pytest.raises(NotADiscriminant):
        class_data(16)


@given(discriminants)
def test_pell_matches_brute_force(d):
    sol = pell_fundamental(d)
    assert sol.t * sol.t - d * sol.u * sol.u == 4
    if sol.u < 10**5:
        assert (sol.t, sol.u) == pell_brute(d)
    direct = math.log((sol.t + sol.u * math.sqrt(d)) / 2)
    assert sol.log_eps == pytest.approx(direct, rel=1e-12)


def test_pell_identity_sampled_to_1e6():
    rng = np.random.default_rng(1)
    ds = [int(d) for d in rng.integers(5, 10**6, 400) if is_discriminant(int(d))]
    ds += [999_997 - k for k in range(40) if is_discriminant(999_997 - k)]
    for d in ds:
        sol = pell_fundamental(d)
        assert sol.t * sol.t - d * sol.u * sol.u == 4
        # huge units: log_eps still finite and accurate through the cycle sum
        assert sol.log_eps == pytest.approx(
            math.log(sol.t) if sol.t.bit_length() > 900 else math.log((sol.t + sol.u * math.sqrt(d)) / 2),
            rel=1e-9,
        )


def test_regulator_of_huge_unit_does_not_overflow():
    d = 999_949 * 4  # large regulator
    sol = pell_fundamental(d)
    assert sol.check()
    assert math.isfinite(sol.log_eps) and sol.log_eps > 10


@pytest.mark.parametrize("d, n, expected", [(5, 2, -1), (12, 2, 0), (8, 3, -1), (13, 2, -1), (17, 2, 1), (5, 5, 0)])
def test_kronecker_examples(d, n, expected):
    assert kronecker_chi(d, n) == expected


@given(discriminants, st.integers(1, 10**4), st.integers(1, 10**4))
def test_kronecker_completely_multiplicative(d, m, n):
    assert kronecker_chi(d, m * n) == kronecker_chi(d, m) * kronecker_chi(d, n)


@given(discriminants, st.integers(1, 10**4))
def test_kronecker_zero_iff_common_factor(d, n):
    assert (kronecker_chi(d, n) == 0) == (math.gcd(d, n) > 1)


@given(discriminants)
def test_kronecker_odd_d_at_two(d):
    if d % 2:
        assert kronecker_chi(d, 2) == (1 if d % 8 == 1 else -1)


@given(discriminants)
def test_kronecker_table_matches_scalar(d):
    n = np.arange(1, 200)
    assert kronecker_table(d, n).tolist() == [kronecker_chi(d, int(k)) for k in n]


@pytest.mark.parametrize("d, value", [(5, 0.430409), (8, 0.623225), (12, 0.760346), (13, 0.662735)])
def test_dirichlet_L1_examples(d, value):
    assert dirichlet_L1(d) == pytest.approx(value, abs=2e-6)


def test_dirichlet_L1_closed_forms():
    assert dirichlet_L1(5) == pytest.approx(2 * math.log((1 + math.sqrt(5)) / 2) / math.sqrt(5), rel=1e-8)
    assert dirichlet_L1(12) == pytest.approx(math.log(2 + math.sqrt(3)) / math.sqrt(3), rel=1e-8)


def test_dirichlet_L1_bound_is_honest():
    exact = 2 * math.log((1 + math.sqrt(5)) / 2) / math.sqrt(5)
    for N in (10, 100, 1000):
        value, bound = dirichlet_L1_with_bound(5, N)
        assert abs(value - exact) <= bound


def test_dirichlet_L1_signals_unreachable_precision():
    with pytest.raises(PrecisionError):
        dirichlet_L1(1001, truncation=1001, rtol=1e-9)


@pytest.mark.parametrize("d, h", [(5, 1), (8, 1), (12, 2), (13, 1), (21, 2), (32, 2), (40, 2), (60, 4)])
def test_class_numbers(d, h):
    assert class_data(d).h == h


def test_class_data_examples():
    assert class_data(5).log_eps == pytest.approx(0.962424, abs=1e-6)
    assert class_data(32).log_eps == pytest.approx(1.762747, abs=1e-6)
    assert class_data(40).log_eps == pytest.approx(3.636893, abs=1e-6)


@settings(max_examples=30)
@given(st.integers(5, 1500).filter(is_discriminant))
def test_reduced_forms_match_brute_force(d):
    assert reduced_forms(d) == reduced_brute(d)


@given(discriminants)
def test_reduced_forms_invariants(d):
    for f in reduced_forms(d):
        assert f.discriminant == d and f.is_primitive and f.is_reduced()
        g, _ = f.rho()
        assert g.discriminant == d and g.is_reduced()
    assert principal_form(d).discriminant == d


@given(discriminants)
def test_class_number_formula(d):
    assert class_data(d).class_formula_residual < 1e-6


def test_every_cycle_has_the_same_regulator():
    # class_data raises if a cycle's log sum differs from the principal one
    for d in (60, 145, 221, 316, 1001):
        assert class_data(d).h >= 1


@pytest.mark.parametrize("d, d0, f", [(5, 5, 1), (32, 8, 2), (45, 5, 3), (12, 12, 1), (60, 60, 1), (96, 24, 2)])
def test_fundamental_part(d, d0, f):
    assert fundamental_part(d) == (d0, f)


@pytest.mark.parametrize("X, count", [(3, 0), (4, 1), (10, 9)])
def test_nu_count_examples(X, count):
    assert nu_count(X) == count


@given(st.integers(3, 300))
def test_nu_count_matches_brute_force(X):
    assert nu_count(X) == nu_brute(X)


def test_nu_count_trend():
    ratios = [nu_count(X) / X for X in (10**3, 10**4, 10**5)]
    target = 35 / 16
    gaps = [abs(r - target) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
