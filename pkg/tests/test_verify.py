import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diligent.core import ParameterError
from diligent.verify import (
    LEMMAS,
    CharacterTable,
    ExactSizeError,
    all_digits,
    check_characters,
    check_expectation_bound,
    check_gamma_bound,
    check_geinq,
    check_h_norm,
    check_parseval,
    check_sum_bound,
    check_t_bound,
    cycle_stats,
    derangement_cycle_types,
    estimate_variance,
    g_values,
    gamma_cycle_formula,
    gamma_enumerated,
    h_inner_product,
    orthonormality_epsilon,
    sum_bound_lhs,
    verify_all,
)
from diligent.problems import mult_g, permute_digits


def test_character_table():
    assert all(r.passed for r in check_characters())
    assert CharacterTable().k == 10


def test_g_values_match_scalar_definition():
    X = all_digits(4)
    rng = np.random.default_rng(0)
    for pi in itertools.permutations(range(2)):
        G = g_values(pi, X)
        for i in rng.integers(0, len(X), size=50):
            assert G[i] == mult_g(permute_digits(pi, X[i]))


@settings(max_examples=40, deadline=None)
@given(st.permutations(range(3)), st.permutations(range(3)), st.sampled_from([1, 3, 7, 9]))
def test_gamma_formula_agrees_with_enumeration(pi, sigma, omega):
    pi, sigma = tuple(pi), tuple(sigma)
    if pi == sigma:
        return
    exact = gamma_enumerated(pi, sigma, 3, omega)
    assert abs(exact) == pytest.approx(gamma_cycle_formula(pi, sigma, omega), abs=1e-12)
    assert check_gamma_bound(pi, sigma, 3, omega).passes


def test_gamma_bound_fails_for_the_order_two_character():
    # chi_5 is real (+-1), so the cross terms no longer cancel
    r = check_gamma_bound((1, 0), (0, 1), 2, 5)
    assert r.exact == pytest.approx(0.5)
    assert r.bound == pytest.approx(0.25)
    assert not r.passes


def test_h_norm_and_inner_product():
    X = all_digits(4)
    for pi in itertools.permutations(range(2)):
        assert check_h_norm(pi, 2, X) <= 1e-12
    ip = h_inner_product((1, 0), (0, 1), 2, X)
    assert 0 < ip < 1


def test_cycle_stats():
    t, c = cycle_stats((1, 0, 2), (0, 1, 2))
    assert t == 2 and c == 1
    assert cycle_stats((1, 2, 0), (0, 1, 2)) == (3, 1)


@pytest.mark.parametrize("omega", [1, 3, 7, 9])
def test_expectation_bound_for_coprime_characters(omega):
    for m in range(2, 7):
        for s in derangement_cycle_types(m):
            assert check_expectation_bound(s, omega=omega).passes


def test_expectation_bound_limits():
    with pytest.raises(ParameterError):
        check_expectation_bound((0, 1))
    with pytest.raises(ExactSizeError):
        check_expectation_bound(tuple(range(1, 10)) + (0,))
    spot = check_expectation_bound((1, 0), omega=1, samples=20000, rng=np.random.default_rng(0))
    assert abs(spot.sampled - spot.value) < 5 * spot.sampled_se + 1e-3


def test_derangement_cycle_types():
    # one representative per partition of m into parts >= 2
    assert len(derangement_cycle_types(4)) == 2
    assert len(derangement_cycle_types(6)) == 4
    for s in derangement_cycle_types(6):
        assert all(v != i for i, v in enumerate(s))


def test_t_sum_and_geometric_bounds():
    assert all(r.passed for r in check_t_bound(5))
    recs = check_sum_bound(range(3, 12))
    assert all(r.passed for r in recs)
    assert float(sum_bound_lhs(3)) == pytest.approx(recs[0].measured)
    assert check_geinq(30).passed


def test_parseval_exact_and_noisy():
    r = check_parseval(10, 20, 5, 0.0, 60)
    assert r.violations == 0 and r.epsilon < 1e-12
    noisy = check_parseval(10, 20, 5, 0.05, 60, np.random.default_rng(1))
    assert noisy.violations == 0 and noisy.epsilon > 0
    with pytest.raises(ParameterError):
        check_parseval(200, 10, 5, 0.0, 10)


def test_orthonormality_epsilon_decays():
    vals = [orthonormality_epsilon(m) for m in range(2, 7)]
    # decreasing from m = 3 on; m = 2 has too few permutations to average
    assert all(b < a for a, b in zip(vals[1:], vals[2:]))
    assert all(v <= np.e**2 * 2.0**-m for v, m in zip(vals, range(2, 7)))


def test_variance_small_m():
    r = estimate_variance(2, 50, 6, rng=np.random.default_rng(0))
    assert r.exact_inner and r.passes
    with pytest.raises(ParameterError):
        estimate_variance(6)


def test_verify_records_are_json():
    recs = verify_all("geometric-inequality")
    line = json.dumps(recs[0].to_json())
    assert json.loads(line)["pass"] is True
    with pytest.raises(ParameterError):
        verify_all("nonexistent")
    assert "variance" in LEMMAS
