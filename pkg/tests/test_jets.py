"""Jet arithmetic: exactness on polynomials, elementary functions, and
agreement with the finite-difference oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslergeo import jets
from finslergeo.jets import DomainError, Jet, extract_partial, jet_space, seed
from finslergeo.oracle import fd_partial


def test_square_at_three():
    (j,) = seed([3.0], {0}, 2)
    sq = j * j
    assert sq.value == 9.0
    assert extract_partial(sq, [0]) == 6.0
    assert extract_partial(sq, [0, 0]) == 2.0
    # stored Taylor coefficient of the quadratic monomial is 1
    assert sq.coeffs[sq.space.index[(2,)]] == 1.0


def test_bilinear_mixed_coefficient():
    a, b = seed([1.0, 2.0], {0, 1}, 2)
    f = a * b
    assert f.coeffs[f.space.index[(1, 1)]] == 1.0
    assert extract_partial(f, [0, 1]) == 1.0


def test_sin_series_at_zero():
    (x,) = seed([0.0], {0}, 4)
    np.testing.assert_allclose(x.sin().coeffs, [0, 1, 0, -1 / 6, 0], atol=1e-15)


def test_exp_fourth_derivative():
    (x,) = seed([0.0], {0}, 4)
    assert extract_partial(x.exp(), [0, 0, 0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_third_mixed_partial():
    a, b = seed([1.3, -0.7], {0, 1}, 4)
    assert extract_partial(a * b * b, [0, 1, 1]) == pytest.approx(2.0, abs=1e-13)


def test_polynomial_partials_exact():
    # f = 2 x^2 y z - x^4 + 3 y^2: all order <= 4 partials are exact
    x, y, z = seed([1.5, -2.0, 0.7], {0, 1, 2}, 4)
    f = 2 * x * x * y * z - x * x * x * x + 3 * y * y
    xv, yv, zv = 1.5, -2.0, 0.7
    assert f.value == pytest.approx(2 * xv**2 * yv * zv - xv**4 + 3 * yv**2, rel=1e-15)
    assert extract_partial(f, [0]) == pytest.approx(4 * xv * yv * zv - 4 * xv**3, rel=1e-15)
    assert extract_partial(f, [0, 0]) == pytest.approx(4 * yv * zv - 12 * xv**2, rel=1e-15)
    assert extract_partial(f, [0, 1, 2]) == pytest.approx(4 * xv, rel=1e-15)
    assert extract_partial(f, [0, 0, 0, 0]) == pytest.approx(-24.0, rel=1e-15)
    assert extract_partial(f, [0, 0, 1, 2]) == pytest.approx(4.0, rel=1e-15)


def test_inactive_variables_are_constant():
    jx, jy = seed([2.0, 5.0], {0}, 2)
    f = jx * jy
    assert f.value == 10.0
    assert extract_partial(f, [0]) == 5.0
    assert jy.space.nvars == 1


def test_seed_order_out_of_range():
    with pytest.raises(ValueError):
        seed([1.0], {0}, 5)
    with pytest.raises(ValueError):
        seed([1.0], {0}, 0)


def test_extract_degree_exceeds_order():
    (x,) = seed([1.0], {0}, 2)
    with pytest.raises(ValueError):
        extract_partial(x * x, [0, 0, 0])


def smooth(x, y):
    return (x * x * y).sin() if isinstance(x, Jet) else math.sin(x * x * y)


def generic(x, y):
    if isinstance(x, Jet):
        return (x * x * y).sin() + (1 + x * x + y * y).ln() * y
    return math.sin(x * x * y) + math.log(1 + x * x + y * y) * y


@pytest.mark.parametrize("point", [(0.4, 0.9), (-1.1, 0.3), (0.8, -0.6)])
def test_low_order_partials_match_fd(point):
    x, y = seed(list(point), {0, 1}, 2)
    f = generic(x, y)
    for multi in ([0], [1], [0, 0], [0, 1], [1, 1]):
        ref = fd_partial(lambda p: generic(p[0], p[1]), point, multi)
        assert extract_partial(f, multi) == pytest.approx(ref, rel=1e-5, abs=1e-8)


@pytest.mark.parametrize("multi", [[0, 0, 1], [0, 1, 1], [0, 0, 1, 1], [1, 1, 1, 1]])
def test_high_order_partials_match_fd_of_lower_order_jets(multi):
    point = (0.5, -0.8)
    x, y = seed(list(point), {0, 1}, 4)
    jet_val = extract_partial(generic(x, y), multi)

    # oracle: finite-difference the jet-computed lower-order partial
    head, tail = multi[0], multi[1:]

    def lower(p):
        a, b = seed(list(p), {0, 1}, len(tail))
        return extract_partial(generic(a, b), tail)

    ref = fd_partial(lower, point, [head], step=1e-5)
    assert jet_val == pytest.approx(ref, rel=1e-4, abs=1e-6)


# -- algebraic property tests --------------------------------------------------


def _random_jet(space, rng, order):
    return Jet(space, rng.uniform(-2, 2, space.ncoeff), order)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_product_rule_exact(seed_int):
    rng = np.random.default_rng(seed_int)
    space = jet_space(3, 4)
    a = _random_jet(space, rng, 4)
    b = _random_jet(space, rng, 4)
    for v in range(3):
        lhs = (a * b).diff(v)
        rhs = a.diff(v) * b + a * b.diff(v)
        np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_sum_rule_and_ring_axioms(seed_int):
    rng = np.random.default_rng(seed_int)
    space = jet_space(2, 4)
    a, b, c = (_random_jet(space, rng, 4) for _ in range(3))
    np.testing.assert_allclose((a + b).diff(0).coeffs, (a.diff(0) + b.diff(0)).coeffs, atol=1e-13)
    np.testing.assert_allclose((a * b).coeffs, (b * a).coeffs, atol=1e-13)
    np.testing.assert_allclose(
        (a * (b + c)).coeffs, (a * b + a * c).coeffs, atol=1e-12
    )


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_chain_rule_exact(seed_int):
    rng = np.random.default_rng(seed_int)
    space = jet_space(2, 4)
    g = _random_jet(space, rng, 4)
    g.coeffs[0] = rng.uniform(0.5, 2.0)  # keep ln/sqrt in domain
    for v in range(2):
        np.testing.assert_allclose(
            g.exp().diff(v).coeffs, (g.exp() * g.diff(v)).coeffs, atol=1e-11
        )
        np.testing.assert_allclose(
            g.ln().diff(v).coeffs, (g.diff(v) / g).coeffs, atol=1e-11
        )
        np.testing.assert_allclose(
            g.sin().diff(v).coeffs, (g.cos() * g.diff(v)).coeffs, atol=1e-11
        )


def test_division_matches_multiplication_by_reciprocal():
    rng = np.random.default_rng(7)
    space = jet_space(2, 3)
    a = _random_jet(space, rng, 3)
    b = _random_jet(space, rng, 3)
    b.coeffs[0] = 1.7
    q = a / b
    np.testing.assert_allclose((q * b).coeffs, a.coeffs, atol=1e-12)


def test_domain_errors():
    (x,) = seed([0.0], {0}, 2)
    with pytest.raises(DomainError):
        (x * 0.0 + 0.0)._reciprocal()
    with pytest.raises(DomainError):
        x.ln()
    with pytest.raises(DomainError):
        (x - 1.0).sqrt()
    with pytest.raises(DomainError):
        abs(x)
    with pytest.raises(DomainError) as err:
        jets.powx(x, -2.0)
    assert err.value.reason == "power-domain"
    with pytest.raises(DomainError):
        jets.powx(x - 1.0, 0.5)


def test_integer_pow_negative_base():
    (x,) = seed([-1.5], {0}, 3)
    p = jets.powx(x, 3.0)
    assert p.value == pytest.approx((-1.5) ** 3)
    assert extract_partial(p, [0]) == pytest.approx(3 * (-1.5) ** 2)
    q = jets.powx(x, -2.0)
    assert q.value == pytest.approx((-1.5) ** -2)


def test_float_helpers_match_math():
    assert jets.sin(0.3) == math.sin(0.3)
    assert jets.ln(2.0) == math.log(2.0)
    with pytest.raises(DomainError):
        jets.sqrt(-1.0)
    with pytest.raises(DomainError):
        jets.divide(1.0, 0.0)
