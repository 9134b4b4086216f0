import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from apme.exponents import (
    Exponents,
    HypothesisError,
    MediumParams,
    check_scaling_identity,
    derive_exponents,
    exponent_table,
)


def test_isotropic_two_dimensional():
    e = derive_exponents([2, 2])
    assert e.alpha == pytest.approx(0.5, abs=1e-15)
    assert e.sigma == pytest.approx((0.5, 0.5), abs=1e-15)
    assert e.a == pytest.approx((0.25, 0.25), abs=1e-15)
    assert e.nu == pytest.approx((0.5, 0.5), abs=1e-15)
    assert e.beta == pytest.approx(2.0, abs=1e-15)


def test_anisotropic_table_values():
    e = derive_exponents([2, 3])
    assert e.m_bar == pytest.approx(2.5)
    assert e.alpha == pytest.approx(0.4, abs=1e-15)
    assert e.sigma == pytest.approx((0.75, 0.25), abs=1e-15)
    assert e.a == pytest.approx((0.3, 0.1), abs=1e-15)
    assert e.nu == pytest.approx((0.5, 1.0), abs=1e-15)
    assert e.beta == pytest.approx(2.5, abs=1e-15)


def test_h2_violation_names_index_and_bound():
    with pytest.raises(HypothesisError) as exc:
        derive_exponents([1.1, 4.0])
    err = exc.value
    assert err.hypothesis == "H2" and err.index == 1
    assert err.bound == pytest.approx(3.55)
    assert "H2" in str(err) and "3.55" in str(err)


def test_h1_violation():
    with pytest.raises(HypothesisError) as exc:
        derive_exponents([0.9, 2.0])
    assert exc.value.hypothesis == "H1" and exc.value.index == 0
    assert "H1" in str(exc.value)


def test_h2_boundary_is_rejected():
    # m_2 = m_bar + 2/N exactly: m = (1.5, 3.5) has m_bar = 2.5, bound 3.5
    with pytest.raises(HypothesisError):
        derive_exponents([1.5, 3.5])


def test_scaling_identity_examples():
    assert check_scaling_identity(derive_exponents([2, 2]))
    assert check_scaling_identity(derive_exponents([2, 3]))
    e = derive_exponents([2, 3])
    bad = Exponents(e.N, e.m, e.m_bar, e.alpha, e.sigma, (0.3, 0.2), e.nu, e.beta, e.m_c)
    assert not check_scaling_identity(bad)


def test_isotropic_reduction():
    for N in (1, 2, 3):
        for m in (1.5, 2.0, 3.0):
            e = derive_exponents([m] * N)
            assert e.sigma == pytest.approx((1.0 / N,) * N)
            assert e.alpha == pytest.approx(N / (N * (m - 1) + 2))


@st.composite
def admissible(draw):
    N = draw(st.integers(1, 3))
    while True:
        m = draw(st.lists(st.floats(1.0 + 1e-6, 6.0), min_size=N, max_size=N))
        p = MediumParams(m)
        if not p.violations():
            return p


@given(admissible())
def test_invariants_hold_for_admissible_params(p):
    e = derive_exponents(p)
    assert math.fsum(e.sigma) == pytest.approx(1.0, abs=1e-12)
    assert all(s > 0 for s in e.sigma)
    assert math.fsum(e.a) == pytest.approx(e.alpha, abs=1e-12)
    assert 0 < e.alpha < e.N / 2
    assert all(v > 0 for v in e.nu)
    # the positive part in m_c only matters for N = 1, where the unclipped (N-2)/N is needed
    assert e.beta == pytest.approx(e.N / 2 * (e.m_bar - (e.N - 2) / e.N), abs=1e-12)
    if e.N >= 2:
        assert e.beta == pytest.approx(e.N / 2 * (e.m_bar - e.m_c), abs=1e-12)
    assert e.beta > 1
    assert check_scaling_identity(e)


def test_table_pass_and_fail_lines():
    t = exponent_table([2, 3])
    assert "alpha  = 0.4" in t and t.splitlines()[-1].startswith("verdict: PASS")
    t = exponent_table([2, 2])
    assert "sigma  = (0.5, 0.5)" in t
    t = exponent_table([2, 5])
    assert "verdict: FAIL" in t and "4.5" in t
