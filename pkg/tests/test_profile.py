import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from apme.diagnostics import ssni_check
from apme.exponents import derive_exponents
from apme.grid import Field, Grid, lp_norm, sample, total_mass
from apme.profile import (
    InfeasibleDataError,
    ProfileConvergenceError,
    ProfileDomainError,
    ProfileOptions,
    barenblatt,
    compute_profile,
    load_profile,
    make_admissible,
    plateau_radius,
    rescale_mass,
    save_profile,
    ssni_bump,
    stationary_residual,
)
from apme.rescale import evolve_rescaled
from apme.solver import SolverConfig


def quadrature_mass(m, N, C):
    """Radial integral of (C - k r^2)_+^{1/(m-1)} over R^N."""
    alpha = N / (N * (m - 1) + 2)
    k = alpha * (m - 1) / (2 * m * N)
    r0 = math.sqrt(C / k)
    area = 2 * math.pi ** (N / 2) / gamma(N / 2)
    val, _ = integrate.quad(lambda r: (C - k * r * r) ** (1 / (m - 1)) * area * r ** (N - 1), 0, r0)
    return val


def test_barenblatt_constant_m2_n2():
    F, r0, C = barenblatt(2.0, 2, 1.0)
    assert C == pytest.approx(math.sqrt(1 / (8 * math.pi)), rel=1e-14)
    assert C == pytest.approx(0.19947, abs=1e-5)
    assert r0 == pytest.approx(4 * math.sqrt(C), rel=1e-14)
    assert quadrature_mass(2.0, 2, C) == pytest.approx(1.0, rel=1e-10)


@given(st.floats(1.1, 4.0), st.integers(1, 3), st.floats(0.1, 10.0))
def test_barenblatt_mass_matches_quadrature(m, N, M):
    F, r0, C = barenblatt(m, N, M)
    assert quadrature_mass(m, N, C) == pytest.approx(M, rel=1e-7)
    assert F(*([0.0] * N)) == pytest.approx(C ** (1 / (m - 1)), rel=1e-12)
    e = np.zeros(N)
    e[0] = r0
    assert F(*(e * 1.0001)) == 0.0
    assert F(*(e * 0.999)) > 0.0


def test_barenblatt_rejects_fast_diffusion():
    with pytest.raises(ValueError):
        barenblatt(1.0, 2)


def test_make_admissible_examples():
    assert plateau_radius(1.0, 1.0, 2) == pytest.approx(0.5)
    g = Grid(1.0, 16, N=2)
    f = make_admissible(1.0, 1.0, 1.0, g)
    assert total_mass(f) == pytest.approx(1.0, rel=1e-12)
    assert f.values.max() <= 1.0 and f.values.min() >= 0.0
    assert ssni_check(f).symmetry == 0.0 and ssni_check(f).monotonicity == 0.0
    with pytest.raises(InfeasibleDataError):
        make_admissible(5.0, 1.0, 1.0, g)


@given(st.floats(0.05, 3.0), st.floats(0.3, 2.0))
def test_make_admissible_plateaus(M, L):
    g = Grid(2.0, 20, N=2)
    R = 1.5
    if M > 4 * L * R**2:
        with pytest.raises(InfeasibleDataError):
            make_admissible(M, L, R, g)
        return
    f = make_admissible(M, L, R, g)
    assert total_mass(f) == pytest.approx(M, rel=1e-3)
    assert f.values.max() <= L * (1 + 1e-12)
    R1 = plateau_radius(M, L, 2)
    x = g.centers(0)
    outside = np.abs(x) - g.spacing[0] / 2 >= R1
    assert not f.values[outside, :].any()


def test_isotropic_profile_matches_closed_form(iso_profile_128):
    P = iso_profile_128
    F, r0, C = barenblatt(2.0, 2, 1.0)
    exact = sample(F, P.grid)
    # first-order scheme: about 2.7% at 128 cells, half of that at 256
    assert lp_norm(P.F.values - exact.values, 1, P.grid) < 0.03
    assert P.mass == pytest.approx(1.0, rel=1e-3)
    assert P.residual < P.tol
    assert P.stationary < 10 * P.truncation


def test_profile_is_ssni(iso_profile_128):
    P = iso_profile_128
    rep = ssni_check(P.F, truncation=P.truncation)
    assert rep.symmetry <= 1e-9 * P.peak
    assert rep.passed


def test_profile_is_fixed_point_of_rescaled_flow(iso_profile_128):
    P = iso_profile_128
    v = evolve_rescaled(P.F, P.exponents, SolverConfig(m=P.exponents.m), P.F.time + 3.0, symmetric=True)
    assert lp_norm(v.values - P.F.values, 1, P.grid) <= 3 * P.tol


def test_anisotropic_profile_elongates_along_first_axis(aniso_profile_96):
    P = aniso_profile_96
    c = P.half_widths()
    assert c[0] > c[1]
    assert P.mass == pytest.approx(1.0, rel=1e-3)
    assert np.all(c < np.asarray(P.grid.half_width))


def test_profile_independent_of_initial_data():
    opts = dict(cells=64, half_width=3.0)
    a = compute_profile((2, 2), 1.0, ProfileOptions(initial="plateau", **opts))
    b = compute_profile((2, 2), 1.0, ProfileOptions(initial="bump", **opts))
    assert lp_norm(a.F.values - b.F.values, 1, a.grid) <= 2 * a.tol


def test_nonconvergence_carries_history():
    with pytest.raises(ProfileConvergenceError) as exc:
        compute_profile((2, 2), 1.0, ProfileOptions(cells=32, half_width=3.0, tau_max=3.0))
    hist = exc.value.history
    assert len(hist) == 3 and [t for t, _ in hist] == [1.0, 2.0, 3.0]


def test_hypothesis_violation_propagates():
    with pytest.raises(ValueError, match="H1"):
        compute_profile((0.5, 2.0), 1.0)


def test_rescale_mass(iso_profile_128):
    P = iso_profile_128
    assert rescale_mass(P, 1.0) is P
    big = rescale_mass(P, 2.0, grid=Grid(4.5, 192, N=2))
    assert big.mass == pytest.approx(4.0 * P.mass, rel=1e-2)
    assert big.half_widths() == pytest.approx(P.half_widths() * math.sqrt(2), abs=2 * big.grid.spacing[0])
    up = rescale_mass(P, 1.3)
    assert np.all(up.F.values >= P.F.values - 1e-9)
    with pytest.raises(ProfileDomainError):
        rescale_mass(P, 10.0)


def test_stationary_residual_examples():
    F, _, _ = barenblatt(2.0, 2, 1.0)
    e = derive_exponents([2, 2])
    res = [stationary_residual(sample(F, Grid(2.5, n, N=2)), e) for n in (64, 128, 256)]
    assert res[0] / res[1] == pytest.approx(2.0, rel=0.25)
    assert res[1] / res[2] == pytest.approx(2.0, rel=0.25)
    g = Grid(2.5, 64, N=2)
    assert stationary_residual(Field(g, np.zeros(g.shape)), e) == 0.0
    base = sample(F, g)
    bump = ssni_bump(0.2, g, 0.4)
    shifted = Field(g, base.values + np.roll(bump.values, 6, axis=0))
    assert stationary_residual(shifted, e) >= 10 * res[0]


def test_save_and_load(tmp_path, iso_profile_128):
    P = iso_profile_128
    csv, js = save_profile(P, tmp_path)
    meta = json.loads(js.read_text())
    assert set(meta) >= {"N", "m", "M", "residual", "tol", "grid", "runtime_seconds"}
    Q = load_profile(tmp_path)
    assert np.array_equal(Q.F.values, P.F.values)
    assert Q.grid == P.grid and Q.residual == P.residual
