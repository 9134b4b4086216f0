import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from apme import _kernels
from apme.exponents import derive_exponents
from apme.grid import Field, Grid
from apme.rescale import OrthantFlow, drift_coefficients, rescaled_stable_dt, step_rescaled
from apme.solver import SolverConfig, stable_dt, step
from reference import reference_update


@st.composite
def cases(draw):
    N = draw(st.integers(1, 3))
    cells = draw(st.lists(st.sampled_from([8, 10, 12]), min_size=N, max_size=N))
    L = draw(st.lists(st.floats(0.5, 3.0), min_size=N, max_size=N))
    m = draw(st.lists(st.sampled_from([1.5, 2.0, 2.5, 3.0, 4.0]), min_size=N, max_size=N))
    eps = draw(st.sampled_from([0.0, 1e-3, 0.05]))
    seed = draw(st.integers(0, 2**31))
    return Grid(L, cells), tuple(m), eps, seed


@given(cases())
def test_diffusion_kernel_matches_reference(case):
    g, m, eps, seed = case
    rng = np.random.default_rng(seed)
    u = rng.random(g.shape) * (rng.random(g.shape) > 0.3)
    cfg = SolverConfig(m=m, epsilon=eps)
    dt = stable_dt(Field(g, u), cfg)
    got, _ = step(Field(g, u), cfg, dt)
    want = np.maximum(reference_update(u, m, g.spacing, dt, eps=eps, ghost=cfg.ghost), 0.0)
    assert np.allclose(got.values, want, rtol=1e-12, atol=1e-14)


@given(cases())
def test_drift_kernel_matches_reference(case):
    g, m, _, seed = case
    try:
        e = derive_exponents(m)
    except ValueError:
        return
    rng = np.random.default_rng(seed)
    u = rng.random(g.shape)
    cfg = SolverConfig(m=m)
    dt = rescaled_stable_dt(u, g, e, cfg)
    got = step_rescaled(Field(g, u), e, cfg, dt).values
    faces = [g.faces(i) for i in range(g.N)]
    want = np.maximum(reference_update(u, m, g.spacing, dt, drift=drift_coefficients(e), faces=faces), 0.0)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-14)


def test_serial_and_parallel_kernels_agree_bitwise():
    g = Grid([1.0, 2.0], [16, 24])
    e = derive_exponents([2.0, 3.0])
    st_ = _kernels.Stencil(g.shape, g.spacing, e.m, drift=drift_coefficients(e), faces=[g.faces(i) for i in range(2)])
    rng = np.random.default_rng(0)
    u = rng.random(g.shape)
    st_.load(u)
    outs = []
    for fn in (_kernels._advance_serial, _kernels._advance_parallel):
        fn(st_.vp, st_.out, st_.w, 1e-4, st_.ih2, st_.m, st_.mint, 0.0, st_.epsm, st_.act, st_.drift, *st_.up)
        outs.append(st_.out.copy())
    assert np.array_equal(outs[0], outs[1])


@pytest.mark.parametrize("m", [(2.0, 2.0), (2.0, 3.0), (1.5, 2.5, 2.0)])
def test_orthant_flow_matches_full_grid(m):
    e = derive_exponents(m)
    N = len(m)
    g = Grid([1.5] * N, [16] * N)
    y = g.mesh()
    v = np.ones(g.shape)
    for yi in y:
        v = v * np.maximum(1 - yi**2, 0.0)
    cfg = SolverConfig(m=m)
    flow = OrthantFlow(g, e, cfg)
    q = flow.og.fold(v)
    full = v.copy()
    for _ in range(50):
        d = min(flow.stable_dt(q), rescaled_stable_dt(full, g, e, cfg))
        q = flow.step(q, d)
        full = step_rescaled(Field(g, full), e, cfg, d).values
    assert np.allclose(flow.og.unfold(q), full, rtol=1e-12, atol=1e-15)
    assert flow.mass(q) == pytest.approx(full.sum() * g.cell_volume, rel=1e-12)


def test_orthant_fold_unfold_round_trip():
    g = Grid([1.0, 1.0], [8, 12])
    from apme.rescale import OrthantGrid

    og = OrthantGrid(g)
    rng = np.random.default_rng(2)
    q = rng.random(og.shape)
    assert np.array_equal(og.fold(og.unfold(q)), q)
    assert og.unfold(q).shape == g.shape


def test_thread_cap_from_environment(monkeypatch):
    monkeypatch.setenv("APME_THREADS", "1")
    assert _kernels.thread_count() == 1
