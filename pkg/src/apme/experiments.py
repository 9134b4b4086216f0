"""Reusable experiment drivers shared by the CLI, the scripts and the acceptance suite.

Each driver returns measured quantities; thresholds live with the caller.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import (
    EvolutionRecord,
    barrier_check,
    barrier_position,
    energy_check,
    log_checkpoints,
    record_evolution,
    smoothing_fit,
    ssni_check,
    support_growth_fit,
    track_asymptotics,
)
from .exponents import MediumParams
from .grid import Field, Grid, lp_norm, pad_field, plateau_fractions, sample, total_mass
from .profile import Profile, ProfileOptions, barenblatt, compute_profile
from .solver import SolverConfig, compare_evolutions, evolve, stable_dt, step


# -- initial data ---------------------------------------------------------------

def unit_mass(f: Field, M: float = 1.0) -> Field:
    return Field(f.grid, f.values * (M / total_mass(f)), f.time)


def plateau_data(g: Grid, M: float = 1.0, radius: float = 0.5, center=None) -> Field:
    return unit_mass(Field(g, plateau_fractions(g, radius, center)), M)


def two_bump_data(g: Grid, M: float = 1.0) -> Field:
    v = plateau_fractions(g, 0.3, (-0.6, 0.2)[: g.N]) + plateau_fractions(g, 0.3, (0.5, -0.4)[: g.N])
    return unit_mass(Field(g, v), M)


def barenblatt_data(m: float, g: Grid, M: float = 1.0, t: float = 1.0) -> Field:
    """Isotropic self-similar solution t^-alpha F(x t^(-alpha/N)) sampled at time t."""
    F, _, _ = barenblatt(m, g.N, M)
    alpha = g.N / (g.N * (m - 1.0) + 2.0)
    s = t ** (-alpha / g.N)
    f = sample(lambda *x: t ** (-alpha) * F(*[c * s for c in x]), g, 0.0)
    return f


# -- criterion drivers ------------------------------------------------------------

def barenblatt_profile_error(cells: int, half_width: float = 3.0, m: float = 2.0, N: int = 2, M: float = 1.0, **opts):
    """Relative L^1 distance between the computed profile and the closed form."""
    t0 = time.perf_counter()
    P = compute_profile([m] * N, M, ProfileOptions(cells=cells, half_width=half_width, **opts))
    F, r0, C = barenblatt(m, N, M)
    exact = sample(F, P.grid)
    err = lp_norm(P.F.values - exact.values, 1, P.grid) / M
    return {"l1_rel": err, "profile": P, "exact": exact, "C": C, "r0": r0, "seconds": time.perf_counter() - t0}


@dataclass
class RateRun:
    record: EvolutionRecord
    alpha_hat: object
    a_hat: list
    seconds: float


def rate_run(m, half_width, cells, t_window=(1.0, 100.0), per_decade: int = 10, M: float = 1.0) -> RateRun:
    """Evolve a mass-M plateau and fit the decay and per-axis growth rates on t_window."""
    g = Grid(half_width, cells, N=len(m))
    u0 = plateau_data(g, M)
    cps = np.concatenate([[0.0], log_checkpoints(t_window[0], t_window[1], per_decade)])
    t0 = time.perf_counter()
    rec = record_evolution(u0, SolverConfig(m=tuple(m)), cps)
    alpha_hat = smoothing_fit(rec, t_window)
    a_hat = [support_growth_fit(rec, i, t_window) for i in range(g.N)]
    return RateRun(rec, alpha_hat, a_hat, time.perf_counter() - t0)


def box_containment(P: Profile, times=(2.0, 4.0, 8.0)) -> dict:
    """Evolve U_M from F_M at t = 1 and compare the support extents with c_i t^{a_i}.

    Returns the per-time excess (extent - box) measured in cells; containment
    within one cell means every entry is <= 1.
    """
    e = P.exponents
    c = P.half_widths()
    g = P.grid
    tmax = max(times)
    need = [max(0, int(math.ceil(c[i] * tmax ** e.a[i] / g.spacing[i])) + 8 - g.cells[i] // 2) for i in range(g.N)]
    f = pad_field(P.F, need)
    f = Field(f.grid, f.values, 1.0)
    rec = record_evolution(f, SolverConfig(m=e.m), [1.0, *times])
    excess = {}
    for t, ext in zip(rec.times, rec.extents):
        if t == 1.0:
            continue
        box = c * t ** np.asarray(e.a)
        excess[t] = (ext - box) / np.asarray(f.grid.spacing)
    return {"c": c, "excess_cells": excess}


def asymptotics_run(P: Profile, u0: Field, taus, symmetric: bool, supports: bool = True, eps: float = 0.1):
    return track_asymptotics(u0, P, taus, supports=supports, eps=eps, symmetric=symmetric)


# -- randomized structural suite ---------------------------------------------------------

def random_exponents(rng: np.random.Generator, N: int) -> tuple[float, ...]:
    while True:
        m = tuple(float(x) for x in rng.uniform(1.2, 3.2, size=N))
        if not MediumParams(m).violations():
            return m


def random_bumps(rng: np.random.Generator, g: Grid, count: int, inner: float = 0.45, ssni: bool = False) -> np.ndarray:
    """Sum of smooth compact bumps (1 - |z|^2)_+^2 inside the central ``inner`` fraction of the box."""
    vals = np.zeros(g.shape)
    mesh = g.mesh()
    L = np.asarray(g.half_width)
    for _ in range(count):
        w = rng.uniform(0.15, 0.4, size=g.N) * L
        c = np.zeros(g.N) if ssni else rng.uniform(-1, 1, size=g.N) * (inner * L - w).clip(0)
        r2 = sum(((y - c[i]) / w[i]) ** 2 for i, y in enumerate(mesh))
        vals = vals + rng.uniform(0.2, 1.5) * np.maximum(1.0 - r2, 0.0) ** 2
    return vals


@dataclass
class CaseResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class SuiteResult:
    cases: dict[str, list[CaseResult]] = field(default_factory=dict)

    def passed(self, name: str) -> bool:
        return all(c.passed for c in self.cases[name])

    def failures(self, name: str) -> list[CaseResult]:
        return [c for c in self.cases[name] if not c.passed]


def _case_grid(rng: np.random.Generator, N: int) -> Grid:
    cells = int(rng.choice([16, 24, 32])) if N == 2 else int(rng.choice([32, 48, 64]))
    return Grid(float(rng.uniform(1.0, 3.0)), cells, N=N)


def _steps_time(u: Field, cfg: SolverConfig, steps: int) -> float:
    return steps * stable_dt(u, cfg)


def case_comparison(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    m = random_exponents(rng, N)
    cfg = SolverConfig(m=m)
    u = Field(g, random_bumps(rng, g, int(rng.integers(1, 4))))
    w = Field(g, u.values + random_bumps(rng, g, 1))
    t_end = _steps_time(w, cfg, 40)
    worst = 0.0
    while u.time < t_end * (1 - 1e-12):
        dt = min(stable_dt(u, cfg), stable_dt(w, cfg), t_end - u.time)
        u, _ = step(u, cfg, dt)
        w, _ = step(w, cfg, dt)
        worst = max(worst, float((u.values - w.values).max()))
    tol = 1e-12 * max(w.peak, 1.0)
    return CaseResult("comparison", worst <= tol, worst)


def case_contraction(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    cfg = SolverConfig(m=random_exponents(rng, N))
    a = Field(g, random_bumps(rng, g, int(rng.integers(1, 4))))
    b = Field(g, random_bumps(rng, g, int(rng.integers(1, 4))))
    t_end = _steps_time(a if a.peak > b.peak else b, cfg, 60)
    tr = compare_evolutions(a, b, cfg, t_end, checkpoints=np.linspace(0, t_end, 13))
    return CaseResult("contraction", not tr.violated, tr.max_increase)


def case_lp_decay(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    cfg = SolverConfig(m=random_exponents(rng, N))
    u = Field(g, random_bumps(rng, g, int(rng.integers(1, 4))))
    ps = (1, 2, 4, math.inf)
    hist = {p: [lp_norm(u, p)] for p in ps}
    t_end = _steps_time(u, cfg, 60)

    def cb(f):
        for p in ps:
            hist[p].append(lp_norm(f, p))

    evolve(u, cfg, t_end, checkpoints=np.linspace(0, t_end, 13)[1:], callback=cb, warn_flux=False)
    worst = max(max(np.diff(h) / h[0]) for h in hist.values())
    return CaseResult("lp_decay", worst <= 1e-12, worst)


def case_mass(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    cfg = SolverConfig(m=random_exponents(rng, N))
    # the box is doubled so the numerical tail stays clear of the boundary
    u = pad_field(Field(g, random_bumps(rng, g, int(rng.integers(1, 4)), inner=0.3)), [n // 2 for n in g.cells])
    M0 = total_mass(u)
    uT = evolve(u, cfg, _steps_time(u, cfg, 60), warn_flux=False)
    drift = abs(total_mass(uT) - M0) / M0
    return CaseResult("mass", drift <= 1e-10, drift)


def case_ssni(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    cfg = SolverConfig(m=random_exponents(rng, N))
    u = Field(g, random_bumps(rng, g, int(rng.integers(1, 4)), ssni=True))
    uT = evolve(u, cfg, _steps_time(u, cfg, 60), warn_flux=False)
    rep = ssni_check(uT)
    return CaseResult("ssni", rep.passed, max(rep.symmetry, rep.monotonicity) / max(rep.peak, 1e-300))


def case_energy(rng, slack: float = 0.05) -> CaseResult:
    N = int(rng.integers(1, 3))
    g = _case_grid(rng, N)
    cfg = SolverConfig(m=random_exponents(rng, N))
    u = Field(g, random_bumps(rng, g, int(rng.integers(1, 4)), inner=0.3))
    lhs, rhs, ok = energy_check(u, cfg, _steps_time(u, cfg, 60), slack=slack)
    ratio = float(np.max(lhs / rhs))
    return CaseResult("energy", ok, ratio)


def case_barrier(rng) -> CaseResult:
    N = int(rng.integers(1, 3))
    m = random_exponents(rng, N)
    R = float(rng.uniform(0.3, 1.0))
    Lh = float(rng.uniform(0.2, 1.5))
    A = float(rng.uniform(0.5, 2.0))
    axis = int(rng.integers(0, N))
    K = barrier_position(m[axis], Lh, R, A)
    t_end = float(rng.uniform(0.2, 1.0))
    half = 1.5 * (K + A * t_end)
    g = Grid(half, 48 if N == 2 else 128, N=N)
    # bounded by Lh and supported in Q(R)
    shape = np.ones(g.shape)
    for y in g.mesh():
        shape = shape * np.maximum(1.0 - (y / R) ** 2, 0.0) ** float(rng.uniform(0.5, 2.0))
    u0 = Field(g, Lh * float(rng.uniform(0.5, 1.0)) * shape)
    snaps = []
    evolve(u0, SolverConfig(m=m), t_end, checkpoints=np.linspace(0, t_end, 9), callback=lambda f: snaps.append(f.copy()), warn_flux=False)
    rep = barrier_check(snaps, axis, A, K)
    return CaseResult("barrier", rep.passed, min(rep.margins))


STRUCTURAL_CASES: dict[str, Callable] = {
    "comparison": case_comparison,
    "contraction": case_contraction,
    "lp_decay": case_lp_decay,
    "mass": case_mass,
    "ssni": case_ssni,
    "energy": case_energy,
    "barrier": case_barrier,
}


def structural_suite(seed: int = 0, cases: int = 100, names=None) -> SuiteResult:
    out = SuiteResult()
    for name in names or STRUCTURAL_CASES:
        rng = np.random.default_rng([seed, list(STRUCTURAL_CASES).index(name)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out.cases[name] = [STRUCTURAL_CASES[name](rng) for _ in range(cases)]
    return out
