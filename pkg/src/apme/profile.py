"""Self-similar fundamental profiles F_M.

The profile is computed as the long-time limit of the rescaled flow started
from admissible data (nonnegative, mass M, bounded by a height, supported in
a box, symmetric and nonincreasing in each |y_i|).  For isotropic exponents
the closed-form Barenblatt profile is available as an oracle.
"""
from __future__ import annotations

import json
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import gamma

from .exponents import Exponents, MediumParams, derive_exponents
from .grid import Field, Grid, plateau_fractions, read_field_csv, total_mass, write_field_csv
from .rescale import OrthantFlow, drift_coefficients, resample, support_extent
from .solver import SolverConfig
from .support import SupportSet, extract_support


class InfeasibleDataError(ValueError):
    pass


class ProfileConvergenceError(RuntimeError):
    def __init__(self, msg: str, history: list[tuple[float, float]]):
        super().__init__(msg)
        self.history = history


class ProfileDomainError(ValueError):
    pass


# -- isotropic oracle --------------------------------------------------------

def barenblatt_constant(m: float, N: int, M: float) -> float:
    """C such that (C - k|y|^2)_+^{1/(m-1)} has mass M, k = alpha (m-1) / (2 m N).

    With p = 1/(m-1) and r0 = sqrt(C/k) the mass is
    (|S^{N-1}| / 2) B(N/2, p+1) k^{-N/2} C^{p + N/2}.
    """
    alpha = N / (N * (m - 1.0) + 2.0)
    k = alpha * (m - 1.0) / (2.0 * m * N)
    p = 1.0 / (m - 1.0)
    sphere = 2.0 * math.pi ** (N / 2) / gamma(N / 2)
    unit = 0.5 * sphere * beta_fn(N / 2, p + 1.0) * k ** (-N / 2)
    return (M / unit) ** (1.0 / (p + N / 2))


def barenblatt(m: float, N: int, M: float = 1.0) -> tuple[Callable[..., np.ndarray], float, float]:
    """(profile function of the coordinates, support radius r0, constant C)."""
    if not m > 1:
        raise ValueError("Barenblatt profile needs m > 1")
    alpha = N / (N * (m - 1.0) + 2.0)
    k = alpha * (m - 1.0) / (2.0 * m * N)
    C = barenblatt_constant(m, N, M)
    r0 = math.sqrt(C / k)

    def F(*y):
        r2 = sum(np.asarray(c, dtype=float) ** 2 for c in y)
        return np.maximum(C - k * r2, 0.0) ** (1.0 / (m - 1.0))

    return F, r0, C


def barenblatt_solution(m: float, N: int, M: float = 1.0) -> Callable[..., np.ndarray]:
    """U_M(x, t) = t^-alpha F(x t^(-alpha/N)) as ``U(t, *x)``."""
    F, _, _ = barenblatt(m, N, M)
    alpha = N / (N * (m - 1.0) + 2.0)

    def U(t, *x):
        s = t ** (-alpha / N)
        return t ** (-alpha) * F(*[np.asarray(c) * s for c in x])

    return U


# -- admissible data -----------------------------------------------------------

@dataclass(frozen=True)
class AdmissibleData:
    M: float
    L: float
    R: float

    @property
    def N_feasible(self) -> Callable[[int], bool]:
        return lambda N: self.M <= 2**N * self.L * self.R**N


def plateau_radius(M: float, L: float, N: int) -> float:
    return (M / (2**N * L)) ** (1.0 / N)


def make_admissible(M: float, L: float, R: float, g: Grid) -> Field:
    """Plateau of height L on Q(R1), 2^N L R1^N = M, sampled by cell overlap."""
    N = g.N
    if M <= 0 or L <= 0 or R <= 0:
        raise InfeasibleDataError("M, L, R must be positive")
    if M > 2**N * L * R**N:
        raise InfeasibleDataError(f"M = {M} exceeds 2^N L R^N = {2**N * L * R**N}")
    R1 = plateau_radius(M, L, N)
    if any(R1 > Lg for Lg in g.half_width):
        raise InfeasibleDataError("plateau does not fit in the grid box")
    return Field(g, L * plateau_fractions(g, R1), 0.0)


def ssni_bump(M: float, g: Grid, width: Sequence[float] | float = 0.5) -> Field:
    """Compactly supported SSNI bump prod_i (1 - (y_i/w_i)^2)_+^2 scaled to mass M."""
    w = np.broadcast_to(np.asarray(width, dtype=float), (g.N,))
    vals = np.ones(g.shape)
    for i, y in enumerate(g.mesh()):
        vals = vals * np.maximum(1.0 - (y / w[i]) ** 2, 0.0) ** 2
    f = Field(g, vals, 0.0)
    return Field(g, vals * (M / total_mass(f)), 0.0)


# -- profile computation ---------------------------------------------------------

@dataclass
class ProfileOptions:
    cells: int | Sequence[int] = 128
    half_width: float | Sequence[float] | None = None  # None: box from a pilot run
    box_factor: float = 1.5
    pilot_cells: int = 48
    height: float | None = None  # plateau height; None: sized so the plateau spans ~1/3 of the box
    initial: str | Field = "plateau"  # "plateau", "bump" or an SSNI field on the final grid
    tol: float = 1e-6  # per unit tau, relative to M
    probe_window: float = 1.0
    tau_max: float = 40.0
    cfl: float = 0.4
    warm_start: bool = False  # start the fine run from the pilot profile


@dataclass
class Profile:
    exponents: Exponents
    grid: Grid
    F: Field
    mass: float
    residual: float  # ||v(tau + window) - v(tau)||_1 / window at convergence
    support: SupportSet
    tau: float = 0.0
    history: list[tuple[float, float]] = field(default_factory=list)
    stationary: float = float("nan")  # stationary_residual of F
    truncation: float = float("nan")
    runtime: float = 0.0
    tol: float = 0.0

    @property
    def peak(self) -> float:
        return self.F.peak

    def half_widths(self) -> np.ndarray:
        return support_extent(self.F, self.support.threshold)


def stationary_residual(F: Field, e: Exponents) -> float:
    """L^1 norm of sum_i [ D2_i(F^{m_i}) + alpha sigma_i D_i(y_i F) ] with central differences."""
    g = F.grid
    vals = np.pad(F.values, 1)
    res = np.zeros(g.shape)
    c = drift_coefficients(e)
    for i in range(g.N):
        h = g.spacing[i]
        w = vals ** e.m[i]
        inner = [slice(1, -1)] * g.N
        lo, hi = list(inner), list(inner)
        lo[i], hi[i] = slice(0, -2), slice(2, None)
        res += (w[tuple(lo)] - 2.0 * w[tuple(inner)] + w[tuple(hi)]) / h**2
        yc = np.concatenate([[-g.half_width[i] - 0.5 * h], g.centers(i), [g.half_width[i] + 0.5 * h]])
        shape = [1] * g.N
        shape[i] = -1
        yv = vals * yc.reshape([1] * i + [-1] + [1] * (g.N - i - 1))
        res += c[i] * (yv[tuple(hi)] - yv[tuple(lo)]) / (2 * h)
    return float(np.sum(np.abs(res))) * g.cell_volume


def _truncation_estimate(F: Field, e: Exponents) -> float:
    """L^1 size of (upwind - central) drift differences: the scheme's own O(h) error."""
    g = F.grid
    vals = np.pad(F.values, 1)
    c = drift_coefficients(e)
    est = np.zeros(g.shape)
    for i in range(g.N):
        h = g.spacing[i]
        yc = np.concatenate([[-g.half_width[i] - 0.5 * h], g.centers(i), [g.half_width[i] + 0.5 * h]])
        yv = vals * yc.reshape([1] * i + [-1] + [1] * (g.N - i - 1))
        inner = [slice(1, -1)] * g.N
        lo, hi = list(inner), list(inner)
        lo[i], hi[i] = slice(0, -2), slice(2, None)
        central = (yv[tuple(hi)] - yv[tuple(lo)]) / (2 * h)
        # upwind towards the origin: one-sided difference from the outer side
        sign = np.sign(g.centers(i)).reshape([1] * i + [-1] + [1] * (g.N - i - 1))
        upw = np.where(sign > 0, (yv[tuple(hi)] - yv[tuple(inner)]) / h, (yv[tuple(inner)] - yv[tuple(lo)]) / h)
        est += c[i] * (upw - central)
    return float(np.sum(np.abs(est))) * g.cell_volume


def _integrate_to_stationary(
    flow: OrthantFlow, q: np.ndarray, M: float, opts: ProfileOptions
) -> tuple[np.ndarray, float, list[tuple[float, float]], float]:
    tol = opts.tol * M
    tau = 0.0
    history: list[tuple[float, float]] = []
    prev = q.copy()
    window_end = opts.probe_window
    vol = flow.og.cell_volume * 2**flow.grid.N
    while True:
        while tau < window_end and not math.isclose(tau, window_end, rel_tol=0, abs_tol=1e-12):
            d = min(flow.stable_dt(q), window_end - tau)
            q = flow.step(q, d)
            tau += d
        tau = window_end
        rate = float(np.sum(np.abs(q - prev))) * vol / opts.probe_window
        history.append((tau, rate))
        if rate < tol:
            return q, tau, history, rate
        if tau >= opts.tau_max - 1e-12:
            raise ProfileConvergenceError(
                f"no stationarity by tau = {opts.tau_max}: rate {rate:.3e} > tol {tol:.3e}", history
            )
        prev = q.copy()
        window_end = tau + opts.probe_window


def _initial_field(opts: ProfileOptions, M: float, g: Grid, height: float) -> Field:
    if isinstance(opts.initial, Field):
        if opts.initial.grid != g:
            raise ValueError("initial field must live on the profile grid")
        return opts.initial
    if opts.initial == "plateau":
        R = min(g.half_width)
        return make_admissible(M, height, R, g)
    if opts.initial == "bump":
        w = [2.0 * plateau_radius(M, height, g.N)] * g.N
        return ssni_bump(M, g, w)
    raise ValueError(f"unknown initial data {opts.initial!r}")


def _default_height(M: float, box: np.ndarray) -> float:
    # plateau half-width ~ a third of the smallest half-width
    r = box.min() / 3.0
    return M / (2**box.size * r**box.size)


def _run(e: Exponents, M: float, g: Grid, opts: ProfileOptions, init: Field | None) -> tuple[np.ndarray, float, list, float, float]:
    cfg = SolverConfig(m=e.m, cfl_safety=opts.cfl)
    flow = OrthantFlow(g, e, cfg)
    height = opts.height or _default_height(M, np.asarray(g.half_width))
    f0 = init if init is not None else _initial_field(opts, M, g, height)
    q0 = flow.og.fold(f0.values)
    t0 = _time.perf_counter()
    q, tau, history, rate = _integrate_to_stationary(flow, q0, M, opts)
    return flow.og.unfold(q), tau, history, rate, _time.perf_counter() - t0


def _pilot_box(e: Exponents, M: float, opts: ProfileOptions) -> tuple[np.ndarray, Field]:
    """Coarse run on a generous cube; returns the support half-widths and the pilot field."""
    # isotropic radius for the mean exponent sets the first guess
    _, r0, _ = barenblatt(e.m_bar, e.N, M)
    L = 2.5 * r0
    for _ in range(6):
        g = Grid(L, opts.pilot_cells, N=e.N)
        popts = ProfileOptions(tol=max(opts.tol, 1e-4), tau_max=opts.tau_max, cfl=opts.cfl, probe_window=opts.probe_window)
        vals, *_ = _run(e, M, g, popts, None)
        F = Field(g, vals)
        ext = support_extent(F, threshold=max(1e-10, 1e-6 * F.peak))
        if np.all(ext < 0.8 * L):
            return ext, F
        L *= 1.6
    raise ProfileDomainError("pilot run could not contain the support")


def compute_profile(p: MediumParams | Sequence[float], M: float = 1.0, opts: ProfileOptions | None = None) -> Profile:
    """Integrate the rescaled flow from admissible data until it is stationary.

    Raises ProfileConvergenceError (carrying the residual history) if the
    unit-window L^1 change does not drop below ``tol * M`` by ``tau_max``.
    """
    opts = opts or ProfileOptions()
    e = derive_exponents(p)
    if e.N > 3:
        raise ValueError("profiles are computed for N <= 3")
    cells = np.broadcast_to(np.asarray(opts.cells, dtype=int), (e.N,))
    init = None
    if opts.half_width is None:
        ext, pilot = _pilot_box(e, M, opts)
        box = opts.box_factor * ext
        g = Grid(box, cells)
        if opts.warm_start and not isinstance(opts.initial, Field):
            init = Field(g, resample(pilot, g))
            init = Field(g, init.values * (M / total_mass(init)))
    else:
        g = Grid(opts.half_width, cells, N=e.N)
    vals, tau, history, rate, runtime = _run(e, M, g, opts, init)
    F = Field(g, vals, tau)
    sup = extract_support(F)
    ext = support_extent(F, sup.threshold)
    if np.any(ext >= np.asarray(g.half_width) - 0.5 * np.asarray(g.spacing)):
        raise ProfileDomainError("profile support reaches the grid boundary; enlarge half_width")
    prof = Profile(
        exponents=e,
        grid=g,
        F=F,
        mass=total_mass(F),
        residual=rate,
        support=sup,
        tau=tau,
        history=history,
        runtime=runtime,
        tol=opts.tol * M,
    )
    prof.stationary = stationary_residual(F, e)
    prof.truncation = max(_truncation_estimate(F, e), prof.tol)
    return prof


def rescale_mass(P: Profile, k: float, grid: Grid | None = None) -> Profile:
    """F_k(y) = k F(k^-nu_1 y_1, ..., k^-nu_N y_N); mass becomes k^beta M."""
    if k <= 0:
        raise ValueError("k must be positive")
    e = P.exponents
    g = grid or P.grid
    if k == 1.0 and g == P.grid:
        return P
    nu = np.asarray(e.nu)
    stretch = k**nu
    ext = P.half_widths() * stretch
    if np.any(ext > np.asarray(g.half_width)):
        raise ProfileDomainError("rescaled support exceeds the grid box")
    vals = resample(P.F, g, scale=1.0 / stretch, value_factor=k)
    F = Field(g, vals, P.F.time)
    return Profile(
        exponents=e,
        grid=g,
        F=F,
        mass=total_mass(F),
        residual=P.residual * k**e.beta,
        support=extract_support(F),
        tau=P.tau,
        tol=P.tol * k**e.beta,
    )


def profile_of_mass(P: Profile, M: float, grid: Grid | None = None) -> Profile:
    """F_M from a computed profile of mass P.mass via the mass scaling."""
    k = (M / P.mass) ** (1.0 / P.exponents.beta)
    return rescale_mass(P, k, grid)


# -- persistence --------------------------------------------------------------

def save_profile(P: Profile, directory: str | Path, stem: str = "profile") -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    csv = write_field_csv(P.F, d / f"{stem}.csv")
    manifest = {
        "N": P.exponents.N,
        "m": list(P.exponents.m),
        "M": P.mass,
        "residual": P.residual,
        "tol": P.tol,
        "grid": P.grid.describe(),
        "runtime_seconds": P.runtime,
        "tau": P.tau,
        "stationary_residual": P.stationary,
    }
    js = d / f"{stem}.json"
    js.write_text(json.dumps(manifest, indent=2) + "\n")
    return csv, js


def load_profile(directory: str | Path, stem: str = "profile") -> Profile:
    d = Path(directory)
    meta = json.loads((d / f"{stem}.json").read_text())
    F = read_field_csv(d / f"{stem}.csv")
    e = derive_exponents(meta["m"])
    return Profile(
        exponents=e,
        grid=F.grid,
        F=F,
        mass=total_mass(F),
        residual=meta["residual"],
        support=extract_support(F),
        tau=meta.get("tau", 0.0),
        tol=meta["tol"],
        runtime=meta["runtime_seconds"],
        stationary=meta.get("stationary_residual", float("nan")),
    )
