"""Quantitative checks of the asymptotic and structural properties.

Rate fits, convergence traces in self-similar variables, support and
free-boundary distances, symmetry/monotonicity reports, the travelling-wave
barrier and the positivity floor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .grid import Field, Grid, lp_norm, total_mass
from .profile import Profile
from .rescale import RescaleMap, evolve_rescaled, support_extent, to_selfsimilar
from .solver import SolverConfig, evolve
from .support import SupportSet, boundary_cells, extract_support, hausdorff, scale_mass_set


class InsufficientWindowError(ValueError):
    pass


class MassMismatchError(ValueError):
    pass


# -- rate fits ----------------------------------------------------------------

@dataclass
class RateFit:
    exponent: float
    stderr: float
    window: tuple[float, float]
    points: int
    intercept: float = 0.0

    @property
    def decades(self) -> float:
        return math.log10(self.window[1] / self.window[0])

    def within(self, target: float, rel: float) -> bool:
        return abs(self.exponent - target) <= rel * abs(target)


def fit_power_law(
    t: Sequence[float],
    q: Sequence[float],
    discard: float = 0.2,
    min_points: int = 5,
    min_decades: float = 1.0,
) -> RateFit:
    """Least-squares slope of log q against log t.

    The first ``discard`` fraction of the log-time window is dropped.  Too
    few points, a window narrower than ``min_decades`` or a quantity that does
    not change at all raise InsufficientWindowError.
    """
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    ok = (t > 0) & (q > 0)
    t, q = t[ok], q[ok]
    if t.size < 2:
        raise InsufficientWindowError("need positive times and values to fit a rate")
    lt = np.log(t)
    start = lt[0] + discard * (lt[-1] - lt[0])
    keep = lt >= start - 1e-12
    t, q, lt = t[keep], q[keep], lt[keep]
    if t.size < min_points:
        raise InsufficientWindowError(f"{t.size} points in the fit window, need {min_points}")
    dec = math.log10(t[-1] / t[0])
    if dec < min_decades - 1e-9:
        raise InsufficientWindowError(f"fit window spans {dec:.2f} decades, need {min_decades}")
    lq = np.log(q)
    if np.ptp(lq) <= 1e-12 * max(1.0, np.abs(lq).max()):
        raise InsufficientWindowError("quantity is constant over the window; no rate to fit")
    res = stats.linregress(lt, lq)
    return RateFit(float(res.slope), float(res.stderr), (float(t[0]), float(t[-1])), int(t.size), float(res.intercept))


@dataclass
class EvolutionRecord:
    """Checkpoint summaries of a physical evolution."""

    times: list[float] = field(default_factory=list)
    peaks: list[float] = field(default_factory=list)
    masses: list[float] = field(default_factory=list)
    extents: list[np.ndarray] = field(default_factory=list)  # per-axis support half-width
    fronts: list[np.ndarray] = field(default_factory=list)  # per-axis max centre coordinate of the mask
    subcell: list[np.ndarray] = field(default_factory=list)  # per-axis pressure-extrapolated front
    snapshots: dict[float, Field] = field(default_factory=dict)
    m: tuple[float, ...] | None = None

    def add(self, f: Field, keep: bool = False) -> None:
        S = extract_support(f)
        self.times.append(f.time)
        self.peaks.append(f.peak)
        self.masses.append(total_mass(f))
        self.extents.append(support_extent(f, S.threshold))
        self.fronts.append(_front(S))
        if self.m is not None:
            self.subcell.append(_pressure_front(f, S, self.m))
        if keep:
            self.snapshots[f.time] = f.copy()

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        N = len(self.fronts[0]) if self.fronts else 0
        cols = ["t", "peak", "mass"] + [f"front{i + 1}" for i in range(N)]
        if self.subcell:
            cols += [f"edge{i + 1}" for i in range(N)]
        with path.open("w") as fh:
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(self.times):
                row = [t, self.peaks[k], self.masses[k], *self.fronts[k]]
                if self.subcell:
                    row += list(self.subcell[k])
                fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")
        return path


def _front(S: SupportSet) -> np.ndarray:
    """Per-axis largest |centre coordinate| over the mask (0 for an empty mask)."""
    g = S.grid
    out = np.zeros(g.N)
    if S.empty:
        return out
    for i in range(g.N):
        other = tuple(k for k in range(g.N) if k != i)
        line = S.mask.any(axis=other) if other else S.mask
        out[i] = np.abs(g.centers(i)[line]).max()
    return out


# fit band: this fraction of the front distance, so it scales with the support
BAND_FRACTION = 0.3
MIN_BAND = 4


def _pressure_front(f: Field, S: SupportSet, m: Sequence[float]) -> np.ndarray:
    """Per-axis front position with sub-cell resolution.

    The pressure u^(m_i - 1) is close to linear near the front, so the zero
    crossing is extrapolated from a line fitted to the cells just inside the
    outermost positive cell of the axis profile max_{other axes} u.
    Falls back to the outer face of the last positive cell when the pressure
    does not decrease there.
    """
    g = f.grid
    out = np.zeros(g.N)
    if S.empty:
        return out
    for i in range(g.N):
        other = tuple(k for k in range(g.N) if k != i)
        w = f.values.max(axis=other) if other else f.values
        w = np.where(w > S.threshold, w, 0.0)
        c = g.centers(i)
        h = g.spacing[i]
        best = 0.0
        for line, x in ((w, c), (w[::-1], -c[::-1])):
            j = int(np.flatnonzero(line > 0)[-1])
            q = line ** (m[i] - 1.0)
            pos = x[j] + 0.5 * h
            # the outermost cell is still filling; fit a line to the cells behind it
            n = max(MIN_BAND, int(round(BAND_FRACTION * x[j] / h)))
            k = np.arange(max(j - n, 0), j)
            if k.size >= 2:
                slope, icpt = np.polyfit(x[k], q[k], 1)
                if slope < 0:
                    pos = float(np.clip(-icpt / slope, x[j - 1], x[j] + 2 * h))
            best = max(best, pos)
        out[i] = best
    return out


def record_evolution(
    u0: Field,
    cfg: SolverConfig,
    checkpoints: Sequence[float],
    keep: Iterable[float] = (),
    warn_flux: bool = True,
) -> EvolutionRecord:
    """Evolve u0 and summarise it at every checkpoint (snapshots kept at ``keep``)."""
    keep = {float(t) for t in keep}
    rec = EvolutionRecord(m=cfg.m)
    t_end = max(checkpoints)

    def cb(f: Field) -> None:
        rec.add(f, keep=any(math.isclose(f.time, k, rel_tol=1e-12) for k in keep))

    evolve(u0, cfg, t_end, checkpoints=checkpoints, callback=cb, warn_flux=warn_flux)
    return rec


def log_checkpoints(t0: float, t1: float, per_decade: int = 10) -> np.ndarray:
    n = int(round(per_decade * math.log10(t1 / t0))) + 1
    return np.geomspace(t0, t1, max(n, 2))


def smoothing_fit(rec: EvolutionRecord, window: tuple[float, float] | None = None, **kw) -> RateFit:
    """Fit ||u(t)||_inf ~ t^(-alpha_hat); the returned exponent is alpha_hat."""
    t, q = _windowed(rec.times, rec.peaks, window)
    fit = fit_power_law(t, q, **kw)
    fit.exponent = -fit.exponent
    return fit


def support_growth_fit(rec: EvolutionRecord, axis: int, window: tuple[float, float] | None = None, **kw) -> RateFit:
    """Fit the axis-``axis`` front position ~ t^(a_hat).

    Uses the sub-cell pressure front when the record has one; the cell-centre
    front moves in whole cells and makes the fit depend on checkpoint spacing.
    """
    fronts = rec.subcell if rec.subcell else rec.fronts
    t, q = _windowed(rec.times, [f[axis] for f in fronts], window)
    return fit_power_law(t, q, **kw)


def _windowed(t, q, window):
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    if window is not None:
        sel = (t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12))
        t, q = t[sel], q[sel]
    return t, q


# -- convergence traces -----------------------------------------------------------

@dataclass
class ConvergenceTrace:
    name: str
    checkpoints: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def append(self, tau: float, value: float) -> None:
        if self.checkpoints and tau <= self.checkpoints[-1]:
            raise ValueError("checkpoints must be strictly increasing")
        self.checkpoints.append(float(tau))
        self.values.append(float(value))

    def at(self, tau: float) -> float:
        k = int(np.argmin(np.abs(np.asarray(self.checkpoints) - tau)))
        return self.values[k]

    @property
    def final(self) -> float:
        return self.values[-1]

    def max_increase_after(self, transient: float = 0.2) -> float:
        """Largest rise between consecutive values after the first ``transient`` of the window."""
        c = np.asarray(self.checkpoints)
        v = np.asarray(self.values)
        start = c[0] + transient * (c[-1] - c[0])
        v = v[c >= start - 1e-12]
        return float(np.max(np.diff(v))) if v.size > 1 else 0.0

    def nonincreasing_after(self, transient: float = 0.2, slack: float = 0.0) -> bool:
        return self.max_increase_after(transient) <= slack

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"tau,{self.name}\n")
            for c, v in zip(self.checkpoints, self.values):
                fh.write(f"{c:.17g},{v:.17g}\n")
        return path


@dataclass
class AsymptoticsReport:
    traces: dict[str, ConvergenceTrace]
    bracket: list[bool] = field(default_factory=list)
    tau_eps: float | None = None
    cell: float = 0.0
    masks: dict[float, SupportSet] = field(default_factory=dict)


def _core_front_masks(P: Profile, core: float) -> tuple[np.ndarray, np.ndarray]:
    core_mask = P.F.values >= core * P.peak
    return core_mask, ~core_mask


def track_asymptotics(
    u0: Field,
    P: Profile,
    checkpoints: Sequence[float],
    norms: Sequence[float] = (1, 2, math.inf),
    supports: bool = False,
    eps: float = 0.1,
    symmetric: bool = False,
    cfg: SolverConfig | None = None,
    core: float = 0.05,
    keep: Iterable[float] = (),
) -> AsymptoticsReport:
    """Evolve u0 in self-similar variables on the profile grid and compare with F_M.

    ``u0`` is taken at t = 0 with t0 = 1, so y = x initially; data on another
    grid are resampled onto the profile grid first.
    """
    e = P.exponents
    if abs(total_mass(u0) - P.mass) > 1e-3 * P.mass:
        raise MassMismatchError(f"mass of u0 ({total_mass(u0):.6g}) differs from the profile mass ({P.mass:.6g})")
    if u0.grid != P.grid:
        u0 = to_selfsimilar(Field(u0.grid, u0.values, 0.0), RescaleMap(e, 1.0), P.grid)
    v0 = Field(P.grid, u0.values, 0.0)
    cfg = cfg or SolverConfig(m=e.m)
    traces: dict[str, ConvergenceTrace] = {}
    for p in norms:
        traces[_norm_name(p)] = ConvergenceTrace(_norm_name(p))
    if math.inf in norms:
        traces["Linf_core"] = ConvergenceTrace("Linf_core")
        traces["Linf_front"] = ConvergenceTrace("Linf_front")
    core_mask, front_mask = _core_front_masks(P, core)
    rep = AsymptoticsReport(traces=traces, cell=max(P.grid.spacing))
    keep = {float(t) for t in keep}
    if supports:
        om = P.support
        gam = boundary_cells(om)
        k_lo = (1 - eps) ** (1 / e.beta)
        k_hi = (1 + eps) ** (1 / e.beta)
        lo = scale_mass_set(om, k_lo, e.nu)
        hi = scale_mass_set(om, k_hi, e.nu)
        traces["dH_support"] = ConvergenceTrace("dH_support")
        traces["dH_boundary"] = ConvergenceTrace("dH_boundary")

    def cb(v: Field) -> None:
        d = v.values - P.F.values
        for p in norms:
            traces[_norm_name(p)].append(v.time, lp_norm(d, p, P.grid))
        if math.inf in norms:
            traces["Linf_core"].append(v.time, float(np.abs(d[core_mask]).max()))
            traces["Linf_front"].append(v.time, float(np.abs(d[front_mask]).max()) if front_mask.any() else 0.0)
        if supports:
            S = extract_support(v)
            traces["dH_support"].append(v.time, hausdorff(S, om))
            traces["dH_boundary"].append(v.time, hausdorff(boundary_cells(S), gam))
            rep.bracket.append(bool(lo <= S and S <= hi))
            if any(math.isclose(v.time, k, abs_tol=1e-12) for k in keep):
                rep.masks[v.time] = S
    marks = sorted(set(float(c) for c in checkpoints))
    evolve_rescaled(v0, e, cfg, marks[-1], checkpoints=marks, callback=cb, symmetric=symmetric)
    if supports:
        rep.tau_eps = _settling_time(marks, rep.bracket)
    return rep


def _settling_time(taus: Sequence[float], flags: Sequence[bool]) -> float | None:
    """First checkpoint from which every later flag is true."""
    last_bad = -1
    for k, ok in enumerate(flags):
        if not ok:
            last_bad = k
    if last_bad == len(flags) - 1:
        return None
    return float(taus[last_bad + 1])


def _norm_name(p: float) -> str:
    return "Linf" if math.isinf(p) else f"L{int(p) if float(p).is_integer() else p}"


def convergence_to_profile(
    u0: Field,
    P: Profile,
    checkpoints: Sequence[float],
    norms: Sequence[float] = (1, 2, math.inf),
    symmetric: bool = False,
    core: float = 0.05,
) -> dict[str, ConvergenceTrace]:
    """||v(tau) - F_M||_p per checkpoint, plus L^inf split into core {F >= core*peak} and front."""
    return track_asymptotics(u0, P, checkpoints, norms=norms, symmetric=symmetric, core=core).traces


def support_convergence(
    u0: Field,
    P: Profile,
    checkpoints: Sequence[float],
    eps: float = 0.1,
    symmetric: bool = False,
) -> AsymptoticsReport:
    """Hausdorff distances of supports and free boundaries, and the mass bracket

    Omega(F_{M(1-eps)}) <= Omega(v) <= Omega(F_{M(1+eps)}), with the bracketing
    sets obtained from Omega(F_M) by the mass-scaling set map.
    """
    return track_asymptotics(u0, P, checkpoints, norms=(), supports=True, eps=eps, symmetric=symmetric)


# -- structural checks --------------------------------------------------------------

@dataclass
class SSNIReport:
    symmetry: float
    monotonicity: float
    peak: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.symmetry <= self.tolerance and self.monotonicity <= self.tolerance


def ssni_check(f: Field, truncation: float = 0.0, rel: float = 1e-9) -> SSNIReport:
    """Largest reflection mismatch and largest increase away from the origin along an axis."""
    v = f.values
    sym = 0.0
    mono = 0.0
    for ax in range(v.ndim):
        sym = max(sym, float(np.abs(v - np.flip(v, axis=ax)).max()))
        n = v.shape[ax]
        upper = np.take(v, np.arange(n // 2, n), axis=ax)
        lower = np.flip(np.take(v, np.arange(0, n // 2), axis=ax), axis=ax)
        for half in (upper, lower):
            inc = np.diff(half, axis=ax)
            if inc.size:
                mono = max(mono, float(inc.max()))
    return SSNIReport(sym, max(mono, 0.0), f.peak, rel * f.peak + truncation)


@dataclass
class PartialMonotonicityReport:
    axis_violation: float
    cone_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.axis_violation <= self.tolerance and self.cone_violation <= self.tolerance


def _outward_pairs(g: Grid, axis: int, a: float):
    """Index arrays (inner, outer) of neighbouring cells whose shared face lies beyond |x| = a."""
    fc = g.faces(axis)[1:-1]
    j = np.arange(g.cells[axis] - 1)
    right = fc >= a
    left = fc <= -a
    inner = np.concatenate([j[right], j[left] + 1])
    outer = np.concatenate([j[right] + 1, j[left]])
    return inner, outer


def partial_monotonicity_check(f: Field, a: Sequence[float] | float, rel: float = 1e-12) -> PartialMonotonicityReport:
    """For data initially supported in Q(a): monotone decrease away from Q(a) along
    each axis, and along diagonal lines inside each corner cone."""
    g = f.grid
    av = np.broadcast_to(np.asarray(a, dtype=float), (g.N,))
    v = f.values
    axis_v = 0.0
    for i in range(g.N):
        inner, outer = _outward_pairs(g, i, av[i])
        if inner.size:
            d = np.take(v, outer, axis=i) - np.take(v, inner, axis=i)
            axis_v = max(axis_v, float(d.max()))
    cone_v = 0.0
    for signs in np.ndindex(*(2,) * g.N):
        # cells with every coordinate beyond the corner, stepping one cell outward on every axis
        sl_in, sl_out = [], []
        ok = True
        for i, s in enumerate(signs):
            c = g.centers(i)
            h = g.spacing[i]
            if s == 0:
                idx = np.flatnonzero(c - 0.5 * h >= av[i])
                idx = idx[idx + 1 < g.cells[i]]
                sl_in.append(idx)
                sl_out.append(idx + 1)
            else:
                idx = np.flatnonzero(c + 0.5 * h <= -av[i])
                idx = idx[idx - 1 >= 0]
                sl_in.append(idx)
                sl_out.append(idx - 1)
            ok &= idx.size > 0
        if not ok:
            continue
        d = v[np.ix_(*sl_out)] - v[np.ix_(*sl_in)]
        cone_v = max(cone_v, float(d.max()))
    return PartialMonotonicityReport(max(axis_v, 0.0), max(cone_v, 0.0), rel * max(f.peak, 1e-300))


@dataclass
class BarrierReport:
    axis: int
    K: float
    A: float
    times: list[float]
    fronts: list[float]
    barriers: list[float]

    @property
    def margins(self) -> list[float]:
        return [b - f for b, f in zip(self.barriers, self.fronts)]

    @property
    def passed(self) -> bool:
        return all(f < b for f, b in zip(self.fronts, self.barriers))


def barrier_position(m_i: float, L: float, R: float, A: float) -> float:
    """K = R + L^{m_i - 1} / (c A), c = (m_i - 1) / m_i."""
    c = (m_i - 1.0) / m_i
    return R + L ** (m_i - 1.0) / (c * A)


def barrier_check(
    fields: Iterable[Field],
    axis: int,
    A: float,
    K: float,
    threshold: float | None = None,
) -> BarrierReport:
    """No cell of the support mask has x_axis >= K + A t (the travelling-wave barrier).

    ``fronts`` holds the largest centre coordinate of the mask along ``axis``
    (-inf for an empty mask).
    """
    times, fronts, bars = [], [], []
    for f in fields:
        S = extract_support(f, threshold)
        c = f.grid.centers(axis)
        if S.empty:
            front = -math.inf
        else:
            other = tuple(k for k in range(f.grid.N) if k != axis)
            line = S.mask.any(axis=other) if other else S.mask
            front = float(c[line].max())
        times.append(f.time)
        fronts.append(front)
        bars.append(K + A * f.time)
    return BarrierReport(axis, K, A, times, fronts, bars)


@dataclass
class PositivityReport:
    c: float
    r0: float
    tau1: float | None
    minima: list[float]
    times: list[float]

    @property
    def passed(self) -> bool:
        return self.tau1 is not None and self.c > 0


def positivity_floor_check(fields: Sequence[Field], r0: float, recenter: bool = False) -> PositivityReport:
    """Empirical (c, r0, tau1): v >= c > 0 on the box |y_i| <= r0 (around the centre of
    mass when ``recenter``) for every checkpoint from tau1 on."""
    minima, times = [], []
    for f in fields:
        g = f.grid
        centre = np.zeros(g.N)
        if recenter and total_mass(f) > 0:
            centre = np.array([float(np.sum(f.values * y)) for y in g.mesh()]) * g.cell_volume / total_mass(f)
        sel = np.ones(g.shape, dtype=bool)
        for i, y in enumerate(g.mesh()):
            sel = sel & (np.abs(y - centre[i]) <= r0)
        if not sel.any():
            raise ValueError("positivity box contains no cell centre; enlarge r0")
        minima.append(float(f.values[sel].min()))
        times.append(f.time)
    tau1 = _settling_time(times, [mn > 0 for mn in minima])
    c = min(mn for mn, t in zip(minima, times) if tau1 is not None and t >= tau1) if tau1 is not None else 0.0
    return PositivityReport(c, r0, tau1, minima, times)


def energy_check(
    u0: Field, cfg: SolverConfig, t_end: float, slack: float = 0.05
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per axis: (sum_steps dt * sum_faces |D_i u^{m_i}|^2, (int u0^{m_i+1} - int u^{m_i+1}(T)) / (m_i + 1)).

    The last entry reports lhs <= (1 + slack) rhs on every axis.
    """
    g = u0.grid
    lhs = np.zeros(g.N)

    def on_step(f: Field, rep) -> None:
        lhs[:] += rep.dt_used * np.asarray(rep.dissipation)

    uT = evolve(u0, cfg, t_end, on_step=on_step, energy=True, warn_flux=False)
    m = np.asarray(cfg.m)
    rhs = np.array(
        [(np.sum(u0.values ** (mi + 1)) - np.sum(uT.values ** (mi + 1))) * g.cell_volume / (mi + 1) for mi in m]
    )
    return lhs, rhs, bool(np.all(lhs <= (1 + slack) * rhs))


def lp_interpolation_holds(diff: np.ndarray, grid: Grid) -> bool:
    """||d||_2^2 <= ||d||_1 ||d||_inf (up to rounding)."""
    l2 = lp_norm(diff, 2, grid) ** 2
    return l2 <= lp_norm(diff, 1, grid) * lp_norm(diff, math.inf, grid) * (1 + 1e-12)


# -- summaries ------------------------------------------------------------------------

@dataclass
class Summary:
    name: str
    params: dict
    fits: dict = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "params": self.params, "fits": self.fits, "pass": self.checks},
            indent=2,
            sort_keys=False,
        )

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path
