"""Self-similar variables and the rescaled flow.

    v(y, tau) = (t + t0)^alpha u(x, t),  tau = log(t + t0),  y_i = x_i (t + t0)^(-alpha sigma_i)

turns the equation into

    v_tau = sum_i [ (v^{m_i})_{y_i y_i} + alpha sigma_i (y_i v)_{y_i} ],

whose stationary states are the self-similar profiles.  The drift is
upwinded (first order) so the combined explicit scheme stays monotone.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .exponents import Exponents
from .grid import Field, Grid, total_mass
from .solver import CFLError, SolverConfig, _snap, _stencil


@dataclass(frozen=True)
class RescaleMap:
    exponents: Exponents
    t0: float = 1.0

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")

    def tau(self, t: float) -> float:
        return math.log(t + self.t0)

    def t(self, tau: float) -> float:
        return math.exp(tau) - self.t0

    def factors(self, t: float) -> tuple[float, np.ndarray]:
        """(value factor s^alpha, per-axis length factors s^(alpha sigma_i)) at time t."""
        s = t + self.t0
        e = self.exponents
        return s**e.alpha, s ** np.asarray(e.a)


def interpolator(f: Field) -> RegularGridInterpolator:
    """Multilinear interpolant of a field, decaying to 0 over a ghost ring."""
    g = f.grid
    axes = []
    for i in range(g.N):
        c = g.centers(i)
        L, h = g.half_width[i], g.spacing[i]
        axes.append(np.concatenate([[-L - 0.5 * h], c, [L + 0.5 * h]]))
    vals = np.pad(f.values, 1)
    return RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)


def resample(f: Field, target: Grid, scale: np.ndarray | None = None, value_factor: float = 1.0) -> np.ndarray:
    """values(z) = value_factor * f(scale * z) at the centres z of ``target``."""
    pts = np.stack(np.meshgrid(*[target.centers(i) for i in range(target.N)], indexing="ij"), axis=-1)
    if scale is not None:
        pts = pts * np.asarray(scale)
    out = value_factor * interpolator(f)(pts.reshape(-1, target.N)).reshape(target.shape)
    return np.maximum(out, 0.0)


def support_extent(f: Field, threshold: float = 0.0) -> np.ndarray:
    """Per-axis max |coordinate| of the cells with value > threshold (plus half a cell)."""
    g = f.grid
    ext = np.zeros(g.N)
    pos = f.values > threshold
    if not pos.any():
        return ext
    for i in range(g.N):
        other = tuple(k for k in range(g.N) if k != i)
        line = pos.any(axis=other) if other else pos
        c = g.centers(i)[line]
        ext[i] = np.max(np.abs(c)) + 0.5 * g.spacing[i]
    return ext


def _mapped(f: Field, target: Grid, scale: np.ndarray, value_factor: float, time: float) -> Field:
    ext = support_extent(f) / scale
    vals = resample(f, target, scale, value_factor)
    out = Field(target, vals, time)
    if np.any(ext > np.asarray(target.half_width) + 1e-12):
        out.truncated = True
        out.mass_deficit = max(total_mass(f) - total_mass(out), 0.0)
        warnings.warn(
            f"target grid does not contain the mapped support; mass deficit {out.mass_deficit:.3e}",
            stacklevel=3,
        )
    return out


def to_selfsimilar(f: Field, rmap: RescaleMap, target: Grid) -> Field:
    """Map a physical field u(., t) to v(., tau); ``time`` of the result is tau."""
    if f.time < 0:
        raise ValueError("physical time must be >= 0")
    vf, lf = rmap.factors(f.time)
    return _mapped(f, target, lf, vf, rmap.tau(f.time))


def from_selfsimilar(v: Field, rmap: RescaleMap, target: Grid) -> Field:
    """Inverse of :func:`to_selfsimilar`; ``time`` of the result is t."""
    t = rmap.t(v.time)
    vf, lf = rmap.factors(t)
    return _mapped(v, target, 1.0 / lf, 1.0 / vf, t)


# -- rescaled flow -----------------------------------------------------------

def drift_coefficients(e: Exponents) -> np.ndarray:
    return e.alpha * np.asarray(e.sigma)


def rescaled_stable_dt(values: np.ndarray, grid_like, e: Exponents, cfg: SolverConfig) -> float:
    """cfl * min_i( h_i^2 / (2 N D_i), h_i / (N alpha sigma_i L_i) )."""
    h = np.asarray(grid_like.spacing)
    L = np.asarray(grid_like.half_width)
    N = len(h)
    top = max(float(values.max()), 0.0) + cfg.epsilon
    D = np.array([mi * top ** (mi - 1.0) for mi in cfg.m])
    c = drift_coefficients(e)
    with np.errstate(divide="ignore"):
        bounds = np.concatenate([np.where(D > 0, h**2 / (2 * N * D), np.inf), h / (N * c * L)])
    dt = cfg.cfl_safety * float(bounds.min())
    if cfg.max_dt is not None:
        dt = min(dt, cfg.max_dt)
    return dt


def step_rescaled(v: Field, e: Exponents, cfg: SolverConfig, dtau: float) -> Field:
    """One explicit step of the rescaled equation (diffusion + upwinded confining drift)."""
    limit = rescaled_stable_dt(v.values, v.grid, e, cfg)
    if dtau > limit * (1.0 + 1e-12):
        raise CFLError(f"dtau = {dtau:.6g} exceeds the stable step {limit:.6g}")
    st = _stencil(v.grid, cfg.m, cfg.epsilon, cfg.ghost, drift=tuple(drift_coefficients(e)))
    new = np.maximum(st.apply(v.values, dtau), 0.0)
    return Field(v.grid, new, v.time + dtau)


@dataclass(frozen=True)
class OrthantGrid:
    """The part of a symmetric grid with all coordinates positive."""

    full: Grid

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.full.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return self.full.spacing

    @property
    def half_width(self) -> tuple[float, ...]:
        return self.full.half_width

    @property
    def cell_volume(self) -> float:
        return self.full.cell_volume

    def fold(self, values: np.ndarray) -> np.ndarray:
        """Average over the 2^N coordinate reflections, keep the positive orthant."""
        acc = np.array(values, dtype=float)
        for ax in range(acc.ndim):
            acc = 0.5 * (acc + np.flip(acc, axis=ax))
        sl = tuple(slice(n // 2, None) for n in self.full.cells)
        return np.ascontiguousarray(acc[sl])

    def unfold(self, q: np.ndarray) -> np.ndarray:
        out = q
        for ax in range(q.ndim):
            out = np.concatenate([np.flip(out, axis=ax), out], axis=ax)
        return out


class OrthantFlow:
    """Rescaled flow for data symmetric in every coordinate, stored on one orthant.

    The inner faces are mirror planes: diffusive flux vanishes there by
    reflection and the drift velocity vanishes at y_i = 0.
    """

    def __init__(self, grid: Grid, e: Exponents, cfg: SolverConfig):
        self.grid = grid
        self.og = OrthantGrid(grid)
        self.e = e
        self.cfg = cfg
        faces = [grid.faces(i)[grid.cells[i] // 2:] for i in range(grid.N)]
        c = tuple(drift_coefficients(e))
        self.st = _kernels.Stencil(
            self.og.shape, grid.spacing, cfg.m, eps=cfg.epsilon, ghost=cfg.ghost,
            drift=c, faces=faces, lower=("reflect",) * grid.N,
        )
        for i in range(grid.N):
            self.st.up[self.st.off + i][:, -1] = 0.0

    def stable_dt(self, q: np.ndarray) -> float:
        return rescaled_stable_dt(q, self.og, self.e, self.cfg)

    def step(self, q: np.ndarray, dtau: float) -> np.ndarray:
        return np.maximum(self.st.apply(q, dtau), 0.0)

    def mass(self, q: np.ndarray) -> float:
        return float(np.sum(q)) * self.og.cell_volume * 2**self.grid.N


def evolve_rescaled(
    v: Field,
    e: Exponents,
    cfg: SolverConfig,
    tau_end: float,
    checkpoints: Iterable[float] = (),
    callback: Callable[[Field], None] | None = None,
    symmetric: bool = False,
) -> Field:
    """Integrate the rescaled flow to ``tau_end``, landing on every checkpoint.

    With ``symmetric=True`` the data are folded onto one orthant (the average
    of their reflections) and evolved there; only use it for data that are
    symmetric in each coordinate.
    """
    if tau_end < v.time:
        raise ValueError("tau_end precedes the field time")
    marks = sorted(t for t in set(checkpoints) if v.time <= t <= tau_end)
    g = v.grid
    if symmetric:
        flow = OrthantFlow(g, e, cfg)
        state = flow.og.fold(v.values)
        sdt = flow.stable_dt
        adv = flow.step
        to_field = lambda s, tau: Field(g, flow.og.unfold(s), tau)
    else:
        state = v.values.copy()
        sdt = lambda s: rescaled_stable_dt(s, g, e, cfg)
        adv = lambda s, d: step_rescaled(Field(g, s, 0.0), e, cfg, d).values
        to_field = lambda s, tau: Field(g, s.copy(), tau)
    tau = v.time
    k = 0
    while k < len(marks) and _snap(tau, marks[k]):
        if callback:
            callback(to_field(state, marks[k]))
        k += 1
    while not _snap(tau, tau_end) and tau < tau_end:
        target = marks[k] if k < len(marks) else tau_end
        d = min(sdt(state), target - tau)
        state = adv(state, d)
        tau = target if _snap(tau + d, target) else tau + d
        while k < len(marks) and _snap(tau, marks[k]):
            if callback:
                callback(to_field(state, marks[k]))
            k += 1
    return to_field(state, tau_end)
