"""Explicit conservative finite-volume stepping for u_t = sum_i (u^{m_i})_{x_i x_i}.

The update is

    u_new = u + dt * sum_i D2_i[(u + eps)^{m_i} - eps^{m_i}] / h_i^2

with ghost cells outside the box.  ``boundary="zero"`` holds the lifted value
``u + eps`` at 0 in the ghosts, ``boundary="lift"`` holds it at ``eps`` (so
the stored perturbation is 0 there).  With ``eps = 0`` both coincide.

Under ``dt <= 1 / (2 sum_i D_i / h_i^2)``, ``D_i = max m_i (u + eps)^{m_i-1}``,
the update is a monotone map, which gives comparison, L^1 contraction and
decay of every L^p norm at the discrete level.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .grid import Field, Grid, total_mass


class CFLError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    m: tuple[float, ...]
    epsilon: float = 0.0
    cfl_safety: float = 0.4
    boundary: str = "zero"
    max_dt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(x) for x in np.atleast_1d(self.m)))
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.boundary not in ("zero", "lift"):
            raise ValueError("boundary must be 'zero' or 'lift'")
        if self.boundary == "lift" and self.epsilon <= 0:
            raise ValueError("boundary='lift' requires epsilon > 0")

    @property
    def ghost(self) -> float:
        """Stored ghost value (the field stores u, the lifted state is u + eps)."""
        return 0.0 if self.boundary == "lift" else -self.epsilon


@dataclass
class StepReport:
    dt_used: float
    mass_before: float
    mass_after: float
    max_value: float
    boundary_flux: float
    clamp_mass: float = 0.0
    dissipation: tuple[float, ...] | None = None

    def csv_row(self, t: float) -> str:
        return ",".join(format(x, ".17g") for x in (t, self.dt_used, self.mass_after, self.max_value, self.boundary_flux))


STEP_CSV_HEADER = "t,dt,mass,max,boundary_flux"

_local = threading.local()


def _stencil(grid: Grid, m, eps, ghost, drift=None) -> _kernels.Stencil:
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = {}
    key = (grid, tuple(m), eps, ghost, None if drift is None else tuple(drift))
    st = cache.get(key)
    if st is None:
        if len(cache) > 16:
            cache.clear()
        faces = [grid.faces(i) for i in range(grid.N)] if drift is not None else None
        st = _kernels.Stencil(grid.shape, grid.spacing, m, eps=eps, ghost=ghost, drift=drift, faces=faces)
        if drift is not None:
            # no drift flux through the outer faces
            for i in range(grid.N):
                a = st.off + i
                if st.drift:
                    st.up[a][:, 0] = 0.0
                    st.up[a][:, -1] = 0.0
        cache[key] = st
    return st


def _check_dims(f: Field, m) -> None:
    if len(m) != f.grid.N:
        raise ValueError(f"{len(m)} exponents for a {f.grid.N}-d grid")


def diffusivity(f: Field, cfg: SolverConfig) -> np.ndarray:
    """Per-axis max of m_i (u + eps)^{m_i - 1}."""
    top = max(f.peak, 0.0) + cfg.epsilon
    return np.array([mi * top ** (mi - 1.0) for mi in cfg.m])


def stable_dt(f: Field, cfg: SolverConfig) -> float:
    """cfl / (2 sum_i D_i / h_i^2), capped by ``max_dt``; inf if nothing diffuses."""
    _check_dims(f, cfg.m)
    D = diffusivity(f, cfg)
    rate = 2.0 * float(np.sum(D / np.asarray(f.grid.spacing) ** 2))
    cap = math.inf if cfg.max_dt is None else cfg.max_dt
    if rate == 0.0:
        return cap
    return min(cfg.cfl_safety / rate, cap)


def _boundary_flux(st: _kernels.Stencil, grid: Grid, dt: float) -> float:
    """Mass leaving through the outer faces during one step (diffusive part)."""
    vp = st.padded
    total = 0.0
    for i in range(grid.N):
        sl = [slice(1, -1)] * grid.N
        out = 0.0
        for edge, ghost in ((1, 0), (-2, -1)):
            sl[i] = edge
            we = st.w_of(vp[tuple(sl)], i)
            sl[i] = ghost
            wg = st.w_of(vp[tuple(sl)], i)
            out += float(np.sum(we - wg))
        total += out / grid.spacing[i] ** 2
    return total * dt * grid.cell_volume


def _dissipation(st: _kernels.Stencil, grid: Grid) -> tuple[float, ...]:
    """sum over faces along axis i of |D_i (u^{m_i})|^2 times cell volume."""
    out = []
    for i in range(grid.N):
        w = st.w_padded(i)
        sl = [slice(1, -1)] * grid.N
        sl[i] = slice(None)
        d = np.diff(w[tuple(sl)], axis=i) / grid.spacing[i]
        out.append(float(np.sum(d * d)) * grid.cell_volume)
    return tuple(out)


def step(f: Field, cfg: SolverConfig, dt: float, energy: bool = False) -> tuple[Field, StepReport]:
    """Advance one explicit step; raises CFLError if ``dt`` exceeds ``stable_dt``."""
    limit = stable_dt(f, cfg)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"dt = {dt:.6g} exceeds the stable step {limit:.6g}")
    g = f.grid
    st = _stencil(g, cfg.m, cfg.epsilon, cfg.ghost)
    mass_before = total_mass(f)
    new = st.apply(f.values, dt).copy()
    flux = _boundary_flux(st, g, dt)
    diss = _dissipation(st, g) if energy else None
    neg = new < 0
    clamp = 0.0
    if neg.any():
        clamp = -float(new[neg].sum()) * g.cell_volume
        new[neg] = 0.0
    out = Field(g, new, f.time + dt)
    rep = StepReport(
        dt_used=dt,
        mass_before=mass_before,
        mass_after=total_mass(out),
        max_value=out.peak,
        boundary_flux=flux,
        clamp_mass=clamp,
        dissipation=diss,
    )
    return out, rep


def _snap(t: float, target: float) -> bool:
    return abs(target - t) <= 1e-13 * max(1.0, abs(target))


def evolve(
    f: Field,
    cfg: SolverConfig,
    t_end: float,
    checkpoints: Iterable[float] = (),
    callback: Callable[[Field], None] | None = None,
    on_step: Callable[[Field, StepReport], None] | None = None,
    energy: bool = False,
    warn_flux: bool = True,
) -> Field:
    """Step adaptively to ``t_end``, landing exactly on every checkpoint.

    ``callback(field)`` fires at each checkpoint (including ``t_end`` if it is
    listed); ``on_step(field, report)`` after every step.
    """
    if t_end < f.time:
        raise ValueError("t_end precedes the field time")
    marks = sorted(t for t in set(checkpoints) if f.time <= t <= t_end)
    cur = f
    mass0 = total_mass(f)
    out_flux = 0.0
    k = 0
    while k < len(marks) and _snap(cur.time, marks[k]):
        if callback:
            callback(cur)
        k += 1
    while not _snap(cur.time, t_end) and cur.time < t_end:
        target = marks[k] if k < len(marks) else t_end
        dt = min(stable_dt(cur, cfg), target - cur.time)
        cur, rep = step(cur, cfg, dt, energy=energy)
        out_flux += rep.boundary_flux
        if _snap(cur.time, target):
            cur.time = target
        if on_step:
            on_step(cur, rep)
        while k < len(marks) and _snap(cur.time, marks[k]):
            if callback:
                callback(cur)
            k += 1
    if warn_flux and mass0 > 0 and abs(out_flux) >= 1e-8 * mass0:
        warnings.warn(
            f"boundary flux {out_flux:.3e} exceeds 1e-8 of the mass; enlarge the box",
            stacklevel=2,
        )
    return cur


@dataclass
class ContractionTrace:
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    tolerance: float = 0.0

    @property
    def max_increase(self) -> float:
        v = np.asarray(self.values)
        return float(np.max(np.diff(v))) if v.size > 1 else 0.0

    @property
    def violated(self) -> bool:
        return self.max_increase > self.tolerance


def positive_part_l1(a: Field, b: Field) -> float:
    return float(np.sum(np.maximum(a.values - b.values, 0.0))) * a.grid.cell_volume


def compare_evolutions(
    f1: Field,
    f2: Field,
    cfg: SolverConfig,
    t_end: float,
    checkpoints: Sequence[float] | None = None,
) -> ContractionTrace:
    """Evolve both fields with a shared dt and trace int (u1 - u2)_+."""
    if f1.grid != f2.grid:
        raise GridMismatchError("compare_evolutions needs both fields on the same grid")
    if checkpoints is None:
        checkpoints = np.linspace(f1.time, t_end, 11)
    marks = sorted(set(float(t) for t in checkpoints) | {t_end})
    tr = ContractionTrace(tolerance=1e-10 * max(total_mass(f1), total_mass(f2)))
    a, b = f1.copy(), f2.copy()
    tr.times.append(a.time)
    tr.values.append(positive_part_l1(a, b))
    k = 0
    while k < len(marks) and _snap(a.time, marks[k]):
        k += 1
    while k < len(marks):
        dt = min(stable_dt(a, cfg), stable_dt(b, cfg), marks[k] - a.time)
        a, _ = step(a, cfg, dt)
        b, _ = step(b, cfg, dt)
        if _snap(a.time, marks[k]):
            a.time = b.time = marks[k]
            tr.times.append(a.time)
            tr.values.append(positive_part_l1(a, b))
            k += 1
    return tr
