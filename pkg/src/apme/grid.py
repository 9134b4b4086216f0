"""Cell-centred tensor-product grids on symmetric boxes, and fields on them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Box prod_i [-L_i, L_i] split into n_i equal cells per axis (n_i even)."""

    half_width: tuple[float, ...]
    cells: tuple[int, ...]

    def __init__(self, half_width: Sequence[float] | float, cells: Sequence[int] | int, N: int | None = None):
        hw = np.atleast_1d(np.asarray(half_width, dtype=float))
        nc = np.atleast_1d(np.asarray(cells, dtype=int))
        if N is None:
            N = max(hw.size, nc.size)
        hw = np.broadcast_to(hw, (N,)) if hw.size == 1 else hw
        nc = np.broadcast_to(nc, (N,)) if nc.size == 1 else nc
        if hw.size != N or nc.size != N:
            raise ValueError("half_width and cells must have one entry per axis")
        if np.any(hw <= 0):
            raise ValueError("half widths must be positive")
        if np.any(nc < 8) or np.any(nc % 2):
            raise ValueError(f"cell counts must be even and >= 8, got {tuple(nc)}")
        object.__setattr__(self, "half_width", tuple(float(x) for x in hw))
        object.__setattr__(self, "cells", tuple(int(x) for x in nc))

    @property
    def N(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2.0 * L / n for L, n in zip(self.half_width, self.cells))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self, axis: int) -> np.ndarray:
        L, n = self.half_width[axis], self.cells[axis]
        h = 2.0 * L / n
        # symmetric construction keeps c[j] == -c[n-1-j] exactly
        half = (np.arange(n // 2) + 0.5) * h
        return np.concatenate([-half[::-1], half])

    def faces(self, axis: int) -> np.ndarray:
        L, n = self.half_width[axis], self.cells[axis]
        h = 2.0 * L / n
        half = np.arange(n // 2 + 1) * h
        return np.concatenate([-half[:0:-1], half])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.centers(i) for i in range(self.N)], indexing="ij", sparse=True)

    def index_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell index containing each point (..., N); second value flags points inside the box."""
        points = np.asarray(points, dtype=float)
        idx = np.empty(points.shape, dtype=np.int64)
        inside = np.ones(points.shape[:-1], dtype=bool)
        for i in range(self.N):
            L, h, n = self.half_width[i], self.spacing[i], self.cells[i]
            k = np.floor((points[..., i] + L) / h).astype(np.int64)
            inside &= (k >= 0) & (k < n)
            idx[..., i] = np.clip(k, 0, n - 1)
        return idx, inside

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.half_width, tuple(n * factor for n in self.cells))

    def describe(self) -> dict:
        return {"N": self.N, "half_width": list(self.half_width), "cells": list(self.cells)}


@dataclass
class Field:
    """Nonnegative density sampled at the cell centres of ``grid`` at ``time``.

    For fields in self-similar variables ``time`` holds the rescaled time tau.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    mass_deficit: float = 0.0
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def copy(self, values: np.ndarray | None = None, time: float | None = None) -> "Field":
        return Field(
            self.grid,
            self.values.copy() if values is None else values,
            self.time if time is None else time,
        )

    @property
    def peak(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


def zeros(g: Grid, t: float = 0.0) -> Field:
    return Field(g, np.zeros(g.shape), t)


def total_mass(f: Field) -> float:
    return float(np.sum(f.values)) * f.grid.cell_volume


def lp_norm(f: Field | np.ndarray, p: float, grid: Grid | None = None) -> float:
    """Discrete L^p norm with cell-volume weights; p = inf gives the max modulus."""
    if isinstance(f, Field):
        vals, grid = f.values, f.grid
    else:
        vals = np.asarray(f)
    if not (p >= 1):
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(a.sum()) * grid.cell_volume
    if p == 2:
        return math.sqrt(float(np.sum(a * a)) * grid.cell_volume)
    return (float(np.sum(a**p)) * grid.cell_volume) ** (1.0 / p)


def _ghost_shell_points(g: Grid) -> np.ndarray:
    """Centres of the ring of cells just outside the box."""
    outer = Grid([L + h for L, h in zip(g.half_width, g.spacing)], [n + 2 for n in g.cells])
    pts = np.stack(np.meshgrid(*[outer.centers(i) for i in range(g.N)], indexing="ij"), axis=-1)
    shell = np.zeros(outer.shape, dtype=bool)
    for ax in range(g.N):
        sl = [slice(None)] * g.N
        sl[ax] = 0
        shell[tuple(sl)] = True
        sl[ax] = -1
        shell[tuple(sl)] = True
    return pts[shell]


def sample(fn: Callable[..., np.ndarray], g: Grid, t: float = 0.0) -> Field:
    """Evaluate ``fn(*coords)`` at cell centres; negative values clamp to 0.

    If ``fn`` is positive just outside the box the result is flagged as
    truncated and ``mass_deficit`` estimates the mass lost (from a sample on
    a doubled box with the same spacing).
    """
    vals = np.asarray(fn(*g.mesh()), dtype=float)
    vals = np.broadcast_to(vals, g.shape).copy()
    np.maximum(vals, 0.0, out=vals)
    f = Field(g, vals, t)
    shell = _ghost_shell_points(g)
    outside = np.asarray(fn(*[shell[:, i] for i in range(g.N)]), dtype=float)
    if np.any(outside > 0):
        big = Grid([2 * L for L in g.half_width], [2 * n for n in g.cells])
        big_vals = np.maximum(np.asarray(fn(*big.mesh()), dtype=float), 0.0)
        f.truncated = True
        f.mass_deficit = max(float(big_vals.sum()) * big.cell_volume - total_mass(f), 0.0)
        warnings.warn(
            f"sampled function extends beyond the box; estimated mass deficit {f.mass_deficit:.3e}",
            stacklevel=2,
        )
    return f


def plateau_fractions(g: Grid, radius: Sequence[float] | float, center: Sequence[float] | None = None) -> np.ndarray:
    """Fraction of each cell covered by the box prod [c_i - r_i, c_i + r_i]."""
    r = np.broadcast_to(np.asarray(radius, dtype=float), (g.N,))
    c = np.zeros(g.N) if center is None else np.asarray(center, dtype=float)
    frac = np.ones(g.shape)
    for i in range(g.N):
        fc = g.faces(i)
        lo = np.clip(fc[:-1], c[i] - r[i], c[i] + r[i])
        hi = np.clip(fc[1:], c[i] - r[i], c[i] + r[i])
        shape = [1] * g.N
        shape[i] = -1
        frac = frac * ((hi - lo) / g.spacing[i]).reshape(shape)
    return frac


# -- CSV serialisation ------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_header(f: Field) -> str:
    g = f.grid
    return (
        f"# N={g.N} L={','.join(_fmt(L) for L in g.half_width)} "
        f"cells={','.join(str(n) for n in g.cells)} t={_fmt(f.time)}"
    )


def write_field_csv(f: Field, path: str | Path) -> Path:
    """Header line then one ``i1,...,iN,value`` row per nonzero cell."""
    path = Path(path)
    idx = np.argwhere(f.values != 0)
    vals = f.values[f.values != 0]
    with path.open("w") as fh:
        fh.write(field_header(f) + "\n")
        for ii, v in zip(idx, vals):
            fh.write(",".join(str(int(k)) for k in ii) + "," + _fmt(v) + "\n")
    return path


def read_field_csv(path: str | Path) -> Field:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing field header")
        kv = dict(tok.split("=", 1) for tok in header[1:].split())
        N = int(kv["N"])
        L = [float(x) for x in kv["L"].split(",")]
        cells = [int(x) for x in kv["cells"].split(",")]
        g = Grid(L, cells, N=N)
        vals = np.zeros(g.shape)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            vals[tuple(int(k) for k in parts[:N])] = float(parts[N])
    return Field(g, vals, float(kv["t"]))


def pad_field(f: Field, extra: Sequence[int] | int) -> Field:
    """Embed ``f`` in a larger grid with the same spacing (``extra`` cells added per side)."""
    g = f.grid
    ex = np.broadcast_to(np.asarray(extra, dtype=int), (g.N,))
    if np.any(ex < 0):
        raise ValueError("extra cells must be >= 0")
    big = Grid([L + k * h for L, k, h in zip(g.half_width, ex, g.spacing)], [n + 2 * k for n, k in zip(g.cells, ex)])
    vals = np.pad(f.values, [(k, k) for k in ex])
    return Field(big, vals, f.time)
