"""Positivity sets, free boundaries and their geometry.

Masks live on the cell centres of a grid.  The set maps (linear expansion,
mass scaling, time scaling) are computed by nearest-cell pullback: a target
cell belongs to the image when the cell containing its preimage belongs to
the source mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .grid import Field, Grid, write_field_csv


class EmptySetError(ValueError):
    pass


class NotStarShapedError(ValueError):
    def __init__(self, rays: list[int], directions: np.ndarray):
        self.rays = rays
        shown = ", ".join(
            f"#{k} ({', '.join(f'{x:.3f}' for x in directions[k])})" for k in rays[:12]
        )
        more = "" if len(rays) <= 12 else f" and {len(rays) - 12} more"
        super().__init__(f"mask is not star-shaped about the origin along rays {shown}{more}")


@dataclass(frozen=True, eq=False)
class SupportSet:
    grid: Grid
    mask: np.ndarray
    threshold: float = 0.0

    @property
    def empty(self) -> bool:
        return not bool(self.mask.any())

    @property
    def area(self) -> float:
        """Measure of the union of the mask cells."""
        return float(self.mask.sum()) * self.grid.cell_volume

    def points(self) -> np.ndarray:
        """Centres of the mask cells, shape (k, N)."""
        return _centres(self.grid)[self.mask]

    def __le__(self, other: "SupportSet") -> bool:
        _same_grid(self, other)
        return bool(np.all(~self.mask | other.mask))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.mask, other.mask))

    def as_field(self) -> Field:
        return Field(self.grid, self.mask.astype(float))


def _same_grid(a: SupportSet, b: SupportSet) -> None:
    if a.grid != b.grid:
        raise ValueError("support sets live on different grids")


def _centres(g: Grid) -> np.ndarray:
    return np.stack(np.meshgrid(*[g.centers(i) for i in range(g.N)], indexing="ij"), axis=-1)


def default_threshold(f: Field) -> float:
    return max(1e-10, 1e-6 * f.peak)


def extract_support(f: Field, threshold: float | None = None) -> SupportSet:
    """Cells with value > threshold (default max(1e-10, 1e-6 * peak))."""
    if threshold is None:
        threshold = default_threshold(f)
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return SupportSet(f.grid, f.values > threshold, float(threshold))


def boundary_cells(S: SupportSet) -> SupportSet:
    """Mask cells with a face neighbour outside the mask (or outside the grid)."""
    inner = ndimage.binary_erosion(S.mask, structure=ndimage.generate_binary_structure(S.grid.N, 1), border_value=0)
    return SupportSet(S.grid, S.mask & ~inner, S.threshold)


# -- Hausdorff distance ---------------------------------------------------------

def _directed(A: SupportSet, B: SupportSet) -> float:
    """sup over centres of A of the distance to the nearest centre of B."""
    if A.grid == B.grid:
        # exact Euclidean distance transform of the complement of B
        dist = ndimage.distance_transform_edt(~B.mask, sampling=A.grid.spacing)
        return float(dist[A.mask].max())
    tree = cKDTree(B.points())
    d, _ = tree.query(A.points())
    return float(d.max())


def hausdorff(A: SupportSet, B: SupportSet) -> float:
    """max(sup_a inf_b |a-b|, sup_b inf_a |a-b|) over cell centres."""
    if A.empty or B.empty:
        raise EmptySetError("Hausdorff distance of an empty mask")
    return max(_directed(A, B), _directed(B, A))


def hausdorff_bruteforce(A: SupportSet, B: SupportSet) -> float:
    """Pairwise version over boundary cells; slow, kept as a cross-check."""
    if A.empty or B.empty:
        raise EmptySetError("Hausdorff distance of an empty mask")
    pa = boundary_cells(A).points()
    pb = boundary_cells(B).points()
    qa, qb = A.points(), B.points()

    def directed(p, q, inside):
        # points of p inside the other set are at distance 0
        out = p[~inside]
        if out.size == 0:
            return 0.0
        d = np.sqrt(((out[:, None, :] - q[None, :, :]) ** 2).sum(-1)).min(axis=1)
        return float(d.max())

    ia = _contains(B, qa)
    ib = _contains(A, qb)
    # the sup over A is attained on cells of A outside B; the inf over B on B's boundary
    return max(directed(qa, pb, ia), directed(qb, pa, ib))


def _contains(S: SupportSet, pts: np.ndarray) -> np.ndarray:
    idx, inside = S.grid.index_of(pts)
    hit = S.mask[tuple(idx[:, i] for i in range(S.grid.N))]
    return hit & inside


# -- radius function --------------------------------------------------------------

def default_directions(N: int, count: int | None = None) -> np.ndarray:
    if N == 1:
        return np.array([[1.0], [-1.0]])
    if N == 2:
        n = count or 360
        th = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if N == 3:
        d = np.array([v for v in np.ndindex(3, 3, 3) if v != (1, 1, 1)], dtype=float) - 1.0
        return d / np.linalg.norm(d, axis=1, keepdims=True)
    raise ValueError("directions are provided for N <= 3")


@dataclass(frozen=True)
class RadiusFn:
    directions: np.ndarray
    radii: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        d = self.directions
        if d.shape[1] != 2:
            raise ValueError("angles are defined for N = 2")
        return np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)

    @property
    def spread(self) -> float:
        return float(self.radii.max() - self.radii.min())

    def along_axis(self, axis: int, sign: int = 1) -> float:
        target = np.zeros(self.directions.shape[1])
        target[axis] = sign
        k = int(np.argmax(self.directions @ target))
        return float(self.radii[k])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        N = self.directions.shape[1]
        with path.open("w") as fh:
            if N == 2:
                fh.write("angle,R\n")
                for a, r in zip(self.angles, self.radii):
                    fh.write(f"{a:.17g},{r:.17g}\n")
            else:
                cols = ",".join(f"e{i + 1}" for i in range(N))
                fh.write(f"{cols},R\n")
                for d, r in zip(self.directions, self.radii):
                    fh.write(",".join(f"{x:.17g}" for x in d) + f",{r:.17g}\n")
        return path


def _exit_distance(g: Grid, idx: np.ndarray, e: np.ndarray) -> float:
    """Distance from the origin at which the ray along e leaves cell idx."""
    best = math.inf
    for i in range(g.N):
        if e[i] == 0:
            continue
        lo = -g.half_width[i] + idx[i] * g.spacing[i]
        face = lo + g.spacing[i] if e[i] > 0 else lo
        best = min(best, face / e[i])
    return best


def radius_function(S: SupportSet, directions: np.ndarray | None = None, tolerance: int = 1) -> RadiusFn:
    """R(e) = largest r whose cell (containing r e) is in the mask.

    Rays are marched at step min(h)/2 up to the box boundary.  A ray whose
    mask is not a prefix (more than ``tolerance`` mask cells after the first
    miss) marks the set as not star-shaped.
    """
    if S.empty:
        raise EmptySetError("radius function of an empty mask")
    g = S.grid
    dirs = default_directions(g.N) if directions is None else np.asarray(directions, dtype=float)
    ds = 0.5 * min(g.spacing)
    rmax = math.sqrt(sum(L * L for L in g.half_width))
    r = np.arange(0.0, rmax + ds, ds)
    radii = np.zeros(len(dirs))
    bad: list[int] = []
    for k, e in enumerate(dirs):
        pts = r[:, None] * e[None, :]
        idx, inside = g.index_of(pts)
        idx, pts = idx[inside], pts[inside]
        hit = S.mask[tuple(idx[:, i] for i in range(g.N))]
        if not hit.any():
            bad.append(k)
            continue
        miss = np.flatnonzero(~hit)
        if miss.size:
            after = idx[miss[0]:][hit[miss[0]:]]
            if len({tuple(c) for c in after}) > tolerance:
                bad.append(k)
        last = idx[np.flatnonzero(hit)[-1]]
        radii[k] = _exit_distance(g, last, e)
    if bad:
        raise NotStarShapedError(bad, dirs)
    return RadiusFn(dirs, radii)


# -- set maps -------------------------------------------------------------------

def _pullback(S: SupportSet, factors: np.ndarray, target: Grid | None) -> SupportSet:
    """Image of S under z_i = factors_i * y_i, by nearest-cell pullback."""
    g = target or S.grid
    pts = _centres(g) / np.asarray(factors)
    idx, inside = S.grid.index_of(pts)
    hit = S.mask[tuple(idx[..., i] for i in range(S.grid.N))] & inside
    return SupportSet(g, hit, S.threshold)


def expand_linear(S: SupportSet, lam: float, target: Grid | None = None) -> SupportSet:
    """E_lambda: points y with y / lambda in S."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return _pullback(S, np.full(S.grid.N, lam), target)


def scale_mass_set(S: SupportSet, k: float, nu: Sequence[float], target: Grid | None = None) -> SupportSet:
    """Image under z_i = k^{nu_i} y_i."""
    if k <= 0:
        raise ValueError("k must be positive")
    return _pullback(S, float(k) ** np.asarray(nu, dtype=float), target)


def scale_time_set(S: SupportSet, t: float, a: Sequence[float], target: Grid | None = None) -> SupportSet:
    """Image under x_i = t^{a_i} y_i."""
    if t <= 0:
        raise ValueError("t must be positive")
    return _pullback(S, float(t) ** np.asarray(a, dtype=float), target)


@dataclass
class SandwichReport:
    eps: float
    constants: tuple[float, float, float, float]
    mass_lower: bool
    mass_upper: bool
    time_lower: bool
    time_upper: bool
    ordered: bool

    @property
    def passed(self) -> bool:
        return self.ordered and self.mass_lower and self.mass_upper and self.time_lower and self.time_upper


def sandwich_constants(
    S: SupportSet,
    eps: float,
    nu: Sequence[float],
    a: Sequence[float],
    c: Sequence[float] | None = None,
    target: Grid | None = None,
) -> SandwichReport:
    """Check E_{1+c1 eps} S <= S1_{1+eps} S <= E_{1+c2 eps} S and the analogue with a_i.

    Defaults: c1 = 0.9 min nu, c2 = 1.1 max nu, c3 = 0.9 min a, c4 = 1.1 max a
    (scaled up for exponents above one, where (1+eps)^p is convex).
    """
    nu = np.asarray(nu, dtype=float)
    a = np.asarray(a, dtype=float)
    if c is None:
        def hi(p):
            return 1.1 * p.max() * max(1.0, (1 + eps) ** (p.max() - 1)) if eps > 0 else 1.1 * p.max()
        c = (0.9 * nu.min(), hi(nu), 0.9 * a.min(), hi(a))
    c1, c2, c3, c4 = (float(x) for x in c)
    ordered = c1 < nu.min() <= nu.max() < c2 and c3 < a.min() <= a.max() < c4
    k = 1.0 + eps
    m1 = scale_mass_set(S, k, nu, target)
    t2 = scale_time_set(S, k, a, target)
    return SandwichReport(
        eps=eps,
        constants=(c1, c2, c3, c4),
        mass_lower=expand_linear(S, 1 + c1 * eps, target) <= m1,
        mass_upper=m1 <= expand_linear(S, 1 + c2 * eps, target),
        time_lower=expand_linear(S, 1 + c3 * eps, target) <= t2,
        time_upper=t2 <= expand_linear(S, 1 + c4 * eps, target),
        ordered=ordered,
    )


def write_mask_csv(S: SupportSet, path: str | Path) -> Path:
    return write_field_csv(S.as_field(), path)
