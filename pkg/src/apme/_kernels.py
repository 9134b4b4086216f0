"""Compiled explicit update for  v_t = sum_i [ (w_i)_{y_i y_i} + c_i (y_i v)_{y_i} ].

Fields of dimension N <= 3 are viewed as 3-d arrays with leading singleton
axes, padded by one ghost layer on each active axis.  The caller fills the
ghost layers; the kernel only reads them.

Per active axis ``a`` the update adds

    dt / h_a^2 * (w_a[j-1] - 2 w_a[j] + w_a[j+1]),   w_a = (v + eps)^m_a - eps^m_a

and, when a drift is present, minus ``dt`` times the difference of the
upwinded face fluxes ``F_f = -c_a y_f v_up / h_a`` (``up`` is the outer cell,
the velocity -c_a y points towards the origin).  Every cell is written
independently, so the result does not depend on the thread count.
"""
from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange


@njit(inline="always", cache=True)
def _pw(x, m, mi):
    if mi == 1:
        return x
    if mi == 2:
        return x * x
    if mi == 3:
        return x * x * x
    if mi == 4:
        y = x * x
        return y * y
    return x**m


def _advance_impl(vp, out, w, dt, ih2, m, mint, eps, epsm, act, drift, up0, up1, up2):
    s0, s1, s2 = vp.shape
    o0 = 1 if act[0] else 0
    o1 = 1 if act[1] else 0
    o2 = 1 if act[2] else 0
    n0 = s0 - 2 * o0
    n1 = s1 - 2 * o1
    n2 = s2 - 2 * o2
    for i in range(n0):
        for j in prange(n1):
            for k in range(n2):
                out[i, j, k] = vp[i + o0, j + o1, k + o2]
    for a in range(3):
        if not act[a]:
            continue
        ma = m[a]
        mi = mint[a]
        em = epsm[a]
        for i in range(s0):
            for j in prange(s1):
                for k in range(s2):
                    w[i, j, k] = _pw(vp[i, j, k] + eps, ma, mi) - em
        c = dt * ih2[a]
        if a == 0:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        out[i, j, k] += c * (w[i, j + o1, k + o2] - 2.0 * w[i + 1, j + o1, k + o2] + w[i + 2, j + o1, k + o2])
        elif a == 1:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        out[i, j, k] += c * (w[i + o0, j, k + o2] - 2.0 * w[i + o0, j + 1, k + o2] + w[i + o0, j + 2, k + o2])
        else:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        out[i, j, k] += c * (w[i + o0, j + o1, k] - 2.0 * w[i + o0, j + o1, k + 1] + w[i + o0, j + o1, k + 2])
        if not drift:
            continue
        # up*[0, f]: weight of the cell above face f, up*[1, f]: of the cell below
        if a == 0:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        J = j + o1
                        K = k + o2
                        fh = up0[0, i + 1] * vp[i + 2, J, K] + up0[1, i + 1] * vp[i + 1, J, K]
                        fl = up0[0, i] * vp[i + 1, J, K] + up0[1, i] * vp[i, J, K]
                        out[i, j, k] -= dt * (fh - fl)
        elif a == 1:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        I = i + o0
                        K = k + o2
                        fh = up1[0, j + 1] * vp[I, j + 2, K] + up1[1, j + 1] * vp[I, j + 1, K]
                        fl = up1[0, j] * vp[I, j + 1, K] + up1[1, j] * vp[I, j, K]
                        out[i, j, k] -= dt * (fh - fl)
        else:
            for i in range(n0):
                for j in prange(n1):
                    for k in range(n2):
                        I = i + o0
                        J = j + o1
                        fh = up2[0, k + 1] * vp[I, J, k + 2] + up2[1, k + 1] * vp[I, J, k + 1]
                        fl = up2[0, k] * vp[I, J, k + 1] + up2[1, k] * vp[I, J, k]
                        out[i, j, k] -= dt * (fh - fl)


_advance_serial = njit(cache=True)(_advance_impl)
_advance_parallel = njit(cache=True, parallel=True)(_advance_impl)


def thread_count() -> int:
    env = os.environ.get("APME_THREADS")
    n = numba.config.NUMBA_NUM_THREADS
    if env:
        n = max(1, min(int(env), n))
    return n


def advance(vp, out, w, dt, ih2, m, mint, eps, epsm, act, drift, up):
    n = thread_count()
    if n > 1:
        numba.set_num_threads(n)
        fn = _advance_parallel
    else:
        fn = _advance_serial
    fn(vp, out, w, dt, ih2, m, mint, eps, epsm, act, drift, up[0], up[1], up[2])


class Stencil:
    """Preallocated buffers and per-axis constants for one grid / operator.

    ``lower`` per axis is either ``"dirichlet"`` (ghost value ``ghost``) or
    ``"reflect"`` (mirror; used when only the nonnegative orthant is stored).
    """

    def __init__(self, shape, spacing, m, eps=0.0, ghost=0.0, drift=None, faces=None, lower=None):
        N = len(shape)
        if N > 3:
            raise ValueError("stencil supports N <= 3")
        self.N = N
        self.off = 3 - N
        self.shape = tuple(shape)
        self.eps = float(eps)
        self.ghost = float(ghost)
        self.lower = tuple(lower) if lower is not None else ("dirichlet",) * N
        self.act = np.array([False] * self.off + [True] * N)
        self.m = np.ones(3)
        self.m[self.off:] = m
        self.mint = np.zeros(3, dtype=np.int64)
        for a in range(3):
            if float(self.m[a]).is_integer() and 1 <= self.m[a] <= 4:
                self.mint[a] = int(self.m[a])
        self.epsm = np.where(self.act, self.eps**self.m, 0.0) if eps > 0 else np.zeros(3)
        self.ih2 = np.zeros(3)
        self.ih2[self.off:] = 1.0 / np.asarray(spacing, dtype=float) ** 2
        shape3 = (1,) * self.off + self.shape
        self.pshape = tuple(s + 2 if self.act[a] else 1 for a, s in enumerate(shape3))
        self.vp = np.zeros(self.pshape)
        self.w = np.zeros(self.pshape)
        self.out = np.zeros(shape3)
        self.inner = tuple(slice(1, -1) if self.act[a] else slice(None) for a in range(3))
        self.drift = drift is not None and np.any(np.asarray(drift) != 0)
        self.up = [np.zeros((2, 1)) for _ in range(3)]
        if self.drift:
            for i in range(N):
                yf = np.asarray(faces[i], dtype=float)
                ci = drift[i] / spacing[i]
                self.up[self.off + i] = np.stack([np.where(yf > 0, -ci * yf, 0.0), np.where(yf <= 0, -ci * yf, 0.0)])

    def load(self, values: np.ndarray) -> None:
        vp = self.vp
        vp[self.inner] = values.reshape(self.out.shape)
        for i in range(self.N):
            a = self.off + i
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = 0
            hi[a] = -1
            if self.lower[i] == "reflect":
                src = [slice(None)] * 3
                src[a] = 1
                vp[tuple(lo)] = vp[tuple(src)]
            else:
                vp[tuple(lo)] = self.ghost
            vp[tuple(hi)] = self.ghost

    def apply(self, values: np.ndarray, dt: float) -> np.ndarray:
        self.load(values)
        advance(self.vp, self.out, self.w, dt, self.ih2, self.m, self.mint, self.eps, self.epsm, self.act, self.drift, self.up)
        return self.out.reshape(self.shape)

    @property
    def padded(self) -> np.ndarray:
        """The loaded padded array in N-d shape."""
        return self.vp.reshape(self.pshape[self.off:])

    def w_of(self, arr: np.ndarray, axis: int) -> np.ndarray:
        a = self.off + axis
        return (arr + self.eps) ** self.m[a] - self.epsm[a]

    def w_padded(self, axis: int) -> np.ndarray:
        return self.w_of(self.padded, axis)
