"""Plain numpy reference implementations used as test oracles."""
import numpy as np


def reference_update(u, m, h, dt, eps=0.0, ghost=0.0, drift=None, faces=None, reflect_lower=False, outer_drift=False):
    """u + dt * sum_i [ D2_i w_i / h_i^2 - D_i(F_i) / h_i ], loops written out axis by axis.

    F_i at a face is -c_i y_f times the value in the outer (upwind) cell; the
    drift flux through the two outermost faces is dropped unless ``outer_drift``.
    """
    N = u.ndim
    out = u.astype(float).copy()
    for i in range(N):
        pad = [(0, 0)] * N
        pad[i] = (1, 1)
        up = np.pad(u, pad, constant_values=ghost)
        if reflect_lower:
            sl_dst = [slice(None)] * N
            sl_src = [slice(None)] * N
            sl_dst[i] = 0
            sl_src[i] = 1
            up[tuple(sl_dst)] = up[tuple(sl_src)]
        w = (up + eps) ** m[i] - (eps ** m[i] if eps > 0 else 0.0)
        n = u.shape[i]
        lo = np.take(w, range(0, n), axis=i)
        mid = np.take(w, range(1, n + 1), axis=i)
        hi = np.take(w, range(2, n + 2), axis=i)
        out += dt * (lo - 2 * mid + hi) / h[i] ** 2
        if drift is not None and drift[i] != 0:
            yf = np.asarray(faces[i], dtype=float)
            flux = np.zeros([n + 1 if k == i else s for k, s in enumerate(u.shape)])
            for f in range(n + 1):
                # cell f-1 lies below face f and cell f above it (padded indices f and f+1)
                cell = f + 1 if yf[f] > 0 else f
                val = np.take(up, cell, axis=i)
                sl = [slice(None)] * N
                sl[i] = f
                flux[tuple(sl)] = -drift[i] * yf[f] * val
            if not outer_drift:
                for f in (0, n):
                    sl = [slice(None)] * N
                    sl[i] = f
                    if not (reflect_lower and f == 0):
                        flux[tuple(sl)] = 0.0
            out -= dt * np.diff(flux, axis=i) / h[i]
    return out
