"""Self-similar constants of the anisotropic porous medium equation.

Everything here is a closed-form function of the dimension N and the
exponents m_1..m_N:

    m_bar = mean(m)
    alpha = N / (N (m_bar - 1) + 2)
    sigma_i = 1/N + (m_bar - m_i) / 2
    a_i = alpha * sigma_i
    nu_i = (m_i - 1) / 2
    beta = 1 + sum(nu_i) = (N/2) (m_bar - m_c),   m_c = (N - 2)_+ / N
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

H2_SLACK = 1e-12


class HypothesisError(ValueError):
    """Raised when exponents violate the slow-diffusion hypotheses."""

    def __init__(self, hypothesis: str, index: int, value: float, bound: float):
        self.hypothesis = hypothesis
        self.index = index
        self.value = value
        self.bound = bound
        if hypothesis == "H1":
            msg = f"H1 violated: m[{index}] = {value:g} must be > 1"
        else:
            msg = f"H2 violated: m[{index}] = {value:g} must be < m_bar + 2/N = {bound:.6g}"
        super().__init__(msg)


@dataclass(frozen=True)
class MediumParams:
    m: tuple[float, ...]

    def __init__(self, m: Sequence[float]):
        object.__setattr__(self, "m", tuple(float(x) for x in np.atleast_1d(m)))
        if len(self.m) == 0:
            raise ValueError("need at least one exponent")

    @property
    def N(self) -> int:
        return len(self.m)

    @property
    def m_bar(self) -> float:
        return float(np.mean(self.m))

    def violations(self) -> list[HypothesisError]:
        """All H1/H2 violations, in index order (H1 before H2 for each index)."""
        out = []
        bound = self.m_bar + 2.0 / self.N
        for i, mi in enumerate(self.m):
            if not mi > 1.0:
                out.append(HypothesisError("H1", i, mi, 1.0))
            if not mi < bound - H2_SLACK:
                out.append(HypothesisError("H2", i, mi, bound))
        return out

    def validate(self) -> "MediumParams":
        bad = self.violations()
        if bad:
            raise bad[0]
        return self


@dataclass(frozen=True)
class Exponents:
    N: int
    m: tuple[float, ...]
    m_bar: float
    alpha: float
    sigma: tuple[float, ...]
    a: tuple[float, ...]
    nu: tuple[float, ...]
    beta: float
    m_c: float

    @property
    def params(self) -> MediumParams:
        return MediumParams(self.m)


def derive_exponents(p: MediumParams | Sequence[float]) -> Exponents:
    """Compute all self-similar exponents; raises HypothesisError on bad input."""
    if not isinstance(p, MediumParams):
        p = MediumParams(p)
    p.validate()
    N = p.N
    m = np.asarray(p.m)
    m_bar = float(m.mean())
    alpha = N / (N * (m_bar - 1.0) + 2.0)
    sigma = 1.0 / N + (m_bar - m) / 2.0
    nu = (m - 1.0) / 2.0
    return Exponents(
        N=N,
        m=p.m,
        m_bar=m_bar,
        alpha=alpha,
        sigma=tuple(float(s) for s in sigma),
        a=tuple(float(alpha * s) for s in sigma),
        nu=tuple(float(v) for v in nu),
        beta=1.0 + float(nu.sum()),
        m_c=max(N - 2, 0) / N,
    )


def check_scaling_identity(e: Exponents, rtol: float = 1e-12) -> bool:
    """True iff alpha (m_i - 1) + 2 a_i == 1 for every axis."""
    return all(
        abs(e.alpha * (mi - 1.0) + 2.0 * ai - 1.0) <= rtol
        for mi, ai in zip(e.m, e.a)
    )


def exponent_table(p: MediumParams | Sequence[float]) -> str:
    """Human-readable table of exponents plus the H1/H2 verdict."""
    if not isinstance(p, MediumParams):
        p = MediumParams(p)
    fmt = lambda xs: "(" + ", ".join(f"{x:.6g}" for x in xs) + ")"
    lines = [f"N      = {p.N}", f"m      = {fmt(p.m)}", f"m_bar  = {p.m_bar:.6g}"]
    bad = p.violations()
    if bad:
        lines += [f"verdict: FAIL  {err}" for err in bad]
        return "\n".join(lines)
    e = derive_exponents(p)
    lines += [
        f"alpha  = {e.alpha:.6g}",
        f"sigma  = {fmt(e.sigma)}",
        f"a      = {fmt(e.a)}",
        f"nu     = {fmt(e.nu)}",
        f"beta   = {e.beta:.6g}",
        f"m_c    = {e.m_c:.6g}",
        "verdict: PASS  (H1: m_i > 1; H2: m_i < m_bar + 2/N = "
        f"{p.m_bar + 2.0 / p.N:.6g})",
    ]
    return "\n".join(lines)
