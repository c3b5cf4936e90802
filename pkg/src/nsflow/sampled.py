"""Exact flow of the frozen corner dynamics.

Freezing each orthant selection of an event-selected field at its corner
value yields a piecewise-constant field over the arrangement of surface
tangent planes.  Its flow is piecewise affine and computable in closed form
by event stepping, with no numerical integration: within an orthant the state
moves along a constant vector, and every plane-crossing time is a ratio of
two dot products.  The time-1 map of this system relative to the
through-corner trajectory *is* the corner derivative, which makes this
module the ground-truth oracle for :mod:`nsflow.bderiv`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import CornerModel, SignVector
from .errors import DegenerateDenominator

__all__ = ["SampledState", "sampled_flow", "time_to_impact_sampled", "rho_minus", "rho_plus"]

PLANE_ATOL = 1e-12


@dataclass(frozen=True)
class SampledState:
    """A point together with its orthant in the frozen dynamics.

    The orthant must agree with ``sign(eta (x - rho))`` up to the plane
    tolerance; points on a plane count as already crossed (+1).
    """

    x: np.ndarray
    b: SignVector

    @staticmethod
    def at(m: CornerModel, x: Sequence[float] | np.ndarray) -> "SampledState":
        """The consistent state at ``x``: orthant read off the plane values."""
        xa = np.asarray(x, dtype=float)
        vals = m.eta @ (xa - m.rho)
        signs = _orthant_signs(vals, _plane_tols(m, xa))
        return SampledState(x=xa, b=SignVector(tuple(signs)))


def rho_minus(m: CornerModel) -> np.ndarray:
    """Point half a time unit before the corner along the entry field."""
    return m.rho - 0.5 * m.gamma_vec(SignVector.minus_ones(m.n))


def rho_plus(m: CornerModel) -> np.ndarray:
    """Point half a time unit past the corner along the exit field."""
    return m.rho + 0.5 * m.gamma_vec(SignVector.plus_ones(m.n))


def _plane_tols(m: CornerModel, x: np.ndarray) -> np.ndarray:
    row_norms = np.linalg.norm(m.eta, axis=1)
    scale = max(1.0, float(np.linalg.norm(x - m.rho)))
    return PLANE_ATOL * np.maximum(1.0, row_norms * scale)

def _orthant_signs(vals: np.ndarray, tols: np.ndarray) -> list[int]:
    return [1 if v >= -t else -1 for v, t in zip(vals, tols)]


def sampled_flow(m: CornerModel, t: float, x0: Sequence[float] | np.ndarray) -> np.ndarray:
    """Exact time-``t`` flow of the frozen dynamics from ``x0`` (t >= 0).

    Event-steps from plane to plane: in the current orthant b the field is
    ``gamma(b)``; each uncrossed surface j is reached at
    ``s_j = -(eta_j . (x - rho)) / (eta_j . gamma(b))``, and the earliest
    crossing (ties to the smallest surface index) flips that sign.  Every
    surface value increases at rate at least f_min, so each surface is
    crossed at most once and the loop takes at most n steps.
    """
    m.require_valid()
    if t < 0.0:
        raise ValueError("sampled_flow is defined for t >= 0 only")
    x = np.array(x0, dtype=float)
    if x.shape != (m.d,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({m.d},)")

    vals = m.eta @ (x - m.rho)
    signs = _orthant_signs(vals, _plane_tols(m, x))
    remaining = float(t)

    while remaining > 0.0:
        b = SignVector(tuple(signs))
        g = m.gamma_vec(b)
        active = [j for j in range(m.n) if signs[j] < 0]
        if not active:
            return x + remaining * g
        s_best = None
        j_best = -1
        for j in active:
            den = float(m.eta[j] @ g)
            if den < m.f_min:
                raise DegenerateDenominator(
                    f"eta_{j + 1} . gamma({b}) = {den:.3g} below floor {m.f_min:.3g}"
                )
            s = -float(m.eta[j] @ (x - m.rho)) / den
            if s < 0.0:
                s = 0.0
            if s_best is None or s < s_best:
                s_best = s
                j_best = j
        if s_best >= remaining:
            return x + remaining * g
        x = x + s_best * g
        remaining -= s_best
        signs[j_best] = 1
        # surfaces reached within tolerance in the same step count as crossed
        vals = m.eta @ (x - m.rho)
        tols = _plane_tols(m, x)
        for j in range(m.n):
            if signs[j] < 0 and vals[j] >= -tols[j]:
                signs[j] = 1
    return x


def time_to_impact_sampled(m: CornerModel, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Per-surface times at which the frozen flow from ``x`` meets each plane.

    Surfaces already (weakly) crossed at ``x`` report time 0; the rest report
    the accumulated event-stepping time of their crossing, which is finite
    because every surface value increases at rate at least f_min.
    """
    m.require_valid()
    xa = np.array(x, dtype=float)
    vals = m.eta @ (xa - m.rho)
    signs = _orthant_signs(vals, _plane_tols(m, xa))
    tau = np.zeros(m.n)
    elapsed = 0.0

    while any(s < 0 for s in signs):
        b = SignVector(tuple(signs))
        g = m.gamma_vec(b)
        s_best = None
        j_best = -1
        for j in range(m.n):
            if signs[j] >= 0:
                continue
            den = float(m.eta[j] @ g)
            if den < m.f_min:
                raise DegenerateDenominator(
                    f"eta_{j + 1} . gamma({b}) = {den:.3g} below floor {m.f_min:.3g}"
                )
            s = max(0.0, -float(m.eta[j] @ (xa - m.rho)) / den)
            if s_best is None or s < s_best:
                s_best = s
                j_best = j
        xa = xa + s_best * g
        elapsed += s_best
        signs[j_best] = 1
        tau[j_best] = elapsed
        vals = m.eta @ (xa - m.rho)
        tols = _plane_tols(m, xa)
        for j in range(m.n):
            if signs[j] < 0 and vals[j] >= -tols[j]:
                signs[j] = 1
                tau[j] = elapsed
    return tau
