"""Brute-force verifiers and random model generation.

Everything here exists to check the fast corner algorithms against
independent computations: the exact event-stepped flow of the frozen
dynamics, exhaustive enumeration of per-piece saltation matrices, ordering of
impact times, and one-sided finite differences of integrated trajectories.
Verifiers return an :class:`OracleReport` rather than raising, so randomized
suites can aggregate failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bderiv import b_evaluate, saltation_matrix
from .core import (
    CornerModel,
    Permutation,
    PiecewiseField,
    SignVector,
    SmoothField,
    all_permutations,
    all_sign_vectors,
)
from .errors import CapExceeded
from .flow import (
    DEFAULT_STEPS,
    corner_flow_bderivative,
    flow_derivative_at_corner,
    integrate,
    _rk4_step,
)
from .sampled import rho_minus, rho_plus, sampled_flow, time_to_impact_sampled

__all__ = [
    "OracleReport",
    "random_corner_model",
    "lazy_corner_model",
    "random_linear_event_field",
    "enumerate_saltations",
    "verify_b_against_sampled",
    "verify_cone_partition",
    "verify_fd_convergence",
    "finite_difference_flow",
]

ENUMERATION_CAP = 8


@dataclass
class OracleReport:
    """Aggregated outcome of a randomized verification run."""

    name: str
    tolerance: float
    samples: int = 0
    max_abs_error: float = 0.0
    max_rel_error: float = 0.0
    failures: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, inp, expected: np.ndarray, actual: np.ndarray) -> None:
        self.samples += 1
        abs_err = float(np.max(np.abs(expected - actual))) if np.size(expected) else 0.0
        scale = max(
            1.0,
            float(np.max(np.abs(expected))) if np.size(expected) else 0.0,
            float(np.max(np.abs(actual))) if np.size(actual) else 0.0,
        )
        rel_err = abs_err / scale
        self.max_abs_error = max(self.max_abs_error, abs_err)
        self.max_rel_error = max(self.max_rel_error, rel_err)
        if rel_err > self.tolerance:
            self.failures.append((inp, np.asarray(expected).tolist(), np.asarray(actual).tolist()))

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "max_abs_error": self.max_abs_error,
            "max_rel_error": self.max_rel_error,
            "failures": len(self.failures),
            "ok": self.ok,
        }


def random_corner_model(
    rng: np.random.Generator,
    n: int,
    d: int,
    f_min: float = 1e-9,
    kernel_scale: float = 0.5,
    min_singular: float = 0.15,
) -> CornerModel:
    """Draw a transversal corner model with a full gamma table.

    Normals are unit-norm rows, redrawn until comfortably independent.  Each
    orthant limit is assembled in normal coordinates as 1 plus a uniform
    (-0.9, 2) bump, so every crossing rate is at least 0.1 by construction,
    plus an arbitrary kernel component; validation is still run afterwards.
    """
    if d < n:
        raise ValueError(f"need d >= n, got n={n}, d={d}")
    while True:
        eta = rng.normal(size=(n, d))
        eta /= np.linalg.norm(eta, axis=1, keepdims=True)
        sv = np.linalg.svd(eta, compute_uv=False)
        if sv[-1] >= min_singular:
            break
    gram_inv = np.linalg.inv(eta @ eta.T)
    lift = eta.T @ gram_inv  # maps desired normal-dots to a state vector
    kernel = _kernel_basis(eta)

    table: dict[SignVector, np.ndarray] = {}
    for b in all_sign_vectors(n):
        dots = 1.0 + rng.uniform(-0.9, 2.0, size=n)
        vec = lift @ dots
        if kernel.shape[1] and kernel_scale > 0.0:
            vec = vec + kernel @ rng.normal(scale=kernel_scale, size=kernel.shape[1])
        table[b] = vec

    rho = rng.normal(scale=0.5, size=d)
    model = CornerModel.create(rho=rho, eta=eta, gamma=table, f_min=f_min)
    model.require_valid()
    return model


def _kernel_basis(eta: np.ndarray) -> np.ndarray:
    _, sv, vt = np.linalg.svd(eta)
    return vt[eta.shape[0] :].T


def lazy_corner_model(seed: int, n: int, d: int, f_min: float = 1e-9) -> CornerModel:
    """Corner model with gamma computed on demand, for large-n benchmarks.

    Normals are orthonormal rows; the orthant limit is the row-space lift of
    normal-dots 1 + 0.45 (1 + sin(phase_i + 0.7 * u.b)), which pins every
    crossing rate inside [1.0, 1.9] structurally, so no table of size 2**n
    ever exists and validation can trust the construction.  The evaluation is
    deliberately plain Python at O(n d) per call, the same cost class as one
    pass of the evaluation loop it feeds.
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, n)))
    eta = np.ascontiguousarray(q.T)
    rho = rng.normal(scale=0.5, size=d)
    lift_rows = eta.T.tolist()  # orthonormal rows: lift of normal-dots is the transpose
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n).tolist()
    mix = rng.normal(size=n).tolist()
    from math import sin as _sin

    def gamma(b: SignVector) -> list[float]:
        phase = 0.0
        for u, s in zip(mix, b):
            phase += u * s
        dots = [1.0 + 0.45 * (1.0 + _sin(p + 0.7 * phase)) for p in phases]
        out = []
        for row in lift_rows:
            acc = 0.0
            for i in range(n):
                acc += row[i] * dots[i]
            out.append(acc)
        return out

    return CornerModel.create(rho=rho, eta=eta, gamma=gamma, f_min=f_min, presumed_valid=True)


def enumerate_saltations(m: CornerModel, cap: int = ENUMERATION_CAP) -> dict[Permutation, np.ndarray]:
    """All n! per-piece matrices via the ordered product formula."""
    if m.n > cap:
        raise CapExceeded(f"{m.n}! saltation matrices exceed cap {cap}!")
    return {sigma: saltation_matrix(m, sigma) for sigma in all_permutations(m.n)}


def safe_direction_scale(m: CornerModel, delta_rho: np.ndarray, margin: float = 0.4) -> float:
    """Scale factor under which the time-1 frozen flow from
    ``rho_minus + s*delta_rho`` crosses every surface.

    Two requirements: the start stays strictly before all surfaces, and every
    impact time stays within (0, 1).  The first gives a per-surface budget on
    normal components; the second is enforced by measuring the impact-time
    deviations once and rescaling, which is exact because impact times are
    linear in the perturbation within its crossing-order cone.
    """
    g_minus = m.gamma_vec(SignVector.minus_ones(m.n))
    budget = margin * 0.5 * (m.eta @ g_minus)
    intrusion = np.abs(m.eta @ delta_rho)
    with np.errstate(divide="ignore"):
        ratios = np.where(intrusion > 0.0, budget / np.maximum(intrusion, 1e-300), np.inf)
    s = float(min(1.0, ratios.min()))
    if s == 0.0 or not np.any(delta_rho):
        return s
    tau = time_to_impact_sampled(m, rho_minus(m) + s * delta_rho)
    dev = float(np.max(np.abs(tau - 0.5)))
    if dev > margin:
        s *= margin / dev
    return s


def verify_b_against_sampled(
    m: CornerModel,
    num_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-12,
) -> OracleReport:
    """Check the fast evaluation against the exact event-stepped time-1 flow.

    For perturbations small enough to start before all surfaces, the frozen
    flow started at rho_minus + drho lands at rho_plus + B(drho) exactly, so
    both paths must agree to rounding.
    """
    report = OracleReport(name="sampled-oracle", tolerance=tol)
    m.require_valid()
    rm, rp = rho_minus(m), rho_plus(m)
    for _ in range(num_samples):
        drho = rng.normal(size=m.d)
        drho *= safe_direction_scale(m, drho)
        expected = sampled_flow(m, 1.0, rm + drho) - rp
        actual = b_evaluate(m, drho).delta_rho_plus
        report.record(drho.tolist(), expected, actual)
    # the zero direction must map to zero through both paths
    report.record(
        [0.0] * m.d,
        sampled_flow(m, 1.0, rm) - rp,
        b_evaluate(m, np.zeros(m.d)).delta_rho_plus,
    )
    return report


def verify_cone_partition(
    m: CornerModel,
    num_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-9,
    order_slack: float = 1e-10,
) -> OracleReport:
    """Check cone location: the located order's matrix reproduces B, and the
    frozen flow from a point nudged along the direction impacts the surfaces
    in that order."""
    report = OracleReport(name="cone-partition", tolerance=tol)
    m.require_valid()
    rm = rho_minus(m)
    matrices: dict[Permutation, np.ndarray] = {}
    for _ in range(num_samples):
        drho = rng.normal(size=m.d)
        drho *= safe_direction_scale(m, drho)
        res = b_evaluate(m, drho)
        sigma = res.sigma
        if sigma not in matrices:
            matrices[sigma] = saltation_matrix(m, sigma)
        report.record(drho.tolist(), res.delta_rho_plus, matrices[sigma] @ drho)

        tau = time_to_impact_sampled(m, rm + drho)
        ordered = [tau[j - 1] for j in sigma.order]
        slack = order_slack * max(1.0, float(np.max(np.abs(tau))))
        if any(a > b + slack for a, b in zip(ordered, ordered[1:])):
            report.failures.append((drho.tolist(), ordered, list(sigma.order)))
    return report


def random_linear_event_field(
    rng: np.random.Generator,
    n: int = 2,
    d: int = 3,
    s_pre: float = 0.4,
    s_post: float = 0.5,
    jac_scale: float = 0.1,
    back_steps: int = 2048,
) -> tuple[PiecewiseField, np.ndarray, float]:
    """A smooth-per-orthant field whose trajectory from the returned start
    point passes through an n-surface corner at time ``s_pre``.

    Surfaces are affine planes through a random corner point; each orthant
    selection is linear, equal to a transversal limit at the corner plus a
    mild random Jacobian.  The start point is the corner integrated backward
    along the all-minus selection, so the forward trajectory reaches the
    corner crossing every surface at once.  Returns (field, x0, total_time).
    """
    while True:
        eta = rng.normal(size=(n, d))
        eta /= np.linalg.norm(eta, axis=1, keepdims=True)
        sv = np.linalg.svd(eta, compute_uv=False)
        if sv[-1] >= 0.3:
            break
    rho = rng.normal(scale=0.3, size=d)
    lift = eta.T @ np.linalg.inv(eta @ eta.T)
    gammas = {
        b: lift @ (1.0 + rng.uniform(0.0, 1.0, size=n)) for b in all_sign_vectors(n)
    }
    jacs = {b: jac_scale * rng.normal(size=(d, d)) for b in all_sign_vectors(n)}

    def selection(b: SignVector) -> SmoothField:
        g, A = gammas[b], jacs[b]
        return SmoothField(
            value=lambda x, _g=g, _A=A: _g + _A @ (np.asarray(x, dtype=float) - rho),
            jacobian=lambda x, _A=A: _A.copy(),
        )

    field = PiecewiseField(
        d=d,
        n=n,
        rho=rho,
        h=lambda x: eta @ (np.asarray(x, dtype=float) - rho),
        dh=lambda x: eta.copy(),
        selection=selection,
    )

    entry = selection(SignVector.minus_ones(n))
    x0 = rho.copy()
    h = s_pre / back_steps
    for _ in range(back_steps):
        x0 = _rk4_step(lambda z: -entry.value(z), x0, h)
    return field, x0, s_pre + s_post


def verify_fd_convergence(
    rng: np.random.Generator,
    num_fields: int = 5,
    num_directions: int = 20,
    alphas: Sequence[float] = (1e-2, 1e-3, 1e-4),
    steps: int = 512,
    ratio_band: tuple[float, float] = (5.0, 20.0),
) -> OracleReport:
    """First-order convergence of forward differences to the corner derivative.

    For each random field the median (over directions) finite-difference
    error must shrink by a factor inside ``ratio_band`` per decade of alpha.
    """
    report = OracleReport(name="fd-convergence", tolerance=ratio_band[1])
    for k in range(num_fields):
        field, x0, t = random_linear_event_field(rng)
        fd = flow_derivative_at_corner(field, x0, t, steps=steps)
        errors = np.zeros((num_directions, len(alphas)))
        for i in range(num_directions):
            dx = rng.normal(size=field.d)
            dx /= np.linalg.norm(dx)
            exact = corner_flow_bderivative(fd, dx)
            quotients = finite_difference_flow(field, x0, t, dx, alphas, steps=steps)
            errors[i] = [float(np.linalg.norm(q - exact)) for q in quotients]
        med = np.median(errors, axis=0)
        ratios = [float(med[a] / med[a + 1]) for a in range(len(alphas) - 1)]
        report.samples += num_directions
        report.max_abs_error = max(report.max_abs_error, float(med[0]))
        if any(not ratio_band[0] <= r <= ratio_band[1] for r in ratios):
            report.failures.append((f"field-{k}", med.tolist(), ratios))
    return report


def finite_difference_flow(
    field: PiecewiseField,
    x0: Sequence[float] | np.ndarray,
    t: float,
    delta_x0: Sequence[float] | np.ndarray,
    alphas: Sequence[float],
    steps: int = DEFAULT_STEPS,
) -> list[np.ndarray]:
    """One-sided difference quotients of the integrated flow.

    Forward differences only: the directional derivative is a one-sided
    limit, and centered differences straddle cone boundaries.
    """
    x0a = np.asarray(x0, dtype=float)
    dxa = np.asarray(delta_x0, dtype=float)
    base = integrate(field, x0a, t, steps=steps).x_end
    out = []
    for alpha in alphas:
        pert = integrate(field, x0a + alpha * dxa, t, steps=steps).x_end
        out.append((pert - base) / alpha)
    return out
