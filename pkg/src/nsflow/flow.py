"""Trajectory and sensitivity integration for event-selected fields.

Within an orthant the field is smooth, so states follow a fixed-step RK4
integration and state sensitivities follow the linear variational equation
along the same steps.  At a transversal surface crossing the sensitivity is
updated by a rank-1 saltation matrix; when several surfaces cross within the
simultaneity tolerance the event is a corner and the update is the
piecewise-linear corner derivative instead.  Event times are localized by
bisection on the event function composed with partial RK4 steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bderiv import b_evaluate, locate_cone, saltation_single
from .core import CornerModel, Permutation, PiecewiseField, SignVector
from .errors import StepTooLarge, TangentialCrossing

__all__ = [
    "TrajectorySegment",
    "EventRecord",
    "IntegrationResult",
    "FlowDerivative",
    "integrate",
    "variational",
    "derivative_through_single_event",
    "flow_derivative_at_corner",
    "corner_flow_bderivative",
    "transition_sequence",
    "flow_bderivative",
    "BFlowDerivative",
]

DEFAULT_STEPS = 4096
EVENT_HTOL = 1e-11
SIGN_CLAMP_TOL = 3e-11
SIMULTANEITY_TOL = 1e-9
CROSSING_F_MIN = 1e-9
MAX_BISECT = 200


@dataclass(frozen=True)
class TrajectorySegment:
    """A smooth stretch of trajectory: strictly increasing times, states, and
    the orthant whose selection field was integrated."""

    times: np.ndarray
    states: np.ndarray
    active_orthant: SignVector

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def x_start(self) -> np.ndarray:
        return self.states[0]

    @property
    def x_end(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class EventRecord:
    """A localized surface crossing. ``surfaces`` holds 1-based indices; two or
    more indices mean the crossings merged into a corner event."""

    time: float
    surfaces: tuple[int, ...]
    state: np.ndarray

    @property
    def is_corner(self) -> bool:
        return len(self.surfaces) > 1

    def to_json_dict(self) -> dict:
        surface: object = "corner" if self.is_corner else self.surfaces[0]
        return {"time": self.time, "surface": surface, "state": self.state.tolist()}


@dataclass(frozen=True)
class IntegrationResult:
    segments: list[TrajectorySegment]
    events: list[EventRecord]

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def x_end(self) -> np.ndarray:
        return self.segments[-1].x_end


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _signs_against(field: PiecewiseField, x: np.ndarray, b: SignVector) -> list[int]:
    """Surfaces whose sign at x differs from b (1-based), with a clamp band so
    the just-localized surface does not re-trigger."""
    vals = np.asarray(field.h(x), dtype=float) - field.h_ref
    scale = np.maximum(1.0, np.abs(vals))
    out = []
    for j in range(field.n):
        if abs(vals[j]) <= SIGN_CLAMP_TOL * scale[j]:
            continue
        s = -1 if vals[j] < 0.0 else 1
        if s != b[j]:
            out.append(j + 1)
    return out


def _bisect_crossing(
    f: Callable[[np.ndarray], np.ndarray],
    field: PiecewiseField,
    x0: np.ndarray,
    h: float,
    j: int,
) -> tuple[float, np.ndarray]:
    """Find alpha in (0, h] where event function j crosses its surface value
    along the frozen-field RK4 step map from x0."""
    ref = field.h_ref[j - 1]

    def val(alpha: float) -> tuple[float, np.ndarray]:
        x = _rk4_step(f, x0, alpha)
        return float(field.h(x)[j - 1]) - ref, x

    v0 = float(field.h(x0)[j - 1]) - ref
    v1, x1 = val(h)
    if abs(v0) <= SIGN_CLAMP_TOL * max(1.0, abs(v0), abs(v1)):
        # the step started on the surface itself: the crossing is here
        return 0.0, x0
    if v0 * v1 > 0.0:
        raise StepTooLarge(
            f"event function {j} does not bracket a crossing within the step"
        )
    lo, hi = 0.0, h
    v_hi, x_hi = v1, x1
    scale = max(1.0, abs(v0), abs(v_hi))
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        v_mid, x_mid = val(mid)
        if abs(v_mid) <= EVENT_HTOL * scale:
            return mid, x_mid
        if v0 * v_mid > 0.0:
            lo = mid
        else:
            hi, v_hi, x_hi = mid, v_mid, x_mid
    if abs(v_hi) <= 1e3 * EVENT_HTOL * scale:
        return hi, x_hi
    raise StepTooLarge(f"bisection failed to localize event function {j}")


def integrate(
    field: PiecewiseField,
    x0: Sequence[float] | np.ndarray,
    t: float,
    steps: int = DEFAULT_STEPS,
    simultaneity_tol: float = SIMULTANEITY_TOL,
    f_min: float = CROSSING_F_MIN,
) -> IntegrationResult:
    """Integrate the field for time ``t`` from ``x0``, localizing every surface
    crossing and merging near-simultaneous crossings into corner events.

    Fixed-step RK4 with the selection field frozen per orthant; each step that
    flips event-function signs is refined by bisection to |h_j| <= 1e-11 at
    the crossing, and crossings within ``simultaneity_tol`` time units merge.
    Raises :class:`TangentialCrossing` when the normal speed at a localized
    crossing falls below ``f_min``.
    """
    x = np.array(x0, dtype=float)
    if t < 0.0:
        raise ValueError("integrate expects t >= 0")
    b = field.orthant(x)
    h_step = t / steps if steps > 0 else t

    seg_times = [0.0]
    seg_states = [x.copy()]
    segments: list[TrajectorySegment] = []
    events: list[EventRecord] = []
    t_cur = 0.0

    def close_segment() -> None:
        segments.append(
            TrajectorySegment(
                times=np.array(seg_times),
                states=np.array(seg_states),
                active_orthant=b,
            )
        )

    while t_cur < t - 1e-15 * max(1.0, t):
        if len(events) > 100 * field.n + 1000:
            raise StepTooLarge(
                "event count exploded; the field is likely not event-selected "
                "along this trajectory (chatter)"
            )
        fb = field.selection(b)
        h = min(h_step, t - t_cur)
        x_new = _rk4_step(fb.value, x, h)
        flipped = _signs_against(field, x_new, b)
        if not flipped:
            t_cur += h
            x = x_new
            seg_times.append(t_cur)
            seg_states.append(x.copy())
            continue

        crossings = [
            (j, *_bisect_crossing(fb.value, field, x, h, j)) for j in flipped
        ]
        alpha_min = min(c[1] for c in crossings)
        event_set = sorted(j for j, a, _ in crossings if a - alpha_min <= simultaneity_tol)
        near = [
            j
            for j, a, _ in crossings
            if simultaneity_tol < a - alpha_min <= 1e3 * simultaneity_tol
        ]
        if near:
            warnings.warn(
                f"crossings of surfaces {near} fall just outside the simultaneity "
                f"tolerance {simultaneity_tol:g} and are treated as sequential",
                RuntimeWarning,
                stacklevel=2,
            )
        x_event = next(xe for j, a, xe in crossings if a == alpha_min)
        t_event = t_cur + alpha_min

        dh_event = np.asarray(field.dh(x_event), dtype=float)
        f_pre = fb.value(x_event)
        for j in event_set:
            speed = float(dh_event[j - 1] @ f_pre)
            if abs(speed) < f_min:
                raise TangentialCrossing(
                    f"surface {j} crossed with normal speed {speed:.3g} at t = {t_event:.6g}"
                )

        if alpha_min > 0.0:
            seg_times.append(t_event)
            seg_states.append(x_event.copy())
        close_segment()
        events.append(
            EventRecord(time=t_event, surfaces=tuple(event_set), state=x_event.copy())
        )

        for j in event_set:
            b = b.flip(j)
        t_cur = t_event
        x = x_event
        seg_times = [t_cur]
        seg_states = [x.copy()]

    close_segment()
    return IntegrationResult(segments=segments, events=events)


def variational(
    field: PiecewiseField,
    segment: TrajectorySegment,
    x_start: np.ndarray | None = None,
) -> np.ndarray:
    """Sensitivity matrix of the smooth flow along one segment.

    Integrates state and matrix jointly, dX = DF(x) X dt from the identity,
    with RK4 over the segment's own step grid.
    """
    fb = field.selection(segment.active_orthant)
    d = field.d
    x = np.array(segment.x_start if x_start is None else x_start, dtype=float)
    X = np.eye(d)

    def rhs(z: np.ndarray) -> np.ndarray:
        xz = z[:d]
        Xz = z[d:].reshape(d, d)
        return np.concatenate([fb.value(xz), (fb.jacobian(xz) @ Xz).ravel()])

    z = np.concatenate([x, X.ravel()])
    times = segment.times
    for i in range(len(times) - 1):
        z = _rk4_step(rhs, z, float(times[i + 1] - times[i]))
    return z[d:].reshape(d, d)


def _oriented_saltation(
    field: PiecewiseField,
    event: EventRecord,
    b_pre: SignVector,
    b_post: SignVector,
) -> np.ndarray:
    j = event.surfaces[0]
    x_s = event.state
    f_minus = field.selection(b_pre).value(x_s)
    f_plus = field.selection(b_post).value(x_s)
    row = np.asarray(field.dh(x_s), dtype=float)[j - 1]
    if float(row @ f_minus) < 0.0:
        row = -row
    return saltation_single(f_minus, f_plus, row)


def derivative_through_single_event(
    field: PiecewiseField,
    x0: Sequence[float] | np.ndarray,
    t: float,
    result: IntegrationResult | None = None,
    steps: int = DEFAULT_STEPS,
) -> np.ndarray:
    """Flow sensitivity for a trajectory crossing exactly one surface:
    post-segment variational times saltation times pre-segment variational."""
    if result is None:
        result = integrate(field, x0, t, steps=steps)
    if len(result.events) != 1 or result.events[0].is_corner:
        raise ValueError(
            f"expected exactly one single-surface crossing, got {result.events}"
        )
    pre = variational(field, result.segments[0])
    post = variational(field, result.segments[1])
    M = _oriented_saltation(
        field,
        result.events[0],
        result.segments[0].active_orthant,
        result.segments[1].active_orthant,
    )
    return post @ M @ pre


@dataclass(frozen=True)
class FlowDerivative:
    """Sensitivity data of a trajectory through one corner: smooth-flow
    matrices before and after the event and the frozen corner model."""

    pre_matrix: np.ndarray
    post_matrix: np.ndarray
    corner: CornerModel


def flow_derivative_at_corner(
    field: PiecewiseField,
    x0: Sequence[float] | np.ndarray,
    t: float,
    result: IntegrationResult | None = None,
    steps: int = DEFAULT_STEPS,
    f_min: float = CROSSING_F_MIN,
) -> FlowDerivative:
    """Assemble the corner sensitivity of a trajectory with one event."""
    if result is None:
        result = integrate(field, x0, t, steps=steps)
    if len(result.events) != 1:
        raise ValueError(f"expected one event on the trajectory, got {len(result.events)}")
    event = result.events[0]
    pre = variational(field, result.segments[0])
    post = variational(field, result.segments[1])
    corner = field.corner_model(
        rho=event.state,
        incoming=result.segments[0].active_orthant,
        surfaces=event.surfaces,
        f_min=f_min,
    )
    return FlowDerivative(pre_matrix=pre, post_matrix=post, corner=corner)


def corner_flow_bderivative(fd: FlowDerivative, delta_x0: Sequence[float] | np.ndarray) -> np.ndarray:
    """Directional flow derivative through the corner for one tangent vector."""
    v = fd.pre_matrix @ np.asarray(delta_x0, dtype=float)
    return fd.post_matrix @ b_evaluate(fd.corner, v).delta_rho_plus


def transition_sequence(fd: FlowDerivative, delta_x0: Sequence[float] | np.ndarray) -> Permutation:
    """Surface-crossing order a perturbation in direction ``delta_x0`` selects."""
    v = fd.pre_matrix @ np.asarray(delta_x0, dtype=float)
    return locate_cone(fd.corner, v)


@dataclass(frozen=True)
class BFlowDerivative:
    """Composed directional derivative of a multi-event trajectory.

    Stages alternate linear matrices (smooth segments and single-surface
    saltations, collapsed together) with corner models, applied left to
    right along the trajectory.
    """

    stages: tuple[tuple[str, object], ...]

    def __call__(self, delta_x0: Sequence[float] | np.ndarray) -> np.ndarray:
        v = np.asarray(delta_x0, dtype=float)
        for kind, payload in self.stages:
            if kind == "linear":
                v = payload @ v
            else:
                v = b_evaluate(payload, v).delta_rho_plus
        return v


def flow_bderivative(
    field: PiecewiseField,
    x0: Sequence[float] | np.ndarray,
    t: float,
    result: IntegrationResult | None = None,
    steps: int = DEFAULT_STEPS,
    f_min: float = CROSSING_F_MIN,
) -> BFlowDerivative:
    """Chain segment sensitivities and event updates along a whole trajectory."""
    if result is None:
        result = integrate(field, x0, t, steps=steps)
    stages: list[tuple[str, object]] = []
    acc = variational(field, result.segments[0])

    for i, event in enumerate(result.events):
        b_pre = result.segments[i].active_orthant
        b_post = result.segments[i + 1].active_orthant
        if event.is_corner:
            corner = field.corner_model(
                rho=event.state, incoming=b_pre, surfaces=event.surfaces, f_min=f_min
            )
            stages.append(("linear", acc))
            stages.append(("corner", corner))
            acc = np.eye(field.d)
        else:
            acc = _oriented_saltation(field, event, b_pre, b_post) @ acc
        acc = variational(field, result.segments[i + 1]) @ acc

    stages.append(("linear", acc))
    return BFlowDerivative(stages=tuple(stages))
