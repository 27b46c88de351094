"""Adaptive integration of the reduced systems with per-step constraint
solves, plus termination classification (horizon reached, suspected
finite-time escape, constraint-solve failure, step collapse).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import (ConstraintSolveFailure, InconsistentInitialValue,
                     NoConvergence)
from .reduction import ReducedCascade, ReducedFirst

__all__ = ["IntegrationOptions", "Trajectory", "TerminationReason",
           "TrajectoryInternals", "integrate_first", "integrate_cascade",
           "classify_termination"]


@dataclass
class IntegrationOptions:
    t0: float = 0.0
    t_max: float = 1.0
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float | None = None
    h_min: float = 1e-10
    h_max: float | None = None
    blowup_norm_cap: float = 1e6
    blowup_window: int = 5

    def __post_init__(self):
        if self.t_max <= self.t0:
            raise ValueError("t_max must exceed t0")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        hmax = self.h_max if self.h_max is not None else self.t_max - self.t0
        if self.h_init is not None and not (self.h_min <= self.h_init <= hmax):
            raise ValueError("need h_min <= h_init <= h_max")
        if self.h_min <= 0:
            raise ValueError("h_min must be positive")


@dataclass(frozen=True)
class TerminationReason:
    kind: str  # reached_tmax | blowup_suspected | constraint_solve_failure | step_collapse
    t_escape_estimate: float | None = None
    final_norm: float | None = None
    t: float | None = None
    level: str | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("t_escape_estimate", "final_norm", "t", "level", "detail"):
            val = getattr(self, key)
            if val not in (None, ""):
                out[key] = val
        return out


@dataclass
class TrajectoryInternals:
    """Raw per-step record used by the termination classifier."""

    times: list = dc_field(default_factory=list)
    norms: list = dc_field(default_factory=list)
    steps: list = dc_field(default_factory=list)
    forced: list = dc_field(default_factory=list)
    h_min: float = 1e-10
    blowup_norm_cap: float = 1e6
    blowup_window: int = 5
    reached_t_max: bool = False
    nonfinite: bool = False
    failure: tuple | None = None  # (t, level, message)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    w_states: np.ndarray
    residuals: np.ndarray
    termination: TerminationReason
    stats: dict = dc_field(default_factory=dict)

    def to_csv(self, path) -> None:
        """Columns t, x_1..x_N, w_norm, residual, floats at 17 significant
        digits for lossless round trips."""
        n = self.states.shape[1]
        header = "t," + ",".join(f"x_{k + 1}" for k in range(n)) \
            + ",w_norm,residual"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for k in range(self.times.size):
                row = [self.times[k], *self.states[k],
                       float(np.linalg.norm(self.w_states[k])),
                       self.residuals[k]]
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def termination_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.termination.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _escape_estimate(times, norms) -> float:
    """Extrapolated escape time: the reciprocal norm is driven to zero by
    successive secant steps (Richardson-style refinement on the last pairs).
    """
    ts = np.asarray(times, dtype=float)
    us = 1.0 / np.maximum(np.asarray(norms, dtype=float), 1e-300)
    keep = min(6, ts.size)
    ts, us = ts[-keep:], us[-keep:]
    est = ts[-1]
    for k in range(1, ts.size):
        du = us[k - 1] - us[k]
        if du > 0:
            est = ts[k] + us[k] * (ts[k] - ts[k - 1]) / du
    return float(est)


def classify_termination(internals: TrajectoryInternals) -> TerminationReason:
    """Label the end of an integration from its per-step record.

    A suspected finite-time escape requires all three signals together:
    the tracked norm exceeded the cap, it grew monotonically over the
    configured window of accepted steps, and the step size was driven to
    its floor (or the state left the representable range while growing).
    """
    if internals.failure is not None:
        t, level, msg = internals.failure
        return TerminationReason(kind="constraint_solve_failure", t=t,
                                 level=level, detail=msg)
    if internals.reached_t_max:
        return TerminationReason(kind="reached_tmax",
                                 t=internals.times[-1] if internals.times else None)
    norms = internals.norms
    w = internals.blowup_window
    growth = (len(norms) >= w + 1
              and all(norms[-k] > norms[-k - 1] for k in range(1, w + 1)))
    big = bool(norms) and norms[-1] > internals.blowup_norm_cap
    floored = (bool(internals.steps)
               and internals.steps[-1] <= internals.h_min * (1 + 1e-9))
    if growth and big and (floored or internals.nonfinite):
        return TerminationReason(
            kind="blowup_suspected",
            t_escape_estimate=_escape_estimate(internals.times, norms),
            final_norm=float(norms[-1]),
            t=float(internals.times[-1]))
    t_last = float(internals.times[-1]) if internals.times else None
    detail = "state left the representable range" if internals.nonfinite \
        else "step size collapsed without norm growth"
    return TerminationReason(kind="step_collapse", t=t_last, detail=detail)


# Dormand-Prince 5(4) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def _nonfinite_cause(exc: ConstraintSolveFailure) -> bool:
    cause = exc.cause
    return (isinstance(cause, NoConvergence)
            and not np.isfinite(cause.last_residual))


def _initial_step(rhs, t0, y0, f0, opts: IntegrationOptions) -> float:
    sc = opts.atol + opts.rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    hmax = opts.h_max if opts.h_max is not None else opts.t_max - opts.t0
    return float(min(max(h0, opts.h_min), hmax, opts.t_max - opts.t0))


def _drive(rhs: Callable, t0: float, y0: np.ndarray,
           opts: IntegrationOptions, on_accept: Callable,
           internals: TrajectoryInternals) -> TrajectoryInternals:
    """Embedded 5(4) pair with PI step control and a forced-accept floor."""
    hmax = opts.h_max if opts.h_max is not None else opts.t_max - opts.t0
    t, y = t0, np.array(y0, dtype=float)
    nfev = [0]

    def f(tt, yy):
        nfev[0] += 1
        return rhs(tt, yy)

    try:
        k1 = f(t, y)
    except ConstraintSolveFailure as exc:
        internals.failure = (exc.t, exc.level, str(exc.cause))
        internals.stats = {"nfev": nfev[0], "accepted": 0, "rejected": 0}
        return internals
    h = opts.h_init if opts.h_init is not None else _initial_step(f, t, y, k1, opts)
    err_prev = 1e-4
    accepted = rejected = 0
    consecutive_forced = 0
    ks = [None] * 7
    while t < opts.t_max * (1 - 1e-14) and t + opts.h_min <= opts.t_max:
        h = min(h, hmax, opts.t_max - t)
        h = max(h, opts.h_min)
        at_floor = h <= opts.h_min * (1 + 1e-9)
        ks[0] = k1
        failed = False
        overflow = False
        y_new = None
        try:
            # overflow near a finite-time escape is expected, not an error
            with np.errstate(over="ignore", invalid="ignore"):
                for i in range(1, 7):
                    yi = y + h * sum(_A[i][j] * ks[j] for j in range(i))
                    if not np.all(np.isfinite(yi)) \
                            or float(np.abs(yi).max()) > 1e150:
                        overflow = True
                        break
                    ks[i] = f(t + _C[i] * h, yi)
                    if i == 6:
                        y_new = yi  # stage 7 sits at the new solution point
        except ConstraintSolveFailure as exc:
            if not at_floor:
                # shrink and retry; persistent failure ends at the floor
                h = max(h * 0.25, opts.h_min)
                rejected += 1
                continue
            if _nonfinite_cause(exc):
                # the field left the representable range: overflow of the
                # dynamics, not failure of the solvability hypotheses
                overflow = True
            else:
                internals.failure = (exc.t, exc.level, str(exc.cause))
                failed = True
        if failed:
            break
        if overflow:
            if at_floor:
                internals.nonfinite = True
                internals.times.append(float(t + h))
                internals.steps.append(float(h))
                internals.forced.append(True)
                internals.norms.append(float("inf"))
                break
            h = max(h * 0.25, opts.h_min)
            rejected += 1
            continue
        err_vec = h * sum(_E[j] * ks[j] for j in range(7))
        sc = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
        if not np.isfinite(err):
            if at_floor:
                internals.nonfinite = True
                internals.times.append(float(t + h))
                internals.steps.append(float(h))
                internals.forced.append(True)
                internals.norms.append(float("inf"))
                break
            h = max(h * 0.25, opts.h_min)
            rejected += 1
            continue
        if err <= 1.0 or at_floor:
            forced = err > 1.0
            consecutive_forced = consecutive_forced + 1 if forced else 0
            t = t + h
            y = y_new
            k1 = ks[6]
            accepted += 1
            internals.times.append(float(t))
            internals.steps.append(float(h))
            internals.forced.append(forced)
            if not np.all(np.isfinite(y)):
                internals.nonfinite = True
                internals.norms.append(float("inf"))
                break
            try:
                on_accept(t, y)
            except ConstraintSolveFailure as exc:
                internals.norms.append(float(np.linalg.norm(y)))
                if _nonfinite_cause(exc):
                    internals.nonfinite = True
                else:
                    internals.failure = (exc.t, exc.level, str(exc.cause))
                break
            norms = internals.norms
            wsize = internals.blowup_window
            if (len(norms) >= wsize + 1 and norms[-1] > internals.blowup_norm_cap
                    and all(norms[-k] > norms[-k - 1] for k in range(1, wsize + 1))
                    and at_floor):
                break
            if consecutive_forced > max(50, 3 * wsize):
                break
            fac = 0.9 * err ** (-0.14) * err_prev ** 0.08 if err > 0 else 5.0
            fac = min(5.0, max(0.2, fac))
            if forced:
                fac = min(fac, 1.0)
            h = h * fac
            err_prev = max(err, 1e-10)
        else:
            rejected += 1
            h = h * min(1.0, max(0.2, 0.9 * err ** (-0.2)))
    else:
        internals.reached_t_max = True
    internals.stats = {"nfev": nfev[0], "accepted": accepted,
                       "rejected": rejected}
    return internals


def _run(reduced, t0, y0, opts, drift, assemble) -> Trajectory:
    """Shared loop: integrate y' = drift(t, y), record assembled states."""
    times = [float(t0)]
    ys = [np.array(y0, dtype=float)]
    states = []
    residuals = []
    internals = TrajectoryInternals(h_min=opts.h_min,
                                    blowup_norm_cap=opts.blowup_norm_cap,
                                    blowup_window=opts.blowup_window)
    internals.times.append(float(t0))
    internals.norms.append(float(np.linalg.norm(y0)))
    internals.steps.append(0.0)
    internals.forced.append(False)
    last = {}

    def rhs(t, y):
        dy, x = drift(t, y)
        last["t"], last["y"], last["x"] = t, y, x
        return dy

    x0_state, res0 = assemble(t0, np.array(y0, dtype=float), last)
    states.append(x0_state)
    residuals.append(res0)

    def on_accept(t, y):
        times.append(float(t))
        ys.append(y.copy())
        x, res = assemble(t, y, last)
        states.append(x)
        residuals.append(res)
        internals.norms.append(float(np.linalg.norm(y)))

    internals = _drive(rhs, t0, np.array(y0, dtype=float), opts, on_accept,
                       internals)
    reason = classify_termination(internals)
    stats = getattr(internals, "stats", {})
    return Trajectory(times=np.asarray(times), states=np.vstack(states),
                      w_states=np.vstack(ys), residuals=np.asarray(residuals),
                      termination=reason, stats=stats)


def integrate_first(reduced: ReducedFirst, t0: float, x0, opts: IntegrationOptions
                    ) -> Trajectory:
    """Integrate the direct reduction from a consistent initial state."""
    x0 = np.asarray(x0, dtype=float)
    res0 = reduced.residual_L0(t0, x0)
    if res0 > reduced.dae.tol.cons:
        raise InconsistentInitialValue(res0, reduced.dae.tol.cons)
    state = reduced.make_state()
    if reduced.n:
        state.c20 = reduced.kernel.x_coords(reduced.dae.pencil.b, x0)
    w0 = reduced.dae.pencil.a @ x0

    def solve(t, w):
        # warm-started solve; on failure retry once from a cold
        # re-initialization of the kernel guess
        try:
            return reduced.drift_w(t, w, state)
        except NoConvergence as first_exc:
            state.c20 = None
            try:
                return reduced.drift_w(t, w, state)
            except NoConvergence:
                raise ConstraintSolveFailure(t, "kernel_level", first_exc)

    def drift(t, w):
        dw, x, _ = solve(t, w)
        return dw, x

    def assemble(t, w, last):
        if last.get("t") == t and last.get("y") is w:
            x = last["x"]
        else:
            _, x, _ = solve(t, w)
        return x, reduced.residual_L0(t, x)

    return _run(reduced, t0, w0, opts, drift, assemble)


def integrate_cascade(reduced: ReducedCascade, t0: float, x01,
                      opts: IntegrationOptions) -> Trajectory:
    """Integrate the cascade reduction from an explicit-part initial value."""
    x01 = np.asarray(x01, dtype=float)
    off = float(np.linalg.norm(x01 - reduced.ps.p1 @ x01))
    if off > 1e-8 * (1.0 + float(np.linalg.norm(x01))):
        raise InconsistentInitialValue(off, 1e-8)
    evaluator = reduced.evaluator()
    w10 = reduced.dae.pencil.a @ (reduced.ps.p1 @ x01)

    def solve(t, w1):
        # on failure retry once from cold level guesses
        try:
            return reduced.drift_w1(t, w1, evaluator)
        except ConstraintSolveFailure:
            fresh = reduced.evaluator()
            out = reduced.drift_w1(t, w1, fresh)
            evaluator.warm_chain = fresh.warm_chain
            evaluator.warm_wedge = fresh.warm_wedge
            evaluator.warm_x20 = fresh.warm_x20
            return out

    def drift(t, w1):
        dw, x = solve(t, w1)
        return dw, x

    def assemble(t, w1, last):
        if last.get("t") == t and last.get("y") is w1:
            x = last["x"]
        else:
            _, x = solve(t, w1)
        return x, reduced.residual_L0(t, x)

    return _run(reduced, t0, w10, opts, drift, assemble)
