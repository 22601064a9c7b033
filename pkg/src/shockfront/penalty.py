"""Yosida-penalty approximation of the front inclusion.

The set-valued normal-cone term is replaced by its Yosida approximation
``-(1/eps) * (z - gamma_star)^-``, giving the ODE

    dL/dt = U(t, L) - yosida_penalty(gamma(t, L), gamma_star, eps),  L(0) = L0,

which is integrated with classical RK4 and step-doubling error control.
Inside the violation set the step is capped at ``stiff_factor * eps``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import FrontEscapedDomain, SolverError, StepUnderflow
from .fields import Scenario
from .trajectory import Trajectory

__all__ = ["PenaltyOptions", "yosida_penalty", "project_K", "solve_penalized", "refine_trajectory"]

logger = logging.getLogger(__name__)

MAX_STEPS = 20_000_000


def yosida_penalty(z, gamma_star: float, epsilon: float):
    """Yosida approximation of the subdifferential of the indicator of [gamma_star, inf).

    Zero for ``z > gamma_star``, ``(z - gamma_star)/epsilon`` otherwise; never positive.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if isinstance(z, (float, int)):
        return 0.0 if z > gamma_star else (z - gamma_star) / epsilon
    z = np.asarray(z, dtype=float)
    return np.where(z > gamma_star, 0.0, (z - gamma_star) / epsilon)


def project_K(z, gamma_star: float):
    """Projection onto [gamma_star, inf)."""
    if isinstance(z, (float, int)):
        return z if z > gamma_star else gamma_star
    return np.maximum(np.asarray(z, dtype=float), gamma_star)


@dataclass(frozen=True)
class PenaltyOptions:
    epsilon: float
    h_init: Optional[float] = None  # default T/1000
    h_min: Optional[float] = None  # default 1e-12*T
    h_max: Optional[float] = None  # default T/100
    rel_tol: float = 1e-8
    stiff_factor: float = 0.2

    def resolved(self, T: float) -> "PenaltyOptions":
        opts = replace(
            self,
            h_init=T / 1000 if self.h_init is None else self.h_init,
            h_min=1e-12 * T if self.h_min is None else self.h_min,
            h_max=T / 100 if self.h_max is None else self.h_max,
        )
        if not opts.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < opts.h_min <= opts.h_init:
            raise ValueError("need 0 < h_min <= h_init")
        if not opts.h_max >= opts.h_min:
            raise ValueError("need h_max >= h_min")
        if not 0 < opts.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if not 0 < opts.stiff_factor <= 1:
            raise ValueError("stiff_factor must lie in (0, 1]")
        return opts

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "h_init": self.h_init, "h_min": self.h_min,
                "h_max": self.h_max, "rel_tol": self.rel_tol, "stiff_factor": self.stiff_factor}


def _rhs(scenario: Scenario, epsilon: float):
    U = scenario.velocity.value
    G = scenario.gamma.value
    gs = scenario.gamma_star

    def f(t, L):
        z = G(t, L)
        return U(t, L) - (0.0 if z > gs else (z - gs) / epsilon)
    return f


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _two_halves(f, t, y, h):
    return _rk4(f, t + 0.5 * h, _rk4(f, t, y, 0.5 * h), 0.5 * h)


def _stiffness(f, t, y):
    d = 1e-7 * max(1.0, abs(y))
    return abs(f(t, y + d) - f(t, y)) / d


def solve_penalized(scenario: Scenario, opts: PenaltyOptions) -> Trajectory:
    """Integrate the penalized front ODE on [0, T].

    Every accepted step records the multiplier ``mu_eps = yosida_penalty(gamma(t, L))``.
    Steps whose end points straddle the boundary of ``{gamma <= gamma_star}`` are
    shortened by bisection so that entry and exit instants are sampled to
    within ``h_min``.
    """
    T = scenario.T
    o = opts.resolved(T)
    eps = o.epsilon
    gs = scenario.gamma_star
    G = scenario.gamma.value
    f = _rhs(scenario, eps)

    t, L = 0.0, scenario.L0
    times, positions, mus = [t], [L], [yosida_penalty(G(t, L), gs, eps)]
    events = []
    g_prev = G(t, L) - gs
    h = o.h_init
    cap = o.stiff_factor * eps
    rejected = 0

    while T - t > 0.5 * o.h_min:
        if len(times) > MAX_STEPS:
            raise SolverError(f"more than {MAX_STEPS} steps at t={t:.9g}")
        h = min(h, o.h_max)
        if g_prev <= 0:
            h = min(h, cap)
        step = min(h, T - t)
        full = _rk4(f, t, L, step)
        fine = _two_halves(f, t, L, step)
        err = abs(fine - full) / 15.0
        tol = o.rel_tol * max(1.0, abs(L), abs(fine))
        if not (err <= tol):
            rejected += 1
            h = step * max(0.1, 0.9 * (tol / err) ** 0.2) if math.isfinite(err) else 0.1 * step
            if h < o.h_min:
                raise StepUnderflow(t, h, _stiffness(f, t, L))
            continue

        t_new = T if step == T - t else t + step
        g_new = G(t_new, fine) - gs
        if (g_prev > 0) != (g_new > 0):
            lo, hi = 0.0, 1.0
            while (hi - lo) * step > o.h_min:
                mid = 0.5 * (lo + hi)
                y_mid = _two_halves(f, t, L, mid * step)
                if (G(t + mid * step, y_mid) - gs > 0) == (g_prev > 0):
                    lo = mid
                else:
                    hi = mid
            if hi < 1.0:
                t_new = t + hi * step
                fine = _two_halves(f, t, L, hi * step)
                g_new = G(t_new, fine) - gs
            events.append(("entry" if g_prev > 0 else "exit", t_new))

        t, L, g_prev = t_new, fine, g_new
        if L > scenario.X_max:
            raise FrontEscapedDomain(t, L, scenario.X_max)
        times.append(t)
        positions.append(L)
        mus.append(0.0 if g_new > 0 else g_new / eps)
        factor = 2.0 if err == 0 else min(2.0, max(0.5, 0.9 * (tol / err) ** 0.2))
        h = step * factor if step == h else max(h, step * factor)

    logger.debug("penalty eps=%g: %d steps, %d rejected, %d events",
                 eps, len(times) - 1, rejected, len(events))
    return Trajectory(
        times=np.array(times), positions=np.array(positions), mu=np.array(mus),
        method="penalty", parameter=eps,
        info={"steps": len(times) - 1, "rejected": rejected, "events": events,
              "options": o.to_dict()},
    )


def refine_trajectory(traj: Trajectory, scenario: Scenario) -> Trajectory:
    """Insert the integrator's own midpoint into every step of a penalty run."""
    if traj.method != "penalty":
        raise ValueError("refine_trajectory needs a penalty run")
    eps = traj.parameter
    f = _rhs(scenario, eps)
    G = scenario.gamma.value
    gs = scenario.gamma_star
    t, L = traj.times, traj.positions
    n = len(t)
    times = np.empty(2 * n - 1)
    pos = np.empty(2 * n - 1)
    times[0::2], pos[0::2] = t, L
    for i in range(n - 1):
        h = t[i + 1] - t[i]
        times[2 * i + 1] = t[i] + 0.5 * h
        pos[2 * i + 1] = _rk4(f, t[i], L[i], 0.5 * h)
    mu = yosida_penalty(G(times, pos), gs, eps)
    return Trajectory(times, pos, mu, "penalty", eps, info={**traj.info, "refined": True})
