"""Catch-up scheme: explicit Euler predictor, forward projection to feasibility.

While the predictor stays in ``{gamma >= gamma_star}`` the front simply
moves with ``U``; otherwise it is pushed forward to the nearest feasible
position.  A correction is recorded as a jump atom when it exceeds
``scan_step`` and its implied speed ``corr/h`` exceeds ``jump_speed``;
smaller ones feed the continuous multiplier (contact tracking).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import FrontEscapedDomain, NoFeasiblePointWithinDomain
from .fields import Scenario, jump_speed_threshold
from .trajectory import JumpAtom, Trajectory

__all__ = ["ProjectionOptions", "forward_feasible_point", "solve_projected"]


@dataclass(frozen=True)
class ProjectionOptions:
    h: Optional[float] = None  # default T/1e4
    scan_step: Optional[float] = None  # default (X_max - L0)/1e4
    root_tol: Optional[float] = None  # default scan_step/100
    jump_speed: Optional[float] = None  # default fields.jump_speed_threshold

    def resolved(self, scenario: Scenario) -> "ProjectionOptions":
        scan = (scenario.X_max - scenario.L0) / 1e4 if self.scan_step is None else self.scan_step
        opts = replace(
            self,
            h=scenario.T / 1e4 if self.h is None else self.h,
            scan_step=scan,
            root_tol=scan / 100 if self.root_tol is None else self.root_tol,
            jump_speed=jump_speed_threshold(scenario) if self.jump_speed is None else self.jump_speed,
        )
        if not opts.h > 0:
            raise ValueError("h must be > 0")
        if not 0 < opts.root_tol < opts.scan_step:
            raise ValueError("need 0 < root_tol < scan_step")
        return opts

    def to_dict(self) -> dict:
        return {"h": self.h, "scan_step": self.scan_step, "root_tol": self.root_tol,
                "jump_speed": self.jump_speed}


def forward_feasible_point(scenario: Scenario, t: float, x0: float,
                           opts: ProjectionOptions = ProjectionOptions()) -> float:
    """Smallest ``x >= x0`` with ``gamma(t, x) >= gamma_star``, to ``root_tol``.

    The returned point is always feasible (the upper end of the final
    bisection bracket).  Feasible islands narrower than ``scan_step`` may be
    stepped over.
    """
    o = opts.resolved(scenario)
    G = scenario.gamma.value
    gs = scenario.gamma_star
    if G(t, x0) >= gs:
        return x0
    lo = x0
    while lo < scenario.X_max:
        hi = min(lo + o.scan_step, scenario.X_max)
        if G(t, hi) >= gs:
            while hi - lo > o.root_tol:
                mid = 0.5 * (lo + hi)
                if G(t, mid) >= gs:
                    hi = mid
                else:
                    lo = mid
            return hi
        lo = hi
    raise NoFeasiblePointWithinDomain(t, x0, scenario.X_max)


def _onset(scenario: Scenario, t0: float, x0: float, u0: float, h: float) -> float:
    """First time in (t0, t0 + h] where the Euler predictor path leaves the feasible set."""
    G = scenario.gamma.value
    gs = scenario.gamma_star
    lo, hi = 0.0, h
    for _ in range(200):
        if hi - lo <= 1e-12 * max(1.0, h):
            break
        mid = 0.5 * (lo + hi)
        if G(t0 + mid, x0 + mid * u0) >= gs:
            lo = mid
        else:
            hi = mid
    return t0 + hi


def solve_projected(scenario: Scenario, opts: ProjectionOptions = ProjectionOptions()) -> Trajectory:
    """Run the catch-up scheme on a uniform grid over [0, T].

    ``mu`` samples hold the continuous correction rate ``-(L_{n+1} - L*)/h``
    of non-jump corrections; jump corrections become atoms whose
    time is the instant the predictor path crosses into ``{gamma < gamma_star}``.
    """
    o = opts.resolved(scenario)
    T = scenario.T
    n_steps = max(1, math.ceil(T / o.h - 1e-9))
    times = np.linspace(0.0, T, n_steps + 1)
    U = scenario.velocity.value
    G = scenario.gamma.value
    gs = scenario.gamma_star

    positions = np.empty(n_steps + 1)
    mu = np.zeros(n_steps + 1)
    atoms = []

    L0 = scenario.L0
    start = forward_feasible_point(scenario, 0.0, L0, o)
    if start - L0 > o.scan_step:
        atoms.append(JumpAtom(0.0, start - L0, (0.0, 0.0), L0, start))
    positions[0] = start

    L = start
    for n in range(n_steps):
        t, t_next = times[n], times[n + 1]
        h = t_next - t
        u = U(t, L)
        pred = L + h * u
        if pred > scenario.X_max and G(t_next, pred) >= gs:
            raise FrontEscapedDomain(t_next, pred, scenario.X_max)
        try:
            new = forward_feasible_point(scenario, t_next, pred, o)
        except NoFeasiblePointWithinDomain as exc:
            raise NoFeasiblePointWithinDomain(t_next, exc.x0, exc.x_max) from None
        corr = new - pred
        if corr > o.scan_step and corr > o.jump_speed * h:
            t_c = _onset(scenario, t, L, u, h)
            before = L + (t_c - t) * u
            atoms.append(JumpAtom(t_c, corr, (t_c, t_next), before, new))
        else:
            mu[n + 1] = -corr / h
        positions[n + 1] = L = new

    return Trajectory(times, positions, mu, "projection", o.h, atoms=tuple(atoms),
                      info={"options": o.to_dict(), "steps": n_steps,
                            "h_effective": T / n_steps})
