"""Epsilon sweeps and penalty/projection cross-checks.

Trajectories are compared in sup norm away from the jump windows: inside a
penalty boundary layer the two schemes disagree by construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bounds import certify_run, violation_metrics
from .errors import InvalidEstimateParams, JumpWindowsDisagree, NonPositiveValue, SolverError
from .fields import Scenario, sample_constants, validate_hypotheses
from .multiplier import reconstruct_multiplier
from .penalty import PenaltyOptions, solve_penalized
from .projection import ProjectionOptions, solve_projected
from .trajectory import Trajectory

__all__ = ["SweepResult", "epsilon_sweep", "compare_solvers", "fit_rate", "w_jump",
           "sup_distance", "exclusion_windows"]

logger = logging.getLogger(__name__)


def w_jump(scenario: Scenario, epsilon: float, h: Optional[float] = None) -> float:
    """Half-width of the comparison exclusion around a jump.

    ``10 * eps * (X_max - L0) / band_depth`` with floor ``10 * h``; the band
    depth is ``gamma_star - min gamma`` on the validation grid.
    """
    h = scenario.T / 1e4 if h is None else h
    depth = scenario.gamma_star - sample_constants(scenario)["Gamma_min"]
    w = 10.0 * epsilon * (scenario.X_max - scenario.L0) / depth if depth > 0 else 0.0
    return max(w, 10.0 * h)


def exclusion_windows(atom_lists, half_width: float) -> list:
    """Merged ``[w0 - half_width, w1 + half_width]`` intervals over all atoms."""
    spans = sorted((a.window[0] - half_width, a.window[1] + half_width)
                   for atoms in atom_lists for a in atoms)
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(m) for m in merged]


def _grid(a: Trajectory, b: Trajectory, exclude):
    t = np.union1d(a.times, b.times)
    t = t[(t >= max(a.times[0], b.times[0])) & (t <= min(a.times[-1], b.times[-1]))]
    keep = np.ones(len(t), dtype=bool)
    for lo, hi in exclude:
        keep &= ~((t >= lo) & (t <= hi))
    return t[keep]


def sup_distance(a: Trajectory, b: Trajectory, exclude=()) -> float:
    """``sup |L_a - L_b|`` over the union of both sample grids minus ``exclude``.

    Returns 0.0 when every sample is excluded.
    """
    t = _grid(a, b, exclude)
    if len(t) == 0:
        return 0.0
    return float(np.max(np.abs(a.at(t) - b.at(t))))


def _compared(a: Trajectory, b: Trajectory, exclude):
    # None when the exclusion leaves nothing to compare
    return sup_distance(a, b, exclude) if len(_grid(a, b, exclude)) else None


def fit_rate(points) -> dict:
    """Least-squares line through ``(log eps, log value)``."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("fit_rate needs at least 3 points")
    eps = np.array([p[0] for p in pts], float)
    val = np.array([p[1] for p in pts], float)
    if np.any(eps <= 0) or np.any(val <= 0):
        raise NonPositiveValue("fit_rate needs positive epsilons and values")
    x, y = np.log(eps), np.log(val)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


@dataclass
class SweepResult:
    epsilons: list
    runs: list  # per-epsilon dicts
    cauchy: list  # None where the exclusion windows cover the whole horizon
    rate_fit: Optional[dict]
    oracle_gap: list = field(default_factory=list)
    trajectories: list = field(default_factory=list, repr=False)
    projection: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def bounds_satisfied(self) -> bool:
        return all(r["bounds"] is not None and r["bounds"]["satisfied"] for r in self.runs)

    def to_dict(self) -> dict:
        return {"epsilons": list(self.epsilons), "runs": self.runs, "cauchy": self.cauchy,
                "rate_fit": self.rate_fit, "oracle_gap": self.oracle_gap}


def _solve_one(scenario: Scenario, eps: float, base: PenaltyOptions) -> Trajectory:
    try:
        return solve_penalized(scenario, replace(base, epsilon=eps))
    except SolverError as exc:
        raise SolverError(f"epsilon={eps:g}: {exc}") from exc


def epsilon_sweep(scenario: Scenario, epsilons, opts: Optional[PenaltyOptions] = None,
                  projection: Optional[ProjectionOptions] = ProjectionOptions(),
                  certificate=None, map_fn=map) -> SweepResult:
    """Solve the penalized problem for each epsilon and collect diagnostics.

    ``epsilons`` must be strictly decreasing with at least two entries.
    ``map_fn`` may be an executor's ``map`` to run the epsilons concurrently;
    results are folded in epsilon order, so the outcome does not depend on it.
    Pass ``projection=None`` to skip the projection oracle.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ValueError("epsilons must be positive, strictly decreasing, at least two")
    base = opts or PenaltyOptions(epsilon=eps[0])
    cert = validate_hypotheses(scenario) if certificate is None else certificate

    trajs = list(map_fn(_solve_one, [scenario] * len(eps), eps, [base] * len(eps)))
    decomps = [reconstruct_multiplier(tr, scenario) for tr in trajs]

    proj = oracle = None
    h = None
    if projection is not None:
        proj = solve_projected(scenario, projection)
        h = proj.parameter
        oracle = reconstruct_multiplier(proj, scenario)

    runs, gaps = [], []
    for e, tr, d in zip(eps, trajs, decomps):
        try:
            report = certify_run(tr, scenario, cert, decomp=d).to_dict()
            note = None
        except InvalidEstimateParams as exc:
            report, note = None, str(exc)
        runs.append({
            "epsilon": e,
            "samples": len(tr),
            "L_T": float(tr.positions[-1]),
            "atoms": [a.to_dict() for a in d.atoms],
            "defect": d.defect,
            "violation": violation_metrics(tr, scenario),
            "bounds": report,
            "bounds_note": note,
        })
        if oracle is not None:
            w = w_jump(scenario, e, h)
            gaps.append(_compared(tr, proj, exclusion_windows([d.atoms, oracle.atoms], w)))

    cauchy = []
    for k in range(len(eps) - 1):
        w = w_jump(scenario, eps[k + 1], h)
        excl = exclusion_windows([decomps[k].atoms, decomps[k + 1].atoms], w)
        cauchy.append(_compared(trajs[k], trajs[k + 1], excl))

    rate = None
    pts = [(e, r["violation"]["l2sq"]) for e, r in zip(eps, runs)]
    if len(pts) >= 3 and all(v > 0 for _, v in pts):
        rate = fit_rate(pts)
    logger.info("sweep over %d epsilons: cauchy=%s rate=%s", len(eps), cauchy, rate)
    return SweepResult(eps, runs, cauchy, rate, gaps, trajs, proj)


def compare_solvers(scenario: Scenario, epsilon: float, h: float,
                    w: Optional[float] = None, detail: bool = False):
    """Off-window sup distance between a penalty run and a projection run.

    Raises :class:`JumpWindowsDisagree` when the two runs see different
    numbers of jumps.  With ``detail=True`` returns a dict including both
    trajectories.
    """
    pen = solve_penalized(scenario, PenaltyOptions(epsilon=epsilon))
    proj = solve_projected(scenario, ProjectionOptions(h=h))
    dp = reconstruct_multiplier(pen, scenario)
    dq = reconstruct_multiplier(proj, scenario)
    if len(dp.atoms) != len(dq.atoms):
        raise JumpWindowsDisagree(len(dp.atoms), len(dq.atoms))
    half = w_jump(scenario, epsilon, h) if w is None else w
    excl = exclusion_windows([dp.atoms, dq.atoms], half)
    gap = sup_distance(pen, proj, excl)
    if not detail:
        return gap
    return {"gap": gap, "w_jump": half, "excluded": excl, "penalty": pen, "projection": proj,
            "penalty_decomp": dp, "projection_decomp": dq}
