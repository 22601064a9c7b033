"""Reaction multiplier of a front path: absolutely continuous part, atoms, regimes.

The a.e. equation ``dL/dt + mu_a = U`` is checked off the jump windows; the
jumps themselves carry the singular part as atoms with mass ``-magnitude``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AtomOutsideContactSet
from .fields import Scenario, jump_speed_threshold, sample_constants
from .trajectory import JumpAtom, Trajectory

__all__ = [
    "Regime", "MultiplierDecomposition", "reconstruct_multiplier", "classify_regimes",
    "contact_support", "complementarity_residual", "conservation_residual",
    "default_contact_tol", "jump_speed_threshold", "JUMP_SPEED_FACTOR",
]

JUMP_SPEED_FACTOR = 10.0


class Regime(str, enum.Enum):
    INTERIOR = "interior"
    CONTACT = "contact"
    JUMP = "jump"


@dataclass(frozen=True, eq=False)
class MultiplierDecomposition:
    times: np.ndarray
    mu_a: np.ndarray
    atoms: tuple
    defect: float  # sup |dL/dt + mu_solver - U| off the jump windows
    sign_defect: float  # sup of mu_a > 0, or |mu_a| where gamma > gamma_star + contact_tol
    windows: tuple  # (t_start, t_end) per atom
    in_window: np.ndarray  # bool per sample
    speed_threshold: float
    contact_tol: float

    @property
    def atom_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms))

    def summary(self) -> dict:
        return {
            "atoms": [a.to_dict() for a in self.atoms],
            "atom_count": len(self.atoms),
            "defect": self.defect,
            "sign_defect": self.sign_defect,
            "mu_a_min": float(self.mu_a.min()),
            "mu_a_integral": float(_trapezoid(self.mu_a, self.times)),
            "speed_threshold": self.speed_threshold,
            "contact_tol": self.contact_tol,
        }


def _trapezoid(y, t) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t))) if len(t) > 1 else 0.0


def _one_sided(s_near, s_far, h_near, h_far):
    # second-order derivative at the outer end of two adjacent intervals
    return s_near + (s_near - s_far) * h_near / (h_near + h_far)


def default_contact_tol(scenario: Scenario) -> float:
    s = sample_constants(scenario)
    gap = s["Gamma_max"] - scenario.gamma_star
    return 1e-3 * (gap if gap > 0 else scenario.gamma_star)


def _penalty_windows(traj: Trajectory, scenario: Scenario, threshold: float):
    """Sample index ranges ``[a, b]`` of penalty traversal layers.

    A layer is seeded by a run of intervals whose speed exceeds ``threshold``;
    it reaches back to the first active sample (gamma <= gamma_star) of that
    contact episode, and forward while the front stays active and keeps
    slowing down, so it ends at the exit sample or at the speed minimum where
    the front settles onto a moving root.
    """
    t, L = traj.times, traj.positions
    n = len(t)
    if n < 2:
        return []
    speed = np.diff(L) / np.diff(t)
    active = scenario.gamma.value(t, L) <= scenario.gamma_star
    fast = speed > threshold

    ranges = []
    k = 0
    while k < n - 1:
        if not fast[k]:
            k += 1
            continue
        p = k
        while k + 1 < n - 1 and fast[k + 1]:
            k += 1
        q = k
        a = p
        while a > 0 and active[a - 1]:
            a -= 1
        b = q + 1
        while b + 1 < n and active[b] and speed[b] < speed[b - 1]:
            b += 1
        ranges.append([a, b])
        k = q + 1

    merged = []
    for a, b in ranges:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _penalty_atoms(traj: Trajectory, scenario: Scenario, ranges):
    t, L = traj.times, traj.positions
    u = scenario.velocity.value(t, L)
    atoms = []
    for a, b in ranges:
        rise = L[b] - L[a]
        drift = _trapezoid(u[a:b + 1], t[a:b + 1])
        magnitude = rise - drift
        if magnitude > 0:
            atoms.append(JumpAtom(t[a], magnitude, (t[a], t[b]), L[a], L[b]))
    return atoms


def reconstruct_multiplier(traj: Trajectory, scenario: Scenario,
                           jump_speed_factor: float = JUMP_SPEED_FACTOR,
                           contact_tol: Optional[float] = None) -> MultiplierDecomposition:
    """Split the reaction of ``traj`` into ``mu_a`` samples and jump atoms.

    Projection runs keep their atoms; penalty runs get atoms extracted from
    the fast traversal layers.  ``mu_a = U - dL/dt`` uses only intervals that
    do not touch a jump window; samples inside a window carry ``mu_a = 0``.
    ``defect`` compares that derivative with the multiplier the solver
    recorded, so it measures how well the a.e. equation holds on the samples.
    """
    traj.check()
    t, L = traj.times, traj.positions
    n = len(t)
    threshold = jump_speed_threshold(scenario, jump_speed_factor)
    tol = default_contact_tol(scenario) if contact_tol is None else contact_tol

    if traj.method == "projection":
        atoms = list(traj.atoms)
    else:
        atoms = _penalty_atoms(traj, scenario, _penalty_windows(traj, scenario, threshold))
    windows = tuple(a.window for a in atoms)

    in_window = np.zeros(n, dtype=bool)
    dirty = np.zeros(max(n - 1, 0), dtype=bool)
    for w0, w1 in windows:
        in_window |= (t >= w0) & (t <= w1)
        if n > 1:
            dirty |= (t[1:] >= w0) & (t[:-1] <= w1)

    u = scenario.velocity.value(t, L)
    mu_a = np.zeros(n)
    used = np.zeros(n, dtype=bool)
    if n > 1:
        dt = np.diff(t)
        slope = np.diff(L) / dt
        for i in range(n):
            if in_window[i]:
                continue
            left = i - 1 if i > 0 and not dirty[i - 1] else None
            right = i if i < n - 1 and not dirty[i] else None
            if traj.method == "projection":
                # Euler-consistent: the interval ending at i carries U at its left end
                if left is not None:
                    mu_a[i] = u[left] - slope[left]
                elif right is not None:
                    mu_a[i] = u[right] - slope[right]
                else:
                    continue
            else:
                if left is not None and right is not None:
                    d = (slope[left] * dt[right] + slope[right] * dt[left]) / (dt[left] + dt[right])
                elif left is not None:
                    far = left - 1 if left > 0 and not dirty[left - 1] else None
                    d = slope[left] if far is None else _one_sided(
                        slope[left], slope[far], dt[left], dt[far])
                elif right is not None:
                    far = right + 1 if right + 1 < n - 1 and not dirty[right + 1] else None
                    d = slope[right] if far is None else _one_sided(
                        slope[right], slope[far], dt[right], dt[far])
                else:
                    continue
                mu_a[i] = u[i] - d
            used[i] = True

    gap = scenario.gamma.value(t, L) - scenario.gamma_star
    interior = gap > tol
    resid = np.where(interior, np.abs(mu_a), np.maximum(mu_a, 0.0))
    sign_defect = float(resid[used].max()) if used.any() else 0.0
    defect = float(np.abs(mu_a - traj.mu)[used].max()) if used.any() else 0.0
    return MultiplierDecomposition(
        times=t.copy(), mu_a=mu_a, atoms=tuple(atoms), defect=defect,
        sign_defect=sign_defect, windows=windows,
        in_window=in_window, speed_threshold=threshold, contact_tol=tol,
    )


def classify_regimes(traj: Trajectory, scenario: Scenario, contact_tol: Optional[float] = None,
                     decomp: Optional[MultiplierDecomposition] = None) -> list:
    """Label each sample interior, contact or jump."""
    if decomp is None:
        decomp = reconstruct_multiplier(traj, scenario, contact_tol=contact_tol)
    tol = decomp.contact_tol if contact_tol is None else contact_tol
    if not tol > 0:
        raise ValueError("contact_tol must be > 0")
    gap = scenario.gamma.value(traj.times, traj.positions) - scenario.gamma_star
    labels = []
    for i in range(len(traj.times)):
        if decomp.in_window[i]:
            labels.append(Regime.JUMP)
        elif gap[i] > tol:
            labels.append(Regime.INTERIOR)
        else:
            labels.append(Regime.CONTACT)
    return labels


def contact_support(decomp: MultiplierDecomposition, traj: Trajectory, scenario: Scenario,
                    tol: Optional[float] = None) -> list:
    """Maximal time intervals where ``|gamma(t, L(t)) - gamma_star| <= tol``.

    Samples inside a jump window belong to the support (the front crosses
    the contact set there).  Every atom time is checked to lie in one.
    """
    tol = decomp.contact_tol if tol is None else tol
    if not tol > 0:
        raise ValueError("tol must be > 0")
    t, L = traj.times, traj.positions
    G = scenario.gamma.value
    gs = scenario.gamma_star
    on = (np.abs(G(t, L) - gs) <= tol) | decomp.in_window

    intervals = []
    i, n = 0, len(t)
    while i < n:
        if not on[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and on[j + 1]:
            j += 1
        intervals.append((float(t[i]), float(t[j])))
        i = j + 1

    for atom in decomp.atoms:
        # a jump starts or lands on the contact set; an infeasible start only lands there
        gap = min(abs(G(atom.time, atom.before) - gs), abs(G(atom.time, atom.after) - gs))
        if gap > tol:
            raise AtomOutsideContactSet(atom.time, gap)
        if not any(a - 1e-12 <= atom.time <= b + 1e-12 for a, b in intervals):
            intervals.append((atom.time, atom.time))
            intervals.sort()
    return intervals


def complementarity_residual(decomp: MultiplierDecomposition, traj: Trajectory,
                             scenario: Scenario) -> float:
    """``sup_i |mu_a(t_i) * (gamma(t_i, L_i) - gamma_star)|``."""
    gap = scenario.gamma.value(traj.times, traj.positions) - scenario.gamma_star
    return float(np.max(np.abs(decomp.mu_a * gap))) if len(gap) else 0.0


def conservation_residual(decomp: MultiplierDecomposition, traj: Trajectory,
                          scenario: Scenario) -> float:
    """``(L(T) - L0) - (int U - int mu_a - sum of atom masses)``."""
    t, L = traj.times, traj.positions
    u = scenario.velocity.value(t, L)
    rhs = _trapezoid(u, t) - _trapezoid(decomp.mu_a, t) - decomp.atom_mass
    return float((L[-1] - scenario.L0) - rhs)
