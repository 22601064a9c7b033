"""Sampled front paths and jump atoms handed between solvers and analysis."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentTrajectory

MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class JumpAtom:
    """A jump of the front, i.e. an atom of the singular multiplier part.

    ``window`` is the time interval attributed to the jump (a single
    instant for projection runs, the traversal layer for penalty runs);
    ``before``/``after`` are the positions at its ends.
    """

    time: float
    magnitude: float
    window: tuple
    before: float
    after: float

    def __post_init__(self):
        for name in ("time", "magnitude", "before", "after"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "window", tuple(float(w) for w in self.window))

    @property
    def mass(self) -> float:
        return -self.magnitude

    def to_dict(self) -> dict:
        return {"time": self.time, "magnitude": self.magnitude, "mass": self.mass,
                "window": list(self.window), "before": self.before, "after": self.after}

    @classmethod
    def from_dict(cls, data: dict) -> "JumpAtom":
        return cls(data["time"], data["magnitude"], tuple(data["window"]),
                   data["before"], data["after"])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples ``(t_i, L_i, mu_i)`` of one solver run.

    ``mu`` holds the penalty multiplier for penalty runs and the scheme's
    continuous correction rate for projection runs.  ``parameter`` is epsilon
    (penalty) or the time step h (projection).
    """

    times: np.ndarray
    positions: np.ndarray
    mu: np.ndarray
    method: str
    parameter: float
    atoms: tuple = ()
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "positions", "mu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if self.method not in ("penalty", "projection"):
            raise ValueError(f"unknown method {self.method!r}")

    def __len__(self) -> int:
        return len(self.times)

    def check(self) -> None:
        """Raise :class:`InconsistentTrajectory` unless the samples are usable."""
        n = len(self.times)
        if n == 0:
            raise InconsistentTrajectory("empty trajectory")
        if len(self.positions) != n or len(self.mu) != n:
            raise InconsistentTrajectory("times, positions and mu differ in length")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.positions))
                and np.all(np.isfinite(self.mu))):
            raise InconsistentTrajectory("non-finite samples")
        if np.any(np.diff(self.times) <= 0):
            raise InconsistentTrajectory("times are not strictly increasing")
        drop = np.diff(self.positions)
        scale = max(1.0, float(np.max(np.abs(self.positions))))
        if np.any(drop < -MONOTONE_TOL * scale):
            i = int(np.argmin(drop))
            raise InconsistentTrajectory(
                f"position decreases by {-drop[i]:.3g} at t={self.times[i]:.9g}")

    @property
    def label(self) -> str:
        key = "eps" if self.method == "penalty" else "h"
        return f"{self.method}-{key}{self.parameter:g}"

    def at(self, t):
        """Piecewise-linear dense output."""
        return np.interp(t, self.times, self.positions)
