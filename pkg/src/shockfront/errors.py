"""Exception hierarchy shared by all shockfront modules."""
from __future__ import annotations


class ShockfrontError(Exception):
    """Base class for every error raised by this package."""


# --- scenario / field evaluation -------------------------------------------

class SchemaError(ShockfrontError):
    """Scenario file does not match the expected schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class EvaluationDomainError(ShockfrontError):
    """Field evaluated outside [0, T] x [0, inf)."""


class ExpressionError(ShockfrontError):
    """Base class for expression parse and evaluation failures."""


class ExprSyntaxError(ExpressionError):
    def __init__(self, offset: int, expected: str, text: str = ""):
        self.offset = offset
        self.expected = expected
        self.text = text
        super().__init__(f"syntax error at offset {offset}: expected {expected}")


class UnknownIdentifier(ExpressionError):
    def __init__(self, name: str, offset: int = -1):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r}")


class ExpressionEvalError(ExpressionError):
    def __init__(self, subexpression: str, reason: str):
        self.subexpression = subexpression
        self.reason = reason
        super().__init__(f"{reason} in {subexpression}")


# --- hypotheses -------------------------------------------------------------

class HypothesisViolation(ShockfrontError):
    """One or more field hypotheses fail on the sampling grid.

    ``violations`` holds ``Violation`` records with witness points.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0]
        more = f" (+{len(self.violations) - 1} more)" if len(self.violations) > 1 else ""
        super().__init__(
            f"hypothesis {first.hypothesis!r} violated at t={first.t:.6g}, "
            f"x={first.x:.6g} (observed {first.value:.6g}){more}"
        )


class DegenerateAverage(ShockfrontError):
    """The literal running average (1/y) * int_{L0}^y degenerates for L0 > 0."""


class InvalidEstimateParams(ShockfrontError):
    """alpha/rho outside the admissible window."""


# --- solvers ----------------------------------------------------------------

class SolverError(ShockfrontError):
    """Base class for solver failures."""


class StepUnderflow(SolverError):
    def __init__(self, t: float, h: float, stiffness: float):
        self.t = t
        self.h = h
        self.stiffness = stiffness
        super().__init__(
            f"step size {h:.3g} below h_min at t={t:.9g} "
            f"(local stiffness estimate {stiffness:.3g})"
        )


class NoFeasiblePointWithinDomain(SolverError):
    def __init__(self, t: float, x0: float, x_max: float):
        self.t = t
        self.x0 = x0
        self.x_max = x_max
        super().__init__(f"no feasible point in [{x0:.6g}, {x_max:.6g}] at t={t:.9g}")


class FrontEscapedDomain(SolverError):
    def __init__(self, t: float, position: float, x_max: float):
        self.t = t
        self.position = position
        self.x_max = x_max
        super().__init__(f"front left [L0, X_max={x_max:.6g}] at t={t:.9g} (L={position:.6g})")


# --- analysis ---------------------------------------------------------------

class InconsistentTrajectory(ShockfrontError):
    pass


class AtomOutsideContactSet(ShockfrontError):
    def __init__(self, time: float, gap: float):
        self.time = time
        self.gap = gap
        super().__init__(f"atom at t={time:.9g} lies outside the contact set (|gamma - gamma*| = {gap:.3g})")


class WrongMethod(ShockfrontError):
    pass


class JumpWindowsDisagree(ShockfrontError):
    def __init__(self, n_penalty: int, n_projection: int):
        self.n_penalty = n_penalty
        self.n_projection = n_projection
        super().__init__(f"penalty run has {n_penalty} atoms, projection run has {n_projection}")


class NonPositiveValue(ShockfrontError):
    pass
