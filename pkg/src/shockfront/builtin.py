"""Reference scenarios used by the tests, the acceptance suite and the CLI."""
from __future__ import annotations

from .fields import FieldSpec, Scenario

__all__ = ["trivial", "static_band", "decaying_band", "contact_tracking", "BUILTINS"]


def trivial(T: float = 5.0) -> Scenario:
    """Constant fields; the constraint never binds."""
    return Scenario(FieldSpec.constant(0.9), FieldSpec.constant(0.2), 0.62, 0.0, T, 5.0)


def static_band(T: float = 8.0, X_max: float = 5.0) -> Scenario:
    """gamma = 1 - x exp(-x^2): the front jumps once across the infeasible band."""
    return Scenario(FieldSpec.gauss_band(1.0, 0.5), FieldSpec.constant(0.2), 0.62, 0.0, T, X_max)


def decaying_band(T: float = 12.0, X_max: float = 5.0) -> Scenario:
    """Band with a(t) = 1 - 0.05 t and a slow front."""
    return Scenario(FieldSpec.gauss_band(1.0, 0.5, a1=-0.05), FieldSpec.constant(0.01),
                    0.62, 0.0, T, X_max)


def contact_tracking(T: float = 6.5, X_max: float = 3.0) -> Scenario:
    """Decaying band with U = 0.05: jump, then the front rides the moving right root."""
    return Scenario(FieldSpec.gauss_band(1.0, 0.5, a1=-0.05), FieldSpec.constant(0.05),
                    0.62, 0.0, T, X_max)


BUILTINS = {
    "trivial": trivial,
    "static-band": static_band,
    "decaying-band": decaying_band,
    "contact-tracking": contact_tracking,
}
