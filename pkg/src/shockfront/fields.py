"""Problem instances: cohesion and velocity fields, threshold, horizon.

Also validates the standing hypotheses on the fields (sign, boundedness,
Lipschitz and time-derivative bounds) and estimates the structural constant
``eta_star``, the infimum of the running averages of the cohesion field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateAverage,
    EvaluationDomainError,
    HypothesisViolation,
    SchemaError,
)
from .expr import compile_expression, parse_expression

__all__ = [
    "FieldSpec", "Scenario", "BoundsCertificate", "Violation", "Grid",
    "eval_fields", "validate_hypotheses", "estimate_eta_star",
    "sample_constants", "running_average", "jump_speed_threshold", "SAFETY_FACTOR",
]

FIELD_KINDS = {
    "constant": ("value",),
    "affine-in-t": ("c0", "c1"),
    "gauss-band": ("a0", "a1", "gamma0"),
    "expression": (),
}
BOUND_KEYS = ("U_Lip", "U_0max", "Gamma_max", "C_Gamma", "eta_star")
SUP_CONSTANTS = ("U_Lip", "U_0max", "Gamma_max", "C_Gamma")

SAFETY_FACTOR = 1.05
ETA_REFINEMENT_TOL = 1e-3


def _scalar(*values) -> bool:
    return all(isinstance(v, (float, int)) for v in values)


@dataclass(frozen=True)
class FieldSpec:
    """A scalar field f(t, x) from one of the built-in families or an expression.

    gauss-band is ``(a0 + a1*t) - 2*gamma0*x*exp(-x^2)``.
    """

    kind: str
    params: tuple = ()
    formula: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise SchemaError("kind", f"unknown field kind {self.kind!r}")
        names = FIELD_KINDS[self.kind]
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != len(names):
            raise SchemaError("params", f"{self.kind} takes parameters {names}")
        if not all(math.isfinite(p) for p in self.params):
            raise SchemaError("params", "parameters must be finite")
        if self.kind == "gauss-band" and not self.params[2] > 0:
            raise SchemaError("gamma0", "gauss-band requires gamma0 > 0")
        if self.kind == "expression":
            if not self.formula:
                raise SchemaError("formula", "expression field needs a formula")
            parse_expression(self.formula)
        elif self.formula is not None:
            raise SchemaError("formula", f"{self.kind} field takes no formula")

    @classmethod
    def constant(cls, value: float) -> "FieldSpec":
        return cls("constant", (value,))

    @classmethod
    def affine(cls, c0: float, c1: float) -> "FieldSpec":
        return cls("affine-in-t", (c0, c1))

    @classmethod
    def gauss_band(cls, a0: float, gamma0: float, a1: float = 0.0) -> "FieldSpec":
        return cls("gauss-band", (a0, a1, gamma0))

    @classmethod
    def expression(cls, formula: str) -> "FieldSpec":
        return cls("expression", (), formula)

    @property
    def named_params(self) -> dict:
        return dict(zip(FIELD_KINDS[self.kind], self.params))

    @cached_property
    def value(self) -> Callable:
        """f(t, x); accepts floats or broadcastable arrays."""
        if self.kind == "constant":
            (c,) = self.params
            return lambda t, x: c if _scalar(t, x) else np.full(np.broadcast(t, x).shape, c)
        if self.kind == "affine-in-t":
            c0, c1 = self.params
            return lambda t, x: (c0 + c1 * t) if _scalar(t, x) else np.broadcast_to(
                c0 + c1 * np.asarray(t, float), np.broadcast(t, x).shape).copy()
        if self.kind == "gauss-band":
            a0, a1, g0 = self.params

            def band(t, x):
                if _scalar(t, x):
                    return a0 + a1 * t - 2.0 * g0 * x * math.exp(-x * x)
                x = np.asarray(x, float)
                return a0 + a1 * np.asarray(t, float) - 2.0 * g0 * x * np.exp(-x * x)
            return band
        return compile_expression(parse_expression(self.formula))

    def dt(self, t, x, h_t: float = 1e-6):
        """Partial derivative in t; analytic for built-ins, central difference otherwise."""
        if self.kind == "constant":
            return 0.0 if _scalar(t, x) else np.zeros(np.broadcast(t, x).shape)
        if self.kind in ("affine-in-t", "gauss-band"):
            c1 = self.params[1]
            return c1 if _scalar(t, x) else np.full(np.broadcast(t, x).shape, c1)
        f = self.value
        return (f(t + h_t, x) - f(t - h_t, x)) / (2.0 * h_t)

    def dx(self, t, x, h_x: float = 1e-6):
        """Partial derivative in x; analytic for built-ins, central difference otherwise."""
        if self.kind in ("constant", "affine-in-t"):
            return 0.0 if _scalar(t, x) else np.zeros(np.broadcast(t, x).shape)
        if self.kind == "gauss-band":
            g0 = self.params[2]
            if _scalar(t, x):
                return -2.0 * g0 * (1.0 - 2.0 * x * x) * math.exp(-x * x)
            x = np.asarray(x, float)
            return np.broadcast_to(-2.0 * g0 * (1.0 - 2.0 * x * x) * np.exp(-x * x),
                                   np.broadcast(t, x).shape).copy()
        f = self.value
        lo = max(x - h_x, 0.0) if _scalar(x) else np.maximum(np.asarray(x, float) - h_x, 0.0)
        return (f(t, x + h_x) - f(t, lo)) / (x + h_x - lo)

    def to_dict(self) -> dict:
        if self.kind == "expression":
            return {"kind": self.kind, "formula": self.formula}
        return {"kind": self.kind, **self.named_params}


@dataclass(frozen=True)
class Scenario:
    """Problem instance for dL/dt + dI_K(gamma(t, L)) contains U(t, L)."""

    gamma: FieldSpec
    velocity: FieldSpec
    gamma_star: float
    L0: float
    T: float
    X_max: float
    bounds: tuple = ()  # declared certificate constants as (name, value) pairs

    def __post_init__(self):
        for name in ("gamma_star", "L0", "T", "X_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise SchemaError(name, f"{name} must be a finite number")
            object.__setattr__(self, name, float(value))
        if not self.gamma_star > 0:
            raise SchemaError("gamma_star", "gamma_star must be > 0")
        if not self.L0 >= 0:
            raise SchemaError("L0", "L0 must be >= 0")
        if not self.T > 0:
            raise SchemaError("T", "T must be > 0")
        if not self.X_max > self.L0:
            raise SchemaError("X_max", "X_max must be > L0")
        pairs = tuple(sorted(dict(self.bounds).items()))
        for key, value in pairs:
            if key not in BOUND_KEYS:
                raise SchemaError(f"bounds.{key}", "unknown bound constant")
            if not math.isfinite(value) or (key != "eta_star" and value < 0):
                raise SchemaError(f"bounds.{key}", "must be finite and nonnegative")
        object.__setattr__(self, "bounds", tuple((k, float(v)) for k, v in pairs))

    @property
    def declared(self) -> dict:
        return dict(self.bounds)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {
            "gamma": self.gamma.to_dict(),
            "velocity": self.velocity.to_dict(),
            "gamma_star": self.gamma_star,
            "L0": self.L0,
            "T": self.T,
            "X_max": self.X_max,
        }
        if self.bounds:
            out["bounds"] = self.declared
        return out


def eval_fields(scenario: Scenario, t: float, x: float):
    """Return ``(U, gamma, d gamma/dt)`` at ``(t, x)``."""
    if not 0.0 <= t <= scenario.T:
        raise EvaluationDomainError(f"t={t!r} outside [0, {scenario.T}]")
    if not x >= 0.0:
        raise EvaluationDomainError(f"x={x!r} is negative")
    h_t = 1e-6 * max(1.0, scenario.T)
    return (
        scenario.velocity.value(t, x),
        scenario.gamma.value(t, x),
        scenario.gamma.dt(t, x, h_t),
    )


# --------------------------------------------------------------------------
# hypotheses and certificate

@dataclass(frozen=True)
class Violation:
    hypothesis: str
    t: float
    x: float
    value: float


@dataclass(frozen=True)
class Grid:
    nt: int = 401
    nx: int = 401

    def __post_init__(self):
        if self.nt < 2 or self.nx < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def axes(self, scenario: Scenario):
        return (np.linspace(0.0, scenario.T, self.nt),
                np.linspace(scenario.L0, scenario.X_max, self.nx))


@dataclass(frozen=True)
class BoundsCertificate:
    U_Lip: float
    U_0max: float
    Gamma_max: float
    C_Gamma: float
    eta_star: float
    gamma_star: float
    provenance: tuple = ()  # (name, "declared" | "estimated") pairs
    eta_variant: str = "literal"
    notes: tuple = ()

    @property
    def valid(self) -> bool:
        return (self.eta_star > self.gamma_star > 0 and self.Gamma_max >= self.gamma_star
                and min(self.U_Lip, self.U_0max, self.C_Gamma) >= 0)

    def source(self, name: str) -> str:
        return dict(self.provenance).get(name, "declared")

    def inflated(self, factor: float = SAFETY_FACTOR) -> "BoundsCertificate":
        """Copy with estimated supremum constants scaled by ``factor``.

        Grid sampling underestimates suprema; ``eta_star`` is an infimum and
        is left untouched.
        """
        changes = {name: getattr(self, name) * factor
                   for name in SUP_CONSTANTS if self.source(name) == "estimated"}
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "U_Lip": self.U_Lip, "U_0max": self.U_0max, "Gamma_max": self.Gamma_max,
            "C_Gamma": self.C_Gamma, "eta_star": self.eta_star, "gamma_star": self.gamma_star,
            "provenance": dict(self.provenance), "eta_variant": self.eta_variant,
            "notes": list(self.notes), "valid": self.valid,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundsCertificate":
        return cls(
            U_Lip=data["U_Lip"], U_0max=data["U_0max"], Gamma_max=data["Gamma_max"],
            C_Gamma=data["C_Gamma"], eta_star=data["eta_star"], gamma_star=data["gamma_star"],
            provenance=tuple(sorted(data.get("provenance", {}).items())),
            eta_variant=data.get("eta_variant", "literal"), notes=tuple(data.get("notes", ())),
        )


def running_average(scenario: Scenario, t, y, panels: int = 512, variant: str = "literal"):
    """(1/y) int_{L0}^y gamma(t, s) ds by composite trapezoid, elementwise in (t, y).

    ``variant="shifted"`` divides by ``y - L0`` instead.
    """
    t, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(y, float))
    L0 = scenario.L0
    frac = np.linspace(0.0, 1.0, panels + 1)
    sigma = L0 + (y[..., None] - L0) * frac
    g = scenario.gamma.value(t[..., None], sigma)
    integral = np.sum(0.5 * (g[..., 1:] + g[..., :-1]) * np.diff(sigma, axis=-1), axis=-1)
    denom = y - L0 if variant == "shifted" else y
    return integral / denom


def estimate_eta_star(scenario: Scenario, ny: int = 401, nt: int = 401,
                      panels_per_cell: int = 8, variant: str = "literal") -> float:
    """Grid infimum of the running average of gamma over t and y in (L0, X_max].

    The literal average ``(1/y) int_{L0}^y`` tends to 0 as y -> L0 when
    L0 > 0, so that case raises :class:`DegenerateAverage` unless
    ``variant="shifted"`` (divide by ``y - L0``) is requested explicitly.
    """
    if variant not in ("literal", "shifted"):
        raise ValueError(f"unknown eta_star variant {variant!r}")
    if variant == "literal" and scenario.L0 > 0:
        raise DegenerateAverage(
            f"literal running average degenerates for L0={scenario.L0} > 0; "
            "request variant='shifted' for the (1/(y-L0)) average"
        )
    t = np.linspace(0.0, scenario.T, nt)
    sigma = np.linspace(scenario.L0, scenario.X_max, (ny - 1) * panels_per_cell + 1)
    g = scenario.gamma.value(t[:, None], sigma[None, :])
    d = np.diff(sigma)
    cum = np.concatenate(
        [np.zeros((nt, 1)), np.cumsum(0.5 * (g[:, 1:] + g[:, :-1]) * d, axis=1)], axis=1)
    idx = np.arange(1, ny) * panels_per_cell
    y = sigma[idx]
    denom = y - scenario.L0 if variant == "shifted" else y
    return float(np.min(cum[:, idx] / denom))


@lru_cache(maxsize=64)
def sample_constants(scenario: Scenario, grid: Grid = Grid()) -> dict:
    """Raw grid estimates of the field constants (no validation, no inflation)."""
    t, x = grid.axes(scenario)
    T2, X2 = np.meshgrid(t, x, indexing="ij")
    u = scenario.velocity.value(T2, X2)
    g = scenario.gamma.value(T2, X2)
    h_t = 1e-6 * max(1.0, scenario.T)
    g_t = scenario.gamma.dt(T2, X2, h_t)
    g_x = scenario.gamma.dx(T2, X2)
    u0 = scenario.velocity.value(t, np.zeros_like(t))
    quot = np.abs(np.diff(u, axis=1)) / np.diff(x)[None, :]
    return {
        "t": t, "x": x, "u": u, "gamma": g, "gamma_t": g_t, "u0": u0,
        "U_Lip": float(quot.max()),
        "U_0max": float(max(u0.max(), 0.0)),
        "Gamma_max": float(g.max()),
        "Gamma_min": float(g.min()),
        "C_Gamma": float(np.abs(g_t).max()),
        "Gamma_x_max": float(np.abs(g_x).max()),
        "U_max": float(u.max()),
    }


def jump_speed_threshold(scenario: Scenario, factor: float = 10.0) -> float:
    """Speed above which front motion counts as a jump rather than drift.

    ``factor * (U_0max + U_Lip * X_max)``, an upper bound for U on the domain
    scaled up; a tiny floor keeps U == 0 scenarios well defined.
    """
    s = sample_constants(scenario)
    return factor * max(s["U_0max"] + s["U_Lip"] * scenario.X_max, 1e-12)


def _witness(values, t, x, pick):
    i, j = np.unravel_index(pick(values), values.shape)
    return float(t[i]), float(x[j]), float(values[i, j])


def validate_hypotheses(scenario: Scenario, grid: Grid = Grid(),
                        eta_variant: str = "literal") -> BoundsCertificate:
    """Sample the field hypotheses on ``grid`` and build a certificate.

    Raises :class:`HypothesisViolation` listing every failed hypothesis with a
    witness point.  A certificate whose ``eta_star`` does not exceed
    ``gamma_star`` is returned with ``valid == False``.
    """
    s = sample_constants(scenario, grid)
    t, x = s["t"], s["x"]
    declared = scenario.declared
    violations: list[Violation] = []

    u = s["u"]
    if u.min() < 0:
        violations.append(Violation("U >= 0", *_witness(u, t, x, np.argmin)))
    if s["u0"].min() < 0:
        k = int(np.argmin(s["u0"]))
        violations.append(Violation("U(t, 0) >= 0", float(t[k]), 0.0, float(s["u0"][k])))
    g = s["gamma"]
    if g.min() < 0:
        violations.append(Violation("0 <= gamma", *_witness(g, t, x, np.argmin)))

    rtol = 1e-9
    if "Gamma_max" in declared and g.max() > declared["Gamma_max"] * (1 + rtol):
        violations.append(Violation("gamma <= Gamma_max", *_witness(g, t, x, np.argmax)))
    if "C_Gamma" in declared and s["C_Gamma"] > declared["C_Gamma"] * (1 + rtol) + rtol:
        violations.append(Violation("|dgamma/dt| <= C_Gamma",
                                    *_witness(np.abs(s["gamma_t"]), t, x, np.argmax)))
    if "U_0max" in declared and s["u0"].max() > declared["U_0max"] * (1 + rtol):
        k = int(np.argmax(s["u0"]))
        violations.append(Violation("U(t, 0) <= U_0max", float(t[k]), 0.0, float(s["u0"][k])))
    if "U_Lip" in declared and s["U_Lip"] > declared["U_Lip"] * (1 + rtol) + rtol:
        quot = np.abs(np.diff(u, axis=1)) / np.diff(x)[None, :]
        violations.append(Violation("x -> U Lipschitz with U_Lip", *_witness(quot, t, x, np.argmax)))

    eta_est = estimate_eta_star(scenario, ny=grid.nx, nt=grid.nt, variant=eta_variant)
    if "eta_star" in declared and declared["eta_star"] > eta_est + ETA_REFINEMENT_TOL:
        violations.append(Violation("eta_star <= running average", 0.0, scenario.X_max, eta_est))
    if violations:
        raise HypothesisViolation(violations)

    values, provenance = {}, []
    for name in BOUND_KEYS:
        if name in declared:
            values[name] = declared[name]
            provenance.append((name, "declared"))
        else:
            values[name] = eta_est if name == "eta_star" else s[name]
            provenance.append((name, "estimated"))

    notes = []
    if scenario.gamma.value(0.0, scenario.L0) < scenario.gamma_star:
        notes.append("infeasible start: gamma(0, L0) < gamma_star; projection jumps at t=0, "
                     "penalty runs show a boundary layer")
    if values["eta_star"] <= scenario.gamma_star:
        notes.append("eta_star <= gamma_star: hypothesis eta_star > gamma_star fails")
    if s["Gamma_min"] < scenario.gamma_star and s["Gamma_max"] < scenario.gamma_star:
        notes.append("gamma < gamma_star on the whole grid")
    return BoundsCertificate(
        gamma_star=scenario.gamma_star, provenance=tuple(sorted(provenance)),
        eta_variant=eta_variant, notes=tuple(notes), **values,
    )
