"""A-priori estimates for the penalized front and per-run certification.

With ``alpha`` in (gamma_star, eta_star) and ``0 < rho <= alpha - gamma_star``
the constants

    C1 = (Gamma_max + alpha) * U_0max * T
    C2 = (Gamma_max + alpha) * U_Lip + C_Gamma

bound the front position, the multiplier's L1 mass, its pairing with
``gamma - alpha``, the total variation of the path and the squared constraint
violation, uniformly in epsilon.  Each check returns a :class:`BoundEntry`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidEstimateParams, WrongMethod
from .fields import ETA_REFINEMENT_TOL, BoundsCertificate, Scenario, running_average
from .multiplier import MultiplierDecomposition, complementarity_residual, reconstruct_multiplier
from .trajectory import Trajectory

__all__ = [
    "EstimateParams", "BoundEntry", "BoundReport", "default_params", "sample_params",
    "check_params", "constants_C1_C2", "gronwall_check", "bv_seminorm_check",
    "penalty_l1_check", "multiplier_l1_check", "violation_metrics", "violation_check",
    "energy_identity_terms", "energy_identity_residual", "infimum_check", "sign_check",
    "complementarity_check", "energy_check", "certify_run", "SIGMA_PANELS", "ENERGY_TOL",
]

SIGMA_PANELS = 512
ENERGY_TOL = 1e-2
REL_SLACK = 1e-9


@dataclass(frozen=True)
class EstimateParams:
    alpha: float
    rho: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "rho": self.rho}


@dataclass(frozen=True)
class BoundEntry:
    """One inequality: ``observed <= bound`` (upper) or ``observed >= bound`` (lower)."""

    name: str
    bound: float
    observed: float
    kind: str = "upper"
    slack: float = 0.0
    at: Optional[float] = None  # time of the tightest sample
    params: Optional[EstimateParams] = None

    @property
    def margin(self) -> float:
        return self.bound - self.observed if self.kind == "upper" else self.observed - self.bound

    @property
    def satisfied(self) -> bool:
        return self.margin >= -self.slack

    def to_dict(self) -> dict:
        return {
            "name": self.name, "kind": self.kind, "bound": self.bound,
            "observed": self.observed, "margin": self.margin, "slack": self.slack,
            "satisfied": self.satisfied, "at": self.at,
            "params": None if self.params is None else self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundEntry":
        p = d.get("params")
        observed = math.inf if d["observed"] is None else d["observed"]
        return cls(d["name"], d["bound"], observed, d.get("kind", "upper"),
                   d.get("slack", 0.0), d.get("at"),
                   None if p is None else EstimateParams(p["alpha"], p["rho"]))


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return all(e.satisfied for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.satisfied]

    def by_name(self, name: str) -> list:
        return [e for e in self.entries if e.name == name]

    def to_dict(self) -> dict:
        return {"satisfied": self.satisfied, "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        return cls([BoundEntry.from_dict(e) for e in d["entries"]])


def _slack(bound: float) -> float:
    return REL_SLACK * max(1.0, abs(bound))


def _cumtrapz(y, t):
    out = np.zeros(len(t))
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# --------------------------------------------------------------------------
# parameters and constants

def check_params(cert: BoundsCertificate, params: EstimateParams) -> None:
    gs, eta = cert.gamma_star, cert.eta_star
    if not gs < params.alpha < eta:
        raise InvalidEstimateParams(
            f"alpha={params.alpha:.6g} outside (gamma_star, eta_star) = ({gs:.6g}, {eta:.6g})")
    if not 0 < params.rho <= params.alpha - gs:
        raise InvalidEstimateParams(
            f"rho={params.rho:.6g} outside (0, alpha - gamma_star] = (0, {params.alpha - gs:.6g}]")


def default_params(cert: BoundsCertificate) -> EstimateParams:
    if not cert.eta_star > cert.gamma_star:
        raise InvalidEstimateParams(
            f"empty window: eta_star={cert.eta_star:.6g} <= gamma_star={cert.gamma_star:.6g}")
    alpha = cert.gamma_star + 0.75 * (cert.eta_star - cert.gamma_star)
    return EstimateParams(alpha, 0.5 * (alpha - cert.gamma_star))


def sample_params(cert: BoundsCertificate, n: int = 5) -> list:
    """``n`` deterministic (alpha, rho) pairs spread across the admissible window."""
    if not cert.eta_star > cert.gamma_star:
        raise InvalidEstimateParams(
            f"empty window: eta_star={cert.eta_star:.6g} <= gamma_star={cert.gamma_star:.6g}")
    out = []
    for k in range(n):
        a = (k + 0.5) / n
        alpha = cert.gamma_star + a * (cert.eta_star - cert.gamma_star)
        rho = (1.0 - 0.9 * k / max(n - 1, 1)) * (alpha - cert.gamma_star)
        out.append(EstimateParams(alpha, rho))
    return out


def constants_C1_C2(cert: BoundsCertificate, params: EstimateParams, T: float):
    check_params(cert, params)
    c1 = (cert.Gamma_max + params.alpha) * cert.U_0max * T
    c2 = (cert.Gamma_max + params.alpha) * cert.U_Lip + cert.C_Gamma
    return c1, c2


def _growth(cert, params, t, c2):
    return np.exp(c2 * np.asarray(t, float) / (cert.eta_star - params.alpha))


def _tightest(name, bound, observed, t, kind, params, slack=None):
    bound, observed = np.asarray(bound, float), np.asarray(observed, float)
    bound, observed = np.broadcast_arrays(bound, observed)
    margin = bound - observed if kind == "upper" else observed - bound
    i = int(np.argmin(margin))
    b = float(bound[i])
    return BoundEntry(name, b, float(observed[i]), kind, _slack(b) if slack is None else slack,
                      float(t[i]), params)


# --------------------------------------------------------------------------
# checks

def gronwall_check(traj: Trajectory, cert: BoundsCertificate, params: EstimateParams,
                   T: Optional[float] = None) -> BoundEntry:
    """``L(t) <= C1/(eta_star - alpha) * exp(C2 t/(eta_star - alpha))`` at every sample."""
    T = traj.times[-1] if T is None else T
    c1, c2 = constants_C1_C2(cert, params, T)
    env = c1 / (cert.eta_star - params.alpha) * _growth(cert, params, traj.times, c2)
    return _tightest("gronwall", env, traj.positions, traj.times, "upper", params)


def _bv_bound(cert, params, t, c1, c2):
    d = cert.eta_star - params.alpha
    grow = _growth(cert, params, t, c2)
    if c2 > 0:
        third = cert.U_Lip * (c1 / c2) * (grow - 1.0)
    else:
        # limit C2 -> 0; C2 = 0 forces U_Lip = 0
        third = cert.U_Lip * c1 * np.asarray(t, float) / d
    return cert.U_0max * np.asarray(t, float) + c1 / params.rho * grow + third


def bv_seminorm_check(traj: Trajectory, cert: BoundsCertificate, params: EstimateParams,
                      T: Optional[float] = None) -> BoundEntry:
    """Running total variation of the samples against the three-term bound."""
    T = traj.times[-1] if T is None else T
    c1, c2 = constants_C1_C2(cert, params, T)
    tv = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(traj.positions)))])
    bound = _bv_bound(cert, params, traj.times, c1, c2)
    return _tightest("bv_seminorm", bound, tv, traj.times, "upper", params)


def _pairing_entries(name, l1, pairing, t, cert, params, c1, c2):
    grow = _growth(cert, params, t, c2)
    return [
        _tightest(f"{name}_l1", c1 / params.rho * grow, l1, t, "upper", params),
        _tightest("pairing_lower", np.zeros_like(t), pairing, t, "lower", params,
                  slack=_slack(float(np.max(np.abs(pairing))) if len(pairing) else 0.0)),
        _tightest("pairing_upper", c1 * grow, pairing, t, "upper", params),
    ]


def penalty_l1_check(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                     params: EstimateParams) -> list:
    """Running ``int |mu_eps|`` and ``int mu_eps (z - alpha)`` against their bounds.

    Returns three entries: ``penalty_l1``, ``pairing_lower`` and ``pairing_upper``.
    """
    if traj.method != "penalty":
        raise WrongMethod("penalty_l1_check needs a penalty run")
    c1, c2 = constants_C1_C2(cert, params, traj.times[-1])
    t = traj.times
    z = scenario.gamma.value(t, traj.positions)
    l1 = _cumtrapz(np.abs(traj.mu), t)
    pairing = _cumtrapz(traj.mu * (z - params.alpha), t)
    return _pairing_entries("penalty", l1, pairing, t, cert, params, c1, c2)


def _atom_pairing(scenario: Scenario, atom, alpha: float, panels: int = SIGMA_PANELS) -> float:
    # limit of int mu_eps (z - alpha) over a traversal layer: int_before^after (alpha - gamma)
    sigma = np.linspace(atom.before, atom.after, panels + 1)
    g = scenario.gamma.value(np.full_like(sigma, atom.time), sigma)
    return float(np.sum(0.5 * ((alpha - g[1:]) + (alpha - g[:-1])) * np.diff(sigma)))


def multiplier_l1_check(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                        params: EstimateParams,
                        decomp: Optional[MultiplierDecomposition] = None) -> list:
    """Measure version of :func:`penalty_l1_check` for any run.

    Uses ``mu_a`` plus the atoms; an atom contributes its magnitude to the L1
    mass and ``int_before^after (alpha - gamma(t_k, s)) ds`` to the pairing.
    """
    decomp = reconstruct_multiplier(traj, scenario) if decomp is None else decomp
    c1, c2 = constants_C1_C2(cert, params, traj.times[-1])
    t = traj.times
    z = scenario.gamma.value(t, traj.positions)
    l1 = _cumtrapz(np.abs(decomp.mu_a), t)
    pairing = _cumtrapz(decomp.mu_a * (z - params.alpha), t)
    for atom in decomp.atoms:
        after = t >= atom.time
        l1 = l1 + np.where(after, atom.magnitude, 0.0)
        pairing = pairing + np.where(after, _atom_pairing(scenario, atom, params.alpha), 0.0)
    return _pairing_entries("multiplier", l1, pairing, t, cert, params, c1, c2)


def violation_metrics(traj: Trajectory, scenario: Scenario) -> dict:
    """Sup and squared-L2 integral of ``(gamma(t, L) - gamma_star)^-``."""
    neg = np.maximum(scenario.gamma_star - scenario.gamma.value(traj.times, traj.positions), 0.0)
    return {"sup": float(neg.max()), "l2sq": float(_cumtrapz(neg ** 2, traj.times)[-1])}


def violation_check(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                    params: EstimateParams, epsilon: Optional[float] = None) -> BoundEntry:
    """``int ((gamma - gamma_star)^-)^2 <= C_T * epsilon`` with ``C_T = C1 exp(C2 T/(eta* - alpha))``.

    Where ``mu_eps != 0``, ``mu_eps (z - alpha) >= ((z - gamma_star)^-)^2 / eps``,
    so the pairing bound supplies an epsilon-independent ``C_T``.
    """
    if traj.method != "penalty":
        raise WrongMethod("violation_check needs a penalty run")
    eps = traj.parameter if epsilon is None else epsilon
    T = traj.times[-1]
    c1, c2 = constants_C1_C2(cert, params, T)
    c_t = c1 * float(_growth(cert, params, T, c2))
    m = violation_metrics(traj, scenario)
    b = c_t * eps
    return BoundEntry("violation_l2", b, m["l2sq"], "upper", _slack(b), float(T), params)


def _j_and_dt_integral(scenario: Scenario, t, L, panels: int, chunk: int = 2048):
    """``j(t_i, L_i)`` and ``int_{L0}^{L_i} dgamma/dt(t_i, s) ds`` for every sample."""
    L0 = scenario.L0
    frac = np.linspace(0.0, 1.0, panels + 1)
    h_t = 1e-6 * max(1.0, scenario.T)
    j = np.empty(len(t))
    jt = np.empty(len(t))
    for s in range(0, len(t), chunk):
        tt = t[s:s + chunk, None]
        sigma = L0 + (L[s:s + chunk, None] - L0) * frac
        tb = np.broadcast_to(tt, sigma.shape)
        d = np.diff(sigma, axis=1)
        g = scenario.gamma.value(tb, sigma)
        gt = scenario.gamma.dt(tb, sigma, h_t)
        j[s:s + chunk] = np.sum(0.5 * (g[:, 1:] + g[:, :-1]) * d, axis=1)
        jt[s:s + chunk] = np.sum(0.5 * (gt[:, 1:] + gt[:, :-1]) * d, axis=1)
    return j, jt


def energy_identity_terms(traj: Trajectory, scenario: Scenario, params: EstimateParams,
                          panels: int = SIGMA_PANELS) -> dict:
    """The five terms of the energy identity at the final time.

    ``j(T, L(T)) - int_0^T int_{L0}^{L(s)} dgamma/ds - alpha (L(T) - L0)
    + int_0^T mu (z - alpha) = int_0^T U (z - alpha)``
    """
    if traj.method != "penalty":
        raise WrongMethod("energy identity needs a penalty run")
    t, L = traj.times, traj.positions
    z = scenario.gamma.value(t, L)
    u = scenario.velocity.value(t, L)
    a = params.alpha
    j, jt = _j_and_dt_integral(scenario, t, L, panels)
    return {
        "potential": float(j[-1]),
        "time_derivative": float(_cumtrapz(jt, t)[-1]),
        "alpha_displacement": float(a * (L[-1] - scenario.L0)),
        "pairing": float(_cumtrapz(traj.mu * (z - a), t)[-1]),
        "drive": float(_cumtrapz(u * (z - a), t)[-1]),
    }


def energy_identity_residual(traj: Trajectory, scenario: Scenario, params: EstimateParams,
                             panels: int = SIGMA_PANELS) -> float:
    """Absolute residual of the identity divided by its largest term."""
    k = energy_identity_terms(traj, scenario, params, panels)
    lhs = k["potential"] - k["time_derivative"] - k["alpha_displacement"] + k["pairing"]
    scale = max(abs(v) for v in k.values())
    return abs(lhs - k["drive"]) / scale if scale > 0 else 0.0


def energy_check(traj: Trajectory, scenario: Scenario, params: EstimateParams,
                 tol: float = ENERGY_TOL) -> BoundEntry:
    r = energy_identity_residual(traj, scenario, params)
    return BoundEntry("energy_identity", tol, r, "upper", 0.0, float(traj.times[-1]), params)


def infimum_check(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate) -> BoundEntry:
    """``eta_star <= running average of gamma up to L(t)`` at every sample with ``L > L0``.

    The slack is the eta-star refinement tolerance, since ``eta_star`` is a
    grid infimum.
    """
    t, L = traj.times, traj.positions
    keep = L > scenario.L0 + 1e-12
    if not keep.any():
        return BoundEntry("infimum", cert.eta_star, math.inf, "lower", ETA_REFINEMENT_TOL)
    avg = running_average(scenario, t[keep], L[keep], SIGMA_PANELS, cert.eta_variant)
    return _tightest("infimum", np.full(int(keep.sum()), cert.eta_star), avg, t[keep], "lower",
                     None, slack=ETA_REFINEMENT_TOL)


def sign_check(traj: Trajectory, decomp: MultiplierDecomposition) -> list:
    """Multiplier samples nonpositive; atom masses negative.

    The solver's samples get a round-off tolerance; the reconstructed
    ``mu_a`` additionally gets its measured reconstruction error ``defect``.
    """
    scale = max(1.0, float(np.max(np.abs(traj.mu))), float(np.max(np.abs(decomp.mu_a))))
    i = int(np.argmax(traj.mu))
    k = int(np.argmax(decomp.mu_a))
    entries = [
        BoundEntry("multiplier_sign", 0.0, float(traj.mu[i]), "upper", 1e-10 * scale,
                   float(traj.times[i])),
        BoundEntry("mu_a_sign", 0.0, float(decomp.mu_a[k]), "upper",
                   1e-10 * scale + decomp.defect, float(decomp.times[k])),
    ]
    if decomp.atoms:
        worst = max(decomp.atoms, key=lambda a: a.mass)
        entries.append(BoundEntry("atom_sign", 0.0, worst.mass, "upper", 0.0, worst.time))
    return entries


def complementarity_check(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                          decomp: MultiplierDecomposition) -> BoundEntry:
    """``sup |mu_a (gamma - gamma_star)| <= 1e-3 * Gamma_max * sup |mu|``.

    The part of the residual explained by the reconstruction error of
    ``mu_a`` (``defect * sup |gamma - gamma_star|``) is allowed as slack.
    """
    r = complementarity_residual(decomp, traj, scenario)
    sup_mu = max(float(np.max(np.abs(traj.mu))), float(np.max(np.abs(decomp.mu_a))))
    b = 1e-3 * cert.Gamma_max * sup_mu
    gap = np.abs(scenario.gamma.value(traj.times, traj.positions) - scenario.gamma_star)
    return BoundEntry("complementarity", b, r, "upper",
                      _slack(b) + decomp.defect * float(gap.max()))


def certify_run(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                params_list=None, decomp: Optional[MultiplierDecomposition] = None,
                inflate: bool = True) -> BoundReport:
    """Run every applicable check, for each (alpha, rho) in ``params_list``.

    Defaults to :func:`default_params` plus :func:`sample_params`.  Estimated
    constants are inflated by the safety factor first.  An empty parameter
    window raises :class:`InvalidEstimateParams`.
    """
    c = cert.inflated() if inflate else cert
    if params_list is None:
        params_list = [default_params(c)] + sample_params(c)
    decomp = reconstruct_multiplier(traj, scenario) if decomp is None else decomp
    report = BoundReport()
    for p in params_list:
        check_params(c, p)
        report.entries.append(gronwall_check(traj, c, p, scenario.T))
        report.entries.append(bv_seminorm_check(traj, c, p, scenario.T))
        if traj.method == "penalty":
            report.entries.extend(penalty_l1_check(traj, scenario, c, p))
            report.entries.append(violation_check(traj, scenario, c, p))
        else:
            report.entries.extend(multiplier_l1_check(traj, scenario, c, p, decomp))
    report.entries.append(infimum_check(traj, scenario, c))
    report.entries.extend(sign_check(traj, decomp))
    report.entries.append(complementarity_check(traj, scenario, c, decomp))
    if traj.method == "penalty":
        report.entries.append(energy_check(traj, scenario, params_list[0]))
    return report
