"""Scenario files, trajectory CSV and run reports.

Output is byte-stable: reals are written with 17 significant digits, JSON
with sorted keys, and wall-clock timing goes to a separate side file.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .bounds import certify_run
from .errors import InconsistentTrajectory, InvalidEstimateParams, SchemaError
from .fields import FIELD_KINDS, BOUND_KEYS, BoundsCertificate, FieldSpec, Scenario
from .multiplier import (
    classify_regimes, complementarity_residual, conservation_residual, reconstruct_multiplier,
)
from .trajectory import JumpAtom, Trajectory

__all__ = [
    "scenario_from_dict", "read_scenario", "write_trajectory_csv", "read_trajectory_csv",
    "build_run_report", "write_run", "load_run_report", "recheck_run_report",
    "dump_json", "default_out_dir", "CSV_HEADER", "REPORT_VERSION",
]

CSV_HEADER = ("t", "L", "gamma", "U", "mu", "regime", "violation")
REPORT_VERSION = 1
SCENARIO_KEYS = ("gamma", "velocity", "gamma_star", "L0", "T", "X_max", "bounds")
REQUIRED_KEYS = ("gamma", "velocity", "gamma_star", "L0", "T", "X_max")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "must be a number")
    return float(value)


def _field_from_dict(data, path) -> FieldSpec:
    if not isinstance(data, dict):
        raise SchemaError(path, "must be an object with a 'kind'")
    kind = data.get("kind")
    if kind not in FIELD_KINDS:
        raise SchemaError(f"{path}.kind", f"unknown field kind {kind!r}")
    names = FIELD_KINDS[kind]
    allowed = set(names) | {"kind"} | ({"formula"} if kind == "expression" else set())
    for key in data:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown key")
    if kind == "expression":
        formula = data.get("formula")
        if not isinstance(formula, str):
            raise SchemaError(f"{path}.formula", "must be a string")
        return FieldSpec.expression(formula)
    values = []
    for name in names:
        if name not in data:
            if kind == "gauss-band" and name == "a1":
                values.append(0.0)
                continue
            raise SchemaError(f"{path}.{name}", "missing")
        values.append(_number(data[name], f"{path}.{name}"))
    try:
        return FieldSpec(kind, tuple(values))
    except SchemaError as exc:
        raise SchemaError(f"{path}.{exc.path}", str(exc).split(": ", 1)[-1]) from None


def scenario_from_dict(data) -> Scenario:
    """Validate a parsed scenario document; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise SchemaError("", "scenario must be a JSON object")
    for key in data:
        if key not in SCENARIO_KEYS:
            raise SchemaError(key, "unknown key")
    for key in REQUIRED_KEYS:
        if key not in data:
            raise SchemaError(key, "missing")
    bounds = data.get("bounds", {})
    if not isinstance(bounds, dict):
        raise SchemaError("bounds", "must be an object")
    for key in bounds:
        if key not in BOUND_KEYS:
            raise SchemaError(f"bounds.{key}", "unknown key")
    return Scenario(
        gamma=_field_from_dict(data["gamma"], "gamma"),
        velocity=_field_from_dict(data["velocity"], "velocity"),
        gamma_star=_number(data["gamma_star"], "gamma_star"),
        L0=_number(data["L0"], "L0"),
        T=_number(data["T"], "T"),
        X_max=_number(data["X_max"], "X_max"),
        bounds=tuple((k, _number(v, f"bounds.{k}")) for k, v in bounds.items()),
    )


def read_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, scenario: Scenario, path, regimes=None) -> int:
    """Write one row per sample; returns the row count."""
    traj.check()
    if regimes is None:
        regimes = classify_regimes(traj, scenario)
    t, L = traj.times, traj.positions
    g = scenario.gamma.value(t, L)
    u = scenario.velocity.value(t, L)
    viol = np.maximum(scenario.gamma_star - g, 0.0)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for i in range(len(t)):
                w.writerow([_fmt(t[i]), _fmt(L[i]), _fmt(g[i]), _fmt(u[i]), _fmt(traj.mu[i]),
                            regimes[i].value, _fmt(viol[i])])
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc.strerror}") from exc
    return len(t)


def read_trajectory_csv(path, method: str, parameter: float, atoms=()) -> Trajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise InconsistentTrajectory(f"{path}: unexpected header")
    body = rows[1:]
    if not body:
        raise InconsistentTrajectory(f"{path}: no samples")
    t = np.array([float(r[0]) for r in body])
    L = np.array([float(r[1]) for r in body])
    mu = np.array([float(r[4]) for r in body])
    return Trajectory(t, L, mu, method, parameter, atoms=tuple(atoms))


def _clean(obj):
    # JSON has no inf/nan
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_run_report(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate,
                     csv_name: str, rows: int, csv_digest: str, decomp=None,
                     options: dict = None) -> dict:
    decomp = reconstruct_multiplier(traj, scenario) if decomp is None else decomp
    try:
        report = certify_run(traj, scenario, cert, decomp=decomp)
        bounds, note = report.to_dict(), None
    except InvalidEstimateParams as exc:
        bounds, note = None, str(exc)
    summary = decomp.summary()
    summary["complementarity_residual"] = complementarity_residual(decomp, traj, scenario)
    summary["conservation_residual"] = conservation_residual(decomp, traj, scenario)
    return {
        "version": REPORT_VERSION,
        "scenario": scenario.to_dict(),
        "certificate": cert.to_dict(),
        "method": traj.method,
        "parameter": traj.parameter,
        "options": options if options is not None else traj.info.get("options", {}),
        "trajectory": {
            "file": csv_name, "rows": rows, "sha256": csv_digest,
            "atoms": [a.to_dict() for a in traj.atoms],
            "L_T": float(traj.positions[-1]),
        },
        "decomposition": summary,
        "bounds": bounds,
        "bounds_note": note,
    }


def write_run(traj: Trajectory, scenario: Scenario, cert: BoundsCertificate, out_dir,
              timing: dict = None, stem: str = None) -> Path:
    """Write ``<stem>.csv`` and ``<stem>.report.json`` (plus timing side file)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or traj.label
    decomp = reconstruct_multiplier(traj, scenario)
    regimes = classify_regimes(traj, scenario, decomp=decomp)
    csv_path = out / f"{stem}.csv"
    rows = write_trajectory_csv(traj, scenario, csv_path, regimes)
    report = build_run_report(traj, scenario, cert, csv_path.name, rows, _sha256(csv_path),
                              decomp)
    report_path = out / f"{stem}.report.json"
    report_path.write_text(dump_json(report), encoding="utf-8")
    if timing is not None:
        (out / f"{stem}.timing.json").write_text(dump_json(timing), encoding="utf-8")
    return report_path


def load_run_report(path):
    """Return ``(report, scenario, trajectory)``; checks the referenced CSV."""
    path = Path(path)
    report = json.loads(path.read_text(encoding="utf-8"))
    scenario = scenario_from_dict(report["scenario"])
    ref = report["trajectory"]
    csv_path = path.parent / ref["file"]
    if not csv_path.exists():
        raise InconsistentTrajectory(f"trajectory file {csv_path} is missing")
    atoms = [JumpAtom.from_dict(a) for a in ref.get("atoms", [])]
    traj = read_trajectory_csv(csv_path, report["method"], report["parameter"], atoms)
    if len(traj) != ref["rows"]:
        raise InconsistentTrajectory(
            f"{csv_path}: {len(traj)} rows, report declares {ref['rows']}")
    if ref.get("sha256") and _sha256(csv_path) != ref["sha256"]:
        raise InconsistentTrajectory(f"{csv_path}: content differs from the report digest")
    return report, scenario, traj


def recheck_run_report(path) -> dict:
    """Re-run the bound checks of a stored run and compare verdicts.

    Returns ``{"report": BoundReport | None, "stored": dict | None,
    "reproduced": bool, "note": str | None}``.
    """
    report, scenario, traj = load_run_report(path)
    cert = BoundsCertificate.from_dict(report["certificate"])
    try:
        fresh = certify_run(traj, scenario, cert)
        note = None
    except InvalidEstimateParams as exc:
        fresh, note = None, str(exc)
    stored = report.get("bounds")
    if fresh is None or stored is None:
        reproduced = fresh is None and stored is None
    else:
        old = [(e["name"], e["satisfied"]) for e in stored["entries"]]
        new = [(e.name, e.satisfied) for e in fresh.entries]
        reproduced = old == new
    return {"report": fresh, "stored": stored, "reproduced": reproduced, "note": note}


def default_out_dir() -> str:
    return os.environ.get("SHOCKFRONT_OUT", "runs")
