"""Problem files and run reports (JSON).

A problem file names the plant and optional run settings::

    {"alpha": 0.8, "A": [[...]], "B": [[...]], "C": [[...]],
     "uncertainty": {"M": ..., "N1": ..., "N2": ..., "J": ...},
     "synthesis": {"nc": 1, "epsilon": 1e-6},
     "simulation": {"x0": [...], "h": 0.001, "t_end": 10},
     "montecarlo": {"count": 50, "magnitude": 1.0, "seed": 0}}

Reports carry ``"schema": 1``.  Floats are written with ``repr`` (the
shortest decimal that round-trips), so matrices read back bit-for-bit.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Optional

import numpy as np

from .fracsim import atomic_write
from .model import ControllerRealization, FoLtiSystem, validate_system

__all__ = [
    "ProblemError",
    "Problem",
    "load_problem",
    "parse_problem",
    "bundled_example",
    "BUNDLED_EXAMPLES",
    "controller_to_dict",
    "controller_from_dict",
    "load_report",
    "write_report",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
BUNDLED_EXAMPLES = ("example1", "example2", "example3")

TOP_KEYS = {"alpha", "A", "B", "C", "uncertainty", "synthesis", "simulation", "montecarlo"}
REQUIRED = ("alpha", "A", "B", "C")
SECTION_KEYS = {
    "uncertainty": {"M", "N1", "N2", "J"},
    "synthesis": {"nc", "epsilon"},
    "simulation": {"x0", "h", "t_end"},
    "montecarlo": {"count", "magnitude", "seed"},
}


class ProblemError(ValueError):
    pass


@dataclass
class Problem:
    system: FoLtiSystem
    synthesis: dict[str, Any] = field(default_factory=dict)
    simulation: dict[str, Any] = field(default_factory=dict)
    montecarlo: dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None
    unknown_keys: list[str] = field(default_factory=list)


def _matrix(value: Any, name: str) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
        raise ProblemError(f"{name} must be a nested list of rows")
    widths = {len(r) for r in value}
    if len(widths) > 1:
        raise ProblemError(f"{name} has ragged rows")
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"{name}: non-numeric entry ({exc})") from None
    if arr.ndim == 1:  # [[]] style or [] rows
        arr = arr.reshape(len(value), 0)
    if not np.all(np.isfinite(arr)):
        raise ProblemError(f"{name} has non-finite entries")
    return arr


def _unknown(d: dict, allowed: set, prefix: str) -> list[str]:
    return sorted(prefix + k for k in d if k not in allowed)


def parse_problem(doc: Any, strict: bool = True, source: Optional[str] = None) -> Problem:
    """Validate a decoded JSON document.

    Unknown keys raise :class:`ProblemError` naming them; with
    ``strict=False`` they only trigger a warning and are dropped.
    """
    if not isinstance(doc, dict):
        raise ProblemError("problem file must contain a JSON object")
    unknown = _unknown(doc, TOP_KEYS, "")
    for sec, allowed in SECTION_KEYS.items():
        if sec in doc:
            if not isinstance(doc[sec], dict):
                raise ProblemError(f"'{sec}' must be an object")
            unknown += _unknown(doc[sec], allowed, sec + ".")
    if unknown:
        msg = "unknown keys: " + ", ".join(unknown)
        if strict:
            raise ProblemError(msg)
        warnings.warn(msg, UserWarning, stacklevel=2)
    missing = [k for k in REQUIRED if k not in doc]
    if missing:
        raise ProblemError("missing required keys: " + ", ".join(missing))
    alpha = doc["alpha"]
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        raise ProblemError("alpha must be a number")
    unc = doc.get("uncertainty")
    mats = {k: _matrix(doc[k], k) for k in ("A", "B", "C")}
    if unc is not None:
        absent = sorted(SECTION_KEYS["uncertainty"] - set(unc))
        if absent:
            raise ProblemError("uncertainty block needs M, N1, N2, J; missing " + ", ".join(absent))
        mats.update({k: _matrix(unc[k], "uncertainty." + k) for k in ("M", "N1", "N2", "J")})
    system = FoLtiSystem(alpha=float(alpha), **mats)
    report = validate_system(system)
    if not report.ok:
        raise ProblemError("; ".join(report.violations))
    syn = dict(doc.get("synthesis", {}))
    if "nc" in syn and (isinstance(syn["nc"], bool) or not isinstance(syn["nc"], int)):
        raise ProblemError("synthesis.nc must be an integer")
    sim = dict(doc.get("simulation", {}))
    if "x0" in sim:
        sim["x0"] = [float(v) for v in sim["x0"]]
    return Problem(system, syn, sim, dict(doc.get("montecarlo", {})), source, unknown)


def load_problem(path: str | os.PathLike, strict: bool = True) -> Problem:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON ({exc})") from None
    return parse_problem(doc, strict, path)


def bundled_example(name: str) -> Problem:
    """Load one of the shipped example problems by name (``example1`` ...)."""
    if name not in BUNDLED_EXAMPLES:
        raise ProblemError(f"no bundled example {name!r}; choose from {', '.join(BUNDLED_EXAMPLES)}")
    text = resources.files("focsyn").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return parse_problem(json.loads(text), source=name)


def _list(a: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.asarray(a)]


def controller_to_dict(ctrl: ControllerRealization) -> dict[str, Any]:
    return {
        "nc": ctrl.nc,
        "shape": {"l": ctrl.l, "m": ctrl.m},
        "Ac": _list(ctrl.Ac),
        "Bc": _list(ctrl.Bc),
        "Cc": _list(ctrl.Cc),
        "Dc": _list(ctrl.Dc),
    }


def controller_from_dict(d: dict[str, Any]) -> ControllerRealization:
    try:
        nc, l, m = int(d["nc"]), int(d["shape"]["l"]), int(d["shape"]["m"])
        blocks = {
            k: np.array(d[k], dtype=float).reshape(shape)
            for k, shape in (("Ac", (nc, nc)), ("Bc", (nc, m)), ("Cc", (l, nc)), ("Dc", (l, m)))
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemError(f"malformed controller record ({exc})") from None
    return ControllerRealization(**blocks)


def load_report(path: str | os.PathLike) -> dict[str, Any]:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(rep, dict) or rep.get("schema") != SCHEMA_VERSION:
        raise ProblemError(f"{path}: not a schema {SCHEMA_VERSION} report")
    if not isinstance(rep.get("controller"), dict):
        raise ProblemError(f"{path}: report has no controller")
    return rep


def _clean(obj: Any) -> Any:
    """JSON has no inf/nan; encode them as strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_text(report: dict[str, Any], timestamp: bool = True) -> str:
    doc = {"schema": SCHEMA_VERSION}
    if timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    doc.update(report)
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def write_report(report: dict[str, Any], path: str | os.PathLike, timestamp: bool = True) -> None:
    atomic_write(path, report_text(report, timestamp))
