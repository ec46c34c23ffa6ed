"""Scene files and residual reports.

A scene is a JSON document describing a chart and a background:

    {
      "schema_version": 1,
      "chart": {"dim": 2, "coords": ["x", "y"], "domain": [[-1, 1], [-1, 1]],
                "seed": 0, "points": 16},
      "background": {
        "g":   {"11": "1 + x^2/4", "12": "x*y/8", "22": "1"},
        "B":   {"12": "1 + x/4"},
        "phi": "x*y/2",
        "B0":  {"12": "x^2/8"}          # or "H": {"123": "..."} on dim >= 3
      },
      "options": {"policy": "reject", "tolerances": {"sym": 1e-9, "fd": 1e-6}}
    }

Metric entries are given on the upper triangle (i <= j), 2-forms on the
strict upper triangle (i < j), 3-forms on strictly increasing triples; the
symmetry completions are never read from the lower parts.  "domain" is
either one interval for all coordinates or one per coordinate.  Missing
entries default to zero.  Expressions use the grammar of the expression
engine, over the declared coordinate names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import tensors as tn
from .errors import GencourantError, SceneError
from .expr import Chart, Expr, parse_expr
from .streff import Background
from .tensors import DOWN, TensorField

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {"sym": 1e-9, "fd": 1e-6, "strict": 1e-10}


class SceneValidationError(SceneError):
    """Scene parsed but violates a semantic requirement."""


@dataclass
class Scene:
    chart: Chart
    background: Background
    policy: str = "reject"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    name: str = "scene"

    def tol(self, kind: str) -> float:
        return float(self.tolerances.get(kind, DEFAULT_TOLERANCES[kind]))


def _parse_entry(text, chart: Chart, location: str) -> Expr:
    if isinstance(text, (int, float)):
        return ex.Const(text)
    try:
        return parse_expr(text, chart)
    except GencourantError as err:
        raise SceneError(str(err), location) from err


def _symmetric_from_triangle(entries: dict, chart: Chart, location: str) -> TensorField:
    n = chart.dim
    comps = np.empty((n, n), dtype=object)
    comps[:] = ex.ZERO
    for key, text in entries.items():
        try:
            i, j = (int(c) - 1 for c in key)
        except (ValueError, TypeError):
            raise SceneValidationError(f"bad index key '{key}'", location)
        if not (0 <= i <= j < n):
            raise SceneValidationError(
                f"key '{key}' is not an upper-triangle index pair", location
            )
        e = _parse_entry(text, chart, f"{location}.{key}")
        comps[i, j] = e
        comps[j, i] = e
    return TensorField(chart, (DOWN, DOWN), comps)


def _two_form_from_triangle(entries: dict, chart: Chart, location: str) -> TensorField:
    coeffs = {}
    n = chart.dim
    for key, text in entries.items():
        try:
            i, j = (int(c) - 1 for c in key)
        except (ValueError, TypeError):
            raise SceneValidationError(f"bad index key '{key}'", location)
        if not (0 <= i < j < n):
            raise SceneValidationError(
                f"key '{key}' is not a strict upper-triangle index pair", location
            )
        coeffs[(i, j)] = _parse_entry(text, chart, f"{location}.{key}")
    return tn.form_from_wedge_coeffs(chart, 2, coeffs)


def _three_form_from_triples(entries: dict, chart: Chart, location: str) -> TensorField:
    coeffs = {}
    n = chart.dim
    for key, text in entries.items():
        try:
            idx = tuple(int(c) - 1 for c in key)
        except (ValueError, TypeError):
            raise SceneValidationError(f"bad index key '{key}'", location)
        if len(idx) != 3 or not all(0 <= v < n for v in idx) or not idx[0] < idx[1] < idx[2]:
            raise SceneValidationError(
                f"key '{key}' is not a strictly increasing index triple", location
            )
        coeffs[idx] = _parse_entry(text, chart, f"{location}.{key}")
    return tn.form_from_wedge_coeffs(chart, 3, coeffs)


def scene_from_dict(doc: dict, name: str = "scene", seed=None, points=None) -> Scene:
    if not isinstance(doc, dict):
        raise SceneError("scene document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SceneValidationError(f"unsupported schema_version {version!r}")
    try:
        chart_spec = doc["chart"]
        dim = int(chart_spec["dim"])
        coords = tuple(chart_spec["coords"])
    except (KeyError, TypeError, ValueError) as err:
        raise SceneError(f"bad chart spec: {err}", "chart") from err
    if len(coords) != dim:
        raise SceneValidationError(
            f"dim = {dim} but {len(coords)} coordinate names given", "chart"
        )
    domain = chart_spec.get("domain") or (-1.0, 1.0)
    try:
        chart = ex.chart(
            coords,
            domain=domain,
            seed=int(seed if seed is not None else chart_spec.get("seed", 0)),
            num_points=int(points if points is not None else chart_spec.get("points", 16)),
        )
    except ValueError as err:
        raise SceneValidationError(str(err), "chart") from err

    bg_spec = doc.get("background", {})
    g = _symmetric_from_triangle(bg_spec.get("g", {}), chart, "background.g")
    B = _two_form_from_triangle(bg_spec.get("B", {}), chart, "background.B")
    phi = _parse_entry(bg_spec.get("phi", "0"), chart, "background.phi")
    if "H" in bg_spec and "B0" in bg_spec:
        raise SceneValidationError("give either H or the potential B0, not both", "background")
    if "B0" in bg_spec:
        B0 = _two_form_from_triangle(bg_spec["B0"], chart, "background.B0")
        H = tn.exterior_derivative(B0)
    else:
        H = _three_form_from_triples(bg_spec.get("H", {}), chart, "background.H")
    try:
        background = Background(chart, g, B, phi, H)
    except GencourantError as err:
        raise SceneValidationError(str(err), "background") from err

    options = doc.get("options", {})
    policy = options.get("policy", "reject")
    if policy not in ("reject", "project"):
        raise SceneValidationError(f"unknown policy {policy!r}", "options")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(options.get("tolerances", {}))
    return Scene(chart, background, policy, tolerances, name)


def load_scene(path, seed=None, points=None) -> Scene:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as err:
        raise SceneError(f"cannot read scene file: {err}")
    except json.JSONDecodeError as err:
        raise SceneError(f"scene file is not valid JSON: {err}", f"line {err.lineno}")
    return scene_from_dict(doc, name=str(path), seed=seed, points=points)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class Check:
    """One residual check: the max-abs residual over the sample points, the
    tolerance it was held to, and the worst sample point."""

    name: str
    identity: str
    max_abs_residual: float
    tolerance: float
    worst_point: tuple

    @property
    def passed(self) -> bool:
        return self.max_abs_residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "identity": self.identity,
            "max_abs_residual": self.max_abs_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "worst_point": list(self.worst_point),
        }


@dataclass
class Report:
    command: str
    scene: str
    seed: int
    num_points: int
    checks: list
    summary: dict
    timing_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "scene": self.scene,
            "seed": self.seed,
            "num_points": self.num_points,
            "checks": [c.to_dict() for c in sorted(self.checks, key=lambda c: c.name)],
            "summary": self.summary,
            "verdict": "pass" if self.passed else "fail",
            "timing_seconds": self.timing_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
