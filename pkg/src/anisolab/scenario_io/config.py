"""Scenario configuration: a strict line-oriented key = value grammar.

Grammar
-------
A config is UTF-8 text.  Lines are independent; ``#`` starts a comment
(full-line or trailing); blank lines are ignored.  A header line
``[section]`` opens a section; ``[check <id>]`` opens the parameter
block of one theorem check and may appear once per id.  Every other
line must read ``key = value``.

Values are whitespace-separated tokens.  Each token is parsed as an
integer, then a float, then ``true``/``false``, and otherwise kept as a
bare string; a single token is a scalar, several tokens form a list.

Sections are ``[manifold]``, ``[tensor]``, ``[scenario]``,
``[tolerances]``, and ``[check ...]``.  Top-level keys before the first
section are ``name`` and ``seed``.  Unknown sections, unknown keys, and
duplicate keys are all rejected with the offending line and column:
silent key loss could quietly drop a theorem hypothesis.

Parsing and serialization round-trip: ``parse_scenario`` of a
``serialize_scenario`` output reproduces the config exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple, Union

from ..errors import ConfigError

Scalar = Union[int, float, bool, str]
Value = Union[Scalar, List[Scalar]]

_TOP_KEYS = {"name", "seed"}
_SECTIONS = ("manifold", "tensor", "scenario", "tolerances")

_MANIFOLD_KEYS: Dict[str, Dict[str, type]] = {
    "space_form": {
        "n": int, "H": float, "half_width": float, "chart": str,
    },
    "rotation_surface": {"profile": str, "a": float, "c": float},
    "warped_product": {
        "warp": str, "half_length": float, "theta_half": float,
    },
    "product_cylinder": {
        "rho": float, "half_length": float, "theta_half": float,
    },
    "hypersurface": {
        "immersion": str, "radius": float, "waist": float, "ambient_c": float,
    },
}
_MANIFOLD_REQUIRED = {
    "space_form": ("n", "H"),
    "rotation_surface": ("profile",),
    "warped_product": (),
    "product_cylinder": ("rho",),
    "hypersurface": ("immersion",),
}

_TENSOR_KEYS: Dict[str, Dict[str, type]] = {
    "identity": {},
    "constant_diag": {"values": list},
    "codazzi_hessian": {"phi": str, "c": float},
    "shape_operator": {},
}
_TENSOR_REQUIRED = {
    "identity": (),
    "constant_diag": ("values",),
    "codazzi_hessian": ("phi", "c"),
    "shape_operator": (),
}

_SCENARIO_KEYS: Dict[str, type] = {
    "base_point": list,
    "working_radius": float,
    "H": float,
    "n_sites": int,
    "strategy": str,
    "sec_lower": float,
    "declared_ends": int,
    "declared_diameter": float,
    "line_point": list,
    "line_direction": list,
    "measure_radius": float,
    "dist_n_dir": int,
    "dist_top_k": int,
    "dist_h_override": float,
}

_TOL_KEYS: Dict[str, type] = {
    "tol_id": float,
    "tol_codazzi": float,
    "tol_thm": float,
}

# check id -> {param name: type}; list params hold floats
CHECK_PARAMS: Dict[str, Dict[str, type]] = {
    "identities": {"n_sites": int},
    "riccati": {"r_list": list},
    "mean_curvature": {"r_list": list, "quarter_window": bool},
    "meyer": {"pair_radius": float, "n_pairs": int},
    "volume_monotonicity": {"radii": list, "p": int, "n_dir": int, "n_r": int},
    "weighted_ratio": {"r0": float, "p": int, "n_dir": int, "n_r": int},
    "yau_growth": {
        "radii": list, "p": int, "n_dir": int, "n_r": int,
        "floor": float, "cylinder": list,
    },
    "splitting": {"T": float, "conv_tol": float},
    "qmp": {"p": list, "q": list, "y": list, "y0": list, "R": float,
            "n_sites": int},
    "excess": {"p": list, "q": list, "heights": list, "n_points": int},
    "ends": {"R": float, "H": float},
    "hypersurface": {"n_sites": int, "n_samples": int},
}

_RADII_PARAMS = {
    "riccati": ("r_list",),
    "mean_curvature": ("r_list",),
    "volume_monotonicity": ("radii",),
    "weighted_ratio": ("r0",),
    "yau_growth": ("radii",),
    "qmp": ("R",),
    "excess": ("heights",),
}


@dataclass
class ScenarioConfig:
    """Parsed and validated scenario: manifold + tensor + checks."""

    name: str
    seed: int = 0
    manifold: Dict[str, Value] = dc_field(default_factory=dict)
    tensor: Dict[str, Value] = dc_field(default_factory=dict)
    scenario: Dict[str, Value] = dc_field(default_factory=dict)
    tolerances: Dict[str, Value] = dc_field(default_factory=dict)
    checks: List[Tuple[str, Dict[str, Value]]] = dc_field(default_factory=list)


def _parse_token(tok: str) -> Scalar:
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if tok == "true":
        return True
    if tok == "false":
        return False
    return tok


def _parse_value(raw: str) -> Value:
    toks = raw.split()
    parsed = [_parse_token(t) for t in toks]
    return parsed[0] if len(parsed) == 1 else parsed


def _fmt_scalar(v: Scalar) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        # repr round-trips exactly and stays readable
        return repr(v)
    return str(v)


def _fmt_value(v: Value) -> str:
    if isinstance(v, list):
        return " ".join(_fmt_scalar(t) for t in v)
    return _fmt_scalar(v)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate one scenario config; errors carry line/column."""
    top: Dict[str, Scalar] = {}
    sections: Dict[str, Dict[str, Value]] = {}
    checks: List[Tuple[str, Dict[str, Value]]] = []
    current: Optional[Dict[str, Value]] = None
    current_name = ""

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        line = stripped.strip()
        indent = len(stripped) - len(line)

        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(
                    f"line {lineno}, col {indent + len(line)}: "
                    "unterminated section header")
            header = line[1:-1].strip()
            if header.startswith("check"):
                parts = header.split()
                if len(parts) != 2:
                    raise ConfigError(
                        f"line {lineno}, col {indent + 1}: check header "
                        "must read [check <id>]")
                cid = parts[1]
                if cid not in CHECK_PARAMS:
                    known = ", ".join(sorted(CHECK_PARAMS))
                    raise ConfigError(
                        f"line {lineno}: unknown check {cid!r} "
                        f"(known: {known})")
                if any(c == cid for c, _ in checks):
                    raise ConfigError(
                        f"line {lineno}: duplicate check section {cid!r}")
                current = {}
                current_name = f"check {cid}"
                checks.append((cid, current))
            else:
                if header not in _SECTIONS:
                    raise ConfigError(
                        f"line {lineno}: unknown section [{header}]")
                if header in sections:
                    raise ConfigError(
                        f"line {lineno}: duplicate section [{header}]")
                current = {}
                current_name = header
                sections[header] = current
            continue

        if "=" not in line:
            raise ConfigError(
                f"line {lineno}, col {indent + 1}: expected 'key = value'")
        key, _, rawval = line.partition("=")
        key = key.strip()
        rawval = rawval.strip()
        if not key:
            raise ConfigError(f"line {lineno}, col {indent + 1}: empty key")
        if not rawval:
            raise ConfigError(
                f"line {lineno}, col {indent + len(line)}: "
                f"empty value for {key!r}")
        value = _parse_value(rawval)

        if current is None:
            if key not in _TOP_KEYS:
                raise ConfigError(
                    f"line {lineno}: unknown top-level key {key!r} "
                    "(expected name or seed)")
            if key in top:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            top[key] = value  # type: ignore[assignment]
        else:
            if key in current:
                raise ConfigError(
                    f"line {lineno}: duplicate key {key!r} in "
                    f"[{current_name}]")
            current[key] = value

    if "name" not in top:
        raise ConfigError("config is missing the top-level 'name' key")
    cfg = ScenarioConfig(
        name=str(top["name"]),
        seed=int(top.get("seed", 0)),
        manifold=sections.get("manifold", {}),
        tensor=sections.get("tensor", {}),
        scenario=sections.get("scenario", {}),
        tolerances=sections.get("tolerances", {}),
        checks=checks,
    )
    validate_config(cfg)
    return cfg


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Normalized text form: fixed section order, sorted keys."""
    out = [f"name = {cfg.name}", f"seed = {cfg.seed}"]
    for sec, data in (("manifold", cfg.manifold), ("tensor", cfg.tensor),
                      ("scenario", cfg.scenario),
                      ("tolerances", cfg.tolerances)):
        if not data:
            continue
        out.append("")
        out.append(f"[{sec}]")
        for k in sorted(data):
            out.append(f"{k} = {_fmt_value(data[k])}")
    for cid, params in cfg.checks:
        out.append("")
        out.append(f"[check {cid}]")
        for k in sorted(params):
            out.append(f"{k} = {_fmt_value(params[k])}")
    return "\n".join(out) + "\n"


def _require_keys(data: Dict[str, Value], allowed: Dict[str, type],
                  required, path: str):
    for k in data:
        if k == "kind":
            continue
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")
    for k in required:
        if k not in data:
            raise ConfigError(f"{path}.{k}: required key is missing")
    for k, v in data.items():
        if k == "kind":
            continue
        want = allowed[k]
        if want is list:
            if not isinstance(v, list):
                # single-element lists parse as scalars; normalize
                data[k] = [v]
        elif want is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}.{k}: expected a number, got {v!r}")
        elif want is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}.{k}: expected an integer, got {v!r}")
        elif want is bool:
            if not isinstance(v, bool):
                raise ConfigError(f"{path}.{k}: expected true/false, got {v!r}")
        elif want is str:
            if not isinstance(v, str):
                raise ConfigError(f"{path}.{k}: expected a word, got {v!r}")


def _radii_of(params: Dict[str, Value], names) -> List[float]:
    vals: List[float] = []
    for nm in names:
        v = params.get(nm)
        if v is None:
            continue
        vals.extend(float(t) for t in (v if isinstance(v, list) else [v]))
    return vals


def validate_config(cfg: ScenarioConfig) -> None:
    if not cfg.manifold:
        raise ConfigError("missing [manifold] section")
    if not cfg.tensor:
        raise ConfigError("missing [tensor] section")
    mk = cfg.manifold.get("kind")
    if mk not in _MANIFOLD_KEYS:
        known = ", ".join(sorted(_MANIFOLD_KEYS))
        raise ConfigError(f"manifold.kind: expected one of {known}, got {mk!r}")
    _require_keys(cfg.manifold, _MANIFOLD_KEYS[mk], _MANIFOLD_REQUIRED[mk],
                  "manifold")
    tk = cfg.tensor.get("kind")
    if tk not in _TENSOR_KEYS:
        known = ", ".join(sorted(_TENSOR_KEYS))
        raise ConfigError(f"tensor.kind: expected one of {known}, got {tk!r}")
    _require_keys(cfg.tensor, _TENSOR_KEYS[tk], _TENSOR_REQUIRED[tk], "tensor")

    if mk == "hypersurface":
        if tk != "shape_operator":
            raise ConfigError(
                "tensor.kind: hypersurface scenarios take their tensor from "
                "the immersion; use shape_operator")
        imm = cfg.manifold.get("immersion")
        if imm not in ("sphere", "catenoid", "plane"):
            raise ConfigError(
                f"manifold.immersion: expected sphere, catenoid or plane, "
                f"got {imm!r}")
        if float(cfg.manifold.get("ambient_c", 0.0)) != 0.0:
            raise ConfigError(
                "manifold.ambient_c: only the flat ambient space is built in")
    elif tk == "shape_operator":
        raise ConfigError(
            "tensor.kind: shape_operator needs a hypersurface manifold")

    if mk == "space_form":
        chart = cfg.manifold.get("chart", "conformal")
        if chart not in ("conformal", "polar"):
            raise ConfigError(
                f"manifold.chart: expected conformal or polar, got {chart!r}")
        if chart == "polar" and int(cfg.manifold["n"]) not in (2, 3):
            raise ConfigError("manifold.chart: polar charts exist for n = 2, 3")
    if mk == "rotation_surface":
        prof = cfg.manifold.get("profile")
        if prof not in ("sphere", "oblate"):
            raise ConfigError(
                f"manifold.profile: expected sphere or oblate, got {prof!r}")
    if tk == "codazzi_hessian":
        phi = cfg.tensor.get("phi")
        if phi not in ("second_harmonic", "radial_cosh2"):
            raise ConfigError(
                f"tensor.phi: expected second_harmonic or radial_cosh2, "
                f"got {phi!r}")

    _require_keys(cfg.scenario, _SCENARIO_KEYS, (), "scenario")
    _require_keys(cfg.tolerances, _TOL_KEYS, (), "tolerances")

    if mk != "hypersurface" and "working_radius" not in cfg.scenario:
        raise ConfigError("scenario.working_radius: required key is missing")
    R_T = float(cfg.scenario.get("working_radius", math.inf))
    if R_T <= 0.0:
        raise ConfigError("scenario.working_radius: must be positive")

    H = float(cfg.manifold.get("H", 0.0)) if mk == "space_form" else 0.0

    for cid, params in cfg.checks:
        _require_keys(params, CHECK_PARAMS[cid], (), f"check {cid}")
        radii = _radii_of(params, _RADII_PARAMS.get(cid, ()))
        for r in radii:
            if r > R_T * (1.0 + 1e-12):
                raise ConfigError(
                    f"check {cid}: radius {r:g} exceeds the working radius "
                    f"{R_T:g}")
        if cid == "mean_curvature" and H > 0.0 and not params.get(
                "quarter_window", False):
            window = math.pi / (4.0 * math.sqrt(H))
            for r in radii:
                if r > window * (1.0 + 1e-12):
                    raise ConfigError(
                        f"check {cid}: radius {r:g} exceeds the "
                        f"positive-curvature window pi/(4 sqrt H) = "
                        f"{window:.6g}; set quarter_window = true to use "
                        "the extended range")
        if cid == "ends":
            if "R" not in params or "H" not in params:
                raise ConfigError("check ends: needs R and H")
            if float(params["H"]) <= 0.0:
                raise ConfigError("check ends: H must be positive")
            if 12.5 * float(params["R"]) > R_T * (1.0 + 1e-9):
                raise ConfigError(
                    "check ends: the bound integrates out to 12.5 R, which "
                    f"exceeds the working radius {R_T:g}")
        if cid == "qmp" and ("p" not in params or "q" not in params
                             or "R" not in params):
            raise ConfigError("check qmp: needs p, q and R")
        if cid == "excess" and ("p" not in params or "q" not in params):
            raise ConfigError("check excess: needs p and q")
        if cid == "hypersurface" and mk != "hypersurface":
            raise ConfigError(
                "check hypersurface: needs a hypersurface manifold")

    if "declared_ends" in cfg.scenario and int(
            cfg.scenario["declared_ends"]) < 1:
        raise ConfigError("scenario.declared_ends: must be at least 1")
    if "declared_diameter" in cfg.scenario and float(
            cfg.scenario["declared_diameter"]) <= 0.0:
        raise ConfigError("scenario.declared_diameter: must be positive")
