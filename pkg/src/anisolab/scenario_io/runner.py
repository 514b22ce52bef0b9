"""Build scenarios from configs and drive the checks they declare."""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, LabError
from ..geometry_core import (
    codazzi_hessian_field,
    constant_diag_field,
    identity_field,
    identity_suite,
    polar_space_form,
    product_cylinder,
    rotation_surface,
    space_form,
    warped_product,
)
from ..comparison_lab import (
    LabScenario,
    VerificationRecord,
    catenoid,
    evaluate_end_bound,
    flat_plane,
    make_record,
    make_scenario,
    round_sphere,
    verify_excess,
    verify_hypersurface,
    verify_mean_curvature,
    verify_meyer,
    verify_qmp,
    verify_riccati,
    verify_splitting_premises,
    verify_volume_monotonicity,
    verify_weighted_ratio,
    verify_yau_growth,
)
from .config import ScenarioConfig

_IMMERSIONS = {
    "sphere": lambda m: round_sphere(float(m.get("radius", 1.0))),
    "catenoid": lambda m: catenoid(float(m.get("waist", 1.0))),
    "plane": lambda m: flat_plane(),
}


def build_chart(cfg: ScenarioConfig):
    m = cfg.manifold
    kind = m["kind"]
    if kind == "space_form":
        n, H = int(m["n"]), float(m["H"])
        if m.get("chart", "conformal") == "polar":
            return polar_space_form(n, H)
        if "half_width" in m:
            return space_form(n, H, half_width=float(m["half_width"]))
        return space_form(n, H)
    if kind == "rotation_surface":
        return rotation_surface(str(m["profile"]), a=float(m.get("a", 1.0)),
                                c=float(m.get("c", 0.8)))
    if kind == "warped_product":
        return warped_product(str(m.get("warp", "cosh")),
                              half_length=float(m.get("half_length", 2.0)),
                              theta_half=float(m.get("theta_half", 3.0)))
    if kind == "product_cylinder":
        return product_cylinder(float(m["rho"]),
                                half_length=float(m.get("half_length", 110.0)),
                                theta_half=float(m.get("theta_half", 3.3)))
    raise ConfigError(f"manifold.kind: cannot build {kind!r} as a chart")


def build_field(cfg: ScenarioConfig, M):
    t = cfg.tensor
    kind = t["kind"]
    if kind == "identity":
        return identity_field(M.dim)
    if kind == "constant_diag":
        return constant_diag_field([float(v) for v in t["values"]])
    if kind == "codazzi_hessian":
        return codazzi_hessian_field(M, str(t["phi"]), float(t["c"]))
    raise ConfigError(f"tensor.kind: cannot build {kind!r} on a chart")


def build_scenario(cfg: ScenarioConfig) -> LabScenario:
    """Chart + field + frozen constants for a non-hypersurface config."""
    M = build_chart(cfg)
    field = build_field(cfg, M)
    sc = cfg.scenario
    kwargs: Dict = {}
    if "base_point" in sc:
        kwargs["x0"] = np.asarray([float(v) for v in sc["base_point"]])
    if "H" in sc:
        kwargs["H"] = float(sc["H"])
    elif cfg.manifold["kind"] == "space_form":
        kwargs["H"] = float(cfg.manifold["H"])
    if "sec_lower" in sc:
        kwargs["sec_lower"] = float(sc["sec_lower"])
    if "strategy" in sc:
        kwargs["strategy"] = str(sc["strategy"])
    dist_kwargs = {}
    if "dist_n_dir" in sc:
        dist_kwargs["n_dir"] = int(sc["dist_n_dir"])
    if "dist_top_k" in sc:
        dist_kwargs["top_k"] = int(sc["dist_top_k"])
    if "dist_h_override" in sc:
        dist_kwargs["h_override"] = float(sc["dist_h_override"])
    meta: Dict = {}
    if "measure_radius" in sc:
        meta["measure_radius"] = float(sc["measure_radius"])
    if "declared_diameter" in sc:
        meta["diameter_witness"] = float(sc["declared_diameter"])
    extra: Dict = {}
    if "line_point" in sc:
        extra["line_point"] = np.asarray([float(v) for v in sc["line_point"]])
        extra["line_direction"] = np.asarray(
            [float(v) for v in sc["line_direction"]])
    if "declared_ends" in sc:
        extra["declared_ends"] = int(sc["declared_ends"])
    return make_scenario(
        cfg.name, M, field,
        R=float(sc["working_radius"]),
        n_sites=int(sc.get("n_sites", 64)),
        seed=cfg.seed,
        dist_kwargs=dist_kwargs,
        meta=meta,
        **kwargs,
        **extra,
    )


def _run_identities(cfg: ScenarioConfig, scenario: Optional[LabScenario],
                    params: Dict, tols: Dict):
    if scenario is not None:
        M, field = scenario.M, scenario.field
        rng = scenario.rng(3)
    else:
        from ..comparison_lab import induced_chart, shape_field
        imm = _IMMERSIONS[str(cfg.manifold["immersion"])](cfg.manifold)
        M, field = induced_chart(imm), shape_field(imm)
        rng = np.random.default_rng([cfg.seed, 3])
    n_sites = int(params.get("n_sites", 100))
    lo = M.box_lo + 0.08 * (M.box_hi - M.box_lo)
    hi = M.box_hi - 0.08 * (M.box_hi - M.box_lo)
    sites = rng.uniform(lo, hi, size=(n_sites, M.dim))
    rows = identity_suite(M, field, sites, rng=rng,
                          tol_id=float(tols.get("tol_id", 1e-5)),
                          tol_codazzi=float(tols.get("tol_codazzi", 1e-5)))
    recs = []
    for row in rows:
        rec = make_record(f"identity/{row.name}", row.site, row.residual,
                          row.tol, tol=0.0)
        if row.excluded:
            rec = VerificationRecord(
                theorem_id=rec.theorem_id, site=rec.site, lhs=rec.lhs,
                rhs=rec.rhs, margin=rec.margin, tol=rec.tol, passed=False,
                excluded=True, reason=row.reason)
        recs.append(rec)
    worst: Dict[str, float] = {}
    for row in rows:
        if not row.excluded:
            worst[row.name] = max(worst.get(row.name, 0.0), row.residual)
    return recs, {"n_sites": n_sites, "worst_residuals": worst}


def run_check(cfg: ScenarioConfig, cid: str, params: Dict,
              scenario: Optional[LabScenario],
              tols: Dict) -> Tuple[List[VerificationRecord], Dict]:
    """Dispatch one named check; returns (records, info)."""
    if cid == "identities":
        return _run_identities(cfg, scenario, params, tols)
    if cid == "hypersurface":
        imm = _IMMERSIONS[str(cfg.manifold["immersion"])](cfg.manifold)
        return verify_hypersurface(
            imm, n_sites=int(params.get("n_sites", 24)),
            n_samples=int(params.get("n_samples", 200)), seed=cfg.seed)

    if scenario is None:
        raise ConfigError(f"check {cid}: needs a chart scenario")
    if cid == "riccati":
        recs = verify_riccati(scenario, r_list=params.get("r_list"))
        return recs, {}
    if cid == "mean_curvature":
        recs = verify_mean_curvature(scenario, r_list=params.get("r_list"))
        return recs, {}
    if cid == "meyer":
        if "pair_radius" in params:
            rho = float(params["pair_radius"])
            n_pairs = int(params.get("n_pairs", 4))
            pairs = []
            for k in range(n_pairs):
                ang = math.pi * k / n_pairs
                u = np.zeros(scenario.M.dim)
                u[0], u[1] = math.cos(ang), math.sin(ang)
                pairs.append((rho * u, -rho * u))
            scenario.meta["meyer_pairs"] = pairs
        recs = verify_meyer(scenario)
        return recs, {}
    if cid == "volume_monotonicity":
        return verify_volume_monotonicity(
            scenario, radii=params.get("radii"),
            p=params.get("p"), n_dir=int(params.get("n_dir", 96)),
            n_r=int(params.get("n_r", 160)))
    if cid == "weighted_ratio":
        if "r0" in params:
            scenario.meta["measure_radius"] = float(params["r0"])
        return verify_weighted_ratio(
            scenario, p=params.get("p"),
            n_dir=int(params.get("n_dir", 96)),
            n_r=int(params.get("n_r", 160)))
    if cid == "yau_growth":
        if "radii" in params:
            scenario.meta["yau_radii"] = [float(v) for v in params["radii"]]
        if "floor" in params:
            scenario.meta["yau_floor"] = float(params["floor"])
        if "cylinder" in params:
            a, b, rho = (float(v) for v in params["cylinder"])
            scenario.meta["cylinder"] = (a, b, rho)
        return verify_yau_growth(
            scenario, p=params.get("p"),
            n_dir=int(params.get("n_dir", 96)),
            n_r=int(params.get("n_r", 200)))
    if cid == "splitting":
        if "conv_tol" in params:
            scenario.meta["busemann_conv_tol"] = float(params["conv_tol"])
        return verify_splitting_premises(scenario, T=params.get("T"))
    if cid == "qmp":
        scenario.meta["qmp_pq"] = (
            np.asarray([float(v) for v in params["p"]]),
            np.asarray([float(v) for v in params["q"]]))
        if "y" in params:
            scenario.meta["qmp_y"] = np.asarray(
                [float(v) for v in params["y"]])
        if "y0" in params:
            scenario.meta["qmp_y0"] = np.asarray(
                [float(v) for v in params["y0"]])
        scenario.meta["qmp_R"] = float(params["R"])
        return verify_qmp(scenario, n_sites=int(params.get("n_sites", 8)))
    if cid == "excess":
        scenario.meta["excess_pq"] = (
            np.asarray([float(v) for v in params["p"]]),
            np.asarray([float(v) for v in params["q"]]))
        if "heights" in params:
            scenario.meta["excess_heights"] = np.asarray(
                [float(v) for v in params["heights"]])
        return verify_excess(scenario,
                             n_points=int(params.get("n_points", 100)))
    if cid == "ends":
        scenario.meta["ends_R"] = float(params["R"])
        scenario.meta["ends_H"] = float(params["H"])
        return evaluate_end_bound(scenario)
    raise ConfigError(f"check {cid}: no runner is registered")


def scenario_constants(scenario: Optional[LabScenario]) -> Dict[str, float]:
    if scenario is None:
        return {}
    cst = scenario.constants
    out = {
        "n": cst.n,
        "delta1": cst.delta1,
        "deltan": cst.deltan,
        "K": cst.K,
        "Kprime": cst.Kprime,
        "factor_a": cst.factor_a,
        "factor_b": cst.factor_b,
    }
    from ..model_space import effective_dimension
    out["m_eff"] = effective_dimension(cst.delta1, cst.deltan, cst.n,
                                       cst.K, cst.Kprime)
    return out


def run_config(cfg: ScenarioConfig) -> Dict:
    """Run every declared check; returns the raw results bundle that
    report building consumes: name, constants, and per-check payloads."""
    needs_chart = cfg.manifold["kind"] != "hypersurface"
    scenario = build_scenario(cfg) if needs_chart else None
    results = []
    for cid, params in cfg.checks:
        recs, info = run_check(cfg, cid, params, scenario, cfg.tolerances)
        results.append((cid, params, recs, info))
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "constants": scenario_constants(scenario),
        "results": results,
    }
