"""Radial verifiers: the Riccati inequality along rays, both mean
curvature comparisons, and the diameter bound they imply.

Every verifier walks minimal rays from the scenario base point, evaluates
the drift Laplacians of the distance function row by row, and emits one
record per printed inequality per site.  Hypotheses are sampled, never
assumed: a radius where the curvature hypothesis fails excludes that row
and everything beyond it on the same ray.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import LabError
from ..geodesic_engine import distance, radial_operator_profile
from ..geometry_core import FieldJet, GeometryJet, phi_field_radial, ric_pair
from ..model_space import (
    mean_curvature_model,
    meyer_diameter_bound,
    remark_quarter_factor,
)
from .records import (
    TOL_CODAZZI,
    TOL_ID,
    TOL_THM,
    LabScenario,
    VerificationRecord,
    exclude_record,
    make_record,
)

# Rows closer to the pole than this are dominated by the 1/r singularity
# of Hess r and carry no information about the comparison constants.
RADIAL_MIN_R = 0.3

# Relative shave applied to a sampled curvature floor, so that the floor
# used in bounds stays below the true infimum despite finite sampling.
FLOOR_SHAVE = 0.98


def ric_extended(geo: GeometryJet, fjet: FieldJet, X) -> float:
    """The pairing Ric(X, AX) that the direction-wise hypotheses use."""
    X = np.asarray(X, dtype=float)
    return ric_pair(geo, X, fjet.A @ X)


def _hess_trace(geo: GeometryJet, fjet: FieldJet) -> np.ndarray:
    """Covariant Hessian of Trace A, lower indices."""
    d2tau = np.einsum("abii->ab", fjet.d2A)
    return d2tau - np.einsum("kab,k->ab", geo.gamma, fjet.dtrace)


def ric_trace_extended(geo: GeometryJet, fjet: FieldJet, X) -> float:
    """Ric(X, AX) - Hess(Trace A)(X, X).

    The trace-corrected pairing whose lower bound drives the comparison
    for L_A.  For a Codazzi field, along a unit-speed geodesic with
    velocity X this equals Ric(X, AX) - d^2/dt^2 Trace(A).
    """
    X = np.asarray(X, dtype=float)
    return ric_extended(geo, fjet, X) - float(X @ _hess_trace(geo, fjet) @ X)


def _unit_dirs_at(geo: GeometryJet, k: int, rng) -> np.ndarray:
    V = rng.normal(size=(k, geo.M.dim))
    norms = np.sqrt(np.einsum("bi,ij,bj->b", V, geo.g, V))
    return V / norms[:, None]


def curvature_floor(scenario: LabScenario, kind: str = "full",
                    n_dir: int = 6, salt: int = 5, shave: bool = True,
                    radial_only: bool = False) -> float:
    """Sampled floor H with hypothesis >= (n-1) deltan H over the drift
    site set, shaved for sampling slack unless shave is off.

    kind "full" samples Ric(X, AX) over random unit X; "trace" samples
    the trace-corrected pairing.  When the chart carries exact distance
    jets the radial direction is included in the sample; radial_only
    restricts to it (falling back to the random sample on charts with
    no exact radius, which is the stricter reading).
    """
    if kind not in ("full", "trace"):
        raise LabError(f"unknown curvature floor kind {kind!r}")
    cst = scenario.constants
    rng = scenario.rng(salt)
    scale = (cst.n - 1) * cst.deltan
    worst = math.inf
    pair = ric_extended if kind == "full" else ric_trace_extended
    has_radial = scenario.M.exact_dr is not None
    for x in scenario.drift.sites:
        geo = GeometryJet(scenario.M, x)
        fjet = FieldJet(scenario.field, geo)
        dirs = [] if (radial_only and has_radial) else list(_unit_dirs_at(geo, n_dir, rng))
        if has_radial and float(scenario.M.exact_r(x)) > 1e-9:
            v = geo.ginv @ np.asarray(scenario.M.exact_dr(x), dtype=float)
            dirs.append(v / math.sqrt(float(v @ geo.g @ v)))
        if not dirs:
            dirs = list(_unit_dirs_at(geo, n_dir, rng))
        for X in dirs:
            worst = min(worst, pair(geo, fjet, X) / scale)
    if not shave:
        return worst
    return worst * FLOOR_SHAVE if worst > 0.0 else worst / FLOOR_SHAVE


def _default_r_list(scenario: LabScenario) -> np.ndarray:
    if scenario.R <= RADIAL_MIN_R * 1.2:
        raise LabError(
            f"scenario radius {scenario.R} leaves no room above the pole "
            f"cutoff {RADIAL_MIN_R}"
        )
    return np.linspace(RADIAL_MIN_R, scenario.R, 8)


def _profiles(scenario: LabScenario, r_list, n_dir: int, mode: str, salt: int = 11):
    """One radial profile per direction, with the scenario drift wired in.

    Returns (r_list, profiles, offset) where offset is added to each row's
    ray parameter to get the true distance from the pole.  Polar charts
    start at box_lo[0] > 0, so their rows carry exactly that offset; all
    other charts integrate unit-speed rays from the base point directly.
    """
    r_list = _default_r_list(scenario) if r_list is None else np.asarray(r_list, dtype=float)
    f_sf = scenario.f_scalar()
    out = []
    if scenario.M.is_polar:
        # a polar chart has one radial coordinate line per angular seed;
        # vary the seed instead of the direction
        lo, hi = scenario.M.box_lo, scenario.M.box_hi
        e_r = np.zeros(scenario.M.dim)
        e_r[0] = 1.0
        rng = scenario.rng(salt)
        for _ in range(n_dir):
            x0 = scenario.x0.copy()
            x0[1:] = lo[1:] + (hi[1:] - lo[1:]) * (0.25 + 0.5 * rng.random(scenario.M.dim - 1))
            prof = radial_operator_profile(
                scenario.M, scenario.field, f_sf, x0, e_r, r_list, mode=mode
            )
            out.append(prof)
        return r_list, out, float(scenario.x0[0])
    for v in scenario.unit_directions(n_dir, salt=salt):
        prof = radial_operator_profile(
            scenario.M, scenario.field, f_sf, scenario.x0, v, r_list, mode=mode
        )
        out.append(prof)
    return r_list, out, 0.0


def verify_riccati(scenario: LabScenario, r_list=None, n_dir: int = 4,
                   mode: str = "auto") -> List[VerificationRecord]:
    """Check the radial Riccati inequality

        (Delta_A r)^2 / ((n-1) deltan) + d/dr(Delta_A r)
            + Ric(dr, A dr) - f''(r)  <=  0

    row by row, plus the exact frame identity it descends from and the
    drift certificate that feeds it.
    """
    cst = scenario.constants
    recs: List[VerificationRecord] = []
    codazzi_ok = scenario.codazzi <= TOL_CODAZZI
    r_list, profs, off = _profiles(scenario, r_list, n_dir, mode)
    for j, prof in enumerate(profs):
        for i, row in enumerate(prof.rows):
            r_true = row.r + off
            site = f"d{j} r={r_true:.4g}"
            geo = GeometryJet(scenario.M, row.x)
            fjet = FieldJet(scenario.field, geo)
            ric = ric_extended(geo, fjet, row.dr)
            fpp = float(scenario.fsecond(r_true))
            quad = row.lap_A**2 / ((cst.n - 1) * cst.deltan)
            lhs = quad + prof.ddr_lap_A[i] + ric - fpp
            recs.append(make_record("riccati/main", site, lhs, 0.0))

            phi = phi_field_radial(fjet, row.dr, row.hess_op)
            if codazzi_ok:
                # exact identity before any estimate: trace form of the
                # second Bochner formula evaluated on the distance function
                tr_term = float(np.trace(fjet.A @ row.hess_op @ row.hess_op))
                resid = tr_term + prof.ddr_lap_A[i] + ric - phi
                recs.append(make_record("riccati/bochner", site, abs(resid), 0.0))
                recs.append(make_record("riccati/certificate", site, phi, fpp))
        recs.append(
            make_record("riccati/gauss", f"d{j}", prof.gauss_residual, 0.0, tol=1e-6)
        )
    return recs


def _window(H: float, r: float) -> str:
    """Which comparison window a radius falls in for curvature floor H."""
    if H <= 0.0:
        return "main"
    q = math.pi / (4.0 * math.sqrt(H))
    if r <= q + 1e-12:
        return "main"
    if r < 2.0 * q:
        return "outer"
    return "beyond"


def verify_mean_curvature(scenario: LabScenario, r_list=None, n_dir: int = 4,
                          mode: str = "auto", n_hyp_dir: int = 6,
                          parts: Sequence[str] = ("a", "b")) -> List[VerificationRecord]:
    """Both drift mean curvature comparisons along sampled rays.

    a)  Delta_{A,f} r <= deltan (1 + 4K/(deltan (n-1))) m_H(r),
        under Ric(X, AX) >= (n-1) deltan H |X|^2 in every direction;
    b)  L_A r <= deltan (1 + 4(K+K')/(deltan (n-1))) m_H(r) + f'(r),
        under the radial trace-corrected floor.

    For H > 0 radii past pi/(4 sqrt(H)) move to the outer-window factor
    for part a; past pi/(2 sqrt(H)) rows are excluded.  A row where the
    sampled hypothesis fails excludes itself and the rest of its ray.
    """
    cst = scenario.constants
    recs: List[VerificationRecord] = []
    H_a = scenario.H if scenario.H is not None else curvature_floor(scenario, "full")
    H_b = scenario.H if scenario.H is not None else curvature_floor(scenario, "trace")
    scale = (cst.n - 1) * cst.deltan
    rng = scenario.rng(13)
    r_list, profs, off = _profiles(scenario, r_list, n_dir, mode)

    for j, prof in enumerate(profs):
        ok_a = ok_b = True
        for i, row in enumerate(prof.rows):
            r_true = row.r + off
            site = f"d{j} r={r_true:.4g}"
            geo = GeometryJet(scenario.M, row.x)
            fjet = FieldJet(scenario.field, geo)

            # consistency of the two operators: L_A = Delta_A + <div A, dr>
            pairing = float(fjet.div @ geo.g @ row.dr)
            recs.append(
                make_record("mean/l_op_split", site,
                            abs(row.l_A - row.lap_A - pairing), 0.0, tol=TOL_ID)
            )

            if "a" in parts:
                dirs = list(_unit_dirs_at(geo, n_hyp_dir, rng)) + [row.dr]
                hyp_a = min(ric_extended(geo, fjet, X) for X in dirs) / scale
                recs.append(make_record("mean_a/hyp", site, H_a, hyp_a))
                if hyp_a < H_a - TOL_THM:
                    ok_a = False
                if not ok_a:
                    recs.append(
                        exclude_record("mean_a/main", site,
                                       "direction-wise curvature floor failed on this ray")
                    )
                else:
                    win = _window(H_a, r_true)
                    if win == "main":
                        rhs = cst.factor_a * mean_curvature_model(H_a, cst.n, r_true)
                        recs.append(make_record("mean_a/main", site, row.lap_Af, rhs))
                    elif win == "outer":
                        fac = remark_quarter_factor(H_a, cst.n, cst.deltan, cst.K, r_true)
                        rhs = fac * mean_curvature_model(H_a, cst.n, r_true)
                        recs.append(make_record("mean_a/outer", site, row.lap_Af, rhs))
                    else:
                        recs.append(
                            exclude_record("mean_a/main", site,
                                           "radius beyond the H > 0 comparison window")
                        )

            if "b" in parts:
                hyp_b = ric_trace_extended(geo, fjet, row.dr) / scale
                recs.append(make_record("mean_b/hyp", site, H_b, hyp_b))
                if hyp_b < H_b - TOL_THM:
                    ok_b = False
                if not ok_b:
                    recs.append(
                        exclude_record("mean_b/main", site,
                                       "radial trace-corrected floor failed on this ray")
                    )
                elif _window(H_b, r_true) == "main":
                    rhs = (cst.factor_b * mean_curvature_model(H_b, cst.n, r_true)
                           + float(scenario.fprime(r_true)))
                    recs.append(make_record("mean_b/main", site, row.l_A, rhs))
                else:
                    recs.append(
                        exclude_record("mean_b/main", site,
                                       "radius beyond the H > 0 comparison window")
                    )

            # sharper factor Trace(A)/(n-1) (1 + 4K/Trace(A)) available when
            # the trace is constant; hypothesis Trace(A) Hc <= Ric(dr, A dr)
            if np.max(np.abs(fjet.dtrace)) <= 1e-8:
                tau = float(fjet.trace)
                Hc = (scale * H_a) / tau
                recs.append(
                    make_record("mean_cor/hyp", site, tau * Hc,
                                ric_extended(geo, fjet, row.dr))
                )
                if _window(Hc, r_true) == "main":
                    fac = (tau / (cst.n - 1)) * (1.0 + 4.0 * cst.K / tau)
                    m = mean_curvature_model(Hc, cst.n, r_true)
                    recs.append(make_record("mean_cor/a", site, row.lap_Af, fac * m))
                    recs.append(
                        make_record("mean_cor/b", site, row.l_A,
                                    fac * m + float(scenario.fprime(r_true)))
                    )
    return recs


def verify_meyer(scenario: LabScenario, pairs: Optional[Sequence[Tuple]] = None,
                 n_extra: int = 0) -> List[VerificationRecord]:
    """Diameter bound pi/sqrt(H) + 4K/(deltan (n-1) sqrt(H)) against
    measured distances between witness pairs.

    Pairs come from the argument, the scenario's meyer_pairs metadata, or
    (last resort) random interior pairs.  The curvature floor is the
    declared H or the sampled direction-wise floor; without a positive
    floor every record is excluded.
    """
    cst = scenario.constants
    recs: List[VerificationRecord] = []
    H = scenario.H if scenario.H is not None else curvature_floor(scenario, "full")

    if pairs is None:
        pairs = scenario.meta.get("meyer_pairs")
    if pairs is None:
        pairs = []
    pairs = list(pairs)
    if n_extra > 0:
        sampler = scenario.M.interior_sampler(scenario.rng(29))
        pairs.extend((sampler(), sampler()) for _ in range(n_extra))
    if not pairs:
        raise LabError(f"scenario {scenario.name!r} has no diameter witness pairs")

    if H <= 0.0:
        for idx in range(len(pairs)):
            recs.append(
                exclude_record("meyer/pair", f"pair{idx}",
                               f"sampled curvature floor {H:.4g} is not positive")
            )
        return recs

    # sampled refutation check of the global hypothesis
    floor = curvature_floor(scenario, "full")
    recs.append(make_record("meyer/hyp", "sites", H, floor))

    bound = meyer_diameter_bound(H, cst.n, cst.deltan, cst.K)
    worst = 0.0
    for idx, (p, q) in enumerate(pairs):
        d = distance(scenario.M, np.asarray(p, float), np.asarray(q, float),
                     **scenario.dist_kwargs).value
        worst = max(worst, d)
        recs.append(make_record("meyer/pair", f"pair{idx}", d, bound))
    recs.append(make_record("meyer/diameter", "max", worst, bound))

    witness = scenario.meta.get("diameter_witness")
    if witness is not None:
        recs.append(make_record("meyer/witness", "max", float(witness), worst))
    return recs
