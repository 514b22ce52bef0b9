"""Global structure checks: line splitting, the quantitative maximum
principle, excess bounds, and end counting.

These verifiers work through the geodesic engine, so every value is a
shot distance rather than a chart formula.  Truncated Busemann values
are Richardson-extrapolated in the truncation radius: with
b_T(x) = T - d(x, gamma(T)), the combination 2 b_T - b_{T/2} removes
the leading 1/T tail, and the T-to-T/2 increment is recorded as the
convergence gate.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import HypothesisWindowError, LabError, ODEBlowupError
from ..geodesic_engine import TOL_DIST, distance, make_ray
from ..geometry_core import FieldJet, GeometryJet, ScalarJet, lap_drift
from ..model_space import ag_G, excess_bound, end_count_bound, effective_dimension
from .radial import curvature_floor, ric_trace_extended
from .records import TOL_THM, LabScenario, VerificationRecord, exclude_record, make_record

HESS_STEP = 0.1        # stencil for Busemann Hessians
GRAD_STEP = 0.01       # stencil for Busemann gradients
QMP_STEP = 0.05        # stencil for the operator bound on U
DIST_SLACK = 3.0 * TOL_DIST


def _dist(M, a, b, dk) -> float:
    return distance(M, a, b, **dk).value


def _bhat(M, ray_plus, x, T, dk) -> Tuple[float, float]:
    """Richardson-extrapolated truncated Busemann value and the raw
    T-to-T/2 increment that gauges convergence."""
    bT = T - _dist(M, x, ray_plus.point_at(T), dk)
    bH = T / 2.0 - _dist(M, x, ray_plus.point_at(T / 2.0), dk)
    return 2.0 * bT - bH, abs(bT - bH)


def _stencil_jet(value_fn, geo: GeometryJet, x: np.ndarray, h: float) -> ScalarJet:
    """Central-difference scalar jet of value_fn at x: axis points give
    the gradient and pure second derivatives, diagonal pairs the mixed
    ones (the 9-point stencil in two dimensions)."""
    n = len(x)
    f0 = value_fn(x)
    du = np.zeros(n)
    d2 = np.zeros((n, n))
    fp = np.zeros(n)
    fm = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fp[i] = value_fn(x + e)
        fm[i] = value_fn(x - e)
        du[i] = (fp[i] - fm[i]) / (2.0 * h)
        d2[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / (h * h)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros(n)
            e[i] = h
            e[j] = h
            fpp = value_fn(x + e)
            fmm = value_fn(x - e)
            e[j] = -h
            fpm = value_fn(x + e)
            fmp = value_fn(x - e)
            d2[i, j] = d2[j, i] = (fpp + fmm - fpm - fmp) / (4.0 * h * h)
    return ScalarJet(geo, f0, du, d2)


def _default_split_sites(scenario: LabScenario) -> List[np.ndarray]:
    M = scenario.M
    v = np.asarray(scenario.line_direction, dtype=float)
    p0 = np.asarray(scenario.line_point, dtype=float)
    geo = GeometryJet(M, p0)
    v = v / math.sqrt(float(v @ geo.g @ v))
    # transverse direction: the frame column least aligned with the line
    E = geo.frame
    overlaps = np.abs(E.T @ geo.g @ v)
    w = E[:, int(np.argmin(overlaps))]
    w = w - float(w @ geo.g @ v) * v
    w = w / math.sqrt(float(w @ geo.g @ w))
    sites = []
    for t, tau in ((0.0, 0.15), (0.3, 0.25), (-0.25, 0.35), (0.2, 0.1)):
        x = p0 + t * v + tau * w
        M.require_interior(x)
        sites.append(x)
    return sites


def verify_splitting_premises(scenario: LabScenario, sites=None,
                              T: Optional[float] = None,
                              n_hyp: int = 6) -> Tuple[List[VerificationRecord], Dict]:
    """Records for the line-splitting mechanism on one scenario.

    Checks the nonnegativity hypothesis Ric(Y, A Y) >= 0, that the
    declared line is length-realizing, and then at near-line sites that
    the extrapolated Busemann function has unit gradient, vanishing
    Hessian and drift Laplacian, complementary signs (b+ + b- = 0), and
    that the projected field P A P on its level keeps the extended
    Ricci pairing nonnegative.
    """
    if scenario.line_point is None or scenario.line_direction is None:
        raise LabError("splitting check needs line_point and line_direction")
    M = scenario.M
    dk = dict(scenario.dist_kwargs)
    cst = scenario.constants
    recs: List[VerificationRecord] = []

    floor_raw = curvature_floor(scenario, "full", shave=False, salt=37)
    min_pair = floor_raw * (cst.n - 1) * cst.deltan
    recs.append(make_record("split/hyp", (), 0.0, min_pair, tol=TOL_THM))

    T = float(T if T is not None else scenario.meta.get("busemann_T", 40.0))
    recs.append(make_record("split/T", (), T, 100.0, tol=0.0))

    p0 = np.asarray(scenario.line_point, dtype=float)
    geod = GeometryJet(M, p0)
    v = np.asarray(scenario.line_direction, dtype=float)
    v = v / math.sqrt(float(v @ geod.g @ v))
    hov = dk.get("h_override")
    ray_p = make_ray(M, p0, v, 1.05 * T, h_override=hov)
    ray_m = make_ray(M, p0, -v, 1.05 * T, h_override=hov)

    s_line = min(T / 2.0, 5.0)
    d_line = _dist(M, ray_m.point_at(s_line), ray_p.point_at(s_line), dk)
    recs.append(make_record("split/line", ("s", round(s_line, 3)),
                            abs(d_line - 2.0 * s_line), TOL_THM, tol=0.0))

    if sites is None:
        sites = scenario.meta.get("split_sites")
    if sites is None:
        sites = _default_split_sites(scenario)
    conv_tol = float(scenario.meta.get("busemann_conv_tol", 0.05))

    f_scalar = scenario.f_scalar()
    rng = scenario.rng(41)
    worst_conv = 0.0
    for x in sites:
        x = np.asarray(x, dtype=float)
        geo = GeometryJet(M, x)
        fjet = FieldJet(scenario.field, geo)
        st = tuple(round(float(c), 3) for c in x)

        bp, conv_p = _bhat(M, ray_p, x, T, dk)
        bm, conv_m = _bhat(M, ray_m, x, T, dk)
        worst_conv = max(worst_conv, conv_p, conv_m)
        recs.append(make_record("split/converge", st,
                                max(conv_p, conv_m), conv_tol, tol=0.0))
        recs.append(make_record("split/sum", st, abs(bp + bm), 2e-3, tol=0.0))

        jet = _stencil_jet(lambda y: _bhat(M, ray_p, y, T, dk)[0], geo, x, HESS_STEP)
        # tighter gradient from its own stencil
        gdu = np.zeros(M.dim)
        for i in range(M.dim):
            e = np.zeros(M.dim)
            e[i] = GRAD_STEP
            gdu[i] = (_bhat(M, ray_p, x + e, T, dk)[0]
                      - _bhat(M, ray_p, x - e, T, dk)[0]) / (2.0 * GRAD_STEP)
        gnorm = math.sqrt(float(gdu @ geo.ginv @ gdu))
        recs.append(make_record("split/grad", st, abs(gnorm - 1.0),
                                1e-3, tol=0.0))

        E = geo.frame
        hess_frame = E.T @ jet.hess @ E
        recs.append(make_record("split/hess", st,
                                float(np.abs(hess_frame).max()), 1e-3, tol=0.0))

        df = np.zeros(M.dim)
        if f_scalar is not None:
            df = np.asarray(f_scalar.dfn(x), dtype=float)
        lap = lap_drift(jet, fjet.A, df)
        recs.append(make_record("split/laplacian", st, abs(lap),
                                1e-3 * M.dim * cst.deltan, tol=0.0))

        grad_up = geo.ginv @ gdu
        grad_up = grad_up / gnorm
        P = np.eye(M.dim) - np.outer(grad_up, geo.g @ grad_up)
        A_N = P @ fjet.A @ P
        gAN = geo.g @ A_N
        recs.append(make_record("split/an_selfadjoint", st,
                                float(np.abs(gAN - gAN.T).max()), 1e-8))
        worst = math.inf
        for _ in range(n_hyp):
            Y = P @ rng.normal(size=M.dim)
            nrm = math.sqrt(float(Y @ geo.g @ Y))
            if nrm < 1e-8:
                continue
            Y = Y / nrm
            worst = min(worst, float(np.einsum("jk,j,k->", geo.ric, Y, A_N @ Y)))
        recs.append(make_record("split/projector", st, 0.0, worst, tol=TOL_THM))

    info = {
        "T": T,
        "sites": [list(map(float, s)) for s in sites],
        "worst_convergence": worst_conv,
        "min_pairing": min_pair,
    }
    return recs, info


def verify_qmp(scenario: LabScenario, n_sites: int = 8,
               n_pairs: int = 10) -> Tuple[List[VerificationRecord], Dict]:
    """Quantitative maximum principle records with U the excess function
    of a declared point pair.

    U = d(p, .) + d(q, .) - d(p, q) is nonnegative, vanishes on the
    segment, has dilation at most 2, and its drift Laplacian obeys the
    two-sided distance bound; the conclusion record compares U at the
    center against min over c of (2c + G(c)) for the comparison ODE
    solution G built from those constants.
    """
    M = scenario.M
    dk = dict(scenario.dist_kwargs)
    cst = scenario.constants
    meta = scenario.meta
    recs: List[VerificationRecord] = []

    p, q = (np.asarray(z, dtype=float) for z in meta["qmp_pq"])
    y = np.asarray(meta.get("qmp_y", scenario.x0), dtype=float)
    R = float(meta["qmp_R"])
    a = 2.0

    H_q = scenario.H if scenario.H is not None else 0.0
    if H_q > 0.0:
        recs.append(exclude_record("qmp/main", (), "needs H <= 0"))
        return recs, {"excluded": "H > 0"}

    floor_raw = curvature_floor(scenario, "full", shave=False,
                                radial_only=True, salt=43)
    recs.append(make_record("qmp/hyp", ("H", H_q),
                            (cst.n - 1) * cst.deltan * H_q,
                            floor_raw * (cst.n - 1) * cst.deltan, tol=TOL_THM))

    dpq = _dist(M, p, q, dk)

    def U(x):
        return _dist(M, p, x, dk) + _dist(M, q, x, dk) - dpq

    y0 = np.asarray(meta.get("qmp_y0", 0.5 * (p + q)), dtype=float)
    recs.append(make_record("qmp/zero", tuple(np.round(y0, 3)),
                            abs(U(y0)), 1e-4, tol=0.0))
    d_y0 = _dist(M, y, y0, dk)
    if d_y0 > R + DIST_SLACK:
        recs.append(exclude_record(
            "qmp/main", (), f"U vanishes only at distance {d_y0:.3f} > R"))
        return recs, {"excluded": "y0 outside closed ball"}

    rng = scenario.rng(47)
    sites = []
    attempts = 0
    while len(sites) < n_sites and attempts < 200 * n_sites:
        attempts += 1
        x = y + rng.uniform(-R, R, size=M.dim)
        if not M.contains(x):
            continue
        if _dist(M, y, x, dk) <= R:
            sites.append(x)
    if len(sites) < n_sites:
        raise LabError("could not sample the comparison ball")

    Uvals = np.array([U(x) for x in sites])
    recs.append(make_record("qmp/nonneg", (), 0.0, float(Uvals.min()),
                            tol=DIST_SLACK + TOL_THM))

    dil = 0.0
    for _ in range(n_pairs):
        i, j = rng.choice(len(sites), size=2, replace=False)
        d = _dist(M, sites[i], sites[j], dk)
        if d > 1e-3:
            dil = max(dil, abs(Uvals[i] - Uvals[j]) / d)
    recs.append(make_record("qmp/dil", (), dil, a, tol=1e-3))

    # operator bound: the two-sided distance Laplacian estimate at the
    # center radius, checked against sampled drift Laplacians of U
    dp_y = _dist(M, p, y, dk)
    dq_y = _dist(M, q, y, dk)
    if R >= min(dp_y, dq_y):
        recs.append(exclude_record(
            "qmp/main", (), "comparison radius reaches the endpoints"))
        return recs, {"excluded": "R too large"}
    b_formula = cst.factor_a * (1.0 / (dp_y - R) + 1.0 / (dq_y - R))

    f_scalar = scenario.f_scalar()
    lap_max = -math.inf
    for x in sites[:4]:
        geo = GeometryJet(M, x)
        fjet = FieldJet(scenario.field, geo)
        jet = _stencil_jet(U, geo, x, QMP_STEP)
        df = np.zeros(M.dim) if f_scalar is None else np.asarray(
            f_scalar.dfn(x), dtype=float)
        lap_max = max(lap_max, lap_drift(jet, fjet.A, df))
    recs.append(make_record("qmp/operator", (), lap_max, b_formula,
                            tol=TOL_THM))

    G = ag_G(H_q, cst.n, cst.delta1, cst.deltan, cst.K, b_formula, R)
    best, c_star = G.min_linear_combo(a)
    recs.append(make_record("qmp/main", ("c*", round(c_star, 4)),
                            U(y), best, tol=DIST_SLACK + TOL_THM))
    for frac in (0.25, 0.5, 0.75):
        c = frac * R
        recs.append(make_record("qmp/envelope", ("c", round(c, 4)),
                                best, a * c + G.value(c), tol=1e-10))

    info = {
        "R": R,
        "a": a,
        "b": b_formula,
        "c_star": c_star,
        "min_combo": best,
        "U_center": float(U(y)),
        "dil": dil,
        "lap_max": lap_max,
    }
    return recs, info


def verify_excess(scenario: LabScenario, n_points: int = 100,
                  n_pairs: int = 10) -> Tuple[List[VerificationRecord], Dict]:
    """Excess function records against the closed-form height bound.

    Samples points around the p-q segment at a ladder of heights,
    checks nonnegativity, the dilation bound, and the bound itself
    wherever its hypotheses (height below both distances, finite
    exponent window) hold; out-of-window points are excluded with the
    reason, not dropped.
    """
    M = scenario.M
    dk = dict(scenario.dist_kwargs)
    cst = scenario.constants
    meta = scenario.meta
    recs: List[VerificationRecord] = []

    p, q = (np.asarray(z, dtype=float) for z in meta["excess_pq"])
    if M.sectional_constant not in (0.0,):
        # heights are exact segment distances only on flat charts
        raise LabError("excess scan needs a flat chart for exact heights")

    floor_raw = curvature_floor(scenario, "full", shave=False,
                                radial_only=True, salt=53)
    recs.append(make_record("excess/hyp", (), 0.0,
                            floor_raw * (cst.n - 1) * cst.deltan, tol=TOL_THM))

    dpq = _dist(M, p, q, dk)
    seg = q - p
    seg_len = float(np.linalg.norm(seg))
    seg_dir = seg / seg_len

    # transverse frame for the offsets
    rng = scenario.rng(59)
    w = rng.normal(size=M.dim)
    w -= (w @ seg_dir) * seg_dir
    w /= np.linalg.norm(w)

    heights = meta.get("excess_heights")
    if heights is None:
        heights = np.geomspace(1e-3, 0.35 * dpq, 10)
    fracs = np.linspace(0.25, 0.75, max(1, n_points // len(heights)))

    pts = []
    for h in heights:
        for s in fracs:
            x = p + s * seg + float(h) * w
            if M.contains(x):
                pts.append((float(h), x))
    pts = pts[:n_points]

    e_of: List[Tuple[float, float, float]] = []
    e_at = np.full(len(pts), np.nan)
    for k, (h, x) in enumerate(pts):
        dp = _dist(M, p, x, dk)
        dq = _dist(M, q, x, dk)
        e = dp + dq - dpq
        e_at[k] = e
        recs.append(make_record("excess/nonneg", ("h", round(h, 5)),
                                0.0, e, tol=DIST_SLACK))
        try:
            bound = excess_bound(cst.delta1, cst.deltan, cst.n, cst.K, h, dp, dq)
        except (HypothesisWindowError, ODEBlowupError) as err:
            recs.append(exclude_record("excess/bound", ("h", round(h, 5)),
                                       str(err)))
            continue
        if h > min(dp, dq):
            recs.append(exclude_record(
                "excess/bound", ("h", round(h, 5)),
                "height exceeds a vertex distance"))
            continue
        recs.append(make_record("excess/bound", ("h", round(h, 5)),
                                e, bound, tol=DIST_SLACK + TOL_THM))
        e_of.append((h, e, bound))

    for _ in range(n_pairs):
        i, j = rng.choice(len(pts), size=2, replace=False)
        d = _dist(M, pts[i][1], pts[j][1], dk)
        if d <= 1e-3:
            continue
        recs.append(make_record("excess/dil", (int(i), int(j)),
                                abs(e_at[i] - e_at[j]), 2.0 * d, tol=1e-4))

    info = {"dpq": dpq, "samples": e_of}
    return recs, info


def evaluate_end_bound(scenario: LabScenario,
                       n_hyp: int = 6) -> Tuple[List[VerificationRecord], Dict]:
    """End-count records: hypothesis floors inside and outside the core
    ball, and the declared end count against the closed-form bound.

    The scenario must have been sampled out to 12.5x the core radius so
    the drift constants cover the annuli the bound integrates over; the
    drift must vanish (the smallness quantity is then exactly zero).
    """
    cst = scenario.constants
    meta = scenario.meta
    recs: List[VerificationRecord] = []

    if scenario.declared_ends is None:
        raise LabError("end count check needs declared_ends")
    R = float(meta["ends_R"])
    H_mag = float(meta["ends_H"])
    if H_mag <= 0.0:
        raise LabError("end count check needs a positive curvature scale")
    R_T = 12.5 * R
    if scenario.R < R_T - 1e-9:
        raise LabError(
            f"scenario sampled to {scenario.R:g}, "
            f"but the end bound needs {R_T:g}")

    m = effective_dimension(cst.delta1, cst.deltan, cst.n, cst.K, cst.Kprime)
    p = float(m + 1)

    x0 = scenario.x0
    use_exact = scenario.M.exact_r is not None and float(
        np.linalg.norm(x0)) < 1e-12
    rng = scenario.rng(61)
    worst_in = math.inf
    worst_out = math.inf
    for x in scenario.drift.sites:
        r = (float(scenario.M.exact_r(x)) if use_exact
             else float(np.linalg.norm(x - x0)))
        geo = GeometryJet(scenario.M, x)
        fjet = FieldJet(scenario.field, geo)
        vals = []
        for _ in range(n_hyp):
            Y = rng.normal(size=cst.n)
            Y = Y / math.sqrt(float(Y @ geo.g @ Y))
            vals.append(ric_trace_extended(geo, fjet, Y))
        v = min(vals)
        if r <= R:
            worst_in = min(worst_in, v)
        else:
            worst_out = min(worst_out, v)
    recs.append(make_record("ends/hyp_in", ("R", round(R, 3)),
                            -(cst.n - 1) * cst.deltan * H_mag, worst_in,
                            tol=TOL_THM))
    recs.append(make_record("ends/hyp_out", (), 0.0, worst_out, tol=TOL_THM))

    fp = np.abs(scenario.fprime(np.linspace(0.1, R_T, 64)))
    if np.any(fp > 0.0):
        recs.append(exclude_record(
            "ends/count", (),
            "end bound evaluated only for drift-free fields"))
        return recs, {"excluded": "nonzero drift"}
    eps = 0.0
    recs.append(make_record("ends/eps", (), eps, 0.5, tol=0.0))

    bound = end_count_bound(m, H_mag, R, eps, 1.0, p)
    recs.append(make_record("ends/count", ("m", m),
                            float(scenario.declared_ends), bound, tol=0.0))

    info = {
        "m": m,
        "p": p,
        "R": R,
        "R_T": R_T,
        "H": H_mag,
        "eps": eps,
        "bound": bound,
    }
    return recs, info
