"""Hypersurface laboratory: shape operators as elliptic Codazzi fields.

An immersion X: D subset R^n -> R^{n+1} induces a metric g = J^T J and a
shape operator A = g^{-1} II, which satisfies the Codazzi equation
because the ambient space is flat.  This gives honest, non-synthetic
test fields: the round sphere (A a positive multiple of the identity)
and the catenoid (A traceless, so indefinite, but A^2 elliptic wherever
the principal curvature is nonzero).

For minimal immersions the Gauss equation turns the extended Ricci
pairing with A^2 into a pure shape-operator expression, which is what
the dominance records below check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from ..errors import LabError
from ..geometry_core import (
    ChartManifold,
    FieldJet,
    GeometryJet,
    SelfAdjointField,
    codazzi_residual,
)
from .records import TOL_THM, VerificationRecord, exclude_record, make_record

FD_IMM = 1e-5          # immersion differencing when no analytic jets
PARALLEL_STEP = 0.01   # geodesic step for the transport consistency check
TOL_CODAZZI_HYP = 1e-6
TOL_MARGIN = 1e-6


@dataclass
class Immersion:
    """A parametrized hypersurface patch with optional analytic jets.

    ``fn(u) -> (n+1,)`` is the position; ``jac`` and ``hess`` return the
    (n+1, n) first and (n+1, n, n) second parameter derivatives.  Missing
    jets fall back to central differences of ``fn``.  ``normal_sign``
    flips the generalized cross product normal so factories can make the
    shape operator positive where that is geometrically available.
    """

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    box_lo: np.ndarray
    box_hi: np.ndarray
    jac: Optional[Callable] = None
    hess: Optional[Callable] = None
    normal_sign: float = 1.0
    ambient_curv: float = 0.0
    minimal: bool = False
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.box_lo = np.asarray(self.box_lo, dtype=float)
        self.box_hi = np.asarray(self.box_hi, dtype=float)

    def position(self, u) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(u, dtype=float)), dtype=float)

    def jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(u), dtype=float)
        J = np.zeros((self.dim + 1, self.dim))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = FD_IMM
            J[:, i] = (self.position(u + e) - self.position(u - e)) / (2 * FD_IMM)
        return J

    def hessian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(u), dtype=float)
        n = self.dim
        Hs = np.zeros((n + 1, n, n))
        X0 = self.position(u)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = FD_IMM
            Hs[:, i, i] = (self.position(u + ei) - 2 * X0
                           + self.position(u - ei)) / FD_IMM**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = FD_IMM
                m = (self.position(u + ei + ej) + self.position(u - ei - ej)
                     - self.position(u + ei - ej) - self.position(u - ei + ej))
                Hs[:, i, j] = Hs[:, j, i] = m / (4 * FD_IMM**2)
        return Hs

    def normal(self, u) -> np.ndarray:
        N = _gen_cross(self.jacobian(u)) * self.normal_sign
        nrm = float(np.linalg.norm(N))
        if nrm < 1e-14:
            raise LabError(f"degenerate immersion jacobian in {self.name!r}")
        return N / nrm

    def metric(self, u) -> np.ndarray:
        J = self.jacobian(u)
        return J.T @ J

    def second_fundamental(self, u) -> np.ndarray:
        N = self.normal(u)
        return np.einsum("a,aij->ij", N, self.hessian(u))

    def shape_operator(self, u) -> np.ndarray:
        return np.linalg.solve(self.metric(u), self.second_fundamental(u))


def _gen_cross(J: np.ndarray) -> np.ndarray:
    """Generalized cross product of the n columns of an (n+1, n) frame:
    the cofactor vector, continuous in J and orthogonal to every column."""
    m = J.shape[0]
    N = np.empty(m)
    for i in range(m):
        minor = np.delete(J, i, axis=0)
        N[i] = (-1.0) ** i * np.linalg.det(minor)
    return N


def induced_chart(imm: Immersion) -> ChartManifold:
    """Chart of the immersed patch carrying the pullback metric."""
    return ChartManifold(
        name=f"{imm.name}-induced",
        dim=imm.dim,
        metric=imm.metric,
        box_lo=imm.box_lo,
        box_hi=imm.box_hi,
        deriv_scheme="fd",
        meta={"immersion": imm.name},
    )


def shape_field(imm: Immersion) -> SelfAdjointField:
    return SelfAdjointField(name=f"{imm.name}-shape", A=imm.shape_operator)


def squared_shape_field(imm: Immersion) -> SelfAdjointField:
    def asq(u):
        A = imm.shape_operator(u)
        return A @ A

    return SelfAdjointField(name=f"{imm.name}-shape-sq", A=asq)


def round_sphere(radius: float = 1.0) -> Immersion:
    """Sphere patch in colatitude/longitude away from the poles; the
    inward normal makes the shape operator (1/radius) times the identity."""
    R = float(radius)

    def fn(u):
        th, ph = u
        return np.array([
            R * math.sin(th) * math.cos(ph),
            R * math.sin(th) * math.sin(ph),
            R * math.cos(th),
        ])

    def jac(u):
        th, ph = u
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(ph), math.cos(ph)
        return R * np.array([
            [ct * cp, -st * sp],
            [ct * sp, st * cp],
            [-st, 0.0],
        ])

    def hess(u):
        th, ph = u
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(ph), math.cos(ph)
        H = np.zeros((3, 2, 2))
        H[:, 0, 0] = R * np.array([-st * cp, -st * sp, -ct])
        H[:, 0, 1] = H[:, 1, 0] = R * np.array([-ct * sp, ct * cp, 0.0])
        H[:, 1, 1] = R * np.array([-st * cp, -st * sp, 0.0])
        return H

    return Immersion(
        name=f"sphere-r{R:g}",
        dim=2,
        fn=fn,
        jac=jac,
        hess=hess,
        box_lo=[0.5, -2.6],
        box_hi=[math.pi - 0.5, 2.6],
        normal_sign=-1.0,
    )


def catenoid(waist: float = 1.0) -> Immersion:
    """Catenoid patch; minimal, with principal curvatures +/- kappa and
    kappa = 1 / (waist * cosh^2(v/waist)) never zero on the patch."""
    c = float(waist)

    def fn(u):
        a, v = u
        w = c * math.cosh(v / c)
        return np.array([w * math.cos(a), w * math.sin(a), v])

    def jac(u):
        a, v = u
        w = c * math.cosh(v / c)
        wp = math.sinh(v / c)
        return np.array([
            [-w * math.sin(a), wp * math.cos(a)],
            [w * math.cos(a), wp * math.sin(a)],
            [0.0, 1.0],
        ])

    def hess(u):
        a, v = u
        w = c * math.cosh(v / c)
        wp = math.sinh(v / c)
        wpp = math.cosh(v / c) / c
        H = np.zeros((3, 2, 2))
        H[:, 0, 0] = [-w * math.cos(a), -w * math.sin(a), 0.0]
        H[:, 0, 1] = H[:, 1, 0] = [-wp * math.sin(a), wp * math.cos(a), 0.0]
        H[:, 1, 1] = [wpp * math.cos(a), wpp * math.sin(a), 0.0]
        return H

    return Immersion(
        name=f"catenoid-c{c:g}",
        dim=2,
        fn=fn,
        jac=jac,
        hess=hess,
        box_lo=[-2.8, -1.1],
        box_hi=[2.8, 1.1],
        minimal=True,
    )


def flat_plane() -> Immersion:
    def fn(u):
        return np.array([u[0], u[1], 0.0])

    def jac(u):
        return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def hess(u):
        return np.zeros((3, 2, 2))

    return Immersion(
        name="plane",
        dim=2,
        fn=fn,
        jac=jac,
        hess=hess,
        box_lo=[-2.0, -2.0],
        box_hi=[2.0, 2.0],
        minimal=True,
    )


def _sample_sites(imm: Immersion, n: int, rng) -> np.ndarray:
    lo, hi = imm.box_lo, imm.box_hi
    pad = 0.06 * (hi - lo)
    return rng.uniform(lo + pad, hi - pad, size=(n, imm.dim))


def _parallel_residual(M: ChartManifold, fld: SelfAdjointField,
                       x: np.ndarray, v: np.ndarray) -> float:
    """Transport a frame one step each way along the geodesic through x
    and compare the centered difference of the frame components of A
    against the covariant derivative contracted with the velocity."""
    geo0 = GeometryJet(M, x)
    v = v / math.sqrt(float(v @ geo0.g @ v))
    E0 = geo0.frame
    h = PARALLEL_STEP

    def rhs(state):
        y, w, E = state
        gam = GeometryJet(M, y).gamma
        dw = -np.einsum("kij,i,j->k", gam, w, w)
        dE = -np.einsum("kij,i,ja->ka", gam, w, E)
        return w, dw, dE

    def rk4(state, dt):
        k1 = rhs(state)
        s2 = tuple(a + 0.5 * dt * b for a, b in zip(state, k1))
        k2 = rhs(s2)
        s3 = tuple(a + 0.5 * dt * b for a, b in zip(state, k2))
        k3 = rhs(s3)
        s4 = tuple(a + dt * b for a, b in zip(state, k3))
        k4 = rhs(s4)
        return tuple(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                     for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))

    def comps(state):
        y, _, E = state
        gy = M.metric_at(y)
        return E.T @ gy @ fld.at(y) @ E

    plus = rk4((x.copy(), v.copy(), E0.copy()), h)
    minus = rk4((x.copy(), -v.copy(), E0.copy()), h)
    dnum = (comps(plus) - comps(minus)) / (2.0 * h)

    fjet = FieldJet(fld, geo0)
    dcov = E0.T @ geo0.g @ fjet.directional(v) @ E0
    return float(np.abs(dnum - dcov).max())


def _divergence_defect(M: ChartManifold, fld: SelfAdjointField,
                       sites: np.ndarray) -> float:
    """Worst gap between the matrix divergence of the field and the
    gradient of its trace, the first-order content of the Codazzi
    equation."""
    worst = 0.0
    for x in sites:
        geo = GeometryJet(M, x)
        fjet = FieldJet(fld, geo)
        gap = fjet.div - geo.ginv @ fjet.dtrace
        worst = max(worst, math.sqrt(float(gap @ geo.g @ gap)))
    return worst


def verify_hypersurface(imm: Immersion, n_sites: int = 24,
                        n_samples: int = 200,
                        seed: int = 0) -> Tuple[List[VerificationRecord], Dict]:
    """Record suite for one immersed patch.

    Checks, in order: the induced metric is positive definite; the shape
    operator satisfies the Codazzi equation (pointwise residual and the
    divergence-equals-trace-gradient consequence); a parallel-frame
    transport step reproduces the covariant derivative; the Gauss
    equation ties the intrinsic Ricci pairing to shape operator
    invariants; and for squared-operator records, the divergence
    compatibility of A^2 gates them, with minimal patches additionally
    checked for the spectral dominance margin.
    """
    M = induced_chart(imm)
    fld = shape_field(imm)
    rng = np.random.default_rng([seed, 8317])
    sites = _sample_sites(imm, n_sites, rng)
    recs: List[VerificationRecord] = []

    eig_min_g = math.inf
    for x in sites:
        w = np.linalg.eigvalsh(M.metric_at(x))
        eig_min_g = min(eig_min_g, float(w[0]))
    recs.append(make_record("hyps/metric_pd", (), 0.0, eig_min_g, tol=0.0))

    resid = codazzi_residual(M, fld, sites)
    recs.append(make_record("hyps/codazzi", (), resid, TOL_CODAZZI_HYP, tol=0.0))
    recs.append(make_record("hyps/divergence", (),
                            _divergence_defect(M, fld, sites[:8]),
                            TOL_CODAZZI_HYP * 10.0, tol=0.0))

    worst_par = 0.0
    for x in sites[:4]:
        v = rng.normal(size=imm.dim)
        worst_par = max(worst_par, _parallel_residual(M, fld, x, v))
    recs.append(make_record("hyps/parallel", (), worst_par, 1e-4, tol=0.0))

    # Gauss equation: Ric(X, X) = tr(A) <AX, X> - |AX|^2 + (n-1) c |X|^2
    c_amb = imm.ambient_curv
    n = imm.dim
    worst_gauss = 0.0
    spec_hi = 0.0
    tr_sup = 0.0
    gauss_sites = sites[: max(8, n_sites // 3)]
    for x in gauss_sites:
        geo = GeometryJet(M, x)
        A = FieldJet(fld, geo).A
        w = sla.eigh(geo.g @ A, geo.g, eigvals_only=True)
        spec_hi = max(spec_hi, float(np.abs(w).max()))
        tr_sup = max(tr_sup, abs(float(np.trace(A))))
        for _ in range(3):
            X = rng.normal(size=n)
            X /= math.sqrt(float(X @ geo.g @ X))
            AX = A @ X
            lhs = float(np.einsum("jk,j,k->", geo.ric, X, X))
            rhs = (float(np.trace(A)) * float(X @ geo.g @ AX)
                   - float(AX @ geo.g @ AX) + (n - 1) * c_amb)
            worst_gauss = max(worst_gauss, abs(lhs - rhs))
    recs.append(make_record("hyps/gauss", (), worst_gauss, 1e-5, tol=0.0))

    # squared-operator records, gated on divergence compatibility of A^2
    asq = squared_shape_field(imm)
    asq_defect = _divergence_defect(M, asq, sites[:8])
    eig_asq = math.inf
    for x in sites:
        geo = GeometryJet(M, x)
        A = FieldJet(fld, geo).A
        w = sla.eigh(geo.g @ A, geo.g, eigvals_only=True)
        eig_asq = min(eig_asq, float(np.min(w * w)))
    if asq_defect <= TOL_CODAZZI_HYP * 10.0:
        recs.append(make_record("hyps/asq_divfree", (), asq_defect,
                                TOL_CODAZZI_HYP * 10.0, tol=0.0))
        recs.append(make_record("hyps/asq_codazzi", (),
                                codazzi_residual(M, asq, sites[:8]),
                                TOL_CODAZZI_HYP * 10.0, tol=0.0))
        recs.append(make_record("hyps/asq_elliptic", (), 0.0, eig_asq, tol=0.0))
    else:
        reason = ("squared shape operator is not divergence-compatible "
                  f"on this patch (defect {asq_defect:.3e})")
        recs.append(exclude_record("hyps/asq_divfree", (), reason))
        recs.append(exclude_record("hyps/asq_codazzi", (), reason))
        recs.append(exclude_record("hyps/asq_elliptic", (), reason))

    info: Dict = {
        "codazzi": resid,
        "asq_defect": asq_defect,
        "spec_hi": spec_hi,
        "trace_sup": tr_sup,
        "gauss": worst_gauss,
        "parallel": worst_par,
        "min_eig_asq": eig_asq,
    }

    if imm.minimal:
        recs.append(make_record("hyps/minimal", (), tr_sup, 1e-8, tol=0.0))
        # dominance margin: with d = sup |eig A|, the quadratic form
        # <X, A^2 (d^2 - A^2) X> / d^2 is nonnegative, which is the
        # curvature-floor content of the Gauss equation here:
        # Ric(X, A^2 X) = -|A^2 X|^2 >= -d^2 <X, A^2 X>.
        d2 = spec_hi * spec_hi
        if d2 < 1e-18:
            # totally geodesic patch: every margin term vanishes identically
            recs.append(make_record("hyps/margin", ("samples", 0),
                                    -TOL_MARGIN, 0.0, tol=0.0))
            info["margin"] = 0.0
            return recs, info
        worst_margin = math.inf
        worst_tie = 0.0
        for _ in range(n_samples):
            x = _sample_sites(imm, 1, rng)[0]
            geo = GeometryJet(M, x)
            A = FieldJet(fld, geo).A
            X = rng.normal(size=n)
            X /= math.sqrt(float(X @ geo.g @ X))
            AAX = A @ (A @ X)
            q = d2 * float((A @ X) @ geo.g @ (A @ X)) - float(AAX @ geo.g @ AAX)
            worst_margin = min(worst_margin, q / d2)
            ric_pairing = float(np.einsum("jk,j,k->", geo.ric, X, AAX))
            tie = abs(ric_pairing + float(AAX @ geo.g @ AAX)
                      - (n - 1) * c_amb * float(X @ geo.g @ (A @ (A @ X))))
            worst_tie = max(worst_tie, tie)
        recs.append(make_record("hyps/margin", ("samples", n_samples),
                                -TOL_MARGIN, worst_margin, tol=0.0))
        recs.append(make_record("hyps/margin_gauss", (), worst_tie, 1e-5, tol=0.0))
        info["margin"] = worst_margin
        info["margin_gauss"] = worst_tie

    return recs, info
