"""Self-adjoint (1,1)-tensor fields and their covariant derivative jets.

Component conventions (on top of the chart conventions):

* ``A[i, j]``               operator components A^i_j
* ``nablaA[k, i, j]``       (nabla_k A)^i_j
* ``nabla2A[l, k, i, j]``   (nabla_l nabla_k A)^i_j
* ``torsion[k, j, i]``      T(e_k, e_j)^i = nablaA[k, i, j] - nablaA[j, i, k]

``torsion`` is the commutator-style antisymmetrization of the covariant
derivative; it vanishes exactly when the field satisfies the symmetric
derivative (Codazzi) condition.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla

from ..errors import EllipticityError
from .chart import ChartManifold, GeometryJet

SELF_ADJOINT_TOL = 1e-8


@dataclass
class SelfAdjointField:
    """A (1,1)-tensor field given by a callback ``A(x) -> (n, n)`` of
    mixed components, self-adjoint with respect to the chart metric."""

    name: str
    A: Callable[[np.ndarray], np.ndarray]
    dA: Optional[Callable] = None
    d2A: Optional[Callable] = None
    A_batch: Optional[Callable] = None
    meta: dict = dc_field(default_factory=dict)

    def at(self, x) -> np.ndarray:
        return np.asarray(self.A(np.asarray(x, dtype=float)), dtype=float)

    def many(self, X) -> np.ndarray:
        if self.A_batch is not None:
            return np.asarray(self.A_batch(np.asarray(X, dtype=float)), dtype=float)
        return np.stack([self.at(x) for x in np.asarray(X, dtype=float)])


@dataclass(frozen=True)
class SpectralBounds:
    """Extremes of the field's eigenvalues over a sample set, plus the
    largest absolute trace (the constants every comparison factor needs)."""

    delta1: float
    deltan: float
    trace_sup: float
    n_samples: int

    def require_elliptic(self):
        if self.delta1 <= 0.0:
            raise EllipticityError(
                f"smallest sampled eigenvalue {self.delta1:.6e} is not positive"
            )
        return self


class FieldJet:
    """Covariant derivatives of one field at one point, cached."""

    def __init__(self, field: SelfAdjointField, geo: GeometryJet):
        self.field = field
        self.geo = geo
        self.M = geo.M
        self.x = geo.x
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def A(self) -> np.ndarray:
        def build():
            A = self.field.at(self.x)
            gA = self.geo.g @ A
            scale = 1.0 + float(np.abs(gA).max())
            if float(np.abs(gA - gA.T).max()) > SELF_ADJOINT_TOL * scale:
                raise EllipticityError(
                    f"field {self.field.name!r} is not metric self-adjoint at {self.x}"
                )
            return A

        return self._get("A", build)

    @property
    def dA(self) -> np.ndarray:
        def build():
            if self.field.dA is not None:
                return np.asarray(self.field.dA(self.x), dtype=float)
            n, h = self.M.dim, self.M.h1
            out = np.empty((n, n, n))
            for a in range(n):
                e = np.zeros(n)
                e[a] = h
                out[a] = (self.field.at(self.x + e) - self.field.at(self.x - e)) / (2.0 * h)
            return out

        return self._get("dA", build)

    @property
    def d2A(self) -> np.ndarray:
        def build():
            if self.field.d2A is not None:
                return np.asarray(self.field.d2A(self.x), dtype=float)
            n, h = self.M.dim, self.M.h2
            if self.field.dA is not None:
                # one difference level on exact first derivatives, then
                # symmetrized in the two derivative slots
                out = np.empty((n, n, n, n))
                for a in range(n):
                    e = np.zeros(n)
                    e[a] = h
                    out[a] = (
                        np.asarray(self.field.dA(self.x + e), dtype=float)
                        - np.asarray(self.field.dA(self.x - e), dtype=float)
                    ) / (2.0 * h)
                return 0.5 * (out + np.transpose(out, (1, 0, 2, 3)))
            A0 = self.field.at(self.x)
            out = np.empty((n, n, n, n))
            for a in range(n):
                ea = np.zeros(n)
                ea[a] = h
                out[a, a] = (
                    self.field.at(self.x + ea) - 2.0 * A0 + self.field.at(self.x - ea)
                ) / h**2
                for b in range(a + 1, n):
                    eb = np.zeros(n)
                    eb[b] = h
                    cross = (
                        self.field.at(self.x + ea + eb)
                        - self.field.at(self.x + ea - eb)
                        - self.field.at(self.x - ea + eb)
                        + self.field.at(self.x - ea - eb)
                    ) / (4.0 * h**2)
                    out[a, b] = cross
                    out[b, a] = cross
            return out

        return self._get("d2A", build)

    @property
    def nablaA(self) -> np.ndarray:
        def build():
            G = self.geo.gamma
            A = self.A
            return (
                self.dA
                + np.einsum("ikm,mj->kij", G, A)
                - np.einsum("mkj,im->kij", G, A)
            )

        return self._get("nablaA", build)

    @property
    def nabla2A(self) -> np.ndarray:
        def build():
            G, dG = self.geo.gamma, self.geo.dgamma
            A, dA, d2A = self.A, self.dA, self.d2A
            # partial_l of the nablaA component expression
            d_nablaA = (
                d2A
                + np.einsum("likm,mj->lkij", dG, A)
                + np.einsum("ikm,lmj->lkij", G, dA)
                - np.einsum("lmkj,im->lkij", dG, A)
                - np.einsum("mkj,lim->lkij", G, dA)
            )
            nA = self.nablaA
            return (
                d_nablaA
                + np.einsum("ilm,kmj->lkij", G, nA)
                - np.einsum("mlk,mij->lkij", G, nA)
                - np.einsum("mlj,kim->lkij", G, nA)
            )

        return self._get("nabla2A", build)

    @property
    def torsion(self) -> np.ndarray:
        return self._get(
            "torsion",
            lambda: np.einsum("kij->kji", self.nablaA) - np.einsum("jik->kji", self.nablaA),
        )

    @property
    def nabla_torsion(self) -> np.ndarray:
        """nabla_torsion[l, k, j, i] = (nabla_l T)(e_k, e_j)^i, from nabla2A."""
        return self._get(
            "nabla_torsion",
            lambda: np.einsum("lkij->lkji", self.nabla2A) - np.einsum("ljik->lkji", self.nabla2A),
        )

    @property
    def div(self) -> np.ndarray:
        """(div A)^i = g^{kj} nablaA[k, i, j]."""
        return self._get("div", lambda: np.einsum("kj,kij->i", self.geo.ginv, self.nablaA))

    @property
    def nabla_div(self) -> np.ndarray:
        """nabla_div[l, i] = (nabla_l div A)^i = g^{kj} nabla2A[l, k, i, j]."""
        return self._get(
            "nabla_div", lambda: np.einsum("kj,lkij->li", self.geo.ginv, self.nabla2A)
        )

    @property
    def laplacian(self) -> np.ndarray:
        """Trace of the second covariant derivative: g^{lk} nabla2A[l, k, :, :]."""
        return self._get(
            "laplacian", lambda: np.einsum("lk,lkij->ij", self.geo.ginv, self.nabla2A)
        )

    @property
    def codazzi_star(self) -> np.ndarray:
        """Operator components of sum_i (nabla_{e_i} T)(e_i, .):
        out[i, j] contracts the first two torsion-derivative slots."""
        return self._get(
            "codazzi_star",
            lambda: np.einsum("lk,lkji->ij", self.geo.ginv, self.nabla_torsion),
        )

    @property
    def trace(self) -> float:
        return float(np.trace(self.A))

    @property
    def dtrace(self) -> np.ndarray:
        """partial_a tr A; equals the covariant derivative of the trace."""
        return self._get("dtrace", lambda: np.einsum("aii->a", self.dA))

    @property
    def grad_trace(self) -> np.ndarray:
        return self._get("grad_trace", lambda: self.geo.ginv @ self.dtrace)

    def directional(self, W) -> np.ndarray:
        """(nabla_W A)^i_j for a chart vector W."""
        return np.einsum("k,kij->ij", np.asarray(W, dtype=float), self.nablaA)

    def torsion_residual(self) -> float:
        """Sup over orthonormal frame pairs of |T(e_a, e_b)|, the scalar
        Codazzi defect at this point."""
        E = self.geo.frame
        # frame components of T(e_a, e_b)
        Tf = np.einsum("ka,jb,kji->abi", E, E, self.torsion)
        norms = np.sqrt(np.einsum("abi,ij,abj->ab", Tf, self.geo.g, Tf))
        return float(norms.max())


def codazzi_residual(M: ChartManifold, field: SelfAdjointField, sites) -> float:
    """Largest pointwise Codazzi defect over the sample sites."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(sites, dtype=float)):
        jet = FieldJet(field, GeometryJet(M, x))
        worst = max(worst, jet.torsion_residual())
    return worst


def spectral_bounds(M: ChartManifold, field: SelfAdjointField, sites) -> SpectralBounds:
    """Eigenvalue window and trace sup of the field over the sample sites.

    Eigenvalues are taken in the generalized sense against the metric, so
    they agree with the operator spectrum of the self-adjoint field."""
    lo, hi, tr = np.inf, -np.inf, 0.0
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    for x in sites:
        geo = GeometryJet(M, x)
        A = FieldJet(field, geo).A
        w = sla.eigh(geo.g @ A, geo.g, eigvals_only=True)
        lo = min(lo, float(w[0]))
        hi = max(hi, float(w[-1]))
        tr = max(tr, abs(float(np.trace(A))))
    return SpectralBounds(delta1=lo, deltan=hi, trace_sup=tr, n_samples=len(sites))
