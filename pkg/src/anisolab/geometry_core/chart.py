"""Chart-based manifolds and pointwise geometry jets.

A manifold is a single coordinate chart: a box domain, a metric callback,
and optionally analytic derivative callbacks.  All tensor work happens in
chart components; orthonormal frames are built pointwise by Gram-Schmidt.

Index conventions used throughout the package:

* ``g[i, j]``            metric components g_ij
* ``dg[a, i, j]``        partial_a g_ij
* ``d2g[a, b, i, j]``    partial_a partial_b g_ij
* ``gamma[k, i, j]``     Christoffel symbols Gamma^k_ij
* ``dgamma[a, k, i, j]`` partial_a Gamma^k_ij
* ``riem[l, i, j, k]``   curvature  (R(e_i, e_j) e_k)^l
* ``ric[j, k]``          Ricci contraction  riem[i, i, j, k]
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ChartDomainError, DegenerateMetricError

# Relative finite-difference steps; scaled by the domain extent.
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-4
SYMMETRY_TOL = 1e-12


@dataclass
class ChartManifold:
    """One coordinate chart with a metric callback.

    ``metric(x)`` must return an (n, n) symmetric positive definite array.
    ``deriv_scheme`` is ``"fd"`` (central differences of the callback) or
    ``"analytic"`` (the chart supplies ``dmetric``/``d2metric``); leaving
    it unset picks analytic whenever both callbacks are present.  Pass
    ``"fd"`` explicitly to force differencing on a chart that has them.
    Optional fast paths (``metric_batch``, ``christoffel_batch``) accept
    arrays of shape (B, n) and are used by the geodesic integrator.
    """

    name: str
    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    box_lo: np.ndarray
    box_hi: np.ndarray
    deriv_scheme: Optional[str] = None
    dmetric: Optional[Callable] = None
    d2metric: Optional[Callable] = None
    christoffel_fn: Optional[Callable] = None
    metric_batch: Optional[Callable] = None
    christoffel_batch: Optional[Callable] = None
    # Analytic distance to the chart origin point, when the chart is a
    # model space around a distinguished center (or a polar radial axis).
    exact_r: Optional[Callable] = None
    exact_dr: Optional[Callable] = None
    exact_d2r: Optional[Callable] = None
    is_polar: bool = False
    sectional_constant: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.box_lo = np.asarray(self.box_lo, dtype=float)
        self.box_hi = np.asarray(self.box_hi, dtype=float)
        if self.deriv_scheme is None:
            self.deriv_scheme = (
                "analytic"
                if (self.dmetric is not None and self.d2metric is not None)
                else "fd"
            )
        if self.deriv_scheme not in ("fd", "analytic"):
            raise ValueError(f"unknown derivative scheme {self.deriv_scheme!r}")
        if self.deriv_scheme == "analytic" and (self.dmetric is None or self.d2metric is None):
            raise ValueError("analytic scheme requires dmetric and d2metric callbacks")

    @property
    def extent(self) -> float:
        return float(np.min(self.box_hi - self.box_lo))

    @property
    def h1(self) -> float:
        return FD_STEP_FIRST * self.extent

    @property
    def h2(self) -> float:
        return FD_STEP_SECOND * self.extent

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.box_lo + margin) and np.all(x <= self.box_hi - margin))

    def require_interior(self, x, margin: Optional[float] = None):
        if margin is None:
            margin = 2.0 * self.h2
        if not self.contains(x, margin):
            raise ChartDomainError(
                f"point {np.asarray(x)} too close to the boundary of chart "
                f"{self.name!r} (margin {margin:.3e})"
            )

    def metric_at(self, x) -> np.ndarray:
        g = np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)
        if not np.allclose(g, g.T, atol=SYMMETRY_TOL, rtol=0.0):
            raise DegenerateMetricError(f"metric not symmetric at {x} on {self.name!r}")
        return 0.5 * (g + g.T)

    def metric_many(self, X: np.ndarray) -> np.ndarray:
        """Metric at a batch of points, shape (B, n) -> (B, n, n)."""
        if self.metric_batch is not None:
            return np.asarray(self.metric_batch(np.asarray(X, dtype=float)), dtype=float)
        return np.stack([self.metric_at(x) for x in np.asarray(X, dtype=float)])

    def interior_sampler(self, rng: np.random.Generator, margin_steps: float = 8.0):
        """Uniform sampler over the box shrunk by margin_steps * h2."""
        m = margin_steps * self.h2
        lo, hi = self.box_lo + m, self.box_hi - m

        def sample():
            return rng.uniform(lo, hi)

        return sample


def _fd_dmetric(M: ChartManifold, x: np.ndarray) -> np.ndarray:
    n, h = M.dim, M.h1
    out = np.empty((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        out[a] = (M.metric_at(x + e) - M.metric_at(x - e)) / (2.0 * h)
    return out


def _fd_d2metric(M: ChartManifold, x: np.ndarray) -> np.ndarray:
    n, h = M.dim, M.h2
    out = np.empty((n, n, n, n))
    g0 = M.metric_at(x)
    for a in range(n):
        ea = np.zeros(n)
        ea[a] = h
        out[a, a] = (M.metric_at(x + ea) - 2.0 * g0 + M.metric_at(x - ea)) / h**2
        for b in range(a + 1, n):
            eb = np.zeros(n)
            eb[b] = h
            cross = (
                M.metric_at(x + ea + eb)
                - M.metric_at(x + ea - eb)
                - M.metric_at(x - ea + eb)
                + M.metric_at(x - ea - eb)
            ) / (4.0 * h**2)
            out[a, b] = cross
            out[b, a] = cross
    return out


class GeometryJet:
    """Metric, Christoffel symbols, and curvature at one point.

    Everything is computed lazily and cached.  The jet never re-evaluates
    the metric callback twice for the same stencil node.
    """

    def __init__(self, M: ChartManifold, x):
        M.require_interior(x)
        self.M = M
        self.x = np.asarray(x, dtype=float)
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def g(self) -> np.ndarray:
        return self._get("g", lambda: self.M.metric_at(self.x))

    @property
    def ginv(self) -> np.ndarray:
        def build():
            g = self.g
            try:
                w = np.linalg.eigvalsh(g)
            except np.linalg.LinAlgError as exc:
                raise DegenerateMetricError(str(exc)) from exc
            if w.min() <= 0.0:
                raise DegenerateMetricError(
                    f"metric not positive definite at {self.x} on {self.M.name!r}"
                )
            return np.linalg.inv(g)

        return self._get("ginv", build)

    @property
    def dg(self) -> np.ndarray:
        def build():
            if self.M.deriv_scheme == "analytic":
                return np.asarray(self.M.dmetric(self.x), dtype=float)
            return _fd_dmetric(self.M, self.x)

        return self._get("dg", build)

    @property
    def d2g(self) -> np.ndarray:
        def build():
            if self.M.deriv_scheme == "analytic":
                return np.asarray(self.M.d2metric(self.x), dtype=float)
            return _fd_d2metric(self.M, self.x)

        return self._get("d2g", build)

    @property
    def gamma(self) -> np.ndarray:
        def build():
            if self.M.christoffel_fn is not None:
                return np.asarray(self.M.christoffel_fn(self.x), dtype=float)
            dg = self.dg
            # bracket[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
            bracket = (
                np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
            )
            return 0.5 * np.einsum("kl,lij->kij", self.ginv, bracket)

        return self._get("gamma", build)

    @property
    def dgamma(self) -> np.ndarray:
        """dgamma[a, k, i, j] = partial_a Gamma^k_ij, assembled from dg, d2g."""

        def build():
            dg, d2g, ginv = self.dg, self.d2g, self.ginv
            # d_a g^{kl} = -g^{km} (d_a g_mn) g^{nl}
            dginv = -np.einsum("km,amn,nl->akl", ginv, dg, ginv)
            bracket = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
            dbracket = (
                np.einsum("aijl->alij", d2g)
                + np.einsum("ajil->alij", d2g)
                - np.einsum("alij->alij", d2g)
            )
            return 0.5 * (
                np.einsum("akl,lij->akij", dginv, bracket)
                + np.einsum("kl,alij->akij", ginv, dbracket)
            )

        return self._get("dgamma", build)

    @property
    def riem(self) -> np.ndarray:
        """riem[l, i, j, k] = (R(e_i, e_j) e_k)^l."""

        def build():
            G, dG = self.gamma, self.dgamma
            term = np.einsum("iljk->lijk", dG) - np.einsum("jlik->lijk", dG)
            quad = np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G)
            return term + quad

        return self._get("riem", build)

    @property
    def riem_low(self) -> np.ndarray:
        """riem_low[i, j, k, d] = < R(e_i, e_j) e_k , e_d >."""
        return self._get(
            "riem_low", lambda: np.einsum("lijk,ld->ijkd", self.riem, self.g)
        )

    @property
    def ric(self) -> np.ndarray:
        return self._get("ric", lambda: np.einsum("iijk->jk", self.riem))

    @property
    def frame(self) -> np.ndarray:
        """Columns are a g-orthonormal frame obtained by Gram-Schmidt on
        the chart basis in fixed order (deterministic)."""

        def build():
            n, g = self.M.dim, self.g
            E = np.zeros((n, n))
            for i in range(n):
                v = np.zeros(n)
                v[i] = 1.0
                for j in range(i):
                    v = v - (E[:, j] @ g @ v) * E[:, j]
                nrm = float(np.sqrt(v @ g @ v))
                if nrm <= 0.0:
                    raise DegenerateMetricError("frame construction degenerated")
                E[:, i] = v / nrm
            return E

        return self._get("frame", build)

    def sectional(self, X, Y) -> float:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        g = self.g
        num = float(np.einsum("lijk,ld,i,j,k,d->", self.riem, g, X, Y, Y, X))
        den = float((X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2)
        return num / den

    def norm(self, X) -> float:
        X = np.asarray(X, dtype=float)
        return float(np.sqrt(max(X @ self.g @ X, 0.0)))

    def inner(self, X, Y) -> float:
        return float(np.asarray(X) @ self.g @ np.asarray(Y))
