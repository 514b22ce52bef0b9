"""Scalar jets and the pointwise operator zoo.

A scalar jet carries the value and the first two coordinate derivatives of a
function at a site, next to the geometry jet of that site, and exposes the
covariant pieces built from them: gradient, Hessian, Hessian operator.

Operators, for a self-adjoint (1,1) field A and drift scalar f:

    lap_A u      = Trace(A o hess_op u)
    l_op u       = lap_A u + <div A, grad u>
    lap_drift u  = lap_A u - <grad f, grad u>
    l_op_drift u = l_op u  - <A grad u, grad f>

The curvature pairing ric_A(X, Y) sums <R(X, e_i)(A e_i), Y> over an
orthonormal frame; it is not symmetric in X, Y for a general field A.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .chart import GeometryJet

Array = np.ndarray


def fd_scalar_grad(fn: Callable[[Array], float], x: Array, h: float) -> Array:
    """Central-difference coordinate gradient of a scalar callable."""
    n = x.size
    out = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return out


def fd_scalar_hess(fn: Callable[[Array], float], x: Array, h: float) -> Array:
    n = x.size
    out = np.empty((n, n))
    f0 = fn(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            v = (
                fn(x + ei + ej)
                - fn(x + ei - ej)
                - fn(x - ei + ej)
                + fn(x - ei - ej)
            ) / (4.0 * h * h)
            out[i, j] = v
            out[j, i] = v
    return out


def directional_derivative(
    fn: Callable[[Array], float], x: Array, direction: Array, h: float
) -> float:
    """D_W fn at x by a two-point central difference along W.

    W is not assumed normalized: the step is taken along the Euclidean unit
    vector and the slope is rescaled by |W|_2.  Returns 0 for W = 0.
    """
    d = np.asarray(direction, dtype=float)
    scale = float(np.linalg.norm(d))
    if scale == 0.0:
        return 0.0
    e = (h / scale) * d
    return (fn(x + e) - fn(x - e)) / (2.0 * h) * scale


@dataclass
class ScalarField:
    """A scalar function with optional analytic first and second partials.

    Missing derivative callbacks fall back to central differences with the
    chart step sizes, so analytic jets should be supplied whenever they are
    cheap: they remove the dominant noise term from identity residuals.
    """

    fn: Callable[[Array], float]
    dfn: Optional[Callable[[Array], Array]] = None
    d2fn: Optional[Callable[[Array], Array]] = None
    name: str = "u"

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def jet(self, geo: GeometryJet) -> "ScalarJet":
        x = geo.x
        if self.dfn is not None:
            du = np.asarray(self.dfn(x), dtype=float)
        else:
            du = fd_scalar_grad(self.fn, x, geo.M.h1)
        if self.d2fn is not None:
            d2u = np.asarray(self.d2fn(x), dtype=float)
        else:
            d2u = fd_scalar_hess(self.fn, x, geo.M.h2)
        return ScalarJet(geo, float(self.fn(x)), du, d2u)


class ScalarJet:
    """Value and coordinate derivatives of a scalar at one site."""

    def __init__(self, geo: GeometryJet, value: float, du: Array, d2u: Array):
        self.geo = geo
        self.value = float(value)
        self.du = np.asarray(du, dtype=float)
        self.d2u = np.asarray(d2u, dtype=float)
        self._cache: dict = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def grad(self) -> Array:
        """Contravariant gradient grad_u^i = g^{ij} du_j."""
        return self._get("grad", lambda: self.geo.ginv @ self.du)

    @property
    def hess(self) -> Array:
        """Covariant Hessian Hu_ab = d2u_ab - Gamma^k_ab du_k."""
        return self._get(
            "hess",
            lambda: self.d2u - np.einsum("kab,k->ab", self.geo.gamma, self.du),
        )

    @property
    def hess_op(self) -> Array:
        """Hessian as an operator, (Hu)^i_j = g^{ia} Hu_aj."""
        return self._get("hess_op", lambda: self.geo.ginv @ self.hess)

    @property
    def grad_norm2(self) -> float:
        return self._get("gn2", lambda: float(self.du @ self.geo.ginv @ self.du))

    def hess_form(self, X, Y) -> float:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return float(X @ self.hess @ Y)


def lap_plain(sjet: ScalarJet) -> float:
    """Ordinary Laplace-Beltrami value g^{ab} Hu_ab."""
    return float(np.einsum("ab,ab->", sjet.geo.ginv, sjet.hess))


def lap_A(sjet: ScalarJet, A: Array) -> float:
    """Trace(A o hess_op u) = Hu_ab A^b_c g^{ca}."""
    return float(np.einsum("ab,bc,ca->", sjet.hess, A, sjet.geo.ginv))


def pair_with_grad(sjet: ScalarJet, V_up: Array) -> float:
    """<V, grad u> = V^i du_i for a contravariant vector V."""
    return float(np.asarray(V_up, dtype=float) @ sjet.du)


def l_op(sjet: ScalarJet, A: Array, divA: Array) -> float:
    """lap_A u plus the divergence pairing <div A, grad u>."""
    return lap_A(sjet, A) + pair_with_grad(sjet, divA)


def lap_drift(sjet: ScalarJet, A: Array, df: Array) -> float:
    """lap_A u - <grad f, grad u> with df the covector of the drift scalar."""
    return lap_A(sjet, A) - float(df @ sjet.geo.ginv @ sjet.du)


def l_op_drift(sjet: ScalarJet, A: Array, divA: Array, df: Array) -> float:
    """l_op u - <A grad u, grad f>."""
    return l_op(sjet, A, divA) - float((A @ sjet.grad) @ df)


def ric_pair(geo: GeometryJet, X, Y) -> float:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return float(np.einsum("jk,j,k->", geo.ric, X, Y))


def ric_A(geo: GeometryJet, A: Array, X, Y) -> float:
    """sum_i <R(X, e_i)(A e_i), Y>.

    Contracting the frame sum leaves the coordinate expression
    riem_low[a,b,c,d] (A g^{-1})^{bc} X^a Y^d; A g^{-1} is symmetric because
    A is self-adjoint, so the slot placement of the contraction is immaterial.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Aup = A @ geo.ginv
    return float(np.einsum("abcd,bc,a,d->", geo.riem_low, Aup, X, Y))


def ric_modified(geo: GeometryJet, hess_tau: Array, X, Y) -> float:
    """Ric(X, Y) - Hess(tau)(X, Y) for a covariant Hessian of a weight scalar."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return ric_pair(geo, X, Y) - float(X @ hess_tau @ Y)
