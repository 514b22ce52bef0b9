"""Built-in chart factories.

Every factory returns a ChartManifold with vectorized metric callbacks and,
where the closed forms are short, analytic Christoffel symbols.  These fast
paths feed the geodesic integrator; pointwise jets may still run in
finite-difference mode, which is what the identity suite exercises.
"""

import numpy as np

from ..errors import ChartDomainError
from .chart import ChartManifold


def _sn(H: float, r):
    r = np.asarray(r, dtype=float)
    if H > 0.0:
        s = np.sqrt(H)
        return np.sin(s * r) / s
    if H < 0.0:
        s = np.sqrt(-H)
        return np.sinh(s * r) / s
    return r


def _sn_prime(H: float, r):
    r = np.asarray(r, dtype=float)
    if H > 0.0:
        return np.cos(np.sqrt(H) * r)
    if H < 0.0:
        return np.cosh(np.sqrt(-H) * r)
    return np.ones_like(r)


def space_form(n: int, H: float, half_width: float = None,
               deriv_scheme: str = None) -> ChartManifold:
    """Constant-curvature chart in conformal coordinates.

    g = (1 + H |x|^2 / 4)^(-2) * delta.  The chart origin is a
    distinguished center; geodesic distance to it is analytic.
    For H > 0 the chart covers the sphere minus the antipode of the
    origin; for H < 0 it covers the region |x| < 2 / sqrt(-H).
    """
    if half_width is None:
        if H < 0.0:
            # stay strictly inside the conformal ball
            half_width = 0.92 * 2.0 / np.sqrt(-H) / np.sqrt(n)
        elif H > 0.0:
            half_width = 3.5 / np.sqrt(n) / np.sqrt(H)
        else:
            half_width = 6.0

    def conf(x):
        q = 0.25 * np.sum(np.asarray(x) ** 2, axis=-1)
        return (1.0 + H * q) ** -2

    def metric(x):
        return conf(x) * np.eye(n)

    def metric_batch(X):
        X = np.asarray(X, dtype=float)
        return conf(X)[:, None, None] * np.eye(n)[None, :, :]

    def dmetric(x):
        x = np.asarray(x, dtype=float)
        q = 0.25 * float(x @ x)
        dphi = -H * x * (1.0 + H * q) ** -3
        return dphi[:, None, None] * np.eye(n)[None, :, :]

    def d2metric(x):
        x = np.asarray(x, dtype=float)
        q = 0.25 * float(x @ x)
        u = 1.0 + H * q
        hess_phi = -H * np.eye(n) * u**-3 + 1.5 * H**2 * np.outer(x, x) * u**-4
        return hess_phi[:, :, None, None] * np.eye(n)[None, None, :, :]

    def dlam(x):
        # lambda = log of the conformal factor over 2
        x = np.asarray(x, dtype=float)
        q = 0.25 * np.sum(x**2, axis=-1)
        return -0.5 * H * x / (1.0 + H * q)[..., None]

    def christoffel(x):
        L = dlam(x)
        eye = np.eye(n)
        return (
            np.einsum("ik,j->kij", eye, L)
            + np.einsum("jk,i->kij", eye, L)
            - np.einsum("ij,k->kij", eye, L)
        )

    def christoffel_batch(X):
        L = dlam(np.asarray(X, dtype=float))
        eye = np.eye(n)
        return (
            np.einsum("ik,bj->bkij", eye, L)
            + np.einsum("jk,bi->bkij", eye, L)
            - np.einsum("ij,bk->bkij", eye, L)
        )

    if H > 0.0:
        s = np.sqrt(H)

        def exact_r(x):
            return 2.0 / s * np.arctan(s * np.linalg.norm(x) / 2.0)

    elif H < 0.0:
        s = np.sqrt(-H)

        def exact_r(x):
            return 2.0 / s * np.arctanh(s * np.linalg.norm(x) / 2.0)

    else:

        def exact_r(x):
            return float(np.linalg.norm(x))

    def exact_dr(x):
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        q = 0.25 * float(x @ x)
        return x / (nx * (1.0 + H * q))

    def exact_d2r(x):
        # r(x) = c(|x|) with c'(s) = 1/(1 + H s^2/4); singular at the center
        x = np.asarray(x, dtype=float)
        s = float(np.linalg.norm(x))
        if s < 1e-8:
            raise ChartDomainError("distance Hessian is singular at the center")
        q = 0.25 * s * s
        xhat = x / s
        cp = 1.0 / (1.0 + H * q)
        cpp = -(0.5 * H * s) * cp * cp
        outer = np.outer(xhat, xhat)
        return cpp * outer + (cp / s) * (np.eye(n) - outer)

    return ChartManifold(
        name=f"space_form(n={n},H={H:g})",
        dim=n,
        metric=metric,
        box_lo=-half_width * np.ones(n),
        box_hi=half_width * np.ones(n),
        deriv_scheme=deriv_scheme,
        dmetric=dmetric,
        d2metric=d2metric,
        christoffel_fn=christoffel,
        metric_batch=metric_batch,
        christoffel_batch=christoffel_batch,
        exact_r=exact_r,
        exact_dr=exact_dr,
        exact_d2r=exact_d2r,
        sectional_constant=H,
        meta={"kind": "space_form", "n": n, "H": H},
    )


def polar_space_form(n: int, H: float, deriv_scheme: str = None) -> ChartManifold:
    """Constant-curvature chart in geodesic polar coordinates about a pole.

    Coordinates (r, theta) for n = 2 and (r, theta, phi) for n = 3, with
    g = dr^2 + sn_H(r)^2 dtheta^2 (+ sn_H(r)^2 sin^2(theta) dphi^2).
    The pole itself is not in the chart; the first coordinate is the
    geodesic distance to it.
    """
    if n not in (2, 3):
        raise ValueError("polar charts support n = 2 or 3")
    r_max = np.pi - 0.05 if H > 0.0 else 5.0
    lo = [0.02, 0.15, -0.2][:n]
    hi = [r_max, np.pi - 0.15, np.pi + 0.2][:n]

    def metric(x):
        r = x[..., 0]
        sn = _sn(H, r)
        if n == 2:
            diag = np.stack([np.ones_like(r), sn**2], axis=-1)
        else:
            th = x[..., 1]
            diag = np.stack([np.ones_like(r), sn**2, sn**2 * np.sin(th) ** 2], axis=-1)
        out = np.zeros(x.shape[:-1] + (n, n))
        for i in range(n):
            out[..., i, i] = diag[..., i]
        return out

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = x[None, :] if scalar else x
        r = X[:, 0]
        sn, snp = _sn(H, r), _sn_prime(H, r)
        B = X.shape[0]
        G = np.zeros((B, n, n, n))
        G[:, 0, 1, 1] = -sn * snp
        G[:, 1, 0, 1] = G[:, 1, 1, 0] = snp / sn
        if n == 3:
            th = X[:, 1]
            G[:, 0, 2, 2] = -sn * snp * np.sin(th) ** 2
            G[:, 2, 0, 2] = G[:, 2, 2, 0] = snp / sn
            G[:, 1, 2, 2] = -np.sin(th) * np.cos(th)
            G[:, 2, 1, 2] = G[:, 2, 2, 1] = np.cos(th) / np.sin(th)
        return G[0] if scalar else G

    def dmetric(x):
        # sn'' = -H sn, so (sn^2)' = 2 sn sn' and (sn^2)'' = 2(sn'^2 - H sn^2)
        r = float(x[0])
        sn, snp = _sn(H, r), _sn_prime(H, r)
        out = np.zeros((n, n, n))
        out[0, 1, 1] = 2.0 * sn * snp
        if n == 3:
            th = float(x[1])
            out[0, 2, 2] = 2.0 * sn * snp * np.sin(th) ** 2
            out[1, 2, 2] = sn**2 * np.sin(2.0 * th)
        return out

    def d2metric(x):
        r = float(x[0])
        sn, snp = _sn(H, r), _sn_prime(H, r)
        d2sn2 = 2.0 * (snp**2 - H * sn**2)
        out = np.zeros((n, n, n, n))
        out[0, 0, 1, 1] = d2sn2
        if n == 3:
            th = float(x[1])
            s2, c2 = np.sin(th) ** 2, np.cos(2.0 * th)
            out[0, 0, 2, 2] = d2sn2 * s2
            out[0, 1, 2, 2] = out[1, 0, 2, 2] = 2.0 * sn * snp * np.sin(2.0 * th)
            out[1, 1, 2, 2] = 2.0 * sn**2 * c2
        return out

    return ChartManifold(
        name=f"polar_space_form(n={n},H={H:g})",
        dim=n,
        metric=metric,
        box_lo=np.array(lo),
        box_hi=np.array(hi),
        deriv_scheme=deriv_scheme,
        dmetric=dmetric,
        d2metric=d2metric,
        christoffel_fn=christoffel,
        metric_batch=metric,
        christoffel_batch=christoffel,
        exact_r=lambda x: float(x[0]),
        exact_dr=lambda x: np.eye(n)[0],
        exact_d2r=lambda x: np.zeros((n, n)),
        is_polar=True,
        sectional_constant=H,
        meta={"kind": "polar_space_form", "n": n, "H": H},
    )


def rotation_surface(profile: str, a: float = 1.0, c: float = 0.8,
                     deriv_scheme: str = None) -> ChartManifold:
    """Surface of revolution in coordinates (theta, phi):
    g = E(theta) dtheta^2 + G(theta) dphi^2.

    profile "sphere":  E = 1,                        G = sin^2(theta)
    profile "oblate":  E = a^2 cos^2 + c^2 sin^2,    G = a^2 sin^2(theta)
    """
    if profile == "sphere":

        def EG(th):
            return np.ones_like(th), np.sin(th) ** 2

        def dEG(th):
            return np.zeros_like(th), np.sin(2.0 * th)

        def d2EG(th):
            return np.zeros_like(th), 2.0 * np.cos(2.0 * th)

    elif profile == "oblate":

        def EG(th):
            s2 = np.sin(th) ** 2
            return a**2 * (1.0 - s2) + c**2 * s2, a**2 * s2

        def dEG(th):
            return (c**2 - a**2) * np.sin(2.0 * th), a**2 * np.sin(2.0 * th)

        def d2EG(th):
            c2 = np.cos(2.0 * th)
            return 2.0 * (c**2 - a**2) * c2, 2.0 * a**2 * c2

    else:
        raise ValueError(f"unknown rotation profile {profile!r}")

    def metric(x):
        th = np.asarray(x)[..., 0]
        E, G = EG(th)
        out = np.zeros(np.shape(th) + (2, 2))
        out[..., 0, 0] = E
        out[..., 1, 1] = G
        return out

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = x[None, :] if scalar else x
        th = X[:, 0]
        E, G = EG(th)
        dE, dG = dEG(th)
        out = np.zeros((X.shape[0], 2, 2, 2))
        out[:, 0, 0, 0] = dE / (2.0 * E)
        out[:, 0, 1, 1] = -dG / (2.0 * E)
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = dG / (2.0 * G)
        return out[0] if scalar else out

    def dmetric(x):
        th = float(x[0])
        dE, dG = dEG(th)
        out = np.zeros((2, 2, 2))
        out[0, 0, 0] = dE
        out[0, 1, 1] = dG
        return out

    def d2metric(x):
        th = float(x[0])
        d2E, d2G = d2EG(th)
        out = np.zeros((2, 2, 2, 2))
        out[0, 0, 0, 0] = d2E
        out[0, 0, 1, 1] = d2G
        return out

    return ChartManifold(
        name=f"rotation_surface({profile})",
        dim=2,
        metric=metric,
        box_lo=np.array([0.15, -0.2]),
        box_hi=np.array([np.pi - 0.15, np.pi + 0.2]),
        deriv_scheme=deriv_scheme,
        dmetric=dmetric,
        d2metric=d2metric,
        christoffel_fn=christoffel,
        metric_batch=metric,
        christoffel_batch=christoffel,
        meta={"kind": "rotation_surface", "profile": profile, "a": a, "c": c},
    )


def product_cylinder(rho: float = 1.0, half_length: float = 110.0,
                     theta_half: float = 3.3,
                     deriv_scheme: str = None) -> ChartManifold:
    """Flat cylinder chart: a line factor times a circle factor of radius
    rho, cut open along one generator.  g = dx^2 + rho^2 dtheta^2."""
    g0 = np.diag([1.0, rho**2])

    def metric(x):
        out = np.zeros(np.shape(np.asarray(x))[:-1] + (2, 2))
        out[...] = g0
        return out

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        shape = (2, 2, 2) if x.ndim == 1 else (x.shape[0], 2, 2, 2)
        return np.zeros(shape)

    return ChartManifold(
        name=f"product_cylinder(rho={rho:g})",
        dim=2,
        metric=metric,
        box_lo=np.array([-half_length, -theta_half]),
        box_hi=np.array([half_length, theta_half]),
        deriv_scheme=deriv_scheme,
        dmetric=lambda x: np.zeros((2, 2, 2)),
        d2metric=lambda x: np.zeros((2, 2, 2, 2)),
        christoffel_fn=christoffel,
        metric_batch=metric,
        christoffel_batch=christoffel,
        sectional_constant=0.0,
        meta={"kind": "product_cylinder", "rho": rho, "ends": 2},
    )


_WARPS = {
    "cosh": (np.cosh, np.sinh, np.cosh),
    "exp": (np.exp, np.exp, np.exp),
}


def warped_product(warp: str = "cosh", half_length: float = 2.0,
                   theta_half: float = 3.0,
                   deriv_scheme: str = None) -> ChartManifold:
    """Warped line-over-circle chart: g = dx^2 + w(x)^2 dtheta^2."""
    if warp not in _WARPS:
        raise ValueError(f"unknown warp profile {warp!r}")
    w, wp, wpp = _WARPS[warp]

    def metric(x):
        t = np.asarray(x)[..., 0]
        out = np.zeros(np.shape(t) + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = w(t) ** 2
        return out

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = x[None, :] if scalar else x
        t = X[:, 0]
        out = np.zeros((X.shape[0], 2, 2, 2))
        out[:, 0, 1, 1] = -w(t) * wp(t)
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = wp(t) / w(t)
        return out[0] if scalar else out

    def dmetric(x):
        t = float(x[0])
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = 2.0 * w(t) * wp(t)
        return out

    def d2metric(x):
        t = float(x[0])
        out = np.zeros((2, 2, 2, 2))
        out[0, 0, 1, 1] = 2.0 * (wp(t) ** 2 + w(t) * wpp(t))
        return out

    return ChartManifold(
        name=f"warped_product({warp})",
        dim=2,
        metric=metric,
        box_lo=np.array([-half_length, -theta_half]),
        box_hi=np.array([half_length, theta_half]),
        deriv_scheme=deriv_scheme,
        dmetric=dmetric,
        d2metric=d2metric,
        christoffel_fn=christoffel,
        metric_batch=metric,
        christoffel_batch=christoffel,
        meta={"kind": "warped_product", "warp": warp},
    )
