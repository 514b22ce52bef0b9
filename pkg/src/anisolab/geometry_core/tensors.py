"""Built-in tensor field factories.

The main family is A = amp * g^{-1} Hess(psi) + (base + c * amp * psi) * Id
on a chart of constant curvature c; the symmetric-derivative condition
holds exactly for that combination on any space form, which gives the
laboratory nontrivial curvature-respecting fields with hand-computable
jets.

On the conformal space-form charts the metric is w^2 * delta with
w = 1/(1 + c q), q = |x|^2/4, and the Christoffel symbols come from
L = -(c/2) w x.  Everything through second field derivatives is closed
form there.  The radial potentials grow fast toward the chart edge and
finite differences of them are measurably noisy, so the analytic jets
matter: with them, identity residuals on these fields sit at roundoff.
"""

import numpy as np

from .chart import ChartManifold
from .fields import SelfAdjointField


def identity_field(n: int) -> SelfAdjointField:
    eye = np.eye(n)
    return SelfAdjointField(
        name="identity",
        A=lambda x: eye,
        dA=lambda x: np.zeros((n, n, n)),
        d2A=lambda x: np.zeros((n, n, n, n)),
        A_batch=lambda X: np.broadcast_to(eye, (len(X), n, n)).copy(),
        meta={"kind": "identity"},
    )


def constant_diag_field(values) -> SelfAdjointField:
    """Constant diagonal operator; parallel (hence Codazzi) exactly on
    charts whose Christoffel symbols vanish."""
    D = np.diag(np.asarray(values, dtype=float))
    n = D.shape[0]
    return SelfAdjointField(
        name=f"constant_diag({', '.join(f'{v:g}' for v in np.diag(D))})",
        A=lambda x: D,
        dA=lambda x: np.zeros((n, n, n)),
        d2A=lambda x: np.zeros((n, n, n, n)),
        A_batch=lambda X: np.broadcast_to(D, (len(X), n, n)).copy(),
        meta={"kind": "constant_diag", "values": list(np.diag(D))},
    )


# -- potentials: psi with analytic partials through fourth order ------------


def _radial_profile(name: str, H: float):
    """(F, F', F'', F''', F'''') of psi = F(|x|^2/4) on a conformal chart."""
    if name == "second_harmonic":
        if H <= 0.0:
            raise ValueError("second_harmonic potential needs a positive-curvature chart")

        def derivs(q):
            p = 1.0 + q
            z = (1.0 - q) / p
            return (
                z * z,
                -4.0 * z / p**2,
                8.0 / p**4 + 8.0 * z / p**3,
                -48.0 / p**5 - 24.0 * z / p**4,
                288.0 / p**6 + 96.0 * z / p**5,
            )

        return derivs

    if name == "radial_cosh2":
        if H >= 0.0:
            raise ValueError("radial_cosh2 potential needs a negative-curvature chart")

        def derivs(q):
            m = 1.0 - q
            u = (1.0 + q) / m
            return (
                2.0 * u * u - 1.0,
                8.0 * u / m**2,
                16.0 / m**4 + 16.0 * u / m**3,
                96.0 / m**5 + 48.0 * u / m**4,
                576.0 / m**6 + 192.0 * u / m**5,
            )

        return derivs

    raise ValueError(f"unknown potential {name!r} for space form charts")


class _SpaceFormPotential:
    """psi and its coordinate partials d1..d4 in conformal coordinates."""

    def __init__(self, name: str, n: int, H: float):
        self.name = name
        self.n = n
        if name != "linear_wave":
            self._F = _radial_profile(name, H)

    def _radial(self, q):
        if np.ndim(q):
            flat = [self._F(float(t)) for t in np.ravel(q)]
            return tuple(
                np.asarray([f[k] for f in flat]).reshape(np.shape(q))
                for k in range(5)
            )
        return self._F(float(q))

    def value(self, x):
        if self.name == "linear_wave":
            return np.sin(x[..., 0]) * x[..., 1]
        q = 0.25 * np.sum(np.asarray(x) ** 2, axis=-1)
        return self._radial(q)[0]

    def grad(self, x):
        if self.name == "linear_wave":
            out = np.zeros(x.shape)
            out[..., 0] = np.cos(x[..., 0]) * x[..., 1]
            out[..., 1] = np.sin(x[..., 0])
            return out
        q = 0.25 * np.sum(np.asarray(x) ** 2, axis=-1)
        Fp = self._radial(q)[1]
        return 0.5 * Fp[..., None] * x if np.ndim(q) else 0.5 * Fp * x

    def hess(self, x):
        n = self.n
        if self.name == "linear_wave":
            out = np.zeros(x.shape + (n,))
            out[..., 0, 0] = -np.sin(x[..., 0]) * x[..., 1]
            out[..., 0, 1] = out[..., 1, 0] = np.cos(x[..., 0])
            return out
        q = 0.25 * np.sum(np.asarray(x) ** 2, axis=-1)
        _, Fp, Fpp, _, _ = self._radial(q)
        eye = np.eye(n)
        outer = x[..., :, None] * x[..., None, :]
        if np.ndim(q):
            return 0.5 * Fp[..., None, None] * eye + 0.25 * Fpp[..., None, None] * outer
        return 0.5 * Fp * eye + 0.25 * Fpp * outer

    def third(self, x):
        n = self.n
        if self.name == "linear_wave":
            out = np.zeros((n, n, n))
            out[0, 0, 0] = -np.cos(x[0]) * x[1]
            out[0, 0, 1] = out[0, 1, 0] = out[1, 0, 0] = -np.sin(x[0])
            return out
        _, _, Fpp, Fppp, _ = self._F(0.25 * float(x @ x))
        eye = np.eye(n)
        sym = (
            np.einsum("a,ij->aij", x, eye)
            + np.einsum("i,aj->aij", x, eye)
            + np.einsum("j,ai->aij", x, eye)
        )
        cube = np.einsum("a,i,j->aij", x, x, x)
        return 0.25 * Fpp * sym + 0.125 * Fppp * cube

    def fourth(self, x):
        n = self.n
        if self.name == "linear_wave":
            out = np.zeros((n, n, n, n))
            out[0, 0, 0, 0] = np.sin(x[0]) * x[1]
            for idx in ((0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 0)):
                out[idx] = -np.cos(x[0])
            return out
        _, _, Fpp, Fppp, Fpppp = self._F(0.25 * float(x @ x))
        eye = np.eye(n)
        dd = (
            np.einsum("ba,ij->baij", eye, eye)
            + np.einsum("bi,aj->baij", eye, eye)
            + np.einsum("bj,ai->baij", eye, eye)
        )
        dxx = (
            np.einsum("ba,i,j->baij", eye, x, x)
            + np.einsum("bi,a,j->baij", eye, x, x)
            + np.einsum("bj,a,i->baij", eye, x, x)
            + np.einsum("ai,b,j->baij", eye, x, x)
            + np.einsum("aj,b,i->baij", eye, x, x)
            + np.einsum("ij,b,a->baij", eye, x, x)
        )
        xxxx = np.einsum("b,a,i,j->baij", x, x, x, x)
        return 0.25 * Fpp * dd + 0.125 * Fppp * dxx + 0.0625 * Fpppp * xxxx


def _conformal_gamma_jets(H: float, x: np.ndarray):
    """(w, Gamma, dGamma, d2Gamma) of the conformal space-form chart at x."""
    n = x.size
    eye = np.eye(n)
    q = 0.25 * float(x @ x)
    w = 1.0 / (1.0 + H * q)
    L = -0.5 * H * w * x
    dL = -0.5 * H * w * eye + 0.25 * H * H * (w * w) * np.outer(x, x)
    s3 = (
        np.einsum("aj,b->baj", eye, x)
        + np.einsum("ab,j->baj", eye, x)
        + np.einsum("jb,a->baj", eye, x)
    )
    d2L = 0.25 * H * H * (w * w) * s3 - 0.25 * (H**3) * (w**3) * np.einsum(
        "b,a,j->baj", x, x, x
    )

    def assemble(Larr, pre):
        s = "ba"[2 - pre:]
        return (
            np.einsum(f"ik,{s}j->{s}kij", eye, Larr)
            + np.einsum(f"jk,{s}i->{s}kij", eye, Larr)
            - np.einsum(f"ij,{s}k->{s}kij", eye, Larr)
        )

    return w, assemble(L, 0), assemble(dL, 1), assemble(d2L, 2)


def _potential_rotation(M: ChartManifold, name: str):
    if name != "second_harmonic":
        raise ValueError(f"unknown potential {name!r} for rotation charts")

    # cos^2(theta): the height squared on the unit sphere profile
    def psi(x):
        return np.cos(x[..., 0]) ** 2

    def dpsi(x):
        out = np.zeros(x.shape)
        out[..., 0] = -np.sin(2.0 * x[..., 0])
        return out

    def d2psi(x):
        out = np.zeros(x.shape + (2,))
        out[..., 0, 0] = -2.0 * np.cos(2.0 * x[..., 0])
        return out

    def d3psi(x):
        out = np.zeros((2, 2, 2))
        out[0, 0, 0] = 4.0 * np.sin(2.0 * x[0])
        return out

    return psi, dpsi, d2psi, d3psi


def _space_form_hessian_field(M: ChartManifold, potential: str,
                              amp: float, base: float) -> SelfAdjointField:
    n, H = M.meta["n"], M.meta["H"]
    pot = _SpaceFormPotential(potential, n, H)
    eye = np.eye(n)

    def A(x):
        x = np.asarray(x, dtype=float)
        w, gamma, _, _ = _conformal_gamma_jets(H, x)
        hp = pot.hess(x) - np.einsum("kij,k->ij", gamma, pot.grad(x))
        return (amp / (w * w)) * hp + (base + H * amp * float(pot.value(x))) * eye

    def A_batch(X):
        X = np.asarray(X, dtype=float)
        G = M.christoffel_batch(X)
        hess = pot.hess(X) - np.einsum("bkij,bk->bij", G, pot.grad(X))
        ginv = np.linalg.inv(M.metric_many(X))
        scal = base + H * amp * pot.value(X)
        return amp * np.einsum("bik,bkj->bij", ginv, hess) + scal[:, None, None] * eye

    def dA(x):
        x = np.asarray(x, dtype=float)
        w, gamma, dgamma, _ = _conformal_gamma_jets(H, x)
        dp, d2p = pot.grad(x), pot.hess(x)
        hp = d2p - np.einsum("kij,k->ij", gamma, dp)
        dhp = (
            pot.third(x)
            - np.einsum("akij,k->aij", dgamma, dp)
            - np.einsum("kij,ak->aij", gamma, d2p)
        )
        # d(g^{-1}) = (H x_a / w) * Id since g^{-1} = w^{-2} * Id
        out = amp * (
            (H / w) * np.einsum("a,ij->aij", x, hp) + (1.0 / (w * w)) * dhp
        )
        out += (H * amp) * np.einsum("a,ij->aij", dp, eye)
        return out

    def d2A(x):
        x = np.asarray(x, dtype=float)
        w, gamma, dgamma, d2gamma = _conformal_gamma_jets(H, x)
        dp, d2p, d3p = pot.grad(x), pot.hess(x), pot.third(x)
        hp = d2p - np.einsum("kij,k->ij", gamma, dp)
        dhp = (
            d3p
            - np.einsum("akij,k->aij", dgamma, dp)
            - np.einsum("kij,ak->aij", gamma, d2p)
        )
        d2hp = (
            pot.fourth(x)
            - np.einsum("bakij,k->baij", d2gamma, dp)
            - np.einsum("akij,bk->baij", dgamma, d2p)
            - np.einsum("bkij,ak->baij", dgamma, d2p)
            - np.einsum("kij,bak->baij", gamma, d3p)
        )
        d2ginv = (H / w) * eye + 0.5 * H * H * np.outer(x, x)
        out = amp * (
            np.einsum("ba,ij->baij", d2ginv, hp)
            + (H / w) * np.einsum("a,bij->baij", x, dhp)
            + (H / w) * np.einsum("b,aij->baij", x, dhp)
            + (1.0 / (w * w)) * d2hp
        )
        out += (H * amp) * np.einsum("ba,ij->baij", d2p, eye)
        return out

    return SelfAdjointField(
        name=f"codazzi_hessian({potential},amp={amp:g},base={base:g})",
        A=A,
        dA=dA,
        d2A=d2A,
        A_batch=A_batch,
        meta={"kind": "codazzi_hessian", "potential": potential,
              "amp": amp, "base": base},
    )


def _rotation_hessian_field(M: ChartManifold, potential: str,
                            amp: float, base: float) -> SelfAdjointField:
    psi, dpsi, d2psi, d3psi = _potential_rotation(M, potential)
    c = 1.0
    eye = np.eye(M.dim)

    def A(x):
        G = M.christoffel_fn(x)
        hess = d2psi(x) - np.einsum("kij,k->ij", G, dpsi(x))
        ginv = np.linalg.inv(M.metric_at(x))
        return amp * ginv @ hess + (base + c * amp * float(psi(x))) * eye

    def A_batch(X):
        X = np.asarray(X, dtype=float)
        G = M.christoffel_batch(X)
        hess = d2psi(X) - np.einsum("bkij,bk->bij", G, dpsi(X))
        ginv = np.linalg.inv(M.metric_many(X))
        scal = base + c * amp * psi(X)
        return amp * np.einsum("bik,bkj->bij", ginv, hess) + scal[:, None, None] * eye

    def dA(x):
        # Christoffel derivative from the chart's metric jets; the rotation
        # profiles are trig so one difference level on dA stays quiet
        from .chart import GeometryJet

        x = np.asarray(x, dtype=float)
        geo = GeometryJet(M, x)
        G, dG, ginv, dg = geo.gamma, geo.dgamma, geo.ginv, geo.dg
        dginv = -np.einsum("im,amn,nj->aij", ginv, dg, ginv)
        dp, d2p, d3p = dpsi(x), d2psi(x), d3psi(x)
        hess = d2p - np.einsum("kij,k->ij", G, dp)
        dhess = (
            d3p
            - np.einsum("akij,k->aij", dG, dp)
            - np.einsum("kij,ak->aij", G, d2p)
        )
        out = amp * (
            np.einsum("aik,kj->aij", dginv, hess)
            + np.einsum("ik,akj->aij", ginv, dhess)
        )
        out += (c * amp) * np.einsum("a,ij->aij", dp, eye)
        return out

    return SelfAdjointField(
        name=f"codazzi_hessian({potential},amp={amp:g},base={base:g})",
        A=A,
        dA=dA,
        A_batch=A_batch,
        meta={"kind": "codazzi_hessian", "potential": potential,
              "amp": amp, "base": base},
    )


def codazzi_hessian_field(M: ChartManifold, potential: str,
                          amp: float, base: float = 1.0) -> SelfAdjointField:
    """A = amp * g^{-1} Hess(psi) + (base + c * amp * psi) * Id on a chart
    of constant curvature c.  Reduces to base * Id at amp = 0."""
    kind = M.meta.get("kind")
    if kind == "space_form":
        return _space_form_hessian_field(M, potential, amp, base)
    if kind == "rotation_surface" and M.meta.get("profile") == "sphere":
        return _rotation_hessian_field(M, potential, amp, base)
    raise ValueError(f"no potential catalog for chart kind {kind!r}")
