"""Closed-form quantities of the constant-curvature comparison spaces.

Everything in this module is a function of scalars only: no charts, no
tensors.  The comparison verifiers treat these values as the trusted side
of every inequality, so the implementations stay deliberately close to
the defining formulas and integrals.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import HypothesisWindowError, ODEBlowupError

QUAD_ABS_TOL = 1e-10


def sn(H: float, r):
    """Generalized sine: solution of y'' + H y = 0 with y(0)=0, y'(0)=1."""
    r = np.asarray(r, dtype=float)
    if H > 0.0:
        s = math.sqrt(H)
        out = np.sin(s * r) / s
    elif H < 0.0:
        s = math.sqrt(-H)
        out = np.sinh(s * r) / s
    else:
        out = r.copy()
    return float(out) if out.ndim == 0 else out


def sn_prime(H: float, r):
    r = np.asarray(r, dtype=float)
    if H > 0.0:
        out = np.cos(math.sqrt(H) * r)
    elif H < 0.0:
        out = np.cosh(math.sqrt(-H) * r)
    else:
        out = np.ones_like(r)
    return float(out) if out.ndim == 0 else out


def mean_curvature_model(H: float, n: int, r):
    """Mean curvature of the distance sphere of radius r in the
    n-dimensional model of curvature H: (n - 1) sn'/sn."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= 0.0):
        raise HypothesisWindowError("model mean curvature requires r > 0")
    if H > 0.0 and np.any(rr >= math.pi / math.sqrt(H)):
        raise HypothesisWindowError(
            "model mean curvature undefined at or beyond the first conjugate "
            f"radius pi/sqrt(H) = {math.pi / math.sqrt(H):.6f}"
        )
    out = (n - 1) * sn_prime(H, rr) / sn(H, rr)
    return float(out) if np.ndim(r) == 0 else out


def sphere_area_constant(m: int) -> float:
    """Total measure of the unit (m-1)-sphere: 2 pi^(m/2) / Gamma(m/2)."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def model_ball_volume(m: int, H: float, R: float) -> float:
    """Volume of the radius-R ball in the m-dimensional model of
    curvature H."""
    if R < 0.0:
        raise HypothesisWindowError("ball volume requires R >= 0")
    if R == 0.0:
        return 0.0
    if H > 0.0 and R > math.pi / math.sqrt(H) + 1e-15:
        raise HypothesisWindowError("ball radius exceeds the model diameter")
    val, _ = integrate.quad(lambda t: sn(H, t) ** (m - 1), 0.0, R,
                            epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return sphere_area_constant(m) * val


def model_annulus_volume(m: int, H: float, r: float, R: float) -> float:
    if not 0.0 <= r <= R:
        raise HypothesisWindowError("annulus requires 0 <= r <= R")
    val, _ = integrate.quad(lambda t: sn(H, t) ** (m - 1), r, R,
                            epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return sphere_area_constant(m) * val


@dataclass(frozen=True)
class ComparisonConstants:
    """Measured inputs of every comparison bound: the ellipticity window
    [delta1, deltan] of the tensor field, the sup of the drift potential
    K, and the sup of the trace K'."""

    n: int
    delta1: float
    deltan: float
    K: float
    Kprime: float = 0.0

    def __post_init__(self):
        if self.delta1 <= 0.0 or self.deltan < self.delta1:
            raise HypothesisWindowError(
                "ellipticity requires 0 < delta1 <= deltan "
                f"(got [{self.delta1}, {self.deltan}])"
            )

    @property
    def factor_a(self) -> float:
        """delta_n (1 + 4K / (delta_n (n-1))): mean-curvature comparison factor."""
        return self.deltan * (1.0 + 4.0 * self.K / (self.deltan * (self.n - 1)))

    @property
    def factor_b(self) -> float:
        """Same shape with K + K': divergence-form comparison factor."""
        return self.deltan * (
            1.0 + 4.0 * (self.K + self.Kprime) / (self.deltan * (self.n - 1))
        )

    @property
    def beta(self) -> float:
        """(n-1) deltan + 4K: the weight the comparison ODE carries."""
        return (self.n - 1) * self.deltan + 4.0 * self.K


def effective_dimension(delta1: float, deltan: float, n: int,
                        K: float, Kprime: float) -> int:
    """Smallest integer model dimension m with 1/(C (m-1)) <= delta1,
    where 1/C = deltan (n-1) + 4 (K + K'): floor(1/(C delta1)) + 2."""
    if delta1 <= 0.0:
        raise HypothesisWindowError("effective dimension requires delta1 > 0")
    inv_C = deltan * (n - 1) + 4.0 * (K + Kprime)
    m = int(math.floor(inv_C / delta1)) + 2
    # the defining inequality holds by construction; keep the guard hot
    assert inv_C / (m - 1) <= delta1 * (1.0 + 1e-12)
    return m


def meyer_diameter_bound(H: float, n: int, deltan: float, K: float) -> float:
    """Diameter bound pi/sqrt(H) + 4K/(deltan (n-1) sqrt(H)) under a
    positive comparison curvature H."""
    if H <= 0.0:
        raise HypothesisWindowError("diameter bound requires H > 0")
    s = math.sqrt(H)
    return math.pi / s + 4.0 * K / (deltan * (n - 1) * s)


def remark_quarter_factor(H: float, n: int, deltan: float, K: float, r: float) -> float:
    """Comparison factor valid on the outer window
    [pi/(4 sqrt(H)), pi/(2 sqrt(H))):
    deltan (1 + (1/deltan) 4K / ((n-1) sin(2 sqrt(H) r)))."""
    if H <= 0.0:
        raise HypothesisWindowError("outer-window factor requires H > 0")
    s = math.sqrt(H)
    if not (math.pi / (4.0 * s) <= r < math.pi / (2.0 * s)):
        raise HypothesisWindowError(
            "radius outside the outer comparison window "
            f"[pi/(4 sqrt(H)), pi/(2 sqrt(H))) = [{math.pi/(4*s):.6f}, {math.pi/(2*s):.6f})"
        )
    return deltan * (1.0 + 4.0 * K / (deltan * (n - 1) * math.sin(2.0 * s * r)))


class AgGSolution:
    """Solution G of the comparison ODE

        delta1 G'' + deltan (1 + 4K/(deltan (n-1))) m_H(r) G' = b,
        G(R) = 0,  G' < 0 on (0, R),

    where m_H is the model mean curvature at dimension n.  For H = 0 the
    solution is closed-form; for H < 0 it is a double integral of a ratio
    of generalized sines.  Positive H is outside the admissible window.
    """

    def __init__(self, H: float, n: int, delta1: float, deltan: float,
                 K: float, b: float, R: float):
        if H > 0.0:
            raise HypothesisWindowError("comparison ODE requires H <= 0")
        if R <= 0.0:
            raise HypothesisWindowError("comparison ODE requires R > 0")
        if delta1 <= 0.0 or deltan < delta1:
            raise HypothesisWindowError("comparison ODE requires 0 < delta1 <= deltan")
        if b < 0.0:
            raise HypothesisWindowError("comparison ODE requires b >= 0")
        self.H, self.n = float(H), int(n)
        self.delta1, self.deltan = float(delta1), float(deltan)
        self.K, self.b, self.R = float(K), float(b), float(R)
        self.beta = (n - 1) * deltan + 4.0 * K
        self.C = delta1 + self.beta
        self.D = 1.0 - self.beta / delta1
        self.pow = self.beta / delta1

    # -- H = 0 closed form ------------------------------------------------

    def _flat_value(self, r):
        b, C, D, R = self.b, self.C, self.D, self.R
        if abs(D) < 1e-4:
            # series in D around the logarithmic solution
            L = np.log(r / R)
            poly = -2.0 * R**2 * (L + D * L**2 / 2.0 + D**2 * L**3 / 6.0
                                  + D**3 * L**4 / 24.0)
            return b / (2.0 * C) * (r**2 - R**2 + poly)
        return b / (2.0 * C) * (
            r**2 + (-1.0 + 2.0 / D) * R**2 - (2.0 / D) * R ** (2.0 - D) * r**D
        )

    def _flat_derivative(self, r):
        b, C, D, R = self.b, self.C, self.D, self.R
        return b / (2.0 * C) * (2.0 * r - 2.0 * R ** (2.0 - D) * r ** (D - 1.0))

    def _flat_second(self, r):
        b, C, D, R = self.b, self.C, self.D, self.R
        return b / (2.0 * C) * (2.0 - 2.0 * (D - 1.0) * R ** (2.0 - D) * r ** (D - 2.0))

    # -- H < 0 double integral --------------------------------------------

    def _sinh_pow_integral(self, lo, hi):
        s = math.sqrt(-self.H)
        val, _ = integrate.quad(lambda t: math.sinh(s * t) ** self.pow, lo, hi,
                                epsabs=QUAD_ABS_TOL, epsrel=1e-11, limit=200)
        return val

    def _hyp_value(self, r):
        s = math.sqrt(-self.H)

        def outer(t):
            inner, _ = integrate.quad(
                lambda sg: (math.sinh(s * t) / math.sinh(s * sg)) ** self.pow,
                r, t, epsabs=QUAD_ABS_TOL, epsrel=1e-11, limit=200)
            return inner

        val, _ = integrate.quad(outer, r, self.R,
                                epsabs=QUAD_ABS_TOL, epsrel=1e-10, limit=200)
        return self.b / self.delta1 * val

    def _hyp_derivative(self, r):
        s = math.sqrt(-self.H)
        denom = math.sinh(s * r) ** self.pow
        return -self.b / self.delta1 * self._sinh_pow_integral(r, self.R) / denom

    # -- public interface ---------------------------------------------------

    def _check_r(self, r):
        rr = np.asarray(r, dtype=float)
        if np.any(rr <= 0.0) or np.any(rr > self.R + 1e-12):
            raise HypothesisWindowError("G is defined on (0, R]")

    def value(self, r):
        self._check_r(r)
        if self.H == 0.0:
            out = self._flat_value(np.asarray(r, dtype=float))
            return float(out) if np.ndim(r) == 0 else out
        if np.ndim(r) == 0:
            return self._hyp_value(float(r))
        return np.array([self._hyp_value(float(t)) for t in np.asarray(r)])

    __call__ = value

    def derivative(self, r):
        self._check_r(r)
        if self.H == 0.0:
            out = self._flat_derivative(np.asarray(r, dtype=float))
            return float(out) if np.ndim(r) == 0 else out
        if np.ndim(r) == 0:
            return self._hyp_derivative(float(r))
        return np.array([self._hyp_derivative(float(t)) for t in np.asarray(r)])

    def ode_residual(self, r) -> float:
        """Residual of the defining ODE at r.  The flat branch uses the
        analytic second derivative; the curved branch differentiates the
        quadrature-based G' numerically, so its floor is the step error."""
        self._check_r(r)
        r = float(r)
        mH = mean_curvature_model(self.H, self.n, r) if self.H < 0.0 else (self.n - 1) / r
        fac = self.deltan * (1.0 + 4.0 * self.K / (self.deltan * (self.n - 1)))
        if self.H == 0.0:
            G2 = self._flat_second(r)
            G1 = self._flat_derivative(r)
        else:
            h = max(min(1e-5 * r, (self.R - r) / 3.0, 1e-5), 1e-9)
            if h <= 1e-9:
                raise HypothesisWindowError("residual sample too close to R")
            G1 = self._hyp_derivative(r)
            G2 = (self._hyp_derivative(r + h) - self._hyp_derivative(r - h)) / (2.0 * h)
        return self.delta1 * G2 + fac * mH * G1 - self.b

    def min_linear_combo(self, a: float):
        """min over c in (0, R] of a c + G(c), with the minimizing c."""
        obj = lambda c: a * c + self.value(c)
        res = optimize.minimize_scalar(obj, bounds=(1e-9 * self.R, self.R),
                                       method="bounded",
                                       options={"xatol": 1e-10 * self.R})
        c_star = float(res.x)
        return float(obj(c_star)), c_star


def ag_G(H: float, n: int, delta1: float, deltan: float, K: float,
         b: float, R: float) -> AgGSolution:
    """Build the comparison ODE solution used by the quantitative maximum
    principle and the excess bound."""
    return AgGSolution(H, n, delta1, deltan, K, b, R)


def excess_bound(delta1: float, deltan: float, n: int, K: float,
                 h: float, dp: float, dq: float) -> float:
    """Closed-form excess bound at height h between points at distances
    dp, dq.  Decreases to 0 with h."""
    if h <= 0.0:
        raise HypothesisWindowError("excess bound requires h > 0")
    if h >= dp or h >= dq:
        raise HypothesisWindowError("height exceeds distance: need h < dp and h < dq")
    beta = deltan * (n - 1) + 4.0 * K
    if beta <= delta1:
        raise ODEBlowupError(
            "excess bound needs deltan (n-1) + 4K > delta1 for a finite exponent"
        )
    C = beta / (2.0 * (n - 1) * (delta1 + beta)) * (1.0 / (dp - h) + 1.0 / (dq - h))
    pref = 2.0 * (beta + delta1) / (beta - delta1)
    expo_inner = (delta1 + beta) / delta1
    expo_outer = delta1 / beta
    return pref * (0.5 * C * h**expo_inner) ** expo_outer


def end_count_bound(m: int, H: float, R: float, eps: float,
                    C_bar: float, p: float) -> float:
    """Upper bound for the number of ends under a negative comparison
    curvature -H inside the core ball: a weighted-ratio prefactor times
    (2m/(m-1)) (sqrt(H) R)^(-m) exp(17 (m-1) sqrt(H) R / 2)."""
    if H <= 0.0:
        raise HypothesisWindowError("end count bound requires H > 0")
    if m < 2:
        raise HypothesisWindowError("end count bound requires m >= 2")
    if eps < 0.0:
        raise HypothesisWindowError("end count bound requires eps >= 0")
    if eps > 0.0 and 2.0 * C_bar * eps >= 1.0:
        raise HypothesisWindowError(
            "weighted-ratio smallness violated: need eps < 1/(2 C_bar)"
        )
    s = math.sqrt(H)
    pref = ((1.0 - C_bar * eps) / (1.0 - 2.0 * C_bar * eps)) ** p if eps > 0.0 else 1.0
    return pref * (2.0 * m / (m - 1.0)) * (s * R) ** (-m) * math.exp(
        17.0 * (m - 1.0) * s * R / 2.0
    )


def _sinh_power_antiderivative(k: int, beta: float, X: float) -> float:
    """Exact integral of sinh(beta t)^k over [0, X] via the binomial
    expansion into exponentials.  Stable for the large arguments the end
    counting estimate needs."""
    total = 0.0
    for j in range(k + 1):
        coef = math.comb(k, j) * (-1.0) ** j / 2.0**k
        a = beta * (k - 2 * j)
        if a == 0.0:
            total += coef * X
        else:
            total += coef * math.expm1(a * X) / a
    return total


def sinh_ratio_check(m: int, beta: float, r: float, alpha: float):
    """Ratio of sinh-power ball integrands at radii alpha r and r against
    the closed bound (2m/(m-1)) (beta r)^(-m) exp(alpha (m-1) beta r).

    Returns (ratio, bound, ok)."""
    if m < 2 or beta <= 0.0 or r <= 0.0 or alpha < 1.0:
        raise HypothesisWindowError("sinh ratio check requires m >= 2, beta > 0, r > 0, alpha >= 1")
    k = m - 1
    num = _sinh_power_antiderivative(k, beta, alpha * r)
    den = _sinh_power_antiderivative(k, beta, r)
    ratio = num / den
    bound = (2.0 * m / (m - 1.0)) * (beta * r) ** (-m) * math.exp(alpha * k * beta * r)
    return ratio, bound, bool(ratio <= bound * (1.0 + 1e-12))
