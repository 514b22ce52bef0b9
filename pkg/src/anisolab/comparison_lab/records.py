"""Result plumbing shared by every verifier in the laboratory.

A verification record captures one instance of one comparison statement:
the measured left hand side, the reference right hand side, and the margin
rhs - lhs.  The sign convention makes ``margin >= -tol`` the pass test for
every inequality of the form lhs <= rhs, so a failing record always means
the measured quantity exceeded its bound by more than the tolerance.

Records whose hypotheses could not be established are excluded, never
failed.  Exclusion carries a reason string and keeps the bookkeeping
honest: excluded + passed + failed = total, always.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..geometry_core import (
    ChartManifold,
    DriftData,
    ScalarField,
    SelfAdjointField,
    build_f_A,
    codazzi_residual,
    spectral_bounds,
)
from ..errors import ConfigError, LabError
from ..model_space import ComparisonConstants

# Comparison tolerance: one-sided slack on the favorable side of each
# inequality.  Identity-style residuals keep the tighter tol below.
TOL_THM = 1e-4
TOL_ID = 1e-5
TOL_CODAZZI = 1e-5


@dataclass
class VerificationRecord:
    theorem_id: str
    site: object
    lhs: float
    rhs: float
    margin: float
    passed: bool
    tol: float
    excluded: bool = False
    reason: str = ""

    def as_row(self) -> dict:
        """Flat dict for reports; the site is rendered as text."""
        return {
            "theorem_id": self.theorem_id,
            "site": _site_text(self.site),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "pass": bool(self.passed),
            "tol": self.tol,
            "excluded": bool(self.excluded),
            "reason": self.reason,
        }


def _site_text(site) -> str:
    if isinstance(site, str):
        return site
    if isinstance(site, (int, np.integer)):
        return str(int(site))
    if isinstance(site, (float, np.floating)):
        return f"{float(site):.6g}"
    try:
        arr = np.asarray(site, dtype=float).ravel()
        return "(" + ", ".join(f"{v:.6g}" for v in arr) + ")"
    except (TypeError, ValueError):
        return "(" + ", ".join(_site_text(v) for v in site) + ")"


def make_record(theorem_id: str, site, lhs, rhs, tol: float = TOL_THM,
                reason: str = "") -> VerificationRecord:
    lhs = float(lhs)
    rhs = float(rhs)
    margin = rhs - lhs
    return VerificationRecord(
        theorem_id=theorem_id,
        site=site,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        passed=bool(margin >= -tol),
        tol=float(tol),
    )


def exclude_record(theorem_id: str, site, reason: str,
                   lhs: float = math.nan, rhs: float = math.nan,
                   tol: float = TOL_THM) -> VerificationRecord:
    """A record whose hypothesis failed: carries the reason, counts in
    neither the passed nor the failed column."""
    return VerificationRecord(
        theorem_id=theorem_id,
        site=site,
        lhs=float(lhs),
        rhs=float(rhs),
        margin=math.nan,
        passed=False,
        tol=float(tol),
        excluded=True,
        reason=reason,
    )


@dataclass
class RecordSummary:
    total: int
    passed: int
    failed: int
    excluded: int
    worst_margin: float

    @property
    def all_passed(self) -> bool:
        return self.failed == 0


def summarize(records: Sequence[VerificationRecord]) -> RecordSummary:
    passed = sum(1 for r in records if not r.excluded and r.passed)
    failed = sum(1 for r in records if not r.excluded and not r.passed)
    excluded = sum(1 for r in records if r.excluded)
    margins = [r.margin for r in records if not r.excluded]
    worst = float(min(margins)) if margins else math.inf
    out = RecordSummary(len(records), passed, failed, excluded, worst)
    assert out.passed + out.failed + out.excluded == out.total
    return out


def failed_records(records: Sequence[VerificationRecord]) -> List[VerificationRecord]:
    return [r for r in records if not r.excluded and not r.passed]


@dataclass
class VolumeEstimate:
    """One volume integral with its uncertainty.

    stderr is the Monte-Carlo standard error (spread over independent
    directions) or the quadrature error estimate, depending on method.
    """

    value: float
    stderr: float
    n_samples: int
    weighted: bool
    method: str = "mc"
    exclusion_fraction: float = 0.0
    unreliable: bool = False
    plain_value: float = math.nan
    plain_stderr: float = math.nan

    def __post_init__(self):
        if self.value < 0.0:
            raise LabError(f"volume estimate came out negative: {self.value!r}")
        if self.exclusion_fraction > 0.05:
            self.unreliable = True


# ---------------------------------------------------------------------------
# Scenario container


@dataclass
class LabScenario:
    """A configured geometry: chart, tensor field, base point, constants.

    The verifiers consume scenarios rather than raw charts so that the
    spectral constants, the drift potential and the Codazzi residual are
    sampled once, on a shared site set, and every downstream bound uses
    the same numbers.
    """

    name: str
    M: ChartManifold
    field: SelfAdjointField
    x0: np.ndarray
    R: float
    constants: ComparisonConstants
    drift: Optional[DriftData] = None
    H: Optional[float] = None
    seed: int = 0
    codazzi: float = 0.0
    line_point: Optional[np.ndarray] = None
    line_direction: Optional[np.ndarray] = None
    declared_ends: Optional[int] = None
    dist_kwargs: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.M.dim

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    # -- drift access; a missing drift behaves as f = 0 --------------------

    def f_of_r(self, r):
        return self.drift.fA.f(r) if self.drift is not None else np.zeros_like(np.asarray(r, dtype=float))

    def fprime(self, r):
        return self.drift.fA.fprime(r) if self.drift is not None else np.zeros_like(np.asarray(r, dtype=float))

    def fsecond(self, r):
        return self.drift.fA.fsecond(r) if self.drift is not None else np.zeros_like(np.asarray(r, dtype=float))

    def f_scalar(self) -> Optional[ScalarField]:
        """The drift as a chart scalar, for operators that want jets.

        Needs the chart's exact distance jets and a base point at the
        chart center, which is how every drift-carrying scenario is built.
        """
        if self.drift is None or self.drift.fA.kind == "zero":
            return None
        if "_f_scalar" in self.meta:
            return self.meta["_f_scalar"]
        M, fA = self.M, self.drift.fA
        if M.exact_r is None or float(np.linalg.norm(self.x0)) > 1e-12:
            raise ConfigError(
                f"scenario {self.name!r} carries a radial drift but the chart "
                "has no exact distance jets at the base point"
            )

        def fn(y):
            return float(fA.f(float(M.exact_r(y))))

        def dfn(y):
            r = float(M.exact_r(y))
            return float(fA.fprime(r)) * np.asarray(M.exact_dr(y), dtype=float)

        def d2fn(y):
            r = float(M.exact_r(y))
            dr = np.asarray(M.exact_dr(y), dtype=float)
            d2r = np.asarray(M.exact_d2r(y), dtype=float)
            return float(fA.fsecond(r)) * np.outer(dr, dr) + float(fA.fprime(r)) * d2r

        sf = ScalarField(fn, dfn, d2fn, name="drift")
        self.meta["_f_scalar"] = sf
        return sf

    def unit_directions(self, k: int, salt: int = 1) -> np.ndarray:
        """k g-unit tangent vectors at the base point, reproducible."""
        from ..geometry_core import GeometryJet

        g = GeometryJet(self.M, self.x0).g
        rng = self.rng(salt)
        V = rng.normal(size=(k, self.n))
        norms = np.sqrt(np.einsum("bi,ij,bj->b", V, g, V))
        return V / norms[:, None]


def make_scenario(
    name: str,
    M: ChartManifold,
    field: SelfAdjointField,
    x0=None,
    R: float = 1.0,
    H: Optional[float] = None,
    sec_lower: Optional[float] = None,
    strategy: str = "certified",
    n_sites: int = 64,
    seed: int = 0,
    **extra,
) -> LabScenario:
    """Sample the field over B(x0, R) and freeze the scenario constants.

    The drift potential, the spectral bounds and the Codazzi residual all
    come from the same site sample, so K, K' and (delta1, deltan) are
    consistent with each other by construction.

    sec_lower is the warp constant G of the drift construction, valid
    when the radial sectional curvatures satisfy sec_rad <= -G.  When the
    chart declares a constant curvature it is wired through automatically;
    other charts must pass their own value if the field needs a drift.
    """
    x0 = np.zeros(M.dim) if x0 is None else np.asarray(x0, dtype=float)
    M.require_interior(x0)
    if sec_lower is None:
        sec_lower = -M.sectional_constant if M.sectional_constant is not None else 0.0
    rng = np.random.default_rng([seed, 777])
    drift = build_f_A(M, field, x0, R, sec_lower=sec_lower,
                      strategy=strategy, rng=rng, n_sites=n_sites)
    bounds = spectral_bounds(M, field, drift.sites)
    bounds.require_elliptic()
    resid = codazzi_residual(M, field, drift.sites)
    constants = ComparisonConstants(
        n=M.dim,
        delta1=bounds.delta1,
        deltan=bounds.deltan,
        K=drift.K,
        Kprime=drift.Kprime,
    )
    field_names = {f.name for f in dataclasses.fields(LabScenario)}
    meta = dict(extra.pop("meta", {}))
    for key in list(extra):
        if key not in field_names:
            meta[key] = extra.pop(key)
    return LabScenario(
        name=name,
        M=M,
        field=field,
        x0=x0,
        R=float(R),
        constants=constants,
        drift=drift,
        H=H,
        seed=seed,
        codazzi=float(resid),
        meta=meta,
        **extra,
    )
