"""Report documents and deterministic serialization.

Every float is rendered as %.12e, keys are emitted in sorted order, and
nothing time- or host-dependent enters the document, so identical runs
produce byte-identical output.  Non-finite values are spelled out:
NaN becomes "excluded" (it only arises in excluded records), infinities
become "inf"/"-inf".
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Sequence

import numpy as np

from ..errors import ConfigError
from ..comparison_lab import VerificationRecord, VolumeEstimate
from .config import ScenarioConfig, serialize_scenario

CSV_COLUMNS = ("theorem_id", "site", "lhs", "rhs", "margin", "pass", "excluded")


@dataclass
class CheckReport:
    check_id: str
    params: Dict
    total: int
    passed: int
    failed: int
    excluded: int
    min_margin: float
    records: List[VerificationRecord]
    info: Dict


@dataclass
class ReportDocument:
    """Self-contained run result: echoes the config it came from."""

    config_text: str
    config_sha256: str
    package: str
    version: str
    seed: int
    constants: Dict[str, float]
    checks: List[CheckReport]
    volume_estimates: List[Dict] = dc_field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.failed == 0 for c in self.checks)

    @property
    def exclusion_fraction(self) -> float:
        total = sum(c.total for c in self.checks)
        if total == 0:
            return 0.0
        return sum(c.excluded for c in self.checks) / total


def build_report(cfg: ScenarioConfig, bundle: Dict, version: str) -> ReportDocument:
    """Assemble the document from a runner bundle (see run_config)."""
    text = serialize_scenario(cfg)
    checks: List[CheckReport] = []
    volumes: List[Dict] = []
    for cid, params, recs, info in bundle["results"]:
        n_pass = sum(1 for r in recs if r.passed and not r.excluded)
        n_excl = sum(1 for r in recs if r.excluded)
        n_fail = len(recs) - n_pass - n_excl
        margins = [r.margin for r in recs
                   if not r.excluded and math.isfinite(r.margin)]
        checks.append(CheckReport(
            check_id=cid,
            params=dict(params),
            total=len(recs),
            passed=n_pass,
            failed=n_fail,
            excluded=n_excl,
            min_margin=min(margins) if margins else math.inf,
            records=list(recs),
            info=dict(info),
        ))
        vols = info.get("volumes")
        if isinstance(vols, dict):
            for r, est in sorted(vols.items()):
                if isinstance(est, VolumeEstimate):
                    volumes.append({
                        "check": cid, "radius": float(r),
                        "value": est.value, "stderr": est.stderr,
                        "weighted": bool(est.weighted),
                        "n_samples": est.n_samples,
                    })
    return ReportDocument(
        config_text=text,
        config_sha256=hashlib.sha256(text.encode()).hexdigest(),
        package="anisolab",
        version=version,
        seed=cfg.seed,
        constants=dict(bundle["constants"]),
        checks=checks,
        volume_estimates=volumes,
    )


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return "excluded"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.12e" % v


def _clean(obj):
    """Deterministic JSON-safe view: floats to fixed strings, arrays to
    lists, unknown objects to their dataclass dicts or reprs."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return obj
    if obj is None:
        return None
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, VolumeEstimate):
        return {
            "value": _fmt_float(obj.value),
            "stderr": _fmt_float(obj.stderr),
            "n_samples": int(obj.n_samples),
            "weighted": bool(obj.weighted),
            "unreliable": bool(obj.unreliable),
        }
    return repr(obj)


def _doc_dict(report: ReportDocument) -> Dict:
    return {
        "config": {
            "sha256": report.config_sha256,
            "text": report.config_text,
        },
        "environment": {
            "package": report.package,
            "version": report.version,
            "seed": report.seed,
        },
        "constants": _clean(report.constants),
        "checks": [
            {
                "check": c.check_id,
                "params": _clean(c.params),
                "summary": {
                    "total": c.total,
                    "passed": c.passed,
                    "failed": c.failed,
                    "excluded": c.excluded,
                    "min_margin": _fmt_float(c.min_margin),
                },
                "records": [_clean(r.as_row()) for r in c.records],
                "info": _clean(c.info),
            }
            for c in report.checks
        ],
        "volume_estimates": _clean(report.volume_estimates),
    }


def _emit_json(report: ReportDocument) -> bytes:
    doc = _doc_dict(report)
    return (json.dumps(doc, sort_keys=True, indent=1,
                       separators=(",", ": ")) + "\n").encode("utf-8")


def _csv_rows(records: Sequence[VerificationRecord]):
    for r in records:
        row = r.as_row()
        yield [
            row["theorem_id"],
            row["site"],
            _fmt_float(row["lhs"]),
            _fmt_float(row["rhs"]),
            _fmt_float(row["margin"]),
            "true" if row["pass"] else "false",
            "true" if row["excluded"] else "false",
        ]


def check_table_csv(check: CheckReport) -> bytes:
    """One check's record table with the fixed column schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in _csv_rows(check.records):
        w.writerow(row)
    return buf.getvalue().encode("utf-8")


def profile_csv(check: CheckReport) -> bytes:
    """Plot-ready (r, lhs, rhs) rows: records whose site carries a radius."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("r", "theorem_id", "lhs", "rhs"))
    for r in check.records:
        if r.excluded:
            continue
        rv = _site_radius(r.site)
        if rv is None:
            continue
        w.writerow((_fmt_float(rv), r.theorem_id,
                    _fmt_float(r.lhs), _fmt_float(r.rhs)))
    return buf.getvalue().encode("utf-8")


def _site_radius(site):
    if isinstance(site, (int, float, np.integer, np.floating)):
        return float(site)
    if isinstance(site, (tuple, list)):
        for i, v in enumerate(site):
            if isinstance(v, str) and v in ("r", "R") and i + 1 < len(site):
                nxt = site[i + 1]
                if isinstance(nxt, (int, float, np.integer, np.floating)):
                    return float(nxt)
        for v in site:
            if isinstance(v, (float, np.floating)):
                return float(v)
    return None


def _emit_csv(report: ReportDocument) -> bytes:
    parts = []
    for c in report.checks:
        parts.append(f"# check: {c.check_id}\n".encode("utf-8"))
        parts.append(check_table_csv(c))
        parts.append(b"\n")
    return b"".join(parts)


def _emit_text(report: ReportDocument) -> bytes:
    lines = [
        f"scenario sha256 {report.config_sha256[:16]}  seed {report.seed}",
    ]
    if report.constants:
        cst = "  ".join(f"{k}={_fmt_float(float(v)) if isinstance(v, float) else v}"
                        for k, v in sorted(report.constants.items()))
        lines.append("constants: " + cst)
    for c in report.checks:
        status = "ok" if c.failed == 0 else "FAIL"
        lines.append(
            f"[{status}] {c.check_id}: {c.passed}/{c.total} passed, "
            f"{c.failed} failed, {c.excluded} excluded, "
            f"min margin {_fmt_float(c.min_margin)}")
        for r in c.records:
            if not r.passed and not r.excluded:
                row = r.as_row()
                lines.append(
                    f"    FAIL {row['theorem_id']} @ {row['site']}: "
                    f"lhs {_fmt_float(row['lhs'])} rhs {_fmt_float(row['rhs'])}")
        for r in c.records:
            if r.excluded:
                lines.append(
                    f"    excluded {r.theorem_id}: {r.reason}")
    lines.append("result: " + ("PASS" if report.all_passed else "FAIL"))
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_report(report: ReportDocument, format: str = "json") -> bytes:
    """Deterministic bytes for one document in the named format."""
    if format == "json":
        return _emit_json(report)
    if format in ("csv", "csv-tables"):
        return _emit_csv(report)
    if format in ("text", "human-text"):
        return _emit_text(report)
    raise ConfigError(f"unknown report format {format!r}")
