"""
Verification report models and their JSON/text rendering.
"""

import json
import logging
from typing import Dict, List, Literal, Optional

import jsonschema
from pydantic import BaseModel, ConfigDict, Field

from rnweights import __version__
from rnweights.config import get_config

logger = logging.getLogger(__name__)

EVIDENCE_DISCLAIMER = ("A pass is numerical evidence on the declared grids and tolerances, "
                       "not a proof of the identity.")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid')


class Counterexample(StrictModel):
    condition: str
    point: Dict[str, float] = Field(default_factory=dict)
    residual: Optional[float] = None


class IdentityRecord(StrictModel):
    identity: str
    anchor: str
    grid: Dict[str, List[float]] = Field(default_factory=dict)
    max_residual: Optional[float] = None
    tolerance: float
    passed: bool
    expected: Literal['pass', 'fail'] = 'pass'
    pattern: Optional[Literal['all-pass', 'all-fail', 'mixed']] = None
    counterexample: Optional[Counterexample] = None
    details: Dict[str, Optional[float]] = Field(default_factory=dict)
    note: Optional[str] = None

    @property
    def ok(self) -> bool:
        """True when the observed outcome is the expected one"""
        return self.passed == (self.expected == 'pass')


class EnvironmentBlock(StrictModel):
    version: str = __version__
    schema_version: str = Field(default_factory=lambda: get_config().REPORT_SCHEMA_VERSION)
    seed: int = 0


class VerificationReport(StrictModel):
    scenario: str
    records: List[IdentityRecord] = Field(default_factory=list)
    environment: EnvironmentBlock = Field(default_factory=EnvironmentBlock)
    disclaimer: str = EVIDENCE_DISCLAIMER
    verdict: Literal['pass', 'fail'] = 'pass'
    numerical_failure: bool = False

    def add(self, record: IdentityRecord) -> IdentityRecord:
        self.records.append(record)
        return record

    def extend(self, other: 'VerificationReport') -> None:
        self.records.extend(other.records)
        self.numerical_failure = self.numerical_failure or other.numerical_failure

    def finalize(self) -> 'VerificationReport':
        self.verdict = 'pass' if all(r.ok for r in self.records) else 'fail'
        return self


def report_schema() -> dict:
    return VerificationReport.model_json_schema()


def report_to_json(report: VerificationReport) -> str:
    """Serialize with sorted keys and validate against the model's JSON Schema"""
    payload = report.model_dump(mode='json')
    jsonschema.validate(payload, report_schema())
    return json.dumps(payload, indent=2, sort_keys=True)


def report_from_json(text: str) -> VerificationReport:
    payload = json.loads(text)
    jsonschema.validate(payload, report_schema())
    return VerificationReport.model_validate(payload)


def _fmt(value: Optional[float]) -> str:
    return '-' if value is None else f"{value:.3e}"


def report_to_text(report: VerificationReport) -> str:
    """Aligned human-readable table"""
    header = ('', 'identity', 'max residual', 'tolerance', 'expected', 'anchor')
    rows = []
    for r in report.records:
        mark = '✓' if r.ok else '✗'
        rows.append((mark, r.identity, _fmt(r.max_residual), _fmt(r.tolerance), r.expected, r.anchor))
        if r.counterexample is not None:
            point = ', '.join(f"{k}={v:g}" for k, v in sorted(r.counterexample.point.items()))
            rows.append(('', f"  counterexample: {r.counterexample.condition}",
                         _fmt(r.counterexample.residual), '', '', point))
        if r.note:
            rows.append(('', f"  note: {r.note}", '', '', '', ''))
    widths = [max(len(str(row[k])) for row in [header] + rows) for k in range(len(header))]
    lines = ['  '.join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + rows]
    lines.append('')
    lines.append(f"scenario: {report.scenario}   verdict: {report.verdict.upper()}   seed: {report.environment.seed}")
    lines.append(report.disclaimer)
    return '\n'.join(lines) + '\n'
