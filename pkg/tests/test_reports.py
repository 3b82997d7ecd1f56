import json

import jsonschema
import pytest

from rnweights.reports import (
    EVIDENCE_DISCLAIMER,
    Counterexample,
    IdentityRecord,
    VerificationReport,
    report_from_json,
    report_schema,
    report_to_json,
    report_to_text,
)


def sample_report():
    report = VerificationReport(scenario='sample')
    report.add(IdentityRecord(identity='modular.kms', anchor='KMS', max_residual=3e-14,
                              tolerance=1e-10, passed=True))
    report.add(IdentityRecord(identity='rn3.equivalence', anchor='rn3', max_residual=2.0, tolerance=1e-10,
                              passed=False, pattern='mixed',
                              counterexample=Counterexample(condition='cocycle_form', point={'s': 1.0, 't': 1.0},
                                                            residual=2.0)))
    report.add(IdentityRecord(identity='rigidity.witness', anchor='lambda = 1', max_residual=0.9,
                              tolerance=0.1, passed=False, expected='fail', note='the failure is the assertion'))
    return report.finalize()


def test_verdict_follows_expectations():
    report = sample_report()
    assert [r.ok for r in report.records] == [True, False, True]
    assert report.verdict == 'fail'
    report.records.pop(1)
    assert report.finalize().verdict == 'pass'


def test_json_roundtrip():
    report = sample_report()
    again = report_from_json(report_to_json(report))
    assert again == report
    assert again.records[1].counterexample.point == {'s': 1.0, 't': 1.0}


def test_json_is_sorted_and_validated():
    payload = json.loads(report_to_json(sample_report()))
    assert list(payload) == sorted(payload)
    assert payload['disclaimer'] == EVIDENCE_DISCLAIMER
    jsonschema.validate(payload, report_schema())


def test_schema_rejects_unknown_fields():
    payload = json.loads(report_to_json(sample_report()))
    payload['records'][0]['colour'] = 'blue'
    with pytest.raises(jsonschema.ValidationError):
        report_from_json(json.dumps(payload))


def test_missing_residual_serializes_as_null():
    report = VerificationReport(scenario='nan')
    report.add(IdentityRecord(identity='smearing.numerical_failure', anchor='-', tolerance=1e-10, passed=False))
    payload = json.loads(report_to_json(report.finalize()))
    assert payload['records'][0]['max_residual'] is None


def test_text_table():
    text = report_to_text(sample_report())
    lines = text.splitlines()
    assert lines[0].split() == ['identity', 'max', 'residual', 'tolerance', 'expected', 'anchor']
    assert lines[1].startswith('✓  modular.kms')
    assert lines[2].startswith('✗  rn3.equivalence')
    assert 'counterexample: cocycle_form' in lines[3]
    assert 's=1, t=1' in lines[3]
    assert 'note: the failure is the assertion' in text
    assert 'verdict: FAIL' in text


def test_rendering_is_deterministic():
    assert report_to_json(sample_report()) == report_to_json(sample_report())
    assert report_to_text(sample_report()) == report_to_text(sample_report())
