import json

import pytest
from click.testing import CliRunner

from rnweights.algebra_core import build_algebra
from rnweights.cli import apply_overrides, cli, render_table
from rnweights.cocycle_analysis import synth_path
from rnweights.errors import ScenarioError
from rnweights.scenario import element_to_blocks, parse_scenario
from tests.conftest import SCENARIOS

PT = str(SCENARIOS / 'pt-exact.json')


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert 'rnweights' in result.stdout


def test_verify_single_theorem(runner):
    result = runner.invoke(cli, ['verify', '--scenario', PT, '--theorem', 'rn3', '--seed', '5'])
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    assert payload['verdict'] == 'pass'
    assert payload['environment']['seed'] == 5
    assert {r['identity'].split('.')[0] for r in payload['records']} == {'rn3'}


def test_verify_writes_text_report(runner, tmp_path):
    path = tmp_path / 'report.txt'
    result = runner.invoke(cli, ['verify', '--scenario', PT, '--theorem', 'rn1', '--format', 'text',
                                 '--report', str(path)])
    assert result.exit_code == 0
    assert 'verdict: PASS' in path.read_text(encoding='utf-8')


def test_verify_failing_tolerance_exits_one(runner):
    result = runner.invoke(cli, ['verify', '--scenario', str(SCENARIOS / 'cocycle-noncommuting.json'),
                                 '--tol', 'modular.kms=1e-300', '--tol', 'modular.sharp=1e-300'])
    payload = json.loads(result.stdout)
    records = {r['identity']: r for r in payload['records']}
    assert records['modular.kms']['tolerance'] == 1e-300
    assert result.exit_code == 1


@pytest.mark.parametrize("tol", ['modular.kms', 'modular.kms=abc', '=1e-3', 'modular.kms=-1'])
def test_bad_tolerance_is_a_usage_error(runner, tol):
    result = runner.invoke(cli, ['verify', '--scenario', PT, '--tol', tol])
    assert result.exit_code == 2


def test_tolerance_for_unknown_identity_exits_two(runner):
    result = runner.invoke(cli, ['verify', '--scenario', PT, '--tol', 'bogus=1e-3'])
    assert result.exit_code == 2
    assert 'bogus' in result.stderr


def test_missing_scenario_exits_two(runner, tmp_path):
    result = runner.invoke(cli, ['verify', '--scenario', str(tmp_path / 'absent.json')])
    assert result.exit_code == 2
    assert 'cannot read scenario' in result.stderr


def test_unknown_theorem_is_rejected(runner):
    result = runner.invoke(cli, ['verify', '--scenario', PT, '--theorem', 'rn4'])
    assert result.exit_code == 2


def test_apply_overrides_revalidates():
    scenario = parse_scenario(SCENARIOS / 'weyl-factor.json')
    with pytest.raises(ScenarioError, match="scalar"):
        apply_overrides(scenario, theorem='rn3')


def test_apply_overrides_keeps_the_theorem_expectation():
    scenario = parse_scenario(SCENARIOS / 'cocycle-noncommuting.json')
    narrowed = apply_overrides(scenario, theorem='rn2', tolerances={'rn2': 1e-6})
    assert narrowed.suites == ['rn2']
    assert narrowed.expect == {'rn2': 'fail'}
    assert narrowed.tolerances == {'rn2': 1e-6}


def test_smear_json(runner):
    result = runner.invoke(cli, ['smear', '--scenario', PT, '--n', '1', '--n', '4', '--format', 'json'])
    assert result.exit_code == 0
    rows = json.loads(result.stdout)['rows']
    assert [r['n'] for r in rows] == [1, 4]
    assert rows[1]['distance'] < rows[0]['distance']


def test_smear_needs_a_pair(runner, tmp_path):
    path = tmp_path / 'no-pair.json'
    path.write_text(json.dumps({'name': 'no-pair', 'algebra': {'blocks': [2]},
                                'weight': {'kind': 'diag', 'values': [[1.0, 2.0]]}, 'suites': ['modular']}))
    result = runner.invoke(cli, ['smear', '--scenario', str(path)])
    assert result.exit_code == 2


def test_sweep_small_grid(runner):
    result = runner.invoke(cli, ['sweep', '--case', 'central', '--n', '64', '--l-box', '16', '--l-box', '24',
                                 '--format', 'json'])
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    assert payload['case'] == 'central'
    assert [row['L_box'] for row in payload['rows']] == [16.0, 24.0]


def test_sweep_rejects_bad_grid(runner):
    result = runner.invoke(cli, ['sweep', '--n', '100', '--l-box', '16'])
    assert result.exit_code == 2


def test_decompose(runner, tmp_path):
    algebra = build_algebra([2, 1])
    D = algebra.diag([[0.4, -0.3], [0.2]])
    L = algebra.element([0.5 * algebra.identity().blocks[0], -0.25 * algebra.identity().blocks[1]])
    grid = [float(k) / 10 for k in range(-10, 21)]
    path = synth_path(D, L, grid)
    source = tmp_path / 'path.json'
    source.write_text(json.dumps({'blocks': [2, 1], 't_grid': grid,
                                  'samples': [element_to_blocks(path.at(t)) for t in grid]}))
    result = runner.invoke(cli, ['decompose', str(source)])
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    assert payload['lambda_centrality'] < 1e-10
    assert abs(payload['log_lambda'][0][0][0][0] - 0.5) < 1e-8
    assert abs(payload['log_lambda'][1][0][0][0] + 0.25) < 1e-8
    assert payload['fit']['residual'] < 1e-8


def test_decompose_malformed_file(runner, tmp_path):
    source = tmp_path / 'path.json'
    source.write_text('{"blocks": [2]')
    result = runner.invoke(cli, ['decompose', str(source)])
    assert result.exit_code == 2


def test_render_table():
    text = render_table([{'n': 1, 'distance': 0.5}, {'n': 16, 'distance': 0.0125}], ['n', 'distance'])
    assert text.splitlines() == ['n   distance', '1   5.000e-01', '16  1.250e-02']
