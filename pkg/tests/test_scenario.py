import json

import numpy as np
import pytest

from rnweights.algebra_core import build_algebra
from rnweights.cocycle_analysis import synth_path
from rnweights.errors import InvalidArgumentError, ScenarioError
from rnweights.scenario import (
    MatrixResolver,
    SpectralSpec,
    build_instance,
    element_to_blocks,
    load_cocycle_path,
    parse_scenario,
    parse_scenario_text,
)
from tests.conftest import SCENARIOS

GOLDEN = sorted(SCENARIOS.glob('*.json'))

MINIMAL = {
    'name': 'minimal',
    'algebra': {'blocks': [2]},
    'weight': {'kind': 'diag', 'values': [[1.0, 2.0]]},
    'suites': ['modular'],
}


def scenario_text(**changes):
    payload = {**MINIMAL, **changes}
    return json.dumps({k: v for k, v in payload.items() if v is not None})


def test_every_golden_file_parses():
    assert len(GOLDEN) == 9
    for path in GOLDEN:
        scenario = parse_scenario(path)
        assert scenario.name == path.stem


def test_pt_exact_instance():
    instance = build_instance(parse_scenario(SCENARIOS / 'pt-exact.json'))
    assert np.allclose(instance.phi.density.element.dense(), np.diag([1.0, 2.0]))
    assert instance.pair.mode == 'exact'
    assert instance.pair.invariance_residual <= 1e-10


def test_random_golden_is_reproducible():
    scenario = parse_scenario(SCENARIOS / 'random-3block.json')
    first, second = build_instance(scenario), build_instance(scenario)
    assert (first.phi.density.element - second.phi.density.element).norm() == 0.0


def test_weyl_goldens():
    scenario = parse_scenario(SCENARIOS / 'weyl-scalar.json')
    assert scenario.testbed.case == 'scalar'
    assert (scenario.testbed.N, scenario.testbed.L_box) == (256, 16.0)
    with pytest.raises(InvalidArgumentError):
        build_instance(scenario)


def test_empty_file(tmp_path):
    path = tmp_path / 'empty.json'
    path.write_text('  \n')
    with pytest.raises(ScenarioError, match="empty"):
        parse_scenario(path)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        parse_scenario(tmp_path / 'absent.json')


def test_bad_json_reports_position():
    with pytest.raises(ScenarioError) as info:
        parse_scenario_text('{\n  "name": "x",\n  oops\n}', 'broken.json')
    assert info.value.location == 'broken.json:3:3'


def test_unknown_key_is_rejected():
    with pytest.raises(ScenarioError) as info:
        parse_scenario_text(scenario_text(colour='blue'))
    assert 'colour' in info.value.location


@pytest.mark.parametrize("changes, message", [
    ({'weight': None}, "'weight' is required"),
    ({'suites': ['construction']}, "need 'pair'"),
    ({'suites': ['rn2']}, "need 'psi' or 'pair'"),
    ({'testbed': {'case': 'scalar'}}, "exactly one"),
    ({'algebra': None, 'weight': None, 'testbed': {'case': 'factor'}, 'suites': ['rn3']}, "'scalar' case"),
    ({'suites': ['testbed']}, "testbed section"),
    ({'algebra': None, 'weight': None, 'testbed': {'case': 'central', 'swapped': True}, 'suites': ['testbed']},
     "'swapped' weights"),
])
def test_layout_rules(changes, message):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario_text(scenario_text(**changes))


def test_empty_suite_list_is_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario_text(scenario_text(suites=[]))


def test_lambda_alias():
    scenario = parse_scenario_text(scenario_text(
        suites=['construction'],
        pair={'delta': {'kind': 'diag', 'values': [[3.0, 1.0]]}, 'lambda': {'kind': 'scalar', 'value': 1.0}},
    ))
    assert scenario.pair.lambda_.value == 1.0


def test_diag_length_mismatch():
    scenario = parse_scenario_text(scenario_text(weight={'kind': 'diag', 'values': [[1.0, 2.0, 3.0]]}))
    with pytest.raises(InvalidArgumentError, match="do not match"):
        build_instance(scenario)


def test_spectral_specs_commute():
    algebra = build_algebra([3, 2])
    resolver = MatrixResolver(algebra, seed=5)
    a = resolver.positive(SpectralSpec(kind='spectral', values=[[1.0, 2.0, 3.0], [0.5, 4.0]])).element
    b = resolver.positive(SpectralSpec(kind='spectral', values=[[7.0, 1.0, 0.2], [2.0, 1.0]])).element
    assert (a @ b - b @ a).norm() < 1e-12


def test_balanced_needs_even_blocks():
    algebra = build_algebra([3])
    resolver = MatrixResolver(algebra, seed=0)
    scenario = parse_scenario_text(scenario_text(
        algebra={'blocks': [3]},
        weight={'kind': 'balanced', 'parts': [{'kind': 'scalar', 'value': 1.0}, {'kind': 'scalar', 'value': 2.0}]},
    ))
    with pytest.raises(InvalidArgumentError, match="even"):
        resolver.positive(scenario.weight)


def write_path_file(tmp_path, blocks, grid, samples):
    path = tmp_path / 'path.json'
    path.write_text(json.dumps({'blocks': blocks, 't_grid': list(grid),
                                'samples': [element_to_blocks(s) for s in samples]}))
    return path


def test_load_cocycle_path(tmp_path):
    algebra = build_algebra([2])
    grid = (-1.0, 0.0, 0.5, 1.0)
    source = synth_path(algebra.diag([[0.4, -0.1]]), algebra.scalar(0.3), grid)
    loaded = load_cocycle_path(write_path_file(tmp_path, [2], grid, [source.at(t) for t in grid]))
    assert loaded.t_grid == grid
    for t in grid:
        assert (loaded.at(t) - source.at(t)).norm() < 1e-15


def test_path_file_sample_count(tmp_path):
    algebra = build_algebra([2])
    path = write_path_file(tmp_path, [2], (0.0, 1.0), [algebra.identity()])
    with pytest.raises(ScenarioError, match="samples"):
        load_cocycle_path(path)


def test_path_file_block_mismatch(tmp_path):
    algebra = build_algebra([3])
    path = write_path_file(tmp_path, [2], (0.0,), [algebra.identity()])
    with pytest.raises(InvalidArgumentError, match="block sizes"):
        load_cocycle_path(path)
