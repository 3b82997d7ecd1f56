"""
Command line surface: verify, sweep, smear, decompose.

Exit codes: 0 pass, 1 fail, 2 usage or input error, 3 numerical failure.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from rnweights import __version__
from rnweights.algebra_core import centrality_defect
from rnweights.cocycle_analysis import fit_generators
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, ModeViolation, NumericalFailure, ScenarioError
from rnweights.harness import SuiteRunner, emit_report, exit_code
from rnweights.rn_construct import extract_pair
from rnweights.scenario import Scenario, build_instance, element_to_blocks, load_cocycle_path, parse_scenario
from rnweights.smearing import smear_element
from rnweights.theorems import KINDS
from rnweights.weyl_testbed import CASES, build_grid, case_scenario, convergence_sweep

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ScenarioError, InvalidArgumentError, ModeViolation)
FORMATS = click.Choice(['json', 'text'])


def _fail(ctx: click.Context, e: Exception) -> None:
    code = 3 if isinstance(e, NumericalFailure) else 2
    logger.error(f"{type(e).__name__}: {e}")
    click.echo(f"error: {e}", err=True)
    ctx.exit(code)


def _parse_tolerances(values: Sequence[str]) -> Dict[str, float]:
    out = {}
    for item in values:
        key, sep, raw = item.partition('=')
        try:
            value = float(raw)
        except ValueError:
            value = float('nan')
        if not sep or not key or not value > 0:
            raise click.BadParameter(f"expected IDENTITY=POSITIVE_FLOAT, got '{item}'", param_hint='--tol')
        out[key] = value
    return out


def apply_overrides(scenario: Scenario, theorem: Optional[str] = None, seed: Optional[int] = None,
                    tolerances: Optional[Dict[str, float]] = None) -> Scenario:
    """Re-validate the scenario with command line overrides applied"""
    payload = scenario.model_dump(mode='json', by_alias=True)
    if theorem is not None:
        payload['suites'] = [theorem]
        payload['expect'] = {k: v for k, v in payload['expect'].items() if k == theorem}
    if seed is not None:
        payload['seed'] = seed
    if tolerances:
        payload['tolerances'] = {**payload['tolerances'], **tolerances}
    try:
        return Scenario.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        raise ScenarioError(first['msg'], f"{scenario.name}:{'.'.join(str(p) for p in first['loc'])}") from e


def render_table(rows: List[Dict[str, object]], columns: Sequence[str]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.3e}"
        return str(v)

    body = [[cell(r.get(c, '-')) for c in columns] for r in rows]
    widths = [max(len(x) for x in [c] + [row[k] for row in body]) for k, c in enumerate(columns)]
    lines = ['  '.join(x.ljust(w) for x, w in zip(row, widths)).rstrip() for row in [list(columns)] + body]
    return '\n'.join(lines) + '\n'


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        click.echo(text, nl=False)
        return
    Path(path).write_text(text, encoding='utf-8')
    logger.info(f"Output written to {path}")


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


@click.group()
@click.version_option(__version__, prog_name='rnweights')
@click.option('-v', '--verbose', is_flag=True, help='Debug logging')
def cli(verbose: bool):
    """Radon-Nikodym weights: identity verification on finite-dimensional algebras and the Weyl testbed."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, get_config().LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)s | rnweights | %(message)s"
    )


@cli.command()
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(dir_okay=False),
              help='Scenario JSON file')
@click.option('--theorem', type=click.Choice(KINDS), help='Run only this theorem suite')
@click.option('--tol', 'tol_overrides', multiple=True, metavar='IDENTITY=VALUE',
              help='Tolerance override, repeatable')
@click.option('--report', 'report_path', type=click.Path(dir_okay=False), help='Write the report here')
@click.option('--format', 'fmt', type=FORMATS, default='json', show_default=True)
@click.option('--seed', type=int, help='Override the scenario seed')
@click.pass_context
def verify(ctx, scenario_path, theorem, tol_overrides, report_path, fmt, seed):
    """Run the scenario's suites and emit a verification report."""
    tolerances = _parse_tolerances(tol_overrides)
    try:
        scenario = apply_overrides(parse_scenario(scenario_path), theorem, seed, tolerances)
        report = SuiteRunner(scenario).run()
    except USAGE_ERRORS + (NumericalFailure,) as e:
        _fail(ctx, e)
        return
    text = emit_report(report, fmt, report_path)
    if report_path is None:
        click.echo(text, nl=False)
    logger.info(f"Scenario '{scenario.name}': verdict {report.verdict}")
    ctx.exit(exit_code(report))


@cli.command()
@click.option('--case', 'case_id', type=click.Choice(CASES), default='scalar', show_default=True)
@click.option('--scenario', 'scenario_path', type=click.Path(dir_okay=False),
              help='Testbed scenario; supplies the case and its N and L_box')
@click.option('--n', 'n_list', type=int, multiple=True, help='Grid sizes (powers of two), repeatable')
@click.option('--l-box', 'l_list', type=float, multiple=True, help='Box widths, repeatable')
@click.option('--s', 's_value', type=float, default=1.0, show_default=True)
@click.option('--t', 't_value', type=float, default=1.0, show_default=True)
@click.option('--interior-tol', type=float, default=1e-2, show_default=True,
              help='Probe mass allowed outside the interior')
@click.option('--report', 'report_path', type=click.Path(dir_okay=False))
@click.option('--format', 'fmt', type=FORMATS, default='text', show_default=True)
@click.pass_context
def sweep(ctx, case_id, scenario_path, n_list, l_list, s_value, t_value, interior_tol, report_path, fmt):
    """Testbed residuals over (N, L_box) combinations."""
    try:
        if scenario_path is not None:
            scenario = parse_scenario(scenario_path)
            if scenario.testbed is None:
                raise InvalidArgumentError("sweep needs a testbed scenario")
            case_id = scenario.testbed.case
            n_list = n_list or (scenario.testbed.N,)
            l_list = l_list or (scenario.testbed.L_box,)
        table = convergence_sweep(case_id, n_list or (256,), l_list or (8.0, 12.0, 16.0, 24.0),
                                  s_value, t_value, interior_tol)
    except USAGE_ERRORS + (NumericalFailure,) as e:
        _fail(ctx, e)
        return
    if fmt == 'json':
        text = _dump({'case': table.case_id, 'rows': table.rows, 'monotone': table.monotone})
    else:
        columns = list(table.rows[0]) if table.rows else []
        text = render_table(table.rows, columns)
        text += ''.join(f"monotone {k}: {v}\n" for k, v in sorted(table.monotone.items()))
    _emit(text, report_path)


@cli.command()
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(dir_okay=False))
@click.option('--n', 'n_list', type=int, multiple=True, help='Smearing indices, repeatable')
@click.option('--report', 'report_path', type=click.Path(dir_okay=False))
@click.option('--format', 'fmt', type=FORMATS, default='text', show_default=True)
@click.pass_context
def smear(ctx, scenario_path, n_list, report_path, fmt):
    """Diagnostics of the smeared elements e_n for the scenario's pair."""
    rows = []
    try:
        scenario = parse_scenario(scenario_path)
        if scenario.testbed is not None:
            spec = scenario.testbed
            case = case_scenario(spec.case, build_grid(spec.N, spec.L_box))
            pair, probe = case.pair, case.probe()
        else:
            instance = build_instance(scenario)
            if instance.pair is None:
                raise InvalidArgumentError("smear needs a scenario with a pair")
            pair, probe = instance.pair, None
        one = pair.algebra.identity()
        for n in n_list or (1, 2, 4, 8):
            element = smear_element(pair, n)
            gap = element.value - one
            distance = gap.norm() if probe is None else float(np.linalg.norm(gap.apply(probe)))
            rows.append({
                'n': n,
                'distance': distance,
                'hermiticity': element.value.hermiticity_defect(),
                'norm': element.value.norm(),
                'alpha_n': element.quadrature_meta['alpha_n'],
                'y_nodes': element.quadrature_meta['y_nodes'],
                'error_estimate': element.quadrature_meta['error_estimate'],
            })
    except USAGE_ERRORS + (NumericalFailure,) as e:
        _fail(ctx, e)
        return
    if fmt == 'json':
        text = _dump({'scenario': scenario.name, 'rows': rows})
    else:
        text = render_table(rows, ['n', 'distance', 'hermiticity', 'norm', 'alpha_n', 'y_nodes', 'error_estimate'])
    _emit(text, report_path)


@cli.command()
@click.argument('path_file', type=click.Path(dir_okay=False))
@click.option('--report', 'report_path', type=click.Path(dir_okay=False))
@click.option('--format', 'fmt', type=FORMATS, default='json', show_default=True)
@click.pass_context
def decompose(ctx, path_file, report_path, fmt):
    """Extract log lambda (and, when the grid allows, the generators D and L) from a sampled cocycle path."""
    try:
        path = load_cocycle_path(path_file)
        extracted = extract_pair(path)
        fit = None
        try:
            fit = fit_generators(path)
        except InvalidArgumentError as e:
            logger.warning(f"Generator fit skipped: {e}")
    except USAGE_ERRORS + (NumericalFailure,) as e:
        _fail(ctx, e)
        return
    log_lambda = extracted.log_lambda
    payload = {
        't_grid': list(path.t_grid),
        'log_lambda': element_to_blocks(log_lambda),
        'lambda_centrality': centrality_defect(log_lambda),
        'fit': None if fit is None else {
            'D': element_to_blocks(fit.D),
            'L': element_to_blocks(fit.L),
            'residual': fit.residual,
            'L_centrality': centrality_defect(fit.L),
        },
    }
    if fmt == 'json':
        text = _dump(payload)
    else:
        rows = [{'quantity': '||log lambda||', 'value': log_lambda.norm()},
                {'quantity': 'lambda centrality', 'value': payload['lambda_centrality']}]
        if fit is not None:
            rows += [{'quantity': '||D||', 'value': fit.D.norm()},
                     {'quantity': '||L||', 'value': fit.L.norm()},
                     {'quantity': 'fit residual', 'value': fit.residual},
                     {'quantity': 'L centrality', 'value': payload['fit']['L_centrality']}]
        text = render_table(rows, ['quantity', 'value'])
    _emit(text, report_path)


def main():
    cli(prog_name='rnweights')
