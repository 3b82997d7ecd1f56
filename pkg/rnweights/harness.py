"""
Suite orchestration
Runs the identity suites a scenario selects and assembles the report
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from rnweights.algebra_core import (
    APPROXIMATE,
    InvariancePair,
    PositiveElement,
    Weight,
    certify_pair,
    rigidity_witness,
)
from rnweights.cocycle_analysis import fit_generators
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, NumericalFailure, ScenarioError
from rnweights.modular_engine import (
    balanced_cocycle_residual,
    cocycle_chain_residual,
    cocycle_inverse_residual,
    gns,
    intertwining_residual,
    kms_residual,
    modular_flow,
)
from rnweights.reports import IdentityRecord, VerificationReport, report_to_json, report_to_text
from rnweights.rn_construct import (
    construct_weight,
    construction_cocycle_residual,
    constructed_path,
    delta_prime_closure,
    delta_prime_power,
    extract_pair,
    gamma_residual,
    lambda_prime_shift_residual,
    limit_formula_residual,
    rho_lemma_residual,
    s_prime_residual,
    smeared_domain_residual,
    sigma_prime_fixed_point_residual,
    sigma_prime_flow,
)
from rnweights.scenario import FiniteInstance, Scenario, build_instance
from rnweights.smearing import smear_analytic_residual, smear_element, smear_limit_diagnostics
from rnweights.theorems import KINDS as THEOREM_KINDS
from rnweights.theorems import (
    FiniteRn3Evidence,
    Rn1Inputs,
    Rn2Inputs,
    Rn3Inputs,
    verify_theorem,
)
from rnweights.weyl_testbed import (
    TestbedCase,
    WeylRn3Evidence,
    build_grid,
    case_scenario,
    weyl_cocycle_residual,
    weyl_invariance_residual,
    weyl_limit_formula_residual,
)

logger = logging.getLogger(__name__)

ANCHORS = {
    'modular': "KMS condition and S = J Delta^{1/2}",
    'cocycle': "Connes cocycle: chain rule, inverse rule, intertwining",
    'smearing': "e_n = alpha_n iint exp(-n^2 x^2 - n^4 y^4) lambda^{ix} delta^{iy} dx dy",
    'construction': "modular data of phi_delta: Delta', J', S', sigma'",
    'construction.limit_formula': "phi_delta(x) = lim_n phi((delta^{1/2} e_n) x (delta^{1/2} e_n))",
    'construction.cocycle': "[D phi_delta : D phi]_t = lambda^{it^2/2} delta^{it}",
    'uniqueness': "lambda^{it} = u_t^* u_1^* u_{t+1}, delta^{it} = u_t lambda^{-it^2/2}",
    'rigidity': "lambda = 1 on matrix algebras",
    'testbed': "sigma_t(K1^{is}) = e^{-its} K1^{is} on the Weyl pair",
}

SMEAR_NS = (1, 2, 4, 8)
FLOW_GRID = tuple(float(v) for v in np.linspace(-3.0, 3.0, 7))
COCYCLE_GRID = tuple(float(v) for v in np.linspace(-2.0, 2.0, 17))
EXTRACT_GRID = tuple(float(v) for v in np.linspace(-2.0, 3.0, 21))
FIT_GRID = tuple(float(v) for v in np.linspace(-1.0, 1.0, 41))
TESTBED_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)
MAX_KMS_PROBES = 64


def decreasing(values: Sequence[float], slack: float = 1.05, floor: float = 1e-12) -> bool:
    """Monotone decrease up to a relative slack"""
    return all(b <= slack * a + floor for a, b in zip(values, values[1:]))


class SuiteRunner:
    """Service class running the identity suites of one scenario"""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.cfg = get_config()
        self.report = VerificationReport(scenario=scenario.name)
        self.report.environment.seed = scenario.seed
        self.instance: Optional[FiniteInstance] = None
        self.case: Optional[TestbedCase] = None
        if scenario.algebra is not None:
            self.instance = build_instance(scenario)
        else:
            spec = scenario.testbed
            self.case = case_scenario(spec.case, build_grid(spec.N, spec.L_box))
        unknown = set(scenario.tolerances) - set(self._known_identities())
        if unknown:
            raise ScenarioError(f"tolerance overrides name unknown identities: {sorted(unknown)}", scenario.name)

    @staticmethod
    def _known_identities() -> List[str]:
        ids = []
        for suite, names in IDENTITIES.items():
            ids.extend(f"{suite}.{n}" for n in names)
        ids.extend(THEOREM_KINDS)
        return ids

    def _tol(self, identity: str, default: float) -> float:
        return self.scenario.tolerances.get(identity, default)

    def record(self, identity: str, residual: Optional[float], default_tol: float,
               expected: str = 'pass', grid: Optional[Dict[str, List[float]]] = None,
               details: Optional[Dict[str, Optional[float]]] = None, note: Optional[str] = None,
               passed: Optional[bool] = None) -> IdentityRecord:
        suite = identity.split('.')[0]
        tol = self._tol(identity, default_tol)
        if passed is None:
            passed = residual is not None and math.isfinite(residual) and residual <= tol
        return self.report.add(IdentityRecord(
            identity=identity, anchor=ANCHORS.get(identity, ANCHORS.get(suite, suite)),
            grid=grid or {}, max_residual=None if residual is None else float(residual),
            tolerance=tol, passed=passed, expected=expected, details=details or {}, note=note))

    def convergence(self, identity: str, ns: Sequence[int], values: Sequence[float]) -> IdentityRecord:
        """Non-increasing in n and the last value at most LIMIT_DECAY_RATIO of the first"""
        budget = self.cfg.QUAD_ERROR_BUDGET
        bound = self._tol(identity, max(self.cfg.LIMIT_DECAY_RATIO * values[0], budget))
        return self.record(identity, values[-1], bound, grid={'n': [float(n) for n in ns]},
                           passed=decreasing(values, floor=budget) and values[-1] <= bound,
                           details={f"n={n}": float(v) for n, v in zip(ns, values)})

    # finite-dimensional helpers

    @property
    def phi(self) -> Weight:
        return self.instance.phi

    @property
    def pair(self) -> InvariancePair:
        if self.instance.pair is None:
            raise InvalidArgumentError("Scenario has no pair")
        return self.instance.pair

    def psi(self) -> Weight:
        """The scenario's psi, or phi_delta when only a pair is given"""
        if self.instance.psi is not None:
            return self.instance.psi
        return construct_weight(self.phi, self.pair).weight

    def basis(self):
        return list(self.phi.algebra.basis())

    # suites

    def run_modular(self):
        phi = self.phi
        scale = max(1.0, phi.density.norm())
        basis = self.basis()
        if len(basis) > MAX_KMS_PROBES:
            rng = np.random.default_rng(self.scenario.seed)
            basis = [basis[k] for k in sorted(rng.choice(len(basis), MAX_KMS_PROBES, replace=False))]
        kms = max(kms_residual(phi, x, y) for x in basis for y in basis) / scale
        self.record('modular.kms', kms, self.cfg.TOL_EXACT)
        realization = gns(phi)
        sharp = max((realization.S(realization.lambda_map(a)) - realization.lambda_map(a.adjoint())).hs_norm()
                    for a in self.basis()) / math.sqrt(scale)
        self.record('modular.sharp', sharp, self.cfg.TOL_EXACT)
        group = max((modular_flow(phi, s, modular_flow(phi, t, x)) - modular_flow(phi, s + t, x)).norm()
                    for s in (-1.0, 0.5) for t in (0.25, 2.0) for x in self.basis())
        self.record('modular.flow_group_law', group, self.cfg.TOL_EXACT)

    def run_cocycle(self):
        phi, psi = self.phi, self.psi()
        grid = {'s': list(FLOW_GRID), 't': list(FLOW_GRID)}
        chain = max(cocycle_chain_residual(psi, phi, s, t) for s in FLOW_GRID for t in FLOW_GRID)
        self.record('cocycle.chain_rule', chain, self.cfg.TOL_EXACT, grid=grid)
        inverse = max(cocycle_inverse_residual(psi, phi, t) for t in FLOW_GRID)
        self.record('cocycle.inverse_rule', inverse, self.cfg.TOL_EXACT, grid={'t': list(FLOW_GRID)})
        inter = max(intertwining_residual(psi, phi, t) for t in FLOW_GRID)
        self.record('cocycle.intertwining', inter, self.cfg.TOL_EXACT, grid={'t': list(FLOW_GRID)})
        corner = max(balanced_cocycle_residual(psi, phi, t) for t in FLOW_GRID)
        self.record('cocycle.balanced_corner', corner, self.cfg.TOL_PLUMBING, grid={'t': list(FLOW_GRID)})

    def run_smearing(self):
        pair = self.pair
        herm, contract = 0.0, 0.0
        for n in SMEAR_NS:
            e_n = smear_element(pair, n).value
            herm = max(herm, e_n.hermiticity_defect())
            contract = max(contract, e_n.norm() - 1.0)
        ns = {'n': [float(n) for n in SMEAR_NS]}
        self.record('smearing.hermitian', herm, self.cfg.TOL_EXACT, grid=ns)
        self.record('smearing.contractive', max(contract, 0.0), self.cfg.QUAD_ERROR_BUDGET, grid=ns)

        points = ((0.5, 0.0, 0.5j, 1.0), (0.25, 0.5, -0.5, 0.5), (1.0, -1.0, 0.5j, -1.0), (0.0, 0.0, 0.0, 0.0))
        analytic = max(smear_analytic_residual(pair, self.phi, 2, *p) for p in points)
        self.record('smearing.analytic_identity', analytic, self.cfg.TOL_LEMMA, grid={'n': [2.0]})

        rows = smear_limit_diagnostics(pair, range(1, 9))
        self.convergence('smearing.limit', [r['n'] for r in rows], [r['distance'] for r in rows])

    def run_construction(self):
        phi, pair = self.phi, self.pair
        constructed = construct_weight(phi, pair)
        own = gns(constructed.weight)
        basis = self.basis()
        exact = self.cfg.TOL_EXACT

        limit = [limit_formula_residual(phi, pair, phi.algebra.identity(), n, constructed) for n in SMEAR_NS]
        self.convergence('construction.limit_formula', SMEAR_NS, limit)

        ts = (-1.0, -0.5, 0.5, 1.0)
        dp = max(float(np.linalg.norm(delta_prime_power(phi, pair, 1j * t).dense() - own.delta_power(1j * t).dense(), 2))
                 for t in ts)
        self.record('construction.delta_prime_group', dp, exact, grid={'t': list(ts)})
        closure = 0.0
        for r in (0.5, 1.0):
            target = own.delta_power(r).dense()
            diff = float(np.linalg.norm(delta_prime_closure(phi, pair, r).dense() - target, 2))
            closure = max(closure, diff / max(1.0, float(np.linalg.norm(target, 2))))
        self.record('construction.delta_prime_closure', closure, exact, grid={'r': [0.5, 1.0]})

        self.record('construction.s_prime', max(s_prime_residual(phi, pair, a, constructed) for a in basis), exact)
        self.record('construction.rho_lemma', max(rho_lemma_residual(phi, pair, a, constructed) for a in basis), exact)
        self.record('construction.gamma_map', max(gamma_residual(constructed, a) for a in basis), exact)

        zs = (0.5, 0.5j, -0.3 + 0.4j)
        dom = max(smeared_domain_residual(phi, pair, 2, m, z, xi) for m in (2, 3) for z in zs for xi in basis[:16])
        self.record('construction.smeared_domain', dom, self.cfg.TOL_LEMMA)
        shift = max(lambda_prime_shift_residual(phi, pair, a, z, 2, constructed) for a in basis[:16] for z in (0.5, 0.25j, -0.5))
        self.record('construction.lambda_prime_shift', shift, self.cfg.TOL_LEMMA)

        flow = max((sigma_prime_flow(phi, pair, s, x) - modular_flow(constructed.weight, s, x)).norm()
                   for s in (-1.0, 0.5, 1.0) for x in basis)
        self.record('construction.sigma_prime', flow, exact, grid={'s': [-1.0, 0.5, 1.0]})
        group_grid = (-3.0, -1.5, 0.0, 1.5, 3.0)
        group = max((sigma_prime_flow(phi, pair, s, sigma_prime_flow(phi, pair, t, x))
                     - sigma_prime_flow(phi, pair, s + t, x)).norm()
                    for s in group_grid for t in group_grid for x in basis[:16])
        self.record('construction.sigma_prime_group', group, exact, grid={'s': list(group_grid), 't': list(group_grid)})
        fixed = max(sigma_prime_fixed_point_residual(phi, pair, 2, 0.5, 0.5, 0.5j, s) for s in (-1.0, 1.0))
        self.record('construction.sigma_prime_fixed_point', fixed, self.cfg.TOL_LEMMA, grid={'s': [-1.0, 1.0]})

        cocycle = max(construction_cocycle_residual(phi, pair, t, constructed) for t in COCYCLE_GRID)
        self.record('construction.cocycle', cocycle, exact, grid={'t': list(COCYCLE_GRID)})

    def run_uniqueness(self):
        phi, pair = self.phi, self.pair
        constructed = construct_weight(phi, pair)
        path = constructed_path(phi, constructed, EXTRACT_GRID)
        extracted = extract_pair(path)
        lam_gap = max((extracted.lambda_path.at(t) - pair.lambda_.power(1j * t)).norm()
                      for t in extracted.lambda_path.t_grid)
        delta_gap = max((extracted.delta_path.at(t) - pair.delta.power(1j * t)).norm()
                        for t in extracted.delta_path.t_grid)
        self.record('uniqueness.extract_pair', max(lam_gap, delta_gap), self.cfg.TOL_EXACT,
                    grid={'t': list(extracted.delta_path.t_grid)},
                    details={'lambda': lam_gap, 'delta': delta_gap})

        fit = fit_generators(constructed_path(phi, constructed, FIT_GRID))
        d_gap = float(np.linalg.norm((fit.D - pair.delta.log).to_vector()))
        l_gap = float(np.linalg.norm((fit.L - pair.lambda_.log).to_vector()))
        self.record('uniqueness.fit_generators', max(d_gap, l_gap), 1e-8, grid={'t': list(FIT_GRID)},
                    details={'D': d_gap, 'L': l_gap, 'fit_residual': fit.residual})

    def _theorem(self, kind: str, inputs):
        sub = verify_theorem(kind, inputs, self.scenario.expect.get(kind, 'pass'), self.scenario.name)
        self.report.extend(sub)

    def run_rn1(self):
        self._theorem('rn1', Rn1Inputs(self.phi, self.psi(), self.pair, tolerance=self.scenario.tolerances.get('rn1')))

    def run_rn2(self):
        self._theorem('rn2', Rn2Inputs(self.phi, self.psi(), tolerance=self.scenario.tolerances.get('rn2')))

    def run_rn3(self):
        lambda0 = self.scenario.lambda0
        if self.case is not None:
            swapped = self.scenario.testbed.swapped
            default = math.e if swapped else math.exp(-1.0)
            evidence = WeylRn3Evidence(self.case, self.case.probe(), lambda0=lambda0 or default, swapped=swapped)
        else:
            evidence = FiniteRn3Evidence(self.phi, self.psi(), lambda0 or 1.0)
        self._theorem('rn3', Rn3Inputs(evidence, tolerance=self.scenario.tolerances.get('rn3')))

    def run_rigidity(self):
        """lambda0 != 1 on a matrix algebra must break relative invariance somewhere on [0, 10]"""
        lam = PositiveElement.from_element(self.phi.algebra.scalar(self.scenario.lambda0))
        witness_pair = certify_pair(self.phi, self.pair.delta, lam, APPROXIMATE)
        worst, (s, t) = rigidity_witness(self.phi, witness_pair)
        threshold = self.cfg.RIGIDITY_THRESHOLD
        self.record('rigidity.witness', worst, threshold, expected='fail',
                    grid={'s': [1.0], 't': [0.0, 10.0]},
                    passed=worst < self._tol('rigidity.witness', threshold),
                    details={'s': s, 't': t, 'log_lambda0': math.log(self.scenario.lambda0)},
                    note="rigidity witness: the failure is the assertion")

    def run_testbed(self):
        case = self.case
        probe = case.probe()
        grid = {'s': list(TESTBED_GRID), 't': list(TESTBED_GRID)}
        inv = max(weyl_invariance_residual(case, s, t, probe) for s in TESTBED_GRID for t in TESTBED_GRID)
        self.record('testbed.invariance', inv, self.cfg.TOL_TESTBED_INVARIANCE, grid=grid)
        trivial = max(max(weyl_invariance_residual(case, 0.0, t, probe), weyl_invariance_residual(case, t, 0.0, probe))
                      for t in TESTBED_GRID)
        self.record('testbed.trivial_parameters', trivial, self.cfg.TOL_PLUMBING, grid={'t': list(TESTBED_GRID)})

        ts = [t for t in TESTBED_GRID if t != 0.0]
        cocycle = max(weyl_cocycle_residual(case, t, probe) for t in ts)
        self.record('testbed.cocycle', cocycle, self.cfg.TOL_TESTBED, grid={'t': ts})

        centrality = case.lambda_centrality()
        self.record('testbed.lambda_central', centrality, self.cfg.TOL_PLUMBING,
                    expected='fail' if case.case_id == 'factor' else 'pass',
                    note="lambda must not be central in the factor case" if case.case_id == 'factor' else None)

        limit = [weyl_limit_formula_residual(case, n, probe) for n in SMEAR_NS]
        self.convergence('testbed.limit_formula', SMEAR_NS, limit)
        rows = smear_limit_diagnostics(case.pair, SMEAR_NS, probe=probe)
        self.convergence('testbed.smear_limit', SMEAR_NS, [r['distance'] for r in rows])

    def run(self) -> VerificationReport:
        for suite in self.scenario.suites:
            logger.info(f"Running suite '{suite}' of scenario '{self.scenario.name}'")
            try:
                getattr(self, f"run_{suite}")()
            except NumericalFailure as e:
                logger.error(f"Suite '{suite}' hit a numerical failure: {e}")
                self.report.numerical_failure = True
                numbers = {k: float(v) for k, v in e.diagnostics.items() if isinstance(v, (int, float))}
                self.record(f"{suite}.numerical_failure", None, self.cfg.TOL_EXACT,
                            passed=False, details=numbers, note=str(e))
        return self.report.finalize()


IDENTITIES: Dict[str, Sequence[str]] = {
    'modular': ('kms', 'sharp', 'flow_group_law'),
    'cocycle': ('chain_rule', 'inverse_rule', 'intertwining', 'balanced_corner'),
    'smearing': ('hermitian', 'contractive', 'analytic_identity', 'limit'),
    'construction': ('limit_formula', 'delta_prime_group', 'delta_prime_closure', 's_prime', 'rho_lemma',
                     'gamma_map', 'smeared_domain', 'lambda_prime_shift', 'sigma_prime', 'sigma_prime_group',
                     'sigma_prime_fixed_point', 'cocycle'),
    'uniqueness': ('extract_pair', 'fit_generators'),
    'rigidity': ('witness',),
    'testbed': ('invariance', 'trivial_parameters', 'cocycle', 'lambda_central', 'limit_formula', 'smear_limit'),
    'rn1': (), 'rn2': (), 'rn3': (),
}


def run_suite(scenario: Scenario) -> VerificationReport:
    """
    Run every suite the scenario selects.

    Numerical failures become failed records; the report is deterministic for a
    fixed scenario and seed.
    """
    return SuiteRunner(scenario).run()


def emit_report(report: VerificationReport, fmt: str = 'json',
                path: Optional[Union[str, Path]] = None) -> str:
    """Render the report as JSON or as a text table, writing it to path when given"""
    if fmt == 'json':
        text = report_to_json(report) + '\n'
    elif fmt == 'text':
        text = report_to_text(report)
    else:
        raise InvalidArgumentError(f"Unknown report format '{fmt}'. Valid: json, text")
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
        logger.info(f"Report written to {path}")
    return text


def exit_code(report: VerificationReport) -> int:
    if report.verdict == 'pass':
        return 0
    return 3 if report.numerical_failure else 1
