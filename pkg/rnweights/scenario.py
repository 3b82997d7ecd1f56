"""
Scenario files: strict JSON describing an algebra (or a Weyl testbed case),
weights, the invariance pair and the suites to run.

Complex entries are [re, im] pairs; matrices are row-major nested lists per block.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator
from scipy import linalg as sla
from scipy.stats import unitary_group

from rnweights.algebra_core import (
    EXACT,
    AlgebraElement,
    BlockAlgebra,
    InvariancePair,
    PositiveElement,
    Weight,
    build_algebra,
    certify_pair,
)
from rnweights.cocycle_analysis import CocyclePath
from rnweights.errors import InvalidArgumentError, ScenarioError

logger = logging.getLogger(__name__)

SuiteName = Literal['modular', 'cocycle', 'smearing', 'construction', 'uniqueness',
                    'rn1', 'rn2', 'rn3', 'rigidity', 'testbed']
SUITES = get_args(SuiteName)

SHARED_BASIS_STREAM = 0

Entry = Union[float, Tuple[float, float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


class DiagSpec(StrictModel):
    kind: Literal['diag']
    values: List[List[PositiveFloat]]


class ExpGridSpec(StrictModel):
    """Diagonal exp(logs)"""
    kind: Literal['exp-grid']
    logs: List[List[float]]


class ScalarSpec(StrictModel):
    kind: Literal['scalar']
    value: PositiveFloat


class ExplicitSpec(StrictModel):
    kind: Literal['explicit']
    blocks: List[List[List[Entry]]]


class SpectralSpec(StrictModel):
    """Given eigenvalues in the scenario's shared seeded random basis, so all such specs commute"""
    kind: Literal['spectral']
    values: List[List[PositiveFloat]]


class RandomSpec(StrictModel):
    """Random positive element with log-spectrum in [-log_spread, log_spread], own seeded basis"""
    kind: Literal['random']
    log_spread: PositiveFloat = 1.0
    stream: PositiveInt = 1


class BalancedSpec(StrictModel):
    """diag(first, second) on the doubled blocks"""
    kind: Literal['balanced']
    parts: Tuple['MatrixSpec', 'MatrixSpec']


MatrixSpec = Annotated[
    Union[DiagSpec, ExpGridSpec, ScalarSpec, ExplicitSpec, SpectralSpec, RandomSpec, BalancedSpec],
    Field(discriminator='kind'),
]
BalancedSpec.model_rebuild()


class AlgebraSpec(StrictModel):
    blocks: List[PositiveInt]


class TestbedSpec(StrictModel):
    case: Literal['scalar', 'factor', 'central']
    N: PositiveInt = 256
    L_box: PositiveFloat = 16.0
    swapped: bool = False

    __test__ = False


class PairSpec(StrictModel):
    delta: MatrixSpec
    lambda_: MatrixSpec = Field(alias='lambda')
    mode: Literal['exact', 'approximate'] = EXACT


class Scenario(StrictModel):
    name: str
    description: Optional[str] = None
    seed: int = 0
    algebra: Optional[AlgebraSpec] = None
    testbed: Optional[TestbedSpec] = None
    weight: Optional[MatrixSpec] = None
    psi: Optional[MatrixSpec] = None
    pair: Optional[PairSpec] = None
    lambda0: Optional[PositiveFloat] = None
    suites: List[SuiteName] = Field(min_length=1)
    tolerances: Dict[str, PositiveFloat] = Field(default_factory=dict)
    expect: Dict[SuiteName, Literal['pass', 'fail']] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_layout(self) -> 'Scenario':
        if (self.algebra is None) == (self.testbed is None):
            raise ValueError("exactly one of 'algebra' and 'testbed' is required")
        if self.algebra is not None and self.weight is None:
            raise ValueError("'weight' is required with 'algebra'")
        if self.testbed is not None and (self.weight or self.psi or self.pair):
            raise ValueError("testbed scenarios take weight and pair from the case")
        needs_pair = {'smearing', 'construction', 'uniqueness', 'rn1', 'rigidity'}
        if self.algebra is not None and self.pair is None and needs_pair & set(self.suites):
            raise ValueError(f"suites {sorted(needs_pair & set(self.suites))} need 'pair'")
        needs_psi = {'cocycle', 'rn2', 'rn3'} & set(self.suites)
        if self.algebra is not None and needs_psi and self.psi is None and self.pair is None:
            raise ValueError(f"suites {sorted(needs_psi)} need 'psi' or 'pair'")
        if 'rigidity' in self.suites and self.lambda0 is None:
            raise ValueError("'rigidity' needs lambda0")
        if 'testbed' in self.suites and self.testbed is None:
            raise ValueError("'testbed' suite needs a testbed section")
        if self.testbed is not None and set(self.suites) - {'testbed', 'rn3'}:
            raise ValueError(f"testbed scenarios run only 'testbed' and 'rn3', got {self.suites}")
        if self.testbed is not None and 'rn3' in self.suites and self.testbed.case != 'scalar':
            raise ValueError("'rn3' on the testbed needs the 'scalar' case")
        if self.testbed is not None and self.testbed.swapped and self.testbed.case != 'scalar':
            raise ValueError("'swapped' weights need the 'scalar' case")
        return self


def parse_scenario_text(text: str, source: str = '<string>') -> Scenario:
    if not text.strip():
        raise ScenarioError("scenario file is empty", source)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", f"{source}:{e.lineno}:{e.colno}") from e
    try:
        return Scenario.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        where = '.'.join(str(p) for p in first['loc'])
        raise ScenarioError(f"{first['msg']} ({e.error_count()} error(s))", f"{source}:{where or '<root>'}") from e


def parse_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file; unknown keys are rejected"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}", str(path)) from e
    scenario = parse_scenario_text(text, str(path))
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def _entry(value: Entry) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


class MatrixResolver:
    """Turns matrix specs into positive elements of one algebra, drawing randomness from the seed"""

    def __init__(self, algebra: BlockAlgebra, seed: int):
        self.algebra = algebra
        self.seed = seed
        self._shared = None

    def _rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def shared_basis(self) -> List[np.ndarray]:
        if self._shared is None:
            rng = self._rng(SHARED_BASIS_STREAM)
            self._shared = [unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1, dtype=complex)
                            for n in self.algebra.block_dims]
        return self._shared

    def _check_lengths(self, values, what: str):
        dims = list(self.algebra.block_dims)
        if [len(v) for v in values] != dims:
            raise InvalidArgumentError(f"{what} lengths {[len(v) for v in values]} do not match blocks {dims}")

    def blocks(self, spec) -> List[np.ndarray]:
        if isinstance(spec, DiagSpec):
            self._check_lengths(spec.values, 'diag values')
            return [np.diag(np.asarray(v, dtype=complex)) for v in spec.values]
        if isinstance(spec, ExpGridSpec):
            self._check_lengths(spec.logs, 'exp-grid logs')
            return [np.diag(np.exp(np.asarray(v))).astype(complex) for v in spec.logs]
        if isinstance(spec, ScalarSpec):
            return [spec.value * np.eye(n, dtype=complex) for n in self.algebra.block_dims]
        if isinstance(spec, ExplicitSpec):
            blocks = [np.array([[_entry(x) for x in row] for row in b], dtype=complex) for b in spec.blocks]
            if [b.shape for b in blocks] != [(n, n) for n in self.algebra.block_dims]:
                raise InvalidArgumentError(f"explicit block shapes {[b.shape for b in blocks]} do not match algebra")
            return blocks
        if isinstance(spec, SpectralSpec):
            self._check_lengths(spec.values, 'spectral values')
            return [(u * np.asarray(v)) @ u.conj().T for u, v in zip(self.shared_basis(), spec.values)]
        if isinstance(spec, RandomSpec):
            rng = self._rng(spec.stream)
            out = []
            for n in self.algebra.block_dims:
                u = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1, dtype=complex)
                logs = rng.uniform(-spec.log_spread, spec.log_spread, size=n)
                out.append((u * np.exp(logs)) @ u.conj().T)
            return out
        if isinstance(spec, BalancedSpec):
            if any(n % 2 for n in self.algebra.block_dims):
                raise InvalidArgumentError("balanced specs need even block dimensions")
            half = MatrixResolver(build_algebra([n // 2 for n in self.algebra.block_dims]), self.seed)
            first, second = half.blocks(spec.parts[0]), half.blocks(spec.parts[1])
            return [sla.block_diag(a, b) for a, b in zip(first, second)]
        raise InvalidArgumentError(f"Unknown matrix spec {spec!r}")

    def positive(self, spec) -> PositiveElement:
        return PositiveElement.from_element(self.algebra.element(self.blocks(spec)))


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    algebra: BlockAlgebra
    phi: Weight
    psi: Optional[Weight]
    pair: Optional[InvariancePair]


def build_instance(scenario: Scenario) -> FiniteInstance:
    """
    Resolve the finite-dimensional part of a scenario.

    Raises:
        InvalidArgumentError: specs inconsistent with the algebra
        ModeViolation: exact-mode pair not certified
    """
    if scenario.algebra is None:
        raise InvalidArgumentError("build_instance needs an 'algebra' scenario")
    algebra = build_algebra(scenario.algebra.blocks)
    resolver = MatrixResolver(algebra, scenario.seed)
    phi = Weight(resolver.positive(scenario.weight))
    psi = Weight(resolver.positive(scenario.psi)) if scenario.psi is not None else None
    pair = None
    if scenario.pair is not None:
        pair = certify_pair(phi, resolver.positive(scenario.pair.delta), resolver.positive(scenario.pair.lambda_),
                            scenario.pair.mode)
    return FiniteInstance(algebra, phi, psi, pair)


def element_from_blocks(algebra: BlockAlgebra, blocks) -> AlgebraElement:
    """Nested-list blocks (with [re, im] entries) to an element"""
    return algebra.element([np.array([[_entry(x) for x in row] for row in b], dtype=complex) for b in blocks])


def element_to_blocks(x: AlgebraElement) -> List[List[List[Tuple[float, float]]]]:
    return [[[(float(v.real), float(v.imag)) for v in row] for row in b] for b in x.blocks]


class CocyclePathFile(StrictModel):
    """Sampled unitary path: per-node blocks on a strictly increasing t-grid containing 0"""
    blocks: List[PositiveInt]
    t_grid: List[float] = Field(min_length=1)
    samples: List[List[List[List[Entry]]]]

    @model_validator(mode='after')
    def check_lengths(self) -> 'CocyclePathFile':
        if len(self.samples) != len(self.t_grid):
            raise ValueError(f"{len(self.samples)} samples for {len(self.t_grid)} grid nodes")
        return self


def load_cocycle_path(path: Union[str, Path]) -> CocyclePath:
    """
    Read a cocycle path file.

    Raises:
        ScenarioError: unreadable or malformed file
        InvalidArgumentError: samples inconsistent with the declared blocks or grid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
        payload = CocyclePathFile.model_validate(json.loads(text))
    except OSError as e:
        raise ScenarioError(f"cannot read path file: {e}", str(path)) from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from e
    except ValidationError as e:
        first = e.errors()[0]
        raise ScenarioError(first['msg'], f"{path}:{'.'.join(str(p) for p in first['loc'])}") from e
    algebra = build_algebra(payload.blocks)
    samples = []
    for k, blocks in enumerate(payload.samples):
        if [len(b) for b in blocks] != list(algebra.block_dims):
            raise InvalidArgumentError(f"sample {k} block sizes do not match {list(algebra.block_dims)}")
        samples.append(element_from_blocks(algebra, blocks))
    logger.info(f"Loaded cocycle path with {len(samples)} nodes from {path}")
    return CocyclePath.from_samples(payload.t_grid, samples)
