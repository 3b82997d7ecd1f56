"""
Path-level cocycle algorithms: synthetic paths, generator fitting,
the bicharacter w(s,t) = u_t^* u_s^* u_{s+t}, flow commutation, the
eigenoperator lemma and scalar relative invariance.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from rnweights.algebra_core import (
    AlgebraElement,
    BlockAlgebra,
    Weight,
    centrality_defect,
    commutation_defect,
    hermitian_exp,
    unitarity_defect,
    unitary_log,
)
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, NumericalFailure
from rnweights.modular_engine import modular_flow

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = tuple(float(v) for v in np.linspace(-1.0, 1.0, 9))


def grid_key(t: float) -> float:
    return round(float(t), 9)


@dataclass(frozen=True, eq=False)
class CocyclePath:
    """
    One-parameter unitary family, in generator form u_t = exp(i(tD + t^2/2 L))
    with [D, L] = 0, or as samples on a strictly increasing grid containing 0.
    """
    algebra: BlockAlgebra
    D: Optional[AlgebraElement] = None
    L: Optional[AlgebraElement] = None
    t_grid: Tuple[float, ...] = ()
    samples: Tuple[AlgebraElement, ...] = ()

    @classmethod
    def from_generators(cls, D: AlgebraElement, L: AlgebraElement) -> 'CocyclePath':
        tol = get_config().TOL_PLUMBING
        for name, g in (('D', D), ('L', L)):
            if g.hermiticity_defect() > tol * max(1.0, g.norm()):
                raise InvalidArgumentError(f"Generator {name} is not Hermitian")
        defect = commutation_defect(D, L)
        if defect > tol * (1 + D.norm()) * (1 + L.norm()):
            raise InvalidArgumentError(f"Generators do not commute (defect {defect:.3e})")
        return cls(D.algebra, D=D, L=L)

    @classmethod
    def from_samples(cls, t_grid: Sequence[float], samples: Sequence[AlgebraElement]) -> 'CocyclePath':
        grid = tuple(float(t) for t in t_grid)
        if len(grid) != len(samples) or not grid:
            raise InvalidArgumentError("t_grid and samples must be nonempty and of equal length")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidArgumentError("t_grid must be strictly increasing")
        if not any(grid_key(t) == 0.0 for t in grid):
            raise InvalidArgumentError("t_grid must contain 0")
        for t, u in zip(grid, samples):
            if unitarity_defect(u) > get_config().TOL_EXACT:
                raise InvalidArgumentError(f"Sample at t={t} is not unitary")
        return cls(samples[0].algebra, t_grid=grid, samples=tuple(samples))

    @property
    def is_generator(self) -> bool:
        return self.D is not None

    @cached_property
    def _index(self) -> Dict[float, int]:
        return {grid_key(t): k for k, t in enumerate(self.t_grid)}

    def has(self, t: float) -> bool:
        return self.is_generator or grid_key(t) in self._index

    def at(self, t: float) -> AlgebraElement:
        if self.is_generator:
            return hermitian_exp(t * self.D + (t * t / 2) * self.L, 1j)
        if grid_key(t) not in self._index:
            raise InvalidArgumentError(f"Path has no sample at t={t}")
        return self.samples[self._index[grid_key(t)]]

    def sampled(self, t_grid: Sequence[float]) -> 'CocyclePath':
        return CocyclePath.from_samples(t_grid, [self.at(t) for t in t_grid])


def synth_path(D: AlgebraElement, L: AlgebraElement, t_grid: Sequence[float]) -> CocyclePath:
    """Samples of exp(i(tD + t^2/2 L)) for commuting Hermitian D, L"""
    return CocyclePath.from_generators(D, L).sampled(t_grid)


def _accumulated_logs(path: CocyclePath) -> List[AlgebraElement]:
    """
    Unwrapped -i Log(u_t) along the grid, stepping multiplicatively outwards from t = 0.
    """
    limit = get_config().BRANCH_SAFETY
    grid, samples = path.t_grid, path.samples
    k0 = path._index[0.0]
    logs: List[Optional[AlgebraElement]] = [None] * len(grid)
    logs[k0] = path.algebra.zeros()

    def step(k_from, k_to):
        inc = unitary_log(samples[k_to] @ samples[k_from].adjoint())
        spread = inc.norm()
        if spread > limit:
            raise NumericalFailure(
                "Grid too coarse for unambiguous phase unwrapping",
                {'t_from': grid[k_from], 't_to': grid[k_to], 'phase_spread': spread, 'limit': limit})
        logs[k_to] = logs[k_from] + inc

    for k in range(k0 + 1, len(grid)):
        step(k - 1, k)
    for k in range(k0 - 1, -1, -1):
        step(k + 1, k)
    return logs


@dataclass(frozen=True, eq=False)
class GeneratorFit:
    D: AlgebraElement
    L: AlgebraElement
    residual: float


def fit_generators(path: CocyclePath) -> GeneratorFit:
    """
    Least-squares fit of -i Log(u_t) = tD + (t^2/2) L over the sampled grid.

    Raises:
        InvalidArgumentError: generator-form path or fewer than two distinct nonzero nodes
        NumericalFailure: branch safety violated between neighbouring nodes
    """
    if path.is_generator:
        raise InvalidArgumentError("fit_generators needs a sampled path")
    nonzero = {grid_key(t) for t in path.t_grid if grid_key(t) != 0.0}
    if len(nonzero) < 2:
        raise InvalidArgumentError("Design is rank deficient: need at least two distinct nonzero nodes")

    logs = _accumulated_logs(path)
    t = np.asarray(path.t_grid)
    design = np.column_stack([t, t * t / 2])
    targets = np.vstack([g.to_vector() for g in logs])
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    D = path.algebra.from_vector(coef[0])
    L = path.algebra.from_vector(coef[1])
    D = 0.5 * (D + D.adjoint())
    L = 0.5 * (L + L.adjoint())
    residual = float(np.linalg.norm(design @ coef - targets))
    logger.debug(f"Fitted generators on {len(t)} nodes, residual {residual:.3e}")
    return GeneratorFit(D, L, residual)


@dataclass(frozen=True, eq=False)
class BicharacterTable:
    s_grid: Tuple[float, ...]
    t_grid: Tuple[float, ...]
    values: Tuple[Tuple[AlgebraElement, ...], ...]

    def w(self, s: float, t: float) -> AlgebraElement:
        i = [grid_key(v) for v in self.s_grid].index(grid_key(s))
        j = [grid_key(v) for v in self.t_grid].index(grid_key(t))
        return self.values[i][j]

    def cells(self) -> Iterable[Tuple[float, float, AlgebraElement]]:
        for i, s in enumerate(self.s_grid):
            for j, t in enumerate(self.t_grid):
                yield s, t, self.values[i][j]


def bicharacter(path: CocyclePath, s_grid: Sequence[float], t_grid: Sequence[float]) -> BicharacterTable:
    """Table of w(s,t) = u_t^* u_s^* u_{s+t}"""
    missing = sorted({grid_key(v) for s in s_grid for t in t_grid for v in (s, t, s + t) if not path.has(v)})
    if missing:
        raise InvalidArgumentError(f"Path is missing nodes needed for the table: {missing[:8]}")
    rows = []
    for s in s_grid:
        u_s = path.at(s)
        rows.append(tuple(path.at(t).adjoint() @ u_s.adjoint() @ path.at(s + t) for t in t_grid))
    return BicharacterTable(tuple(float(s) for s in s_grid), tuple(float(t) for t in t_grid), tuple(rows))


@dataclass(frozen=True)
class BicharacterResiduals:
    additivity_s: float
    additivity_t: float
    centrality: float


def bicharacter_residuals(table: BicharacterTable) -> BicharacterResiduals:
    """Multiplicativity of w in each variable and the centrality of every cell"""
    s_keys = {grid_key(s) for s in table.s_grid}
    t_keys = {grid_key(t) for t in table.t_grid}
    add_s = 0.0
    for s in table.s_grid:
        for s2 in table.s_grid:
            if grid_key(s + s2) not in s_keys:
                continue
            for t in table.t_grid:
                add_s = max(add_s, (table.w(s + s2, t) - table.w(s, t) @ table.w(s2, t)).norm())
    add_t = 0.0
    for t in table.t_grid:
        for t2 in table.t_grid:
            if grid_key(t + t2) not in t_keys:
                continue
            for s in table.s_grid:
                add_t = max(add_t, (table.w(s, t + t2) - table.w(s, t) @ table.w(s, t2)).norm())
    centrality = max(centrality_defect(w) for _, _, w in table.cells())
    return BicharacterResiduals(add_s, add_t, centrality)


@dataclass(frozen=True, eq=False)
class LambdaExtraction:
    generator: AlgebraElement
    consistency: float
    table_match: float


def extract_lambda(table: BicharacterTable) -> LambdaExtraction:
    """
    log lambda from w(1, t) = lambda^{it}, unwrapped along t, then checked
    against the s = 1/2 row and against every cell (lambda^{ist} = w(s,t)).
    """
    if 1.0 not in {grid_key(s) for s in table.s_grid} or 0.5 not in {grid_key(s) for s in table.s_grid}:
        raise InvalidArgumentError("Lambda extraction needs s = 1 and s = 1/2 in the table")
    row = CocyclePath.from_samples(table.t_grid, [table.w(1.0, t) for t in table.t_grid])
    logs = _accumulated_logs(row)
    t = np.asarray(table.t_grid)
    targets = np.vstack([g.to_vector() for g in logs])
    coef, *_ = np.linalg.lstsq(t[:, None], targets, rcond=None)
    gen = row.algebra.from_vector(coef[0])
    gen = 0.5 * (gen + gen.adjoint())
    consistency = max((table.w(0.5, tt) - hermitian_exp(gen, 0.5j * tt)).norm() for tt in table.t_grid)
    table_match = max((w - hermitian_exp(gen, 1j * s * tt)).norm() for s, tt, w in table.cells())
    return LambdaExtraction(gen, consistency, table_match)


def v_group_residual(path: CocyclePath, log_lambda: AlgebraElement,
                     s_grid: Sequence[float], t_grid: Sequence[float]) -> float:
    """max ||v_{s+t} - v_s v_t|| for v_t = lambda^{-it^2/2} u_t"""
    def v(t):
        return hermitian_exp(log_lambda, -0.5j * t * t) @ path.at(t)
    return max((v(s + t) - v(s) @ v(t)).norm() for s in s_grid for t in t_grid)


def flows_commute_residual(phi: Weight, psi: Weight, s: float, t: float,
                           probes: Optional[Iterable[AlgebraElement]] = None) -> float:
    """max over probes of ||sigma_t^psi(sigma_s^phi(x)) - sigma_s^phi(sigma_t^psi(x))||"""
    probes = phi.algebra.basis() if probes is None else probes
    return max((modular_flow(psi, t, modular_flow(phi, s, x)) - modular_flow(phi, s, modular_flow(psi, t, x))).norm()
               for x in probes)


def eigenoperator_residual(phi: Weight, a: AlgebraElement, lambda0: float,
                           t_grid: Sequence[float] = DEFAULT_T_GRID) -> Tuple[float, float]:
    """
    (max_x |phi(ax) - lambda0 phi(xa)|, max_t ||sigma_t(a) - lambda0^{it} a||)
    """
    if lambda0 <= 0:
        raise InvalidArgumentError(f"lambda0 must be positive, got {lambda0}")
    weight_side = max(abs(phi(a @ x) - lambda0 * phi(x @ a)) for x in phi.algebra.basis())
    flow_side = max((modular_flow(phi, t, a) - lambda0 ** (1j * t) * a).norm() for t in t_grid)
    return float(weight_side), float(flow_side)


def scalar_invariance_residual(phi: Weight, psi: Weight, lambda0: float, t: float,
                               probes: Optional[Sequence[AlgebraElement]] = None) -> Tuple[float, float]:
    """
    r1 = max_x |phi(sigma_t^psi(x)) - lambda0^t phi(x)|,
    r2 = max_x |psi(sigma_t^phi(x)) - lambda0^{-t} psi(x)|
    """
    if lambda0 <= 0:
        raise InvalidArgumentError(f"lambda0 must be positive, got {lambda0}")
    probes = list(phi.algebra.basis()) if probes is None else probes
    r1 = max(abs(phi(modular_flow(psi, t, x)) - lambda0 ** t * phi(x)) for x in probes)
    r2 = max(abs(psi(modular_flow(phi, t, x)) - lambda0 ** (-t) * psi(x)) for x in probes)
    return float(r1), float(r2)
