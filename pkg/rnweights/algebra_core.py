"""
Finite-dimensional von Neumann algebras as direct sums of full matrix blocks.

Holds the algebra/element/positive-element types, Hermitian matrix functions
(complex powers through the eigendecomposition of the logarithm), weights given
by densities, and the relative invariance pair (delta, lambda).
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, ModeViolation

logger = logging.getLogger(__name__)

EXACT = 'exact'
APPROXIMATE = 'approximate'
MODES = (EXACT, APPROXIMATE)

DEFAULT_CERTIFY_GRID = tuple(float(v) for v in np.linspace(-2.0, 2.0, 9))


@dataclass(frozen=True)
class BlockAlgebra:
    """Direct sum M = M_{n_1} + ... + M_{n_B}; block order is significant"""
    block_dims: Tuple[int, ...]

    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def total_dim(self) -> int:
        return sum(n * n for n in self.block_dims)

    @property
    def centre_dim(self) -> int:
        return len(self.block_dims)

    def element(self, blocks: Sequence) -> 'AlgebraElement':
        return AlgebraElement(self, tuple(np.asarray(b, dtype=complex) for b in blocks))

    def zeros(self) -> 'AlgebraElement':
        return self.element([np.zeros((n, n)) for n in self.block_dims])

    def identity(self) -> 'AlgebraElement':
        return self.element([np.eye(n) for n in self.block_dims])

    def scalar(self, value: complex) -> 'AlgebraElement':
        return self.element([value * np.eye(n) for n in self.block_dims])

    def diag(self, values: Sequence[Sequence[complex]]) -> 'AlgebraElement':
        """Element with the given diagonal per block"""
        if len(values) != self.num_blocks:
            raise InvalidArgumentError(f"Expected {self.num_blocks} diagonals, got {len(values)}")
        blocks = []
        for n, vals in zip(self.block_dims, values):
            if len(vals) != n:
                raise InvalidArgumentError(f"Diagonal of length {len(vals)} for block of size {n}")
            blocks.append(np.diag(np.asarray(vals, dtype=complex)))
        return self.element(blocks)

    def matrix_unit(self, block: int, i: int, j: int) -> 'AlgebraElement':
        blocks = [np.zeros((n, n), dtype=complex) for n in self.block_dims]
        blocks[block][i, j] = 1.0
        return self.element(blocks)

    def basis(self) -> Iterator['AlgebraElement']:
        """Matrix units e_ij of every block, in declaration order"""
        for k, n in enumerate(self.block_dims):
            for i in range(n):
                for j in range(n):
                    yield self.matrix_unit(k, i, j)

    def from_vector(self, vec: np.ndarray) -> 'AlgebraElement':
        """Inverse of AlgebraElement.to_vector (row-major per block)"""
        blocks, offset = [], 0
        for n in self.block_dims:
            blocks.append(np.asarray(vec[offset:offset + n * n]).reshape(n, n))
            offset += n * n
        return self.element(blocks)


def build_algebra(block_dims: Sequence[int]) -> BlockAlgebra:
    """Validate block dimensions and build the algebra"""
    dims = tuple(block_dims)
    if not dims:
        raise InvalidArgumentError("block_dims must be a nonempty list")
    if any(int(n) != n or n < 1 for n in dims):
        raise InvalidArgumentError(f"Every block dimension must be a positive integer, got {list(dims)}")
    return BlockAlgebra(tuple(int(n) for n in dims))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    algebra: BlockAlgebra
    blocks: Tuple[np.ndarray, ...]

    # numpy scalars defer to __rmul__ instead of broadcasting over the element
    __array_ufunc__ = None

    def __post_init__(self):
        if len(self.blocks) != self.algebra.num_blocks:
            raise InvalidArgumentError(
                f"Element has {len(self.blocks)} blocks, algebra has {self.algebra.num_blocks}")
        for n, b in zip(self.algebra.block_dims, self.blocks):
            if b.shape != (n, n):
                raise InvalidArgumentError(f"Block of shape {b.shape} where ({n}, {n}) was expected")

    def _check_same(self, other: 'AlgebraElement'):
        if other.algebra.block_dims != self.algebra.block_dims:
            raise InvalidArgumentError(
                f"Algebra mismatch: {self.algebra.block_dims} vs {other.algebra.block_dims}")

    def _map(self, fn) -> 'AlgebraElement':
        return AlgebraElement(self.algebra, tuple(fn(b) for b in self.blocks))

    def _zip(self, other: 'AlgebraElement', fn) -> 'AlgebraElement':
        self._check_same(other)
        return AlgebraElement(self.algebra, tuple(fn(a, b) for a, b in zip(self.blocks, other.blocks)))

    def __add__(self, other):
        return self._zip(other, np.add)

    def __sub__(self, other):
        return self._zip(other, np.subtract)

    def __neg__(self):
        return self._map(np.negative)

    def __matmul__(self, other):
        return self._zip(other, np.matmul)

    def __mul__(self, scalar):
        if isinstance(scalar, AlgebraElement):
            raise TypeError("Use @ for the algebra product")
        return self._map(lambda b: scalar * b)

    __rmul__ = __mul__

    def adjoint(self) -> 'AlgebraElement':
        return self._map(lambda b: b.conj().T)

    @property
    def H(self) -> 'AlgebraElement':
        return self.adjoint()

    def norm(self) -> float:
        """Operator norm: max over blocks of the largest singular value"""
        return max(float(np.linalg.norm(b, 2)) for b in self.blocks)

    def hs_norm(self) -> float:
        """Hilbert-Schmidt norm, the norm of the element as a GNS vector"""
        return float(np.sqrt(sum(np.vdot(b, b).real for b in self.blocks)))

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self.blocks))

    def inner(self, other: 'AlgebraElement') -> complex:
        """<self, other> = sum_k trace(other_k^* self_k)"""
        self._check_same(other)
        return complex(sum(np.vdot(b, a) for a, b in zip(self.blocks, other.blocks)))

    def hermiticity_defect(self) -> float:
        return max(float(np.linalg.norm(b - b.conj().T, 2)) for b in self.blocks)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Act on C^n for a single-block algebra (testbed probes)"""
        if self.algebra.num_blocks == 1:
            return self.blocks[0] @ vec
        return sla.block_diag(*self.blocks) @ vec

    def dense(self) -> np.ndarray:
        return sla.block_diag(*self.blocks)


def _hermitian_part(block: np.ndarray, tol_herm: float) -> np.ndarray:
    """Symmetrize (a + a*)/2 when the Hermiticity defect is within tolerance"""
    scale = float(np.linalg.norm(block, 2))
    defect = float(np.linalg.norm(block - block.conj().T, 2))
    if defect > tol_herm * max(scale, np.finfo(float).tiny):
        raise InvalidArgumentError(
            f"Block is not Hermitian: defect {defect:.3e} exceeds {tol_herm:.1e} relative to norm {scale:.3e}")
    return (block + block.conj().T) / 2


@dataclass(frozen=True, eq=False)
class PositiveElement:
    """
    Positive definite element stored through the spectral data of its logarithm.

    Every power h^z is exp(z log h) evaluated blockwise, which keeps imaginary
    powers exactly unitary even when h itself is badly conditioned.
    """
    algebra: BlockAlgebra
    log_spectra: Tuple[Tuple[np.ndarray, np.ndarray], ...] = field(repr=False)

    @classmethod
    def from_element(cls, a: AlgebraElement, tol_herm: Optional[float] = None) -> 'PositiveElement':
        tol_herm = get_config().TOL_HERM if tol_herm is None else tol_herm
        spectra = []
        for k, block in enumerate(a.blocks):
            w, v = np.linalg.eigh(_hermitian_part(block, tol_herm))
            if w[0] <= 0:
                raise InvalidArgumentError(
                    f"Element is not positive definite: block {k} has eigenvalue {w[0]:.3e}")
            spectra.append((np.log(w), v))
        return cls(a.algebra, tuple(spectra))

    @classmethod
    def from_log(cls, generator: AlgebraElement, tol_herm: Optional[float] = None) -> 'PositiveElement':
        """exp(L) for a Hermitian generator L"""
        tol_herm = get_config().TOL_HERM if tol_herm is None else tol_herm
        spectra = []
        for block in generator.blocks:
            w, v = np.linalg.eigh(_hermitian_part(block, tol_herm))
            spectra.append((w, v))
        return cls(generator.algebra, tuple(spectra))

    @classmethod
    def from_blocks(cls, algebra: BlockAlgebra, blocks: Sequence) -> 'PositiveElement':
        return cls.from_element(algebra.element(blocks))

    def spectral_function(self, fn) -> AlgebraElement:
        """fn applied to the eigenvalues of log h, blockwise"""
        blocks = tuple((v * fn(w)) @ v.conj().T for w, v in self.log_spectra)
        return AlgebraElement(self.algebra, blocks)

    @cached_property
    def element(self) -> AlgebraElement:
        return self.spectral_function(np.exp)

    @cached_property
    def log(self) -> AlgebraElement:
        return self.spectral_function(lambda w: w.astype(complex))

    @property
    def spectral_floor(self) -> float:
        return float(np.exp(min(w[0] for w, _ in self.log_spectra)))

    def log_norm(self) -> float:
        return max(float(np.max(np.abs(w))) for w, _ in self.log_spectra)

    def norm(self) -> float:
        return float(np.exp(max(w[-1] for w, _ in self.log_spectra)))

    def power(self, z: complex) -> AlgebraElement:
        return self.spectral_function(lambda w: np.exp(z * w))


def mat_power(h: PositiveElement, z: complex) -> AlgebraElement:
    """h^z = exp(z log h); unitary for purely imaginary z"""
    if not isinstance(h, PositiveElement):
        raise InvalidArgumentError("mat_power needs a PositiveElement; wrap the matrix with PositiveElement.from_element")
    return h.power(z)


def hermitian_exp(generator: AlgebraElement, z: complex) -> AlgebraElement:
    """exp(z G) for Hermitian G"""
    return PositiveElement.from_log(generator).power(z)


def centre_projectors(algebra: BlockAlgebra) -> List[AlgebraElement]:
    """Minimal central projections, one per block"""
    projectors = []
    for k in range(algebra.num_blocks):
        blocks = [np.eye(n) if j == k else np.zeros((n, n)) for j, n in enumerate(algebra.block_dims)]
        projectors.append(algebra.element(blocks))
    return projectors


def commutation_defect(a: AlgebraElement, b: AlgebraElement) -> float:
    """||ab - ba|| in operator norm"""
    if a.algebra.block_dims != b.algebra.block_dims:
        raise InvalidArgumentError(f"Shape mismatch: {a.algebra.block_dims} vs {b.algebra.block_dims}")
    return (a @ b - b @ a).norm()


def centrality_defect(x: AlgebraElement) -> float:
    """
    max over matrix units e_ij of ||[x, e_ij]||.

    [x, e_ij] = u e_j^T - e_i v^T with u the i-th column and v the j-th row of
    x, a rank-two matrix whose norm comes from a 2x2 Gram product, so the sweep
    costs O(n^2) per block instead of O(n^4).
    """
    worst = 0.0
    for block in x.blocks:
        diag = np.diag(block)
        col2 = np.sum(np.abs(block) ** 2, axis=0)
        row2 = np.sum(np.abs(block) ** 2, axis=1)
        a = col2[:, None]
        b = row2[None, :]
        ui = diag[:, None]
        vj = diag[None, :]
        tr = a + b - 2.0 * np.real(np.conj(ui) * vj)
        det = (a - np.abs(ui) ** 2) * (b - np.abs(vj) ** 2)
        lam_max = tr / 2 + np.sqrt(np.maximum(tr ** 2 / 4 - det, 0.0))
        worst = max(worst, float(np.sqrt(np.max(np.maximum(lam_max, 0.0)))))
    return worst


def unitary_log(u: AlgebraElement) -> AlgebraElement:
    """Hermitian G with u = exp(iG), principal branch, via the complex Schur form"""
    blocks = []
    for block in u.blocks:
        t, z = sla.schur(block, output='complex')
        phases = np.angle(np.diag(t))
        g = (z * phases) @ z.conj().T
        blocks.append((g + g.conj().T) / 2)
    return u.algebra.element(blocks)


def unitarity_defect(u: AlgebraElement) -> float:
    return (u.H @ u - u.algebra.identity()).norm()


@dataclass(frozen=True, eq=False)
class Weight:
    """phi(x) = sum_k trace(h_k x_k) for a positive definite density h"""
    density: PositiveElement

    @property
    def algebra(self) -> BlockAlgebra:
        return self.density.algebra

    @classmethod
    def from_density(cls, h: AlgebraElement) -> 'Weight':
        try:
            return cls(PositiveElement.from_element(h))
        except InvalidArgumentError as e:
            raise InvalidArgumentError(f"Weight is not faithful: {e}") from e

    @classmethod
    def trace(cls, algebra: BlockAlgebra) -> 'Weight':
        return cls.from_density(algebra.identity())

    def __call__(self, x: AlgebraElement) -> complex:
        return (self.density.element @ x).trace()


@dataclass(frozen=True, eq=False)
class InvariancePair:
    """(delta, lambda) with sigma_t(delta^{is}) = lambda^{ist} delta^{is}, residual certified on a grid"""
    delta: PositiveElement
    lambda_: PositiveElement
    invariance_residual: float
    mode: str = EXACT
    s_grid: Tuple[float, ...] = DEFAULT_CERTIFY_GRID
    t_grid: Tuple[float, ...] = DEFAULT_CERTIFY_GRID

    @property
    def algebra(self) -> BlockAlgebra:
        return self.delta.algebra


def relative_invariance_residual(phi: Weight, pair: InvariancePair, s: float, t: float) -> float:
    """||h^{it} delta^{is} h^{-it} - lambda^{ist} delta^{is}||"""
    h = phi.density
    if h.algebra.block_dims != pair.algebra.block_dims:
        raise InvalidArgumentError("Weight and pair live in different algebras")
    delta_is = mat_power(pair.delta, 1j * s)
    lhs = mat_power(h, 1j * t) @ delta_is @ mat_power(h, -1j * t)
    rhs = mat_power(pair.lambda_, 1j * s * t) @ delta_is
    return (lhs - rhs).norm()


def certify_pair(phi: Weight, delta: PositiveElement, lambda_: PositiveElement, mode: str = EXACT,
                 s_grid: Sequence[float] = DEFAULT_CERTIFY_GRID,
                 t_grid: Sequence[float] = DEFAULT_CERTIFY_GRID,
                 residual: Optional[float] = None) -> InvariancePair:
    """
    Measure the relative invariance residual over the grid and build the pair.

    Args:
        residual: precomputed residual (the testbed measures it on probes)

    Raises:
        InvalidArgumentError: delta and lambda do not commute
        ModeViolation: exact mode with lambda != 1 or a residual above the exact tolerance
    """
    cfg = get_config()
    if mode not in MODES:
        raise InvalidArgumentError(f"Unknown mode '{mode}'. Valid: {', '.join(MODES)}")
    log_d, log_l = delta.log, lambda_.log
    defect = commutation_defect(log_d, log_l)
    if defect > cfg.TOL_PLUMBING * (1 + log_d.norm()) * (1 + log_l.norm()):
        raise InvalidArgumentError(f"delta and lambda do not commute (defect {defect:.3e})")

    if mode == EXACT and lambda_.log_norm() > cfg.EXACT_LOG_LAMBDA_MAX:
        raise ModeViolation(
            f"Exact mode needs lambda = 1 (||log lambda|| = {lambda_.log_norm():.3e}): "
            "bounded conjugation orbits force the invariance factor to 1 in finite dimensions")

    if residual is None:
        residual = max(relative_invariance_residual(phi, InvariancePair(delta, lambda_, 0.0, mode), s, t)
                       for s in s_grid for t in t_grid)
    if mode == EXACT and residual > cfg.TOL_EXACT:
        raise ModeViolation(f"Relative invariance residual {residual:.3e} exceeds exact tolerance {cfg.TOL_EXACT:.1e}")

    logger.debug(f"Certified {mode} pair with invariance residual {residual:.3e}")
    return InvariancePair(delta, lambda_, float(residual), mode, tuple(s_grid), tuple(t_grid))


def rigidity_witness(phi: Weight, pair: InvariancePair, s_values: Sequence[float] = (1.0,),
                     t_values: Optional[Sequence[float]] = None) -> Tuple[float, Tuple[float, float]]:
    """
    Largest relative invariance residual over t in [0, 10].

    In a matrix algebra h^{it} delta^{is} h^{-it} keeps the spectrum of delta^{is}
    while lambda^{ist} delta^{is} rotates it, so any lambda != 1 shows up here.
    """
    t_values = np.linspace(0.0, 10.0, 201) if t_values is None else t_values
    worst, where = -1.0, (0.0, 0.0)
    for s in s_values:
        for t in t_values:
            r = relative_invariance_residual(phi, pair, float(s), float(t))
            if r > worst:
                worst, where = r, (float(s), float(t))
    return worst, where
