"""
Modular theory of finite-dimensional weights.

GNS vectors are algebra-shaped arrays with <xi, eta> = sum_k trace(eta_k^* xi_k).
For phi = trace(h .) the GNS map is a -> a h^{1/2}, J xi = xi^*, and
Delta^z xi = h^z xi h^{-z}; every analytic continuation is a plain matrix power.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import linalg as sla

from rnweights.algebra_core import (
    AlgebraElement,
    BlockAlgebra,
    PositiveElement,
    Weight,
    build_algebra,
    mat_power,
)
from rnweights.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """
    Map on GNS vectors in factored form xi -> left . c(xi) . right,
    where c is the adjoint when `conjugate` is set (antilinear) and the identity otherwise.
    """
    left: AlgebraElement
    right: AlgebraElement
    conjugate: bool = False

    @classmethod
    def identity(cls, algebra: BlockAlgebra) -> 'Superoperator':
        one = algebra.identity()
        return cls(one, one, False)

    @classmethod
    def conjugation(cls, algebra: BlockAlgebra) -> 'Superoperator':
        one = algebra.identity()
        return cls(one, one, True)

    @classmethod
    def left_multiplication(cls, a: AlgebraElement) -> 'Superoperator':
        return cls(a, a.algebra.identity(), False)

    @classmethod
    def right_multiplication(cls, a: AlgebraElement) -> 'Superoperator':
        return cls(a.algebra.identity(), a, False)

    def __call__(self, xi: AlgebraElement) -> AlgebraElement:
        x = xi.adjoint() if self.conjugate else xi
        return self.left @ x @ self.right

    def __matmul__(self, other: 'Superoperator') -> 'Superoperator':
        """Composition self o other"""
        if not self.conjugate:
            return Superoperator(self.left @ other.left, other.right @ self.right, other.conjugate)
        return Superoperator(self.left @ other.right.adjoint(), other.left.adjoint() @ self.right,
                             not other.conjugate)

    def dense(self) -> np.ndarray:
        """
        Matrix D on the row-major vectorization such that
        vec(self(xi)) = D @ vec(xi), or D @ conj(vec(xi)) when antilinear.
        """
        mats = []
        for lb, rb in zip(self.left.blocks, self.right.blocks):
            n = lb.shape[0]
            m = np.kron(lb, rb.T)
            if self.conjugate:
                # vec(xi^*) = P conj(vec(xi)) with P the transpose permutation
                perm = np.arange(n * n).reshape(n, n).T.reshape(-1)
                m = m[:, perm]
            mats.append(m)
        return sla.block_diag(*mats)

    def apply_dense(self, xi: AlgebraElement) -> AlgebraElement:
        vec = xi.to_vector()
        if self.conjugate:
            vec = np.conj(vec)
        return xi.algebra.from_vector(self.dense() @ vec)


@dataclass(frozen=True, eq=False)
class GnsRealization:
    weight: Weight

    @property
    def algebra(self) -> BlockAlgebra:
        return self.weight.algebra

    def lambda_map(self, a: AlgebraElement) -> AlgebraElement:
        return a @ mat_power(self.weight.density, 0.5)

    def inner(self, xi: AlgebraElement, eta: AlgebraElement) -> complex:
        return xi.inner(eta)

    @property
    def J(self) -> Superoperator:
        return Superoperator.conjugation(self.algebra)

    def delta_power(self, z: complex) -> Superoperator:
        h = self.weight.density
        return Superoperator(mat_power(h, z), mat_power(h, -z))

    @property
    def Delta(self) -> Superoperator:
        return self.delta_power(1.0)

    @property
    def S(self) -> Superoperator:
        return self.J @ self.delta_power(0.5)


def gns(phi: Weight) -> GnsRealization:
    """GNS realization of a faithful weight"""
    if phi.density.spectral_floor <= 0:
        raise InvalidArgumentError("Weight is not faithful")
    return GnsRealization(phi)


def modular_flow(phi: Weight, z: complex, x: AlgebraElement) -> AlgebraElement:
    """sigma_z(x) = h^{iz} x h^{-iz}, entire in z"""
    h = phi.density
    return mat_power(h, 1j * z) @ x @ mat_power(h, -1j * z)


def kms_residual(phi: Weight, x: AlgebraElement, y: AlgebraElement) -> float:
    """|phi(x sigma_{-i}(y)) - phi(y x)|"""
    return abs(phi(x @ modular_flow(phi, -1j, y)) - phi(y @ x))


def _check_same_algebra(phi: Weight, psi: Weight):
    if phi.algebra.block_dims != psi.algebra.block_dims:
        raise InvalidArgumentError(
            f"Weights live in different algebras: {phi.algebra.block_dims} vs {psi.algebra.block_dims}")


def balanced_weight(phi: Weight, psi: Weight) -> Weight:
    """Weight on M_2(M) with density diag(h_phi, h_psi), assembled from the spectral data"""
    _check_same_algebra(phi, psi)
    algebra = build_algebra([2 * n for n in phi.algebra.block_dims])
    spectra = []
    for (w1, v1), (w2, v2) in zip(phi.density.log_spectra, psi.density.log_spectra):
        spectra.append((np.concatenate([w1, w2]), sla.block_diag(v1, v2)))
    return Weight(PositiveElement(algebra, tuple(spectra)))


def lower_left_unit(algebra: BlockAlgebra) -> AlgebraElement:
    """e_21 (x) 1 inside M_2(M)"""
    blocks = []
    for n2 in algebra.block_dims:
        n = n2 // 2
        b = np.zeros((n2, n2), dtype=complex)
        b[n:, :n] = np.eye(n)
        blocks.append(b)
    return algebra.element(blocks)


def balanced_corner(theta: Weight, base: BlockAlgebra, t: float) -> AlgebraElement:
    """Lower-left corner of sigma_t^theta(e_21 (x) 1)"""
    moved = modular_flow(theta, t, lower_left_unit(theta.algebra))
    blocks = []
    for n, b in zip(base.block_dims, moved.blocks):
        blocks.append(b[n:, :n])
    return base.element(blocks)


def connes_cocycle(psi: Weight, phi: Weight, t: float) -> AlgebraElement:
    """[D psi : D phi]_t = h_psi^{it} h_phi^{-it}"""
    _check_same_algebra(phi, psi)
    return mat_power(psi.density, 1j * t) @ mat_power(phi.density, -1j * t)


def balanced_cocycle_residual(psi: Weight, phi: Weight, t: float) -> float:
    """Distance between connes_cocycle and the balanced-weight corner"""
    theta = balanced_weight(phi, psi)
    return (connes_cocycle(psi, phi, t) - balanced_corner(theta, phi.algebra, t)).norm()


def cocycle_chain_residual(psi: Weight, phi: Weight, s: float, t: float) -> float:
    """||u_{t+s} - u_t sigma_t^phi(u_s)||"""
    u_s = connes_cocycle(psi, phi, s)
    return (connes_cocycle(psi, phi, t + s) - connes_cocycle(psi, phi, t) @ modular_flow(phi, t, u_s)).norm()


def cocycle_inverse_residual(psi: Weight, phi: Weight, t: float) -> float:
    """||u_{-t} - sigma_{-t}^phi(u_t^*)||"""
    u_t = connes_cocycle(psi, phi, t)
    return (connes_cocycle(psi, phi, -t) - modular_flow(phi, -t, u_t.adjoint())).norm()


def intertwining_residual(psi: Weight, phi: Weight, t: float,
                          probes: Optional[Iterable[AlgebraElement]] = None) -> float:
    """max over probes x of ||sigma_t^psi(x) - u_t sigma_t^phi(x) u_t^*||"""
    u_t = connes_cocycle(psi, phi, t)
    probes = phi.algebra.basis() if probes is None else probes
    return max((modular_flow(psi, t, x) - u_t @ modular_flow(phi, t, x) @ u_t.adjoint()).norm()
               for x in probes)
