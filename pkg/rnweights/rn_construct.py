"""
The weight phi_delta = phi(delta^{1/2} . delta^{1/2}) and its modular data.

On GNS vectors (algebra-shaped arrays) the operator J a J acts as right
multiplication by a^*, so every formula below is a Superoperator built from
left/right multipliers. Complex parameters are handled by analytic
continuation, which is a plain matrix power at finite dimension.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from rnweights.algebra_core import (
    EXACT,
    MODES,
    AlgebraElement,
    InvariancePair,
    PositiveElement,
    Weight,
    commutation_defect,
    hermitian_exp,
    mat_power,
    unitary_log,
)
from rnweights.cocycle_analysis import CocyclePath, grid_key
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, ModeViolation
from rnweights.modular_engine import Superoperator, connes_cocycle, gns, modular_flow
from rnweights.smearing import smear_element

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConstructedWeight:
    base: Weight
    pair: InvariancePair
    density: PositiveElement
    mode: str

    @property
    def weight(self) -> Weight:
        return Weight(self.density)

    def lambda_prime_map(self, a: AlgebraElement) -> AlgebraElement:
        """Lambda'(a) = a . density^{1/2}"""
        return a @ mat_power(self.density, 0.5)

    def gamma_map(self, a: AlgebraElement) -> AlgebraElement:
        """Gamma(a) = Lambda(a delta^{1/2}) = a delta^{1/2} h^{1/2}"""
        return gns(self.base).lambda_map(a @ mat_power(self.pair.delta, 0.5))


def construct_weight(phi: Weight, pair: InvariancePair, mode: Optional[str] = None,
                     density_log: Optional[AlgebraElement] = None) -> ConstructedWeight:
    """
    Build phi_delta with density delta^{1/2} h delta^{1/2}.

    Args:
        mode: defaults to the pair's mode
        density_log: Hermitian logarithm of the density, used instead of the
            product when the product is too ill-conditioned to diagonalize
            (approximate mode only)

    Raises:
        ModeViolation: exact mode with lambda != 1 or h, delta not commuting
    """
    cfg = get_config()
    mode = mode or pair.mode
    if mode not in MODES:
        raise InvalidArgumentError(f"Unknown mode '{mode}'")
    if mode == EXACT:
        if pair.lambda_.log_norm() > cfg.EXACT_LOG_LAMBDA_MAX:
            raise ModeViolation(
                f"Exact construction needs lambda = 1, got ||log lambda|| = {pair.lambda_.log_norm():.3e} "
                "(finite-dimensional rigidity)")
        defect = commutation_defect(phi.density.log, pair.delta.log)
        if defect > cfg.TOL_EXACT * (1 + phi.density.log_norm()) * (1 + pair.delta.log_norm()):
            raise ModeViolation(f"Exact construction needs [h, delta] = 0, defect {defect:.3e}")
        if density_log is not None:
            raise InvalidArgumentError("density_log is only accepted in approximate mode")

    if density_log is not None:
        density = PositiveElement.from_log(density_log)
    else:
        root = mat_power(pair.delta, 0.5)
        product = root @ phi.density.element @ root
        density = PositiveElement.from_element(0.5 * (product + product.adjoint()))
    return ConstructedWeight(phi, pair, density, mode)


def limit_formula_residual(phi: Weight, pair: InvariancePair, x: AlgebraElement, n: int,
                           constructed: Optional[ConstructedWeight] = None) -> float:
    """|phi((delta^{1/2} e_n) x (delta^{1/2} e_n)) - phi_delta(x)| for positive x"""
    cfg = get_config()
    if x.hermiticity_defect() > cfg.TOL_HERM * max(1.0, x.norm()):
        raise InvalidArgumentError("x must be positive (it is not Hermitian)")
    if min(float(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[0]) for b in x.blocks) < -cfg.TOL_PLUMBING * max(1.0, x.norm()):
        raise InvalidArgumentError("x must be positive")
    constructed = constructed or construct_weight(phi, pair)
    cut = mat_power(pair.delta, 0.5) @ smear_element(pair, n).value
    return abs(phi(cut @ x @ cut) - constructed.weight(x))


def _a_factor(pair: InvariancePair, s: complex) -> AlgebraElement:
    """lambda^{is^2/2} delta^{is}, entire in s"""
    return mat_power(pair.lambda_, 0.5j * s * s) @ mat_power(pair.delta, 1j * s)


def _j_sandwich(a: AlgebraElement) -> Superoperator:
    """J a J acting on GNS vectors"""
    return Superoperator.right_multiplication(a.adjoint())


def u_group(phi: Weight, pair: InvariancePair, s: float) -> Superoperator:
    """u_s = J lambda^{is^2/2} delta^{is} J . lambda^{is^2/2} delta^{is} . Delta^{is}"""
    a_s = _a_factor(pair, s)
    return _j_sandwich(a_s) @ Superoperator.left_multiplication(a_s) @ gns(phi).delta_power(1j * s)


def delta_prime_power(phi: Weight, pair: InvariancePair, z: complex) -> Superoperator:
    """
    Delta'^z xi = lambda^{-iz^2/2} delta^z h^z . xi . h^{-z} delta^{-z} lambda^{iz^2/2},
    the continuation of u_s at s = -iz.
    """
    h, d, lam = phi.density, pair.delta, pair.lambda_
    left = mat_power(lam, -0.5j * z * z) @ mat_power(d, z) @ mat_power(h, z)
    right = mat_power(h, -z) @ mat_power(d, -z) @ mat_power(lam, 0.5j * z * z)
    return Superoperator(left, right)


def delta_prime_closure(phi: Weight, pair: InvariancePair, r: float) -> Superoperator:
    """J lambda^{-ir^2/2} J . lambda^{-ir^2/2} . J delta^{-r} J . delta^r . Delta^r"""
    lam_r = mat_power(pair.lambda_, -0.5j * r * r)
    return (_j_sandwich(lam_r)
            @ Superoperator.left_multiplication(lam_r)
            @ _j_sandwich(mat_power(pair.delta, -r))
            @ Superoperator.left_multiplication(mat_power(pair.delta, r))
            @ gns(phi).delta_power(r))


def j_prime(phi: Weight, pair: InvariancePair) -> Superoperator:
    """J' = J lambda^{-i/8} J lambda^{i/8} J"""
    J = gns(phi).J
    return (J @ Superoperator.left_multiplication(mat_power(pair.lambda_, -0.125j))
            @ J @ Superoperator.left_multiplication(mat_power(pair.lambda_, 0.125j)) @ J)


def s_prime(phi: Weight, pair: InvariancePair) -> Superoperator:
    return j_prime(phi, pair) @ delta_prime_power(phi, pair, 0.5)


def s_prime_residual(phi: Weight, pair: InvariancePair, a: AlgebraElement,
                     constructed: Optional[ConstructedWeight] = None) -> float:
    """||S' Gamma(a) - Gamma(a^*)||"""
    constructed = constructed or construct_weight(phi, pair)
    lhs = s_prime(phi, pair)(constructed.gamma_map(a))
    return (lhs - constructed.gamma_map(a.adjoint())).hs_norm()


def sigma_prime_flow(phi: Weight, pair: InvariancePair, s: float, x: AlgebraElement) -> AlgebraElement:
    """sigma'_s(x) = lambda^{is^2/2} delta^{is} sigma_s(x) delta^{-is} lambda^{-is^2/2}"""
    a_s = _a_factor(pair, s)
    return a_s @ modular_flow(phi, s, x) @ a_s.adjoint()


def sigma_prime_fixed_point_residual(phi: Weight, pair: InvariancePair, n: int,
                                     x: complex, y: complex, z: complex, s: float) -> float:
    """||sigma_s(elem) - sigma'_s(elem)|| for elem = lambda^x delta^y sigma_z(e_n)"""
    e_n = smear_element(pair, n).value
    elem = mat_power(pair.lambda_, x) @ mat_power(pair.delta, y) @ modular_flow(phi, z, e_n)
    return (modular_flow(phi, s, elem) - sigma_prime_flow(phi, pair, s, elem)).norm()


def rho_power(phi: Weight, pair: InvariancePair, z: complex) -> Superoperator:
    """rho^z, continuation of rho^{it} = lambda^{it^2/2} delta^{it} Delta^{it} at t = -iz"""
    h = phi.density
    left = mat_power(pair.lambda_, -0.5j * z * z) @ mat_power(pair.delta, z) @ mat_power(h, z)
    return Superoperator(left, mat_power(h, -z))


def rho_lemma_residual(phi: Weight, pair: InvariancePair, x: AlgebraElement,
                       constructed: Optional[ConstructedWeight] = None) -> float:
    """||J lambda^{-i/8} rho^{1/2} Lambda(x) - Gamma(x^*)||"""
    constructed = constructed or construct_weight(phi, pair)
    realization = gns(phi)
    op = realization.J @ Superoperator.left_multiplication(mat_power(pair.lambda_, -0.125j)) @ rho_power(phi, pair, 0.5)
    return (op(realization.lambda_map(x)) - constructed.gamma_map(x.adjoint())).hs_norm()


def smeared_domain_residual(phi: Weight, pair: InvariancePair, n: int, m: int, z: complex, xi: AlgebraElement) -> float:
    """
    ||Delta'^z (J e_n J e_m xi) - J sigma_{i conj(z)}(e_n) J sigma_{-iz}(e_m) Delta'^z xi||
    """
    e_n = smear_element(pair, n).value
    e_m = e_n if m == n else smear_element(pair, m).value
    dz = delta_prime_power(phi, pair, z)
    lhs = dz(_j_sandwich(e_n)(e_m @ xi))
    moved_n = modular_flow(phi, 1j * np.conj(z), e_n)
    moved_m = modular_flow(phi, -1j * z, e_m)
    rhs = _j_sandwich(moved_n)(moved_m @ dz(xi))
    return (lhs - rhs).hs_norm()


def lambda_prime_shift_residual(phi: Weight, pair: InvariancePair, a: AlgebraElement, z: complex, n: int,
                     constructed: Optional[ConstructedWeight] = None) -> float:
    """||Lambda(a delta^z e_n) - Lambda'(a delta^{z-1/2} e_n)||"""
    constructed = constructed or construct_weight(phi, pair)
    e_n = smear_element(pair, n).value
    lhs = gns(phi).lambda_map(a @ mat_power(pair.delta, z) @ e_n)
    rhs = constructed.lambda_prime_map(a @ mat_power(pair.delta, z - 0.5) @ e_n)
    return (lhs - rhs).hs_norm()


def gamma_residual(constructed: ConstructedWeight, a: AlgebraElement) -> float:
    """||Gamma(a) - Lambda'(a)||; zero exactly when the two GNS maps coincide"""
    return (constructed.gamma_map(a) - constructed.lambda_prime_map(a)).hs_norm()


def construction_cocycle_residual(phi: Weight, pair: InvariancePair, t: float,
                                  constructed: Optional[ConstructedWeight] = None,
                                  probe: Optional[np.ndarray] = None) -> float:
    """
    ||[D phi_delta : D phi]_t - lambda^{it^2/2} delta^{it}||, or its action on a
    probe vector when one is given.
    """
    constructed = constructed or construct_weight(phi, pair)
    diff = connes_cocycle(constructed.weight, phi, t) - _a_factor(pair, t)
    if probe is None:
        return diff.norm()
    return float(np.linalg.norm(diff.apply(probe)))


@dataclass(frozen=True, eq=False)
class ExtractedPair:
    lambda_path: CocyclePath
    delta_path: CocyclePath
    log_lambda: AlgebraElement


def extract_pair(u: CocyclePath) -> ExtractedPair:
    """
    lambda^{it} = u_t^* u_1^* u_{t+1} and delta^{it} = u_t lambda^{-it^2/2}.

    Sampled paths return both families on the nodes t whose t + 1 is also
    sampled; lambda^{-it^2/2} uses the generator of lambda^{i} (principal branch).

    Raises:
        InvalidArgumentError: nodes 0, 1, 2 or any t + 1 are missing
    """
    if u.is_generator:
        grid = tuple(float(t) for t in np.linspace(-2.0, 2.0, 17))
        u = u.sampled(sorted({grid_key(t) for t in grid} | {grid_key(t + 1) for t in grid}))
        nodes = list(grid)
    else:
        nodes = [t for t in u.t_grid if u.has(t + 1)]
    for needed in (0.0, 1.0, 2.0):
        if not u.has(needed):
            raise InvalidArgumentError(f"Path must be sampled at t={needed}")

    u_1 = u.at(1.0)
    lam_one = u_1.adjoint() @ u_1.adjoint() @ u.at(2.0)
    log_lambda = unitary_log(lam_one)

    lam_samples, delta_samples = [], []
    for t in nodes:
        u_t = u.at(t)
        lam_samples.append(u_t.adjoint() @ u_1.adjoint() @ u.at(t + 1))
        delta_samples.append(u_t @ hermitian_exp(log_lambda, -0.5j * t * t))
    logger.debug(f"Extracted lambda/delta paths on {len(nodes)} nodes")
    return ExtractedPair(CocyclePath.from_samples(nodes, lam_samples),
                         CocyclePath.from_samples(nodes, delta_samples),
                         log_lambda)


def constructed_path(phi: Weight, constructed: ConstructedWeight, t_grid) -> CocyclePath:
    """Samples of [D phi_delta : D phi]_t"""
    return CocyclePath.from_samples(t_grid, [connes_cocycle(constructed.weight, phi, t) for t in t_grid])


def exact_pair_paths(pair: InvariancePair, t_grid) -> Tuple[CocyclePath, CocyclePath]:
    """Reference lambda^{it} and delta^{it} samples"""
    return (CocyclePath.from_samples(t_grid, [mat_power(pair.lambda_, 1j * t) for t in t_grid]),
            CocyclePath.from_samples(t_grid, [mat_power(pair.delta, 1j * t) for t in t_grid]))
