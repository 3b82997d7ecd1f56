"""
Periodic spectral discretization of the Weyl pair on L^2(R).

P is multiplication by the node value, Q = -i d/dgamma is diagonal in Fourier
space, H = exp(P) and K1 = exp(Q). Three cases realize the invariance factor
lambda approximately:

    scalar   B(C^N),            delta = K1,                 lambda = e^{-1}
    factor   B(C^2N),           delta = diag(K1, K1^{-1}),  lambda = diag(e^{-1}, e)
    central  B(C^N) + B(C^N),   same delta and lambda, now central

Identities are compared on interior probe vectors only; periodic wrap-around
is the sole source of error for imaginary powers. Positive powers of exp(Q)
act on probes through band-limited Fourier multipliers.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import linalg as sla
from tqdm import tqdm

from rnweights.algebra_core import (
    APPROXIMATE,
    AlgebraElement,
    BlockAlgebra,
    InvariancePair,
    PositiveElement,
    Weight,
    build_algebra,
    certify_pair,
    centrality_defect,
)
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError
from rnweights.modular_engine import balanced_weight
from rnweights.rn_construct import ConstructedWeight, construct_weight, construction_cocycle_residual
from rnweights.smearing import _x_factor, _y_factor, _y_nodes, alpha
from rnweights.theorems import Rn3Evidence

logger = logging.getLogger(__name__)

CASES = ('scalar', 'factor', 'central')

# (sign of Q in log delta, log lambda) per N-dimensional component
_COMPONENTS = {
    'scalar': ((1, -1.0),),
    'factor': ((1, -1.0), (-1, 1.0)),
    'central': ((1, -1.0), (-1, 1.0)),
}

CERTIFY_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)


@dataclass(frozen=True)
class WeylGrid:
    N: int
    L_box: float

    @property
    def spacing(self) -> float:
        return self.L_box / self.N

    @cached_property
    def gamma(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.spacing

    @cached_property
    def freq(self) -> np.ndarray:
        """Angular frequencies in FFT order"""
        return 2 * np.pi * sfft.fftfreq(self.N, d=self.spacing)

    @property
    def freq_sorted(self) -> np.ndarray:
        return sfft.fftshift(self.freq)

    def interior_mask(self) -> np.ndarray:
        return np.abs(self.gamma) <= self.L_box / 4


def build_grid(N: int, L_box: float) -> WeylGrid:
    if int(N) != N or N < 16 or (int(N) & (int(N) - 1)) != 0:
        raise InvalidArgumentError(f"N must be a power of two >= 16, got {N}")
    if not L_box > 0:
        raise InvalidArgumentError(f"L_box must be positive, got {L_box}")
    return WeylGrid(int(N), float(L_box))


def weyl_operators(grid: WeylGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Dense (P, Q, H, K1) on the grid.

    Raises:
        InvalidArgumentError: max |gamma| above the overflow guard
    """
    limit = get_config().WEYL_MAX_ABS_NODE
    if np.max(np.abs(grid.gamma)) > limit:
        raise InvalidArgumentError(
            f"max |gamma| = {np.max(np.abs(grid.gamma)):.2f} exceeds {limit}; use a smaller L_box")
    F = sla.dft(grid.N, scale='sqrtn')
    P = np.diag(grid.gamma).astype(complex)
    Q = F.conj().T @ np.diag(grid.freq) @ F
    Q = (Q + Q.conj().T) / 2
    H = np.diag(np.exp(grid.gamma)).astype(complex)
    K1 = F.conj().T @ np.diag(np.exp(grid.freq)) @ F
    return P, Q, H, K1


def fourier_apply(grid: WeylGrid, vec: np.ndarray, multiplier: Callable[[np.ndarray], np.ndarray],
                  cutoff: Optional[float] = None) -> np.ndarray:
    """
    f(Q) vec for one N-component, with the multiplier switched off above the cutoff
    so that growing functions of Q never amplify roundoff.
    """
    cutoff = get_config().WEYL_FREQ_CUTOFF if cutoff is None else cutoff
    spectrum = sfft.fft(vec)
    mask = np.abs(grid.freq) <= cutoff
    values = np.zeros(grid.N, dtype=complex)
    values[mask] = multiplier(grid.freq[mask])
    return sfft.ifft(values * spectrum)


def gaussian_probe(grid: WeylGrid, center: float = 0.0, width: float = 1.0, components: int = 1) -> np.ndarray:
    """l2-normalized Gaussian exp(-(gamma - c)^2 / (2 w^2)), repeated over components"""
    g = np.exp(-((grid.gamma - center) ** 2) / (2 * width ** 2)).astype(complex)
    vec = np.tile(g, components)
    return vec / np.linalg.norm(vec)


def interior_mass(grid: WeylGrid, vec: np.ndarray) -> float:
    """Share of the squared norm outside the middle half of the box"""
    parts = vec.reshape(-1, grid.N)
    outside = np.sum(np.abs(parts[:, ~grid.interior_mask()]) ** 2)
    return float(outside / np.sum(np.abs(parts) ** 2))


def check_interior(grid: WeylGrid, vec: np.ndarray, tol: Optional[float] = None):
    tol = get_config().INTERIOR_MASS_TOL if tol is None else tol
    mass = interior_mass(grid, vec)
    if mass > tol:
        raise InvalidArgumentError(f"Probe is not interior: {mass:.3e} of its mass lies outside the middle half")


@dataclass(frozen=True, eq=False)
class TestbedCase:
    case_id: str
    grid: WeylGrid
    algebra: BlockAlgebra
    weight: Weight
    pair: InvariancePair
    density_log: AlgebraElement
    components: Tuple[Tuple[int, float], ...] = field(repr=False)

    __test__ = False

    def probe(self, center: float = 0.0, width: float = 1.0) -> np.ndarray:
        return gaussian_probe(self.grid, center, width, len(self.components))

    @cached_property
    def constructed(self) -> ConstructedWeight:
        return construct_weight(self.weight, self.pair, mode=APPROXIMATE, density_log=self.density_log)

    def lambda_centrality(self) -> float:
        return centrality_defect(self.pair.lambda_.element)


def _assemble(case_id: str, grid: WeylGrid, P: np.ndarray, Q: np.ndarray):
    """Algebra, weight Tr_H, and the generators of delta, lambda and the constructed density"""
    comps = _COMPONENTS[case_id]
    eye = np.eye(grid.N)
    log_d = [sign * Q for sign, _ in comps]
    log_l = [ell * eye for _, ell in comps]
    # e^{Q/2} e^P e^{Q/2} = e^{P+Q} for a Heisenberg pair
    log_k = [P + sign * Q for sign, _ in comps]
    parts = [log_d, log_l, log_k]
    if case_id == 'factor':
        single = Weight(PositiveElement.from_log(build_algebra([grid.N]).element([P])))
        weight = balanced_weight(single, single)
        algebra = weight.algebra
        return algebra, weight, [algebra.element([sla.block_diag(*m)]) for m in parts]
    algebra = build_algebra([grid.N] * len(comps))
    weight = Weight(PositiveElement.from_log(algebra.element([P for _ in comps])))
    return algebra, weight, [algebra.element(m) for m in parts]


def case_scenario(case_id: str, grid: WeylGrid, interior_tol: Optional[float] = None) -> TestbedCase:
    """
    Assemble algebra, weight Tr_H (balanced over components) and the approximate
    pair, certified by its invariance residual on the default probe.
    """
    if case_id not in CASES:
        raise InvalidArgumentError(f"Unknown testbed case '{case_id}'. Valid: {', '.join(CASES)}")
    P, Q, _, _ = weyl_operators(grid)
    algebra, weight, (log_d, log_l, log_k) = _assemble(case_id, grid, P, Q)
    delta = PositiveElement.from_log(log_d)
    lambda_ = PositiveElement.from_log(log_l)

    draft = TestbedCase(case_id, grid, algebra, weight, InvariancePair(delta, lambda_, 0.0, APPROXIMATE),
                        log_k, _COMPONENTS[case_id])
    probe = draft.probe()
    residual = max(weyl_invariance_residual(draft, s, t, probe, interior_tol)
                   for s in CERTIFY_GRID for t in CERTIFY_GRID)
    pair = certify_pair(weight, delta, lambda_, APPROXIMATE, CERTIFY_GRID, CERTIFY_GRID, residual=residual)
    logger.info(f"Testbed '{case_id}' N={grid.N} L={grid.L_box}: invariance residual {residual:.3e}")
    return TestbedCase(case_id, grid, algebra, weight, pair, log_k, _COMPONENTS[case_id])


def weyl_invariance_residual(case: TestbedCase, s: float, t: float, probe: np.ndarray,
                             interior_tol: Optional[float] = None) -> float:
    """||(h^{it} delta^{is} h^{-it} - lambda^{ist} delta^{is}) probe||"""
    check_interior(case.grid, probe, interior_tol)
    h, d, lam = case.weight.density, case.pair.delta, case.pair.lambda_
    d_is = d.power(1j * s)
    lhs = h.power(1j * t).apply(d_is.apply(h.power(-1j * t).apply(probe)))
    rhs = lam.power(1j * s * t).apply(d_is.apply(probe))
    return float(np.linalg.norm(lhs - rhs))


def weyl_cocycle_residual(case: TestbedCase, t: float, probe: np.ndarray,
                          interior_tol: Optional[float] = None) -> float:
    """||([D phi_delta : D phi]_t - lambda^{it^2/2} delta^{it}) probe||"""
    check_interior(case.grid, probe, interior_tol)
    return construction_cocycle_residual(case.weight, case.pair, t, case.constructed, probe=probe)


def _component_multipliers(case: TestbedCase, fn: Callable[[int, float], Callable[[np.ndarray], np.ndarray]],
                           vec: np.ndarray) -> np.ndarray:
    parts = vec.reshape(len(case.components), case.grid.N)
    out = [fourier_apply(case.grid, part, fn(sign, ell)) for part, (sign, ell) in zip(parts, case.components)]
    return np.concatenate(out)


def _constructed_root(case: TestbedCase, vec: np.ndarray) -> np.ndarray:
    """K~^{1/2}-type factor e^{P/2} e^{+-Q/2} vec, so that <vec, K~ vec> = ||result||^2"""
    half = _component_multipliers(case, lambda sign, _: (lambda w: np.exp(0.5 * sign * w)), vec)
    return np.tile(np.exp(0.5 * case.grid.gamma), len(case.components)) * half


def weyl_smear_apply(case: TestbedCase, n: int, vec: np.ndarray) -> np.ndarray:
    """e_n vec through its Fourier multiplier alpha_n X(log lambda) Y(log delta)"""
    cfg = get_config()
    nodes = _y_nodes(float(np.max(np.abs(case.grid.freq))), n)

    def multiplier(sign, ell):
        x = _x_factor(np.array([ell]), n, cfg.QUAD_HERMITE_NODES)[0]
        return lambda w: alpha(n) * x * _y_factor(sign * w, n, nodes, cfg.QUAD_Y_RADIUS)

    return _component_multipliers(case, multiplier, vec)


def weyl_limit_formula_residual(case: TestbedCase, n: int, probe: np.ndarray,
                                interior_tol: Optional[float] = None) -> float:
    """
    |phi((delta^{1/2} e_n) x (delta^{1/2} e_n)) - phi_delta(x)| for the rank-one projector x
    onto the probe, relative to phi_delta(x).
    """
    check_interior(case.grid, probe, interior_tol)
    target = np.linalg.norm(_constructed_root(case, probe)) ** 2
    smeared = np.linalg.norm(_constructed_root(case, weyl_smear_apply(case, n, probe))) ** 2
    return float(abs(smeared - target) / target)


@dataclass(frozen=True, eq=False)
class WeylRn3Evidence(Rn3Evidence):
    """
    Probe evidence for the scalar case with phi = Tr_H and psi = phi_delta.

    With swapped=True the roles exchange (phi = phi_delta, psi = Tr_H); the
    cocycle becomes u_t^* and the expected lambda0 becomes e instead of e^{-1}.
    Weight identities are measured on the rank-one projector onto the probe and
    reported relative to the unscaled value.
    """
    case: TestbedCase
    probe: np.ndarray
    lambda0: float = math.exp(-1.0)
    interior_tol: Optional[float] = None
    swapped: bool = False

    def __post_init__(self):
        if self.case.case_id != 'scalar':
            raise InvalidArgumentError("Scalar relative invariance needs the 'scalar' testbed case")
        if not self.lambda0 > 0:
            raise InvalidArgumentError(f"lambda0 must be positive, got {self.lambda0}")
        check_interior(self.case.grid, self.probe, self.interior_tol)

    @cached_property
    def _plus(self) -> PositiveElement:
        return self.case.constructed.density

    @property
    def _base_density(self) -> PositiveElement:
        return self._plus if self.swapped else self.case.weight.density

    def _u(self, t: float, vec: np.ndarray) -> np.ndarray:
        """[D psi : D phi]_t vec"""
        h = self.case.weight.density
        if self.swapped:
            return h.power(1j * t).apply(self._plus.power(-1j * t).apply(vec))
        return self._plus.power(1j * t).apply(h.power(-1j * t).apply(vec))

    def _trace_value(self, vec: np.ndarray) -> float:
        return float(np.sum(np.exp(self.case.grid.gamma) * np.abs(vec) ** 2))

    def _constructed_value(self, vec: np.ndarray) -> float:
        return float(np.linalg.norm(_constructed_root(self.case, vec)) ** 2)

    def _trace_under_constructed_flow(self, t: float, factor: float) -> float:
        moved = self._plus.power(1j * t).apply(self.probe)
        base = self._trace_value(self.probe)
        return abs(self._trace_value(moved) - factor * base) / base

    def _constructed_under_trace_flow(self, t: float, factor: float) -> float:
        moved = np.exp(1j * t * self.case.grid.gamma) * self.probe
        base = self._constructed_value(self.probe)
        return abs(self._constructed_value(moved) - factor * base) / base

    def r1(self, t):
        if self.swapped:
            return self._constructed_under_trace_flow(t, self.lambda0 ** t)
        return self._trace_under_constructed_flow(t, self.lambda0 ** t)

    def r2(self, t):
        if self.swapped:
            return self._trace_under_constructed_flow(t, self.lambda0 ** (-t))
        return self._constructed_under_trace_flow(t, self.lambda0 ** (-t))

    def eigen(self, s, t):
        d = self._base_density
        lhs = d.power(1j * s).apply(self._u(t, d.power(-1j * s).apply(self.probe)))
        rhs = self.lambda0 ** (1j * s * t) * self._u(t, self.probe)
        return float(np.linalg.norm(lhs - rhs))

    def group(self, s, t):
        def v(r, vec):
            return self.lambda0 ** (-0.5j * r * r) * self._u(r, vec)
        return float(np.linalg.norm(v(s + t, self.probe) - v(s, v(t, self.probe))))


@dataclass(frozen=True)
class SweepTable:
    case_id: str
    rows: List[Dict[str, float]]
    monotone: Dict[str, bool]


def _non_increasing(values: Sequence[float], slack: float = 1.05, floor: float = 1e-13) -> bool:
    return all(b <= slack * a + floor for a, b in zip(values, values[1:]))


def convergence_sweep(case_id: str, N_list: Sequence[int], L_list: Sequence[float],
                      s: float = 1.0, t: float = 1.0, interior_tol: Optional[float] = None,
                      show_progress: Optional[bool] = None) -> SweepTable:
    """
    Residuals of the invariance and construction-cocycle identities (and, for the
    scalar case, both scalar relative invariance residuals at lambda0 = e^{-1})
    over every (N, L_box) combination, ordered as given.
    """
    if not N_list or not L_list:
        raise InvalidArgumentError("N_list and L_list must be nonempty")
    cfg = get_config()
    show_progress = cfg.SHOW_PROGRESS if show_progress is None else show_progress
    combos = [(N, L) for N in N_list for L in L_list]
    rows = []
    for N, L in tqdm(combos, desc=f"sweep {case_id}", disable=not show_progress):
        case = case_scenario(case_id, build_grid(N, L), interior_tol)
        probe = case.probe()
        row = {
            'N': int(N),
            'L_box': float(L),
            'invariance': weyl_invariance_residual(case, s, t, probe, interior_tol),
            'cocycle': weyl_cocycle_residual(case, t, probe, interior_tol),
        }
        if case_id == 'scalar':
            evidence = WeylRn3Evidence(case, probe, interior_tol=interior_tol)
            row['scalar_r1'] = evidence.r1(t)
            row['scalar_r2'] = evidence.r2(t)
        rows.append(row)
        logger.debug(f"sweep {case_id} N={N} L={L}: {row}")

    monotone = {}
    if len(rows) > 1:
        for key in rows[0]:
            if key in ('N', 'L_box') or not all(key in r for r in rows):
                continue
            monotone[key] = _non_increasing([r[key] for r in rows])
    return SweepTable(case_id, rows, monotone)

