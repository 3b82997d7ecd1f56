"""
Smeared analytic elements

    e_n = alpha_n \\iint exp(-n^2 x^2 - n^4 y^4) lambda^{ix} delta^{iy} dx dy,
    alpha_n = 2 n^2 / (Gamma(1/2) Gamma(1/4)).

lambda and delta commute, so the double integral factors into a function of
log lambda times a function of log delta; both are evaluated on the spectra.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma

from rnweights.algebra_core import AlgebraElement, InvariancePair, Weight, mat_power
from rnweights.config import get_config
from rnweights.errors import InvalidArgumentError, NumericalFailure
from rnweights.modular_engine import modular_flow

logger = logging.getLogger(__name__)


def alpha(n: int) -> float:
    return 2.0 * n * n / (gamma(0.5) * gamma(0.25))


@dataclass(frozen=True, eq=False)
class SmearingElement:
    n: int
    value: AlgebraElement
    quadrature_meta: Dict[str, Any] = field(default_factory=dict)


def _x_factor(ell: np.ndarray, n: int, nodes: int) -> np.ndarray:
    """int exp(-n^2 x^2) e^{i x ell} dx by Gauss-Hermite after x = v / n"""
    v, w = hermgauss(nodes)
    return (w[None, :] * np.exp(1j * np.outer(ell, v) / n)).sum(axis=1) / n


def _y_factor(d: np.ndarray, n: int, nodes: int, radius: float) -> np.ndarray:
    """int exp(-n^4 y^4) e^{i y d} dy with u = n y, Gauss-Legendre on |u| <= radius"""
    x, w = leggauss(nodes)
    u = radius * x
    weights = radius * w * np.exp(-u ** 4)
    return (weights[None, :] * np.exp(1j * np.outer(d, u) / n)).sum(axis=1) / n


def _y_nodes(max_log: float, n: int) -> int:
    cfg = get_config()
    return max(cfg.QUAD_Y_NODES, int(math.ceil(cfg.QUAD_Y_RADIUS * max_log / n)) + 64)


def smear_element(pair: InvariancePair, n: int) -> SmearingElement:
    """
    Evaluate e_n for the pair.

    Raises:
        InvalidArgumentError: n < 1
        NumericalFailure: estimated quadrature error above the configured limit
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    n = int(n)
    cfg = get_config()
    a_n = alpha(n)
    x_mass = math.sqrt(math.pi) / n
    y_mass = gamma(0.25) / (2 * n)

    y_nodes = _y_nodes(pair.delta.log_norm(), n)
    y_check_nodes = int(math.ceil(1.25 * y_nodes))

    x_err, y_err = 0.0, 0.0

    def x_fn(ell):
        nonlocal x_err
        vals = _x_factor(ell, n, cfg.QUAD_HERMITE_NODES)
        exact = x_mass * np.exp(-ell ** 2 / (4 * n * n))
        x_err = max(x_err, float(np.max(np.abs(vals - exact))) / x_mass)
        return vals

    def y_fn(d):
        nonlocal y_err
        vals = _y_factor(d, n, y_nodes, cfg.QUAD_Y_RADIUS)
        check = _y_factor(d, n, y_check_nodes, cfg.QUAD_Y_RADIUS)
        y_err = max(y_err, float(np.max(np.abs(vals - check))) / y_mass)
        return vals

    x_part = pair.lambda_.spectral_function(x_fn)
    y_part = pair.delta.spectral_function(y_fn)
    value = a_n * (x_part @ y_part)

    truncation = 2 * math.exp(-cfg.QUAD_Y_RADIUS ** 4)
    error = x_err + y_err + truncation
    meta = {
        'x_rule': 'gauss-hermite',
        'x_nodes': cfg.QUAD_HERMITE_NODES,
        'y_rule': 'gauss-legendre',
        'y_nodes': y_nodes,
        'y_radius': cfg.QUAD_Y_RADIUS,
        'alpha_n': a_n,
        'error_estimate': error,
    }
    if error > cfg.QUAD_ERROR_LIMIT:
        raise NumericalFailure(f"Quadrature error estimate {error:.3e} for e_{n} exceeds {cfg.QUAD_ERROR_LIMIT:.1e}",
                               meta)
    if error > cfg.QUAD_ERROR_BUDGET:
        logger.warning(f"e_{n}: quadrature error estimate {error:.3e} above budget {cfg.QUAD_ERROR_BUDGET:.1e}")
    return SmearingElement(n, value, meta)


def smear_analytic_residual(pair: InvariancePair, phi: Weight, n: int,
                            x: complex, y: complex, z: complex, t: complex) -> float:
    """
    || sigma_t(delta^x lambda^y sigma_z(e_n)) - delta^x lambda^{y+tx} sigma_{t+z}(e_n) ||
    """
    cfg = get_config()
    if max(abs(x), abs(y), abs(z), abs(t)) > 2.0:
        raise NumericalFailure("Exponents outside |x|,|y|,|z|,|t| <= 2", {'x': str(x), 'y': str(y), 'z': str(z), 't': str(t)})
    e_n = smear_element(pair, n).value
    d_x = mat_power(pair.delta, x)
    factors = [d_x, mat_power(pair.lambda_, y), mat_power(pair.lambda_, y + t * x),
               mat_power(phi.density, 1j * t), mat_power(phi.density, 1j * z)]
    worst = max(f.norm() for f in factors)
    if worst > cfg.CONDITION_LIMIT:
        raise NumericalFailure(f"Conditioning guard: factor norm {worst:.3e}", {'limit': cfg.CONDITION_LIMIT})
    lhs = modular_flow(phi, t, d_x @ mat_power(pair.lambda_, y) @ modular_flow(phi, z, e_n))
    rhs = d_x @ mat_power(pair.lambda_, y + t * x) @ modular_flow(phi, t + z, e_n)
    return (lhs - rhs).norm()


def smear_limit_diagnostics(pair: InvariancePair, n_list: Sequence[int],
                            probe: Optional[np.ndarray] = None) -> List[Dict[str, float]]:
    """
    ||e_n - 1|| per n, or ||(e_n - 1) probe|| when a probe vector is given.
    """
    one = pair.algebra.identity()
    rows = []
    for n in n_list:
        diff = smear_element(pair, n).value - one
        dist = diff.norm() if probe is None else float(np.linalg.norm(diff.apply(probe)))
        rows.append({'n': int(n), 'distance': dist})
    return rows
