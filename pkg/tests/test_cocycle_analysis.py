import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from rnweights.algebra_core import PositiveElement, Weight, build_algebra, hermitian_exp
from rnweights.cocycle_analysis import (
    CocyclePath,
    bicharacter,
    bicharacter_residuals,
    eigenoperator_residual,
    extract_lambda,
    fit_generators,
    flows_commute_residual,
    scalar_invariance_residual,
    synth_path,
    v_group_residual,
)
from rnweights.errors import InvalidArgumentError, NumericalFailure
from rnweights.theorems import rn2_pipeline

FIT_GRID = tuple(float(v) for v in np.linspace(0.0, 1.0, 21))
TABLE_GRID = tuple(float(v) for v in np.linspace(-1.0, 1.0, 9))


def commuting_generators(algebra, rng, spread=1.0):
    """D, L diagonal in one random basis per block, spectra in [-spread, spread]"""
    d_blocks, l_blocks = [], []
    for n in algebra.block_dims:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        for blocks in (d_blocks, l_blocks):
            b = (q * rng.uniform(-spread, spread, n)) @ q.conj().T
            blocks.append((b + b.conj().T) / 2)
    return algebra.element(d_blocks), algebra.element(l_blocks)


def central_generator(algebra, values):
    return algebra.element([v * np.eye(n) for v, n in zip(values, algebra.block_dims)])


@pytest.mark.parametrize("dims, stream", [([2, 3, 4], 0), ([3], 1), ([1, 2], 2)])
def test_fit_recovers_synthetic_generators(dims, stream):
    algebra = build_algebra(dims)
    D, L = commuting_generators(algebra, np.random.default_rng(stream))
    fit = fit_generators(synth_path(D, L, FIT_GRID))
    assert np.linalg.norm((fit.D - D).to_vector()) < 1e-8
    assert np.linalg.norm((fit.L - L).to_vector()) < 1e-8
    assert fit.residual < 1e-8


def test_fit_unwraps_large_phases():
    algebra = build_algebra([2])
    D = algebra.diag([[2.5, -2.0]])
    L = algebra.diag([[3.0, 1.0]])
    grid = tuple(float(v) for v in np.linspace(-2.0, 2.0, 81))
    fit = fit_generators(synth_path(D, L, grid))
    assert (fit.D - D).norm() < 1e-8
    assert (fit.L - L).norm() < 1e-8


def test_fit_needs_two_nonzero_nodes(m2):
    D, L = m2.diag([[0.3, 0.1]]), m2.diag([[0.2, -0.1]])
    with pytest.raises(InvalidArgumentError, match="two distinct nonzero"):
        fit_generators(synth_path(D, L, (0.0, 0.5)))


def test_fit_rejects_generator_form(m2):
    path = CocyclePath.from_generators(m2.diag([[0.3, 0.1]]), m2.diag([[0.2, -0.1]]))
    with pytest.raises(InvalidArgumentError):
        fit_generators(path)


def test_fit_refuses_coarse_grid(m2):
    D, L = m2.diag([[3.0, -3.0]]), m2.zeros()
    with pytest.raises(NumericalFailure) as info:
        fit_generators(synth_path(D, L, (0.0, 1.0, 2.0)))
    assert info.value.diagnostics['phase_spread'] > info.value.diagnostics['limit']


def test_generators_must_commute(m2):
    D = m2.diag([[1.0, -1.0]])
    L = m2.element([np.array([[0.0, 1.0], [1.0, 0.0]])])
    with pytest.raises(InvalidArgumentError, match="commute"):
        CocyclePath.from_generators(D, L)


@pytest.mark.parametrize("grid", [(0.5, 1.0), (0.0, 1.0, 0.5), ()])
def test_sampled_path_grid_validation(m2, grid):
    with pytest.raises(InvalidArgumentError):
        CocyclePath.from_samples(grid, [m2.identity()] * len(grid))


def test_sampled_path_rejects_non_unitary(m2):
    with pytest.raises(InvalidArgumentError, match="unitary"):
        CocyclePath.from_samples((0.0, 1.0), [m2.identity(), m2.scalar(2.0)])


def test_central_path_pipeline():
    algebra = build_algebra([2, 3])
    rng = np.random.default_rng(11)
    D, _ = commuting_generators(algebra, rng)
    L = central_generator(algebra, [0.7, -0.4])
    path = CocyclePath.from_generators(D, L)
    stages, log_lambda = rn2_pipeline(path, TABLE_GRID)
    assert stages['additivity_s'] < 1e-10
    assert stages['additivity_t'] < 1e-10
    assert stages['centrality'] < 1e-12
    assert stages['lambda_table_match'] < 1e-10
    assert stages['v_group_law'] < 1e-10
    assert (log_lambda - L).norm() < 1e-10


def test_non_central_generator_detected():
    algebra = build_algebra([3])
    q, _ = np.linalg.qr(np.random.default_rng(12).standard_normal((3, 3)))
    L = algebra.element([(q * np.array([-1.0, 0.0, 1.0])) @ q.T])
    table = bicharacter(CocyclePath.from_generators(algebra.zeros(), L), TABLE_GRID, TABLE_GRID)
    assert bicharacter_residuals(table).centrality >= 0.1


def test_bicharacter_needs_sum_nodes(m2):
    path = synth_path(m2.diag([[0.3, 0.1]]), m2.zeros(), (-1.0, 0.0, 1.0))
    with pytest.raises(InvalidArgumentError, match="missing"):
        bicharacter(path, (1.0,), (1.0,))


def test_extract_lambda_needs_half_row(m2):
    path = CocyclePath.from_generators(m2.zeros(), m2.zeros())
    with pytest.raises(InvalidArgumentError):
        extract_lambda(bicharacter(path, (0.0, 1.0), (0.0, 1.0)))


def test_v_group_law_fails_for_wrong_lambda():
    algebra = build_algebra([2])
    D, L = algebra.diag([[0.4, -0.2]]), algebra.scalar(0.5)
    path = CocyclePath.from_generators(D, L)
    assert v_group_residual(path, L, TABLE_GRID, TABLE_GRID) < 1e-10
    assert v_group_residual(path, algebra.zeros(), TABLE_GRID, TABLE_GRID) > 0.1


def test_flows_commute_for_commuting_densities(commuting_instance):
    phi, pair = commuting_instance
    psi = Weight(PositiveElement.from_element(phi.density.element @ pair.delta.element))
    assert max(flows_commute_residual(phi, psi, s, t) for s in (-1.0, 0.5) for t in (0.25, 1.0)) < 1e-10


@pytest.mark.parametrize("mu", [2.0, 3.0, 10.0])
def test_eigenoperator_lemma(m2, mu):
    phi = Weight.from_density(m2.diag([[1.0, mu]]))
    weight_side, flow_side = eigenoperator_residual(phi, m2.matrix_unit(0, 0, 1), 1.0 / mu)
    assert weight_side < 1e-12
    assert flow_side < 1e-12


def test_eigenoperator_lemma_with_wrong_lambda(m2):
    phi = Weight.from_density(m2.diag([[1.0, 2.0]]))
    weight_side, _ = eigenoperator_residual(phi, m2.matrix_unit(0, 0, 1), 1.0)
    assert weight_side >= 0.5
    assert math.isclose(weight_side, 1.0, rel_tol=1e-12)


def test_eigenoperator_rejects_nonpositive_lambda(m2, pt_phi):
    with pytest.raises(InvalidArgumentError):
        eigenoperator_residual(pt_phi, m2.matrix_unit(0, 0, 1), 0.0)


def test_scalar_invariance_identity_pair(pt_phi):
    r1, r2 = scalar_invariance_residual(pt_phi, pt_phi, 1.0, 0.7)
    assert r1 < 1e-12 and r2 < 1e-12


def test_scalar_invariance_scaled_weight(m2, pt_phi):
    # psi = 3 phi has h_psi^{it} = 3^{it} h^{it}, so both flows agree and lambda0 = 1
    psi = Weight.from_density(3.0 * pt_phi.density.element)
    r1, r2 = scalar_invariance_residual(pt_phi, psi, 1.0, 1.0)
    assert r1 < 1e-12 and r2 < 1e-10
    r1_wrong, _ = scalar_invariance_residual(pt_phi, psi, 2.0, 1.0)
    assert r1_wrong >= 0.5


@seed(17)
@settings(max_examples=20, deadline=None)
@given(t=st.floats(min_value=-2.0, max_value=2.0))
def test_generator_path_matches_exponential(t):
    algebra = build_algebra([2])
    D, L = algebra.diag([[0.3, -0.8]]), algebra.diag([[0.5, 0.2]])
    path = CocyclePath.from_generators(D, L)
    expected = hermitian_exp(t * D + (t * t / 2) * L, 1j)
    assert (path.at(t) - expected).norm() < 1e-12
