import math

import numpy as np
import pytest
import scipy.linalg as sla

from rnweights.errors import InvalidArgumentError
from rnweights.weyl_testbed import (
    WeylRn3Evidence,
    build_grid,
    case_scenario,
    check_interior,
    convergence_sweep,
    fourier_apply,
    gaussian_probe,
    interior_mass,
    weyl_cocycle_residual,
    weyl_invariance_residual,
    weyl_limit_formula_residual,
    weyl_operators,
)

SMALL_PARAMS = (-1.0, -0.5, 0.5, 1.0)


@pytest.fixture(scope='module')
def grid():
    return build_grid(256, 16.0)


@pytest.fixture(scope='module')
def scalar_case(grid):
    return case_scenario('scalar', grid)


@pytest.fixture(scope='module')
def central_case(grid):
    return case_scenario('central', grid)


@pytest.mark.parametrize("N, L_box", [(100, 16.0), (8, 16.0), (256, 0.0), (256, -4.0)])
def test_build_grid_rejects(N, L_box):
    with pytest.raises(InvalidArgumentError):
        build_grid(N, L_box)


def test_grid_layout(grid):
    assert grid.spacing == 16.0 / 256
    assert grid.gamma[grid.N // 2] == 0.0
    assert np.count_nonzero(grid.interior_mask()) == np.count_nonzero(np.abs(grid.gamma) <= 4.0)


def test_operators_guard_large_boxes():
    with pytest.raises(InvalidArgumentError, match="L_box"):
        weyl_operators(build_grid(64, 32.0))


def test_operators_are_consistent():
    grid = build_grid(64, 16.0)
    P, Q, H, K1 = weyl_operators(grid)
    assert np.allclose(Q, Q.conj().T)
    assert np.allclose(np.diag(H), np.exp(grid.gamma))
    # exp(Q) through the dense operator and through the Fourier multiplier
    probe = gaussian_probe(grid)
    assert np.linalg.norm(K1 @ probe - fourier_apply(grid, probe, np.exp, cutoff=np.inf)) < 1e-8


def test_exp_q_translates_interior_gaussians(grid):
    P, Q, H, K1 = weyl_operators(grid)
    probe = gaussian_probe(grid)
    moved = sla.expm(4j * grid.spacing * Q) @ probe
    assert np.linalg.norm(moved - np.roll(probe, -4)) < 1e-9


def test_canonical_commutator_on_a_gaussian(grid):
    P, Q, H, K1 = weyl_operators(grid)
    probe = gaussian_probe(grid)
    assert abs(np.vdot(probe, (P @ Q - Q @ P) @ probe) - 1j) < 1e-6


def test_fourier_apply_identity(grid):
    probe = gaussian_probe(grid, 0.5, 0.7)
    out = fourier_apply(grid, probe, lambda w: np.ones_like(w, dtype=complex))
    assert np.linalg.norm(out - probe) < 1e-12


def test_probe_norm_and_interior(grid):
    probe = gaussian_probe(grid)
    assert math.isclose(np.linalg.norm(probe), 1.0, rel_tol=1e-12)
    assert interior_mass(grid, probe) < 1e-7
    check_interior(grid, probe)


def test_off_center_probe_is_rejected(grid):
    with pytest.raises(InvalidArgumentError, match="not interior"):
        check_interior(grid, gaussian_probe(grid, center=6.0))


def test_unknown_case(grid):
    with pytest.raises(InvalidArgumentError, match="Unknown testbed case"):
        case_scenario('diagonal', grid)


def test_scalar_invariance(scalar_case):
    probe = scalar_case.probe()
    worst = max(weyl_invariance_residual(scalar_case, s, t, probe) for s in SMALL_PARAMS for t in SMALL_PARAMS)
    assert worst <= 1e-5
    assert scalar_case.pair.mode == 'approximate'


@pytest.mark.parametrize("s, t", [(0.0, 0.7), (0.7, 0.0), (0.0, 0.0)])
def test_trivial_parameters(scalar_case, central_case, s, t):
    for case in (scalar_case, central_case):
        assert weyl_invariance_residual(case, s, t, case.probe()) <= 1e-12


def test_lambda_is_the_scalar_inverse_e(scalar_case):
    lam = scalar_case.pair.lambda_.element.dense()
    assert np.allclose(lam, math.exp(-1.0) * np.eye(scalar_case.grid.N))
    assert scalar_case.lambda_centrality() <= 1e-12


def test_central_case(central_case):
    probe = central_case.probe()
    assert max(weyl_invariance_residual(central_case, s, 1.0, probe) for s in SMALL_PARAMS) <= 1e-5
    assert central_case.lambda_centrality() <= 1e-12


def test_factor_case_lambda_is_not_central():
    case = case_scenario('factor', build_grid(64, 16.0))
    assert case.algebra.block_dims == (128,)
    assert case.lambda_centrality() >= 0.5
    assert weyl_invariance_residual(case, 1.0, 1.0, case.probe()) <= 1e-5


def test_factor_case_weight_is_balanced():
    grid = build_grid(64, 16.0)
    case = case_scenario('factor', grid)
    density = case.weight.density.element.blocks[0]
    assert np.allclose(density, np.diag(np.tile(np.exp(grid.gamma), 2)))


@pytest.mark.parametrize("t", [-0.5, 0.5])
def test_construction_cocycle(scalar_case, t):
    assert weyl_cocycle_residual(scalar_case, t, scalar_case.probe()) <= 1e-3


def test_limit_formula_decreases(scalar_case):
    probe = scalar_case.probe()
    gaps = [weyl_limit_formula_residual(scalar_case, n, probe) for n in (1, 2, 4, 8)]
    assert all(b <= 1.05 * a + 1e-8 for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= max(0.05 * gaps[0], 1e-8)


def test_scalar_relative_invariance(scalar_case):
    evidence = WeylRn3Evidence(scalar_case, scalar_case.probe())
    assert evidence.lambda0 == math.exp(-1.0)
    assert evidence.r1(0.5) <= 1e-3
    assert evidence.r2(0.5) <= 1e-3
    assert evidence.eigen(0.5, 0.5) <= 1e-3
    assert evidence.group(0.5, 0.5) <= 1e-3


def test_scalar_relative_invariance_detects_wrong_lambda(scalar_case):
    evidence = WeylRn3Evidence(scalar_case, scalar_case.probe(), lambda0=math.e)
    assert evidence.r1(1.0) >= 0.5


def test_swapped_relative_invariance(scalar_case):
    evidence = WeylRn3Evidence(scalar_case, scalar_case.probe(), lambda0=math.e, swapped=True)
    assert evidence.r1(0.5) <= 1e-3
    assert evidence.r2(0.5) <= 1e-3
    assert evidence.eigen(0.5, 0.5) <= 1e-3
    assert evidence.group(0.5, 0.5) <= 1e-3


def test_swapped_roles_reject_the_unswapped_lambda(scalar_case):
    evidence = WeylRn3Evidence(scalar_case, scalar_case.probe(), lambda0=math.exp(-1.0), swapped=True)
    assert evidence.r1(1.0) >= 0.5


def test_relative_invariance_needs_scalar_case(central_case):
    with pytest.raises(InvalidArgumentError, match="scalar"):
        WeylRn3Evidence(central_case, central_case.probe())


def test_convergence_sweep_rows():
    table = convergence_sweep('scalar', [64], [16.0, 24.0], s=0.5, t=0.5)
    assert [(r['N'], r['L_box']) for r in table.rows] == [(64, 16.0), (64, 24.0)]
    assert set(table.rows[0]) == {'N', 'L_box', 'invariance', 'cocycle', 'scalar_r1', 'scalar_r2'}
    assert set(table.monotone) == {'invariance', 'cocycle', 'scalar_r1', 'scalar_r2'}
    assert all(r['invariance'] <= 1e-5 for r in table.rows)


def test_convergence_sweep_needs_grids():
    with pytest.raises(InvalidArgumentError):
        convergence_sweep('central', [], [16.0])


def test_invariance_follows_the_tail_law():
    table = convergence_sweep('scalar', [256], [8.0, 12.0, 16.0, 24.0], interior_tol=1e-2)
    rows = {r['L_box']: r for r in table.rows}
    assert rows[16.0]['invariance'] <= rows[8.0]['invariance'] / 10
    assert all(table.monotone.values())
