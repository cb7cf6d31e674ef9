import csv

import numpy as np
import pytest

from crfolio.extension import analyze, make_function
from crfolio.family import boundary_jacobian, build_rotating_circles, build_translated_circles
from crfolio.jacobian import (DegenerateTheta, JacobianField, TrackingInstability,
                              boundary_winding, compute_J, compute_J_pm,
                              directional_derivative_check, node_roots, theta_field, track_zeros)
from crfolio.topology import trace_fiber


@pytest.fixture(scope="module")
def globevnik():
    fam = build_rotating_circles(1.0, 2.0, 128)
    f = make_function("globevnik_n", n=2)
    ext = analyze(f, fam, 128)
    return fam, f, ext, compute_J(ext, fam)


@pytest.mark.parametrize("name", ["z_sq", "const"])
def test_holomorphic_data_gives_zero_J(name):
    fam = build_rotating_circles(1.0, 2.0, 32)
    J = compute_J(analyze(make_function(name), fam, 64), fam)
    assert J.j_max < 1e-12
    with pytest.raises(DegenerateTheta):
        theta_field(J)
    with pytest.raises(DegenerateTheta):
        track_zeros(J)


def test_globevnik_J_vanishes_at_centre(globevnik):
    _, _, _, J = globevnik
    assert J.j_max > 0.1
    for t in (0.0, 1.0, 4.0):
        assert abs(J.eval(0.0, t)) == 0.0


def test_J_matches_boundary_determinant(globevnik):
    fam, _, ext, J = globevnik
    pm = compute_J_pm(ext, fam)
    assert np.max(np.abs(pm.minus - J.boundary_samples)) < 1e-8 * J.scale
    assert np.allclose(pm.gg, boundary_jacobian(fam, 128), atol=1e-10)


def test_J_pm_special_functions():
    fam = build_translated_circles(1.0, [0, 1 + 1j], 32)
    zeta = fam.boundary_points(64)
    g = fam.grid_values(zeta)[:, 0, :]
    D = boundary_jacobian(fam, 64)
    pm = compute_J_pm(analyze(make_function("z_sq"), fam, 64), fam)
    assert np.max(np.abs(pm.minus)) < 1e-9
    assert np.max(np.abs(pm.plus - 2 * g * D)) < 1e-9
    pm = compute_J_pm(analyze(make_function("zbar"), fam, 64), fam)
    assert np.max(np.abs(pm.plus)) < 1e-9
    assert np.max(np.abs(pm.minus - D)) < 1e-9
    pm = compute_J_pm(analyze(make_function("abs_z1_sq"), fam, 64), fam)
    assert np.max(np.abs(pm.minus - g * D)) < 1e-9


def test_theta_is_compatible_and_matches_sigma(globevnik):
    _, f, _, J = globevnik
    th = theta_field(J, f)
    assert th.pairs_compared > 0
    assert th.compatibility_residual < 1e-3
    assert th.unimodularity_error < 1e-12
    assert th.sigma_residual < 1e-6


def test_synthetic_two_branches():
    fam = build_rotating_circles(1.0, 2.0, 64)
    coeffs = np.zeros((64, 3), dtype=complex)
    coeffs[:, 1] = -0.5 * np.exp(1j * fam.t_nodes)
    coeffs[:, 2] = 1.0
    chain = track_zeros(JacobianField.from_taylor(fam, coeffs))
    assert chain.central_cycle_present
    assert sorted(br.kappa for br in chain.branches) == [1.0, 1.0]
    moving = [br for br in chain.branches if not br.is_central][0]
    assert moving.closed
    assert np.allclose(moving.roots, 0.5 * np.exp(1j * moving.t), atol=1e-10)


def test_synthetic_double_root():
    fam = build_rotating_circles(1.0, 2.0, 32)
    chain = track_zeros(JacobianField.from_taylor(fam, [0, 0, 1]))
    assert [br.kappa for br in chain.branches] == [2.0]
    assert chain.branches[0].is_central


def test_boundary_root_counts_half():
    roots, kappa = node_roots(np.array([-1.0, 1.0]))
    assert kappa.tolist() == [0.5]
    assert boundary_winding(np.array([-1.0, 1.0])) == 0.5


def test_sum_rule_and_branch_multiplicities(globevnik):
    _, _, _, J = globevnik
    chain = track_zeros(J)
    assert chain.central_cycle_present
    assert all(br.kappa >= 0.5 for br in chain.branches)
    for k in range(0, 128, 9):
        assert chain.kappa_sum(k) == boundary_winding(J.taylor_data[k])


def test_chain_csv(globevnik, tmp_path):
    chain = track_zeros(globevnik[3])
    path = tmp_path / "zeros.csv"
    chain.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "re_zeta", "im_zeta", "kappa", "branch_id"]
    assert len(rows) > len(chain.branches)


def test_count_jump_is_a_tracking_error():
    fam = build_rotating_circles(1.0, 2.0, 16)
    coeffs = np.zeros((16, 4), dtype=complex)
    coeffs[:8, 0] = 1.0
    coeffs[8:, 3] = 1.0
    with pytest.raises(TrackingInstability):
        track_zeros(JacobianField.from_taylor(fam, coeffs))


def test_directional_derivative_along_fibers(globevnik):
    fam, _, ext, _ = globevnik
    fibers = trace_fiber(fam, 0.4 + 0.3j)
    assert fibers
    assert directional_derivative_check(ext, fam, fibers) < 1e-6
