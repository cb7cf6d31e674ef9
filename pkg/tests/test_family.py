import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crfolio.family import (ParamSpace, boundary_jacobian, build_custom, build_hopf_discs,
                            build_rotating_circles, build_tangent_lines, build_translated_circles,
                            closure_intersection_empty, critical_values, regularity_audit)
from crfolio.numerics import ConfigurationError, DomainError


def test_param_space_invariants():
    with pytest.raises(ConfigurationError):
        ParamSpace("circle", 4)
    with pytest.raises(ConfigurationError):
        ParamSpace("circle", 9)
    with pytest.raises(ConfigurationError):
        ParamSpace("torus", 16)
    iv = ParamSpace("interval", 16)
    assert iv.nodes[0] == 0.0 and iv.nodes[-1] == 1.0


@pytest.mark.parametrize("kind", ["circle", "interval"])
def test_interpolation_is_exact_at_nodes(kind):
    ps = ParamSpace(kind, 32)
    data = np.random.default_rng(0).normal(size=32)
    w, _ = ps.interp_matrix(ps.nodes)
    assert np.allclose(w @ data, data, atol=1e-12)


def test_circle_weights_agree_with_direct_sums():
    ps = ParamSpace("circle", 64)
    ts = np.concatenate([ps.nodes[:3], ps.nodes[:3] + 1e-6, [0.37, 2.9, 6.2]])
    w, dw = ps.interp_matrix(ts)
    for row, t in enumerate(ts):
        w1, dw1 = ps._axis_weights(t)
        assert np.allclose(w[row], w1, atol=1e-12)
        assert np.allclose(dw[row], dw1, atol=1e-9)


def test_rotating_circles_derivatives_are_exact():
    fam = build_rotating_circles(1.0, 2.0)
    for t in (0.0, 0.7, 3.3):
        assert fam.d_zeta(0.3 + 0.1j, t) == pytest.approx(2.0, abs=1e-12)
        assert fam.d_t(0.3 + 0.1j, t) == pytest.approx(1j * np.exp(1j * t), abs=1e-10)
        assert fam.eval(0.5, t) == pytest.approx(np.exp(1j * t) + 1.0, abs=1e-12)


def test_eval_domain_errors():
    fam = build_translated_circles(1.0, [0, 1])
    with pytest.raises(DomainError):
        fam.eval(1.5, 0.2)
    with pytest.raises(DomainError):
        fam.eval(0.5, 1.5)


def test_translated_constant_path_has_zero_t_derivative():
    fam = build_translated_circles(1.0, [0.5, 0.5])
    assert abs(fam.d_t(0.2j, 0.4)) < 1e-12


_BUILDERS = {
    "rotating": lambda: build_rotating_circles(1.0, 2.0, 64),
    "translated": lambda: build_translated_circles(1.0, [0, 1 + 1j, 3], 64),
    "custom": lambda: build_custom(
        np.stack([np.exp(1j * ParamSpace("circle", 64).nodes), 2 * np.ones(64), 0.1 * np.ones(64)],
                 axis=-1), ParamSpace("circle", 64)),
}


@pytest.mark.parametrize("name", sorted(_BUILDERS))
def test_derivatives_match_finite_differences(name):
    fam = _BUILDERS[name]()
    rng = np.random.default_rng(1)
    h = 1e-6
    worst_z = worst_t = 0.0
    for _ in range(200):
        z = 0.9 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        t = rng.uniform(0.05, 0.95) * (2 * np.pi if fam.params.periodic else 1.0)
        dz = (fam.eval(z + h, t) - fam.eval(z - h, t)) / (2 * h)
        dt = (fam.eval(z, t + h) - fam.eval(z, t - h)) / (2 * h)
        worst_z = max(worst_z, abs(dz - fam.d_zeta(z, t)) / max(1.0, abs(dz)))
        worst_t = max(worst_t, abs(dt - fam.d_t(z, t)) / max(1.0, abs(dt)))
    assert worst_z < 1e-6 and worst_t < 1e-6


def test_custom_rejects_degenerate_disc():
    ps = ParamSpace("interval", 16)
    table = np.zeros((16, 3), dtype=complex)
    table[:, 2] = 1.0  # g = zeta^2
    with pytest.raises(ConfigurationError, match="degenerate disc at t="):
        build_custom(table, ps)


def test_custom_accepts_small_perturbation():
    ps = ParamSpace("interval", 16)
    table = np.zeros((16, 3), dtype=complex)
    table[:, 1] = 1.0
    table[:, 2] = 0.1 * ps.nodes
    build_custom(table, ps)


def test_custom_reproduces_builtin_bitwise():
    fam = build_rotating_circles(1.0, 2.0, 64)
    again = build_custom(fam.taylor_data[:, 0, :], ParamSpace("circle", 64))
    assert np.array_equal(again.taylor_data, fam.taylor_data)
    z = np.array([0.2 + 0.3j, -0.7])
    for t in (0.0, 1.234):
        assert np.allclose(again.eval(z, t), fam.eval(z, t), atol=1e-12)


def test_rough_taylor_data_rejected():
    ps = ParamSpace("circle", 16)
    table = np.zeros((16, 2), dtype=complex)
    table[:, 1] = 1.0
    table[::2, 0] = 5.0
    with pytest.raises(ConfigurationError, match="varies too fast"):
        build_custom(table, ps)


def test_builder_argument_errors():
    with pytest.raises(ConfigurationError):
        build_rotating_circles(1.0, 0.0)
    with pytest.raises(ConfigurationError):
        build_translated_circles(-1.0, [0, 1])
    with pytest.raises(ConfigurationError):
        build_tangent_lines(1.0, 1.0)


def test_tangent_lines_boundary_on_sphere():
    fam = build_tangent_lines(1.0, 0.5)
    zeta = np.exp(2j * np.pi * np.arange(16) / 16)
    g = fam.grid_values(zeta)[fam.params.valid_mask]
    assert np.max(np.abs(np.sum(np.abs(g) ** 2, axis=-2) - 1.0)) < 1e-12
    small = build_tangent_lines(1.0, 0.999)
    rho = np.linalg.norm(small.taylor_data[..., 1], axis=-1)[small.params.valid_mask]
    assert np.allclose(rho, np.sqrt(1 - 0.999 ** 2), rtol=1e-9)


def test_hopf_discs_pass_through_origin_and_lie_on_sphere():
    fam = build_hopf_discs()
    valid = fam.params.valid_mask
    assert np.all(fam.grid_values(np.array([0.0]))[valid] == 0)
    zeta = np.exp(2j * np.pi * np.arange(8) / 8)
    g = fam.grid_values(zeta)[valid]
    assert np.max(np.abs(np.sum(np.abs(g) ** 2, axis=-2) - 1.0)) < 1e-12


@settings(deadline=None, max_examples=10)
@given(st.floats(0.0, 3.0), st.floats(0.2, 3.0))
def test_boundary_jacobian_closed_form(R, r):
    fam = build_rotating_circles(R, r, 32)
    D = boundary_jacobian(fam, 32)
    psi = 2 * np.pi * np.arange(32) / 32
    exact = 2j * R * r * np.sin(fam.t_nodes[:, None] - psi)
    assert np.max(np.abs(D - exact)) <= 1e-12 * max(1.0, R * r)


def test_closure_intersection_examples():
    res = closure_intersection_empty(build_rotating_circles(1.0, 2.0))
    assert not res.empty and abs(res.witness) < 1e-2
    assert closure_intersection_empty(build_translated_circles(1.0, [0, 3])).empty
    assert closure_intersection_empty(build_rotating_circles(2.0, 1.0)).empty
    assert not closure_intersection_empty(build_translated_circles(1.0, [0, 0])).empty


def test_closure_intersection_brute_force_oracle():
    # discs of radius 1 around 0 and 1.5: the lens is nonempty; around 0 and 2.5 it is empty
    for end, expect_empty in ((1.5, False), (2.5, True)):
        fam = build_translated_circles(1.0, [0, end], 64)
        xs = np.linspace(-1, 3.5, 400)
        grid = xs[None, :] + 1j * np.linspace(-1, 1, 200)[:, None]
        centres = fam.taylor_data[:, 0, 0]
        common = np.all(np.abs(grid[..., None] - centres) <= 1.0, axis=-1).any()
        assert closure_intersection_empty(fam).empty == (not common) == expect_empty


def test_regularity_rotating():
    rep = regularity_audit(build_rotating_circles(1.0, 2.0))
    assert rep.interior_rank_ok and rep.critical_on_boundary
    crit = critical_values(build_rotating_circles(1.0, 2.0))
    radii = np.abs(crit)
    assert np.all((np.abs(radii - 1) < 0.05) | (np.abs(radii - 3) < 0.05))
    hist = rep.boundary_rank_histogram
    assert sum(hist.values()) == 256 * 256


def test_regularity_constant_family():
    rep = regularity_audit(build_rotating_circles(0.0, 1.0))
    assert rep.interior_rank_ok
    assert rep.boundary_rank_histogram["rank_k"] == 0


def test_regularity_translated():
    rep = regularity_audit(build_translated_circles(1.0, [0, 3]))
    assert rep.interior_rank_ok and rep.critical_on_boundary
