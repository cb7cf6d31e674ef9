import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crfolio.extension import analyze, make_function
from crfolio.family import build_hopf_discs, build_rotating_circles, build_tangent_lines
from crfolio.hypersurface import (K_mu_reality, boundary_incidence, boundary_samples,
                                  compute_minors, dbar_mu_nu, lemma34_check, quadric, sphere,
                                  tangential_cr_residual, trace_constancy)
from crfolio.numerics import ConfigurationError


@pytest.fixture(scope="module")
def hopf():
    return build_hopf_discs()


@pytest.mark.parametrize("build", [build_hopf_discs, lambda: build_tangent_lines(1.0, 0.5)])
def test_K_mu_is_real(build):
    rep = K_mu_reality(build(), sphere(1.0))
    assert rep.incidence < 1e-12
    assert max(rep.max_rel_imag.values()) < 1e-10
    assert sum(rep.samples.values()) > 0


def test_K_mu_needs_incidence(hopf):
    assert boundary_incidence(hopf, sphere(1.01)) > 1e-3
    with pytest.raises(ConfigurationError):
        K_mu_reality(hopf, sphere(1.01))


def test_box3_required():
    with pytest.raises(ConfigurationError):
        K_mu_reality(build_rotating_circles(1.0, 2.0), sphere())


def test_hopf_trace_is_constant(hopf):
    ext = analyze(make_function("abs_z1_sq"), hopf, 32)
    assert trace_constancy(ext) < 1e-12


def test_tangential_dbar_values():
    s = sphere()
    z1 = make_function("expr:z1")
    z2bar = make_function("expr:z2bar")
    pts = np.array([[0.6, 0.8j], [1 / np.sqrt(2), 1 / np.sqrt(2)]])
    assert tangential_cr_residual(z1, s, pts) < 1e-9
    vals = np.abs(dbar_mu_nu(z2bar, s, np.array([[0.0, 1.0], pts[1]]), 1, 2))
    assert vals[0] < 1e-9
    assert vals[1] == pytest.approx(np.sqrt(0.5), abs=1e-9)


def test_tangential_residual_rejects_off_surface_points():
    with pytest.raises(ConfigurationError):
        tangential_cr_residual(make_function("expr:z1"), sphere(), [[1.0, 1.0]])


def test_antisymmetry(hopf):
    f = make_function("expr:z1 * z2bar")
    z = boundary_samples(hopf, 8)
    s = sphere()
    assert np.array_equal(dbar_mu_nu(f, s, z, 1, 2), -dbar_mu_nu(f, s, z, 2, 1))
    assert np.all(dbar_mu_nu(f, s, z, 1, 1) == 0)


def test_minors_vanish_at_centre(hopf):
    m = compute_minors(analyze(make_function("abs_z1_sq"), hopf, 32), hopf)
    for k in range(4):
        assert m.at_centre(k) == 0.0


def test_holomorphic_data_has_small_minors(hopf):
    m = compute_minors(analyze(make_function("expr:z1 + 2 * z2**2"), hopf, 32), hopf)
    assert all(m.relative_max(k) < 1e-9 for k in range(4))
    assert lemma34_check(m)


def test_quadric_validation():
    with pytest.raises(ConfigurationError):
        quadric([[1, 1j], [1j, 1]])
    with pytest.raises(ConfigurationError):
        sphere(0.0)
    with pytest.raises(ConfigurationError):
        sphere().check_gradient(np.zeros((1, 2)))


@settings(deadline=None, max_examples=30)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_quadric_gradient_matches_finite_differences(a, b, c, d):
    q = quadric([[2.0, 0.5 - 0.25j], [0.5 + 0.25j, -1.0]], b=(0.3j, -0.2), c=0.5)
    z = np.array([complex(a, b), complex(c, d)])
    h = 1e-6
    for j in range(2):
        e = np.zeros(2, dtype=complex)
        e[j] = h
        dx = (q.rho(z + e) - q.rho(z - e)) / (2 * h)
        dy = (q.rho(z + 1j * e) - q.rho(z - 1j * e)) / (2 * h)
        assert 0.5 * (dx + 1j * dy) == pytest.approx(q.dbar_rho(z)[j], abs=1e-6)
        assert q.d_rho(z)[j] == pytest.approx(np.conj(q.dbar_rho(z)[j]))
