import csv

import numpy as np
import pytest

from crfolio.extension import analyze, make_function
from crfolio.family import build_rotating_circles, build_translated_circles
from crfolio.numerics import ConfigurationError, NearSingularWinding
from crfolio.topology import (NotRegularValue, admissible_probe, boundary_preimages,
                              brouwer_degree, fibers_to_csv, homology_test, in_end_discs,
                              trace_fiber, zero_count_integral)


@pytest.fixture(scope="module")
def rotating():
    return build_rotating_circles(1.0, 2.0, 128)


def test_fiber_over_origin_is_closed_form(rotating):
    fibers = trace_fiber(rotating, 0.0)
    assert len(fibers) == 1
    fib = fibers[0]
    assert fib.closed and not fib.hit_boundary
    assert np.max(np.abs(fib.zeta + 0.5 * np.exp(1j * fib.t))) < 1e-8
    assert fib.residual(rotating) < 1e-8


def test_fiber_leaving_through_boundary(rotating):
    fibers = trace_fiber(rotating, 2.0)
    assert len(fibers) == 1
    fib = fibers[0]
    assert fib.hit_boundary and not fib.closed
    ends = np.sort(np.angle(np.exp(1j * fib.t[[0, -1]])))
    assert np.allclose(ends, [-np.arccos(0.25), np.arccos(0.25)], atol=1e-6)
    assert np.allclose(np.abs(fib.zeta[[0, -1]]), 1.0, atol=1e-8)
    assert np.allclose(fib.zeta, (2.0 - np.exp(1j * fib.t)) / 2.0, atol=1e-8)


def test_fiber_on_translated_family_carries_values():
    fam = build_translated_circles(1.0, [0, 3], 64)
    ext = analyze(make_function("z_sq"), fam, 64)
    fibers = trace_fiber(fam, 0.5, ext=ext)
    assert len(fibers) == 1
    fib = fibers[0]
    assert fib.residual(fam) < 1e-8
    assert np.allclose(fib.f_values, 0.25, atol=1e-8)
    assert fib.t[0] == pytest.approx(0.0) and fib.t[-1] == pytest.approx(0.5, abs=1e-6)


def test_critical_values_are_rejected(rotating):
    with pytest.raises(NotRegularValue):
        trace_fiber(rotating, 1.0)
    assert not admissible_probe(rotating, 3.0)


def test_empty_fiber(rotating):
    assert trace_fiber(rotating, 10.0) == []


def test_fibers_csv(rotating, tmp_path):
    path = tmp_path / "fibers.csv"
    fibers = trace_fiber(rotating, 0.0)
    fibers_to_csv(fibers, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["fiber", "t", "re_zeta", "im_zeta"]
    assert len(rows) == 1 + len(fibers[0].t)


def test_boundary_preimages_signs(rotating):
    pre = boundary_preimages(rotating, 2.0)
    assert sorted(pre.sign.tolist()) == [-1, 1]
    g = np.exp(1j * pre.t) + 2 * np.exp(1j * pre.psi)
    assert np.allclose(g, 2.0, atol=1e-10)
    assert boundary_preimages(rotating, 10.0).psi.size == 0


def test_degree_excluded_set(rotating):
    with pytest.raises(ConfigurationError):
        brouwer_degree(rotating, 2.0, exclude=lambda z: np.abs(z) < 2.5)
    assert brouwer_degree(rotating, 2.0, exclude=lambda z: np.abs(z) < 0.5) == 0


def test_end_discs():
    fam = build_translated_circles(1.0, [0, 3], 64)
    assert in_end_discs(fam, 0.2) and in_end_discs(fam, 3.5)
    assert not in_end_discs(fam, 1.5)
    assert not in_end_discs(build_rotating_circles(1.0, 2.0), 0.0)


def test_zero_count_integral(rotating):
    assert zero_count_integral(rotating, 0.0, 0.3) == 1
    assert zero_count_integral(rotating, 10.0, 0.3) == 0
    with pytest.raises(NearSingularWinding):
        zero_count_integral(rotating, 3.0, 0.0)


@pytest.mark.parametrize("family,expect", [
    (lambda: build_rotating_circles(1.0, 2.0), False),
    (lambda: build_rotating_circles(2.0, 1.0), True),
    (lambda: build_translated_circles(1.0, [0, 3]), True),
    (lambda: build_translated_circles(1.0, [0, 0.5]), False),
])
def test_homology_routes(family, expect):
    verdict = homology_test(family())
    assert verdict.condition_a == expect
    assert verdict.condition_iii == expect
    assert verdict.routes_agree
