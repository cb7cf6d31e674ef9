import numpy as np
import pytest

from crfolio.extension import analyze, make_function
from crfolio.family import build_hopf_discs, build_rotating_circles, build_translated_circles
from crfolio.jacobian import JacobianField, track_zeros
from crfolio.numerics import ConfigurationError
from crfolio.verify import (CONDITION_STAR_FAILS, CR_CONFIRMED, HOLOMORPHIC_CONFIRMED,
                            INCONCLUSIVE, NONDEGENERATE_WITNESS, PRECONDITION_FAILS,
                            VerdictConfig, VerdictReport, counterexample_suite,
                            cr_residual_on_image, decide, far_probes, fiber_spread,
                            jump_profile, parallel_map, run_verdict, symmetry_relation,
                            thread_count)

THRESHOLDS = {"extension_rtol": 1e-8, "degeneracy": 1e-8, "spread": 1e-6, "cr": 1e-6}


def _report(**kw):
    base = dict(family={"ambient_dim": 1}, function="f", extension_residual=0.0,
                extension_holds=True, regularity={"regular": True},
                homology={"condition_a": True}, j_max=0.0, theta_residual=None,
                symmetry_gaps=[], fiber_spread=0.0, cr_residual=0.0, thresholds=THRESHOLDS)
    base.update(kw)
    return VerdictReport(**base)


@pytest.mark.parametrize("kw,expect", [
    ({}, (HOLOMORPHIC_CONFIRMED, "")),
    ({"extension_holds": False, "extension_residual": 1.0}, (CONDITION_STAR_FAILS, "")),
    ({"homology": {"condition_a": False}}, (PRECONDITION_FAILS, "condition_a")),
    ({"homology": {}}, (INCONCLUSIVE, "")),
    ({"regularity": {"regular": False}}, (PRECONDITION_FAILS, "regularity")),
    ({"j_max": None}, (INCONCLUSIVE, "")),
    ({"j_max": 0.3}, (NONDEGENERATE_WITNESS, "")),
    ({"fiber_spread": 1e-3}, (INCONCLUSIVE, "")),
    ({"cr_residual": None}, (INCONCLUSIVE, "")),
    ({"family": {"ambient_dim": 2}, "fiber_spread": None}, (CR_CONFIRMED, "")),
])
def test_decide_branches(kw, expect):
    assert decide(_report(**kw))[:2] == expect


def test_decide_stage_order():
    # a missing extension outranks every later stage
    ev = _report(extension_holds=False, homology={"condition_a": False}, j_max=1.0)
    assert decide(ev)[0] == CONDITION_STAR_FAILS
    assert _report(verdict=PRECONDITION_FAILS, which="condition_a").label() == \
        "PRECONDITION_FAILS(condition_a)"


def test_symmetry_for_synthetic_J():
    fam = build_rotating_circles(1.0, 2.0, 256)
    J = JacobianField.from_taylor(fam, [0, 1])
    chain = track_zeros(J)
    rep = symmetry_relation(J, chain, fam, 0.1 - 0.05j)
    assert rep.admissible
    assert rep.lhs == pytest.approx(2.0) and rep.rhs == pytest.approx(2.0, abs=1e-6)
    far = symmetry_relation(J, chain, fam, 8.0)
    assert far.lhs == 0 and abs(far.rhs) < 1e-6


def test_symmetry_needs_circle_family():
    fam = build_translated_circles(1.0, [0, 3], 32)
    J = JacobianField.from_taylor(fam, [0, 1])
    rep = symmetry_relation(J, track_zeros(J), fam, 1.5)
    assert not rep.admissible and "closed" in rep.reason


def test_far_probes_annulus():
    fam = build_rotating_circles(1.0, 2.0, 64)
    probes = far_probes(fam, 50, seed=1)
    assert np.all((np.abs(probes) >= 4.0 - 1e-9) & (np.abs(probes) <= 6.0 + 1e-9))
    assert np.array_equal(probes, far_probes(fam, 50, seed=1))


def test_jump_profile_rejects_bad_input():
    fam = build_translated_circles(1.0, [0, 3], 32)
    J = JacobianField.from_taylor(fam, [-0.1, 1])
    chain = track_zeros(J)
    with pytest.raises(ConfigurationError):
        jump_profile(J, chain, fam, [0.5, 5.0], samples=4)
    rot = build_rotating_circles(1.0, 2.0, 32)
    Jr = JacobianField.from_taylor(rot, [0, 1])
    with pytest.raises(ConfigurationError):
        jump_profile(Jr, track_zeros(Jr), rot, [-5, 5], samples=4)


def test_fiber_spread_and_cr_residual():
    fam = build_translated_circles(1.0, [0, 3], 64)
    ext = analyze(make_function("z_sq"), fam, 64)
    assert fiber_spread(ext, fam, 5, seed=2) < 1e-8
    assert cr_residual_on_image(make_function("z_sq"), fam) < 1e-6
    assert cr_residual_on_image(make_function("zbar"), fam) > 0.1


def test_thread_count(monkeypatch):
    monkeypatch.delenv("CRFOLIO_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("CRFOLIO_THREADS", "3")
    assert thread_count() == 3
    assert parallel_map(lambda x: x * x, range(7)) == [x * x for x in range(7)]
    monkeypatch.setenv("CRFOLIO_THREADS", "many")
    with pytest.raises(ConfigurationError):
        thread_count()


def test_verdicts_on_catalog_examples():
    cfg = VerdictConfig(size=128, raster=256, fibers=5)
    fam = build_translated_circles(1.0, [0, 3], 64)
    assert run_verdict(make_function("zbar"), fam, cfg).verdict == CONDITION_STAR_FAILS
    assert run_verdict(make_function("z_sq"), fam, cfg).verdict == HOLOMORPHIC_CONFIRMED
    rep = run_verdict(make_function("abs_z1_sq"), build_hopf_discs(), cfg)
    assert rep.label() == "PRECONDITION_FAILS(condition_a)"


def test_counterexample_suite():
    rep = counterexample_suite(size=128, resolution=128)
    assert rep.passed, rep.failed()
    assert len(rep.checks) >= 6
