"""Acceptance criteria 1-10, each at its stated tolerance.

The terminal summary prints one PASS/FAIL line per criterion (see conftest.py).
"""

import json

import numpy as np
import pytest

from crfolio import cli
from crfolio.extension import analyze, make_function
from crfolio.family import (ParamSpace, boundary_jacobian, build_custom, build_hopf_discs,
                            build_rotating_circles, build_tangent_lines, build_translated_circles,
                            closure_intersection_empty)
from crfolio.hypersurface import K_mu_reality, dbar_mu_nu, sphere, trace_constancy
from crfolio.jacobian import (JacobianField, boundary_winding, compute_J, node_roots,
                              track_zeros)
from crfolio.topology import (admissible_probe, boundary_preimages, brouwer_degree,
                              homology_test, trace_fiber, zero_count_integral)
from crfolio.verify import (HOLOMORPHIC_CONFIRMED, VerdictConfig, cr_residual_on_image,
                            far_probes, jump_profile, run_verdict,
                            symmetry_relation)


@pytest.fixture(scope="module")
def globevnik():
    fam = build_rotating_circles(1.0, 2.0)
    f = make_function("globevnik_n", n=2)
    ext = analyze(f, fam)
    J = compute_J(ext, fam)
    return fam, f, ext, J, track_zeros(J)


def _custom_circle_family(resolution=256):
    params = ParamSpace("circle", resolution)
    table = np.zeros((resolution, 3), dtype=complex)
    table[:, 0] = np.exp(1j * params.nodes)
    table[:, 1] = 2.0
    table[:, 2] = 0.1
    return build_custom(table, params)


def _random_admissible(family, count, seed, box):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        b = complex(rng.uniform(box[0], box[1]), rng.uniform(box[2], box[3]))
        if admissible_probe(family, b):
            out.append(b)
    return out


# 1 -------------------------------------------------------------------------


@pytest.mark.parametrize("R,r", [(1.0, 2.0), (2.0, 1.0), (0.5, 3.0), (1.0, 1.0)])
def test_criterion_1_boundary_jacobian_closed_form(R, r):
    fam = build_rotating_circles(R, r)
    D = boundary_jacobian(fam, 256)
    t = fam.t_nodes[:, None]
    psi = 2 * np.pi * np.arange(256) / 256
    exact = 2j * R * r * np.sin(t - psi)
    assert np.max(np.abs(D - exact)) / np.max(np.abs(exact)) < 1e-8


# 2 -------------------------------------------------------------------------


def test_criterion_2_globevnik_counterexample(globevnik):
    fam, f, ext, J, _ = globevnik
    assert ext.residual < 1e-10
    inter = closure_intersection_empty(fam)
    assert not inter.empty
    assert abs(inter.witness) < 1e-2
    assert J.j_max > 0.1
    assert cr_residual_on_image(f, fam) > 0.1
    rep = run_verdict(f, fam)
    assert rep.label() == "PRECONDITION_FAILS(condition_a)"


def test_criterion_2_pole_inside_when_R_exceeds_r():
    ext = analyze(make_function("globevnik_n", n=2), build_rotating_circles(2.0, 1.0))
    assert ext.residual > 0.1


# 3 -------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["rotating", "translated", "custom"])
def test_criterion_3_brouwer_degree_zero(name):
    if name == "rotating":
        fam, box = build_rotating_circles(1.0, 2.0), (-3.6, 3.6, -3.6, 3.6)
    elif name == "translated":
        fam, box = build_translated_circles(1.0, [0, 3]), (-1.5, 4.5, -1.5, 1.5)
    else:
        fam, box = _custom_circle_family(), (-3.8, 3.8, -3.8, 3.8)
    probes = _random_admissible(fam, 20, seed=3, box=box)
    hits = 0
    for b in probes:
        pre = boundary_preimages(fam, b)
        hits += len(pre.psi) > 0
        assert pre.degree == 0, b
    assert hits > 0  # the probes do reach the image


def test_criterion_3_two_preimages_of_opposite_sign():
    pre = boundary_preimages(build_rotating_circles(1.0, 2.0), 2.0)
    assert len(pre.psi) == 2
    assert sorted(pre.sign.tolist()) == [-1, 1]
    assert brouwer_degree(build_rotating_circles(1.0, 2.0), 2.0) == 0


# 4 -------------------------------------------------------------------------


def test_criterion_4_symmetry_globevnik(globevnik):
    fam, _, _, J, chain = globevnik
    probes = far_probes(fam, 20, seed=4)
    assert np.all(np.abs(probes) > 3)
    for b in probes:
        r = symmetry_relation(J, chain, fam, b)
        assert r.admissible, r.reason
        assert abs(r.lhs) < 0.05 and abs(r.rhs) < 0.05 and r.abs_gap < 0.05


def test_criterion_4_symmetry_synthetic():
    fam = build_rotating_circles(1.0, 2.0)
    J = JacobianField.from_taylor(fam, [0.0, 1.0])
    chain = track_zeros(J)
    for b in (0.0, 0.3, -0.2j, 0.25 + 0.25j):
        r = symmetry_relation(J, chain, fam, b)
        assert r.admissible, r.reason
        assert abs(r.lhs - 2) < 0.05 and abs(r.rhs - 2) < 0.05


# 5 -------------------------------------------------------------------------


@pytest.mark.parametrize("R,r,n", [(1.0, 2.0, 2), (1.0, 2.0, 3), (1.0, 3.0, 2), (0.5, 2.0, 2)])
def test_criterion_5_zero_tracking(R, r, n):
    fam = build_rotating_circles(R, r)
    J = compute_J(analyze(make_function("globevnik_n", n=n), fam), fam)
    assert J.j_max > 1e-8
    chain = track_zeros(J)
    central = [br for br in chain.branches if br.is_central]
    assert central and all(br.kappa >= 1 for br in central)
    ts = np.random.default_rng(5).uniform(0, 2 * np.pi, 50)
    coeffs = J.coefficients_many(ts)
    for c in coeffs:
        _, kappa = node_roots(c)
        assert kappa.sum() == boundary_winding(c)


# 6 -------------------------------------------------------------------------


def test_criterion_6_central_fiber_closed_form():
    fam = build_rotating_circles(1.0, 2.0)
    fibers = trace_fiber(fam, 0.0)
    assert len(fibers) == 1 and fibers[0].closed
    fib = fibers[0]
    assert np.ptp(fib.t) > 2 * np.pi * (1 - 2 / 256)
    assert np.max(np.abs(fib.zeta + np.exp(1j * fib.t) / 2)) < 1e-8


@pytest.mark.parametrize("family,probes", [
    (lambda: build_rotating_circles(1.0, 2.0), [0.0, 2.0, 2.0j, -1.8 + 0.5j, 0.3]),
    (lambda: build_rotating_circles(2.0, 1.0), [2.0, -2.0j, 1.6 + 1.2j]),
    (lambda: build_translated_circles(1.0, [0, 3]), [1.5, 1.5 + 0.2j, 0.8 - 0.3j, 2.5 + 0.5j]),
    (lambda: build_translated_circles(1.0, [0, 0.5]), [0.25, 0.25 + 0.3j]),
])
def test_criterion_6_fiber_residuals(family, probes):
    fam = family()
    traced = 0
    for b in probes:
        for fib in trace_fiber(fam, b):
            traced += 1
            assert fib.residual(fam) < 1e-8
    assert traced > 0


# 7 -------------------------------------------------------------------------


@pytest.mark.parametrize("fname", ["z_sq", "expr:z**3 + 2*z", "const"])
@pytest.mark.parametrize("family", ["translated", "rotating21"])
def test_criterion_7_degeneracy_equivalence(fname, family):
    fam = (build_translated_circles(1.0, [0, 3]) if family == "translated"
           else build_rotating_circles(2.0, 1.0))
    f = make_function(fname)
    rep = run_verdict(f, fam)
    assert rep.j_max < 1e-8
    assert rep.fiber_spread < 1e-6
    assert rep.cr_residual < 1e-6
    assert rep.verdict == HOLOMORPHIC_CONFIRMED


# 8 -------------------------------------------------------------------------


def test_criterion_8_jump_profile():
    fam = build_translated_circles(1.0, [0, 3])
    J = JacobianField.from_taylor(fam, [-0.1, 1.0])
    chain = track_zeros(J)
    prof = jump_profile(J, chain, fam, [-1.5 + 0.3j, 4.5 + 0.3j], samples=50)
    assert prof.admissible.all()
    Z = np.array(prof.Z, dtype=float)
    assert abs(Z[0]) < 0.05 and abs(Z[-1]) < 0.05
    N = np.array([n.real for n in prof.N])
    assert np.max(np.abs(np.diff(N))) < 10 * prof.path_mesh * J.scale
    worst = float(np.max(np.abs(Z - np.round(Z))))
    assert worst < 0.05, f"Z is not integer-valued: max |Z - round Z| = {worst:.3f}"


# 9 -------------------------------------------------------------------------


@pytest.mark.parametrize("family", [lambda: build_hopf_discs(), lambda: build_tangent_lines(1.0, 0.5)])
def test_criterion_9_K_mu_reality(family):
    rep = K_mu_reality(family(), sphere(1.0))
    assert max(rep.max_rel_imag.values()) < 1e-8


def test_criterion_9_hopf_counterexample():
    f = make_function("abs_z1_sq")
    ext = analyze(f, build_hopf_discs(), 64)
    assert trace_constancy(ext) < 1e-12
    p = np.array([[1 / np.sqrt(2), 1 / np.sqrt(2)]], dtype=complex)
    val = dbar_mu_nu(f, sphere(1.0), p, 1, 2)[0]
    assert abs(abs(val) - 0.5) < 1e-4
    rng = np.random.default_rng(9)
    z = rng.normal(size=(32, 2)) + 1j * rng.normal(size=(32, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    assert np.array_equal(dbar_mu_nu(f, sphere(1.0), z, 1, 2), -dbar_mu_nu(f, sphere(1.0), z, 2, 1))


# 10 ------------------------------------------------------------------------

_DETERMINISM_CONFIGS = {
    "verdict": {"family": {"builder": "translated_circles", "rho": 1, "center_path": [0, 3]},
                "function": "z_sq"},
    "fibers": {"family": {"builder": "rotating_circles", "R": 1, "r": 2},
               "function": {"name": "globevnik_n", "n": 2}, "probes": [0, 2]},
    "symmetry": {"family": {"builder": "rotating_circles", "R": 1, "r": 2},
                 "jacobian": {"taylor": [0, 1]}, "probe_count": 4},
    "jumps": {"family": {"builder": "translated_circles", "rho": 1, "center_path": [0, 3]},
              "jacobian": {"taylor": [-0.1, 1]}, "path": [[-1.5, 0.3], [4.5, 0.3]],
              "samples": 12},
    "hypersurface": {"family": {"builder": "hopf_discs"}, "function": "abs_z1_sq"},
    "counterexamples": {},
}


@pytest.mark.parametrize("task", sorted(_DETERMINISM_CONFIGS))
def test_criterion_10_byte_identical_reports(task, tmp_path):
    raw = dict(_DETERMINISM_CONFIGS[task], schema=1)
    dumps = []
    for k in range(2):
        cfg = cli.normalize_config(json.loads(json.dumps(raw)), task)
        code, report = cli.run(cfg, tmp_path / str(k))
        assert "error" not in report
        stable = {key: report[key] for key in report if key != "meta"}
        dumps.append(cli.dumps(stable))
        csvs = sorted((tmp_path / str(k)).glob("*.csv"))
        dumps.append("".join(p.read_text() for p in csvs))
    assert dumps[0] == dumps[2] and dumps[1] == dumps[3]


def _integer_summary(fam, f, size, raster):
    """Verdict plus every integer-valued quantity of a builtin planar instance."""
    cfg = VerdictConfig(size=size, raster=raster)
    rep = run_verdict(f, fam, cfg)
    out = {"verdict": rep.label()}
    hom = homology_test(fam, size, raster)
    out["homology"] = (hom.condition_a, hom.condition_iii)
    out["degree_2"] = brouwer_degree(fam, 2.0) if admissible_probe(fam, 2.0, size) else None
    out["preimages_2"] = (len(boundary_preimages(fam, 2.0).psi)
                          if admissible_probe(fam, 2.0, size) else None)
    out["zero_count"] = zero_count_integral(fam, 0.1 + 0.05j, fam.t_nodes[3], size)
    if rep.j_max is not None and rep.j_max > 1e-8:
        chain = track_zeros(compute_J(analyze(f, fam, size), fam))
        out["kappas"] = sorted(br.kappa for br in chain.branches)
    return out


@pytest.mark.parametrize("instance", ["globevnik", "rotating21_zbar", "translated_z_sq",
                                      "translated_short_const"])
def test_criterion_10_grid_doubling(instance):
    def build(res):
        if instance == "globevnik":
            return build_rotating_circles(1.0, 2.0, res), make_function("globevnik_n", n=2)
        if instance == "rotating21_zbar":
            return build_rotating_circles(2.0, 1.0, res), make_function("zbar")
        if instance == "translated_z_sq":
            return build_translated_circles(1.0, [0, 3], res), make_function("z_sq")
        return build_translated_circles(1.0, [0, 0.5], res), make_function("const")

    base = _integer_summary(*build(256), 256, 512)
    fine = _integer_summary(*build(512), 512, 1024)
    assert base == fine


def test_criterion_10_hypersurface_doubling():
    f = make_function("abs_z1_sq")
    labels = []
    for res, size in ((8, 128), (16, 256)):
        rep = run_verdict(f, build_hopf_discs(res), VerdictConfig(size=size))
        labels.append(rep.label())
    assert labels[0] == labels[1]
