"""Theorem-level checks: the symmetry relation, jump profiles and verdicts.

``run_verdict`` first gathers evidence (extension residual, condition (a),
regularity, the size of the Jacobian, fiber spreads, Cauchy-Riemann residuals)
and then maps the evidence to a verdict with ``decide``, a pure function.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .extension import BoundaryFunction, ExtensionField, analyze, dbar_fd, make_function
from .family import DiscFamily, regularity_audit
from .hypersurface import (Hypersurface, K_mu_reality, boundary_samples, compute_minors,
                           dbar_mu_nu, sphere, tangential_cr_residual, trace_constancy)
from .jacobian import (DegenerateTheta, JacobianField, ZeroChain, compute_J, theta_field,
                       track_zeros)
from .numerics import (ConfigurationError, NearSingularWinding, WindingError, argument_increment,
                       winding_number)
from .topology import (Fiber, NotRegularValue, _Level, _signed_crossings, _union_raster,
                       homology_test, trace_fiber)

HOLOMORPHIC_CONFIRMED = "HOLOMORPHIC_CONFIRMED"
CR_CONFIRMED = "CR_CONFIRMED"
CONDITION_STAR_FAILS = "CONDITION_STAR_FAILS"
PRECONDITION_FAILS = "PRECONDITION_FAILS"
NONDEGENERATE_WITNESS = "NONDEGENERATE_WITNESS"
INCONCLUSIVE = "INCONCLUSIVE"


def thread_count() -> int:
    """Worker cap from ``CRFOLIO_THREADS`` (default 1)."""
    raw = os.environ.get("CRFOLIO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"CRFOLIO_THREADS must be an integer, got {raw!r}") from None


def parallel_map(fn, items) -> list:
    """Order-preserving map over at most ``thread_count()`` threads."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# symmetry relation


@dataclass(frozen=True)
class SymmetryReport:
    b: complex
    lhs: complex
    rhs: complex
    abs_gap: float
    admissible: bool
    reason: str = ""


def _densify(family: DiscFamily, fiber: Fiber, values_fn, max_turn: float = np.pi / 8,
             depth: int = 12):
    """Samples of ``values_fn`` along a fiber with midpoints until the phase moves slowly."""
    level = _Level(family, fiber.b)
    t = list(fiber.t)
    z = list(fiber.zeta)
    vals = list(values_fn(np.array(z), np.array(t)))
    for _ in range(depth):
        new_t, new_z, new_v = [t[0]], [z[0]], [vals[0]]
        refined = False
        for k in range(len(t) - 1):
            if abs(np.angle(vals[k + 1] / vals[k])) > max_turn:
                tm = 0.5 * (t[k] + t[k + 1])
                zm = level.project(0.5 * (z[k] + z[k + 1]), _wrap(family, tm))
                new_t.append(tm)
                new_z.append(zm)
                new_v.append(values_fn(np.array([zm]), np.array([tm]))[0])
                refined = True
            new_t.append(t[k + 1])
            new_z.append(z[k + 1])
            new_v.append(vals[k + 1])
        t, z, vals = new_t, new_z, new_v
        if not refined:
            break
    return np.array(t), np.array(z), np.array(vals)


def _wrap(family: DiscFamily, t):
    return np.mod(t, 2 * np.pi) if family.params.periodic else t


def _chain_images(family: DiscFamily, chain: ZeroChain):
    """``(kappa, G(zeta_j(t), t), closed)`` for every branch."""
    out = []
    for br in chain.branches:
        g, _, _ = family.eval_many(br.roots, _wrap(family, br.t))
        out.append((br.kappa, g, br.closed))
    return out


def fiber_argument_variation(J: JacobianField, fibers) -> float:
    """``(1/pi) * sum of Var arg J`` along the traced fibers (closed or open)."""
    total = 0.0
    family = J.family

    def values(z, t):
        return J.eval_many(z, _wrap(family, t))

    for fib in fibers:
        if len(fib.t) < 2:
            continue
        _, _, vals = _densify(family, fib, values)
        total += argument_increment(vals, closed=fib.closed)
    return total / np.pi


def _fiber_clear_of_zeros(J: JacobianField, chain: ZeroChain, fibers, mesh: float) -> str:
    """Empty string if every tracked root stays at least ``5 * mesh`` from the fibers."""
    family = J.family
    nodes = family.t_nodes
    for fib in fibers:
        tt = _wrap(family, fib.t)
        idx = np.searchsorted(nodes, tt).clip(0, len(nodes) - 1)
        for k, z, t in zip(idx, fib.zeta, tt):
            for kk in {k, max(k - 1, 0)}:
                if kk in chain.zero_disc_nodes:
                    return f"fiber meets the zero disc at t={nodes[kk]:.6g}"
                roots, _ = chain.node_roots[kk]
                if roots.size and np.min(np.abs(roots - z)) < 5.0 * mesh:
                    return f"fiber passes within 5 mesh of a zero of J at t={t:.6g}"
    return ""


def symmetry_relation(J: JacobianField, chain: ZeroChain, family: DiscFamily, b: complex,
                      size: int = 256) -> SymmetryReport:
    """Both sides of the symmetry relation at ``b`` for a circle family.

    Left: ``2 * sum kappa_j * winding(G(C_j) - b)`` over closed zero branches.
    Right: ``(1/pi) * Var arg J`` along the fiber ``G^{-1}(b)``, i.e. the
    argument variation of ``Theta`` divided by ``2 pi``.
    """
    b = complex(b)
    if not family.params.periodic:
        return SymmetryReport(b, 0j, 0j, np.nan, False, "relation needs closed zero chains")
    if any(not br.closed for br in chain.branches):
        return SymmetryReport(b, 0j, 0j, np.nan, False, "a zero branch does not close")
    lhs = 0.0
    try:
        for kappa, curve, _ in _chain_images(family, chain):
            if np.ptp(curve.real) + np.ptp(curve.imag) == 0.0:
                if curve[0] == b:
                    raise NearSingularWinding("b is the image of a zero branch")
                continue
            lhs += 2.0 * kappa * winding_number(curve, b)
    except WindingError as exc:
        return SymmetryReport(b, 0j, 0j, np.nan, False, f"left side: {exc}")
    try:
        fibers = trace_fiber(family, b, size=size)
    except NotRegularValue as exc:
        return SymmetryReport(b, complex(lhs), 0j, np.nan, False, str(exc))
    mesh = 2 * np.pi / size
    reason = _fiber_clear_of_zeros(J, chain, fibers, mesh)
    if reason:
        return SymmetryReport(b, complex(lhs), 0j, np.nan, False, reason)
    rhs = fiber_argument_variation(J, fibers)
    return SymmetryReport(b, complex(lhs), complex(rhs), float(abs(lhs - rhs)), True)


def far_probes(family: DiscFamily, count: int, seed: int = 0, inner: float = None,
               outer: float = None) -> np.ndarray:
    """Random probes in an annulus around the image that clears the winding checks."""
    rng = np.random.default_rng(seed)
    vals = family.grid_values(family.boundary_points(256))[:, 0, :]
    reach = float(np.max(np.abs(vals)))
    inner = reach + 1.0 if inner is None else inner
    outer = reach + 3.0 if outer is None else outer
    r = rng.uniform(inner, outer, count)
    a = rng.uniform(0.0, 2 * np.pi, count)
    return r * np.exp(1j * a)


# ---------------------------------------------------------------------------
# jump profile


class PathHitsChain(ValueError):
    pass


@dataclass(frozen=True)
class JumpProfile:
    probes: np.ndarray
    chi: np.ndarray
    Z: list
    N: list
    jump_events: list
    admissible: np.ndarray

    @property
    def path_mesh(self) -> float:
        return float(np.max(np.abs(np.diff(self.probes))))


def sample_path(path, count: int) -> np.ndarray:
    """``count`` points equally spaced in arclength along a polyline."""
    path = np.asarray(path, dtype=complex).ravel()
    if path.size < 2:
        raise ConfigurationError("a path needs at least two vertices")
    seg = np.abs(np.diff(path))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], count)
    return np.interp(target, s, path.real) + 1j * np.interp(target, s, path.imag)


def _open_log_integral(curve, b) -> complex:
    """``integral of dz / (z - b)`` along an open polyline."""
    w = curve - b
    return complex(np.log(np.abs(w[-1]) / np.abs(w[0])) + 1j * argument_increment(w, closed=False))


def jump_profile(J: JacobianField, chain: ZeroChain, family: DiscFamily, path,
                 samples: int = 50, size: int = 256) -> JumpProfile:
    """``chi = Z + N`` along a path of probes for an interval family.

    ``chi(b) = (1/(pi i)) sum kappa_j integral over G(C_j) of dz / (z - b)``,
    ``Z(b) = (1/pi) Var arg J`` along the fiber (``None`` where the fiber runs
    into zeros of ``J``) and ``N = chi - Z``.
    """
    if family.params.periodic:
        raise ConfigurationError("jump profiles are defined for interval families")
    probes = sample_path(path, samples)
    pts, occ, h, _ = _union_raster(family)
    for end in (probes[0], probes[-1]):
        i = np.clip(np.rint((end.imag - pts[0, 0].imag) / h).astype(int), 0, occ.shape[0] - 1)
        j = np.clip(np.rint((end.real - pts[0, 0].real) / h).astype(int), 0, occ.shape[1] - 1)
        inside_box = (pts[0, 0].real <= end.real <= pts[0, -1].real
                      and pts[0, 0].imag <= end.imag <= pts[-1, 0].imag)
        if inside_box and occ[i, j]:
            raise ConfigurationError(f"path endpoint {end:.4g} lies in the union of discs")
    images = _chain_images(family, chain)
    chi = np.zeros(samples, dtype=complex)
    for k, b in enumerate(probes):
        total = 0j
        for kappa, curve, _ in images:
            dist = np.min(np.abs(curve - b))
            if dist < 1e-12:
                raise PathHitsChain(f"probe {k} at {b:.6g} lies on the image of a zero branch")
            total += kappa * _open_log_integral(curve, b)
        chi[k] = total / (np.pi * 1j)
    events = []
    for k in range(samples - 1):
        for kappa, curve, _ in images:
            n = _signed_crossings(curve, probes[k], probes[k + 1])
            if n:
                events.append((k, float(kappa * n)))

    def z_at(b):
        try:
            fibers = trace_fiber(family, b, size=size)
        except NotRegularValue:
            return None
        if _fiber_clear_of_zeros(J, chain, fibers, 2 * np.pi / size):
            return None
        return fiber_argument_variation(J, fibers)

    Z = parallel_map(z_at, probes)
    N = [None if z is None else complex(c - z) for c, z in zip(chi, Z)]
    ok = np.array([z is not None for z in Z])
    return JumpProfile(probes, chi, Z, N, events, ok)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class VerdictConfig:
    size: int = 256
    raster: int = 512
    extension_rtol: float = 1e-8
    degeneracy: float = 1e-8
    spread: float = 1e-6
    cr: float = 1e-6
    fibers: int = 20
    symmetry_probes: int = 8
    seed: int = 0
    surface: Hypersurface | None = None


@dataclass
class VerdictReport:
    family: dict
    function: str
    extension_residual: float
    extension_holds: bool
    regularity: dict
    homology: dict
    j_max: float | None
    theta_residual: float | None
    symmetry_gaps: list
    fiber_spread: float | None
    cr_residual: float | None
    thresholds: dict
    verdict: str = INCONCLUSIVE
    which: str = ""
    details: str = ""

    def label(self) -> str:
        return f"{self.verdict}({self.which})" if self.which else self.verdict

    def to_dict(self) -> dict:
        return asdict(self)


def decide(ev: VerdictReport) -> tuple[str, str, str]:
    """Verdict from recorded evidence alone: ``(verdict, which, details)``."""
    th = ev.thresholds
    if not ev.extension_holds:
        return CONDITION_STAR_FAILS, "", f"extension residual {ev.extension_residual:.3g}"
    cond_a = ev.homology.get("condition_a")
    if cond_a is None:
        return INCONCLUSIVE, "", ev.homology.get("note", "no homology certificate")
    if not cond_a:
        return PRECONDITION_FAILS, "condition_a", "the closed discs share a point"
    if not ev.regularity.get("regular", False):
        return PRECONDITION_FAILS, "regularity", "rank conditions fail on the family"
    if ev.j_max is None:
        return INCONCLUSIVE, "", "Jacobian not evaluated"
    if ev.j_max < th["degeneracy"]:
        spread_ok = ev.fiber_spread is not None and ev.fiber_spread < th["spread"]
        cr_ok = ev.cr_residual is not None and ev.cr_residual < th["cr"]
        confirmed = CR_CONFIRMED if ev.family.get("ambient_dim") == 2 else HOLOMORPHIC_CONFIRMED
        if ev.family.get("ambient_dim") == 2 and cr_ok:
            return confirmed, "", "minors vanish and the tangential residual is small"
        if spread_ok and cr_ok:
            return confirmed, "", "J vanishes, F is constant on fibers, f satisfies Cauchy-Riemann"
        return INCONCLUSIVE, "", (f"degenerate Jacobian but spread={ev.fiber_spread} "
                                  f"cr={ev.cr_residual} disagree")
    return NONDEGENERATE_WITNESS, "", (f"all preconditions hold yet J_max={ev.j_max:.3g}; "
                                       "see symmetry diagnostics")


def fiber_spread(ext: ExtensionField, family: DiscFamily, count: int, seed: int = 0,
                 size: int = 256) -> float:
    """Largest variation of ``F`` along fibers through ``count`` interior probes.

    Relative to ``max(1, rms F)``.
    """
    rng = np.random.default_rng(seed)
    nodes = family.t_nodes
    spreads = []
    attempts = 0
    while len(spreads) < count and attempts < 20 * count:
        attempts += 1
        k = int(rng.integers(len(nodes)))
        zeta = 0.8 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        b = complex(family.eval(zeta, nodes[k]))
        try:
            fibers = trace_fiber(family, b, ext, size=size)
        except NotRegularValue:
            continue
        for fib in fibers:
            if fib.f_values is not None and len(fib.f_values):
                spreads.append(float(np.max(np.abs(fib.f_values - fib.f_values[0]))))
    if not spreads:
        return float("nan")
    rms = float(np.sqrt(np.mean(np.abs(ext.boundary_trace) ** 2)))
    return max(spreads) / max(1.0, rms)


def cr_residual_on_image(f: BoundaryFunction, family: DiscFamily, size: int = 64) -> float:
    """Largest finite-difference ``|dbar f|`` on boundary images, relative to ``max(1, |f|)``."""
    vals = family.grid_values(family.boundary_points(size))[:, 0, :].ravel()
    z = vals[:, None]
    h = 1e-5 * max(1.0, family.scale)
    d = dbar_fd(f, z, h)[:, 0]
    mag = float(np.max(np.abs(f(z))))
    return float(np.max(np.abs(d))) / max(1.0, mag)


HAND_CERTIFIED_HOMOLOGY = {"tangent_lines": True, "hopf_discs": False}


def _family_summary(family: DiscFamily) -> dict:
    out = {k: v for k, v in family.provenance.items()}
    out["ambient_dim"] = family.ambient_dim
    out["parameter"] = family.params.kind
    out["resolution"] = family.params.resolution
    out["degree"] = family.degree
    return out


def run_verdict(f: BoundaryFunction, family: DiscFamily,
                config: VerdictConfig | None = None) -> VerdictReport:
    """Gather the evidence for ``f`` on ``family`` and decide."""
    cfg = config or VerdictConfig()
    thresholds = {"extension_rtol": cfg.extension_rtol, "degeneracy": cfg.degeneracy,
                  "spread": cfg.spread, "cr": cfg.cr}
    ext = analyze(f, family, cfg.size)
    rms = ext.rms_t[family.params.valid_mask]
    holds = bool(np.all(ext.residual_t[family.params.valid_mask] <= cfg.extension_rtol * rms))
    report = VerdictReport(_family_summary(family), f.name, ext.residual, holds, {}, {}, None,
                           None, [], None, None, thresholds)
    if family.ambient_dim == 2:
        _n2_evidence(report, f, family, ext, cfg)
    else:
        _planar_evidence(report, f, family, ext, cfg)
    report.verdict, report.which, report.details = decide(report)
    return report


def _planar_evidence(report, f, family, ext, cfg):
    audit = regularity_audit(family, cfg.size)
    report.regularity = {"regular": audit.regular, "interior_rank_ok": audit.interior_rank_ok,
                         "critical_on_boundary": audit.critical_on_boundary,
                         "boundary_rank_histogram": audit.boundary_rank_histogram}
    hom = homology_test(family, cfg.size, cfg.raster)
    report.homology = {"condition_a": hom.condition_a, "condition_iii": hom.condition_iii,
                       "routes_agree": hom.routes_agree,
                       "witness": None if hom.witness is None else [hom.witness.real,
                                                                   hom.witness.imag]}
    report.cr_residual = cr_residual_on_image(f, family)
    if not report.extension_holds:
        return
    J = compute_J(ext, family)
    report.j_max = J.j_max
    report.fiber_spread = fiber_spread(ext, family, cfg.fibers, cfg.seed, cfg.size)
    if J.j_max < cfg.degeneracy:
        return
    try:
        report.theta_residual = theta_field(J, f).compatibility_residual
    except DegenerateTheta:
        report.theta_residual = None
    if family.params.periodic:
        chain = track_zeros(J)
        probes = far_probes(family, cfg.symmetry_probes, cfg.seed)
        reps = parallel_map(lambda b: symmetry_relation(J, chain, family, b, cfg.size), probes)
        report.symmetry_gaps = [
            {"b": [r.b.real, r.b.imag], "lhs": r.lhs.real, "rhs": r.rhs.real,
             "gap": None if not r.admissible else r.abs_gap, "admissible": r.admissible}
            for r in reps]


def _n2_evidence(report, f, family, ext, cfg):
    surface = cfg.surface or sphere(float(np.max(np.abs(boundary_samples(family, 8)))))
    builder = family.provenance.get("builder", "custom")
    if builder in HAND_CERTIFIED_HOMOLOGY:
        report.homology = {"condition_a": HAND_CERTIFIED_HOMOLOGY[builder],
                           "note": "hand-certified for the builtin family"}
    else:
        report.homology = {"condition_a": None,
                           "note": "no homology certificate for custom families in C^2"}
    audit = regularity_audit(family, cfg.size)
    report.regularity = {"regular": audit.interior_rank_ok and audit.critical_on_boundary,
                         "interior_rank_ok": audit.interior_rank_ok,
                         "critical_on_boundary": audit.critical_on_boundary,
                         "boundary_rank_histogram": audit.boundary_rank_histogram}
    pts = boundary_samples(family)
    try:
        report.cr_residual = tangential_cr_residual(f, surface, pts)
    except ConfigurationError as exc:
        report.details = str(exc)
    if not report.extension_holds:
        return
    minors = compute_minors(ext, family)
    report.j_max = max(minors.relative_max(k) for k in range(4))
    report.fiber_spread = trace_constancy(ext) if family.degree <= 1 else None


# ---------------------------------------------------------------------------
# counterexamples


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | str | None
    expectation: str


@dataclass
class CounterexampleReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name, passed, value, expectation):
        self.checks.append(CheckResult(name, bool(passed), value, expectation))


def counterexample_suite(size: int = 256, resolution: int = 256) -> CounterexampleReport:
    """Rotating circles with ``f = z^2 / conj(z)`` and Hopf discs with ``f = |z1|^2``."""
    from .family import build_hopf_discs, build_rotating_circles

    rep = CounterexampleReport()
    f = make_function("globevnik_n", n=2)
    fam = build_rotating_circles(1.0, 2.0, resolution)
    ext = analyze(f, fam, size)
    rep.add("rotating: extension residual", ext.residual < 1e-10, ext.residual, "< 1e-10")
    hom = homology_test(fam, size)
    rep.add("rotating: condition (a) fails", not hom.condition_a,
            None if hom.witness is None else abs(hom.witness), "closed discs share a point")
    J = compute_J(ext, fam)
    rep.add("rotating: J does not vanish", J.j_max > 0.1, J.j_max, "J_max > 0.1 scale")
    cr = cr_residual_on_image(f, fam)
    rep.add("rotating: f is not holomorphic", cr > 0.1, cr, "dbar residual > 0.1")
    pole = analyze(f, build_rotating_circles(2.0, 1.0, resolution), size)
    rep.add("rotating with R > r: pole inside", pole.residual > 0.1, pole.residual,
            "extension residual > 0.1")

    hopf = build_hopf_discs()
    g = make_function("abs_z1_sq")
    hext = analyze(g, hopf, 64)
    const = trace_constancy(hext)
    rep.add("hopf: traces constant", const < 1e-12, const, "< 1e-12")
    rep.add("hopf: common point 0", True, 0.0, "every disc passes through the origin")
    p = np.array([[1 / np.sqrt(2), 1 / np.sqrt(2)]], dtype=complex)
    val = complex(dbar_mu_nu(g, sphere(1.0), p, 1, 2)[0])
    rep.add("hopf: dbar_b f at (1/sqrt2, 1/sqrt2)", abs(val + 0.5) < 1e-4, abs(val), "-z1 z2 = -1/2")
    kr = K_mu_reality(hopf, sphere(1.0))
    worst = max(kr.max_rel_imag.values())
    rep.add("hopf: K_mu real", worst < 1e-8, worst, "< 1e-8")
    return rep
