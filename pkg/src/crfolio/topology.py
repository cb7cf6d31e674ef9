"""Fibers of ``G``, boundary degree, zero counts and the homology test.

Every disc ``G(., t)`` is an embedding of the closed disc, so ``G(., t) = b`` has at
most one solution in it. A fiber ``G^{-1}(b)`` is therefore a graph ``zeta(t)`` over
the parameter: a closed loop when ``b`` lies in every disc of a circle family, or
arcs that enter and leave through ``|zeta| = 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage, optimize

from .family import (DiscFamily, _DiscMembership, _hull_extent, closure_intersection_empty,
                     critical_values)
from .numerics import (ConfigurationError, NearSingularWinding, find_disc_roots, line_integral,
                       round_winding, winding_number)

FIBER_TOL = 1e-8
SEED_GRID = 128


class NotRegularValue(ValueError):
    """``b`` is within ``10 * mesh`` of a sampled critical value of ``G`` on the boundary."""


class CriticalPoint(ArithmeticError):
    """``dG/dzeta`` vanished along a fiber."""


class DegeneratePreimage(ArithmeticError):
    pass


class MissedPreimage(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Fiber:
    b: complex
    t: np.ndarray
    zeta: np.ndarray
    closed: bool
    hit_boundary: bool
    f_values: np.ndarray | None = field(default=None, repr=False)

    def residual(self, family: DiscFamily) -> float:
        g, _, _ = family.eval_many(self.zeta, self.t)
        return float(np.max(np.abs(g - self.b))) if len(self.t) else 0.0

    def to_rows(self):
        for t, z in zip(self.t, self.zeta):
            yield [f"{t:.12g}", f"{z.real:.12g}", f"{z.imag:.12g}"]


def fibers_to_csv(fibers, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fiber", "t", "re_zeta", "im_zeta"])
        for k, fib in enumerate(fibers):
            for row in fib.to_rows():
                writer.writerow([k] + row)


def image_mesh(family: DiscFamily, size: int = 256) -> float:
    """Largest distance between neighbouring samples of ``G`` on the boundary grid."""
    vals = family.grid_values(family.boundary_points(size))[:, 0, :]
    along_psi = np.abs(np.diff(np.concatenate([vals, vals[:, :1]], axis=1), axis=1)).max()
    along_t = np.abs(np.diff(vals, axis=0)).max() if len(vals) > 1 else 0.0
    return float(max(along_psi, along_t))


def is_regular_value(family: DiscFamily, b: complex, size: int = 256) -> bool:
    crit = critical_values(family, size)
    if crit.size == 0:
        return True
    return bool(np.min(np.abs(crit - b)) > 10.0 * image_mesh(family, size))


def in_end_discs(family: DiscFamily, b: complex, margin: float = 0.0) -> bool:
    """Whether ``b`` lies in one of the closed end discs of an interval family."""
    if family.params.periodic:
        return False
    member = _DiscMembership(family, slack=margin)
    pts = np.array([b], dtype=complex)
    return bool(member(0, pts)[0] or member(len(family.t_nodes) - 1, pts)[0])


def admissible_probe(family: DiscFamily, b: complex, size: int = 256) -> bool:
    """Regular value of ``G`` on the boundary away from the end discs."""
    mesh = image_mesh(family, size)
    return is_regular_value(family, b, size) and not in_end_discs(family, b, 2.0 * mesh)


# ---------------------------------------------------------------------------
# fiber tracing


class _Level:
    """Newton and ODE right-hand side for ``G(zeta, t) = b``."""

    def __init__(self, family: DiscFamily, b: complex):
        self.family = family
        self.b = complex(b)
        self.floor = 1e-12 * max(family.scale, 1.0)

    def derivs(self, z, t):
        """Values and derivatives at scalars or paired arrays ``z``, ``t``."""
        scalar = np.ndim(z) == 0
        g, gz, gt = self.family.eval_many(np.atleast_1d(z), np.atleast_1d(t))
        if np.any(np.abs(gz) < self.floor):
            bad = int(np.argmin(np.abs(gz)))
            raise CriticalPoint(f"fiber hits critical point at zeta={np.atleast_1d(z)[bad]:.6g}, "
                                f"t={np.atleast_1d(t)[bad]:.6g}")
        if scalar:
            return g[0], gz[0], gt[0]
        return g, gz, gt

    def velocity(self, z, t):
        _, gz, gt = self.derivs(z, t)
        return -gt / gz

    def project(self, z, t, iters: int = 8):
        for _ in range(iters):
            g, gz, _ = self.derivs(z, t)
            step = (g - self.b) / gz
            z = z - step
            if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(z))):
                break
        return z

    def rk4(self, z, t, h):
        k1 = self.velocity(z, t)
        k2 = self.velocity(z + 0.5 * h * k1, t + 0.5 * h)
        k3 = self.velocity(z + 0.5 * h * k2, t + 0.5 * h)
        k4 = self.velocity(z + h * k3, t + h)
        return z + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    def advance(self, z, t0, t1, tol: float = 1e-10, max_steps: int = 256):
        """Continue the root from ``t0`` to ``t1``; step count doubles until stable.

        Returns the end point and the largest ``|zeta|`` seen at the sub-steps.
        """
        n, prev = 1, None
        while n <= max_steps:
            zz, h, peak = z, (t1 - t0) / n, np.abs(z)
            for i in range(n):
                zz = self.project(self.rk4(zz, t0 + i * h, h), t0 + (i + 1) * h)
                peak = np.maximum(peak, np.abs(zz))
            if prev is not None and np.all(np.abs(zz - prev) < tol):
                return zz, peak
            prev, n = zz, 2 * n
        raise CriticalPoint(f"continuation from t={np.min(t0):.6g} does not settle")


def _node_root(family: DiscFamily, b: complex, k: int):
    coeffs = family.coeffs1[k].copy()
    coeffs[0] -= b
    roots, _ = find_disc_roots(coeffs, slack=0.0)
    roots = roots[np.abs(roots) <= 1.0]
    return complex(roots[0]) if roots.size else None


def _exit_point(level: _Level, z, t_in, t_out):
    """Parameter where the continued root crosses ``|zeta| = 1`` between ``t_in`` and ``t_out``."""
    def excess(t):
        if t == t_in:
            return abs(z) - 1.0
        zz, _ = level.advance(z, t_in, t)
        return abs(zz) - 1.0

    if excess(t_out) <= 0.0:
        # the root dipped outside between samples; locate the maximum excursion
        ts = np.linspace(t_in, t_out, 9)
        vals = [excess(s) for s in ts]
        t_out = ts[int(np.argmax(vals))]
        if max(vals) <= 0.0:
            return None
    t_star = optimize.brentq(excess, t_in, t_out, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    zz, _ = level.advance(z, t_in, t_star)
    return t_star, zz / abs(zz) if abs(abs(zz) - 1.0) < 1e-8 else zz


def trace_fiber(family: DiscFamily, b: complex, ext=None, check_regular: bool = True,
                size: int = 256) -> list[Fiber]:
    """All components of ``G^{-1}(b)`` inside the closed solid torus or cylinder.

    Node roots come from the polynomial root finder; consecutive nodes are joined by
    predictor-corrector continuation, which also finds where a component leaves or
    enters through ``|zeta| = 1``. With ``ext`` the values of ``F`` are attached.
    Components living entirely between two neighbouring nodes are not seen.
    """
    family.require_planar("fiber tracing")
    b = complex(b)
    if check_regular and not is_regular_value(family, b, size):
        raise NotRegularValue(f"b={b:.6g} is within 10 mesh of a critical value of G on the boundary")
    level = _Level(family, b)
    t_nodes = family.t_nodes
    m = len(t_nodes)
    dt = family.params.spacing
    periodic = family.params.periodic
    roots = [_node_root(family, b, k) for k in range(m)]
    roots = [None if z is None else level.project(z, t_nodes[k]) for k, z in enumerate(roots)]
    if all(z is None for z in roots):
        return []

    # classify each interval [k, k + 1] (wrapping for circle families)
    n_int = m if periodic else m - 1
    joined = np.zeros(n_int, dtype=bool)
    exits: dict[int, tuple] = {}
    entries: dict[int, tuple] = {}
    has = np.array([z is not None for z in roots])
    both = np.flatnonzero(has[:n_int] & has[(np.arange(n_int) + 1) % m])
    if both.size:
        z0 = np.array([roots[k] for k in both], dtype=complex)
        _, peak = level.advance(z0, t_nodes[both], t_nodes[both] + dt)
        joined[both[peak <= 1.0 + 1e-12]] = True
    for k in np.flatnonzero(~joined):
        ta = t_nodes[k]
        tb = ta + dt
        za, zb = roots[k], roots[(k + 1) % m]
        if za is not None:
            hit = _exit_point(level, za, ta, tb)
            if hit is not None:
                exits[k] = hit
        if zb is not None:
            hit = _exit_point(level, zb, tb, ta)
            if hit is not None:
                entries[k] = hit

    if periodic and joined.all():
        fib = Fiber(b, t_nodes.copy(), np.array(roots, dtype=complex), True, False)
        return [_attach(fib, ext, family)]

    start = int(np.flatnonzero(~joined)[0]) + 1 if periodic else 0
    out, cur = [], None
    for j in range(m):
        k = (start + j) % m
        shift = 2 * np.pi if periodic and start + j >= m else 0.0
        if roots[k] is not None:
            if cur is None:
                cur = {"t": [], "z": [], "boundary": False}
                prev = (k - 1) % m
                if (periodic or k > 0) and prev in entries:
                    t_e, z_e = entries[prev]
                    offset = t_nodes[k] - t_nodes[prev] - dt  # -2 pi across the seam
                    cur["t"].append(t_e + offset + shift)
                    cur["z"].append(z_e)
                    cur["boundary"] = True
            cur["t"].append(t_nodes[k] + shift)
            cur["z"].append(roots[k])
        if cur is not None and (k >= n_int or not joined[k]):
            if k < n_int and k in exits:
                t_x, z_x = exits[k]
                cur["t"].append(t_x + shift)
                cur["z"].append(z_x)
                cur["boundary"] = True
            out.append(cur)
            cur = None
    if cur is not None:
        out.append(cur)
    fibers = []
    for p in out:
        t = np.array(p["t"])
        z = np.array(p["z"], dtype=complex)
        if periodic and t[0] >= 2 * np.pi:
            t = t - 2 * np.pi
        fibers.append(_attach(Fiber(b, t, z, False, p["boundary"]), ext, family))
    fibers.sort(key=lambda f: float(f.t[0]))
    return fibers


def _attach(fib: Fiber, ext, family: DiscFamily) -> Fiber:
    if ext is None or len(fib.t) == 0:
        return fib
    tt = np.mod(fib.t, 2 * np.pi) if family.params.periodic else fib.t
    w, _ = family.params.interp_matrix(tt)
    coeffs = w @ ext.taylor_data
    powers = np.vander(fib.zeta, coeffs.shape[-1], increasing=True)
    vals = np.sum(coeffs * powers, axis=1)
    return Fiber(fib.b, fib.t, fib.zeta, fib.closed, fib.hit_boundary, vals)


# ---------------------------------------------------------------------------
# degree of G on the boundary


@dataclass(frozen=True)
class BoundaryPreimages:
    b: complex
    psi: np.ndarray
    t: np.ndarray
    sign: np.ndarray

    @property
    def degree(self) -> int:
        return int(np.sum(self.sign))


def solve_boundary_preimage(family: DiscFamily, b, psi0, t0, iters: int = 30):
    """Vectorized real Newton for ``G(e^{i psi}, t) = b`` on the boundary.

    Returns ``psi, t, converged``; for interval families ``t`` is kept in [0, 1].
    """
    b = np.asarray(b, dtype=complex)
    psi = np.array(psi0, dtype=float)
    t = np.array(t0, dtype=float)
    periodic = family.params.periodic
    ok = np.ones(psi.shape, dtype=bool)
    for _ in range(iters):
        zeta = np.exp(1j * psi)
        g, gz, gt = family.eval_many(zeta, t)
        gp = 1j * zeta * gz
        r = g - b
        det = gp.real * gt.imag - gp.imag * gt.real
        safe = np.where(np.abs(det) > 0, det, 1.0)
        dpsi = (r.real * gt.imag - r.imag * gt.real) / safe
        dt = (gp.real * r.imag - gp.imag * r.real) / safe
        psi = psi - dpsi
        t = t - dt
        if periodic:
            t = np.mod(t, 2 * np.pi)
        else:
            ok &= (t > -1e-9) & (t < 1.0 + 1e-9)
            t = np.clip(t, 0.0, 1.0)
        if np.all(np.abs(dpsi) + np.abs(dt) < 1e-14):
            break
    g, _, _ = family.eval_many(np.exp(1j * psi), t)
    ok &= np.abs(g - b) <= 1e-10 * max(family.scale, 1.0)
    return np.mod(psi, 2 * np.pi), t, ok


def _seed_grid(family: DiscFamily, n: int):
    psi = 2 * np.pi * np.arange(n) / n
    if family.params.periodic:
        t = 2 * np.pi * np.arange(n) / n
    else:
        t = np.linspace(0.0, 1.0, n)
    w, _ = family.params.interp_matrix(t)
    vals = (w @ family.coeffs1) @ np.vander(np.exp(1j * psi), family.coeffs1.shape[-1],
                                            increasing=True).T
    return psi, t, vals  # vals[t_index, psi_index]


def boundary_preimages(family: DiscFamily, b: complex, seeds: int = SEED_GRID,
                       cross_check: bool = True) -> BoundaryPreimages:
    """Solutions of ``G(e^{i psi}, t) = b`` with the signs of the real Jacobian.

    Newton runs from every cell of a ``seeds x seeds`` grid in ``(psi, t)`` whose image
    is near ``b``; solutions closer than ``1e-6`` are merged. The number of solutions
    is cross-checked against the changes of the zero count of ``G(., t) - b`` along t.
    """
    family.require_planar("boundary degree")
    b = complex(b)
    psi, t, vals = _seed_grid(family, seeds)
    near = np.abs(vals - b)
    step = max(np.abs(np.diff(vals, axis=1)).max(), np.abs(np.diff(vals, axis=0)).max())
    ti, pi = np.nonzero(near <= 2.0 * step)
    if ti.size == 0:
        return BoundaryPreimages(b, np.zeros(0), np.zeros(0), np.zeros(0, dtype=int))
    ps, ts, ok = solve_boundary_preimage(family, b, psi[pi], t[ti])
    ps, ts = ps[ok], ts[ok]
    keep_p, keep_t = [], []
    for p, tt in zip(ps, ts):
        if any(_torus_dist(p, tt, q, s, family.params.periodic) < 1e-6
               for q, s in zip(keep_p, keep_t)):
            continue
        keep_p.append(p)
        keep_t.append(tt)
    keep_p = np.array(keep_p)
    keep_t = np.array(keep_t)
    zeta = np.exp(1j * keep_p)
    _, gz, gt = family.eval_many(zeta, keep_t)
    gp = 1j * zeta * gz
    det = gp.real * gt.imag - gp.imag * gt.real
    scale2 = family.scale ** 2
    if np.any(np.abs(det) < 1e-10 * scale2):
        raise DegeneratePreimage(f"degenerate preimage of b={b:.6g}; b is too close to a critical value")
    order = np.lexsort((keep_p, keep_t))
    out = BoundaryPreimages(b, keep_p[order], keep_t[order], np.sign(det[order]).astype(int))
    if cross_check:
        changes = _count_changes(family, b)
        if len(out.psi) < changes or (len(out.psi) - changes) % 2:
            raise MissedPreimage(f"found {len(out.psi)} preimages of b={b:.6g}, the zero count "
                                 f"changes {changes} times along t")
    return out


def _torus_dist(p, t, q, s, periodic):
    dp = abs(np.angle(np.exp(1j * (p - q))))
    dt = abs(np.angle(np.exp(1j * (t - s)))) if periodic else abs(t - s)
    return dp + dt


def _count_changes(family: DiscFamily, b: complex, samples: int = 1024) -> int:
    """Sum of ``|jumps|`` of the number of solutions of ``G(., t) = b`` in the disc along t."""
    if family.params.periodic:
        t = 2 * np.pi * np.arange(samples) / samples
    else:
        t = np.linspace(0.0, 1.0, samples)
    w, _ = family.params.interp_matrix(t)
    coeffs = w @ family.coeffs1
    zeta = family.boundary_points(256)
    vals = coeffs @ np.vander(zeta, coeffs.shape[-1], increasing=True).T - b
    turns = np.sum(np.angle(np.roll(vals, -1, axis=1) / vals), axis=1) / (2 * np.pi)
    counts = np.rint(turns).astype(int)
    jumps = np.diff(np.append(counts, counts[0]) if family.params.periodic else counts)
    return int(np.sum(np.abs(jumps)))


def brouwer_degree(family: DiscFamily, b: complex, exclude: Callable | None = None,
                   seeds: int = SEED_GRID) -> int:
    """Signed count of boundary preimages of ``b``.

    ``exclude`` is a predicate on image points describing a set ``O`` removed from the
    image together with its full preimage; ``b`` itself must lie outside ``O``.
    """
    if exclude is not None and bool(exclude(np.array([complex(b)]))[0]):
        raise ConfigurationError(f"b={b} lies in the removed set")
    return boundary_preimages(family, b, seeds).degree


# ---------------------------------------------------------------------------
# zero counts and homology


def zero_count_integral(family: DiscFamily, b: complex, t: float, size: int = 256) -> int:
    """``(1/2 pi i) * integral of G_zeta / (G - b) dzeta`` over ``|zeta| = 1``."""
    family.require_planar("zero count")
    zeta = family.boundary_points(size)
    g = family.eval(zeta, t)
    gz = family.d_zeta(zeta, t)
    mesh = float(np.max(np.abs(np.diff(np.append(g, g[0])))))
    dist = float(np.min(np.abs(g - b)))
    if dist <= 10.0 * mesh:
        raise NearSingularWinding(f"b={b:.6g} lies within {dist:.3g} of the circle at t={t:.6g}")
    dz = 1j * zeta * (2 * np.pi / size)
    value = line_integral(gz / (g - b), dz) / (2j * np.pi)
    return round_winding(float(value.real), "zero count")


@dataclass(frozen=True)
class HomologyVerdict:
    condition_a: bool
    central_image_winding: dict
    condition_iii: bool
    probes_used: list
    routes_agree: bool
    witness: complex | None = None


def _union_raster(family: DiscFamily, cells: int = 256):
    box, diam = _hull_extent(family)
    h = diam / cells
    pad = 4 * h
    xs = np.arange(box[0] - pad, box[2] + pad + h, h)
    ys = np.arange(box[1] - pad, box[3] + pad + h, h)
    pts = xs[None, :] + 1j * ys[:, None]
    member = _DiscMembership(family, slack=h / np.sqrt(2.0))
    inside = np.zeros(pts.shape, dtype=bool)
    flat = pts.ravel()
    occ = inside.ravel()
    for node in range(len(family.t_nodes)):
        todo = ~occ
        occ[todo] = member(node, flat[todo])
    return pts, occ.reshape(pts.shape), h, diam


def complement_probes(family: DiscFamily, cells: int = 256) -> tuple[list, list]:
    """Probe points outside the union of closed discs.

    Returns 64 points on a circle of radius ``2 * diam`` and one point in each
    bounded complementary component of the rasterized union.
    """
    pts, occ, h, diam = _union_raster(family, cells)
    centre = complex(pts.mean())
    far = [centre + 2.0 * diam * np.exp(2j * np.pi * k / 64) for k in range(64)]
    labels, count = ndimage.label(~occ)
    border = set(np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])))
    bounded = []
    for lab in range(1, count + 1):
        if lab in border:
            continue
        region = labels == lab
        # the pixel farthest from the union is a safe interior probe
        dist = ndimage.distance_transform_edt(region)
        i, j = np.unravel_index(np.argmax(dist), dist.shape)
        if dist[i, j] >= 2.0:
            bounded.append(complex(pts[i, j]))
    return far, bounded


def homology_test(family: DiscFamily, size: int = 256, raster: int = 512) -> HomologyVerdict:
    """Condition (a) by grid intersection and the image of the central cycle at probes.

    For circle families the central image ``t -> G(0, t)`` is closed and its winding
    is taken around points outside the union of discs. For interval families it is
    an arc from the first to the last end disc and the probes are segments crossing
    it whose ends lie outside the union; the signed number of crossings is recorded.
    """
    family.require_planar("homology test")
    inter = closure_intersection_empty(family, raster)
    cond_a = inter.empty
    central = family.coeffs1[:, 0]
    windings = {}
    probes: list = []
    if family.params.periodic:
        far, bounded = complement_probes(family)
        for b in far + bounded:
            try:
                windings[b] = winding_number(central, b)
            except NearSingularWinding:
                continue
            probes.append(b)
    else:
        windings, probes = _segment_probes(family)
    nonzero = any(v != 0 for v in windings.values())
    agree = nonzero == cond_a
    if not cond_a and inter.witness is not None:
        # a common point is in every disc: the zero count stays 1 along t
        try:
            counts = {zero_count_integral(family, inter.witness, t, size)
                      for t in family.t_nodes[:: max(1, len(family.t_nodes) // 32)]}
            agree = agree and counts == {1}
        except NearSingularWinding:
            pass
    return HomologyVerdict(cond_a, windings, cond_a, probes, agree, inter.witness)


def _segment_probes(family: DiscFamily, positions: int = 15):
    pts, occ, h, diam = _union_raster(family)
    central = family.coeffs1[:, 0]
    tangents = family.dt_coeffs1[:, 0]
    mesh = image_mesh(family)
    windings, probes = {}, []
    m = len(central)
    for idx in np.linspace(0, m - 1, positions + 2)[1:-1].astype(int):
        tan = tangents[idx]
        if abs(tan) < 1e-12:
            continue
        normal = 1j * tan / abs(tan)
        a = central[idx] - 2.0 * diam * normal
        c = central[idx] + 2.0 * diam * normal
        if in_end_discs(family, a, mesh) or in_end_discs(family, c, mesh):
            continue
        seg = np.linspace(a, c, 4096)
        if any(in_end_discs(family, z, mesh) for z in seg[::8]):
            continue
        crossings = _signed_crossings(central, a, c)
        mid = complex(0.5 * (a + c))
        windings[mid] = crossings
        probes.append((complex(a), complex(c)))
    return windings, probes


def _signed_crossings(curve, a, c) -> int:
    """Signed intersections of the polyline ``curve`` with the segment ``[a, c]``."""
    d = c - a
    p0, p1 = curve[:-1], curve[1:]
    e = p1 - p0

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    denom = cross(d, e)
    good = np.abs(denom) > 0
    s = np.where(good, cross(p0 - a, e) / np.where(good, denom, 1.0), -1.0)
    u = np.where(good, cross(p0 - a, d) / np.where(good, denom, 1.0), -1.0)
    hit = good & (s >= 0) & (s <= 1) & (u >= 0) & (u < 1)
    return int(np.sum(np.sign(denom[hit])))
