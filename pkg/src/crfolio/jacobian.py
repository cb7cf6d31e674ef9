"""Jacobian fields of ``(F, G)`` and the zero chains of ``J``.

For planar families ``J(zeta, t) = i zeta (F_zeta G_t - G_zeta F_t)``. It is the
determinant ``det[grad G, grad F]`` with ``grad = (d_t, d_psi)``, written in
complex derivatives through ``d_psi = i zeta d_zeta``. ``J`` is built on Taylor
coefficients, so it is holomorphic in ``zeta`` by construction. Its zeros are
then the roots of one polynomial per parameter node.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .extension import BoundaryFunction, ExtensionField, NoExtension
from .family import DiscFamily
from .numerics import (IdenticallyZero, WindingError, find_disc_roots, trim_tail,
                       poly_derivative, poly_eval, poly_multiply, polynomial_winding)
from .topology import solve_boundary_preimage

ZERO_DISC_RTOL = 1e-10
THETA_MASK_RTOL = 0.01
BOUNDARY_SLACK = 1e-6
TAIL_RTOL = 1e-12  # coefficient tails below this (l1, relative) are quadrature noise


class DegenerateTheta(ArithmeticError):
    """``J`` vanishes identically, so the phase field is undefined."""


class TrackingInstability(RuntimeError):
    pass


def _rms(a) -> float:
    a = np.asarray(a)
    return float(np.sqrt(np.mean(np.abs(a) ** 2))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class JacobianField:
    """Per-node Taylor data of ``zeta -> J(zeta, t)`` for a planar family."""

    family: DiscFamily
    taylor_data: np.ndarray
    scale: float
    size: int = 256

    @classmethod
    def from_taylor(cls, family: DiscFamily, coeffs, scale: float = 1.0, size: int = 256):
        family.require_planar("a Jacobian field")
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = np.broadcast_to(coeffs, family.params.shape + coeffs.shape).copy()
        return cls(family, coeffs, float(scale), size)

    @cached_property
    def boundary_samples(self) -> np.ndarray:
        """``J`` on ``|zeta| = 1`` at ``size`` angles for every node."""
        return poly_eval(self.taylor_data, self.family.boundary_points(self.size))

    @cached_property
    def j_max(self) -> float:
        """``max |J| / scale`` (boundary samples bound the disc by the maximum principle)."""
        peak = float(np.max(np.abs(self.boundary_samples)))
        return peak / self.scale if self.scale > 0 else (0.0 if peak == 0 else np.inf)

    def polar_samples(self, radii=None) -> np.ndarray:
        if radii is None:
            radii = np.linspace(0.0, 1.0, 17)
        zeta = np.outer(radii, self.family.boundary_points(self.size))
        return poly_eval(self.taylor_data, zeta)

    def coefficients_many(self, t) -> np.ndarray:
        w, _ = self.family.params.interp_matrix(t)
        return w @ self.taylor_data

    def eval_many(self, zeta, t) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        c = self.coefficients_many(np.ravel(t))
        powers = np.vander(zeta.ravel(), c.shape[-1], increasing=True)
        return np.sum(c * powers, axis=1).reshape(zeta.shape)

    def eval(self, zeta, t):
        coeffs, _ = self.family.params.interpolate(self.taylor_data, t)
        return poly_eval(coeffs, zeta)


def extension_scale(ext: ExtensionField, family: DiscFamily) -> float:
    """``S_F * S_G``: size of the data entering ``J``.

    ``S_F = rms|F| + rms|F_psi| + rms|F_t|`` and ``S_G = rms|G_psi| + rms|G_t|``
    over the boundary grid.
    """
    zeta = family.boundary_points(ext.size)
    f_psi = 1j * zeta * poly_eval(ext.dzeta_data, zeta)
    f_t = poly_eval(ext.dt_data, zeta)
    s_f = _rms(poly_eval(ext.taylor_data, zeta)) + _rms(f_psi) + _rms(f_t)
    g_psi = 1j * zeta * family.grid_d_zeta(zeta)
    g_t = family.grid_d_t(zeta)
    s_g = _rms(g_psi) + _rms(g_t)
    return s_f * s_g


def compute_J(ext: ExtensionField, family: DiscFamily | None = None) -> JacobianField:
    """``J = i zeta (F_zeta G_t - G_zeta F_t)`` assembled on Taylor coefficients."""
    family = family or ext.family
    family.require_planar("compute_J")
    if not ext.holds:
        bad = int(np.argmax(ext.residual_t - 1e-8 * ext.rms_t))
        raise NoExtension(f"no extension at t={family.t_nodes[bad]:.6g} "
                          f"(residual {ext.residual_t[bad]:.3g})")
    f = ext.taylor_data
    prod = (poly_multiply(poly_derivative(f), family.dt_coeffs1)
            - poly_multiply(family.dzeta_data[:, 0, :], ext.dt_data[:, 0, :]))
    coeffs = np.zeros(prod.shape[:-1] + (prod.shape[-1] + 1,), dtype=complex)
    coeffs[..., 1:] = 1j * prod
    scale = extension_scale(ext, family)
    return JacobianField(family, coeffs, scale if scale > 0 else 1.0, ext.size)


@dataclass(frozen=True, eq=False)
class BoundaryJacobians:
    """``J_+ = det[grad F, grad conj G]``, ``J_- = det[grad G, grad F]`` and
    ``D = det[grad G, grad conj G]`` on the boundary grid."""

    plus: np.ndarray
    minus: np.ndarray
    gg: np.ndarray


def _det(a_t, a_psi, b_t, b_psi):
    return a_t * b_psi - a_psi * b_t


def compute_J_pm(ext: ExtensionField, family: DiscFamily | None = None) -> BoundaryJacobians:
    """Boundary Jacobians from the full trace, valid whether or not ``f`` extends."""
    family = family or ext.family
    family.require_planar("compute_J_pm")
    n = ext.size
    trace = ext.boundary_trace
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    f_psi = np.fft.ifft(1j * k * np.fft.fft(trace, axis=-1), axis=-1)
    f_t = family.params.differentiate(trace)[:, 0]
    zeta = family.boundary_points(n)
    g_psi = (1j * zeta * family.grid_d_zeta(zeta))[:, 0]
    g_t = family.grid_d_t(zeta)[:, 0, 0]
    plus = _det(f_t, f_psi, np.conj(g_t), np.conj(g_psi))
    minus = _det(g_t, g_psi, f_t, f_psi)
    gg = _det(g_t, g_psi, np.conj(g_t), np.conj(g_psi))
    return BoundaryJacobians(plus, minus, gg)


# ---------------------------------------------------------------------------
# phase field


@dataclass(frozen=True, eq=False)
class ThetaField:
    theta: np.ndarray
    mask: np.ndarray
    compatibility_residual: float
    pairs_compared: int
    sigma_residual: float | None = None

    @property
    def unimodularity_error(self) -> float:
        vals = self.theta[self.mask]
        return float(np.max(np.abs(np.abs(vals) - 1.0))) if vals.size else 0.0


def theta_field(J: JacobianField, f: BoundaryFunction | None = None,
                max_samples: int = 1000, seed: int = 0, neighbours: int = 24) -> ThetaField:
    """Phase ``Theta = J / conj(J)`` on the boundary and its fiber compatibility.

    For a sub-sample of unmasked boundary points, every other boundary point on the
    same ``G``-fiber is found by Newton from nearby images and ``Theta`` is compared
    there. With a closed-form ``dbar f`` the predicted ``sigma o G`` is compared too.
    """
    if J.j_max < 1e-8:
        raise DegenerateTheta("degenerate: Theta undefined (J vanishes identically)")
    family = J.family
    vals = J.boundary_samples
    mask = np.abs(vals) > THETA_MASK_RTOL * J.scale
    theta = np.where(mask, vals / np.where(mask, np.conj(vals), 1.0), np.nan + 0j)

    zeta = family.boundary_points(J.size)
    images = family.grid_values(zeta)[:, 0, :]
    m, n = images.shape
    mesh = max(np.abs(np.diff(images, axis=1)).max(), np.abs(np.diff(images, axis=0)).max())
    rng = np.random.default_rng(seed)
    candidates = np.argwhere(mask)
    if len(candidates) > max_samples:
        candidates = candidates[rng.choice(len(candidates), max_samples, replace=False)]
    tree = cKDTree(np.column_stack([images.real.ravel(), images.imag.ravel()]))
    b_src = images[candidates[:, 0], candidates[:, 1]]
    dist, flat = tree.query(np.column_stack([b_src.real, b_src.imag]), k=min(neighbours, m * n))
    src, seeds = [], []
    for row, (ti, pi) in enumerate(candidates):
        chosen: list[tuple[int, int]] = [(ti, pi)]
        for d, idx in zip(dist[row], flat[row]):
            if d > 2.0 * mesh:
                break
            tj, pj = divmod(int(idx), n)
            if any(_index_close(tj, pj, a, c, m, n, family.params.periodic) for a, c in chosen):
                continue
            chosen.append((tj, pj))
            src.append((ti, pi))
            seeds.append((tj, pj))
    residual = 0.0
    compared = 0
    if seeds:
        src = np.asarray(src)
        seeds = np.asarray(seeds)
        b = images[src[:, 0], src[:, 1]]
        psi0 = 2 * np.pi * seeds[:, 1] / n
        t0 = family.t_nodes[seeds[:, 0]]
        psi, t, ok = solve_boundary_preimage(family, b, psi0, t0)
        # drop solutions that collapsed back onto the source point
        src_psi = 2 * np.pi * src[:, 1] / n
        src_t = family.t_nodes[src[:, 0]]
        dpsi = np.abs(np.angle(np.exp(1j * (psi - src_psi))))
        dtv = np.abs(t - src_t)
        if family.params.periodic:
            dtv = np.abs(np.angle(np.exp(1j * dtv)))
        ok &= (dpsi + dtv) > 1e-6
        if np.any(ok):
            j_other = J.eval_many(np.exp(1j * psi[ok]), t[ok])
            keep = np.abs(j_other) > THETA_MASK_RTOL * J.scale
            th_other = j_other[keep] / np.conj(j_other[keep])
            th_src = theta[src[ok, 0], src[ok, 1]][keep]
            if th_other.size:
                residual = float(np.max(np.abs(th_other - th_src)))
                compared = int(th_other.size)
    sigma_res = None
    if f is not None and f.dbar is not None:
        d = f.dbar_at(images[..., None])[..., 0]
        good = mask & (np.abs(d) > 1e-12)
        if np.any(good):
            sigma = -d[good] / np.conj(d[good])
            sigma_res = float(np.max(np.abs(sigma - theta[good])))
    return ThetaField(theta, mask, residual, compared, sigma_res)


def _index_close(ti, pi, tj, pj, m, n, periodic, reach=4):
    dp = min(abs(pj - pi), n - abs(pj - pi))
    dt = abs(tj - ti)
    if periodic:
        dt = min(dt, m - dt)
    return dp <= reach and dt <= reach


# ---------------------------------------------------------------------------
# zero chains


@dataclass
class Branch:
    node_index: np.ndarray
    t: np.ndarray
    roots: np.ndarray
    kappa: float
    closed: bool = False

    @property
    def is_central(self) -> bool:
        return bool(np.all(np.abs(self.roots) < 1e-8))


@dataclass(frozen=True, eq=False)
class ZeroChain:
    branches: list
    zero_disc_nodes: list
    central_cycle_present: bool
    node_roots: list = field(repr=False)
    collisions: list = field(default_factory=list)
    period: float | None = None

    def kappa_sum(self, node: int) -> float:
        roots, kappas = self.node_roots[node]
        return float(np.sum(kappas))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "re_zeta", "im_zeta", "kappa", "branch_id"])
            for bid, br in enumerate(self.branches):
                for t, z in zip(br.t, br.roots):
                    writer.writerow([f"{t:.12g}", f"{z.real:.12g}", f"{z.imag:.12g}",
                                     f"{br.kappa:g}", bid])
            writer.writerow([])
            writer.writerow(["zero_disc_nodes"] + [str(k) for k in self.zero_disc_nodes])


def node_roots(coeffs, radius: float = 1.0, certify: bool = True):
    """Roots of one Taylor polynomial in the closed disc with multiplicities ``kappa``.

    Roots within ``BOUNDARY_SLACK`` of the unit circle count with half their
    multiplicity. Eigenvalue roots are accepted only when their counts inside
    ``1 -/+ slack`` match the certified windings there; otherwise the disc is
    searched by subdivision with argument-principle counts.
    """
    coeffs = trim_tail(coeffs, TAIL_RTOL)
    roots, mult = find_disc_roots(coeffs, radius=radius, slack=BOUNDARY_SLACK)
    if certify and not _counts_certified(coeffs, roots, mult, radius):
        roots, mult = find_disc_roots(coeffs, radius=radius, slack=BOUNDARY_SLACK,
                                      method="certified")
    on_edge = np.abs(np.abs(roots) - radius) <= BOUNDARY_SLACK * radius
    kappa = np.where(on_edge, 0.5 * mult, mult.astype(float))
    return roots, kappa


def _counts_certified(coeffs, roots, mult, radius) -> bool:
    mod = np.abs(roots)
    for r in (radius * (1.0 - BOUNDARY_SLACK), radius * (1.0 + BOUNDARY_SLACK)):
        try:
            turns = polynomial_winding(coeffs, r)
        except WindingError:
            return False
        if round(turns) != int(np.sum(mult[mod < r])):
            return False
    return True


def boundary_winding(coeffs) -> float:
    """Principal-value winding of ``zeta -> p(e^{i psi})`` around 0.

    Zeros on the circle contribute half their multiplicity; computed as the mean
    of the certified windings just inside and just outside the unit circle.
    """
    inner = polynomial_winding(coeffs, 1.0 - BOUNDARY_SLACK)
    outer = polynomial_winding(coeffs, 1.0 + BOUNDARY_SLACK)
    return 0.5 * (round(inner) + round(outer))


def track_zeros(J: JacobianField, max_jump: int = 2) -> ZeroChain:
    """Roots of ``J(., t)`` at every node, stitched into branches along ``t``."""
    family = J.family
    coeffs = J.taylor_data
    t_nodes = family.t_nodes
    m = len(t_nodes)
    dt = family.params.spacing
    peak = np.max(np.abs(J.boundary_samples), axis=-1)
    zero_disc = [int(k) for k in np.flatnonzero(peak < ZERO_DISC_RTOL * J.scale)]
    if len(zero_disc) == m:
        raise DegenerateTheta("J vanishes identically: every disc is a zero disc")
    per_node = []
    for k in range(m):
        if k in zero_disc:
            per_node.append((np.zeros(0, complex), np.zeros(0)))
            continue
        try:
            per_node.append(node_roots(coeffs[k]))
        except IdenticallyZero:
            zero_disc.append(k)
            per_node.append((np.zeros(0, complex), np.zeros(0)))
    live = [k for k in range(m) if k not in zero_disc]
    for a, b in zip(live[:-1], live[1:]):
        if b == a + 1 and abs(per_node[a][1].sum() - per_node[b][1].sum()) > max_jump:
            raise TrackingInstability(
                f"root count changes from {per_node[a][1].sum():g} to {per_node[b][1].sum():g} "
                f"between t={t_nodes[a]:.6g} and t={t_nodes[b]:.6g}; refine the grids")

    open_branches: list[dict] = []
    finished: list[dict] = []
    collisions = []

    def gate(br):
        if len(br["roots"]) >= 2:
            speed = abs(br["roots"][-1] - br["roots"][-2]) / dt
        else:
            speed = 1.0
        return 5.0 * dt * max(speed, 1.0)

    for k in range(m):
        roots, kappas = per_node[k]
        if k in zero_disc:
            finished.extend(open_branches)
            open_branches = []
            continue
        claimed = np.zeros(len(roots), dtype=bool)
        next_open = []
        pairs = []
        for bi, br in enumerate(open_branches):
            if br["nodes"][-1] != k - 1:
                continue
            for ri, z in enumerate(roots):
                d = abs(z - br["roots"][-1])
                if d <= gate(br):
                    pairs.append((d, bi, ri))
        pairs.sort()
        used_b = set()
        for d, bi, ri in pairs:
            if bi in used_b or claimed[ri]:
                continue
            br = open_branches[bi]
            if kappas[ri] != br["kappa"]:
                collisions.append((float(t_nodes[k]), complex(roots[ri])))
                continue
            used_b.add(bi)
            claimed[ri] = True
            br["nodes"].append(k)
            br["roots"].append(roots[ri])
            next_open.append(br)
        for bi, br in enumerate(open_branches):
            if bi not in used_b:
                finished.append(br)
        for ri in np.flatnonzero(~claimed):
            next_open.append({"nodes": [k], "roots": [roots[ri]], "kappa": float(kappas[ri])})
        open_branches = next_open
    finished.extend(open_branches)

    period = 2 * np.pi if family.params.periodic else None
    branches = _close_cycles(finished, t_nodes, m, dt, period) if period else [
        Branch(np.array(b["nodes"]), t_nodes[b["nodes"]], np.array(b["roots"]), b["kappa"])
        for b in finished]
    central = any(br.is_central and len(br.node_index) == len(live) for br in branches)
    return ZeroChain(branches, sorted(zero_disc), central, per_node, collisions, period)


def _close_cycles(raw, t_nodes, m, dt, period):
    """Join branches across the seam ``t = 2 pi ~ 0`` of a periodic parameter."""
    ends = {i: b for i, b in enumerate(raw) if b["nodes"][-1] == m - 1}
    starts = {i: b for i, b in enumerate(raw) if b["nodes"][0] == 0}
    link = {}
    taken = set()
    for i, b in ends.items():
        best, best_d = None, np.inf
        for j, s in starts.items():
            if j in taken or s["kappa"] != b["kappa"]:
                continue
            d = abs(s["roots"][0] - b["roots"][-1])
            if d < best_d:
                best, best_d = j, d
        if best is not None and best_d <= 5.0 * dt * max(1.0, _speed(b, dt)):
            link[i] = best
            taken.add(best)
    out = []
    visited = set()
    heads = [i for i in range(len(raw)) if i not in taken] + [i for i in range(len(raw)) if i in taken]
    for head in heads:
        if head in visited:
            continue
        nodes, ts, roots = [], [], []
        cur, lap, closed = head, 0, False
        while True:
            visited.add(cur)
            b = raw[cur]
            nodes.extend(b["nodes"])
            ts.extend(t_nodes[b["nodes"]] + lap * period)
            roots.extend(b["roots"])
            nxt = link.get(cur)
            if nxt is None:
                break
            lap += 1
            if nxt == head:
                closed = True
                break
            if nxt in visited:
                break
            cur = nxt
        out.append(Branch(np.array(nodes), np.array(ts), np.array(roots), raw[head]["kappa"], closed))
    return out


def _speed(b, dt):
    r = b["roots"]
    return abs(r[-1] - r[-2]) / dt if len(r) >= 2 else 1.0


# ---------------------------------------------------------------------------
# directional derivative along fibers


def _fd_derivative(t, y) -> np.ndarray:
    """Fourth-order derivative of samples on a (possibly non-uniform) grid."""
    from .numerics import lagrange_weights

    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=complex)
    n = len(t)
    out = np.empty(n, dtype=complex)
    width = min(5, n)
    for i in range(n):
        start = int(np.clip(i - width // 2, 0, n - width))
        _, dw = lagrange_weights(t[start:start + width], t[i])
        out[i] = dw @ y[start:start + width]
    return out


def directional_derivative_check(ext: ExtensionField, family: DiscFamily, fibers) -> float:
    """Largest ``|J + i zeta G_zeta dF/dt|`` along traced fibers, relative to the J scale.

    ``dF/dt`` is the derivative of ``F`` along the fiber, taken by finite differences
    of the sampled values, not from the chain rule.
    """
    if not ext.holds:
        raise NoExtension("directional derivative check needs a valid extension")
    J = compute_J(ext, family)
    worst = 0.0
    w_fn = family.params.interp_matrix
    for fiber in fibers:
        if len(fiber.t) < 5:
            continue
        w, _ = w_fn(fiber.t)
        f_coeffs = w @ ext.taylor_data
        powers = np.vander(fiber.zeta, f_coeffs.shape[-1], increasing=True)
        f_vals = np.sum(f_coeffs * powers, axis=1)
        df = _fd_derivative(fiber.t, f_vals)
        _, gz, _ = family.eval_many(fiber.zeta, fiber.t)
        jv = J.eval_many(fiber.zeta, fiber.t)
        worst = max(worst, float(np.max(np.abs(jv + 1j * fiber.zeta * gz * df))))
    return worst / J.scale
