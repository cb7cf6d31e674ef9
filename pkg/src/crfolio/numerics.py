"""Spectral and quadrature primitives on periodic grids and closed curves.

Everything downstream samples functions on the unit circle ``zeta = exp(i psi)``
at ``N`` equispaced angles, so the discrete Fourier transform is the workhorse:
Taylor data of an analytic extension is the non-negative half of the spectrum,
integrals over closed curves are rectangle sums, and the argument principle is
evaluated by summing branch-continuous phase increments.

The module also hosts the polynomial root finder used for zero tracking and
fiber seeding. By default it takes companion-matrix eigenvalues and merges
clusters; a certified variant subdivides the square around the closed unit disc,
counts roots in every cell with a certified contour winding and polishes with Newton.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

WINDING_TOLERANCE = 0.05


class ConfigurationError(ValueError):
    """Invalid sizes, lengths or parameters handed to a primitive."""


class DomainError(ValueError):
    """Evaluation requested outside the closed unit disc or parameter range."""


class WindingError(ArithmeticError):
    """Base class for failures of the argument principle."""


class NearSingularWinding(WindingError):
    pass


class NonClosedCurve(WindingError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    size: int

    def __post_init__(self):
        if self.size < 8:
            raise ConfigurationError(f"periodic grid needs at least 8 nodes, got {self.size}")
        if self.size % 2:
            raise ConfigurationError(f"periodic grid size must be even, got {self.size}")

    @property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.size) / self.size

    @property
    def points(self) -> np.ndarray:
        """The nodes as points ``exp(i psi)`` on the unit circle."""
        return np.exp(1j * self.nodes)


@dataclass(frozen=True, eq=False)
class CircleSamples:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape[-1] != self.grid.size:
            raise ConfigurationError(
                f"expected {self.grid.size} samples on the last axis, got {values.shape[-1]}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], size: int) -> "CircleSamples":
        grid = PeriodicGrid(size)
        return cls(grid, func(grid.points))


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    """Centered DFT coefficients ``c_k`` for ``k = -N/2 .. N/2-1`` on the last axis."""

    coefficients: np.ndarray
    size: int

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=complex)
        if coefficients.shape[-1] != self.size:
            raise ConfigurationError("spectrum length does not match grid size")
        PeriodicGrid(self.size)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.size // 2, self.size // 2)

    def coeff(self, k: int):
        if not -self.size // 2 <= k < self.size // 2:
            raise IndexError(f"mode {k} outside [-{self.size // 2}, {self.size // 2 - 1}]")
        return self.coefficients[..., k + self.size // 2]

    @property
    def nonnegative(self) -> np.ndarray:
        """Taylor coefficients ``c_0 .. c_{N/2-1}``."""
        return self.coefficients[..., self.size // 2:]

    @property
    def negative(self) -> np.ndarray:
        """Coefficients ``c_{-N/2} .. c_{-1}`` (the obstruction to extending)."""
        return self.coefficients[..., : self.size // 2]

    def samples(self) -> CircleSamples:
        values = np.fft.ifft(np.fft.ifftshift(self.coefficients, axes=-1), axis=-1) * self.size
        return CircleSamples(PeriodicGrid(self.size), values)


def fourier_coeffs(samples: CircleSamples) -> FourierSpectrum:
    n = samples.grid.size
    c = np.fft.fftshift(np.fft.fft(samples.values, axis=-1), axes=-1) / n
    return FourierSpectrum(c, n)


def spectral_derivative(spectrum: FourierSpectrum) -> FourierSpectrum:
    k = spectrum.modes.astype(float)
    k[0] = 0.0  # Nyquist mode
    return FourierSpectrum(spectrum.coefficients * (1j * k), spectrum.size)


def horner(coeffs, z):
    """Evaluate ``sum_k coeffs[..., k] z**k``.

    ``coeffs`` may carry leading batch axes which broadcast against ``z``.
    """
    coeffs = np.asarray(coeffs)
    z = np.asarray(z)
    if coeffs.ndim == 1 and z.ndim == 1 and z.size:
        return np.vander(z.astype(complex), coeffs.shape[-1], increasing=True) @ coeffs.astype(complex)
    out = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], z.shape), dtype=complex)
    for k in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * z + coeffs[..., k]
    return out


def taylor_eval(spectrum: FourierSpectrum, zeta):
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(np.abs(zeta) > 1.0 + 1e-12):
        raise DomainError("Taylor evaluation requires |zeta| <= 1")
    return horner(spectrum.nonnegative, zeta)


def line_integral(values, dz) -> complex:
    """Rectangle rule ``sum values_i dz_i``; spectrally accurate on closed curves."""
    values = np.asarray(values, dtype=complex)
    dz = np.asarray(dz, dtype=complex)
    if values.shape != dz.shape:
        raise ConfigurationError(f"length mismatch: {values.shape} vs {dz.shape}")
    if values.shape[-1] < 8:
        raise ConfigurationError("line integrals need at least 8 nodes")
    return np.sum(values * dz, axis=-1)


def curve_mesh(curve) -> float:
    curve = np.asarray(curve, dtype=complex)
    return float(np.max(np.abs(np.diff(np.append(curve, curve[0])))))


def argument_increment(values, closed: bool = True) -> float:
    """Branch-continuous argument change along a sampled path."""
    values = np.asarray(values, dtype=complex)
    if closed:
        values = np.append(values, values[0])
    return float(np.sum(np.angle(values[1:] / values[:-1])))


def winding_number(curve, b: complex = 0.0) -> int:
    """Index of the closed sampled curve around ``b``."""
    if isinstance(curve, CircleSamples):
        curve = curve.values
    curve = np.asarray(curve, dtype=complex)
    mesh = curve_mesh(curve)
    dist = np.min(np.abs(curve - b))
    if dist <= 10.0 * mesh:
        raise NearSingularWinding(
            f"curve passes within {dist:.3g} of {b}, mesh is {mesh:.3g}")
    turns = argument_increment(curve - b) / (2.0 * np.pi)
    nearest = round(turns)
    if abs(turns - nearest) > WINDING_TOLERANCE:
        raise NonClosedCurve(f"argument change {turns:.4f} turns is not an integer")
    return int(nearest)


def round_winding(turns: float, what: str = "winding") -> int:
    nearest = round(turns)
    if abs(turns - nearest) > WINDING_TOLERANCE:
        raise NonClosedCurve(f"{what} {turns:.4f} is not within {WINDING_TOLERANCE} of an integer")
    return int(nearest)


# ---------------------------------------------------------------------------
# certified contour windings of polynomials and roots in the closed disc

EPS = np.finfo(float).eps


class IdenticallyZero(ArithmeticError):
    """Polynomial vanishes identically: no isolated roots to report."""


def trim_polynomial(coeffs, rel: float = 1e-14) -> np.ndarray:
    """Drop trailing coefficients below ``rel * max|c|``."""
    c = np.asarray(coeffs, dtype=complex).ravel()
    top = np.max(np.abs(c)) if c.size else 0.0
    if top == 0.0:
        raise IdenticallyZero("polynomial is identically zero")
    keep = np.flatnonzero(np.abs(c) >= rel * top)
    return c[: keep[-1] + 1]


def trim_tail(coeffs, rel: float = 1e-12) -> np.ndarray:
    """Drop the longest tail whose l1 norm is below ``rel * sum|c|``.

    On the closed unit disc the dropped tail is bounded by that l1 norm, so by
    Rouche's theorem root counts are unchanged wherever ``|p|`` exceeds it.
    """
    c = np.asarray(coeffs, dtype=complex).ravel()
    mag = np.abs(c)
    total = mag.sum()
    if total == 0.0:
        raise IdenticallyZero("polynomial is identically zero")
    tail = np.cumsum(mag[::-1])[::-1]  # tail[k] = sum_{j >= k} |c_j|
    small = np.flatnonzero(tail >= rel * total)
    return c[: small[-1] + 1]


class _LocalBounds:
    """Bounds on |p'| and |p''| over discs, via Taylor coefficients at their centres.

    The shifted coefficients ``a_j(m) = sum_l C(j+l, l) c_{j+l} m**l`` come out
    of one matrix product with a Hankel-type table.
    """

    def __init__(self, coeffs: np.ndarray):
        from scipy.special import comb

        d = len(coeffs) - 1
        j = np.arange(d + 1)[:, None]
        l = np.arange(d + 1)[None, :]
        idx = j + l
        valid = idx <= d
        table = np.zeros((d + 1, d + 1), dtype=complex)
        table[valid] = comb(idx[valid], l.repeat(d + 1, 0)[valid]) * coeffs[idx[valid]]
        self.table = table
        self.abs_table = np.abs(table)
        self.degree = d
        self.coeffs = coeffs
        self.abs_coeffs = np.abs(coeffs)

    def __call__(self, centres: np.ndarray, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.degree
        if d < 1:
            zero = np.zeros(len(centres))
            return zero, zero
        powers = np.vander(centres, d + 1, increasing=True).T
        shifted = np.abs(self.table @ powers)
        shifted += 4.0 * (d + 1) * EPS * (self.abs_table @ np.abs(powers))
        j = np.arange(d + 1, dtype=float)[:, None]
        h = radii[None, :]
        m1 = np.sum((j[1:] * shifted[1:]) * h ** (j[1:] - 1), axis=0)
        m2 = np.sum((j[2:] * (j[2:] - 1) * shifted[2:]) * h ** (j[2:] - 2), axis=0)
        return m1, m2

    def floor(self, z: np.ndarray) -> np.ndarray:
        """Rounding level of a Horner evaluation at ``z``."""
        return 64.0 * EPS * horner(self.abs_coeffs, np.abs(z)).real


def _certified_increments(bounds: _LocalBounds, curve, n_curves: int,
                          initial: int = 16, max_rounds: int = 60):
    """Argument change of ``p`` along each of ``n_curves`` parametrized paths.

    ``curve(ids, s)`` returns ``(z, speed, accel)`` for parameters ``s`` in [0, 1];
    ``speed`` and ``accel`` bound ``|z'|`` and ``|z''|`` along the path.
    An interval is accepted once ``|dq| + L**2 max|q''| / 8 < min |q|`` at its
    endpoints; the image then stays in a disc around one endpoint that misses the
    origin, so the principal angle is the exact increment.

    Returns the increments and a mask of paths that pass through (or too close
    to) a zero, whose increments are meaningless.
    """
    total = np.zeros(n_curves)
    failed = np.zeros(n_curves, dtype=bool)
    ids = np.repeat(np.arange(n_curves), initial)
    grid = np.linspace(0.0, 1.0, initial + 1)
    sa = np.tile(grid[:-1], n_curves)
    sb = np.tile(grid[1:], n_curves)
    za, _, _ = curve(ids, sa)
    zb, _, _ = curve(ids, sb)
    pa = horner(bounds.coeffs, za)
    pb = horner(bounds.coeffs, zb)
    for _ in range(max_rounds):
        small = np.minimum(np.abs(pa), np.abs(pb))
        hit = small <= np.maximum(bounds.floor(za), bounds.floor(zb))
        failed[ids[hit]] = True
        live = ~failed[ids]
        ids, sa, sb, za, zb, pa, pb, small = (a[live] for a in (ids, sa, sb, za, zb, pa, pb, small))
        if ids.size == 0:
            return total, failed
        mid = 0.5 * (sa + sb)
        zm, speed, accel = curve(ids, mid)
        length = sb - sa
        m1, m2 = bounds(zm, 0.5 * length * speed)
        second = m1 * accel + m2 * speed ** 2
        ok = np.abs(pb - pa) + length ** 2 * second / 8.0 < small
        np.add.at(total, ids[ok], np.angle(pb[ok] / pa[ok]))
        bad = ~ok
        pm = horner(bounds.coeffs, zm[bad])
        ids = np.repeat(ids[bad], 2)
        sa, sb = (np.column_stack([sa[bad], mid[bad]]).ravel(),
                  np.column_stack([mid[bad], sb[bad]]).ravel())
        za = np.column_stack([za[bad], zm[bad]]).ravel()
        zb = np.column_stack([zm[bad], zb[bad]]).ravel()
        pa = np.column_stack([pa[bad], pm]).ravel()
        pb = np.column_stack([pm, pb[bad]]).ravel()
    failed[ids] = True
    return total, failed


def polynomial_winding(coeffs, radius: float = 1.0, centre: complex = 0.0) -> float:
    """Number of roots of ``p`` inside the circle ``|z - centre| = radius``.

    Returned as the unrounded turn count (an integer up to rounding).
    """
    c = trim_polynomial(coeffs)
    bounds = _LocalBounds(c)

    def circle(ids, s):
        theta = 2.0 * np.pi * s
        z = centre + radius * np.exp(1j * theta)
        speed = np.full_like(s, 2.0 * np.pi * radius)
        accel = np.full_like(s, (2.0 * np.pi) ** 2 * radius)
        return z, speed, accel

    inc, failed = _certified_increments(bounds, circle, 1, initial=64)
    if failed[0]:
        raise NearSingularWinding(f"a root lies on the circle of radius {radius}")
    return float(inc[0] / (2.0 * np.pi))


@dataclass
class _Cell:
    x0: float
    x1: float
    y0: float
    y1: float
    count: int = -1

    @property
    def centre(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def halfwidth(self) -> float:
        return 0.5 * max(self.x1 - self.x0, self.y1 - self.y0)

    def distance_to_origin(self) -> float:
        x = min(max(0.0, self.x0), self.x1)
        y = min(max(0.0, self.y0), self.y1)
        return float(np.hypot(x, y))

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (self.x0 - margin <= z.real <= self.x1 + margin
                and self.y0 - margin <= z.imag <= self.y1 + margin)

    def corners(self) -> list[complex]:
        return [complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1)]


def _cell_counts(bounds: _LocalBounds, cells: list[_Cell]) -> np.ndarray:
    """Root counts of many rectangles from their counter-clockwise edges.

    Cells whose boundary passes through a root get the count -1.
    """
    starts, ends = [], []
    for cell in cells:
        corners = cell.corners()
        for k in range(4):
            starts.append(corners[k])
            ends.append(corners[(k + 1) % 4])
    za = np.asarray(starts)
    dz = np.asarray(ends) - za
    mod = np.abs(dz)

    def segment(ids, s):
        return za[ids] + s * dz[ids], mod[ids], np.zeros_like(s)

    inc, failed = _certified_increments(bounds, segment, len(za))
    turns = inc.reshape(-1, 4).sum(axis=1) / (2.0 * np.pi)
    counts = np.rint(turns)
    bad = failed.reshape(-1, 4).any(axis=1) | (np.abs(turns - counts) > 1e-6) | (counts < 0)
    counts[bad] = -1
    return counts.astype(int)


def _newton(coeffs: np.ndarray, z0: complex, order: int = 0, iters: int = 60) -> complex:
    c = np.asarray(coeffs, dtype=complex)
    for _ in range(order):
        c = c[1:] * np.arange(1, len(c))
    cs = [complex(v) for v in c[::-1]]
    z = complex(z0)
    for _ in range(iters):
        p, dp = 0j, 0j
        for a in cs:
            dp = dp * z + p
            p = p * z + a
        if dp == 0:
            break
        step = p / dp
        z -= step
        if abs(step) <= 4.0 * EPS * max(1.0, abs(z)):
            break
    return z


def find_disc_roots(coeffs, radius: float = 1.0, slack: float = 1e-6,
                    min_halfwidth: float = 1e-6, newton_halfwidth: float = 0.05,
                    seed: int = 7, method: str = "eig",
                    cluster_tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Roots of ``sum c_k z**k`` in ``|z| <= radius * (1 + slack)`` with multiplicities.

    ``method="eig"`` takes companion-matrix eigenvalues, merges those closer than
    ``cluster_tol`` into one multiple root (its centroid) and polishes by Newton on
    the derivative of order ``m - 1``.

    ``method="certified"`` splits rectangles covering the disc until each holds a
    single root (then Newton from the centre, accepted only if it stays in the cell)
    or shrinks below ``min_halfwidth`` (a cluster). Counts come from certified
    windings of the cell boundaries and each split must conserve the parent's count.
    """
    if method not in ("eig", "certified"):
        raise ConfigurationError(f"unknown root method {method!r}")
    c = trim_polynomial(coeffs)
    zero_order = int(np.argmax(np.abs(c) >= 1e-14 * np.max(np.abs(c))))
    c_red = c[zero_order:]
    roots: list[complex] = []
    mults: list[int] = []
    if zero_order:
        roots.append(0.0j)
        mults.append(zero_order)
    if len(c_red) > 1 and method == "eig":
        for z, m in _eig_roots(c_red, cluster_tol):
            roots.append(z)
            mults.append(m)
    elif len(c_red) > 1:
        found = _subdivide(c_red, radius * (1.0 + slack), min_halfwidth, newton_halfwidth, seed)
        for z, m in found:
            roots.append(z)
            mults.append(m)
    roots_arr, mult_arr = _merge_clusters(c, np.asarray(roots, dtype=complex),
                                          np.asarray(mults, dtype=int), 10.0 * min_halfwidth)
    inside = np.abs(roots_arr) <= radius * (1.0 + slack)
    order = np.lexsort((roots_arr.imag, roots_arr.real))
    order = order[inside[order]]
    return roots_arr[order], mult_arr[order]


def _eig_roots(c: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    if len(c) == 2:
        return [(complex(-c[0] / c[1]), 1)]
    r = np.roots(c[::-1])
    r = r[np.isfinite(r)]
    if r.size == 0:
        return []
    pairs = cKDTree(np.column_stack([r.real, r.imag])).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return [(_newton(c, z), 1) for z in r]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(r), len(r)))
    n_groups, labels = connected_components(graph, directed=False)
    out = []
    for g in range(n_groups):
        members = r[labels == g]
        m = len(members)
        centre = complex(members.mean())
        z = _newton(c, centre, order=m - 1)
        if not np.isfinite(z) or abs(z - centre) > tol:
            z = centre
        out.append((z, m))
    return out


def _subdivide(c: np.ndarray, reach: float, min_halfwidth: float,
               newton_halfwidth: float, seed: int) -> list[tuple[complex, int]]:
    rng = np.random.default_rng(seed)
    bounds = _LocalBounds(c)
    centre = complex(0.00731, -0.00419) * reach
    half = 1.05 * reach
    top = _Cell(centre.real - half, centre.real + half, centre.imag - half, centre.imag + half)
    top.count = int(_cell_counts(bounds, [top])[0])
    if top.count < 0:
        raise NearSingularWinding("root on the boundary of the search box")
    active = [top] if top.count > 0 else []
    out: list[tuple[complex, int]] = []
    while active:
        pending: list[_Cell] = []
        for cell in active:
            if cell.distance_to_origin() > reach:
                continue
            if cell.count == 1 and cell.halfwidth < newton_halfwidth:
                z = _newton(c, cell.centre)
                if cell.contains(z, margin=1e-12):
                    out.append((z, 1))
                    continue
            if cell.halfwidth < min_halfwidth:
                out.append((_newton(c, cell.centre, order=cell.count - 1), cell.count))
                continue
            pending.append(cell)
        active = []
        for attempt in range(8):
            if not pending:
                break
            splits = [_split_cell(cell, rng) for cell in pending]
            counts = _cell_counts(bounds, [ch for four in splits for ch in four]).reshape(-1, 4)
            retry = []
            for cell, four, k in zip(pending, splits, counts):
                if np.any(k < 0) or k.sum() != cell.count:
                    retry.append(cell)
                    continue
                for ch, kk in zip(four, k):
                    ch.count = int(kk)
                    if kk > 0:
                        active.append(ch)
            pending = retry
        for cell in pending:
            # splitting keeps hitting roots: report the cell as a cluster
            out.append((_newton(c, cell.centre, order=cell.count - 1), cell.count))
    return out


def _split_cell(cell: _Cell, rng) -> list[_Cell]:
    fx, fy = 0.5 + rng.uniform(-0.05, 0.05, size=2)
    xm = cell.x0 + fx * (cell.x1 - cell.x0)
    ym = cell.y0 + fy * (cell.y1 - cell.y0)
    return [_Cell(cell.x0, xm, cell.y0, ym), _Cell(xm, cell.x1, cell.y0, ym),
            _Cell(cell.x0, xm, ym, cell.y1), _Cell(xm, cell.x1, ym, cell.y1)]


def _merge_clusters(c, roots, mults, radius):
    if len(roots) < 2:
        return roots, mults
    order = np.argsort(roots.real)
    roots, mults = roots[order], mults[order]
    merged_r, merged_m = [], []
    used = np.zeros(len(roots), bool)
    for i in range(len(roots)):
        if used[i]:
            continue
        group = [j for j in range(i, len(roots)) if not used[j] and abs(roots[j] - roots[i]) < radius]
        used[group] = True
        m = int(mults[group].sum())
        if len(group) == 1:
            merged_r.append(roots[i])
        else:
            centre = np.average(roots[group], weights=mults[group])
            merged_r.append(0.0j if np.any(roots[group] == 0) else _newton(c, centre, order=m - 1))
        merged_m.append(m)
    return np.asarray(merged_r, dtype=complex), np.asarray(merged_m, dtype=int)


# ---------------------------------------------------------------------------
# coefficient-level helpers for batched Taylor data


def poly_eval(coeffs, zeta) -> np.ndarray:
    """Evaluate batched Taylor data ``coeffs[..., K]`` at the points ``zeta``.

    Returns shape ``coeffs.shape[:-1] + zeta.shape``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    flat = zeta.ravel()
    powers = np.vander(flat, coeffs.shape[-1], increasing=True)
    out = coeffs @ powers.T
    return out.reshape(coeffs.shape[:-1] + zeta.shape)


def poly_derivative(coeffs) -> np.ndarray:
    """Taylor data of ``d/dzeta``, same length (the top slot becomes zero)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    out = np.zeros_like(coeffs)
    k = np.arange(1, coeffs.shape[-1])
    out[..., :-1] = coeffs[..., 1:] * k
    return out


def poly_multiply(a, b) -> np.ndarray:
    """Batched coefficient convolution (exact summation, no FFT rounding)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[-1] < b.shape[-1]:
        a, b = b, a
    la, lb = a.shape[-1], b.shape[-1]
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (la + lb - 1,)
    out = np.zeros(shape, dtype=complex)
    for j in range(lb):
        out[..., j:j + la] += a * b[..., j:j + 1]
    return out


def pad_coefficients(coeffs, length: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[-1] >= length:
        return coeffs
    pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, length - coeffs.shape[-1])]
    return np.pad(coeffs, pad)


def lagrange_weights(nodes, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange basis values and first derivatives at ``x`` for arbitrary nodes."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    w = np.ones(n)
    dw = np.zeros(n)
    for j in range(n):
        others = np.delete(nodes, j)
        denom = np.prod(nodes[j] - others)
        diffs = x - others
        w[j] = np.prod(diffs) / denom
        total = 0.0
        for m in range(n - 1):
            total += np.prod(np.delete(diffs, m))
        dw[j] = total / denom
    return w, dw
