"""Parametrized families of analytic discs ``G(zeta, t) = g_t(zeta)``.

A family stores, for every node ``t`` of a parameter space, the Taylor
coefficients of ``g_t``. Dependence on ``t`` between nodes is the interpolant
of the node data: trigonometric for periodic parameters, local five-point
Lagrange for the interval and the three-dimensional chart. Derivatives in
``t`` are derivatives of that interpolant, so at the nodes they coincide with
spectral differentiation or fourth-order finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.interpolate import make_interp_spline
from scipy.spatial import cKDTree

from .numerics import (ConfigurationError, DomainError, lagrange_weights, poly_derivative,
                       poly_eval)

CIRCLE, INTERVAL, BOX3 = "circle", "interval", "box3"
STENCIL = 5


# monomial coefficients (increasing powers) of the Lagrange basis on 0..STENCIL-1
_LAGRANGE_POLY = np.linalg.inv(np.vander(np.arange(STENCIL, dtype=float), STENCIL,
                                         increasing=True)).T
_LAGRANGE_DPOLY = _LAGRANGE_POLY[:, 1:] * np.arange(1, STENCIL)


def _stencil_start(x: float, size: int) -> int:
    return int(np.clip(np.rint(x) - STENCIL // 2, 0, size - STENCIL))


def _local_derivative_matrix(size: int, spacing: float) -> np.ndarray:
    """Rows hold fourth-order derivative weights at each node (one-sided at the ends)."""
    grid = np.arange(STENCIL, dtype=float)
    mat = np.zeros((size, size))
    for i in range(size):
        start = _stencil_start(i, size)
        _, dw = lagrange_weights(grid, float(i - start))
        mat[i, start:start + STENCIL] = dw / spacing
    return mat


@dataclass(frozen=True)
class ParamSpace:
    """Parameter manifold sampled on a regular grid.

    ``circle`` is S^1 with nodes ``2 pi j / M``; ``interval`` is [0, 1] with both
    endpoints; ``box3`` is S^3 of radius ``sphere_radius`` covered by two
    stereographic charts, each sampled on ``[-1, 1]^3``.
    """

    kind: str
    resolution: int
    sphere_radius: float = 1.0

    def __post_init__(self):
        if self.kind not in (CIRCLE, INTERVAL, BOX3):
            raise ConfigurationError(f"unknown parameter space kind {self.kind!r}")
        if self.resolution < 8:
            raise ConfigurationError(f"parameter resolution must be >= 8, got {self.resolution}")
        if self.kind == CIRCLE and self.resolution % 2:
            raise ConfigurationError("periodic parameter grids need an even resolution")

    @property
    def shape(self) -> tuple[int, ...]:
        m = self.resolution
        return (2, m, m, m) if self.kind == BOX3 else (m,)

    @property
    def ndim(self) -> int:
        """Number of parameter coordinates."""
        return 3 if self.kind == BOX3 else 1

    @property
    def periodic(self) -> bool:
        return self.kind == CIRCLE

    @property
    def spacing(self) -> float:
        m = self.resolution
        if self.kind == CIRCLE:
            return 2.0 * np.pi / m
        if self.kind == INTERVAL:
            return 1.0 / (m - 1)
        return 2.0 / (m - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one parameter axis."""
        m = self.resolution
        if self.kind == CIRCLE:
            return 2.0 * np.pi * np.arange(m) / m
        if self.kind == INTERVAL:
            return np.linspace(0.0, 1.0, m)
        return np.linspace(-1.0, 1.0, m)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``shape`` (or ``shape + (3,)`` for box3)."""
        if self.kind != BOX3:
            return self.axis.copy()
        u = np.stack(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"), axis=-1)
        return np.broadcast_to(u, (2,) + u.shape).copy()

    def sphere_points(self, u=None, chart=None) -> np.ndarray:
        """Inverse stereographic images on S^3 as ``(z1, z2)`` pairs.

        Chart 0 projects from the north pole, chart 1 from the south pole.
        """
        if u is None:
            u = self.nodes
            sign = np.array([1.0, -1.0])[:, None, None, None]
        else:
            u = np.asarray(u, dtype=float)
            sign = 1.0 if chart == 0 else -1.0
        q = np.sum(u ** 2, axis=-1)
        s = self.sphere_radius / (q + 1.0)
        x1, x2, x3 = (2.0 * s * u[..., k] for k in range(3))
        x4 = sign * s * (q - 1.0)
        return np.stack([x1 + 1j * x2, x3 + 1j * x4], axis=-1)

    def sphere_jacobian(self) -> np.ndarray:
        """Exact ``d(z1, z2)/du_k`` of the chart maps, shape ``shape + (3, 2)``."""
        u = self.nodes
        sign = np.array([1.0, -1.0])[:, None, None, None, None]
        q = np.sum(u ** 2, axis=-1)[..., None]
        s = self.sphere_radius
        eye = np.eye(3)
        # dx_i/du_k for i < 3, then dx_4/du_k
        dx = 2.0 * s * (eye / (q[..., None] + 1.0) - 2.0 * u[..., :, None] * u[..., None, :]
                        / (q[..., None] + 1.0) ** 2)
        dx4 = sign * s * 4.0 * u / (q + 1.0) ** 2
        dz1 = dx[..., 0, :] + 1j * dx[..., 1, :]
        dz2 = dx[..., 2, :] + 1j * dx4
        return np.stack([dz1, dz2], axis=-1)

    @cached_property
    def valid_mask(self) -> np.ndarray:
        """Nodes kept after merging the two charts of S^3 (no double counting)."""
        if self.kind != BOX3:
            return np.ones(self.shape, dtype=bool)
        q = np.sum(self.nodes ** 2, axis=-1)
        mask = np.empty(self.shape, dtype=bool)
        mask[0] = q[0] <= 1.0 + 1e-12
        mask[1] = q[1] < 1.0 - 1e-12
        return mask

    @cached_property
    def derivative_matrix(self) -> np.ndarray:
        m = self.resolution
        if self.kind == CIRCLE:
            k = np.fft.fftfreq(m, d=1.0 / m)
            k[m // 2] = 0.0
            eye = np.eye(m)
            return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))
        return _local_derivative_matrix(m, self.spacing)

    def differentiate(self, data) -> np.ndarray:
        """Parameter derivatives of node data ``shape + rest``.

        Returns ``shape + (ndim,) + rest``.
        """
        data = np.asarray(data)
        dmat = self.derivative_matrix
        if self.kind != BOX3:
            return np.tensordot(dmat, data, axes=(1, 0))[:, None]
        parts = []
        for ax in (1, 2, 3):
            moved = np.moveaxis(data, ax, 0)
            parts.append(np.moveaxis(np.tensordot(dmat, moved, axes=(1, 0)), 0, ax))
        return np.stack(parts, axis=4)

    # -- interpolation -------------------------------------------------------

    def check(self, t):
        if self.kind == CIRCLE:
            return float(t)
        if self.kind == INTERVAL:
            t = float(t)
            if not -1e-12 <= t <= 1.0 + 1e-12:
                raise DomainError(f"parameter {t} outside [0, 1]")
            return min(max(t, 0.0), 1.0)
        chart, u = t
        u = np.asarray(u, dtype=float)
        if chart not in (0, 1) or u.shape != (3,) or np.any(np.abs(u) > 1.0 + 1e-12):
            raise DomainError(f"parameter {t!r} outside the box3 charts")
        return int(chart), np.clip(u, -1.0, 1.0)

    def _axis_weights(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        m = self.resolution
        if self.kind == CIRCLE:
            d = x - self.axis
            k = np.arange(1, m // 2)
            w = (1.0 + 2.0 * np.cos(np.outer(d, k)).sum(axis=1) + np.cos(0.5 * m * d)) / m
            dw = (-2.0 * (np.sin(np.outer(d, k)) * k).sum(axis=1) - 0.5 * m * np.sin(0.5 * m * d)) / m
            return w, dw
        pos = (x - self.axis[0]) / self.spacing
        start = _stencil_start(pos, m)
        lw, ldw = lagrange_weights(np.arange(STENCIL, dtype=float), pos - start)
        w = np.zeros(m)
        dw = np.zeros(m)
        w[start:start + STENCIL] = lw
        dw[start:start + STENCIL] = ldw / self.spacing
        return w, dw

    def interp_matrix(self, ts) -> tuple[np.ndarray, np.ndarray]:
        """Interpolation weights and their derivatives at many one-dimensional parameters.

        Returns two ``(len(ts), M)`` arrays.
        """
        if self.kind == BOX3:
            raise ConfigurationError("interp_matrix is defined for one-parameter spaces")
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        m = self.resolution
        if self.kind == CIRCLE:
            # nodes are equispaced: sin(m (t - t_j) / 2) = (-1)^j sin(m t / 2), and the
            # half-angle terms follow from the addition formulas
            sj, cj, sign = self._circle_tables
            st, ct = np.sin(0.5 * ts)[:, None], np.cos(0.5 * ts)[:, None]
            s = st * cj - ct * sj
            c = ct * cj + st * sj
            sm = np.sin(0.5 * m * ts)[:, None] * sign
            cm = np.cos(0.5 * m * ts)[:, None] * sign
            with np.errstate(all="ignore"):
                w = sm * c / (m * s)
                dw = (0.5 * m * cm * c / s - 0.5 * sm / s ** 2) / m
            close = np.abs(s) < 1e-3
            if np.any(close):
                d = ts[:, None] - self.axis[None, :]
                w[close], dw[close] = self._direct_weight(d[close])
            return w, dw
        bad = (ts < -1e-12) | (ts > 1.0 + 1e-12)
        if np.any(bad):
            raise DomainError(f"parameter {ts[bad][0]} outside [0, 1]")
        pos = np.clip(ts, 0.0, 1.0) / self.spacing
        start = np.clip(np.rint(pos) - STENCIL // 2, 0, m - STENCIL).astype(int)
        powers = np.vander(pos - start, STENCIL, increasing=True)
        lw = powers @ _LAGRANGE_POLY.T
        ldw = powers[:, :-1] @ _LAGRANGE_DPOLY.T
        w = np.zeros((len(ts), m))
        dw = np.zeros((len(ts), m))
        rows = np.arange(len(ts))[:, None]
        cols = start[:, None] + np.arange(STENCIL)[None, :]
        w[rows, cols] = lw
        dw[rows, cols] = ldw / self.spacing
        return w, dw

    @cached_property
    def _circle_tables(self):
        half = 0.5 * self.axis
        sign = np.where(np.arange(self.resolution) % 2, -1.0, 1.0)
        return np.sin(half), np.cos(half), sign

    def _direct_weight(self, d):
        """Cosine-sum form of the weights, stable where ``sin(d / 2)`` is tiny."""
        m = self.resolution
        d = np.asarray(d, dtype=float)
        k = np.arange(1, m // 2)
        kd = np.multiply.outer(d, k)
        w = (1.0 + 2.0 * np.cos(kd).sum(axis=-1) + np.cos(0.5 * m * d)) / m
        dw = (-2.0 * (k * np.sin(kd)).sum(axis=-1) - 0.5 * m * np.sin(0.5 * m * d)) / m
        return w, dw

    def interpolate(self, data, t) -> tuple[np.ndarray, np.ndarray]:
        """Value and parameter gradient of the node-data interpolant at ``t``.

        ``data`` has shape ``shape + rest``; returns ``rest`` and ``(ndim,) + rest``.
        """
        t = self.check(t)
        data = np.asarray(data)
        if self.kind != BOX3:
            w, dw = self._axis_weights(t)
            return np.tensordot(w, data, axes=(0, 0)), np.tensordot(dw, data, axes=(0, 0))[None]
        chart, u = t
        ws = [self._axis_weights(x) for x in u]
        block = data[chart]
        val = np.einsum("i,j,k,ijk...->...", ws[0][0], ws[1][0], ws[2][0], block)
        grads = [np.einsum("i,j,k,ijk...->...", *(ws[a][1] if a == b else ws[a][0] for a in range(3)),
                           block) for b in range(3)]
        return val, np.stack(grads)


@dataclass(frozen=True, eq=False)
class DiscFamily:
    """Family of analytic discs stored as per-node Taylor data.

    ``taylor_data`` has shape ``params.shape + (n, K)``.
    """

    ambient_dim: int
    params: ParamSpace
    taylor_data: np.ndarray
    provenance: dict = field(default_factory=dict)
    exact_dt: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        data = np.asarray(self.taylor_data, dtype=complex)
        if self.ambient_dim not in (1, 2):
            raise ConfigurationError("ambient dimension must be 1 or 2")
        if self.params.kind == BOX3 and self.ambient_dim != 2:
            raise ConfigurationError("box3 parameter spaces belong to families in C^2")
        if self.params.kind != BOX3 and self.ambient_dim != 1:
            raise ConfigurationError("one-parameter families live in C")
        expected = self.params.shape + (self.ambient_dim,)
        if data.ndim != len(expected) + 1 or data.shape[:-1] != expected:
            raise ConfigurationError(
                f"taylor data must have shape {expected} + (K,), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("taylor data contains non-finite values")
        object.__setattr__(self, "taylor_data", data)
        if self.exact_dt is not None:
            exact = np.asarray(self.exact_dt, dtype=complex)
            want = self.params.shape + (self.params.ndim,) + data.shape[-2:]
            if exact.shape != want:
                raise ConfigurationError(f"exact parameter derivatives must have shape {want}")
            object.__setattr__(self, "exact_dt", exact)
        self._check_embedding()
        self._check_smoothness()

    # -- invariants ----------------------------------------------------------

    def _check_embedding(self):
        r = np.linspace(0.0, 1.0, 32)
        theta = 2.0 * np.pi * np.arange(32) / 32
        zeta = np.outer(r, np.exp(1j * theta)).ravel()
        deriv = poly_eval(poly_derivative(self.taylor_data), zeta)
        speed = np.sqrt(np.sum(np.abs(deriv) ** 2, axis=-2))
        worst = speed.min(axis=-1)
        threshold = 1e-10 * max(self.scale, 1e-300)
        bad = np.argwhere((worst <= threshold) & self.params.valid_mask)
        if bad.size:
            idx = tuple(bad[0])
            raise ConfigurationError(f"degenerate disc at t={self._describe_node(idx)}: "
                                     "derivative vanishes in the closed disc")

    def _check_smoothness(self):
        data = self.taylor_data
        scale = np.max(np.abs(data))
        if scale == 0.0:
            return
        bound = 10.0 / self.params.resolution * scale
        axes = (0,) if self.params.kind != BOX3 else (1, 2, 3)
        for ax in axes:
            jumps = np.abs(np.diff(data, axis=ax))
            worst = jumps.max() if jumps.size else 0.0
            if self.params.periodic:
                worst = max(worst, np.abs(data[0] - data[-1]).max())
            if worst > bound:
                raise ConfigurationError(
                    f"taylor data varies too fast between parameter nodes ({worst:.3g} > {bound:.3g})")

    def _describe_node(self, idx) -> str:
        if self.params.kind == BOX3:
            return f"chart {idx[0]}, u={self.params.nodes[idx].round(6).tolist()}"
        return f"{self.params.nodes[idx[0]]:.6g}"

    # -- basic data ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.taylor_data.shape[-1] - 1

    @cached_property
    def scale(self) -> float:
        """Upper bound for |G| on the closed disc over all nodes."""
        return float(np.max(np.sum(np.abs(self.taylor_data), axis=-1)))

    @cached_property
    def dzeta_data(self) -> np.ndarray:
        return poly_derivative(self.taylor_data)

    @cached_property
    def dt_data(self) -> np.ndarray:
        """Node Taylor data of parameter derivatives, ``params.shape + (ndim, n, K)``.

        Builders with closed-form chart dependence supply these exactly; otherwise
        they come from differentiating the node data.
        """
        if self.exact_dt is not None:
            return self.exact_dt
        return self.params.differentiate(self.taylor_data)

    @property
    def is_linear(self) -> bool:
        """True when every disc is an affine image of the unit disc."""
        return self.degree < 2 or bool(np.all(np.abs(self.taylor_data[..., 2:]) <= 1e-14 * self.scale))

    # -- pointwise access ----------------------------------------------------

    def _squeeze(self, arr):
        return arr[..., 0] if self.ambient_dim == 1 else arr

    def coefficients_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Taylor data ``(n, K)`` of ``g_t`` and of its parameter gradient ``(ndim, n, K)``."""
        return self.params.interpolate(self.taylor_data, t)

    def _check_zeta(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        if np.any(np.abs(zeta) > 1.0 + 1e-12):
            raise DomainError("discs are parametrized over |zeta| <= 1")
        return zeta

    def eval(self, zeta, t):
        """``G(zeta, t)``; the trailing axis of length n is dropped when n = 1."""
        zeta = self._check_zeta(zeta)
        coeffs, _ = self.coefficients_at(t)
        return self._squeeze(np.moveaxis(poly_eval(coeffs, zeta), 0, -1))

    def d_zeta(self, zeta, t):
        zeta = self._check_zeta(zeta)
        coeffs, _ = self.coefficients_at(t)
        return self._squeeze(np.moveaxis(poly_eval(poly_derivative(coeffs), zeta), 0, -1))

    def d_t(self, zeta, t):
        """Parameter derivative; box3 families get an extra axis of length 3 before n."""
        zeta = self._check_zeta(zeta)
        _, grad = self.coefficients_at(t)
        vals = np.moveaxis(poly_eval(grad, zeta), (0, 1), (-2, -1))
        vals = self._squeeze(vals)
        return vals[..., 0] if self.params.ndim == 1 else vals

    # -- grid access ---------------------------------------------------------

    def grid_values(self, zeta) -> np.ndarray:
        """``G`` at every node and every point of ``zeta``: ``params.shape + (n,) + zeta.shape``."""
        return poly_eval(self.taylor_data, zeta)

    def grid_d_zeta(self, zeta) -> np.ndarray:
        return poly_eval(self.dzeta_data, zeta)

    def grid_d_t(self, zeta) -> np.ndarray:
        """``params.shape + (ndim, n) + zeta.shape``."""
        return poly_eval(self.dt_data, zeta)

    def boundary_points(self, size: int) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(size) / size)

    def eval_many(self, zeta, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``G``, ``dG/dzeta`` and ``dG/dt`` at paired arrays of points (planar families)."""
        self.require_planar("eval_many")
        zeta = np.asarray(zeta, dtype=complex)
        t = np.broadcast_to(np.asarray(t, dtype=float), zeta.shape)
        w, dw = self.params.interp_matrix(t.ravel())
        c = w @ self.coeffs1
        dc = dw @ self.coeffs1
        z = zeta.ravel()
        powers = np.vander(z, c.shape[-1], increasing=True)
        g = np.sum(c * powers, axis=1)
        gt = np.sum(dc * powers, axis=1)
        k = np.arange(1, c.shape[-1])
        gz = np.sum(c[:, 1:] * k * powers[:, :-1], axis=1)
        return g.reshape(zeta.shape), gz.reshape(zeta.shape), gt.reshape(zeta.shape)

    # convenience views for one-parameter planar families
    @property
    def planar(self) -> bool:
        return self.ambient_dim == 1 and self.params.ndim == 1

    def require_planar(self, what: str):
        if not self.planar:
            raise ConfigurationError(f"{what} needs a one-parameter family in C")

    @property
    def coeffs1(self) -> np.ndarray:
        """``(M, K)`` Taylor data of a planar family."""
        return self.taylor_data[:, 0, :]

    @property
    def dt_coeffs1(self) -> np.ndarray:
        return self.dt_data[:, 0, 0, :]

    @property
    def t_nodes(self) -> np.ndarray:
        return self.params.nodes


# ---------------------------------------------------------------------------
# builders


def build_rotating_circles(R: float, r: float, resolution: int = 256) -> DiscFamily:
    """``g_t(zeta) = R e^{it} + r zeta`` over the circle."""
    if r <= 0 or R < 0:
        raise ConfigurationError("rotating circles need r > 0 and R >= 0")
    params = ParamSpace(CIRCLE, resolution)
    data = np.zeros((resolution, 1, 2), dtype=complex)
    data[:, 0, 0] = R * np.exp(1j * params.nodes)
    data[:, 0, 1] = r
    return DiscFamily(1, params, data, {"builder": "rotating_circles", "R": R, "r": r,
                                        "resolution": resolution})


def build_translated_circles(rho: float, center_path, resolution: int = 256) -> DiscFamily:
    """Circles of radius ``rho`` whose centres follow a spline through ``center_path``."""
    if rho <= 0:
        raise ConfigurationError("translated circles need rho > 0")
    path = np.asarray(center_path, dtype=complex).ravel()
    if path.size < 2:
        raise ConfigurationError("center_path needs at least two points")
    params = ParamSpace(INTERVAL, resolution)
    knots = np.linspace(0.0, 1.0, path.size)
    spline = make_interp_spline(knots, path, k=min(3, path.size - 1))
    data = np.zeros((resolution, 1, 2), dtype=complex)
    data[:, 0, 0] = spline(params.nodes)
    data[:, 0, 1] = rho
    return DiscFamily(1, params, data, {"builder": "translated_circles", "rho": rho,
                                        "center_path": path.tolist(), "resolution": resolution})


def build_custom(taylor_table, params: ParamSpace, ambient_dim: int | None = None) -> DiscFamily:
    """Wrap user-supplied node Taylor data verbatim.

    ``taylor_table`` has shape ``params.shape + (n, K)``, or ``params.shape + (K,)``
    for planar families.
    """
    table = np.asarray(taylor_table, dtype=complex)
    if ambient_dim is None:
        ambient_dim = 2 if params.kind == BOX3 else 1
    if table.ndim == len(params.shape) + 1:
        table = table[..., None, :]
    return DiscFamily(ambient_dim, params, table, {"builder": "custom"})


def _box3_params(resolution: int, radius: float) -> ParamSpace:
    return ParamSpace(BOX3, resolution, sphere_radius=radius)


def build_tangent_lines(ball_radius: float, inner_radius: float, resolution: int = 8) -> DiscFamily:
    """Discs cut from the ball by complex tangent lines of a smaller concentric sphere."""
    s = inner_radius
    if not 0 < s < ball_radius:
        raise ConfigurationError("tangent lines need 0 < inner_radius < ball_radius")
    params = _box3_params(resolution, s)
    p = params.sphere_points()
    dp = params.sphere_jacobian()
    v = np.stack([-np.conj(p[..., 1]), np.conj(p[..., 0])], axis=-1) / s
    dv = np.stack([-np.conj(dp[..., 1]), np.conj(dp[..., 0])], axis=-1) / s
    rho = np.sqrt(ball_radius ** 2 - s ** 2)
    data = np.stack([p, rho * v], axis=-1)
    dt = np.stack([dp, rho * dv], axis=-1)
    return DiscFamily(2, params, data, {"builder": "tangent_lines", "ball_radius": ball_radius,
                                        "inner_radius": s, "resolution": resolution}, dt)


def build_hopf_discs(resolution: int = 8) -> DiscFamily:
    """``g_t(zeta) = zeta (a(t), b(t))`` with ``(a, b)`` on the unit sphere."""
    params = _box3_params(resolution, 1.0)
    p = params.sphere_points()
    data = np.zeros(p.shape + (2,), dtype=complex)
    data[..., 1] = p
    dt = np.zeros(params.shape + (3, 2, 2), dtype=complex)
    dt[..., 1] = params.sphere_jacobian()
    return DiscFamily(2, params, data, {"builder": "hopf_discs", "resolution": resolution}, dt)


# ---------------------------------------------------------------------------
# closure intersection


@dataclass(frozen=True)
class IntersectionResult:
    empty: bool
    witness: complex | None
    cell: float
    resolution: int = 512


def _hull_extent(family: DiscFamily, size: int = 256) -> tuple[np.ndarray, float]:
    pts = family.grid_values(family.boundary_points(size))[:, 0, :].ravel()
    lo = np.array([pts.real.min(), pts.imag.min()])
    hi = np.array([pts.real.max(), pts.imag.max()])
    return np.concatenate([lo, hi]), float(np.hypot(*(hi - lo)))


class _DiscMembership:
    """Point-in-closed-disc tests with a half-cell outward tolerance."""

    def __init__(self, family: DiscFamily, slack: float, samples: int = 512):
        self.family = family
        self.slack = slack
        self.linear = family.is_linear
        self.samples = samples
        self._boundary = family.boundary_points(samples)

    def __call__(self, node: int, z: np.ndarray) -> np.ndarray:
        coeffs = self.family.coeffs1[node]
        if self.linear:
            return np.abs(z - coeffs[0]) <= abs(coeffs[1]) + self.slack
        from matplotlib.path import Path

        curve = poly_eval(coeffs, self._boundary)
        verts = np.column_stack([curve.real, curve.imag])
        inside = Path(verts).contains_points(np.column_stack([z.real, z.imag]))
        near = cKDTree(verts).query(np.column_stack([z.real, z.imag]))[0]
        spacing = np.max(np.abs(np.diff(np.append(curve, curve[0]))))
        return inside | (near <= self.slack + spacing)


def closure_intersection_empty(family: DiscFamily, resolution: int = 512) -> IntersectionResult:
    """Grid-certified test whether all closed discs share a point.

    Cells of size ``diam / resolution`` covering one disc are intersected with
    every other disc in turn; a cell survives if it touches all of them.
    """
    family.require_planar("closure intersection")
    _, diam = _hull_extent(family)
    h = diam / resolution
    member = _DiscMembership(family, slack=h / np.sqrt(2.0))
    radii = np.sum(np.abs(family.coeffs1[:, 1:]), axis=-1)
    start = int(np.argmin(radii))
    c0 = family.coeffs1[start]
    curve = poly_eval(c0, family.boundary_points(512))
    xs = np.arange(curve.real.min() - h, curve.real.max() + 2 * h, h)
    ys = np.arange(curve.imag.min() - h, curve.imag.max() + 2 * h, h)
    pts = (xs[None, :] + 1j * ys[:, None]).ravel()
    pts = pts[member(start, pts)]
    for node in range(len(family.coeffs1)):
        if pts.size == 0:
            break
        pts = pts[member(node, pts)]
    if pts.size == 0:
        return IntersectionResult(True, None, h, resolution)
    centroid = complex(pts.mean())
    in_all = all(member(node, np.array([centroid]))[0] for node in range(len(family.coeffs1)))
    witness = centroid if in_all else complex(pts[np.argmin(np.abs(pts - centroid))])
    return IntersectionResult(False, witness, h, resolution)


# ---------------------------------------------------------------------------
# regularity audit


@dataclass(frozen=True)
class RegularityReport:
    interior_rank_ok: bool
    boundary_rank_histogram: dict
    critical_on_boundary: bool
    min_interior_jacobian: float
    expected_rank: int
    critical_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, complex))
    raster_cell: float = 0.0

    @property
    def regular(self) -> bool:
        return self.interior_rank_ok and self.critical_on_boundary


def _real_columns(cols: np.ndarray) -> np.ndarray:
    """Stack complex columns ``(..., n, c)`` into real matrices ``(..., 2n, c)``."""
    return np.concatenate([cols.real, cols.imag], axis=-2)


def _ranks(mats: np.ndarray, rel: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    sv = np.linalg.svd(mats, compute_uv=False)
    scale = sv.max() if sv.size else 0.0
    return np.sum(sv > rel * max(scale, 1e-300), axis=-1), sv


def boundary_differential(family: DiscFamily, size: int):
    """Columns ``(d_psi G, d_t1 G, ...)`` on the boundary grid, ``params.shape + (size, n, 1 + ndim)``."""
    zeta = family.boundary_points(size)
    dpsi = 1j * zeta * family.grid_d_zeta(zeta)
    dt = family.grid_d_t(zeta)
    cols = np.concatenate([dpsi[..., None, :, :], dt], axis=-3)  # params + (1+ndim, n, size)
    return np.moveaxis(cols, (-3, -1), (-1, -3))


def raster_boundary(points: np.ndarray, cell: float):
    """Topological boundary of the union of cells hit by ``points``.

    Returns the boundary cell centres and the occupancy mask with its origin.
    """
    lo = np.array([points.real.min(), points.imag.min()]) - 2 * cell
    idx = np.floor((np.column_stack([points.real, points.imag]) - lo) / cell).astype(int)
    shape = idx.max(axis=0) + 3
    occ = np.zeros(shape, dtype=bool)
    occ[idx[:, 0], idx[:, 1]] = True
    inner = ndimage.binary_erosion(occ, structure=ndimage.generate_binary_structure(2, 1))
    edge = occ & ~inner
    ij = np.argwhere(edge)
    centres = (lo[0] + (ij[:, 0] + 0.5) * cell) + 1j * (lo[1] + (ij[:, 1] + 0.5) * cell)
    return centres, occ, lo


def boundary_jacobian(family: DiscFamily, size: int = 256) -> np.ndarray:
    """``det[grad G, grad conj G]`` with rows ``(d_t, d_psi)`` on the boundary grid.

    Shape ``(M, size)`` with ``psi = 2 pi k / size``. Purely imaginary.
    """
    family.require_planar("boundary_jacobian")
    zeta = family.boundary_points(size)
    g_psi = (1j * zeta * family.grid_d_zeta(zeta))[:, 0, :]
    g_t = family.grid_d_t(zeta)[:, 0, 0, :]
    return g_t * np.conj(g_psi) - g_psi * np.conj(g_t)


def regularity_audit(family: DiscFamily, size: int = 256, interior: int = 32,
                     max_param_samples: int = 64) -> RegularityReport:
    """Sample the rank conditions of a regular family of discs."""
    n = family.ambient_dim
    k = 2 * n - 1 + (1 if n == 1 else 0)  # 2 for planar families, 3 for hypersurfaces
    # interior: real differential in (Re zeta, Im zeta, t...)
    r = (np.arange(interior) + 0.5) / interior
    theta = 2.0 * np.pi * np.arange(interior) / interior
    zeta = np.outer(r, np.exp(1j * theta)).ravel()
    stride = max(1, int(np.ceil(family.params.resolution / max_param_samples)))
    sl = (slice(None, None, stride),) if family.params.kind != BOX3 else \
        (slice(None), slice(None, None, stride), slice(None, None, stride), slice(None, None, stride))
    gz = poly_eval(family.dzeta_data[sl], zeta)  # p + (n, Z)
    gt = poly_eval(family.dt_data[sl], zeta)  # p + (ndim, n, Z)
    cols = np.concatenate([gz[..., None, :, :], 1j * gz[..., None, :, :], gt], axis=-3)
    mats = _real_columns(np.moveaxis(cols, (-3, -1), (-1, -3)))
    valid = family.params.valid_mask[sl]
    ranks, sv = _ranks(mats[valid])
    interior_ok = bool(np.all(ranks == 2 * n))
    min_jac = float(sv[..., 2 * n - 1].min())

    bmats = _real_columns(boundary_differential(family, size))
    bvalid = family.params.valid_mask
    branks, _ = _ranks(bmats[bvalid])
    hist = {"rank_k": int(np.sum(branks == k)), "rank_k_minus_1": int(np.sum(branks == k - 1)),
            "below": int(np.sum(branks < k - 1))}
    deficient = np.zeros(family.params.shape + (size,), dtype=bool)
    deficient[bvalid] = branks < k
    critical = np.zeros(0, dtype=complex)
    on_boundary = not deficient.any()
    cell = 0.0
    if n == 1:
        values = family.grid_values(family.boundary_points(size))[:, 0, :]
        critical = values[deficient]
        mesh = max(np.abs(np.diff(values, axis=1)).max(), np.abs(np.diff(values, axis=0)).max())
        cell = 3.0 * mesh
        if critical.size:
            edge, _, _ = raster_boundary(values.ravel(), cell)
            dist = cKDTree(np.column_stack([edge.real, edge.imag])).query(
                np.column_stack([critical.real, critical.imag]))[0]
            on_boundary = bool(np.all(dist <= 2.0 * cell))
    return RegularityReport(interior_ok, hist, bool(on_boundary), min_jac, k, critical, cell)


def critical_values(family: DiscFamily, size: int = 256) -> np.ndarray:
    """Images of the critical curve of ``G`` on the boundary torus or cylinder.

    The real quantity ``Im det[grad G, grad conj G]`` changes sign across the
    critical curve; crossings along grid edges are located by linear interpolation.
    """
    family.require_planar("critical value location")
    zeta = family.boundary_points(size)
    gpsi = (1j * zeta * family.grid_d_zeta(zeta))[:, 0, :]
    gt = family.grid_d_t(zeta)[:, 0, 0, :]
    det = 2.0 * np.imag(gt * np.conj(gpsi))
    vals = family.grid_values(zeta)[:, 0, :]
    out = [vals[det == 0.0]]
    for axis in (0, 1):
        if axis == 0 and not family.params.periodic:
            a, b = det[:-1], det[1:]
            va, vb = vals[:-1], vals[1:]
        else:
            a, b = det, np.roll(det, -1, axis=axis)
            va, vb = vals, np.roll(vals, -1, axis=axis)
        cross = (a * b < 0)
        lam = a[cross] / (a[cross] - b[cross])
        out.append(va[cross] + lam * (vb[cross] - va[cross]))
    return np.concatenate(out)
